"""Tests for the command-line runner."""

import json
import math

import pytest

from qbclab import __version__
from qbclab.cli import EXIT_OK, EXIT_USAGE, SCHEMA_VERSION, bounds_scan, main, UsageError


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def run_json(capsys, *argv):
    code, out, err = run(capsys, *argv)
    assert code == EXIT_OK, err
    return json.loads(out)


def walk_numbers(obj):
    if isinstance(obj, dict):
        for v in obj.values():
            yield from walk_numbers(v)
    elif isinstance(obj, list):
        for v in obj:
            yield from walk_numbers(v)
    elif isinstance(obj, float):
        yield obj


def test_provenance_fields(capsys):
    d = run_json(capsys, "bounds-scan", "--samples", "2", "--seed", "5")
    assert d["schema_version"] == SCHEMA_VERSION
    assert d["version"] == __version__
    assert d["seed"] == 5
    assert d["config"]["samples"] == 2
    assert d["violations"] == []


def test_bounds_scan_concealing_row(capsys):
    d = run_json(capsys, "bounds-scan", "--samples", "1", "--construction", "concealing", "--seed", "3")
    (row,) = d["result"]["rows"]
    assert abs(row["p_b_cheat"] - 0.5) <= 1e-12
    for key in ("fidelity", "eq2_lower", "eq2_upper"):
        assert abs(row[key] - 1) <= 1e-12
    assert row["sandwich_ok"] is True


def test_bounds_scan_no_violations():
    res = bounds_scan(500, 8, seed=1)
    assert res["summary"]["violations"] == 0
    assert len(res["rows"]) == 500


@pytest.mark.parametrize("argv", [
    ["bounds-scan", "--samples", "0"],
    ["bounds-scan", "--max-dim", "9"],
    ["bounds-scan", "--seed", "-1"],
    ["protocol", "nope"],
    ["protocol", "qbc1", "--n", "4"],
    ["protocol", "simple-m", "--analysis", "psi-scan"],
    ["protocol", "simple-m", "--states", "missing"],
    ["protocol", "perm4", "--analysis", "bind", "--format", "csv"],
    ["protocol", "perm4", "--analysis", "bind", "--restarts", "0"],
    ["protocol", "qbc1", "--analysis", "frobnicate"],
    ["protocol", "qbc1", "--unknown-method", "--evidence-holder", "adam"],
])
def test_usage_errors(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == EXIT_USAGE
    assert err


def test_bounds_scan_rejects_zero_samples_directly():
    with pytest.raises(UsageError):
        bounds_scan(0, 8, seed=0)


def test_protocol_qbc1_conceal(capsys):
    d = run_json(capsys, "protocol", "qbc1", "--n", "2", "--analysis", "conceal")
    assert abs(d["result"]["concealment"]["p_b_cheat"] - 0.5) <= 1e-12


def test_protocol_perm4_bind(capsys):
    d = run_json(capsys, "protocol", "perm4", "--analysis", "bind", "--acting", "a1", "--restarts", "4")
    b = d["result"]["binding"]
    assert b["cheats"][1]["best_p"] < b["unconstrained_bound"]
    assert b["cheats"][0]["best_p"] <= b["projective_bound"] + 1e-6
    assert b["cheats"][0]["best_p_kind"] == "lower bound"


def test_protocol_simple_m_bind(capsys):
    d = run_json(capsys, "protocol", "simple-m", "--states", "bb84", "--analysis", "bind")
    b = d["result"]["binding"]
    assert abs(b["projective_bound"] - 1) <= 1e-9
    assert b["cheats"][0]["closed_form_bound"] == b["projective_bound"]


def test_protocol_honest_csv(capsys):
    code, out, _ = run(capsys, "protocol", "qbc1", "--analysis", "honest", "--runs", "2", "--format", "csv")
    assert code == EXIT_OK
    lines = out.strip().splitlines()
    assert lines[0].startswith("# schema_version=")
    assert lines[1] == "bit,run,accepted,i0,accept_probability"
    assert len(lines) == 2 + 4
    assert all(",True," in line for line in lines[2:])


def test_protocol_psi_scan(capsys):
    d = run_json(capsys, "protocol", "qbc1", "--analysis", "psi-scan", "--grid", "0.5,0.5;0.9,0.1")
    assert [p["weights"] for p in d["result"]["scan"]] == [[0.5, 0.5], [0.9, 0.1]]


def test_protocol_us_curve(capsys):
    d = run_json(capsys, "protocol", "qbc1", "--analysis", "us-curve", "--n-values", "1,2",
                 "--restarts", "1", "--max-evals", "20")
    assert [r["n"] for r in d["result"]["rows"]] == [1, 2]


def test_perm4_bell_pairs(capsys):
    d = run_json(capsys, "protocol", "perm4", "--babe-entangled", "--babe-psi", "bell-pairs")
    assert d["result"]["concealment"]["p_b_cheat"] > 0.5


def test_out_file(tmp_path, capsys):
    path = tmp_path / "r.json"
    code, out, _ = run(capsys, "bounds-scan", "--samples", "3", "--out", str(path))
    assert code == EXIT_OK and out == ""
    assert json.loads(path.read_text())["result"]["summary"]["samples"] == 3


def test_out_file_error_names_path(tmp_path, capsys):
    bad = tmp_path / "missing" / "r.json"
    code, _, err = run(capsys, "bounds-scan", "--samples", "1", "--out", str(bad))
    assert code == EXIT_USAGE
    assert str(bad) in err


@pytest.mark.parametrize("argv", [
    ["bounds-scan", "--samples", "20", "--seed", "123"],
    ["protocol", "perm4", "--analysis", "bind", "--restarts", "3", "--seed", "9"],
    ["protocol", "qbc1", "--analysis", "honest", "--runs", "3", "--seed", "2"],
    ["protocol", "qbc1", "--analysis", "psi-scan"],
])
def test_byte_identical_reruns(tmp_path, capsys, argv):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    assert main(argv + ["--out", str(a)]) == EXIT_OK
    assert main(argv + ["--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()
    assert all(math.isfinite(x) for x in walk_numbers(json.loads(a.read_text())))


def test_different_seeds_differ(capsys):
    a = run(capsys, "bounds-scan", "--samples", "3", "--seed", "1")[1]
    b = run(capsys, "bounds-scan", "--samples", "3", "--seed", "2")[1]
    assert a != b
