"""Command-line runner: ``qbclab bounds-scan`` and ``qbclab protocol``.

Every report embeds the package version, the full configuration and the
seed, and is written with sorted keys so identical runs give identical
bytes. Exit codes: 0 success, 1 invariant violation, 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from typing import Any

import numpy as np

from . import __version__
from .attack import OptimizerConfig
from .distinguish import concealment_report
from .errors import QbcError, UnsupportedScanError
from .linalg import SeededRng, SubsystemLayout, apply_local, partial_trace, random_pure_state, random_unitary
from .protocol import binding, concealment, psi_variation_scan, run_honest, us_curve
from .zoo import bell_pairs_psi, perm4_spec, preset_ensemble, qbc1_spec, simple_m_spec

SCHEMA_VERSION = 1
EXIT_OK, EXIT_VIOLATION, EXIT_USAGE = 0, 1, 2
PROTOCOLS = ("simple-m", "perm4", "qbc1")
ANALYSES = ("conceal", "bind", "honest", "psi-scan", "us-curve")
BOUND_SLACK = 1e-6


class UsageError(Exception):
    """Bad flags or flag combinations; maps to exit code 2."""


def _jsonable(obj: Any) -> Any:
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x} in report")
        return x
    if isinstance(obj, complex):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    return obj


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="master seed (unsigned 64-bit)")
    common.add_argument("--out", default=None, help="output path (default: stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--restarts", type=int, default=OptimizerConfig.restarts)
    common.add_argument("--max-evals", type=int, default=OptimizerConfig.max_evaluations,
                        help="objective evaluations per restart")

    parser = argparse.ArgumentParser(prog="qbclab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"qbclab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    scan = sub.add_parser("bounds-scan", parents=[common],
                          help="check the cheating-probability sandwich on random instances")
    scan.add_argument("--samples", type=int, default=500)
    scan.add_argument("--max-dim", type=int, default=8, help="largest dimension of either side (<= 8)")
    scan.add_argument("--construction", choices=("random", "concealing"), default="random",
                      help="'concealing' draws the second state as a local unitary of the first")

    proto = sub.add_parser("protocol", parents=[common], help="analyse a protocol from the zoo")
    proto.add_argument("name", help=f"one of {', '.join(PROTOCOLS)}")
    proto.add_argument("--analysis", choices=ANALYSES, default="conceal")
    proto.add_argument("--states", default="bb84", help="simple-m ensemble preset")
    proto.add_argument("--acting", choices=("a1", "all"), default="a1", help="perm4 cheat scope")
    proto.add_argument("--babe-entangled", action="store_true", help="perm4: Babe keeps B2 coherent")
    proto.add_argument("--babe-psi", choices=("prescribed", "bell-pairs"), default="prescribed",
                       help="perm4: Babe's state on B1 (x) B2")
    proto.add_argument("--n", type=int, default=2, help="qbc1 number of qubits")
    proto.add_argument("--method", choices=("swap", "fresh"), default="swap", help="qbc1 selection method")
    proto.add_argument("--unknown-method", action="store_true", help="qbc1: Adam does not know the method")
    proto.add_argument("--coherent-selection", action="store_true", help="qbc1: Babe keeps her pick coherent")
    proto.add_argument("--evidence-holder", choices=("babe", "adam"), default="babe")
    proto.add_argument("--keep", default=None, help="conceal: comma-separated labels Babe may use")
    proto.add_argument("--runs", type=int, default=10, help="honest: runs per bit")
    proto.add_argument("--grid", default=None,
                       help="psi-scan: weight vectors separated by ';', entries by ','")
    proto.add_argument("--n-values", default="1,2,3", help="us-curve: comma-separated n values")
    return parser


# -- bounds-scan -------------------------------------------------------------------

def bounds_scan(samples: int, max_dim: int, seed: int, construction: str = "random") -> dict:
    """Sandwich check on ``samples`` random bipartite pure-state pairs.

    Each sample draws ``dA, dB`` uniformly from ``2..max_dim`` and two states on
    A (x) B; Babe holds B. With ``construction="concealing"`` the second state
    is a random unitary on A applied to the first, so both reductions agree.
    """
    if samples < 1:
        raise UsageError(f"--samples must be >= 1, got {samples}")
    if not 2 <= max_dim <= 8:
        raise UsageError(f"--max-dim must lie in 2..8, got {max_dim}")
    root = SeededRng(seed)
    rows = []
    for i in range(samples):
        r = root.spawn(i)
        da, db = (int(x) for x in r.generator().integers(2, max_dim + 1, size=2))
        layout = SubsystemLayout.of(("A", da), ("B", db))
        psi0 = random_pure_state(layout, r.spawn(0))
        if construction == "concealing":
            psi1 = apply_local(psi0, random_unitary(da, r.spawn(1)), ["A"])
        else:
            psi1 = random_pure_state(layout, r.spawn(1))
        rep = concealment_report(partial_trace(psi0, ["B"]), partial_trace(psi1, ["B"]))
        rows.append({
            "sample": i, "dA": da, "dB": db,
            "p_b_cheat": rep.p_b_cheat, "fidelity": rep.fidelity,
            "eq2_lower": rep.eq2_lower, "eq2_upper": rep.eq2_upper,
            "sandwich_ok": rep.sandwich_ok,
        })
    violations = sum(not row["sandwich_ok"] for row in rows)
    return {"rows": rows, "summary": {"samples": samples, "violations": violations}}


# -- protocol ----------------------------------------------------------------------

def make_spec(args, n: int | None = None):
    name = args.name
    if name == "simple-m":
        return simple_m_spec(preset_ensemble(args.states))
    if name == "perm4":
        psi = bell_pairs_psi() if args.babe_psi == "bell-pairs" else None
        return perm4_spec(babe_entangled=args.babe_entangled, acting=args.acting, babe_psi=psi)
    if name == "qbc1":
        return qbc1_spec(
            args.n if n is None else n,
            babe_method=args.method,
            adam_knows_method=not args.unknown_method,
            coherent_selection=args.coherent_selection,
            evidence_holder=args.evidence_holder,
        )
    raise UsageError(f"unknown protocol {name!r}; choose from {', '.join(PROTOCOLS)}")


def _parse_grid(text: str) -> list[list[float]]:
    try:
        return [[float(x) for x in part.split(",")] for part in text.split(";") if part.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --grid {text!r}: {exc}") from None


def _default_grid(size: int) -> list[list[float]]:
    grid = [[1.0 / size] * size]
    if size > 1:
        grid.append([0.9] + [0.1 / (size - 1)] * (size - 1))
    grid += [[1.0 if i == j else 0.0 for i in range(size)] for j in range(size)]
    return grid


def run_protocol(args) -> tuple[dict, list[str]]:
    """Dispatch one protocol analysis; returns the result and any invariant violations."""
    spec = make_spec(args)
    cfg = OptimizerConfig(restarts=args.restarts, max_evaluations=args.max_evals)
    rng = SeededRng(args.seed)
    violations: list[str] = []
    result: dict[str, Any] = {"protocol": spec.describe()}

    if args.analysis == "conceal":
        keep = None if args.keep is None else [s.strip() for s in args.keep.split(",") if s.strip()]
        rep = concealment(spec, keep)
        result["concealment"] = rep.to_dict()
        result["keep"] = keep
        if not rep.sandwich_ok:
            violations.append("fidelity outside the cheating-probability sandwich")

    elif args.analysis == "bind":
        rep = binding(spec, cfg, rng)
        result["binding"] = rep.to_dict()
        proj = rep.cheats[0]
        if proj.best_p > rep.projective_bound + BOUND_SLACK:
            violations.append(f"projective best_p {proj.best_p} exceeds the closed form {rep.projective_bound}")
        if rep.us_epsilon < 0:
            violations.append("negative us_epsilon")

    elif args.analysis == "honest":
        if args.runs < 1:
            raise UsageError(f"--runs must be >= 1, got {args.runs}")
        rows = []
        for b in (0, 1):
            for i in range(args.runs):
                t = run_honest(spec, b, rng.spawn(b).spawn(i))
                rows.append(t.to_dict() | {"run": i})
                if not t.accepted:
                    violations.append(f"honest run rejected (b={b}, run={i})")
        result["transcripts"] = rows

    elif args.analysis == "psi-scan":
        if spec.weights is None:
            raise UnsupportedScanError(f"protocol {spec.name!r} has no Babe-side weight parameter")
        grid = _default_grid(len(spec.weights)) if args.grid is None else _parse_grid(args.grid)
        points = psi_variation_scan(spec, grid)
        result["scan"] = [
            {"weights": list(p.weights), "flagged": p.flagged, **p.report.to_dict()} for p in points
        ]

    elif args.analysis == "us-curve":
        try:
            ns = [int(x) for x in args.n_values.split(",") if x.strip()]
        except ValueError as exc:
            raise UsageError(f"bad --n-values {args.n_values!r}: {exc}") from None
        rows = us_curve(lambda n: make_spec(args, n), ns, cfg, rng)
        for row in rows:
            if row["projective_best_p"] > row["bound"] + BOUND_SLACK:
                violations.append(f"projective best_p exceeds the closed form at n={row['n']}")
        result["rows"] = rows

    return result, violations


# -- output ------------------------------------------------------------------------

def _table(command: str, analysis: str | None, result: dict) -> list[dict]:
    if command == "bounds-scan":
        return result["rows"]
    if analysis == "conceal":
        return [result["concealment"]]
    if analysis == "honest":
        return [
            {"bit": t["bit"], "run": t["run"], "accepted": t["accepted"],
             "i0": t["announced"]["i0"], "accept_probability": t["outcomes"]["accept_probability"]}
            for t in result["transcripts"]
        ]
    if analysis == "psi-scan":
        return [{**row, "weights": " ".join(repr(w) for w in row["weights"])} for row in result["scan"]]
    if analysis == "us-curve":
        return result["rows"]
    raise UsageError(f"--format csv is only available for flat tables, not for {analysis!r}")


def render(report: dict, fmt: str) -> str:
    if fmt == "json":
        return json.dumps(_jsonable(report), sort_keys=True, indent=2, allow_nan=False) + "\n"
    rows = _table(report["command"], report["config"].get("analysis"), report["result"])
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return f"# schema_version={SCHEMA_VERSION} version={__version__} seed={report['seed']}\n" + buf.getvalue()


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if not 0 <= args.seed < 2**64:
        print(f"error: --seed must be an unsigned 64-bit integer, got {args.seed}", file=sys.stderr)
        return EXIT_USAGE

    config = {k: v for k, v in sorted(vars(args).items()) if k not in ("out", "format")}
    try:
        if args.command == "bounds-scan":
            result = bounds_scan(args.samples, args.max_dim, args.seed, args.construction)
            violations = (
                [f"{result['summary']['violations']} sandwich violations"]
                if result["summary"]["violations"] else []
            )
        else:
            if args.name not in PROTOCOLS:
                raise UsageError(f"unknown protocol {args.name!r}; choose from {', '.join(PROTOCOLS)}")
            if args.format == "csv" and args.analysis == "bind":
                raise UsageError("--format csv is only available for flat tables, not for 'bind'")
            result, violations = run_protocol(args)
        report = {
            "schema_version": SCHEMA_VERSION,
            "version": __version__,
            "command": args.command,
            "config": config,
            "seed": args.seed,
            "result": result,
            "violations": violations,
        }
        text = render(report, args.format)
    except (UsageError, QbcError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    if args.out is None:
        sys.stdout.write(text)
    else:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"error: cannot write report to {args.out!r}: {exc.strerror}", file=sys.stderr)
            return EXIT_USAGE
    for v in violations:
        print(f"invariant violation: {v}", file=sys.stderr)
    return EXIT_VIOLATION if violations else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
