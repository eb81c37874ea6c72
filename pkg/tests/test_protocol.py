"""Tests for honest runs, concealment, binding and the scans."""

import numpy as np
import pytest

from qbclab.attack import OptimizerConfig
from qbclab.entangle import CommitmentEnsemble, uhlmann_cheat
from qbclab.errors import UnsupportedScanError, ValidationError
from qbclab.linalg import SeededRng, StateVector, SubsystemLayout, apply_local, random_unitary
from qbclab.protocol import (
    Commitment,
    binding,
    closed_form_bounds,
    concealment,
    psi_variation_scan,
    run_honest,
    us_curve,
)
from qbclab.zoo import perm4_spec, preset_ensemble, qbc1_spec, simple_m_spec

from conftest import ket

FAST = OptimizerConfig(restarts=2, max_evaluations=200)


def qubit(*amps):
    return StateVector(ket(*amps), SubsystemLayout.qubits("b"))


def simple(name):
    return simple_m_spec(preset_ensemble(name))


ZOO = {
    "simple-m": lambda: simple("bb84"),
    "simple-m-overlap": lambda: simple("overlap"),
    "perm4": lambda: perm4_spec(),
    "perm4-entangled": lambda: perm4_spec(babe_entangled=True),
    "qbc1-swap": lambda: qbc1_spec(2, "swap"),
    "qbc1-fresh": lambda: qbc1_spec(2, "fresh"),
    "qbc1-unknown": lambda: qbc1_spec(2, adam_knows_method=False),
    "qbc1-coherent": lambda: qbc1_spec(2, coherent_selection=True),
    "qbc1-adam-evidence": lambda: qbc1_spec(2, evidence_holder="adam"),
}


# -- honest runs -------------------------------------------------------------------


def test_honest_simple_m():
    t = run_honest(simple("bb84"), 0, SeededRng(1))
    assert t.accepted
    assert t.announced["b"] == 0 and t.announced["i0"] in (0, 1)
    assert t.seed == 1


def test_honest_qbc1():
    t = run_honest(qbc1_spec(2), 1, SeededRng(2))
    assert t.accepted
    assert len(t.announced["states"]) == 2
    assert set(t.outcomes["classical_record"]) == {"F"}


def test_honest_perm4_announces_shift():
    t = run_honest(perm4_spec(), 0, SeededRng(3))
    assert t.accepted and t.announced["m"] == t.announced["i0"]


def test_honest_rejects_bad_bit():
    with pytest.raises(ValidationError):
        run_honest(simple("bb84"), 2, SeededRng(0))


@pytest.mark.parametrize("name", sorted(ZOO))
def test_honest_completeness(name):
    spec = ZOO[name]()
    root = SeededRng(4)
    for b in (0, 1):
        for s in range(100):
            t = run_honest(spec, b, root.spawn(b).spawn(s))
            assert t.accepted
            assert abs(t.outcomes["accept_probability"] - 1) <= 1e-9


def test_honest_announcement_frequencies():
    spec = simple("bb84")
    root = SeededRng(5)
    n = 10_000
    counts = np.zeros(2)
    for s in range(n):
        counts[run_honest(spec, s % 2, root.spawn(s)).announced["i0"]] += 1
    np.testing.assert_allclose(counts / n, [0.5, 0.5], atol=0.02)


def test_honest_transcript_deterministic():
    spec = qbc1_spec(2, adam_knows_method=False)
    a = run_honest(spec, 1, SeededRng(6)).to_dict()
    b = run_honest(spec, 1, SeededRng(6)).to_dict()
    assert a == b


# -- concealment -------------------------------------------------------------------


def test_concealment_perfect():
    assert abs(concealment(simple("bb84")).p_b_cheat - 0.5) <= 1e-12


def test_concealment_orthogonal_evidence():
    assert abs(concealment(simple("orthogonal")).p_b_cheat - 1) <= 1e-12


def test_concealment_perm4_b12_b2():
    assert abs(concealment(perm4_spec(), ["B12", "B2"]).p_b_cheat - 0.5) <= 1e-12


@pytest.mark.parametrize("name", sorted(ZOO))
def test_concealment_invariant_under_adam_unitaries(name):
    spec = ZOO[name]()
    for w, com in spec.build():
        before = [r.matrix for r in com.babe_states()]
        layout = com.layout
        d = layout.dim_of(com.adam_acting)
        u = random_unitary(d, SeededRng(7))
        moved = [apply_local(p, u, com.adam_acting) for p in com.phi]
        after = Commitment(
            name=com.name, phi=tuple(moved), open_labels=com.open_labels,
            verify_labels=com.verify_labels, verify=com.verify, babe_kept=com.babe_kept,
            adam_held=com.adam_held, adam_acting=com.adam_acting, classical=com.classical,
        ).babe_states()
        for x, y in zip(before, after):
            assert np.max(np.abs(x - y.matrix)) <= 1e-12


def test_concealment_unknown_method_is_worst_case():
    both = concealment(qbc1_spec(2, adam_knows_method=False, coherent_selection=True)).p_b_cheat
    each = [concealment(qbc1_spec(2, m, coherent_selection=True)).p_b_cheat for m in ("swap", "fresh")]
    assert abs(both - max(each)) <= 1e-12


# -- binding -----------------------------------------------------------------------


def test_binding_perfectly_concealing_unconstrained():
    rep = binding(simple("bb84"), OptimizerConfig(), SeededRng(8))
    assert abs(rep.projective_bound - 1) <= 1e-9
    assert rep.measured.best_p >= 0.999
    assert rep.cheats[0].best_p >= 0.999
    assert rep.us_epsilon >= 0


def test_binding_orthogonal_evidence():
    rep = binding(simple("orthogonal"), FAST, SeededRng(9))
    assert rep.projective_bound <= 1e-9
    assert rep.measured.best_p <= 1e-9
    assert abs(rep.us_epsilon - 0.5) <= 1e-12


def test_binding_perm4_gap():
    rep = binding(perm4_spec(acting="a1"), OptimizerConfig(restarts=4), SeededRng(10))
    assert rep.cheats[0].best_p <= rep.projective_bound + 1e-6
    assert rep.measured.best_p < rep.unconstrained_bound - 1e-3
    assert rep.projective_bound < rep.unconstrained_bound
    assert rep.cheats[0].closed_form_bound == rep.projective_bound
    assert rep.measured.closed_form_bound is None


def test_binding_report_serializes():
    d = binding(simple("overlap"), FAST, SeededRng(11)).to_dict()
    assert [c["objective"] for c in d["cheats"]] == ["mixture(projective)", "mixture(acceptance)"]


@pytest.mark.parametrize("name", ["simple-m", "simple-m-overlap", "perm4", "perm4-entangled"])
def test_projective_best_never_exceeds_closed_form(name):
    rep = binding(ZOO[name](), FAST, SeededRng(12))
    assert rep.cheats[0].best_p <= rep.projective_bound + 1e-6


def test_measurement_acceptance_can_exceed_projective_bound():
    """Checking only the announced state is weaker than projecting onto |Phi_1>.

    Adam commits |0> for sure, Babe's bit-1 ensemble is {|0>, |1>} at 1/2 each:
    announcing i0 = 0 always passes, while the fidelity bound is 1/2.
    """
    ens = CommitmentEnsemble(
        (np.array([1.0, 0.0]), np.array([0.5, 0.5])),
        ((qubit(1, 0), qubit(0, 1)), (qubit(1, 0), qubit(0, 1))),
    )
    rep = binding(simple_m_spec(ens), FAST, SeededRng(13))
    assert abs(rep.projective_bound - 0.5) <= 1e-12
    assert rep.measured.best_p >= 1 - 1e-9


def test_perfectly_concealing_zoo_specs_have_unit_unconstrained_bound():
    for spec in (simple("bb84"), perm4_spec(), qbc1_spec(1)):
        if abs(concealment(spec).p_b_cheat - 0.5) > 1e-12:
            continue
        _, unconstrained = closed_form_bounds(spec)
        assert unconstrained >= 1 - 1e-9


# -- scans -------------------------------------------------------------------------


def test_psi_scan_prescribed_point():
    spec = qbc1_spec(2)
    (point,) = psi_variation_scan(spec, [spec.weights])
    assert point.report == concealment(spec)
    assert not point.flagged


def test_psi_scan_skewed_weights():
    spec = qbc1_spec(2, coherent_selection=True)
    base, skew = psi_variation_scan(spec, [(0.5, 0.5), (0.9, 0.1)])
    assert skew.report.p_b_cheat == concealment(spec.with_weights((0.9, 0.1))).p_b_cheat
    assert skew.flagged == (skew.report.p_b_cheat > base.report.p_b_cheat + 1e-9)
    classical = psi_variation_scan(qbc1_spec(2), [(0.5, 0.5), (0.9, 0.1)])
    assert not any(p.flagged for p in classical)


def test_psi_scan_degenerate_weight_is_pure_choice():
    """With a single purification term, keeping the pick coherent changes nothing."""
    (coherent,) = psi_variation_scan(qbc1_spec(2, coherent_selection=True), [(1.0, 0.0)])
    (classical,) = psi_variation_scan(qbc1_spec(2), [(1.0, 0.0)])
    for key in ("p_b_cheat", "trace_distance", "fidelity"):
        assert abs(getattr(coherent.report, key) - getattr(classical.report, key)) <= 1e-12


def test_psi_scan_unsupported():
    with pytest.raises(UnsupportedScanError):
        psi_variation_scan(simple("bb84"), [(1.0,)])


def test_psi_scan_perm4_flags_nothing():
    grid = [(0.25,) * 4, (0.7, 0.1, 0.1, 0.1), (1.0, 0, 0, 0)]
    assert not any(p.flagged for p in psi_variation_scan(perm4_spec(), grid))


def test_us_curve_constant_family():
    rows = us_curve(lambda n: simple("overlap"), [1, 2, 3], FAST, SeededRng(14))
    assert [r["n"] for r in rows] == [1, 2, 3]
    for key in ("p_b_cheat", "bound"):
        assert len({r[key] for r in rows}) == 1


def test_us_curve_qbc1_concealment():
    rows = us_curve(qbc1_spec, [1, 2, 3], OptimizerConfig(restarts=1, max_evaluations=30), SeededRng(15))
    for r in rows:
        assert abs(r["p_b_cheat"] - 0.5) <= 1e-12


def test_closed_form_bounds_are_weighted_uhlmann():
    spec = qbc1_spec(2, adam_knows_method=False)
    acting, _ = closed_form_bounds(spec)
    want = sum(w * uhlmann_cheat(c.phi[0], c.phi[1], c.adam_acting).p_success for w, c in spec.build())
    assert abs(acting - want) <= 1e-15
