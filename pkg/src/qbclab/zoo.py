"""Concrete commitment protocols.

* ``simple_m_spec``: Adam sends one of M states per bit.
* ``perm4_spec``: Babe sends four qubits in one of four cyclic orderings of
  the S0 states, Adam permutes them cyclically, modulates the first qubit
  and sends only that one back, keeping the other three until opening.
* ``qbc1_spec``: Adam sends n qubits drawn from S0, Babe returns one of them
  for modulation, which then serves as evidence.

S0 sits on the real (X-Z) great circle at Bloch angles 0, pi/2, pi, 3pi/2 and
the pi shift is the real rotation ``[[0, -1], [1, 0]]``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .entangle import CommitmentEnsemble, committed_state
from .errors import CapacityError, ValidationError
from .linalg import (
    MAX_DIM,
    StateVector,
    SubsystemLayout,
    apply_local_array,
    permute_array,
)
from .protocol import Commitment, ProtocolSpec


@dataclass(frozen=True)
class S0Set:
    states: tuple[np.ndarray, ...]

    def projector_average(self) -> np.ndarray:
        return sum(np.outer(s, s.conj()) for s in self.states) / len(self.states)


@dataclass(frozen=True)
class PiShift:
    matrix: np.ndarray


def s0_states() -> S0Set:
    return S0Set(tuple(
        np.array([np.cos(j * np.pi / 4), np.sin(j * np.pi / 4)], dtype=complex) for j in range(4)
    ))


def pi_shift() -> PiShift:
    return PiShift(np.array([[0, -1], [1, 0]], dtype=complex))


_S0 = s0_states().states
_PI = pi_shift().matrix
_MOD = (np.eye(2, dtype=complex), _PI)


def _projector(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj()) / np.vdot(v, v).real


def _kron_all(vecs) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for v in vecs:
        out = np.kron(out, v)
    return out


# -- the M-state protocol ------------------------------------------------------

def _qubit(*amps) -> StateVector:
    return StateVector.from_unnormalized(np.array(amps, dtype=complex), SubsystemLayout.of(("b", 2)))


def preset_ensemble(name: str) -> CommitmentEnsemble:
    """Named ensembles reachable from the command line."""
    zero, one = _qubit(1, 0), _qubit(0, 1)
    plus, minus = _qubit(1, 1), _qubit(1, -1)
    half = np.array([0.5, 0.5])
    presets = {
        "bb84": (half, half, (zero, one), (plus, minus)),
        "orthogonal": ([1.0], [1.0], (zero,), (one,)),
        "degenerate": (half, half, (zero, plus), (zero, plus)),
        "overlap": (half, half, (zero, plus), (one, minus)),
    }
    if name not in presets:
        raise ValidationError(f"unknown ensemble preset {name!r}; choose from {sorted(presets)}")
    p0, p1, s0, s1 = presets[name]
    return CommitmentEnsemble((np.asarray(p0), np.asarray(p1)), (s0, s1))


def simple_m_spec(ens: CommitmentEnsemble, name: str = "simple-m") -> ProtocolSpec:
    """Adam commits ``sum_i sqrt(p_bi)|e_i>|phi_bi>`` and opens ``(b, i0)``.

    Babe accepts when her evidence passes ``|phi_{b i0}><phi_{b i0}|``.
    """

    def build(spec):
        phi = (committed_state(ens, 0), committed_state(ens, 1))
        ev = ens.evidence_layout
        m = ens.size
        verify = []
        for b in (0, 1):
            projs = [_projector(s.amplitudes) for s in ens.states[b]]
            projs += [np.zeros((ev.dim, ev.dim), dtype=complex)] * (m - len(projs))
            verify.append(tuple(projs))
        com = Commitment(
            name=spec.name,
            phi=phi,
            open_labels=("e",),
            verify_labels=ev.labels,
            verify=tuple(verify),
            babe_kept=ev.labels,
            adam_held=("e",),
            adam_acting=("e",),
            announce=lambda i: {"i0": i},
        )
        return [(1.0, com)]

    return ProtocolSpec(name=name, n=1, builder=build, params={"M": ens.size})


# -- four-qubit permutation protocol -----------------------------------------

PERM4_B1 = ("B11", "B12", "B13", "B14")
_CYCLE = (1, 2, 3, 0)  # content of qubit i moves to slot i+1


def _cycle_power(m: int) -> list[int]:
    return [(i + m) % 4 for i in range(4)]


def perm4_states() -> list[np.ndarray]:
    """``psi_k``: the k-fold cyclic shift of ``|s0 s1 s2 s3>`` on four qubits."""
    base = _kron_all(_S0)
    layout = SubsystemLayout.qubits(*PERM4_B1)
    return [permute_array(base, layout, _cycle_power(k)) for k in range(4)]


def bell_pairs_psi() -> StateVector:
    """A deviating Babe state: B11 and B12 each maximally entangled with half of B2."""
    bell = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    # factor order B11, B2a, B12, B2b, B13, B14 -> B11, B12, B13, B14, B2a, B2b
    t = _kron_all([bell, bell, _S0[2], _S0[3]]).reshape([2] * 6)
    t = np.transpose(t, (0, 2, 4, 5, 1, 3))
    layout = SubsystemLayout(tuple((q, 2) for q in PERM4_B1) + (("B2", 4),))
    return StateVector(t.reshape(-1), layout)


def perm4_spec(
    babe_entangled: bool = False,
    acting: str = "a1",
    weights: Sequence[float] | None = None,
    babe_psi: StateVector | None = None,
) -> ProtocolSpec:
    """Shifted-evidence-space protocol on four qubits.

    Babe prepares ``sum_k sqrt(l_k)|psi_k>|k>_B2`` and sends the four qubits.
    Adam applies the cyclic shift ``C^m`` with ``m`` held coherently in A1,
    modulates B11 by the bit and returns B11 only. At opening he announces
    ``(b, m)`` and hands back B12..B14.

    With ``babe_entangled=False`` the B2 register is a classical record of
    ``k``. ``acting`` is ``"a1"`` (Adam's cheat touches only his announcement
    register) or ``"all"`` (he may also act on the qubits he keeps).
    ``babe_psi`` replaces Babe's prescribed state by an arbitrary state on
    B11..B14 (x) B2; it cannot be combined with ``weights``.
    """
    if acting not in ("a1", "all"):
        raise ValidationError(f"acting must be 'a1' or 'all', got {acting!r}")
    if babe_psi is not None and weights is not None:
        raise ValidationError("babe_psi and weights are mutually exclusive")
    if babe_psi is not None and babe_psi.layout.dims != (2, 2, 2, 2, 4):
        raise ValidationError("babe_psi must live on four qubits times a 4-dimensional B2")
    w0 = tuple([0.25] * 4) if weights is None else tuple(float(x) for x in weights)
    if len(w0) != 4:
        raise ValidationError("perm4 takes four Babe-side weights")

    def build(spec):
        b1_layout = SubsystemLayout.qubits(*PERM4_B1)
        if babe_psi is None:
            lam = np.asarray(spec.weights, dtype=float)
            if np.any(lam < 0) or abs(lam.sum() - 1) > 1e-12:
                raise ValidationError("weights must be non-negative and sum to 1")
            branches = perm4_states()
            psi = np.stack([np.sqrt(lam[k]) * branches[k] for k in range(4)], axis=1)
        else:
            psi = babe_psi.amplitudes.reshape(16, 4)
            norms = np.linalg.norm(psi, axis=0)
            branches = [psi[:, k] / norms[k] if norms[k] > 0 else None for k in range(4)]
        layout = SubsystemLayout((("A1", 4),) + tuple((q, 2) for q in PERM4_B1) + (("B2", 4),))

        def evolve(v, b, m):
            v = permute_array(v, b1_layout, _cycle_power(m))
            return apply_local_array(v, b1_layout, _MOD[b], ["B11"])

        # chi[b, m]: Babe's B1 (x) B2 state for bit b and Adam's shift m
        chi = np.zeros((2, 4, 16, 4), dtype=complex)
        for b in (0, 1):
            for m in range(4):
                for k in range(4):
                    chi[b, m, :, k] = evolve(psi[:, k], b, m)
        phi = tuple(StateVector(0.5 * chi[b].reshape(-1), layout) for b in (0, 1))
        verify = []
        for b in (0, 1):
            projs = []
            for m in range(4):
                if babe_entangled:
                    projs.append(_projector(chi[b, m].reshape(-1)))
                    continue
                p = np.zeros((64, 64), dtype=complex)
                for k, v in enumerate(branches):
                    if v is not None:
                        p += _projector(np.kron(evolve(v, b, m), np.eye(4)[k]))
                projs.append(p)
            verify.append(tuple(projs))
        held = ("A1", "B12", "B13", "B14")
        com = Commitment(
            name=spec.name,
            phi=phi,
            open_labels=("A1",),
            verify_labels=PERM4_B1 + ("B2",),
            verify=tuple(verify),
            babe_kept=("B11", "B2"),
            adam_held=held,
            adam_acting=("A1",) if acting == "a1" else held,
            classical=() if babe_entangled else ("B2",),
            announce=lambda i: {"m": i},
        )
        return [(1.0, com)]

    return ProtocolSpec(
        name="perm4", n=1, builder=build,
        params={
            "babe_entangled": bool(babe_entangled),
            "acting": acting,
            "babe_psi": "prescribed" if babe_psi is None else "custom",
        },
        weights=None if babe_psi is not None else w0,
    )


# -- QBC1 ----------------------------------------------------------------------

QBC1_METHODS = ("swap", "fresh")


def qbc1_layout(n: int, method: str) -> SubsystemLayout:
    factors = [(f"E{i + 1}", 4) for i in range(n)] + [(f"Q{i + 1}", 2) for i in range(n)]
    if method == "fresh":
        factors.append(("R", 2))
    factors.append(("F", n))
    dim = int(np.prod([d for _, d in factors]))
    if dim > MAX_DIM:
        raise CapacityError(f"qbc1 with n={n}, method={method!r} needs dimension {dim} > {MAX_DIM}")
    return SubsystemLayout(tuple(factors))


def _qbc1_commitment(n, method, lam, coherent, evidence_holder, name):
    layout = qbc1_layout(n, method)
    e_labels = tuple(f"E{i + 1}" for i in range(n))
    q_labels = tuple(f"Q{i + 1}" for i in range(n))
    ev_label = "Q1" if method == "swap" else "R"
    side = q_labels + (("R",) if method == "fresh" else ())
    side_layout = SubsystemLayout(tuple((lab, 2) for lab in side))

    def evidence_vector(js, k, b):
        """Babe's qubits for announced states ``js``, her choice ``k`` and bit ``b``."""
        qs = [_S0[j] for j in js]
        if method == "swap":
            qs[0], qs[k] = qs[k], qs[0]
            qs[0] = _MOD[b] @ qs[0]
        else:
            r = _MOD[b] @ qs[k]
            qs[k] = np.array([1, 0], dtype=complex)
            qs.append(r)
        return _kron_all(qs)

    d_side = side_layout.dim
    phis = []
    for b in (0, 1):
        t = np.zeros((4**n, d_side, n), dtype=complex)
        for jflat, js in enumerate(itertools.product(range(4), repeat=n)):
            for k in range(n):
                t[jflat, :, k] = np.sqrt(lam[k]) * 0.5**n * evidence_vector(list(js), k, b)
        phis.append(StateVector(t.reshape(-1), layout))

    verify = []
    for b in (0, 1):
        projs = []
        for js in itertools.product(range(4), repeat=n):
            vecs = []
            for k in range(n):
                f = np.zeros(n)
                f[k] = 1
                vecs.append(np.kron(evidence_vector(list(js), k, b), f))
            if coherent:
                projs.append(_projector(sum(np.sqrt(lam[k]) * vecs[k] for k in range(n))))
            else:
                projs.append(sum(_projector(v) for v in vecs))
        verify.append(tuple(projs))

    babe = side + ("F",)
    adam = e_labels
    if evidence_holder == "adam":
        babe = tuple(lab for lab in babe if lab != ev_label)
        adam = e_labels + (ev_label,)

    def announce(i):
        js = np.unravel_index(i, (4,) * n)
        return {"states": [int(j) for j in js]}

    return Commitment(
        name=f"{name}[{method}]",
        phi=tuple(phis),
        open_labels=e_labels,
        verify_labels=side + ("F",),
        verify=tuple(verify),
        babe_kept=babe,
        adam_held=adam,
        adam_acting=adam,
        classical=() if coherent else ("F",),
        announce=announce,
    )


def qbc1_spec(
    n: int,
    babe_method: str = "swap",
    adam_knows_method: bool = True,
    coherent_selection: bool = False,
    evidence_holder: str = "babe",
    weights: Sequence[float] | None = None,
) -> ProtocolSpec:
    """QBC1 with Adam's state choices purified into registers E1..En.

    Babe's pick ``k`` is purified into register F. ``babe_method`` is
    ``"swap"`` (swap qubit k into slot Q1 and return Q1) or ``"fresh"``
    (swap qubit k into a fresh ancilla R prepared in ``|0>`` and return R).
    Adam modulates the returned qubit by the bit and it goes back to Babe as
    evidence (``evidence_holder="adam"`` keeps it with Adam until opening).

    ``coherent_selection=False`` makes F a classical record, which is the
    honest protocol; ``True`` lets Babe keep her pick coherent.
    When ``adam_knows_method`` is false, Adam faces both methods with equal
    weight and one cheating unitary must serve both.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    if babe_method not in QBC1_METHODS:
        raise ValidationError(f"babe_method must be one of {QBC1_METHODS}, got {babe_method!r}")
    if evidence_holder not in ("babe", "adam"):
        raise ValidationError("evidence_holder must be 'babe' or 'adam'")
    if evidence_holder == "adam" and not adam_knows_method:
        raise ValidationError("with the evidence on Adam's side he necessarily knows the method")
    methods = (babe_method,) if adam_knows_method else QBC1_METHODS
    for meth in methods:
        qbc1_layout(n, meth)
    w0 = tuple([1.0 / n] * n) if weights is None else tuple(float(x) for x in weights)
    if len(w0) != n:
        raise ValidationError(f"qbc1 takes {n} Babe-side weights")

    def build(spec):
        lam = np.asarray(spec.weights, dtype=float)
        if np.any(lam < 0) or abs(lam.sum() - 1) > 1e-12:
            raise ValidationError("weights must be non-negative and sum to 1")
        share = 1.0 / len(methods)
        return [
            (share, _qbc1_commitment(n, meth, lam, coherent_selection, evidence_holder, spec.name))
            for meth in methods
        ]

    return ProtocolSpec(
        name="qbc1", n=n, builder=build,
        params={
            "babe_method": babe_method,
            "adam_knows_method": bool(adam_knows_method),
            "coherent_selection": bool(coherent_selection),
            "evidence_holder": evidence_holder,
        },
        weights=w0,
    )
