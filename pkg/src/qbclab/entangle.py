"""Committed and purified states, Schmidt forms and the optimal EPR cheat.

Adam's cheat against a verifier that projects onto ``|Phi_1>`` is a local
unitary ``U`` on the factors he controls. Writing ``X`` for the partial
contraction of ``|Phi_0><Phi_1|`` onto those factors, the success
probability is ``|tr(U X)|^2``, maximized by the inverse polar factor of
``X`` at value ``||X||_1^2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .errors import ShapeError, ValidationError
from .linalg import (
    SubsystemLayout,
    StateVector,
    _dilation,
    apply_local,
    polar_unitary,
    reduced_matrix,
    singular_values,
)

SCHMIDT_TOL = 1e-12


@dataclass(frozen=True)
class SchmidtForm:
    """``sum_i c_i |a_i> (x) |b_i>`` with ``a_i``/``b_i`` stored as columns."""

    coefficients: np.ndarray
    a_basis: np.ndarray
    b_basis: np.ndarray
    a_layout: SubsystemLayout
    b_layout: SubsystemLayout

    @property
    def rank(self) -> int:
        return self.coefficients.size

    def reconstruct(self, layout: SubsystemLayout | None = None) -> StateVector:
        """Rebuild the state; ``layout`` restores the original factor order."""
        m = (self.a_basis * self.coefficients) @ self.b_basis.T
        joint = self.a_layout + self.b_layout
        amps = m.reshape(-1)
        if layout is not None and layout != joint:
            t = amps.reshape(joint.dims)
            order = [joint.index(lab) for lab in layout.labels]
            amps = np.transpose(t, order).reshape(-1)
            joint = layout
        return StateVector.from_unnormalized(amps, joint)


@dataclass(frozen=True)
class CommitmentEnsemble:
    """Per-bit ensembles ``{(p_bi, |phi_bi>)}`` sent by an honest Adam."""

    probabilities: tuple[np.ndarray, np.ndarray]
    states: tuple[tuple[StateVector, ...], tuple[StateVector, ...]]

    def __post_init__(self):
        probs = tuple(np.asarray(p, dtype=float) for p in self.probabilities)
        states = tuple(tuple(s) for s in self.states)
        if len(probs) != 2 or len(states) != 2:
            raise ValidationError("an ensemble needs exactly one entry per bit value")
        dims = set()
        for b in (0, 1):
            p, s = probs[b], states[b]
            if p.size == 0:
                raise ValidationError(f"bit {b} has no states (M = 0)")
            if p.size != len(s):
                raise ValidationError(f"bit {b}: {p.size} probabilities for {len(s)} states")
            if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
                raise ValidationError(f"bit {b}: probabilities must be >= 0 and sum to 1")
            dims.update(x.layout for x in s)
        if len(dims) != 1:
            raise ShapeError("all evidence states must share one layout")
        object.__setattr__(self, "probabilities", probs)
        object.__setattr__(self, "states", states)

    @property
    def evidence_layout(self) -> SubsystemLayout:
        return self.states[0][0].layout

    @property
    def size(self) -> int:
        return max(p.size for p in self.probabilities)

    def mixture(self, b: int) -> np.ndarray:
        return sum(
            p * np.outer(s.amplitudes, s.amplitudes.conj())
            for p, s in zip(self.probabilities[b], self.states[b])
        )


def committed_state(ens: CommitmentEnsemble, b: int, label: str = "e") -> StateVector:
    """``sum_i sqrt(p_bi) |e_i> |phi_bi>`` with ``e`` a fresh register of dimension M.

    M is the larger of the two ensemble sizes so both bits share a layout.
    """
    if b not in (0, 1):
        raise ValidationError(f"bit must be 0 or 1, got {b}")
    m = ens.size
    ev = ens.evidence_layout
    layout = SubsystemLayout(((label, m),)) + ev
    amps = np.zeros((m, ev.dim), dtype=complex)
    for i, (p, s) in enumerate(zip(ens.probabilities[b], ens.states[b])):
        amps[i] = np.sqrt(p) * s.amplitudes
    return StateVector(amps.reshape(-1), layout)


def purification(weights: Sequence[float], states: Sequence[StateVector], label: str = "f") -> StateVector:
    """``sum_k sqrt(l_k) |psi_k> |f_k>`` with ``f`` a fresh register kept by Babe."""
    w = np.asarray(weights, dtype=float)
    if w.size != len(states):
        raise ValidationError(f"{w.size} weights for {len(states)} states")
    if w.size == 0 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
        raise ValidationError("weights must be non-negative and sum to 1")
    layouts = {s.layout for s in states}
    if len(layouts) != 1:
        raise ShapeError("purified states must share one layout")
    (base,) = layouts
    layout = base + SubsystemLayout(((label, w.size),))
    amps = np.stack([np.sqrt(lk) * s.amplitudes for lk, s in zip(w, states)], axis=1)
    return StateVector(amps.reshape(-1), layout)


def schmidt(psi: StateVector, a_labels: Iterable[str]) -> SchmidtForm:
    """Schmidt decomposition across the cut ``a_labels | rest``.

    Singular vectors come from the Hermitian dilation of the coefficient
    matrix, so the only eigensolver in play is ``eigh``.
    """
    a_labels = list(a_labels)
    layout = psi.layout
    a_idx = layout.indices(a_labels)
    b_labels = [lab for lab in layout.labels if lab not in set(a_labels)]
    if not a_idx or not b_labels:
        raise ValidationError("both sides of a Schmidt cut must be nonempty")
    m = psi.matrix(a_labels)
    da = m.shape[0]
    w, vecs = _dilation(m)
    order = np.argsort(w)[::-1]
    w, vecs = w[order], vecs[:, order]
    keep = w > SCHMIDT_TOL
    coeffs = w[keep]
    a_vecs = vecs[:da, keep] * np.sqrt(2.0)
    # M v = c u  =>  M = sum c u v^dag, so the B-side kets are conj(v)
    b_vecs = (vecs[da:, keep] * np.sqrt(2.0)).conj()
    return SchmidtForm(
        coefficients=coeffs,
        a_basis=a_vecs,
        b_basis=b_vecs,
        a_layout=layout.select(a_labels),
        b_layout=layout.select(b_labels),
    )


@dataclass(frozen=True)
class CrossOperator:
    """Contraction of ``|Phi_0><Phi_1|`` onto the acting factors.

    Rows and columns run over ``source`` in layout order.
    """

    matrix: np.ndarray
    source: tuple[str, ...]

    @property
    def trace_norm(self) -> float:
        return float(singular_values(self.matrix).sum())


def _check_pair(phi0: StateVector, phi1: StateVector):
    if phi0.layout != phi1.layout:
        raise ShapeError("both committed states must share one layout")


def cross_operator(phi0: StateVector, phi1: StateVector, acting: Iterable[str]) -> CrossOperator:
    """``X`` with ``<Phi_1|(U (x) I)|Phi_0> = tr(U X)`` for every ``U`` on ``acting``."""
    _check_pair(phi0, phi1)
    acting = list(acting)
    idx = phi0.layout.indices(acting)
    labels = tuple(phi0.layout.labels[i] for i in idx)
    m0 = phi0.matrix(labels)
    m1 = phi1.matrix(labels)
    return CrossOperator(m0 @ m1.conj().T, labels)


@dataclass(frozen=True)
class UhlmannCheat:
    u_opt: np.ndarray
    p_success: float
    achieved: float
    acting: tuple[str, ...]


def uhlmann_cheat(phi0: StateVector, phi1: StateVector, acting: Iterable[str]) -> UhlmannCheat:
    """Adam's optimal unitary on ``acting`` against projection onto ``|Phi_1>``."""
    x = cross_operator(phi0, phi1, acting)
    p = min(1.0, x.trace_norm) ** 2
    u_opt = polar_unitary(x.matrix).conj().T
    if x.source:
        moved = apply_local(phi0, u_opt, x.source)
        achieved = abs(phi1.inner(moved)) ** 2
    else:
        achieved = abs(phi1.inner(phi0)) ** 2
    return UhlmannCheat(u_opt=u_opt, p_success=float(p), achieved=float(achieved), acting=x.source)


def b_reductions(phi0: StateVector, phi1: StateVector, acting: Iterable[str]):
    """Reduced matrices of both states on the complement of ``acting``."""
    _check_pair(phi0, phi1)
    rest = phi0.layout.complement(acting)
    return reduced_matrix(phi0, rest), reduced_matrix(phi1, rest)
