"""Distinguishability of two committed states and the cheating-probability bounds.

Fidelity uses the squared convention ``F = (tr|sqrt(r0) sqrt(r1)|)^2`` so that
pure states give ``|<psi|phi>|^2`` and Adam's optimal projective cheat equals
``F`` directly.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ShapeError, ValidationError
from .linalg import DensityOperator, psd_factor, singular_values

# eigenvalues at or below this are treated as exact zeros when factoring a
# density operator; rounding noise otherwise leaks in as sqrt(1e-16) ~ 1e-8
RANK_CUTOFF = 1e-13


def _matrices(r0, r1):
    m0 = r0.matrix if isinstance(r0, DensityOperator) else np.asarray(r0, dtype=complex)
    m1 = r1.matrix if isinstance(r1, DensityOperator) else np.asarray(r1, dtype=complex)
    if m0.shape != m1.shape:
        raise ShapeError(f"dimension mismatch: {m0.shape} vs {m1.shape}")
    return m0, m1


def trace_distance(r0: DensityOperator, r1: DensityOperator) -> float:
    """Half the trace norm of ``r0 - r1``."""
    m0, m1 = _matrices(r0, r1)
    diff = m0 - m1
    w = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(min(1.0, 0.5 * np.abs(w).sum()))


def helstrom_pbc(r0: DensityOperator, r1: DensityOperator) -> float:
    """Babe's optimal bit-guessing probability at equal priors."""
    return (2.0 + 2.0 * trace_distance(r0, r1)) / 4.0


def fidelity(r0: DensityOperator, r1: DensityOperator) -> float:
    """Squared Uhlmann fidelity.

    Computed as ``||G0^dag G1||_1^2`` for eigenvalue factors ``r_b = G_b G_b^dag``,
    which equals ``||sqrt(r0) sqrt(r1)||_1^2``.
    """
    m0, m1 = _matrices(r0, r1)
    g0 = psd_factor(m0, RANK_CUTOFF)
    g1 = psd_factor(m1, RANK_CUTOFF)
    if g0.shape[1] == 0 or g1.shape[1] == 0:
        return 0.0
    root = float(singular_values(g0.conj().T @ g1).sum())
    return float(min(1.0, root) ** 2)


def eq2_bounds(p_b: float) -> tuple[float, float]:
    """Lower and upper bounds on Adam's optimal cheat given Babe's ``p_b``.

    ``4 (1 - p_b)^2 <= P_A <= 2 sqrt(p_b (1 - p_b))``.
    """
    p_b = float(p_b)
    if not (0.5 - 1e-12 <= p_b <= 1.0 + 1e-12):
        raise ValidationError(f"p_b must lie in [1/2, 1], got {p_b}")
    p_b = min(max(p_b, 0.5), 1.0)
    return 4.0 * (1.0 - p_b) ** 2, 2.0 * np.sqrt(p_b * (1.0 - p_b))


@dataclass(frozen=True)
class ConcealmentReport:
    p_b_cheat: float
    trace_distance: float
    fidelity: float
    eq2_lower: float
    eq2_upper: float

    @property
    def sandwich_ok(self) -> bool:
        return self.eq2_lower - 1e-9 <= self.fidelity <= self.eq2_upper + 1e-9

    def to_dict(self) -> dict:
        d = asdict(self)
        d["sandwich_ok"] = self.sandwich_ok
        return d


def concealment_report(r0: DensityOperator, r1: DensityOperator) -> ConcealmentReport:
    d = trace_distance(r0, r1)
    p = (2.0 + 2.0 * d) / 4.0
    lo, hi = eq2_bounds(p)
    return ConcealmentReport(
        p_b_cheat=p,
        trace_distance=d,
        fidelity=fidelity(r0, r1),
        eq2_lower=float(lo),
        eq2_upper=float(hi),
    )
