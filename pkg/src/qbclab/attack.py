"""Numerical search for Adam's cheating unitary.

The closed form in :mod:`qbclab.entangle` covers a verifier that projects
onto the whole of ``|Phi_1>``. Real verification is done by measurement:
Adam measures his announcement register, announces ``(b=1, i0)`` and Babe
checks her side with the projector for ``i0``. That acceptance probability
is optimized here by coordinate search over Hermitian generators.

Every objective used here is quadratic in the state ``(U (x) I)|Phi_0>``.
Along a single generator ``G`` with spectrum in ``{-1, 0, 1}`` the objective
is then a trigonometric polynomial of degree two in the rotation angle, so
five samples determine it exactly and the 1-D maximization needs no further
evaluations. Each sweep is followed by a pattern move along its net
displacement and, when the acting group is small enough for the budget, an
L-BFGS-B polish in exponential coordinates with finite-difference gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .errors import ConfigurationError, ShapeError, ValidationError
from .linalg import SeededRng, StateVector, polar_unitary, random_unitary


@dataclass(frozen=True)
class OptimizerConfig:
    restarts: int = 32
    max_evaluations: int = 2000
    step_tolerance: float = 1e-8
    value_tolerance: float = 1e-10

    def __post_init__(self):
        if self.restarts < 1 or self.max_evaluations < 1:
            raise ConfigurationError("restarts and max_evaluations must be positive")
        for name in ("step_tolerance", "value_tolerance"):
            tol = getattr(self, name)
            if not 0 < tol <= 1e-2:
                raise ConfigurationError(f"{name} must lie in (0, 1e-2], got {tol}")


@dataclass(frozen=True)
class CheatReport:
    """Best cheat found by the optimizer.

    ``best_p`` is a lower bound on Adam's optimal cheating probability.
    ``closed_form_bound`` is present only where it is a valid upper bound
    for the optimized objective.
    """

    best_p: float
    u_best: np.ndarray
    closed_form_bound: float | None
    restarts: int
    evaluations: int
    seed: int
    converged: bool
    acting: tuple[str, ...]
    objective: str
    restart_values: tuple[float, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "best_p": self.best_p,
            "best_p_kind": "lower bound",
            "closed_form_bound": self.closed_form_bound,
            "restarts": self.restarts,
            "evaluations": self.evaluations,
            "seed": self.seed,
            "converged": self.converged,
            "acting": list(self.acting),
            "objective": self.objective,
            "restart_values": list(self.restart_values),
            "u_best": [[[z.real, z.imag] for z in row] for row in self.u_best],
        }


def _acting_split(state: StateVector, acting: Sequence[str]):
    layout = state.layout
    idx = layout.indices(acting)
    labels = tuple(layout.labels[i] for i in idx)
    rest = [i for i in range(len(layout)) if i not in idx]
    d = int(np.prod([layout.dims[i] for i in idx])) if idx else 1
    return labels, idx, rest, d


class Objective:
    """Success probability as a function of Adam's unitary on ``acting``."""

    name = "objective"
    acting: tuple[str, ...]
    dim: int

    def __call__(self, u: np.ndarray) -> float:  # pragma: no cover - interface
        raise NotImplementedError


class ProjectiveObjective(Objective):
    """``|<Phi_1|(U (x) I)|Phi_0>|^2``: verification by projection onto ``|Phi_1>``."""

    name = "projective"

    def __init__(self, phi0: StateVector, phi1: StateVector, acting: Iterable[str]):
        if phi0.layout != phi1.layout:
            raise ShapeError("committed states must share a layout")
        self.acting, _, _, self.dim = _acting_split(phi0, list(acting))
        m0 = phi0.matrix(self.acting)
        m1 = phi1.matrix(self.acting)
        # <Phi_1|U Phi_0> = tr(U X)
        self._x = m0 @ m1.conj().T

    def __call__(self, u):
        return float(abs(np.sum(u.T * self._x)) ** 2)


class AcceptanceObjective(Objective):
    """Measurement-based acceptance of a cheating opening.

    Adam applies ``U`` on ``acting``, measures ``open_labels`` in
    ``open_basis`` (computational by default) obtaining ``i``, announces it and
    Babe accepts with projector ``projectors[i]`` on ``verify_labels``.
    Factors in neither group are traced out.
    """

    name = "acceptance"

    def __init__(
        self,
        phi0: StateVector,
        acting: Iterable[str],
        open_labels: Sequence[str],
        verify_labels: Sequence[str],
        projectors: Sequence[np.ndarray],
        open_basis: np.ndarray | None = None,
    ):
        layout = phi0.layout
        self.acting, a_idx, a_rest, self.dim = _acting_split(phi0, list(acting))
        o_idx = layout.indices(open_labels)
        v_idx = layout.indices(verify_labels)
        if set(o_idx) & set(v_idx):
            raise ValidationError("announcement and verification factors must be disjoint")
        r_idx = [i for i in range(len(layout)) if i not in set(o_idx) | set(v_idx)]
        d_open = int(np.prod([layout.dims[i] for i in o_idx])) if o_idx else 1
        d_ver = int(np.prod([layout.dims[i] for i in v_idx])) if v_idx else 1
        if len(projectors) != d_open:
            raise ValidationError(f"{len(projectors)} projectors for {d_open} announcement outcomes")
        self._isos = _projector_isometries(projectors, d_ver)
        self._basis = None if open_basis is None else np.asarray(open_basis, dtype=complex)
        if self._basis is not None and not np.allclose(
            self._basis.conj().T @ self._basis, np.eye(d_open), atol=1e-10
        ):
            raise ValidationError("open_basis must be orthonormal")
        self._phi = phi0.matrix(self.acting)
        # axes of the (acting, rest) reshaped state, mapped back to layout order
        t_dims = [layout.dims[i] for i in a_idx + a_rest]
        self._t_dims = t_dims
        pos = {ax: k for k, ax in enumerate(a_idx + a_rest)}
        self._perm = [pos[i] for i in o_idx + v_idx + r_idx]
        self._shape = (d_open, d_ver, -1)

    def __call__(self, u):
        t = (u @ self._phi).reshape(self._t_dims)
        t = np.transpose(t, self._perm).reshape(self._shape)
        if self._basis is not None:
            t = np.tensordot(self._basis.conj().T, t, axes=1)
        proj = np.einsum("ivk,ivr->ikr", self._isos.conj(), t)
        return float(np.sum(proj.real**2 + proj.imag**2))


class MixtureObjective(Objective):
    """Weighted average of objectives sharing one acting group."""

    name = "mixture"

    def __init__(self, parts: Sequence[tuple[float, Objective]]):
        if not parts:
            raise ValidationError("a mixture needs at least one component")
        acting = {p.acting for _, p in parts}
        dims = {p.dim for _, p in parts}
        if len(acting) != 1 or len(dims) != 1:
            raise ShapeError("mixture components must act on the same factors")
        w = np.array([w for w, _ in parts], dtype=float)
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValidationError("mixture weights must be non-negative and sum to 1")
        self.parts = [(float(wi), p) for wi, (_, p) in zip(w, parts)]
        self.acting = acting.pop()
        self.dim = dims.pop()
        self.name = "mixture(" + ",".join(p.name for _, p in parts) + ")"

    def __call__(self, u):
        return float(sum(w * p(u) for w, p in self.parts))


def _projector_isometries(projectors, d_ver):
    isos = []
    for k, p in enumerate(projectors):
        p = np.asarray(p, dtype=complex)
        if p.shape != (d_ver, d_ver):
            raise ShapeError(f"projector {k} has shape {p.shape}, expected {(d_ver, d_ver)}")
        if np.max(np.abs(p @ p - p), initial=0.0) > 1e-10 or np.max(np.abs(p - p.conj().T), initial=0.0) > 1e-10:
            raise ValidationError(f"projector {k} is not an orthogonal projector")
        w, v = np.linalg.eigh(0.5 * (p + p.conj().T))
        isos.append(v[:, w > 0.5])
    rank = max((q.shape[1] for q in isos), default=0)
    out = np.zeros((len(isos), d_ver, max(rank, 1)), dtype=complex)
    for k, q in enumerate(isos):
        out[k, :, : q.shape[1]] = q
    return out


def acceptance_prob(
    u: np.ndarray,
    phi0: StateVector,
    acting: Iterable[str],
    open_labels: Sequence[str],
    verify_labels: Sequence[str],
    projectors: Sequence[np.ndarray],
    open_basis: np.ndarray | None = None,
) -> float:
    """``sum_i || (<e_i| (x) P_i) (U (x) I) |Phi_0> ||^2``."""
    obj = AcceptanceObjective(phi0, acting, open_labels, verify_labels, projectors, open_basis)
    u = np.asarray(u, dtype=complex)
    if u.shape != (obj.dim, obj.dim):
        raise ShapeError(f"unitary has shape {u.shape}, acting group has dimension {obj.dim}")
    return obj(u)


# -- generator sweep ---------------------------------------------------------

_SAMPLE_ANGLES = 2 * np.pi * np.arange(5) / 5
_FINE = np.linspace(-np.pi, np.pi, 721)


def _generators(d: int):
    """Hermitian basis: off-diagonal X/Y pairs then diagonal projectors."""
    gens = []
    for a in range(d):
        for b in range(a + 1, d):
            gens.append(("x", a, b))
            gens.append(("y", a, b))
    for a in range(d):
        gens.append(("z", a, a))
    return gens


def _rotate(u: np.ndarray, gen, theta: float) -> np.ndarray:
    """``exp(i theta G) @ u`` for a basis generator ``G``."""
    kind, a, b = gen
    out = u.copy()
    if kind == "z":
        out[a] *= np.exp(1j * theta)
        return out
    c, s = np.cos(theta), np.sin(theta)
    ra, rb = u[a], u[b]
    if kind == "x":
        # exp(i t (|a><b| + |b><a|))
        out[a] = c * ra + 1j * s * rb
        out[b] = 1j * s * ra + c * rb
    else:
        # exp(i t (-i|a><b| + i|b><a|)) = real rotation
        out[a] = c * ra + s * rb
        out[b] = -s * ra + c * rb
    return out


def _fit_trig(values: np.ndarray):
    """Coefficients of ``c0 + c1 cos + s1 sin + c2 cos2 + s2 sin2`` through 5 samples."""
    f = np.fft.rfft(values) / 5
    c0 = f[0].real
    c1, s1 = 2 * f[1].real, -2 * f[1].imag
    c2, s2 = 2 * f[2].real, -2 * f[2].imag
    return c0, c1, s1, c2, s2


def _trig_argmax(coef):
    c0, c1, s1, c2, s2 = coef

    def val(t):
        return c0 + c1 * np.cos(t) + s1 * np.sin(t) + c2 * np.cos(2 * t) + s2 * np.sin(2 * t)

    grid = val(_FINE)
    t = _FINE[int(np.argmax(grid))]
    for _ in range(8):
        d1 = -c1 * np.sin(t) + s1 * np.cos(t) - 2 * c2 * np.sin(2 * t) + 2 * s2 * np.cos(2 * t)
        d2 = -c1 * np.cos(t) - s1 * np.sin(t) - 4 * c2 * np.cos(2 * t) - 4 * s2 * np.sin(2 * t)
        if d2 >= 0:
            break
        t = t - d1 / d2
    return float(t), float(val(t))


@dataclass
class _Budget:
    limit: int
    used: int = 0

    @property
    def left(self):
        return self.limit - self.used


def _unitary_power(w: np.ndarray, t: float) -> np.ndarray | None:
    """``w**t`` on the principal branch, or None if ``w`` is not safely diagonalizable."""
    vals, vecs = np.linalg.eig(w)
    if np.linalg.cond(vecs) > 1e6:
        return None
    out = (vecs * np.exp(1j * t * np.angle(vals))) @ np.linalg.inv(vecs)
    return polar_unitary(out)


def _pattern_move(objective, u_prev, u, value, budget: _Budget):
    """Hooke-Jeeves style extrapolation along the net step of the last sweep.

    Coordinate sweeps zigzag in narrow ridges; repeating the sweep's overall
    displacement ``u u_prev^dag`` with doubling lengths recovers most of the
    lost progress for a handful of evaluations.
    """
    step = u @ u_prev.conj().T
    for t in (1.0, 3.0, 7.0, 15.0):
        if budget.left < 1:
            break
        move = _unitary_power(step, t)
        if move is None:
            break
        cand = move @ u
        new = objective(cand)
        budget.used += 1
        if new <= value:
            break
        u_best, value = cand, new
        u = u_best
    return u, value


class _Exhausted(Exception):
    pass


def _generator_matrices(d: int) -> np.ndarray:
    mats = []
    for kind, a, b in _generators(d):
        m = np.zeros((d, d), dtype=complex)
        if kind == "z":
            m[a, a] = 1
        elif kind == "x":
            m[a, b] = m[b, a] = 1
        else:
            m[a, b], m[b, a] = -1j, 1j
        mats.append(m)
    return np.array(mats)


def _polish(objective, u, value, cfg: OptimizerConfig, budget: _Budget):
    """Quasi-Newton refinement in exponential coordinates ``exp(i H(h)) u``.

    Uses L-BFGS-B with finite-difference gradients, counted against the same
    evaluation budget. Coordinate sweeps converge only linearly when the
    objective is badly conditioned (e.g. cross operators with widely spread
    singular values); this recovers the last digits.
    """
    basis = _generator_matrices(objective.dim)
    best = [value, u]

    def neg(h):
        if budget.left < 1:
            raise _Exhausted
        w, v = np.linalg.eigh(np.tensordot(h, basis, axes=1))
        cand = (v * np.exp(1j * w)) @ v.conj().T @ u
        val = objective(cand)
        budget.used += 1
        if val > best[0]:
            best[0], best[1] = val, cand
        return -val

    try:
        res = minimize(neg, np.zeros(len(basis)), method="L-BFGS-B",
                       options={"maxfun": budget.left, "ftol": cfg.value_tolerance, "gtol": 1e-12})
        converged = bool(res.success)
    except _Exhausted:
        converged = False
    return best[1], best[0], converged


def _local_search(objective, u, cfg: OptimizerConfig, order_rng: np.random.Generator, budget: _Budget):
    value = objective(u)
    budget.used += 1
    gens = _generators(objective.dim)
    # polish only when a few finite-difference gradients fit in the budget
    polish = budget.limit >= 20 * (len(gens) + 1)
    sweep_limit = budget.limit // 2 if polish else budget.limit
    sweep_converged = False
    while budget.left >= 5 and budget.used < sweep_limit:
        start = value
        u_start = u
        max_step = 0.0
        for j in order_rng.permutation(len(gens)):
            if budget.left < 5:
                break
            gen = gens[j]
            samples = np.empty(5)
            samples[0] = value
            for k in range(1, 5):
                samples[k] = objective(_rotate(u, gen, _SAMPLE_ANGLES[k]))
            theta, predicted = _trig_argmax(_fit_trig(samples))
            if predicted > value and abs(theta) > 0:
                cand = _rotate(u, gen, theta)
                new = objective(cand)
                budget.used += 5
                if new > value:
                    u, value = cand, new
                    max_step = max(max_step, abs(theta))
            else:
                budget.used += 4
        if value - start < cfg.value_tolerance or max_step < cfg.step_tolerance:
            sweep_converged = True
            break
        u, value = _pattern_move(objective, u_start, u, value, budget)
    if polish and budget.left > len(gens) + 1:
        u, value, polished = _polish(objective, u, value, cfg, budget)
        sweep_converged = sweep_converged or polished
    return u, value, sweep_converged


def _prob(x: float) -> float:
    """Clip rounding excursions (~1e-16) outside [0, 1]."""
    return min(1.0, max(0.0, float(x)))


def optimize_cheat(
    objective: Objective,
    cfg: OptimizerConfig,
    rng: SeededRng,
    closed_form_bound: float | None = None,
) -> CheatReport:
    """Multi-start coordinate search for the best cheating unitary.

    Restart 0 starts from the identity; restart ``r > 0`` from a Haar-random
    unitary drawn from stream ``rng.spawn(r)``. Restarts are independent, so
    ``best_p`` is nondecreasing in ``cfg.restarts``.
    """
    d = objective.dim
    if d == 1:
        # nothing to optimize beyond a global phase
        u = np.eye(1, dtype=complex)
        value = _prob(objective(u))
        return CheatReport(
            best_p=value, u_best=u, closed_form_bound=closed_form_bound, restarts=1,
            evaluations=1, seed=rng.seed, converged=True, acting=objective.acting,
            objective=objective.name, restart_values=(value,),
        )
    if cfg.max_evaluations < 6:
        raise ConfigurationError("max_evaluations too small to evaluate a single coordinate step")
    best_u, best = None, -np.inf
    values = []
    total = 0
    converged = False
    for r in range(cfg.restarts):
        child = rng.spawn(r)
        u0 = np.eye(d, dtype=complex) if r == 0 else random_unitary(d, child)
        budget = _Budget(cfg.max_evaluations)
        u, value, sweep_conv = _local_search(objective, u0, cfg, child.spawn(1).generator(), budget)
        total += budget.used
        values.append(value)
        prev = best
        if value > best:
            best_u, best = u, value
        if cfg.restarts == 1:
            converged = sweep_conv
        else:
            converged = (best - prev) < cfg.value_tolerance if np.isfinite(prev) else sweep_conv
    if best_u is None:
        raise ConfigurationError("optimizer budget exhausted without any evaluation")
    return CheatReport(
        best_p=_prob(best),
        u_best=best_u,
        closed_form_bound=closed_form_bound,
        restarts=cfg.restarts,
        evaluations=total,
        seed=rng.seed,
        converged=bool(converged),
        acting=objective.acting,
        objective=objective.name,
        restart_values=tuple(_prob(v) for v in values),
    )
