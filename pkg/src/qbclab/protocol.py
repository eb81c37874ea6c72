"""Commitment protocols: honest runs, concealment, binding and scans.

A protocol is reduced to the end-of-commitment picture: the two committed
pure states, which factors each party holds, which register Adam measures
to produce his announcement and the projector Babe applies for each
announcement. Parties are honest except that either may keep randomness
coherent (entangled) instead of sampling it.

Babe's registers listed in ``classical`` hold classical records: she can
only use them in the computational basis, so concealment is computed after
dephasing them. Adam's cheat is unaffected by this, since an environment
copy of a register on Babe's side leaves the cross operator unchanged.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .attack import (
    AcceptanceObjective,
    CheatReport,
    MixtureObjective,
    OptimizerConfig,
    ProjectiveObjective,
    optimize_cheat,
)
from .distinguish import ConcealmentReport, concealment_report
from .entangle import uhlmann_cheat
from .errors import UnsupportedScanError, ValidationError
from .linalg import (
    DensityOperator,
    SeededRng,
    StateVector,
    SubsystemLayout,
    dephase,
    reduced_matrix,
)


@dataclass(frozen=True)
class Commitment:
    """One concrete end-of-commitment configuration.

    Attributes:
        phi: committed states for b = 0 and b = 1.
        open_labels: Adam's announcement register(s), measured in the
            computational basis; announcements are flat indices in layout order.
        verify_labels: factors Babe checks at opening (hers plus any
            returned by Adam), in layout order.
        verify: per bit, one projector on ``verify_labels`` per announcement.
        babe_kept: Babe's factors during the holding phase.
        adam_held: Adam's factors during the holding phase.
        adam_acting: the subset of ``adam_held`` Adam's cheat may act on.
        classical: Babe's registers restricted to classical use.
    """

    name: str
    phi: tuple[StateVector, StateVector]
    open_labels: tuple[str, ...]
    verify_labels: tuple[str, ...]
    verify: tuple[tuple[np.ndarray, ...], tuple[np.ndarray, ...]]
    babe_kept: tuple[str, ...]
    adam_held: tuple[str, ...]
    adam_acting: tuple[str, ...]
    classical: tuple[str, ...] = ()
    announce: Callable[[int], dict] | None = None

    def __post_init__(self):
        layout = self.layout
        if self.phi[0].layout != self.phi[1].layout:
            raise ValidationError("committed states must share one layout")
        for group in (self.open_labels, self.verify_labels, self.babe_kept, self.adam_held):
            layout.indices(group)
        if set(self.babe_kept) & set(self.adam_held):
            raise ValidationError("a factor cannot be held by both parties")
        if set(self.babe_kept) | set(self.adam_held) != set(layout.labels):
            raise ValidationError("babe_kept and adam_held must cover the layout")
        if not set(self.adam_acting) <= set(self.adam_held):
            raise ValidationError("Adam can only act on factors he holds")
        if not set(self.classical) <= set(self.babe_kept):
            raise ValidationError("classical registers must be Babe's")
        if not set(self.open_labels) <= set(self.adam_held):
            raise ValidationError("the announcement register must be Adam's")
        for lab in ("open_labels", "verify_labels"):
            if list(getattr(self, lab)) != [layout.labels[i] for i in layout.indices(getattr(self, lab))]:
                raise ValidationError(f"{lab} must be listed in layout order")
        d_open = layout.dim_of(self.open_labels)
        d_ver = layout.dim_of(self.verify_labels)
        for b in (0, 1):
            if len(self.verify[b]) != d_open:
                raise ValidationError(f"bit {b}: need {d_open} projectors, got {len(self.verify[b])}")
            for p in self.verify[b]:
                if p.shape != (d_ver, d_ver):
                    raise ValidationError("verification projector has the wrong shape")
                if np.max(np.abs(p @ p - p), initial=0.0) > 1e-10:
                    raise ValidationError("verification operator is not idempotent")

    @property
    def layout(self) -> SubsystemLayout:
        return self.phi[0].layout

    def acceptance_objective(self, acting: Sequence[str] | None = None) -> AcceptanceObjective:
        """Adam committed 0 and opens 1; Babe verifies with the bit-1 projectors."""
        acting = self.adam_acting if acting is None else tuple(acting)
        return AcceptanceObjective(
            self.phi[0], acting, self.open_labels, self.verify_labels, self.verify[1]
        )

    def projective_objective(self, acting: Sequence[str] | None = None) -> ProjectiveObjective:
        acting = self.adam_acting if acting is None else tuple(acting)
        return ProjectiveObjective(self.phi[0], self.phi[1], acting)

    def babe_states(self, keep: Sequence[str] | None = None) -> tuple[DensityOperator, DensityOperator]:
        """Babe's reduced states, with classical registers dephased."""
        keep = self.babe_kept if keep is None else tuple(keep)
        sub = self.layout.select(keep)
        out = []
        for b in (0, 1):
            m = reduced_matrix(self.phi[b], keep)
            rho = DensityOperator(0.5 * (m + m.conj().T), sub)
            out.append(dephase(rho, [c for c in self.classical if c in keep]))
        return out[0], out[1]

    def branch_states(self, label: str, keep: Sequence[str]):
        """Babe's states conditioned on each value of register ``label``.

        Returns a list over values of ``(weight_0, weight_1, rho_0, rho_1)``;
        ``rho_b`` is None where bit ``b`` never produces that value, and
        values impossible for both bits are skipped.
        """
        layout = self.layout
        idx = layout.index(label)
        sub = SubsystemLayout(tuple(f for i, f in enumerate(layout.factors) if i != idx))
        out = []
        for v in range(layout.dims[idx]):
            weights, rhos = [], []
            for b in (0, 1):
                amps = np.take(self.phi[b].as_tensor(), v, axis=idx).reshape(-1)
                w = float(np.vdot(amps, amps).real)
                weights.append(w)
                rhos.append(None if w == 0 else partial_trace_pure(StateVector(amps / np.sqrt(w), sub), keep))
            if max(weights) > 0:
                out.append((weights[0], weights[1], rhos[0], rhos[1]))
        return out


def partial_trace_pure(state: StateVector, keep: Sequence[str]) -> DensityOperator:
    m = reduced_matrix(state, keep)
    return DensityOperator(0.5 * (m + m.conj().T), state.layout.select(keep))


@dataclass(frozen=True)
class ProtocolSpec:
    """Declarative protocol: a name, parameters and a builder.

    ``builder(spec)`` returns ``[(weight, Commitment), ...]``: more than one
    entry means Adam does not know which configuration Babe uses and faces
    the weighted mixture. ``weights`` is the Babe-side purification weight
    vector when the protocol has one.
    """

    name: str
    n: int
    builder: Callable[["ProtocolSpec"], list[tuple[float, Commitment]]]
    params: Mapping[str, Any] = field(default_factory=dict)
    weights: tuple[float, ...] | None = None

    def build(self) -> list[tuple[float, Commitment]]:
        return self.builder(self)

    def with_weights(self, weights: Sequence[float]) -> "ProtocolSpec":
        if self.weights is None:
            raise UnsupportedScanError(f"protocol {self.name!r} has no Babe-side weight parameter")
        w = tuple(float(x) for x in weights)
        if len(w) != len(self.weights):
            raise ValidationError(f"expected {len(self.weights)} weights, got {len(w)}")
        return replace(self, weights=w)

    def describe(self) -> dict:
        return {"name": self.name, "n": self.n, "params": dict(self.params),
                "weights": None if self.weights is None else list(self.weights)}


@dataclass(frozen=True)
class Transcript:
    protocol: str
    bit: int
    announced: dict
    outcomes: dict
    accepted: bool
    seed: int

    def to_dict(self) -> dict:
        return asdict(self)


def run_honest(spec: ProtocolSpec, b: int, rng: SeededRng) -> Transcript:
    """Commit, open and verify with both parties honest.

    Where Adam does not know Babe's configuration, the configuration is
    drawn with its weight first.
    """
    if b not in (0, 1):
        raise ValidationError(f"bit must be 0 or 1, got {b}")
    g = rng.generator()
    variants = spec.build()
    weights = np.array([w for w, _ in variants])
    which = int(g.choice(len(variants), p=weights / weights.sum())) if len(variants) > 1 else 0
    com = variants[which][1]
    layout = com.layout
    phi = com.phi[b]

    # Adam measures his announcement register
    o_idx = layout.indices(com.open_labels)
    m = phi.matrix(com.open_labels)
    probs = np.sum(np.abs(m) ** 2, axis=1)
    i0 = int(g.choice(len(probs), p=probs / probs.sum()))
    cond = m[i0] / np.sqrt(probs[i0])
    rest_layout = SubsystemLayout(tuple(f for i, f in enumerate(layout.factors) if i not in o_idx))
    post = StateVector(cond, rest_layout)

    # Babe reads her classical registers (commutes with her verification)
    record = {}
    for lab in com.classical:
        r = reduced_matrix(post, [lab]).diagonal().real
        v = int(g.choice(len(r), p=r / r.sum()))
        record[lab] = v
        k = rest_layout.index(lab)
        t = np.moveaxis(post.as_tensor().copy(), k, 0)
        t[np.arange(t.shape[0]) != v] = 0
        post = StateVector.from_unnormalized(np.moveaxis(t, 0, k).reshape(-1), rest_layout)

    rho = reduced_matrix(post, com.verify_labels)
    p_accept = float(np.real(np.trace(com.verify[b][i0] @ rho)))
    accepted = bool(g.random() < p_accept)
    announced = {"b": b, "i0": i0}
    if com.announce is not None:
        announced.update(com.announce(i0))
    outcomes = {"accept_probability": p_accept, "classical_record": record}
    if len(variants) > 1:
        outcomes["configuration"] = com.name
    return Transcript(spec.name, b, announced, outcomes, accepted, rng.seed)


def concealment(spec: ProtocolSpec, keep: Sequence[str] | None = None) -> ConcealmentReport:
    """Babe's optimal guess of the bit before opening.

    With several configurations Babe knows hers, so the worst case is reported.
    """
    reports = []
    for _, com in spec.build():
        r0, r1 = com.babe_states(keep)
        reports.append(concealment_report(r0, r1))
    return max(reports, key=lambda r: r.p_b_cheat)


@dataclass(frozen=True)
class BindingReport:
    """Binding analysis at one value of the security parameter.

    Attributes:
        cheats: optimizer reports, projective verification first and the
            protocol's measurement-based verification second.
        concealment: Babe's side of the picture.
        projective_bound: closed-form optimum of the projective cheat on
            Adam's acting factors (weighted over configurations).
        unconstrained_bound: the same with Adam acting on everything he holds.
        us_epsilon: larger of ``p_b - 1/2`` and the best cheat found.
    """

    cheats: tuple[CheatReport, ...]
    concealment: ConcealmentReport
    projective_bound: float
    unconstrained_bound: float
    us_epsilon: float

    @property
    def measured(self) -> CheatReport:
        return self.cheats[-1]

    def to_dict(self) -> dict:
        return {
            "cheats": [c.to_dict() for c in self.cheats],
            "concealment": self.concealment.to_dict(),
            "projective_bound": self.projective_bound,
            "unconstrained_bound": self.unconstrained_bound,
            "us_epsilon": self.us_epsilon,
        }


def closed_form_bounds(spec: ProtocolSpec) -> tuple[float, float]:
    """Weighted Uhlmann values for acting = adam_acting and acting = adam_held."""
    acting = held = 0.0
    for w, com in spec.build():
        acting += w * uhlmann_cheat(com.phi[0], com.phi[1], com.adam_acting).p_success
        held += w * uhlmann_cheat(com.phi[0], com.phi[1], com.adam_held).p_success
    return acting, held


def binding(spec: ProtocolSpec, cfg: OptimizerConfig, rng: SeededRng) -> BindingReport:
    variants = spec.build()
    bound, unconstrained = closed_form_bounds(spec)
    proj = MixtureObjective([(w, c.projective_objective()) for w, c in variants])
    meas = MixtureObjective([(w, c.acceptance_objective()) for w, c in variants])
    proj_report = optimize_cheat(proj, cfg, rng.spawn(0), closed_form_bound=bound)
    meas_report = optimize_cheat(meas, cfg, rng.spawn(1))
    conc = concealment(spec)
    eps = max(conc.p_b_cheat - 0.5, proj_report.best_p, meas_report.best_p)
    return BindingReport((proj_report, meas_report), conc, bound, unconstrained, float(eps))


@dataclass(frozen=True)
class ScanPoint:
    weights: tuple[float, ...]
    report: ConcealmentReport
    flagged: bool


def psi_variation_scan(spec: ProtocolSpec, weight_grid: Sequence[Sequence[float]]) -> list[ScanPoint]:
    """Concealment when Babe purifies with weights other than the prescribed ones.

    A grid point is flagged when Babe's guessing probability exceeds the
    prescribed value by more than 1e-9.
    """
    if spec.weights is None:
        raise UnsupportedScanError(f"protocol {spec.name!r} has no Babe-side weight parameter")
    base = concealment(spec).p_b_cheat
    out = []
    for w in weight_grid:
        rep = concealment(spec.with_weights(w))
        out.append(ScanPoint(tuple(float(x) for x in w), rep, rep.p_b_cheat > base + 1e-9))
    return out


def us_curve(
    family: Callable[[int], ProtocolSpec],
    n_values: Sequence[int],
    cfg: OptimizerConfig,
    rng: SeededRng,
) -> list[dict]:
    """Concealment and binding against the security parameter (raw values, no limits)."""
    rows = []
    for n in n_values:
        spec = family(n)
        rep = binding(spec, cfg, rng.spawn(int(n)))
        rows.append({
            "n": int(n),
            "p_b_cheat": rep.concealment.p_b_cheat,
            "best_p": rep.measured.best_p,
            "projective_best_p": rep.cheats[0].best_p,
            "bound": rep.projective_bound,
        })
    return rows
