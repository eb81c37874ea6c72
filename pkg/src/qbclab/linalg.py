"""Dense linear algebra over small tensor-factored Hilbert spaces.

Conventions used throughout the package:

* Kronecker products put the left factor on the slow index, so a layout
  ``[("a", 2), ("b", 3)]`` stores amplitude ``(i, j)`` at flat index ``3*i + j``.
* Every construction is capped at :data:`MAX_DIM` total dimension.
* Matrix functions (square root, trace norm, polar factor) are all derived
  from a single Hermitian eigensolver.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import prod
from typing import Iterable, Sequence, Union

import numpy as np

from .errors import CapacityError, LabelError, ShapeError, ValidationError

MAX_DIM = 4096

HERMITIAN_ATOL = 1e-10
NORM_ATOL = 1e-10
# eigenvalues in [-NEG_CLIP, 0) are rounding noise and get clipped to zero
NEG_CLIP = 1e-10


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered list of named tensor factors.

    Attributes:
        factors: ``(label, dimension)`` pairs, slowest index first.
    """

    factors: tuple[tuple[str, int], ...]

    def __post_init__(self):
        factors = tuple((str(lab), int(d)) for lab, d in self.factors)
        object.__setattr__(self, "factors", factors)
        labels = [lab for lab, _ in factors]
        if len(set(labels)) != len(labels):
            raise LabelError(f"duplicate labels in layout: {labels}")
        for lab, d in factors:
            if d < 1:
                raise ValidationError(f"factor {lab!r} has dimension {d} < 1")
        if prod(d for _, d in factors) > MAX_DIM:
            raise CapacityError(
                f"layout dimension {prod(d for _, d in factors)} exceeds cap {MAX_DIM}"
            )

    @classmethod
    def of(cls, *factors: tuple[str, int]) -> "SubsystemLayout":
        return cls(tuple(factors))

    @classmethod
    def qubits(cls, *labels: str) -> "SubsystemLayout":
        return cls(tuple((lab, 2) for lab in labels))

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(lab for lab, _ in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(d for _, d in self.factors)

    @property
    def dim(self) -> int:
        return prod(self.dims)

    def __len__(self):
        return len(self.factors)

    def __contains__(self, label):
        return label in self.labels

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise LabelError(f"unknown label {label!r}; layout has {self.labels}") from None

    def indices(self, labels: Iterable[str]) -> list[int]:
        """Positions of ``labels``, sorted into layout order."""
        return sorted(self.index(lab) for lab in set(labels))

    def dim_of(self, labels: Iterable[str]) -> int:
        return prod(self.dims[i] for i in self.indices(labels))

    def select(self, labels: Iterable[str]) -> "SubsystemLayout":
        """Sub-layout holding ``labels`` in their original order."""
        return SubsystemLayout(tuple(self.factors[i] for i in self.indices(labels)))

    def complement(self, labels: Iterable[str]) -> tuple[str, ...]:
        drop = set(labels)
        for lab in drop:
            self.index(lab)
        return tuple(lab for lab in self.labels if lab not in drop)

    def __add__(self, other: "SubsystemLayout") -> "SubsystemLayout":
        return SubsystemLayout(self.factors + other.factors)


def _as_layout(layout: Union[SubsystemLayout, int, None], dim: int, label: str = "q"):
    if isinstance(layout, SubsystemLayout):
        return layout
    return SubsystemLayout(((label, dim),))


@dataclass(frozen=True)
class StateVector:
    """Normalized pure state on a tensor-factored space."""

    amplitudes: np.ndarray
    layout: SubsystemLayout = field(default=None)

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        layout = _as_layout(self.layout, amps.size)
        if amps.size != layout.dim:
            raise ShapeError(
                f"{amps.size} amplitudes do not match layout dimension {layout.dim}"
            )
        norm = np.linalg.norm(amps)
        if abs(norm - 1.0) > NORM_ATOL:
            raise ValidationError(f"state norm {norm!r} differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "layout", layout)

    @classmethod
    def from_unnormalized(cls, amplitudes, layout=None) -> "StateVector":
        amps = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amps)
        if norm == 0:
            raise ValidationError("cannot normalize the zero vector")
        return cls(amps / norm, layout)

    @classmethod
    def basis(cls, layout: SubsystemLayout, *digits: int) -> "StateVector":
        """Computational basis state ``|digits>`` of ``layout``."""
        if len(digits) != len(layout):
            raise ShapeError(f"need {len(layout)} digits, got {len(digits)}")
        amps = np.zeros(layout.dim, dtype=complex)
        amps[np.ravel_multi_index(digits, layout.dims)] = 1.0
        return cls(amps, layout)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def as_tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.dims)

    def matrix(self, rows: Iterable[str]) -> np.ndarray:
        """Amplitudes reshaped to a matrix with ``rows`` labels as the row index.

        The column index runs over the remaining labels in layout order.
        """
        rows_idx = self.layout.indices(rows)
        rest = [i for i in range(len(self.layout)) if i not in rows_idx]
        t = np.transpose(self.as_tensor(), rows_idx + rest)
        drow = prod(self.layout.dims[i] for i in rows_idx)
        return t.reshape(drow, -1)

    def density(self) -> "DensityOperator":
        return DensityOperator(np.outer(self.amplitudes, self.amplitudes.conj()), self.layout)

    def inner(self, other: "StateVector") -> complex:
        """``<self|other>``."""
        if self.dim != other.dim:
            raise ShapeError(f"dimension mismatch {self.dim} vs {other.dim}")
        return complex(np.vdot(self.amplitudes, other.amplitudes))


@dataclass(frozen=True)
class DensityOperator:
    """Hermitian, positive semidefinite, unit-trace matrix."""

    matrix: np.ndarray
    layout: SubsystemLayout = field(default=None)

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ShapeError(f"density operator must be square, got shape {m.shape}")
        layout = _as_layout(self.layout, m.shape[0])
        if layout.dim != m.shape[0]:
            raise ShapeError(f"matrix size {m.shape[0]} does not match layout {layout.dim}")
        herm_err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
        if herm_err > HERMITIAN_ATOL:
            raise ValidationError(f"density operator not Hermitian (error {herm_err:.3g})")
        m = 0.5 * (m + m.conj().T)
        tr = np.trace(m).real
        if abs(tr - 1.0) > NORM_ATOL:
            raise ValidationError(f"density operator trace {tr!r} differs from 1")
        lo = np.linalg.eigvalsh(m)[0]
        if lo < -NEG_CLIP:
            raise ValidationError(f"density operator has eigenvalue {lo:.3g} < 0")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "layout", layout)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))


@dataclass(frozen=True)
class SeededRng:
    """Reproducible random stream addressed by ``(seed, stream)``.

    ``generator()`` always restarts the stream, so two calls yield identical
    sequences. Child streams for independent tasks come from ``spawn``.
    """

    seed: int
    stream: int = 0
    path: tuple[int, ...] = ()

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValidationError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise ValidationError("stream index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream), *self.path))
        return np.random.default_rng(ss)

    def spawn(self, index: int) -> "SeededRng":
        return SeededRng(self.seed, self.stream, self.path + (int(index),))


State = Union[StateVector, DensityOperator]


def _check_cap(dim):
    if dim > MAX_DIM:
        raise CapacityError(f"combined dimension {dim} exceeds cap {MAX_DIM}")


def tensor(a: State, b: State) -> State:
    """Kronecker product with the left operand as the slow index."""
    if type(a) is not type(b):
        raise ShapeError("tensor operands must both be states or both be density operators")
    _check_cap(a.dim * b.dim)
    layout = a.layout + b.layout
    if isinstance(a, StateVector):
        return StateVector(np.kron(a.amplitudes, b.amplitudes), layout)
    return DensityOperator(np.kron(a.matrix, b.matrix), layout)


def reduced_matrix(state: State, keep: Iterable[str]) -> np.ndarray:
    """Partial trace as a bare matrix (no validation of the result)."""
    keep = list(keep)
    if not keep:
        raise ValidationError("keep must name at least one factor")
    layout = state.layout
    idx = layout.indices(keep)
    if isinstance(state, StateVector):
        m = state.matrix([layout.labels[i] for i in idx])
        return m @ m.conj().T
    n = len(layout)
    rest = [i for i in range(n) if i not in idx]
    dk = prod(layout.dims[i] for i in idx)
    dr = prod(layout.dims[i] for i in rest)
    t = state.matrix.reshape(layout.dims + layout.dims)
    t = np.transpose(t, idx + rest + [n + i for i in idx] + [n + i for i in rest])
    t = t.reshape(dk, dr, dk, dr)
    return np.einsum("arbr->ab", t)


def partial_trace(state: State, keep: Iterable[str]) -> DensityOperator:
    """Reduce ``state`` onto the factors in ``keep``.

    Pure states are contracted directly from their amplitudes, which avoids
    forming the full density matrix.
    """
    keep = list(keep)
    m = reduced_matrix(state, keep)
    return DensityOperator(0.5 * (m + m.conj().T), state.layout.select(keep))


def dephase(rho: DensityOperator, labels: Iterable[str]) -> DensityOperator:
    """Remove coherences between computational basis states of ``labels``."""
    labels = list(labels)
    if not labels:
        return rho
    layout = rho.layout
    idx = layout.indices(labels)
    digits = np.indices(layout.dims).reshape(len(layout), -1)[idx]
    same = np.all(digits[:, :, None] == digits[:, None, :], axis=0)
    return DensityOperator(np.where(same, rho.matrix, 0.0), layout)


def eigh(m: np.ndarray, atol: float = HERMITIAN_ATOL) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix, eigenvalues ascending."""
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {m.shape}")
    err = np.max(np.abs(m - m.conj().T)) if m.size else 0.0
    if err > atol:
        raise ValidationError(f"matrix is not Hermitian (error {err:.3g})")
    w, v = np.linalg.eigh(0.5 * (m + m.conj().T))
    return w, v


def clip_eigenvalues(w: np.ndarray) -> np.ndarray:
    if w.size and w.min() < -NEG_CLIP:
        raise ValidationError(f"matrix has eigenvalue {w.min():.3g} below -{NEG_CLIP}")
    return np.clip(w, 0.0, None)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    w, v = eigh(m)
    return (v * np.sqrt(clip_eigenvalues(w))) @ v.conj().T


def psd_factor(m: np.ndarray, cutoff: float = 0.0) -> np.ndarray:
    """Return ``G`` with ``G G^dagger = m``, dropping eigenvalues ``<= cutoff``."""
    w, v = eigh(m)
    w = clip_eigenvalues(w)
    keep = w > cutoff
    return v[:, keep] * np.sqrt(w[keep])


def _dilation(x: np.ndarray):
    r, c = x.shape
    h = np.zeros((r + c, r + c), dtype=complex)
    h[:r, r:] = x
    h[r:, :r] = x.conj().T
    return np.linalg.eigh(h)


def singular_values(x: np.ndarray) -> np.ndarray:
    """Singular values (descending) from the Hermitian dilation ``[[0, X], [X^dag, 0]]``.

    The dilation has eigenvalues ``+-sigma_i`` so no square roots are taken,
    which keeps small singular values accurate to machine precision.
    """
    x = np.asarray(x, dtype=complex)
    w, _ = _dilation(x)
    k = min(x.shape)
    return np.clip(w[::-1][:k], 0.0, None)


def trace_norm(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=complex)
    if x.ndim == 2 and x.shape[0] == x.shape[1] and np.allclose(x, x.conj().T, atol=1e-14):
        return float(np.abs(np.linalg.eigvalsh(0.5 * (x + x.conj().T))).sum())
    return float(singular_values(x).sum())


def _complete_basis(vecs: np.ndarray, dim: int) -> np.ndarray:
    """Orthonormal basis of the complement of the column span of ``vecs``."""
    proj = np.eye(dim, dtype=complex) - vecs @ vecs.conj().T
    w, v = np.linalg.eigh(0.5 * (proj + proj.conj().T))
    return v[:, vecs.shape[1]:]


def polar_unitary(x: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Unitary ``W`` with ``X = W |X|`` for square ``X``.

    Singular directions with singular value below ``tol`` are gauge freedom;
    they are paired up deterministically through an eigenbasis of the
    complementary projectors.
    """
    x = np.asarray(x, dtype=complex)
    d = x.shape[0]
    if x.shape != (d, d):
        raise ShapeError(f"polar decomposition needs a square matrix, got {x.shape}")
    w, vecs = _dilation(x)
    pos = w > tol
    # eigenvector (u; v)/sqrt(2) for +sigma gives X v = sigma u
    u = vecs[:d, pos] * np.sqrt(2.0)
    v = vecs[d:, pos] * np.sqrt(2.0)
    if u.shape[1]:
        # re-orthonormalize against rounding in near-degenerate pairs
        qu, _ = np.linalg.qr(u)
        qv, _ = np.linalg.qr(v)
        u = qu * np.exp(1j * np.angle(np.sum(qu.conj() * u, axis=0)))
        v = qv * np.exp(1j * np.angle(np.sum(qv.conj() * v, axis=0)))
    u_rest = _complete_basis(u, d)
    v_rest = _complete_basis(v, d)
    big_u = np.hstack([u, u_rest])
    big_v = np.hstack([v, v_rest])
    return big_u @ big_v.conj().T


def is_unitary(u: np.ndarray, atol: float = 1e-10) -> bool:
    u = np.asarray(u)
    return u.shape[0] == u.shape[1] and np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)


def apply_local(state: StateVector, op: np.ndarray, labels: Sequence[str]) -> StateVector:
    """Apply ``op`` to the factors ``labels`` (in the given order) of ``state``."""
    return StateVector.from_unnormalized(apply_local_array(state.amplitudes, state.layout, op, labels), state.layout)


def apply_local_array(amps: np.ndarray, layout: SubsystemLayout, op: np.ndarray, labels: Sequence[str]) -> np.ndarray:
    """Unvalidated ``op`` application on a raw amplitude vector."""
    labels = list(labels)
    idx = [layout.index(lab) for lab in labels]
    dk = prod(layout.dims[i] for i in idx)
    op = np.asarray(op, dtype=complex)
    if op.shape != (dk, dk):
        raise ShapeError(f"operator shape {op.shape} does not match factors of dimension {dk}")
    n = len(layout)
    rest = [i for i in range(n) if i not in idx]
    t = np.transpose(amps.reshape(layout.dims), idx + rest).reshape(dk, -1)
    t = (op @ t).reshape([layout.dims[i] for i in idx + rest])
    return np.transpose(t, np.argsort(idx + rest)).reshape(-1)


def embed(op: np.ndarray, labels: Sequence[str], layout: SubsystemLayout) -> np.ndarray:
    """Full-space matrix of ``op`` acting on ``labels`` (identity elsewhere)."""
    cols = np.eye(layout.dim, dtype=complex)
    out = np.empty_like(cols)
    for j in range(layout.dim):
        out[:, j] = apply_local_array(cols[:, j], layout, op, labels)
    return out


def _check_perm(perm: Sequence[int], layout: SubsystemLayout) -> list[int]:
    perm = [int(p) for p in perm]
    if sorted(perm) != list(range(len(layout))):
        raise ValidationError(f"{perm} is not a permutation of {len(layout)} factors")
    for i, p in enumerate(perm):
        if layout.dims[i] != layout.dims[p]:
            raise ShapeError(
                f"cannot move factor {layout.labels[i]!r} (dim {layout.dims[i]}) "
                f"onto slot {layout.labels[p]!r} (dim {layout.dims[p]})"
            )
    return perm


def permute_array(amps: np.ndarray, layout: SubsystemLayout, perm: Sequence[int]) -> np.ndarray:
    """Move the content of factor ``i`` into slot ``perm[i]``."""
    perm = _check_perm(perm, layout)
    axes = np.argsort(perm)
    return np.transpose(np.asarray(amps).reshape(layout.dims), axes).reshape(-1)


def permutation_unitary(perm: Sequence[int], layout: SubsystemLayout) -> np.ndarray:
    """Unitary that moves the content of factor ``i`` into slot ``perm[i]``.

    With this convention ``U(p1 o p2) = U(p1) U(p2)`` where
    ``(p1 o p2)[i] = p1[p2[i]]``.
    """
    perm = _check_perm(perm, layout)
    d = layout.dim
    eye = np.eye(d, dtype=complex).reshape(layout.dims + (d,))
    axes = list(np.argsort(perm)) + [len(layout)]
    return np.transpose(eye, axes).reshape(d, d)


def random_pure_state(dim: Union[int, SubsystemLayout], rng: SeededRng) -> StateVector:
    """Haar-random pure state from normalized complex Gaussian amplitudes.

    The global phase is fixed so that the first nonzero amplitude is real and
    positive; the distribution of physical states is unaffected.
    """
    layout = dim if isinstance(dim, SubsystemLayout) else None
    d = layout.dim if layout is not None else int(dim)
    if d < 1:
        raise ValidationError(f"dimension must be positive, got {d}")
    _check_cap(d)
    g = rng.generator()
    z = g.standard_normal(d) + 1j * g.standard_normal(d)
    z0 = abs(z[0])
    z *= np.exp(-1j * np.angle(z[0]))
    z[0] = z0
    z /= np.linalg.norm(z)
    return StateVector(z, layout)


def random_unitary(d: int, rng: SeededRng) -> np.ndarray:
    """Haar-random unitary (QR of a Ginibre matrix with phase correction)."""
    g = rng.generator()
    z = (g.standard_normal((d, d)) + 1j * g.standard_normal((d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    ph = np.diag(r) / np.abs(np.diag(r))
    return q * ph


def random_density(dim: int, rng: SeededRng, rank: int | None = None) -> DensityOperator:
    """Random mixed state: partial trace of a Haar state on ``dim x rank``."""
    rank = dim if rank is None else rank
    g = rng.generator()
    z = g.standard_normal((dim, rank)) + 1j * g.standard_normal((dim, rank))
    m = z @ z.conj().T
    return DensityOperator(m / np.trace(m).real)
