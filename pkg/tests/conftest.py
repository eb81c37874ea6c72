"""Shared fixtures and independent oracles.

The oracles here deliberately avoid the package's own routines so they can
serve as cross-checks: partial traces by explicit index loops, pure-state
distances by closed forms, and so on.
"""

import itertools

import numpy as np
import pytest

from qbclab.linalg import SeededRng


def loop_partial_trace(rho: np.ndarray, dims, keep) -> np.ndarray:
    """Partial trace by explicit summation over multi-indices."""
    dims = list(dims)
    keep = sorted(keep)
    rest = [i for i in range(len(dims)) if i not in keep]
    dk = int(np.prod([dims[i] for i in keep]))
    out = np.zeros((dk, dk), dtype=complex)
    strides = [int(np.prod(dims[i + 1:])) for i in range(len(dims))]

    def flat(digits):
        return sum(d * s for d, s in zip(digits, strides))

    for row in itertools.product(*[range(dims[i]) for i in keep]):
        for col in itertools.product(*[range(dims[i]) for i in keep]):
            r = int(np.ravel_multi_index(row, [dims[i] for i in keep]))
            c = int(np.ravel_multi_index(col, [dims[i] for i in keep]))
            acc = 0j
            for env in itertools.product(*[range(dims[i]) for i in rest]):
                a = [0] * len(dims)
                b = [0] * len(dims)
                for i, v in zip(keep, row):
                    a[i] = v
                for i, v in zip(keep, col):
                    b[i] = v
                for i, v in zip(rest, env):
                    a[i] = b[i] = v
                acc += rho[flat(a), flat(b)]
            out[r, c] = acc
    return out


def ket(*amps) -> np.ndarray:
    v = np.array(amps, dtype=complex)
    return v / np.linalg.norm(v)


def proj(v) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


@pytest.fixture
def rng():
    return SeededRng(20240611)


# one line per acceptance criterion, echoed after the run regardless of capture
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
