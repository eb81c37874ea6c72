"""Numerical laboratory for quantum bit commitment cheating analyses."""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    ConfigurationError,
    LabelError,
    QbcError,
    ShapeError,
    UnsupportedScanError,
    ValidationError,
)
from .linalg import (
    MAX_DIM,
    DensityOperator,
    SeededRng,
    StateVector,
    SubsystemLayout,
    eigh,
    partial_trace,
    permutation_unitary,
    random_pure_state,
    tensor,
)
