"""Exception hierarchy shared by all modules."""


class QbcError(Exception):
    """Base class for errors raised by qbclab."""


class ValidationError(QbcError, ValueError):
    """An input violates a documented precondition."""


class ShapeError(ValidationError):
    """Operands have incompatible dimensions."""


class LabelError(ValidationError, KeyError):
    """A subsystem label is unknown or duplicated."""

    def __str__(self):
        return Exception.__str__(self)


class CapacityError(QbcError):
    """A construction would exceed the global dimension cap."""


class ConfigurationError(QbcError, ValueError):
    """Optimizer or experiment configuration is unusable."""


class UnsupportedScanError(QbcError):
    """The protocol does not expose the parameter a scan needs."""
