"""Exception hierarchy shared by every mevsim module."""


class MevsimError(Exception):
    """Base class for all errors raised by mevsim."""


class DimensionError(MevsimError, ValueError):
    """Qubit count or array shape is out of range or inconsistent."""


class InvalidStateError(MevsimError, ValueError):
    """A state violates normalization, Hermiticity, trace or positivity."""


class InvalidDistributionError(MevsimError, ValueError):
    """A probability vector has negative mass or does not sum to one."""


class WiringError(MevsimError):
    """Bad port binding, message on an undeclared port, or a cloned qubit."""


class DivergenceError(MevsimError):
    """A run exceeded its message budget."""


class ProtocolStateError(MevsimError):
    """A machine received a message it cannot handle in its current phase."""


class RoundBudgetExhausted(ProtocolStateError):
    """A multi-round converter ran out of rounds without a decision."""


class EnumerationTooLarge(MevsimError):
    """The randomness space of a run is too large for exact enumeration."""


class ConfigError(MevsimError, ValueError):
    """An experiment configuration is malformed."""
