"""Exception types raised across the package."""


class KgmiError(Exception):
    """Base class for all package errors."""


class DomainError(KgmiError, ValueError):
    """A numeric argument lies outside its admissible range."""


class DimensionMismatch(KgmiError, ValueError):
    pass


# graph construction
class EdgeOrderViolation(KgmiError, ValueError):
    pass


class InDegreeMismatch(KgmiError, ValueError):
    pass


class DuplicateEdge(KgmiError, ValueError):
    pass


# kernels
class RowSumError(KgmiError, ValueError):
    pass


class NonPositiveEntry(KgmiError, ValueError):
    pass


class ConvergenceFailure(KgmiError, RuntimeError):
    pass


# sampling / enumeration
class RootCountMismatch(KgmiError, ValueError):
    pass


class EnumerationTooLarge(KgmiError, ValueError):
    pass


# information measures
class SupportMismatch(KgmiError, ValueError):
    pass


class ZeroDenominator(KgmiError, ValueError):
    pass


class InvalidJoint(KgmiError, ValueError):
    pass


class ZeroJointEntry(KgmiError, ValueError):
    pass


# estimator
class EmptyIndexSet(KgmiError, ValueError):
    pass


class NotExtended(KgmiError, ValueError):
    pass


class IndexOutOfRange(KgmiError, IndexError):
    pass


# training / decoding
class BadHyperparameter(KgmiError, ValueError):
    pass


class NonFiniteUpdate(KgmiError, FloatingPointError):
    pass


class BadThreshold(KgmiError, ValueError):
    pass


class ConfigError(KgmiError, ValueError):
    pass
