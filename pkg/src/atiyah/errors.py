"""Exception hierarchy shared by all modules."""


class AtiyahError(Exception):
    """Base class for errors raised by this package."""


class IndexOutOfRange(AtiyahError, IndexError):
    pass


class DegenerateConfiguration(AtiyahError, ValueError):
    """Two points coincide, or are closer than the separation threshold."""


class InvalidArity(AtiyahError, ValueError):
    pass


class SamplerExhausted(AtiyahError, RuntimeError):
    pass


class InvalidTransform(AtiyahError, ValueError):
    pass


class NotUnit(AtiyahError, ValueError):
    pass


class DegreeMismatch(AtiyahError, ValueError):
    pass


class DegreeTooHigh(AtiyahError, ValueError):
    pass


class OutOfRange(AtiyahError, ValueError):
    pass


class DimMismatch(AtiyahError, ValueError):
    pass


class ArityMismatch(AtiyahError, ValueError):
    pass


class ScaleCollision(AtiyahError, ValueError):
    """Clusters of an epsilon-realization overlap at the requested scale."""


class ObjectiveUndefined(AtiyahError, ValueError):
    pass
