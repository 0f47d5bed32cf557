"""Exception types raised across the package."""


class StableDomError(Exception):
    """Base class for all package errors."""


class CoincidentPointsError(StableDomError, ValueError):
    """Kernel evaluated on the diagonal x == y."""


class QuadratureError(StableDomError, ArithmeticError):
    """Estimated quadrature error exceeds the configured tolerance."""


class ResolutionError(StableDomError, ValueError):
    """Lattice spacing does not resolve the truncation radius."""


class BudgetError(StableDomError, MemoryError):
    """Requested lattice exceeds the configured node budget."""


class LatticeMismatchError(StableDomError, ValueError):
    """Fields or operators living on different lattices were combined."""


class SeriesTruncationError(StableDomError, ArithmeticError):
    """Uniformization series needs more terms than the hard cap allows."""


class RejectionError(StableDomError, RuntimeError):
    """Rejection sampler hit its attempt cap or saw an acceptance ratio above one.

    Either case means the kernel is not dominated by its declared envelope,
    i.e. the declared constant M is too small.
    """


class ConfigError(StableDomError, ValueError):
    """Experiment configuration failed validation."""
