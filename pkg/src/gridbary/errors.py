"""Exception types shared across the package."""


class GridBaryError(ValueError):
    """Base class for all gridbary errors."""


class AllZero(GridBaryError):
    """Input carries no mass at all."""


class NegativeMass(GridBaryError):
    """Input contains negative (or non-finite) mass entries."""


class ShapeMismatch(GridBaryError):
    """Two grids that must share a shape do not."""


class BadMagic(GridBaryError):
    """File does not start with a recognized magic/version."""


class DimensionMismatch(GridBaryError):
    """Header dimensions are invalid or inconsistent with the payload."""


class MassNotNormalized(GridBaryError):
    """Stored mass deviates from total 1 beyond the repairable tolerance."""


class TruncatedFile(GridBaryError):
    """File ends before the declared payload is complete."""


class DegenerateShape(GridBaryError):
    """Shape composition kept producing empty masks."""


class NoConvergence(GridBaryError):
    """Iterative solver hit its iteration budget before the tolerance."""


class PlanTooLarge(GridBaryError):
    """Dense transport plan would exceed the entry budget."""


class StaleDuals(GridBaryError):
    """Potentials are too far from feasibility to induce a usable plan."""


class TooLarge(GridBaryError):
    """Problem exceeds the size guard of an exact solver."""


class Infeasible(GridBaryError):
    """Marginals cannot be coupled (total masses differ)."""


class ConfigMismatch(GridBaryError):
    """Stored checkpoint does not match the requested configuration."""


class OddDimension(GridBaryError):
    """Spatial dimension is not divisible by the pooling factor."""


class WeightShapeMismatch(GridBaryError):
    """Model weight tensor has an unexpected shape."""


class StaleCache(GridBaryError):
    """Backward pass received a cache from a mismatched forward pass."""


class OutOfRange(GridBaryError):
    """Scalar argument falls outside its documented range."""


class DataShapeMismatch(GridBaryError):
    """Dataset record does not match the configured grid or input count."""


class NonFiniteLoss(GridBaryError):
    """Training produced a NaN/inf loss."""
