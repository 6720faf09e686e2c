"""Exception types shared across the toolkit."""


class HeatObsError(Exception):
    """Base class for toolkit-specific failures."""


class InsufficientBasis(HeatObsError):
    """The spectral basis is too short to witness the requested threshold."""


class QuadratureFailure(HeatObsError):
    """Adaptive quadrature could not reach the requested tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved


class InconsistentQuadrature(HeatObsError):
    """A tail quantity came out negative beyond numerical tolerance."""


class DesignInfeasible(HeatObsError):
    """A gain-design LMI set is infeasible at the requested decay rate."""

    def __init__(self, message, binding=None):
        super().__init__(message)
        self.binding = binding


class PivotSingular(HeatObsError):
    """Schur pivot block is singular or too ill-conditioned to invert."""


class UndefinedFit(HeatObsError):
    """Decay-rate fit requested on a window with nonpositive samples."""
