"""Exception types shared across the package."""


class ElflowError(Exception):
    """Base class for all package-specific errors."""


class ZeroSegment(ElflowError):
    """Two consecutive polyline nodes coincide (degenerate curve)."""


class DimensionMismatch(ElflowError):
    """A per-node field does not match the curve's node count."""


class NonPositiveMu(ElflowError):
    """The length-penalty weight must be strictly positive."""


class ConstraintViolation(ElflowError):
    """A variation field moves a constrained endpoint off the axis."""


class StepFailure(ElflowError):
    """A flow step produced a singular solve or an irregular curve."""


class AdmissibilityError(ElflowError):
    """Initial curve rejected by the admissibility check in strict mode."""


class NonFinite(ElflowError):
    """ODE integration produced NaN/inf state."""


class NoConvergence(ElflowError):
    """Newton iteration failed to reach the residual tolerance."""


class SingularJacobian(ElflowError):
    """Newton hit a (numerically) singular Jacobian."""


class EmptyTrace(ElflowError):
    """A diagnostic was asked of a trace with no usable samples."""


class InsufficientSamples(ElflowError):
    """Not enough (or degenerate) samples in a fit window."""


class ConfigParse(ElflowError):
    """Experiment configuration file could not be parsed."""


class IoError(ElflowError):
    """File could not be read or written."""
