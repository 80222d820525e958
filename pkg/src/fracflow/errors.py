"""Exception types shared across the package."""


class FracflowError(Exception):
    """Base class for all package errors."""


class ConfigError(FracflowError):
    """Invalid configuration; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("invalid configuration:\n" + "\n".join(f"  - {v}" for v in self.violations))


class QuadratureError(FracflowError):
    """A quadrature did not converge; carries the residual estimate."""

    def __init__(self, message, residual=None):
        self.residual = residual
        super().__init__(message if residual is None else f"{message} (residual estimate {residual:.3e})")


class CalibrationError(FracflowError):
    """Calibrated spectral symbol disagrees with the closed form."""

    def __init__(self, calibrated, closed_form, tol):
        self.calibrated = calibrated
        self.closed_form = closed_form
        super().__init__(
            f"spectral symbol calibration {calibrated:.12g} disagrees with closed form "
            f"{closed_form:.12g} beyond rtol={tol:g}"
        )


class TailError(FracflowError):
    """A 1D profile is missing the tail descriptor needed by the operator."""


class StagnationError(FracflowError):
    """Relaxation residual stagnated; carries the residual history."""

    def __init__(self, message, history=None):
        self.history = list(history or [])
        super().__init__(message)


class MonotonicityError(FracflowError):
    """An iterate that must be monotone is not (step size too large)."""


class SingularSystemError(FracflowError):
    """A linear solve hit an (near-)singular system."""

    def __init__(self, message, sigma_min=None):
        self.sigma_min = sigma_min
        super().__init__(message if sigma_min is None else f"{message} (smallest singular value ~ {sigma_min:.3e})")


class ResolutionError(FracflowError):
    """A length scale is not resolvable on the requested grid."""


class BandError(FracflowError):
    """A point-wise curvature query landed outside the smooth band."""


class CflError(FracflowError):
    """Explicit time step exceeds the stability bound."""


class MarginError(FracflowError):
    """Geometry does not fit in the box with the required margin."""
