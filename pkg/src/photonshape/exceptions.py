"""Typed errors raised across the toolkit.

The CLI maps these onto distinct exit codes, so keep the taxonomy stable:
config/validation problems, physical infeasibility, and numerical failures
are separate families.
"""


class PhotonshapeError(Exception):
    """Base class for all toolkit errors."""


class InvalidSpecError(PhotonshapeError):
    """Malformed Hilbert-space or operator specification."""


class DimensionMismatchError(PhotonshapeError):
    """Operator or state dimensions do not match the declared space."""


class InvalidFluxError(PhotonshapeError):
    """Photon-flux profile violates its contract (negative flux, bad grid)."""


class DepletedPopulationError(PhotonshapeError):
    """Flux integrates to one before the grid ends; coupling would diverge."""


class InfeasibleScheduleError(PhotonshapeError):
    """Schedule demands a coupling outside the device's reachable range."""


class ContourGapError(PhotonshapeError):
    """Constant-frequency contour root not bracketed within voltage bounds."""


class GridMismatchError(PhotonshapeError):
    """Field record and schedule grids differ too much to resample."""


class IntegratorError(PhotonshapeError):
    """Adaptive integrator failed to reach tolerance."""


class FitFailureError(PhotonshapeError):
    """Least-squares fit did not converge or is unidentifiable."""


class NoSignalError(PhotonshapeError):
    """Analysis window contains no samples above the amplitude floor."""


class ConfigError(PhotonshapeError):
    """Experiment configuration file is missing keys or has bad values."""
