"""Shaped single-photon emission toolkit.

Derives time-dependent qubit–cavity coupling schedules that radiate a
chosen wave-packet shape, simulates the emission (closed-form oracle,
master equation, quantum trajectories), synthesizes and analyzes homodyne
records, models the two-voltage tunable coupler used to realize the
schedules, and replays packets into time-reversed absorbers to score
quantum state transfer.
"""

from .config import ExperimentConfig, load_config, write_example_config
from .device import (
    ContourResult,
    DeviceParams,
    SpectrumPoint,
    VoltageWaveforms,
    constant_frequency_contour,
    schedule_to_voltages,
    tcq_spectrum,
)
from .dynamics import (
    EmissionResult,
    FieldRecord,
    TransferResult,
    absorb,
    emit,
    evolve_master,
    fidelity_trace,
    jc_hamiltonian,
    mc_trajectories,
    reverse_schedule,
)
from .exceptions import (
    ConfigError,
    ContourGapError,
    DepletedPopulationError,
    DimensionMismatchError,
    FitFailureError,
    GridMismatchError,
    InfeasibleScheduleError,
    IntegratorError,
    InvalidFluxError,
    InvalidSpecError,
    NoSignalError,
    PhotonshapeError,
)
from .hilbert import DensityMatrix, HilbertSpec, build_operators
from .homodyne import (
    ChevronMap,
    FitResult,
    HomodyneRecord,
    PhaseDriftReport,
    SymmetryReport,
    T1Curve,
    chevron_scan,
    fit_exponential,
    phase_drift,
    symmetry_report,
    synthesize_homodyne,
    t1_curve,
)
from .schedule import (
    FluxProfile,
    Schedule,
    coupling_from_flux,
    flux_from_schedule,
    symmetric_exponential_flux,
    truncate_schedule,
)
from .units import make_grid

__version__ = "0.1.0"

__all__ = [
    "ChevronMap",
    "ConfigError",
    "ContourGapError",
    "ContourResult",
    "DensityMatrix",
    "DepletedPopulationError",
    "DeviceParams",
    "DimensionMismatchError",
    "EmissionResult",
    "ExperimentConfig",
    "FieldRecord",
    "FitFailureError",
    "FitResult",
    "FluxProfile",
    "GridMismatchError",
    "HilbertSpec",
    "HomodyneRecord",
    "InfeasibleScheduleError",
    "IntegratorError",
    "InvalidFluxError",
    "InvalidSpecError",
    "NoSignalError",
    "PhaseDriftReport",
    "PhotonshapeError",
    "Schedule",
    "SpectrumPoint",
    "SymmetryReport",
    "T1Curve",
    "TransferResult",
    "VoltageWaveforms",
    "absorb",
    "build_operators",
    "chevron_scan",
    "constant_frequency_contour",
    "coupling_from_flux",
    "emit",
    "evolve_master",
    "fidelity_trace",
    "fit_exponential",
    "flux_from_schedule",
    "jc_hamiltonian",
    "load_config",
    "make_grid",
    "mc_trajectories",
    "phase_drift",
    "reverse_schedule",
    "schedule_to_voltages",
    "symmetric_exponential_flux",
    "symmetry_report",
    "synthesize_homodyne",
    "t1_curve",
    "tcq_spectrum",
    "truncate_schedule",
    "write_example_config",
    "__version__",
]
