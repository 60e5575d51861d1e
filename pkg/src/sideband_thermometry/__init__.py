"""Resolved-sideband optomechanical thermometry: forward simulation and inference.

Synthesizes the quantum-asymmetric motional sidebands of a laser-cooled
nanomechanical oscillator, passes them through a realistic detection chain with
spectrum-analyzer averaging noise, and recovers the phonon occupancy via
Lorentzian fits and the backaction-corrected sideband-asymmetry estimator.
"""

from .physics import (
    BackactionError,
    BackactionState,
    DriveState,
    MechanicalModeParams,
    ModeRole,
    OpticalModeParams,
    bath_temperature,
    bose_occupancy,
    cooled_occupancy,
    cooling_rate,
    readout_backaction,
    scattering_rates,
)
from .spectra import (
    DetectionChain,
    FrequencyGrid,
    SpectrumTrace,
    TraceMetadata,
    autocorrelation,
    detected_psd,
    displacement_psd,
    optical_psd,
    periodogram,
    read_trace_csv,
    simulate_trace,
    write_trace_csv,
)
from .estimation import (
    LorentzianFit,
    NonPositiveAsymmetry,
    NoPeak,
    NotConverged,
    OccupancyEstimate,
    calibrated_occupancy,
    cooperativity_from_linewidths,
    eta_ideal,
    eta_prime,
    fit_lorentzian,
    occupancy_from_asymmetry,
    occupancy_from_eta,
)
from .experiment import (
    Scenario,
    SweepRecord,
    default_scenario,
    load_scenario,
    report,
    run_point,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "BackactionError",
    "BackactionState",
    "DetectionChain",
    "DriveState",
    "FrequencyGrid",
    "LorentzianFit",
    "MechanicalModeParams",
    "ModeRole",
    "NonPositiveAsymmetry",
    "NoPeak",
    "NotConverged",
    "OccupancyEstimate",
    "OpticalModeParams",
    "Scenario",
    "SpectrumTrace",
    "SweepRecord",
    "TraceMetadata",
    "autocorrelation",
    "bath_temperature",
    "bose_occupancy",
    "calibrated_occupancy",
    "cooled_occupancy",
    "cooling_rate",
    "cooperativity_from_linewidths",
    "default_scenario",
    "detected_psd",
    "displacement_psd",
    "eta_ideal",
    "eta_prime",
    "fit_lorentzian",
    "load_scenario",
    "occupancy_from_asymmetry",
    "occupancy_from_eta",
    "optical_psd",
    "periodogram",
    "read_trace_csv",
    "readout_backaction",
    "report",
    "run_point",
    "run_sweep",
    "scattering_rates",
    "simulate_trace",
    "write_trace_csv",
]
