"""Shared forward-model builders for the estimation and acceptance tests.

The closure harness pins an exact operating point (<n>_c, C_r, gamma_total)
directly in a BackactionState, synthesizes both detuning-branch traces through
the spectra + detection-chain path, and hands them to the fitting pipeline.
Pinning the state (rather than solving for drive powers) lets the tests hit
C_r = 0 and exact round-number occupancies.
"""

import math
from dataclasses import replace

from sideband_thermometry.estimation import fit_lorentzian, occupancy_from_asymmetry
from sideband_thermometry.physics import (
    BackactionState,
    DriveState,
    MechanicalModeParams,
    ModeRole,
    OpticalModeParams,
)
from sideband_thermometry.spectra import (
    DetectionChain,
    FrequencyGrid,
    detected_psd,
    readout_sideband_trace,
    simulate_trace,
)

TWO_PI = 2.0 * math.pi

READOUT = OpticalModeParams(
    omega=TWO_PI * 194.1e12,
    kappa=TWO_PI * 1.0e9,
    kappa_e=TWO_PI * 300e6,
    g0=TWO_PI * 430e3,
    role=ModeRole.READOUT,
)
MECH = MechanicalModeParams(
    omega_m=TWO_PI * 3.99e9, gamma_i=TWO_PI * 43e3, n_b=94.0, x_zpf=2.7e-15
)


def pinned_backaction(n_c: float, c_r: float, gamma_total: float) -> BackactionState:
    return BackactionState(
        gamma_c=gamma_total - MECH.gamma_i,
        n_cooled=n_c,
        C_r=c_r,
        gamma_plus=gamma_total * (1.0 + c_r),
        gamma_minus=gamma_total * (1.0 - c_r),
        n_plus=n_c / (1.0 + c_r),
        n_minus=n_c / (1.0 - c_r),
    )


def sideband_pair(
    n_c: float,
    c_r: float,
    gamma_total_hz: float = 1.0e6,
    n_readout: float = 42.0,
    snr: float = 10.0,
    n_averages: int = 0,
    seed: int = 0,
    n_points: int = 4096,
    halfwidth_hz: float = 16e6,
):
    """Detected (plus, minus) traces for an exactly pinned operating point.

    n_averages = 0 produces noiseless traces; otherwise Gamma averaging noise is
    drawn with per-branch seeds (2*seed, 2*seed+1). Returns (traces, context)
    where context carries the chain and drives for calibrated inversions.
    """
    back = pinned_backaction(n_c, c_r, TWO_PI * gamma_total_hz)
    f_m = MECH.omega_m / TWO_PI
    grid = FrequencyGrid(f_m - halfwidth_hz, f_m + halfwidth_hz, n_points)
    chain0 = DetectionChain(G_EDFA=1000.0, G_e=1.0e4, reference_hz=194.1e12)
    traces = {}
    drives = {}
    peak = None
    for sign in (+1, -1):
        drive = DriveState(ModeRole.READOUT, sign * MECH.omega_m, n_readout)
        drives[sign] = drive
        optical = readout_sideband_trace(READOUT, MECH, back, drive, grid)
        if peak is None:
            peak = chain0.conversion(optical.metadata.laser_hz) * optical.psd.max()
        chain = replace(chain0, noise_floor=peak / snr if snr else 0.0)
        detected = detected_psd(optical, chain)
        if n_averages >= 1:
            detected = simulate_trace(detected, n_averages, 2 * seed + (sign < 0))
        traces[sign] = detected
    context = {
        "back": back,
        "chain": replace(chain0, noise_floor=peak / snr if snr else 0.0),
        "drives": drives,
        "readout": READOUT,
        "mech": MECH,
    }
    return traces, context


def estimate_pair(traces, power_matching_uncertainty: float = 0.0):
    fit_plus = fit_lorentzian(traces[+1])
    fit_minus = fit_lorentzian(traces[-1])
    return occupancy_from_asymmetry(fit_plus, fit_minus, power_matching_uncertainty)
