"""Inverse pipeline: Lorentzian fits of measured traces and occupancy estimators.

The thermometry chain is

    two traces (detuning +/- omega_m)
      -> fit_lorentzian twice          (areas I_+/-, linewidths gamma_+/-)
      -> C_r = (gamma_+ - gamma_-) / (gamma_+ + gamma_-)
      -> eta' = (I_-/I_+)/(1 + C_r) - 1/(1 - C_r)
      -> <n>_c = 1 / eta'

eta' removes the readout-beam backaction exactly within the rate model, for any
C_r < 1, and reduces to the ideal asymmetry eta = I_-/I_+ - 1 at C_r = 0. The
asymmetry route is self-calibrated: any common scale on the two traces cancels.

Fitting uses the model

    f(nu) = offset + (2 area / pi) * fwhm / (4 (nu - center)^2 + fwhm^2)

so ``area`` is the analytic integral of the peak (no numerical quadrature of the
fitted curve) and ``fwhm`` is the full width at half maximum. For traces carrying
an averaging count, weights are iteratively set to the model's own Gamma standard
deviation (model/sqrt(averages)); the reweighted least squares then solves the
Gamma maximum-likelihood equations and the linearized covariance gives
asymptotically calibrated confidence intervals even though the noise is strongly
heteroscedastic.
"""

from __future__ import annotations

import json
import math
import os
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import least_squares

from .physics import TWO_PI, DriveState, OpticalModeParams
from .spectra import DetectionChain, SpectrumTrace

Z_95 = 1.959963984540054  # two-sided 95% normal quantile


class FitError(RuntimeError):
    """Base class for Lorentzian fitting failures."""


class NoPeak(FitError):
    """No peak above the floor (max < 2x median)."""


class NotConverged(FitError):
    """The least-squares iteration cap was reached before convergence."""


class WindowTooNarrow(FitError):
    """The fit window contains fewer than 16 samples."""


class NonPositiveAsymmetry(ValueError):
    """Measured asymmetry <= 0: occupancy is undefined.

    Either the spectra are classical-noise dominated or the detuning labels are
    swapped. Never clamped: a silent clamp would manufacture a fake quantum
    signature.
    """


@dataclass(frozen=True)
class LorentzianFit:
    """Result of a single Lorentzian-plus-offset fit.

    center/fwhm in Hz, area in trace units x Hz, offset in trace units. ci95_*
    are half-widths of 95% confidence intervals. cov is the 4x4 covariance over
    (center, fwhm, area, offset); window the fitted frequency interval.
    """

    center: float
    fwhm: float
    area: float
    offset: float
    residual_rms: float
    ci95_center: float
    ci95_fwhm: float
    ci95_area: float
    ci95_offset: float
    converged: bool
    window: tuple[float, float]
    cov: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "center_hz": self.center,
            "fwhm_hz": self.fwhm,
            "area": self.area,
            "offset": self.offset,
            "residual_rms": self.residual_rms,
            "ci95_center_hz": self.ci95_center,
            "ci95_fwhm_hz": self.ci95_fwhm,
            "ci95_area": self.ci95_area,
            "ci95_offset": self.ci95_offset,
            "converged": self.converged,
            "window_hz": list(self.window),
        }


@dataclass(frozen=True)
class OccupancyEstimate:
    """Backaction-corrected occupancy with first-order uncertainty intervals."""

    n_c_est: float
    C_r_est: float
    eta_prime: float
    n_plus_est: float
    n_minus_est: float
    ci95_n_c: float
    ci95_C_r: float
    ci95_eta_prime: float
    ci95_n_plus: float
    ci95_n_minus: float
    i_plus: float
    i_minus: float
    gamma_plus_hz: float
    gamma_minus_hz: float
    fit_plus: LorentzianFit
    fit_minus: LorentzianFit
    power_matching_uncertainty: float

    def to_dict(self) -> dict:
        return {
            "n_c_est": self.n_c_est,
            "C_r_est": self.C_r_est,
            "eta_prime": self.eta_prime,
            "n_plus_est": self.n_plus_est,
            "n_minus_est": self.n_minus_est,
            "ci95_n_c": self.ci95_n_c,
            "ci95_C_r": self.ci95_C_r,
            "ci95_eta_prime": self.ci95_eta_prime,
            "ci95_n_plus": self.ci95_n_plus,
            "ci95_n_minus": self.ci95_n_minus,
            "i_plus": self.i_plus,
            "i_minus": self.i_minus,
            "gamma_plus_hz": self.gamma_plus_hz,
            "gamma_minus_hz": self.gamma_minus_hz,
            "power_matching_uncertainty": self.power_matching_uncertainty,
            "fit_plus": self.fit_plus.to_dict(),
            "fit_minus": self.fit_minus.to_dict(),
        }


# ---------------------------------------------------------------------------
# Lorentzian fitting


def _model(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    center, fwhm, area, offset = theta
    u = x - center
    return offset + (2.0 * area / math.pi) * fwhm / (4.0 * u * u + fwhm * fwhm)


def _jacobian(theta: np.ndarray, x: np.ndarray) -> np.ndarray:
    center, fwhm, area, _ = theta
    u = x - center
    denom = 4.0 * u * u + fwhm * fwhm
    jac = np.empty((x.size, 4))
    jac[:, 0] = (2.0 * area / math.pi) * fwhm * 8.0 * u / denom**2
    jac[:, 1] = (2.0 * area / math.pi) * (4.0 * u * u - fwhm * fwhm) / denom**2
    jac[:, 2] = (2.0 / math.pi) * fwhm / denom
    jac[:, 3] = 1.0
    return jac


def _initial_guess(nu: np.ndarray, psd: np.ndarray) -> tuple[float, float, float, float]:
    """Peak location plus half-maximum width scan: (center, fwhm, height, floor).

    The width is the total number of samples above the halfway level, not a
    contiguous walk from the peak: a walk stops at the first noisy dip and
    collapses the estimate when the per-point noise is large, while the count
    stays unbiased (a Lorentzian exceeds half maximum over exactly one FWHM).
    """
    floor = float(np.median(psd))
    peak_index = int(np.argmax(psd))
    height = float(psd[peak_index] - floor)
    half = floor + 0.5 * height
    spacing = nu[1] - nu[0]
    n_above = int(np.count_nonzero(psd > half))
    fwhm = max(n_above * spacing, 2.0 * spacing)
    return float(nu[peak_index]), float(fwhm), height, floor


def fit_lorentzian(
    trace: SpectrumTrace, window: tuple[float, float] | None = None
) -> LorentzianFit:
    """Fit offset + Lorentzian to a trace; returns parameters with 95% intervals.

    The window defaults to +/- 10 initial FWHM around the detected peak (clipped
    to the grid); the chosen interval is recorded in the result. Converges when
    the relative cost change drops below 1e-10, with a 200-evaluation cap.

    Raises NoPeak when the trace maximum is below twice the median floor,
    WindowTooNarrow for windows with fewer than 16 samples, and NotConverged at
    the iteration cap.
    """
    nu_full = trace.grid.frequencies
    psd_full = trace.psd
    if float(np.max(psd_full)) < 2.0 * float(np.median(psd_full)):
        raise NoPeak(
            "trace maximum is below twice the median floor; no resolvable peak"
        )
    center0, fwhm0, height0, floor0 = _initial_guess(nu_full, psd_full)
    if window is None:
        window = (center0 - 10.0 * fwhm0, center0 + 10.0 * fwhm0)
    lo = max(window[0], float(nu_full[0]))
    hi = min(window[1], float(nu_full[-1]))
    mask = (nu_full >= lo) & (nu_full <= hi)
    if int(mask.sum()) < 16:
        raise WindowTooNarrow(
            f"fit window [{lo:g}, {hi:g}] Hz contains {int(mask.sum())} points (< 16)"
        )
    nu = nu_full[mask]
    psd = psd_full[mask]

    # dimensionless internal coordinates: frequency in units of the initial
    # width about the peak, PSD in units of its maximum
    f_scale = fwhm0
    y_scale = float(np.max(psd))
    x = (nu - center0) / f_scale
    y = psd / y_scale
    theta = np.array(
        [0.0, 1.0, 0.5 * math.pi * (height0 / y_scale), floor0 / y_scale]
    )

    averages = trace.metadata.averages
    weighted = averages >= 1
    if weighted:
        sigma = np.maximum(y, 1e-12) / math.sqrt(averages)
    else:
        sigma = np.ones_like(y)

    bounds = (
        np.array([-np.inf, 1e-9, -np.inf, -np.inf]),
        np.array([np.inf, np.inf, np.inf, np.inf]),
    )
    result = None
    n_passes = 3 if weighted else 1
    for _ in range(n_passes):
        result = least_squares(
            lambda th: (_model(th, x) - y) / sigma,
            theta,
            jac=lambda th: _jacobian(th, x) / sigma[:, None],
            bounds=bounds,
            method="trf",
            ftol=1e-10,
            xtol=1e-12,
            gtol=1e-12,
            max_nfev=200,
        )
        if result.status == 0:
            raise NotConverged("iteration cap (200 evaluations) reached")
        theta = result.x
        if weighted:
            sigma = np.maximum(_model(theta, x), 1e-12) / math.sqrt(averages)

    dof = max(x.size - 4, 1)
    chi2_red = 2.0 * result.cost / dof
    jtj = result.jac.T @ result.jac
    try:
        cov_scaled = np.linalg.inv(jtj) * chi2_red
    except np.linalg.LinAlgError:
        cov_scaled = np.linalg.pinv(jtj) * chi2_red

    # back to physical units: theta = (center, fwhm, area, offset)
    unscale = np.array([f_scale, f_scale, y_scale * f_scale, y_scale])
    params = theta * unscale + np.array([center0, 0.0, 0.0, 0.0])
    cov = cov_scaled * np.outer(unscale, unscale)
    sigmas = np.sqrt(np.maximum(np.diag(cov), 0.0))
    residual = psd - _model(theta, x) * y_scale
    return LorentzianFit(
        center=float(params[0]),
        fwhm=float(params[1]),
        area=float(params[2]),
        offset=float(params[3]),
        residual_rms=float(np.sqrt(np.mean(residual**2))),
        ci95_center=float(Z_95 * sigmas[0]),
        ci95_fwhm=float(Z_95 * sigmas[1]),
        ci95_area=float(Z_95 * sigmas[2]),
        ci95_offset=float(Z_95 * sigmas[3]),
        converged=True,
        window=(lo, hi),
        cov=cov,
    )


# ---------------------------------------------------------------------------
# asymmetry estimators


def cooperativity_from_linewidths(gamma_plus_hz: float, gamma_minus_hz: float) -> float:
    """Readout cooperativity from the two fitted linewidths.

    C_r = (gamma_+ - gamma_-) / (gamma_+ + gamma_-). A negative result almost
    always means the detuning labels are swapped; it is returned as-is with a
    warning so the caller can decide.
    """
    if not (gamma_plus_hz > 0 and gamma_minus_hz > 0):
        raise ValueError("linewidths must both be > 0")
    c_r = (gamma_plus_hz - gamma_minus_hz) / (gamma_plus_hz + gamma_minus_hz)
    if not -1.0 < c_r < 1.0:
        raise ValueError(f"cooperativity {c_r} outside (-1, 1)")
    if c_r < 0:
        warnings.warn(
            "negative cooperativity: gamma_+ < gamma_-, detuning labels may be swapped",
            stacklevel=2,
        )
    return c_r


def eta_ideal(i_minus: float, i_plus: float) -> float:
    """Ideal sideband asymmetry eta = I_-/I_+ - 1 (equals 1/<n> when positive)."""
    if not i_plus > 0:
        raise ValueError(f"I_+ must be > 0, got {i_plus}")
    return i_minus / i_plus - 1.0


def eta_prime(i_minus: float, i_plus: float, c_r: float) -> float:
    """Backaction-corrected asymmetry eta' = (I_-/I_+)/(1+C_r) - 1/(1-C_r).

    Equals 1/<n>_c exactly within the rate model, for any |C_r| < 1, and reduces
    to eta_ideal at C_r = 0.
    """
    if not i_plus > 0:
        raise ValueError(f"I_+ must be > 0, got {i_plus}")
    if not -1.0 < c_r < 1.0:
        raise ValueError(f"C_r must be in (-1, 1), got {c_r}")
    return (i_minus / i_plus) / (1.0 + c_r) - 1.0 / (1.0 - c_r)


def occupancy_from_eta(eta: float) -> float:
    """<n> = 1/eta; raises NonPositiveAsymmetry when eta <= 0."""
    if eta <= 0:
        raise NonPositiveAsymmetry(
            f"asymmetry {eta:g} <= 0: occupancy undefined (classical-noise dominated "
            "spectra or swapped detuning labels)"
        )
    return 1.0 / eta


def _fit_block(fit: LorentzianFit) -> np.ndarray:
    """2x2 covariance over (area, fwhm) for one fit, from cov or ci95 fallback."""
    if fit.cov is not None:
        return fit.cov[np.ix_([2, 1], [2, 1])]
    sa = fit.ci95_area / Z_95
    sg = fit.ci95_fwhm / Z_95
    return np.diag([sa**2, sg**2])


def occupancy_from_asymmetry(
    fit_plus: LorentzianFit,
    fit_minus: LorentzianFit,
    power_matching_uncertainty: float = 0.02,
) -> OccupancyEstimate:
    """Infer <n>_c from the two sideband fits, correcting readout backaction.

    fit_plus is the trace taken at detuning +omega_m (area proportional to <n>),
    fit_minus at -omega_m (area proportional to <n>+1). Intervals come from
    first-order propagation of the fit covariances plus a relative
    power-matching uncertainty between the two acquisitions (default 2%),
    applied to the area ratio.
    """
    if not (fit_plus.converged and fit_minus.converged):
        raise FitError("both fits must have converged")
    gamma_p, gamma_m = fit_plus.fwhm, fit_minus.fwhm
    area_p, area_m = fit_plus.area, fit_minus.area
    if area_p <= 0 or area_m <= 0:
        raise NonPositiveAsymmetry("fitted sideband areas must be positive")
    c_r = cooperativity_from_linewidths(gamma_p, gamma_m)
    ratio = area_m / area_p
    eta_p = eta_prime(area_m, area_p, c_r)
    n_c = occupancy_from_eta(eta_p)
    n_plus = n_c / (1.0 + c_r)
    n_minus = n_c / (1.0 - c_r)

    # first-order propagation in (A_+, gamma_+, A_-, gamma_-, xi) where xi is the
    # fractional power mismatch between the two acquisitions (enters via the ratio)
    s = gamma_p + gamma_m
    d_ratio = np.array([-ratio / area_p, 0.0, ratio / area_m, 0.0, ratio])
    d_c = np.array([0.0, 2.0 * gamma_m / s**2, 0.0, -2.0 * gamma_p / s**2, 0.0])
    d_eta = d_ratio / (1.0 + c_r) + d_c * (
        -ratio / (1.0 + c_r) ** 2 - 1.0 / (1.0 - c_r) ** 2
    )
    d_nc = -d_eta / eta_p**2
    d_np = d_nc / (1.0 + c_r) - n_c * d_c / (1.0 + c_r) ** 2
    d_nm = d_nc / (1.0 - c_r) + n_c * d_c / (1.0 - c_r) ** 2

    cov5 = np.zeros((5, 5))
    cov5[:2, :2] = _fit_block(fit_plus)
    cov5[2:4, 2:4] = _fit_block(fit_minus)
    cov5[4, 4] = power_matching_uncertainty**2

    def half_width(grad: np.ndarray) -> float:
        return float(Z_95 * math.sqrt(max(grad @ cov5 @ grad, 0.0)))

    return OccupancyEstimate(
        n_c_est=n_c,
        C_r_est=c_r,
        eta_prime=eta_p,
        n_plus_est=n_plus,
        n_minus_est=n_minus,
        ci95_n_c=half_width(d_nc),
        ci95_C_r=half_width(d_c),
        ci95_eta_prime=half_width(d_eta),
        ci95_n_plus=half_width(d_np),
        ci95_n_minus=half_width(d_nm),
        i_plus=area_p,
        i_minus=area_m,
        gamma_plus_hz=gamma_p,
        gamma_minus_hz=gamma_m,
        fit_plus=fit_plus,
        fit_minus=fit_minus,
        power_matching_uncertainty=power_matching_uncertainty,
    )


def calibrated_occupancy(
    fit: LorentzianFit,
    readout_mode: OpticalModeParams,
    readout_drive: DriveState,
    chain: DetectionChain,
    which: str,
) -> float:
    """Absolute occupancy from one sideband via the calibrated transduction chain.

    Inverts area(V^2 Hz) -> photon-rate units through (hbar omega_l G_EDFA G_e)^2
    and QE, then divides out the sideband weight (kappa_e/kappa) A. The 'minus'
    branch measures <n>+1 and subtracts the zero-point quantum.

    Raises GainUnderdetermined when the chain gains are unset.
    """
    if which not in ("plus", "minus"):
        raise ValueError(f"which must be 'plus' or 'minus', got {which!r}")
    if not fit.converged:
        raise FitError("fit must have converged")
    expected_sign = 1.0 if which == "plus" else -1.0
    if math.copysign(1.0, readout_drive.detuning) != expected_sign:
        raise ValueError(
            f"branch {which!r} expects detuning sign {expected_sign:+.0f}"
        )
    omega_m = abs(readout_drive.detuning)
    laser_hz = (readout_mode.omega - readout_drive.detuning) / TWO_PI
    area_photons = fit.area / chain.conversion(laser_hz)
    prefactor = readout_mode.g0**2 * readout_mode.kappa * readout_drive.n_photons
    half_kappa_sq = (0.5 * readout_mode.kappa) ** 2
    resonant = prefactor / half_kappa_sq  # the (Delta -/+ omega_m) = 0 rate
    ratio = readout_mode.kappa_e / readout_mode.kappa
    occupancy = area_photons / (ratio * resonant)
    if which == "minus":
        occupancy -= 1.0
    return occupancy


# ---------------------------------------------------------------------------
# record serialization


def write_records_json(records: dict, path: str) -> None:
    """Atomic, deterministic JSON dump (sorted keys, fixed separators)."""
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        json.dump(records, handle, indent=2, sort_keys=True)
        handle.write("\n")
    os.replace(tmp, path)


def read_records_json(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as handle:
        return json.load(handle)
