"""Analytic sideband spectra, the detection chain, and noisy trace synthesis.

Spectral model
--------------
A laser-cooled mechanical mode at occupancy <n> has the two-sided displacement PSD

    S_xx(omega) / x_zpf^2 = gamma <n>     / ((omega_m + omega)^2 + (gamma/2)^2)
                          + gamma (<n>+1) / ((omega_m - omega)^2 + (gamma/2)^2)

whose emission (<n>+1) and absorption (<n>) sidebands differ by the zero-point
term. The transmitted readout-beam power spectrum about the laser frequency is

    S(omega) = |E_out|^2 delta(omega)
             + (kappa_e/kappa) A_- gamma <n>     / ((omega_m - omega)^2 + (gamma/2)^2)
             + (kappa_e/kappa) A_+ gamma (<n>+1) / ((omega_m + omega)^2 + (gamma/2)^2)

with A_+/- the motional scattering rates of the readout drive. Traces sample the
Lorentzian part on a frequency grid; the delta-function carrier weight is kept as
an out-of-band scalar (a delta has no faithful grid representation, and keeping it
out of the array keeps fits well-posed).

Normalization: grids are in ordinary frequency (Hz) while rates stay angular, and
each Lorentzian factor integrates to exactly 1 over nu, so an integrated sideband
area equals its weight, e.g. I_+ = (kappa_e/kappa) A_- <n>. Absolute scale
conventions cancel in every asymmetry estimator.

Noise model: an n-average spectrum-analyzer trace of Gaussian noise has
Gamma(shape=n, mean=true PSD) statistics at each point; that exact distribution
(not additive Gaussian) is what ``simulate_trace`` draws, so small-n fit-bias
studies are honest.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.constants import hbar
from scipy.integrate import trapezoid
from scipy.signal import lfilter, welch

from .physics import (
    TWO_PI,
    BackactionState,
    DriveState,
    MechanicalModeParams,
    ModeRole,
    OpticalModeParams,
    scattering_rates,
)

UNITS_DISPLACEMENT = "m^2/Hz"
UNITS_PHOTON_FLUX = "photons/s/Hz"
UNITS_VOLTAGE = "V^2/Hz"
UNITS_ARB = "arb^2/Hz"


class GridResolutionError(ValueError):
    """The frequency grid is too coarse to resolve the mechanical linewidth."""


class TraceParseError(ValueError):
    """A trace CSV failed to parse; carries the offending line number."""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


@dataclass(frozen=True)
class FrequencyGrid:
    """Uniform frequency grid in Hz. Signed values are allowed (two-sided spectra)."""

    start: float
    stop: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 8:
            raise ValueError(f"grid needs n_points >= 8, got {self.n_points}")
        if not self.stop > self.start:
            raise ValueError(f"grid needs stop > start, got [{self.start}, {self.stop}]")

    @cached_property
    def frequencies(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.stop - self.start) / (self.n_points - 1)


@dataclass(frozen=True)
class TraceMetadata:
    """Acquisition metadata carried by a trace.

    averages == 0 marks an analytic (noiseless) trace; seed is only meaningful
    when averages >= 1. laser_hz is the readout laser's absolute frequency,
    needed to convert photon flux to optical power in the detection chain.
    """

    units: str
    detuning_hz: float = 0.0
    averages: int = 0
    seed: int = 0
    laser_hz: float | None = None


@dataclass(frozen=True)
class SpectrumTrace:
    """A sampled one- or two-sided PSD plus the out-of-band carrier weight."""

    grid: FrequencyGrid
    psd: np.ndarray
    carrier_power: float = 0.0
    metadata: TraceMetadata = field(default_factory=lambda: TraceMetadata(units=UNITS_ARB))

    def __post_init__(self):
        psd = np.asarray(self.psd, dtype=float)
        object.__setattr__(self, "psd", psd)
        if psd.shape != (self.grid.n_points,):
            raise ValueError(
                f"psd length {psd.shape} does not match grid n_points {self.grid.n_points}"
            )
        if not np.all(np.isfinite(psd)):
            raise ValueError("psd contains non-finite values")
        if np.any(psd < 0):
            raise ValueError("psd contains negative values")

    def integrated(self) -> float:
        """Trapezoidal integral of the PSD over the grid (trace units x Hz)."""
        return float(trapezoid(self.psd, self.grid.frequencies))


@dataclass(frozen=True)
class DetectionChain:
    """Optical amplification and photodetection after the cavity.

    G_EDFA: optical power gain of the fiber amplifier (dimensionless)
    G_e: detector conversion from optical power to voltage (V/W)
    quantum_efficiency: fraction of optical signal power surviving detection
    noise_floor: white voltage PSD added after all gain (V^2/Hz)
    reference_hz: fixed calibration frequency for the photon-energy factor;
        when set, both probe detunings share one conversion constant (the
        chain is calibrated once at the carrier, and the +/- omega_m laser
        shifts move the photon energy by only ~2e-5)

    Gains left as None mark an uncalibrated chain; operations that need absolute
    calibration raise GainUnderdetermined.
    """

    G_EDFA: float | None = None
    G_e: float | None = None
    quantum_efficiency: float = 1.0
    noise_floor: float = 0.0
    reference_hz: float | None = None

    def __post_init__(self):
        for name in ("G_EDFA", "G_e"):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ValueError(f"{name} must be > 0, got {value}")
        if not 0 <= self.quantum_efficiency <= 1:
            raise ValueError(
                f"quantum_efficiency must be in [0, 1], got {self.quantum_efficiency}"
            )
        if self.noise_floor < 0:
            raise ValueError(f"noise_floor must be >= 0, got {self.noise_floor}")

    def conversion(self, laser_hz: float) -> float:
        """(hbar omega G_EDFA G_e)^2 x QE: photon-flux PSD -> voltage PSD factor."""
        if self.G_EDFA is None or self.G_e is None:
            raise GainUnderdetermined(
                "detection chain gains are unset; set G_EDFA and G_e for calibrated work"
            )
        frequency = laser_hz if self.reference_hz is None else self.reference_hz
        return (hbar * TWO_PI * frequency * self.G_EDFA * self.G_e) ** 2 * self.quantum_efficiency


class GainUnderdetermined(ValueError):
    """A calibrated operation was requested with detection-chain gains unset."""


# ---------------------------------------------------------------------------
# analytic spectra


def autocorrelation(
    mech: MechanicalModeParams, n_occ: float, t, gamma: float | None = None
):
    """Position autocorrelation <x(t) x(0)> of the damped quantum oscillator.

    G_xx(t) = x_zpf^2 [ n e^{+i omega_m t} + (n+1) e^{-i omega_m t} ] e^{-(gamma/2)|t|}

    The decay constant is gamma/2 so that the Fourier transform reproduces
    Lorentzians of full width gamma, matching the PSD convention used everywhere
    else in this package. Complex-valued: the n vs n+1 weighting has no real
    classical signal equivalent. gamma defaults to the intrinsic damping.
    """
    if n_occ < 0:
        raise ValueError(f"n_occ must be >= 0, got {n_occ}")
    g = mech.gamma_i if gamma is None else gamma
    t = np.asarray(t, dtype=float)
    envelope = np.exp(-0.5 * g * np.abs(t))
    phase = mech.omega_m * t
    result = mech.x_zpf**2 * envelope * (
        n_occ * np.exp(1j * phase) + (n_occ + 1.0) * np.exp(-1j * phase)
    )
    return complex(result) if result.ndim == 0 else result


def displacement_psd_values(
    mech: MechanicalModeParams, n_occ: float, gamma: float, nu_hz
) -> np.ndarray:
    """S_xx evaluated at signed frequencies nu (Hz), in m^2/Hz.

    Each Lorentzian factor gamma/((omega_m -/+ omega)^2 + (gamma/2)^2) integrates
    to 1 over nu, so the full two-sided integral is x_zpf^2 (2 n + 1).
    """
    if n_occ < 0:
        raise ValueError(f"n_occ must be >= 0, got {n_occ}")
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    omega = TWO_PI * np.asarray(nu_hz, dtype=float)
    half_gamma_sq = (0.5 * gamma) ** 2
    absorption = gamma * n_occ / ((mech.omega_m + omega) ** 2 + half_gamma_sq)
    emission = gamma * (n_occ + 1.0) / ((mech.omega_m - omega) ** 2 + half_gamma_sq)
    return mech.x_zpf**2 * (absorption + emission)


def displacement_psd(
    mech: MechanicalModeParams, n_occ: float, gamma: float, grid: FrequencyGrid
) -> SpectrumTrace:
    """Two-sided displacement PSD trace on a signed grid (m^2/Hz)."""
    values = displacement_psd_values(mech, n_occ, gamma, grid.frequencies)
    return SpectrumTrace(
        grid=grid, psd=values, carrier_power=0.0, metadata=TraceMetadata(units=UNITS_DISPLACEMENT)
    )


def default_sxx_grid(
    mech: MechanicalModeParams,
    gamma: float,
    halfwidth_linewidths: float = 60.0,
    points_per_linewidth: float = 16.0,
) -> FrequencyGrid:
    """Signed grid spanning both mechanical sidebands out to many linewidths.

    60 linewidths of margin keeps the neglected Lorentzian tails below 0.3% of
    the total variance, comfortably inside the 0.5% normalization budget.
    """
    f_m = mech.omega_m / TWO_PI
    gamma_hz = gamma / TWO_PI
    halfspan = f_m + halfwidth_linewidths * gamma_hz
    spacing = gamma_hz / points_per_linewidth
    n_points = int(math.ceil(2.0 * halfspan / spacing)) + 1
    return FrequencyGrid(-halfspan, halfspan, n_points)


def sideband_weights(
    readout_mode: OpticalModeParams,
    mech: MechanicalModeParams,
    back: BackactionState,
    readout_drive: DriveState,
) -> tuple[float, float, float, float]:
    """(weight at +omega_m, weight at -omega_m, gamma, n_eff) for the drive's branch."""
    if readout_mode.role is not ModeRole.READOUT:
        raise ValueError("optical_psd expects the readout mode")
    a_plus, a_minus = scattering_rates(readout_mode, mech, readout_drive)
    ratio = readout_mode.kappa_e / readout_mode.kappa
    if readout_drive.detuning > 0:
        gamma, n_eff = back.gamma_plus, back.n_plus
    else:
        gamma, n_eff = back.gamma_minus, back.n_minus
    weight_upper = ratio * a_minus * n_eff
    weight_lower = ratio * a_plus * (n_eff + 1.0)
    return weight_upper, weight_lower, gamma, n_eff


def _carrier_flux(readout_mode: OpticalModeParams, readout_drive: DriveState) -> float:
    """Transmitted carrier photon flux past the cavity (standard input-output)."""
    if readout_drive.n_photons == 0:
        return 0.0
    kappa, kappa_e = readout_mode.kappa, readout_mode.kappa_e
    delta = readout_drive.detuning
    flux_in = readout_drive.n_photons * (delta**2 + (0.5 * kappa) ** 2) / kappa_e
    transmission = abs(1.0 - (0.5 * kappa_e) / complex(0.5 * kappa, delta)) ** 2
    return flux_in * transmission


def optical_psd_values(
    readout_mode: OpticalModeParams,
    mech: MechanicalModeParams,
    back: BackactionState,
    readout_drive: DriveState,
    nu_hz,
) -> np.ndarray:
    """Readout-beam photon-flux PSD at signed offsets nu from the laser (photons/s/Hz)."""
    weight_upper, weight_lower, gamma, _ = sideband_weights(
        readout_mode, mech, back, readout_drive
    )
    omega = TWO_PI * np.asarray(nu_hz, dtype=float)
    half_gamma_sq = (0.5 * gamma) ** 2
    upper = gamma / ((mech.omega_m - omega) ** 2 + half_gamma_sq)
    lower = gamma / ((mech.omega_m + omega) ** 2 + half_gamma_sq)
    return weight_upper * upper + weight_lower * lower


def optical_psd(
    readout_mode: OpticalModeParams,
    mech: MechanicalModeParams,
    back: BackactionState,
    readout_drive: DriveState,
    grid: FrequencyGrid,
) -> SpectrumTrace:
    """Transmitted readout spectrum about the laser, sampled on a signed grid.

    The anti-Stokes sideband (weight (kappa_e/kappa) A_- <n>) sits at +omega_m,
    the Stokes sideband (weight (kappa_e/kappa) A_+ (<n>+1)) at -omega_m; the
    damping and occupancy are the backaction-shifted values for the drive's
    detuning branch. The carrier lives in ``carrier_power``, not in the array.
    """
    if not math.isclose(abs(readout_drive.detuning), mech.omega_m, rel_tol=1e-9):
        raise ValueError("readout drive must sit at Delta = +/- omega_m")
    _, _, gamma, _ = sideband_weights(readout_mode, mech, back, readout_drive)
    if grid.spacing > gamma / TWO_PI / 8.0:
        raise GridResolutionError(
            f"grid spacing {grid.spacing:.3g} Hz gives fewer than 8 points per "
            f"linewidth ({gamma / TWO_PI:.3g} Hz); refine the grid"
        )
    values = optical_psd_values(readout_mode, mech, back, readout_drive, grid.frequencies)
    laser_hz = (readout_mode.omega - readout_drive.detuning) / TWO_PI
    return SpectrumTrace(
        grid=grid,
        psd=values,
        carrier_power=_carrier_flux(readout_mode, readout_drive),
        metadata=TraceMetadata(
            units=UNITS_PHOTON_FLUX,
            detuning_hz=readout_drive.detuning / TWO_PI,
            laser_hz=laser_hz,
        ),
    )


def readout_sideband_trace(
    readout_mode: OpticalModeParams,
    mech: MechanicalModeParams,
    back: BackactionState,
    readout_drive: DriveState,
    display_grid: FrequencyGrid,
) -> SpectrumTrace:
    """The sideband as a spectrum analyzer displays it: positive frequencies near omega_m.

    An RSA shows |nu|; for the Delta = -omega_m branch the dominant Stokes sideband
    sits at negative offset, so the model is evaluated at the negated display
    frequencies and shown against positive frequency. Metadata keeps the signed
    detuning.
    """
    if not math.isclose(abs(readout_drive.detuning), mech.omega_m, rel_tol=1e-9):
        raise ValueError("readout drive must sit at Delta = +/- omega_m")
    _, _, gamma, _ = sideband_weights(readout_mode, mech, back, readout_drive)
    if display_grid.spacing > gamma / TWO_PI / 8.0:
        raise GridResolutionError(
            f"grid spacing {display_grid.spacing:.3g} Hz gives fewer than 8 points "
            f"per linewidth ({gamma / TWO_PI:.3g} Hz); refine the grid"
        )
    sign = 1.0 if readout_drive.detuning > 0 else -1.0
    values = optical_psd_values(
        readout_mode, mech, back, readout_drive, sign * display_grid.frequencies
    )
    laser_hz = (readout_mode.omega - readout_drive.detuning) / TWO_PI
    return SpectrumTrace(
        grid=display_grid,
        psd=values,
        carrier_power=_carrier_flux(readout_mode, readout_drive),
        metadata=TraceMetadata(
            units=UNITS_PHOTON_FLUX,
            detuning_hz=readout_drive.detuning / TWO_PI,
            laser_hz=laser_hz,
        ),
    )


# ---------------------------------------------------------------------------
# detection and noise


def detected_psd(optical: SpectrumTrace, chain: DetectionChain) -> SpectrumTrace:
    """Propagate a photon-flux trace through amplifier + detector into V^2/Hz."""
    if optical.metadata.units not in (UNITS_PHOTON_FLUX, "W/Hz"):
        raise ValueError(
            f"detected_psd expects an optical trace, got units {optical.metadata.units!r}"
        )
    if optical.metadata.laser_hz is None:
        raise GainUnderdetermined("optical trace lacks laser_hz metadata")
    factor = chain.conversion(optical.metadata.laser_hz)
    return replace(
        optical,
        psd=factor * optical.psd + chain.noise_floor,
        metadata=replace(optical.metadata, units=UNITS_VOLTAGE),
    )


def simulate_trace(detected: SpectrumTrace, n_averages: int, seed: int) -> SpectrumTrace:
    """Draw one n-average spectrum-analyzer acquisition of the given true PSD.

    Each point is independent Gamma(shape=n_averages, scale=true/n_averages): the
    exact distribution of an n-average periodogram of Gaussian noise. Mean is the
    true PSD, relative standard deviation 1/sqrt(n_averages). Deterministic for a
    given seed.
    """
    if n_averages < 1:
        raise ValueError(f"n_averages must be >= 1, got {n_averages}")
    rng = np.random.default_rng(seed)
    noisy = rng.gamma(shape=float(n_averages), scale=detected.psd / n_averages)
    return replace(
        detected,
        psd=noisy,
        metadata=replace(detected.metadata, averages=n_averages, seed=seed),
    )


def ou_envelope(
    omega_0: float, gamma: float, variance: float, dt: float, n_samples: int, seed: int
) -> np.ndarray:
    """Stationary complex Ornstein-Uhlenbeck envelope: rotation omega_0, decay gamma/2.

    Exact AR(1) discretization; stationary variance <|z|^2> = variance. Its PSD is
    the Lorentzian variance * gamma / ((omega - omega_0)^2 + (gamma/2)^2), i.e. one
    sideband of the optical spectrum, which makes it the independent time-domain
    route for validating the Gamma trace statistics.
    """
    if not (gamma > 0 and dt > 0 and variance >= 0 and n_samples > 0):
        raise ValueError("ou_envelope needs gamma > 0, dt > 0, variance >= 0, n_samples > 0")
    rng = np.random.default_rng(seed)
    pole = np.exp((1j * omega_0 - 0.5 * gamma) * dt)
    innovation_var = variance * (1.0 - abs(pole) ** 2)
    noise = np.sqrt(innovation_var / 2.0) * (
        rng.standard_normal(n_samples) + 1j * rng.standard_normal(n_samples)
    )
    z0 = np.sqrt(variance / 2.0) * complex(rng.standard_normal(), rng.standard_normal())
    out, _ = lfilter([1.0], [1.0, -pole], noise, zi=np.array([pole * z0]))
    return out


def periodogram(envelope: np.ndarray, dt: float, nperseg: int | None = None) -> SpectrumTrace:
    """Welch-averaged two-sided PSD of a complex envelope time series.

    Boxcar window, no overlap: no shape bias for Lorentzian lines, and segment
    count length/nperseg sets the Gamma averaging statistics. Total length must be
    a power of two (and nperseg must divide it).
    """
    envelope = np.asarray(envelope)
    n = envelope.shape[0]
    if n < 8 or (n & (n - 1)) != 0:
        raise ValueError(f"envelope length must be a power of two >= 8, got {n}")
    if dt <= 0:
        raise ValueError(f"dt must be > 0, got {dt}")
    if nperseg is None:
        nperseg = min(n, 4096)
    if n % nperseg != 0:
        raise ValueError(f"nperseg {nperseg} must divide the envelope length {n}")
    freqs, psd = welch(
        envelope,
        fs=1.0 / dt,
        window="boxcar",
        nperseg=nperseg,
        noverlap=0,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    order = np.argsort(freqs)
    freqs, psd = freqs[order], psd[order]
    grid = FrequencyGrid(float(freqs[0]), float(freqs[-1]), len(freqs))
    return SpectrumTrace(
        grid=grid,
        psd=psd,
        metadata=TraceMetadata(units=UNITS_ARB, averages=n // nperseg),
    )


# ---------------------------------------------------------------------------
# trace CSV interface


def write_trace_csv(trace: SpectrumTrace, path: str) -> None:
    """Write a trace to CSV: one '#' metadata line, a column header, then rows.

    Writes are atomic (temp file + rename) and byte-deterministic: floats use
    shortest round-trip repr and no timestamps are recorded.
    """
    meta = trace.metadata
    header = (
        f"# units={meta.units} detuning_hz={meta.detuning_hz!r} "
        f"averages={meta.averages} seed={meta.seed} carrier={trace.carrier_power!r}"
    )
    if meta.laser_hz is not None:
        header += f" laser_hz={meta.laser_hz!r}"
    lines = [header, "frequency_hz,psd"]
    lines.extend(
        f"{float(nu)!r},{float(value)!r}"
        for nu, value in zip(trace.grid.frequencies, trace.psd)
    )
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as handle:
        handle.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def read_trace_csv(path: str) -> SpectrumTrace:
    """Parse a trace CSV written by write_trace_csv. Raises TraceParseError."""
    with open(path, "r", encoding="utf-8") as handle:
        raw_lines = handle.read().splitlines()
    if not raw_lines or not raw_lines[0].startswith("#"):
        raise TraceParseError("expected '# key=value ...' metadata line", 1)
    meta_tokens = raw_lines[0].lstrip("#").split()
    meta: dict[str, str] = {}
    for token in meta_tokens:
        if "=" not in token:
            raise TraceParseError(f"malformed metadata token {token!r}", 1)
        key, _, value = token.partition("=")
        meta[key] = value
    try:
        units = meta["units"]
        detuning_hz = float(meta["detuning_hz"])
        averages = int(meta["averages"])
        seed = int(meta["seed"])
        carrier = float(meta["carrier"])
        laser_hz = float(meta["laser_hz"]) if "laser_hz" in meta else None
    except (KeyError, ValueError) as exc:
        raise TraceParseError(f"bad metadata: {exc}", 1) from exc

    frequencies: list[float] = []
    values: list[float] = []
    for offset, line in enumerate(raw_lines[1:], start=2):
        stripped = line.strip()
        if not stripped or stripped == "frequency_hz,psd":
            continue
        parts = stripped.split(",")
        if len(parts) != 2:
            raise TraceParseError(f"expected 'frequency_hz,psd', got {stripped!r}", offset)
        try:
            frequencies.append(float(parts[0]))
            values.append(float(parts[1]))
        except ValueError as exc:
            raise TraceParseError(f"non-numeric row {stripped!r}", offset) from exc
    if len(frequencies) < 8:
        raise TraceParseError("fewer than 8 data rows", len(raw_lines))
    nu = np.asarray(frequencies)
    if np.any(np.diff(nu) <= 0):
        raise TraceParseError("frequencies must be strictly ascending", len(raw_lines))
    grid = FrequencyGrid(float(nu[0]), float(nu[-1]), len(nu))
    return SpectrumTrace(
        grid=grid,
        psd=np.asarray(values),
        carrier_power=carrier,
        metadata=TraceMetadata(
            units=units,
            detuning_hz=detuning_hz,
            averages=averages,
            seed=seed,
            laser_hz=laser_hz,
        ),
    )
