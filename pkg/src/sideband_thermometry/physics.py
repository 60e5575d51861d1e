"""Closed-form rate and occupancy model for a two-optical-mode, one-mechanical-mode
optomechanical cavity.

The device has two co-localized optical resonances (a strong "cooling" pump mode and
a weak "readout" probe mode) coupled by radiation pressure to a single mechanical
breathing mode. Everything here is an analytic steady-state consequence of the
linearized interaction:

* motional scattering rates of a drive detuned by Delta from its cavity mode,

      A(+/-) = g0^2 kappa n / ((Delta +/- omega_m)^2 + (kappa/2)^2)

* backaction cooling by a drive parked at Delta = +omega_m,

      gamma_c = 4 g0^2 n / kappa,      <n>_c = gamma_i n_b / (gamma_i + gamma_c)

* readout backaction at Delta = +/- omega_m,

      C_r       = |A_+ - A_-| / (gamma_i + gamma_c)
      gamma_+/- = (gamma_i + gamma_c) (1 +/- C_r)
      <n>_+/-   = <n>_c / (1 +/- C_r)

Unit convention: every rate and frequency in this package's internal API is angular
(rad/s). Configuration files and CSV outputs use ordinary frequency (Hz) with
explicit ``_hz`` suffixes; convert at the boundary, never silently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from scipy.constants import hbar, k as k_B

TWO_PI = 2.0 * math.pi


class ModeRole(Enum):
    """Which job an optical resonance performs in the two-mode protocol."""

    COOLING = "cooling"
    READOUT = "readout"


class BackactionError(ValueError):
    """Readout backaction strong enough (C_r >= 1) to invalidate the occupancy model.

    At C_r >= 1 the anti-damped branch gamma_- = (gamma_i + gamma_c)(1 - C_r) is
    non-positive and <n>_- diverges, so every downstream estimator is meaningless.
    """


@dataclass(frozen=True)
class OpticalModeParams:
    """One optical cavity resonance.

    omega: resonance angular frequency (rad/s)
    kappa: total energy decay rate (rad/s)
    kappa_e: extrinsic (waveguide-coupled) part of kappa (rad/s)
    g0: vacuum optomechanical coupling rate (rad/s)
    role: cooling pump or readout probe
    """

    omega: float
    kappa: float
    kappa_e: float
    g0: float
    role: ModeRole

    def __post_init__(self):
        if not self.omega > 0:
            raise ValueError(f"optical mode omega must be > 0, got {self.omega}")
        if not self.kappa > 0:
            raise ValueError(f"optical mode kappa must be > 0, got {self.kappa}")
        if not 0 <= self.kappa_e <= self.kappa:
            raise ValueError(
                f"kappa_e must satisfy 0 <= kappa_e <= kappa, got kappa_e={self.kappa_e} "
                f"with kappa={self.kappa}"
            )
        if self.g0 < 0:
            raise ValueError(f"g0 must be >= 0, got {self.g0}")


@dataclass(frozen=True)
class MechanicalModeParams:
    """The mechanical breathing mode and its thermal environment.

    omega_m: mechanical angular frequency (rad/s)
    gamma_i: intrinsic (bath-coupled) damping rate (rad/s)
    n_b: bath phonon occupancy
    x_zpf: zero-point fluctuation amplitude (m)
    """

    omega_m: float
    gamma_i: float
    n_b: float
    x_zpf: float

    def __post_init__(self):
        if not self.omega_m > 0:
            raise ValueError(f"omega_m must be > 0, got {self.omega_m}")
        if not self.gamma_i > 0:
            raise ValueError(f"gamma_i must be > 0, got {self.gamma_i}")
        if self.n_b < 0:
            raise ValueError(f"n_b must be >= 0, got {self.n_b}")
        if not self.x_zpf > 0:
            raise ValueError(f"x_zpf must be > 0, got {self.x_zpf}")

    @property
    def quality_factor(self) -> float:
        return self.omega_m / self.gamma_i


@dataclass(frozen=True)
class DriveState:
    """One laser beam addressing one cavity mode.

    target: which mode the laser addresses
    detuning: Delta = omega_cavity - omega_laser (rad/s); positive means red-detuned
    n_photons: mean intracavity photon number sustained by the drive
    """

    target: ModeRole
    detuning: float
    n_photons: float

    def __post_init__(self):
        if not math.isfinite(self.detuning):
            raise ValueError("drive detuning must be finite")
        if self.n_photons < 0:
            raise ValueError(f"n_photons must be >= 0, got {self.n_photons}")


@dataclass(frozen=True)
class BackactionState:
    """Mechanical damping and occupancy once both beams act on the oscillator.

    gamma_c: cooling-beam damping (rad/s)
    n_cooled: occupancy with the cooling beam only
    C_r: readout cooperativity |A_+ - A_-| / (gamma_i + gamma_c)
    gamma_plus / gamma_minus: total damping for readout detuning Delta = +/- omega_m (rad/s)
    n_plus / n_minus: occupancy for readout detuning Delta = +/- omega_m
    """

    gamma_c: float
    n_cooled: float
    C_r: float
    gamma_plus: float
    gamma_minus: float
    n_plus: float
    n_minus: float


def bose_occupancy(omega_m: float, temperature: float) -> float:
    """Bose-Einstein occupancy 1/(exp(hbar*omega/kT) - 1), with n(T=0) = 0.

    omega_m in rad/s, temperature in kelvin. Uses expm1 so the high-temperature
    (hbar*omega << kT) regime does not lose precision.
    """
    if omega_m <= 0:
        raise ValueError(f"omega_m must be > 0, got {omega_m}")
    if temperature < 0:
        raise ValueError(f"temperature must be >= 0 K, got {temperature}")
    if temperature == 0.0:
        return 0.0
    x = hbar * omega_m / (k_B * temperature)
    return 1.0 / math.expm1(x)


def bath_temperature(omega_m: float, n_occ: float) -> float:
    """Invert bose_occupancy: the temperature at which the bath holds n_occ quanta."""
    if omega_m <= 0:
        raise ValueError(f"omega_m must be > 0, got {omega_m}")
    if n_occ <= 0:
        return 0.0
    return hbar * omega_m / (k_B * math.log1p(1.0 / n_occ))


def scattering_rates(
    mode: OpticalModeParams, mech: MechanicalModeParams, drive: DriveState
) -> tuple[float, float]:
    """Motional scattering rates (A_plus, A_minus) of a drive on one cavity mode.

    A(+/-) = g0^2 kappa n / ((Delta +/- omega_m)^2 + (kappa/2)^2). The subscript
    names the sign in the denominator: A_minus is resonant (largest) for a drive
    red-detuned to Delta = +omega_m, A_plus for Delta = -omega_m. Mirror symmetry
    A_plus(Delta) == A_minus(-Delta) holds for all detunings.
    """
    if drive.target is not mode.role:
        raise ValueError(
            f"drive targets {drive.target.value!r} but mode is {mode.role.value!r}"
        )
    prefactor = mode.g0**2 * mode.kappa * drive.n_photons
    half_kappa_sq = (0.5 * mode.kappa) ** 2
    a_plus = prefactor / ((drive.detuning + mech.omega_m) ** 2 + half_kappa_sq)
    a_minus = prefactor / ((drive.detuning - mech.omega_m) ** 2 + half_kappa_sq)
    return a_plus, a_minus


def cooling_rate(mode: OpticalModeParams, drive: DriveState) -> float:
    """Backaction damping gamma_c = 4 g0^2 n / kappa of the cooling beam.

    Valid for a beam parked at Delta = +omega_m deep in the resolved-sideband
    regime (kappa << omega_m); there it equals A_minus - A_plus up to a relative
    correction of order (kappa / 4 omega_m)^2.
    """
    if mode.role is not ModeRole.COOLING:
        raise ValueError("cooling_rate expects the cooling mode")
    if drive.target is not ModeRole.COOLING:
        raise ValueError("cooling_rate expects a drive on the cooling mode")
    return 4.0 * mode.g0**2 * drive.n_photons / mode.kappa


def cooled_occupancy(mech: MechanicalModeParams, gamma_c: float) -> float:
    """Steady-state occupancy <n>_c = gamma_i n_b / (gamma_i + gamma_c)."""
    if gamma_c < 0:
        raise ValueError(f"gamma_c must be >= 0, got {gamma_c}")
    return mech.gamma_i * mech.n_b / (mech.gamma_i + gamma_c)


def readout_backaction(
    mech: MechanicalModeParams,
    gamma_c: float,
    readout_mode: OpticalModeParams,
    readout_drive: DriveState,
) -> BackactionState:
    """Damping and occupancy shifts induced by the readout beam at Delta = +/- omega_m.

    The readout drive must sit at one of the two protocol detunings. C_r, and hence
    the +/- branches, depend only on |Delta| = omega_m, so a single state describes
    both probe placements. The phonon-flux identity
    gamma_plus * n_plus == gamma_minus * n_minus holds exactly in this model.

    Raises BackactionError when C_r >= 1 (readout backaction dominates and the
    anti-damped branch is unstable).
    """
    if not math.isclose(abs(readout_drive.detuning), mech.omega_m, rel_tol=1e-9):
        raise ValueError(
            "readout drive must sit at Delta = +/- omega_m; got "
            f"{readout_drive.detuning} with omega_m = {mech.omega_m}"
        )
    a_plus, a_minus = scattering_rates(readout_mode, mech, readout_drive)
    gamma_total = mech.gamma_i + gamma_c
    c_r = abs(a_plus - a_minus) / gamma_total
    if c_r >= 1.0:
        raise BackactionError(
            f"readout cooperativity C_r = {c_r:.4f} >= 1: the anti-damped branch "
            "diverges; reduce the readout photon number"
        )
    n_cooled = cooled_occupancy(mech, gamma_c)
    return BackactionState(
        gamma_c=gamma_c,
        n_cooled=n_cooled,
        C_r=c_r,
        gamma_plus=gamma_total * (1.0 + c_r),
        gamma_minus=gamma_total * (1.0 - c_r),
        n_plus=n_cooled / (1.0 + c_r),
        n_minus=n_cooled / (1.0 - c_r),
    )


def photons_from_input_power(
    mode: OpticalModeParams, detuning: float, power_in: float, omega_laser: float | None = None
) -> float:
    """Intracavity photon number from launched power via the input-output relation.

    n = P_in * kappa_e / (hbar omega_l ((Delta)^2 + (kappa/2)^2))

    Convenience only: the rest of the package takes photon numbers directly.
    """
    if power_in < 0:
        raise ValueError(f"power_in must be >= 0, got {power_in}")
    omega_l = mode.omega - detuning if omega_laser is None else omega_laser
    return power_in * mode.kappa_e / (hbar * omega_l * (detuning**2 + (0.5 * mode.kappa) ** 2))
