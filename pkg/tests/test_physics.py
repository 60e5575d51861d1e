"""Rate and occupancy formulas, checked against independent arithmetic oracles."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.constants import hbar, k as k_B

from sideband_thermometry.physics import (
    BackactionError,
    DriveState,
    MechanicalModeParams,
    ModeRole,
    OpticalModeParams,
    bath_temperature,
    bose_occupancy,
    cooled_occupancy,
    cooling_rate,
    photons_from_input_power,
    readout_backaction,
    scattering_rates,
)

TWO_PI = 2.0 * math.pi

# device of record
OMEGA_M = TWO_PI * 3.99e9
GAMMA_I = TWO_PI * 43e3
N_B = 94.0

COOLING = OpticalModeParams(
    omega=TWO_PI * 205.3e12,
    kappa=TWO_PI * 390e6,
    kappa_e=TWO_PI * 46e6,
    g0=TWO_PI * 960e3,
    role=ModeRole.COOLING,
)
READOUT = OpticalModeParams(
    omega=TWO_PI * 194.1e12,
    kappa=TWO_PI * 1.0e9,
    kappa_e=TWO_PI * 300e6,
    g0=TWO_PI * 430e3,
    role=ModeRole.READOUT,
)
MECH = MechanicalModeParams(omega_m=OMEGA_M, gamma_i=GAMMA_I, n_b=N_B, x_zpf=2.7e-15)


def test_bose_occupancy_at_operating_bath():
    # 3.99 GHz mode in an 18 K bath holds 94 thermal quanta (to the half-quantum)
    assert bose_occupancy(OMEGA_M, 18.0) == pytest.approx(94.0, abs=0.5)


def test_bose_occupancy_zero_temperature():
    assert bose_occupancy(OMEGA_M, 0.0) == 0.0


def test_bose_occupancy_high_temperature_expansion():
    # oracle: Rayleigh-Jeans expansion n ~ kT/(hbar w) - 1/2, good to O(hbar w/kT)
    expansion = k_B * 300.0 / (hbar * OMEGA_M) - 0.5
    value = bose_occupancy(OMEGA_M, 300.0)
    assert value == pytest.approx(expansion, rel=1e-4)
    assert value == pytest.approx(k_B * 300.0 / (hbar * OMEGA_M), rel=1e-3)
    assert value == pytest.approx(1566.0, abs=1.0)


def test_bose_occupancy_inverse():
    assert bath_temperature(OMEGA_M, 94.0) == pytest.approx(18.0, abs=0.2)


@given(st.floats(min_value=0.01, max_value=1e4))
def test_bose_round_trip(n_occ):
    assert bose_occupancy(OMEGA_M, bath_temperature(OMEGA_M, n_occ)) == pytest.approx(
        n_occ, rel=1e-12
    )


def test_scattering_rates_resonant_collapse():
    # at Delta = +omega_m the A_minus denominator is (kappa/2)^2, so A_minus = 4 g^2 n / kappa
    drive = DriveState(ModeRole.READOUT, OMEGA_M, 10.0)
    _, a_minus = scattering_rates(READOUT, MECH, drive)
    assert a_minus == pytest.approx(4.0 * READOUT.g0**2 * 10.0 / READOUT.kappa, rel=1e-12)


def test_scattering_rates_values():
    # oracle: direct evaluation with plain floats, in ordinary-frequency units
    g_hz, kappa_hz, n = 430e3, 1.0e9, 10.0
    f_m = 3.99e9
    a_minus_hz = 4.0 * g_hz**2 * n / kappa_hz
    a_plus_hz = g_hz**2 * kappa_hz * n / ((2.0 * f_m) ** 2 + (kappa_hz / 2.0) ** 2)
    assert a_minus_hz == pytest.approx(7396.0, rel=1e-4)
    assert a_plus_hz == pytest.approx(28.92, rel=1e-3)

    drive = DriveState(ModeRole.READOUT, OMEGA_M, n)
    a_plus, a_minus = scattering_rates(READOUT, MECH, drive)
    assert a_minus / TWO_PI == pytest.approx(a_minus_hz, rel=1e-12)
    assert a_plus / TWO_PI == pytest.approx(a_plus_hz, rel=1e-12)


@given(st.floats(min_value=-1e11, max_value=1e11))
def test_scattering_mirror_symmetry(detuning):
    plus_fwd, minus_fwd = scattering_rates(
        READOUT, MECH, DriveState(ModeRole.READOUT, detuning, 3.0)
    )
    plus_rev, minus_rev = scattering_rates(
        READOUT, MECH, DriveState(ModeRole.READOUT, -detuning, 3.0)
    )
    assert plus_fwd == pytest.approx(minus_rev, rel=1e-12)
    assert minus_fwd == pytest.approx(plus_rev, rel=1e-12)


def test_scattering_requires_matching_target():
    drive = DriveState(ModeRole.COOLING, OMEGA_M, 1.0)
    with pytest.raises(ValueError, match="targets"):
        scattering_rates(READOUT, MECH, drive)


def test_cooling_rate_no_pump():
    assert cooling_rate(COOLING, DriveState(ModeRole.COOLING, OMEGA_M, 0.0)) == 0.0


def test_cooling_rate_value():
    # oracle: 4 g^2 n / kappa with g/2pi = 960 kHz, kappa/2pi = 390 MHz, n = 100
    expected_hz = 4.0 * 960e3**2 * 100.0 / 390e6
    assert expected_hz == pytest.approx(945230.77, rel=1e-6)
    rate = cooling_rate(COOLING, DriveState(ModeRole.COOLING, OMEGA_M, 100.0))
    assert rate / TWO_PI == pytest.approx(expected_hz, rel=1e-12)


def test_cooling_rate_matches_scattering_difference_deep_sideband():
    # gamma_c = A_minus - A_plus of the cooling beam at Delta = +omega_m, up to
    # a relative correction bounded by (kappa/(4 omega_m))^2
    drive = DriveState(ModeRole.COOLING, OMEGA_M, 50.0)
    a_plus, a_minus = scattering_rates(COOLING, MECH, drive)
    gamma_c = cooling_rate(COOLING, drive)
    bound = (COOLING.kappa / (4.0 * OMEGA_M)) ** 2
    assert abs(gamma_c - (a_minus - a_plus)) / gamma_c <= bound * 1.01


def test_cooled_occupancy_no_cooling():
    assert cooled_occupancy(MECH, 0.0) == N_B


def test_cooled_occupancy_value():
    # oracle: 43e3 * 94 / (43e3 + 945.3e3)
    expected = 43e3 * 94.0 / (43e3 + 945.3e3)
    assert expected == pytest.approx(4.0899, abs=2e-4)
    assert cooled_occupancy(MECH, TWO_PI * 945.3e3) == pytest.approx(expected, rel=1e-12)


def test_cooled_occupancy_sweep_endpoint():
    # damping tuned to gamma_i (n_b/2.6 - 1) pins the occupancy at 2.6 exactly
    gamma_c = GAMMA_I * (N_B / 2.6 - 1.0)
    assert cooled_occupancy(MECH, gamma_c) == pytest.approx(2.6, rel=1e-12)


@given(st.floats(min_value=0.0, max_value=1e9))
def test_cooled_occupancy_monotone(gamma_c_hz):
    gamma_c = TWO_PI * gamma_c_hz
    n1 = cooled_occupancy(MECH, gamma_c)
    n2 = cooled_occupancy(MECH, gamma_c + TWO_PI * 1e3)
    assert n1 <= N_B
    assert n2 < n1 or n1 == pytest.approx(n2, rel=1e-15)


def _readout_photons_for_cooperativity(c_r: float, gamma_total: float) -> float:
    """Invert C_r(n_r): the rate difference is linear in the photon number."""
    probe = DriveState(ModeRole.READOUT, OMEGA_M, 1.0)
    a_plus, a_minus = scattering_rates(READOUT, MECH, probe)
    return c_r * gamma_total / (a_minus - a_plus)


def test_readout_backaction_off():
    gamma_c = TWO_PI * 945.3e3
    state = readout_backaction(MECH, gamma_c, READOUT, DriveState(ModeRole.READOUT, OMEGA_M, 0.0))
    assert state.C_r == 0.0
    assert state.gamma_plus == state.gamma_minus == MECH.gamma_i + gamma_c
    assert state.n_plus == state.n_minus == state.n_cooled


def test_readout_backaction_branch_occupancies():
    # pin <n>_c = 2.6 and C_r = 0.03; oracle: n_pm = 2.6/(1 pm 0.03)
    gamma_c = GAMMA_I * (N_B / 2.6 - 1.0)
    gamma_total = GAMMA_I + gamma_c
    n_r = _readout_photons_for_cooperativity(0.03, gamma_total)
    state = readout_backaction(
        MECH, gamma_c, READOUT, DriveState(ModeRole.READOUT, OMEGA_M, n_r)
    )
    assert state.C_r == pytest.approx(0.03, rel=1e-12)
    assert state.n_plus == pytest.approx(2.6 / 1.03, rel=1e-12)
    assert state.n_minus == pytest.approx(2.6 / 0.97, rel=1e-12)
    assert state.n_plus == pytest.approx(2.524, abs=5e-4)
    assert state.n_minus == pytest.approx(2.680, abs=5e-4)


@settings(max_examples=200)
@given(
    c_r=st.floats(min_value=0.0, max_value=0.999),
    n_c=st.floats(min_value=1e-3, max_value=1e4),
    gamma_total_hz=st.floats(min_value=1e3, max_value=1e7),
)
def test_phonon_flux_identity(c_r, n_c, gamma_total_hz):
    # gamma_+ n_+ == gamma_- n_- exactly: both equal gamma_total * n_c
    gamma_total = TWO_PI * gamma_total_hz
    gamma_plus, gamma_minus = gamma_total * (1 + c_r), gamma_total * (1 - c_r)
    n_plus, n_minus = n_c / (1 + c_r), n_c / (1 - c_r)
    assert gamma_plus * n_plus == pytest.approx(gamma_minus * n_minus, rel=1e-13)
    # branch ratios coincide: gamma_-/gamma_+ == n_+/n_-
    assert gamma_minus / gamma_plus == pytest.approx(n_plus / n_minus, rel=1e-13)


def test_readout_backaction_flux_identity_from_model():
    gamma_c = TWO_PI * 1.2e6
    state = readout_backaction(
        MECH, gamma_c, READOUT, DriveState(ModeRole.READOUT, OMEGA_M, 42.0)
    )
    assert state.gamma_plus * state.n_plus == pytest.approx(
        state.gamma_minus * state.n_minus, rel=1e-14
    )


def test_readout_backaction_dominating_probe_rejected():
    # intrinsic damping only, strong probe: C_r >= 1 must be a hard error
    with pytest.raises(BackactionError, match="C_r"):
        readout_backaction(
            MECH, 0.0, READOUT, DriveState(ModeRole.READOUT, OMEGA_M, 100.0)
        )


def test_readout_backaction_requires_protocol_detuning():
    with pytest.raises(ValueError, match="omega_m"):
        readout_backaction(
            MECH, 0.0, READOUT, DriveState(ModeRole.READOUT, 0.5 * OMEGA_M, 1.0)
        )


def test_quality_factor_of_device():
    assert MECH.quality_factor == pytest.approx(9.2e4, rel=0.01)


def test_parameter_invariants():
    with pytest.raises(ValueError, match="kappa_e"):
        OpticalModeParams(
            omega=TWO_PI * 194.1e12,
            kappa=TWO_PI * 1e9,
            kappa_e=TWO_PI * 2e9,
            g0=0.0,
            role=ModeRole.READOUT,
        )
    with pytest.raises(ValueError, match="gamma_i"):
        MechanicalModeParams(omega_m=1.0, gamma_i=0.0, n_b=0.0, x_zpf=1.0)
    with pytest.raises(ValueError, match="n_photons"):
        DriveState(ModeRole.READOUT, 0.0, -1.0)


def test_photon_number_from_power_round_trip():
    detuning = OMEGA_M
    n = 42.0
    power = n * hbar * (READOUT.omega - detuning) * (
        detuning**2 + (READOUT.kappa / 2) ** 2
    ) / READOUT.kappa_e
    assert photons_from_input_power(READOUT, detuning, power) == pytest.approx(n, rel=1e-12)
