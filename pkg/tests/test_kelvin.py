import numpy as np
import pytest

from shearlab.kelvin import (
    KelvinMode,
    default_fit_window,
    efold_time,
    enhanced_dissipation_envelope,
    envelope_dominates,
    inviscid_damping_check,
    kelvin_evolve,
    linear_series,
    orr_amplification,
    viscous_exponent,
    viscous_exponent_quad,
)


def test_exponent_closed_form_vs_quadrature():
    for k in (1, 2, 5):
        for eta0 in (-7.0, 0.0, 3.5):
            for t in (0.1, 1.0, 10.0):
                a = viscous_exponent(k, eta0, t)
                b = viscous_exponent_quad(k, eta0, t)
                assert abs(a - b) <= 1e-10 * max(1.0, abs(a))


def test_exponent_zero_mode_branch():
    assert viscous_exponent(0, 3.0, 2.0) == pytest.approx(18.0)
    w, _, _ = kelvin_evolve(KelvinMode(0, 3.0, 1.0, 0.1), 2.0)
    assert abs(w) == pytest.approx(np.exp(-1.8))


def test_heat_factor_single_mode():
    # eta0=1, nu=0.1, t=10 decays by exactly e^{-1} for the zero mode
    w, _, _ = kelvin_evolve(KelvinMode(0, 1.0, 1.0, 0.1), 10.0)
    assert abs(w) == pytest.approx(np.exp(-1.0), rel=1e-14)


def test_evolve_relations():
    mode = KelvinMode(2, 6.0, amplitude=0.5 + 0.1j, nu=1e-3)
    w, p, eta_t = kelvin_evolve(mode, 1.25)
    assert eta_t == pytest.approx(6.0 - 2 * 1.25)
    assert p == pytest.approx(-w / (4.0 + eta_t**2))
    assert mode.t_crit == pytest.approx(3.0)
    with pytest.raises(ValueError):
        kelvin_evolve(mode, -0.1)


def test_orr_amplification_worked_value():
    assert orr_amplification(1, 10.0) == pytest.approx(101.0, rel=1e-12)
    with pytest.raises(ValueError):
        orr_amplification(0, 1.0)


def test_envelope_dominates():
    # domination from the critical time needs t_c >= 0
    for k, eta0 in ((1, 0.0), (2, 5.0), (3, 4.0)):
        mode = KelvinMode(k, eta0, nu=1e-3)
        times = np.linspace(0.0, 50.0, 400)
        assert envelope_dominates(mode, times)


def test_envelope_callable():
    env = enhanced_dissipation_envelope(2, 3.0, 1e-2)
    s = np.array([-1.0, 0.0, 2.0])
    vals = env(s)
    assert vals[0] == 1.0 and vals[1] == 1.0
    assert vals[2] == pytest.approx(np.exp(-(4.0 / 3.0) * 1e-2 * 8.0))
    with pytest.raises(ValueError):
        enhanced_dissipation_envelope(0, 1.0, 1e-2)


def test_efold_time_is_a_root():
    for k, eta0, nu in ((1, 0.0, 1e-2), (1, 0.0, 1e-4), (3, 7.0, 1e-3)):
        te = efold_time(k, eta0, nu)
        assert nu * viscous_exponent(k, eta0, te) == pytest.approx(1.0, abs=1e-9)
    assert efold_time(0, 2.0, 0.1) == pytest.approx(1.0 / (0.1 * 4.0))


def test_inviscid_damping_slopes():
    mode = KelvinMode(1, 10.0, nu=0.0)
    lo, hi = default_fit_window(mode.t_crit)
    assert (lo, hi) == (25.0, 150.0)
    fit = inviscid_damping_check(mode, np.linspace(lo, hi, 200))
    assert fit["psi_slope"] == pytest.approx(-2.0, abs=0.05)
    assert fit["dz_psi_slope"] == pytest.approx(-2.0, abs=0.05)
    assert fit["dy_psi_slope"] == pytest.approx(-1.0, abs=0.05)
    assert fit["psi_resid"] < 0.05


def test_damping_check_guards():
    mode = KelvinMode(1, 10.0)
    with pytest.raises(ValueError):
        inviscid_damping_check(mode, [11.0, 12.0])
    with pytest.raises(ValueError):
        inviscid_damping_check(mode, [5.0, 11.0, 12.0, 13.0])
    with pytest.raises(ValueError):
        inviscid_damping_check(KelvinMode(0, 1.0), [1.0, 2.0, 3.0, 4.0])


def test_linear_series_columns():
    mode = KelvinMode(1, 2.0, amplitude=0.5, nu=1e-2)
    times = np.linspace(0.0, 10.0, 11)
    s = linear_series(mode, times)
    assert set(s) == {"t", "omega", "psi", "dz_psi", "dy_psi", "envelope"}
    assert all(len(v) == 11 for v in s.values())
    assert s["omega"][0] == pytest.approx(0.5)
    assert s["psi"][0] == pytest.approx(0.5 / (1 + 4.0))
    assert s["dz_psi"][0] == pytest.approx(abs(1) * s["psi"][0])
    assert s["dy_psi"][0] == pytest.approx(2.0 * s["psi"][0])
    # envelope starts at |amplitude| and is nonincreasing past the critical time
    assert s["envelope"][0] == pytest.approx(0.5)
    assert np.all(np.diff(s["envelope"]) <= 0.0 + 1e-15)
