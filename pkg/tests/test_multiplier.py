import numpy as np
import pytest

from shearlab.multiplier import (
    C_LOWER,
    CAP_D,
    CAP_E,
    MultiplierParams,
    MultiplierState,
    apply_A,
    default_t_ladder,
    m_dot,
    m_value,
    ode_crosscheck,
    verify_conditions,
)
from shearlab.spectral import FrequencyGrid, SpectralField, sobolev_norm, zero_field


def test_params_validation():
    MultiplierParams(nu=1.0, N=1.0)
    MultiplierParams(nu=1e-4, N=0.5)
    with pytest.raises(ValueError):
        MultiplierParams(nu=0.0, N=2.0)
    with pytest.raises(ValueError):
        MultiplierParams(nu=1.5, N=2.0)
    with pytest.raises(ValueError):
        MultiplierParams(nu=1e-3, N=0.0)


def test_m_bounds_and_special_values():
    ts = np.array([0.0, 0.5, 3.0, 40.0])
    for nu in (1e-1, 1e-3):
        for k in (-3, 1, 2):
            for xi in (-8.0, 0.0, 5.0):
                m = m_value(ts, k, xi, nu)
                assert m[0] == pytest.approx(1.0)
                assert np.all(np.diff(m) < 0)
                assert np.all((m >= C_LOWER) & (m <= 1.0))
        # zero column is inert at any time
        assert m_value(17.3, 0, 4.0, nu) == 1.0
        assert m_dot(17.3, 0, 4.0, nu) == 0.0


def test_m_dot_worked_value():
    assert m_dot(0.0, 1, 0.0, 1.0) == pytest.approx(-2.0, rel=1e-14)


def test_m_dot_matches_finite_difference():
    h = 1e-6
    for k, xi, nu, t in ((1, 0.0, 1.0, 0.0), (2, -5.0, 1e-2, 1.7), (-4, 3.0, 1e-3, 12.0)):
        fd = (m_value(t + h, k, xi, nu) - m_value(t - h, k, xi, nu)) / (2 * h)
        assert m_dot(t, k, xi, nu) == pytest.approx(fd, rel=1e-7)


def test_ghost_weight_worked_value():
    # unit (k=1, eta=0) mode, N=1, nu=1, t=0: (r1+r2) M^2 (1+k^2)^N = 2*1*2
    g = FrequencyGrid(16, 64, 2.0 * np.pi)
    state = MultiplierState(g, MultiplierParams(nu=1.0, N=1.0), 0.0)
    i, j = g.index_of(1, 0)
    assert state.ghost2[i, j] == pytest.approx(4.0, rel=1e-14)
    assert state.Mdot[i, j] == pytest.approx(-2.0, rel=1e-14)


def test_state_tables_consistent():
    g = FrequencyGrid(16, 64, 8.0)
    st = MultiplierState(g, MultiplierParams(nu=1e-2, N=2.0), 1.5)
    np.testing.assert_allclose(st.A2, st.A**2, rtol=1e-13)
    np.testing.assert_allclose(st.ghost2, -st.Mdot * st.M * st.A2 / st.M**2, rtol=1e-12)
    assert np.all(st.Mdot <= 0.0)


def test_apply_A_norm_sandwich():
    g = FrequencyGrid(16, 64, 8.0)
    rng = np.random.default_rng(3)
    f = zero_field(g)
    f.coeffs[:] = rng.standard_normal(f.coeffs.shape) + 1j * rng.standard_normal(f.coeffs.shape)
    f = SpectralField(g, f.coeffs)
    params = MultiplierParams(nu=1e-2, N=2.0)
    for t in (0.0, 2.0, 30.0):
        af = apply_A(f, t, params)
        norm_a = np.sqrt(np.sum(np.abs(af.coeffs) ** 2))
        norm_h = sobolev_norm(f, 2.0)
        assert C_LOWER * norm_h <= norm_a * (1 + 1e-12)
        assert norm_a <= norm_h * (1 + 1e-12)
    assert np.allclose(apply_A(f, 0.0, params).coeffs[0, :], f.coeffs[0, :] * np.sqrt(1 + g.eta**2) ** 2)


def test_default_t_ladder():
    lad = default_t_ladder(1e-3, n=25)
    assert lad.shape == (25,)
    assert lad[0] == 0.0
    assert lad[-1] == pytest.approx(10.0 * 1e-3 ** (-1.0 / 3.0))
    assert np.all(np.diff(lad) > 0)


@pytest.mark.parametrize("nu", [1e-1, 1e-3])
def test_verify_conditions_pass(nu):
    g = FrequencyGrid(16, 96, 12.0)
    report = verify_conditions(g, nu=nu, N=2.0)
    assert report["passed"]
    conds = report["conditions"]
    assert conds["a"]["worst_dev"] <= 1e-12
    assert conds["b"]["min_M"] >= C_LOWER - 1e-15
    assert conds["b"]["max_M"] <= 1.0 + 1e-15
    assert conds["c"]["min_margin"] >= 0.0
    assert conds["d"]["C_d"] <= CAP_D
    assert conds["e"]["C_e"] <= CAP_E
    assert "eta-kt" in report["note"]
    assert {"t", "k", "xi"} <= set(report["witness"]["d"])


def test_ode_crosscheck_small():
    err = ode_crosscheck(1e-1, t_final=5.0, k_samples=(1, -2), xi_samples=(0.0, 3.0))
    assert err <= 1e-8
