"""Closed-form evolution of a single shear wave in the Couette frame.

A mode starting at frequencies (k, eta0) keeps a fixed frame index while
its physical v-frequency drifts as eta_t = eta0 - k*t.  The vorticity
coefficient decays by the exact viscous exponent

    phi(t) = k^2 t + (eta0^3 - (eta0 - k t)^3) / (3 k)        (k != 0)
    phi(t) = eta0^2 t                                          (k = 0)

and the stream function is psi = -(-Delta)^{-1} omega, which produces the
Orr transient (peak at t = eta0/k), the 1/<t>^2 stream-function damping,
and the e^{-c nu t^3} enhanced-dissipation envelope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq


@dataclass(frozen=True)
class KelvinMode:
    k: int
    eta0: float
    amplitude: complex = 1.0 + 0j
    nu: float = 0.0

    def __post_init__(self):
        if self.nu < 0:
            raise ValueError("nu must be >= 0")

    @property
    def t_crit(self) -> float:
        """Critical (Orr) time where the moving frequency crosses zero."""
        if self.k == 0:
            return 0.0
        return self.eta0 / self.k


def viscous_exponent(k: int, eta0: float, t) -> np.ndarray | float:
    """Integral of k^2 + (eta0 - k*tau)^2 over tau in [0, t], closed form."""
    t = np.asarray(t, dtype=float)
    if k == 0:
        out = eta0**2 * t
    else:
        out = k**2 * t + (eta0**3 - (eta0 - k * t) ** 3) / (3.0 * k)
    return out if out.ndim else float(out)


def viscous_exponent_quad(k: int, eta0: float, t: float) -> float:
    """Same integral by adaptive quadrature; oracle for the closed form."""
    val, _ = quad(lambda tau: k**2 + (eta0 - k * tau) ** 2, 0.0, t,
                  limit=200, epsabs=1e-13, epsrel=1e-12)
    return val


def kelvin_evolve(mode: KelvinMode, t: float) -> tuple[complex, complex, float]:
    """Return (omega_hat, psi_hat, eta_t) at time t >= 0."""
    if t < 0:
        raise ValueError("t must be >= 0")
    eta_t = mode.eta0 - mode.k * t
    omega = mode.amplitude * np.exp(-mode.nu * viscous_exponent(mode.k, mode.eta0, t))
    denom = mode.k**2 + eta_t**2
    psi = -omega / denom if denom != 0.0 else 0.0j
    return complex(omega), complex(psi), float(eta_t)


def enhanced_dissipation_envelope(k: int, eta0: float, nu: float):
    """Bound t -> exp(-c nu t^3) with the mode-exact c = k^2/3.

    The returned callable takes the time elapsed past the critical time
    t_c = eta0/k; the exact exponent dominates nu*k^2*(t-t_c)^3/3 there.
    """
    if k == 0:
        raise ValueError("no enhanced dissipation for the zero mode")
    if nu <= 0:
        raise ValueError("nu must be positive")
    c = k**2 / 3.0

    def envelope(s):
        s = np.maximum(np.asarray(s, dtype=float), 0.0)
        return np.exp(-c * nu * s**3)

    return envelope


def envelope_dominates(mode: KelvinMode, times) -> bool:
    """Check phi(t) >= k^2 (t - t_c)^3 / 3 for every sampled t past t_c."""
    if mode.k == 0:
        raise ValueError("no enhanced dissipation for the zero mode")
    times = np.asarray(times, dtype=float)
    tc = mode.t_crit
    s = np.maximum(times - tc, 0.0)
    phi = viscous_exponent(mode.k, mode.eta0, times)
    return bool(np.all(phi >= mode.k**2 * s**3 / 3.0 - 1e-12))


def efold_time(k: int, eta0: float, nu: float) -> float:
    """Solve nu * phi(t) = 1 for the first e-folding time of |omega|."""
    if nu <= 0:
        raise ValueError("nu must be positive")
    if k == 0:
        if eta0 == 0:
            raise ValueError("zero mode with eta0=0 never decays")
        return 1.0 / (nu * eta0**2)
    hi = (3.0 / (nu * k**2)) ** (1.0 / 3.0) + abs(eta0 / k) + 1.0
    while nu * viscous_exponent(k, eta0, hi) < 1.0:
        hi *= 2.0
    return brentq(lambda t: nu * viscous_exponent(k, eta0, t) - 1.0, 0.0, hi,
                  xtol=1e-12, rtol=1e-12)


def orr_amplification(k: int, eta0: float) -> float:
    """Inviscid |psi| gain from t=0 to the critical time: (k^2+eta0^2)/k^2."""
    if k == 0:
        raise ValueError("Orr mechanism needs k != 0")
    mode = KelvinMode(k=k, eta0=eta0, nu=0.0)
    _, psi0, _ = kelvin_evolve(mode, 0.0)
    _, psic, _ = kelvin_evolve(mode, mode.t_crit) if mode.t_crit > 0 else (None, psi0, None)
    return float(abs(psic) / abs(psi0))


def default_fit_window(t_crit: float) -> tuple[float, float]:
    return (2.0 * t_crit + 5.0, 10.0 * t_crit + 50.0)


def _loglog_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """Least-squares slope of log y vs log x, with rms fit residual."""
    good = y > 0
    if np.count_nonzero(good) < 4:
        raise ValueError("need at least 4 positive samples for a slope fit")
    lx, ly = np.log(x[good]), np.log(y[good])
    coef = np.polyfit(lx, ly, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
    return float(coef[0]), resid


def inviscid_damping_check(mode: KelvinMode, times) -> dict:
    """Fitted algebraic decay rates of the stream function past t_c.

    Fits log|psi|, log|d_z psi|, log|d_y psi| against log<t - t_c> where
    <x> = sqrt(1+x^2) and d_y is taken in original coordinates, so
    |d_y psi| = |eta_t| |psi|.  Expected slopes: -2, -2, -1.
    """
    if mode.k == 0:
        raise ValueError("damping rates need k != 0")
    times = np.asarray(times, dtype=float)
    if times.size < 4:
        raise ValueError("need at least 4 sample times")
    tc = mode.t_crit
    if np.any(times <= tc):
        raise ValueError("all sample times must lie past the critical time")

    psi = np.empty(times.size)
    dy = np.empty(times.size)
    for i, t in enumerate(times):
        _, p, eta_t = kelvin_evolve(mode, t)
        psi[i] = abs(p)
        dy[i] = abs(eta_t) * abs(p)
    bracket = np.sqrt(1.0 + (times - tc) ** 2)

    s_psi, r_psi = _loglog_slope(bracket, psi)
    s_dz, r_dz = _loglog_slope(bracket, abs(mode.k) * psi)
    s_dy, r_dy = _loglog_slope(bracket, dy)
    return {
        "psi_slope": s_psi, "psi_resid": r_psi,
        "dz_psi_slope": s_dz, "dz_psi_resid": r_dz,
        "dy_psi_slope": s_dy, "dy_psi_resid": r_dy,
        "window": (float(times.min()), float(times.max())),
    }


def linear_series(mode: KelvinMode, times) -> dict:
    """Column arrays for the `linear` CLI: decay, damping, envelope."""
    times = np.asarray(times, dtype=float)
    omega = np.empty(times.size)
    psi = np.empty(times.size)
    dzpsi = np.empty(times.size)
    dypsi = np.empty(times.size)
    for i, t in enumerate(times):
        w, p, eta_t = kelvin_evolve(mode, t)
        omega[i] = abs(w)
        psi[i] = abs(p)
        dzpsi[i] = abs(mode.k) * abs(p)
        dypsi[i] = abs(eta_t) * abs(p)
    if mode.k != 0 and mode.nu > 0:
        env = abs(mode.amplitude) * enhanced_dissipation_envelope(
            mode.k, mode.eta0, mode.nu)(times - mode.t_crit)
    else:
        env = np.full(times.size, abs(mode.amplitude))
    return {"t": times, "omega": omega, "psi": psi,
            "dz_psi": dzpsi, "dy_psi": dypsi, "envelope": env}
