"""Time integration of the perturbation vorticity in moving frames.

Couette frame:
    f_t + u . grad_L f = nu Delta_L f,      u = (-d_v^L phi, d_z phi),
    Delta_L phi = f.

General frame (shear Ubar close to Couette, coefficients a, b from the
shear module):
    f_t + u . grad_t f = b d_z phi + nu Delta_L f + nu (a^2 - 1) d_vv^L f,
    Delta_t phi = f,   grad_t = (d_z, a d_v^L),   u = grad_t^perp phi,

so the transport term is a * (d_z phi d_v^L f - d_v^L phi d_z f).

The stiff nu*Delta_L part is integrated exactly per mode by the Kelvin
exponent (time-dependent integrating factor); everything else is explicit
inside classical RK4 stages (Heun as the order-2 fallback).  The same
stage fields feed a Runge-Kutta quadrature of the instantaneous energy
flux, which is what makes the energy-budget residual shrink at the full
RK order.

Resolution accounting: the moving frequency eta - k t eventually leaves
the dealiased band; once t > guard_frac * eta_cut/|k| a k-column may only
carry mass below guard_tol, otherwise the run stops with a resolution
error rather than silently aliasing.
"""

from __future__ import annotations

import time as _time
from dataclasses import dataclass, field

import numpy as np
import scipy.fft

from .errors import BlowupError, ConfigError, EllipticError, ResolutionError
from .multiplier import MultiplierParams, MultiplierState
from .shear import ShearProfile, ShearState, coefficients, evolve_shear, invert_map
from .spectral import (
    FrequencyGrid,
    SpectralField,
    check_spillover,
    hermitize,
    sobolev_weight,
    to_spectral,
)


@dataclass
class DataSpec:
    """Initial-data family: single_mode(k,q), random_band, or dipole."""

    kind: str
    k: int = 1
    q: int = 0
    k_max: int = 2
    eta_max: float = 2.0
    width: float = 0.5
    envelope_width: float = 0.0  # 0 -> L_v/10

    def __post_init__(self):
        if self.kind not in ("single_mode", "random_band", "dipole"):
            raise ConfigError(f"unknown data kind {self.kind!r}")


def initial_data(spec: DataSpec, grid: FrequencyGrid, eps: float, seed: int,
                 N: float) -> SpectralField:
    """Field with H^N norm exactly eps, reproducible from the seed.

    single_mode places one complex coefficient (a Kelvin wave; the
    physical field is complex but the nonlinearity vanishes on it
    identically), random_band and dipole build real localized data.
    """
    if eps < 0:
        raise ConfigError("eps must be >= 0")
    coeffs = np.zeros((grid.n_z, grid.n_v), dtype=np.complex128)
    if eps == 0.0:
        return SpectralField(grid, coeffs)

    if spec.kind == "single_mode":
        if abs(spec.k) > grid.k_cut or abs(spec.q) > grid.q_cut:
            raise ConfigError("single_mode frequencies exceed the dealias band")
        i, j = grid.index_of(spec.k, spec.q)
        eta = grid.eta[j]
        amp = eps * (1.0 + spec.k**2 + eta**2) ** (-N / 2.0)
        coeffs[i, j] = amp
        return SpectralField(grid, coeffs)

    if spec.kind == "random_band":
        q_max = int(np.floor(spec.eta_max * grid.L_v / (2.0 * np.pi)))
        if spec.k_max > grid.k_cut or q_max > grid.q_cut:
            raise ConfigError("random_band exceeds the dealias band")
        rng = np.random.default_rng(seed)
        for k in range(-spec.k_max, spec.k_max + 1):
            for q in range(-q_max, q_max + 1):
                z = rng.standard_normal() + 1j * rng.standard_normal()
                i, j = grid.index_of(k, q)
                coeffs[i, j] = z
        f = hermitize(SpectralField(grid, coeffs))
        f.coeffs[0, 0] = 0.0
        w = spec.envelope_width if spec.envelope_width > 0 else grid.L_v / 10.0
        env = np.exp(-((grid.v - 0.5 * grid.L_v) ** 2) / (2.0 * w**2))
        phys = scipy.fft.ifft2(f.coeffs, norm="forward").real * env[None, :]
        f = to_spectral(phys, grid)
    elif spec.kind == "dipole":
        w = spec.width
        c = 0.5 * grid.L_v
        dz1 = np.angle(np.exp(1j * (grid.z - (np.pi - 0.5))))
        dz2 = np.angle(np.exp(1j * (grid.z - (np.pi + 0.5))))
        dv = grid.v - c
        blob1 = np.exp(-(dz1[:, None] ** 2 + dv[None, :] ** 2) / (2.0 * w**2))
        blob2 = np.exp(-(dz2[:, None] ** 2 + dv[None, :] ** 2) / (2.0 * w**2))
        f = to_spectral(blob1 - blob2, grid)

    f.coeffs *= grid.dealias_mask
    # remove the mean with a localized envelope-shaped correction; zeroing
    # (0,0) alone would subtract a constant and park mass at the v edges
    if f.coeffs[0, 0] != 0.0:
        w = spec.envelope_width if spec.envelope_width > 0 else grid.L_v / 10.0
        env = np.exp(-((grid.v - 0.5 * grid.L_v) ** 2) / (2.0 * w**2))
        env_hat = scipy.fft.fft(env, norm="forward") * (np.abs(grid.q)
                                                        <= grid.q_cut)
        f.coeffs[0, :] -= (f.coeffs[0, 0] / env_hat[0]) * env_hat
    f.coeffs[0, 0] = 0.0
    norm = float(np.sqrt(np.sum(sobolev_weight(grid, N) * np.abs(f.coeffs) ** 2)))
    if norm == 0.0:
        raise ConfigError("initial data vanished after dealiasing")
    f.coeffs *= eps / norm
    check_spillover(f, what=f"initial data ({spec.kind})")
    return f


@dataclass
class SolverConfig:
    frame: str
    nu: float
    grid: FrequencyGrid
    T_final: float
    N: float = 2.0
    dt: float = 0.1
    dt_policy: str = "cfl"          # 'cfl' (dt is the cap) or 'fixed'
    cfl_number: float = 0.4
    visc_safety: float = 0.5
    rk_order: int = 4
    nonlinear: bool = True
    elliptic_tol: float = 1e-8
    shear: ShearProfile | None = None
    shear_refresh_every: int = 10
    store_every: int = 10
    guard_frac: float = 0.8
    guard_tol: float = 1e-14
    checkpoint_interval_sec: float = 0.0

    def __post_init__(self):
        if self.frame not in ("couette", "general"):
            raise ConfigError(f"unknown frame {self.frame!r}")
        if self.frame == "general" and self.shear is None:
            raise ConfigError("general frame needs a shear profile")
        if self.T_final <= 0 or self.dt <= 0:
            raise ConfigError("T_final and dt must be positive")
        if not (0.0 < self.elliptic_tol <= 1e-6):
            raise ConfigError("elliptic_tol must lie in (0, 1e-6]")
        if self.rk_order not in (2, 4):
            raise ConfigError("rk_order must be 2 or 4")
        if self.dt_policy not in ("cfl", "fixed"):
            raise ConfigError(f"unknown dt policy {self.dt_policy!r}")


@dataclass
class RunState:
    t: float
    f: SpectralField
    phi: np.ndarray | None = None
    step: int = 0


def if_factor(grid: FrequencyGrid, nu: float, t0: float, t1: float) -> np.ndarray:
    """exp(-nu * integral of k^2 + (eta - k tau)^2 over [t0, t1]), per mode."""
    K, E = grid.K, grid.E
    dt = t1 - t0
    w0 = E - K * t0
    w1 = E - K * t1
    cubic = np.zeros(np.broadcast_shapes(K.shape, E.shape))
    np.divide(w0**3 - w1**3, 3.0 * K, out=cubic, where=(K != 0))
    expo = np.where(K != 0, K**2 * dt + cubic, E**2 * dt)
    return np.exp(-nu * expo)


def solve_poisson_t(f_hat: np.ndarray, grid: FrequencyGrid, t: float,
                    a2m1: np.ndarray | None, b: np.ndarray | None,
                    tol: float = 1e-8, phi0: np.ndarray | None = None,
                    max_sweeps: int = 200) -> tuple[np.ndarray, dict]:
    """Solve Delta_t phi = f by the Delta_L-preconditioned fixed point.

    Delta_t = Delta_L + (a^2-1) d_vv^L + b d_v^L; each sweep solves
    Delta_L phi = f - perturbation(phi_prev).  Zero-mean gauge enforced.
    Returns (phi_hat, info) with sweep count and measured contraction.
    """
    K, E = grid.K, grid.E
    w = E - K * t
    sym = -(K**2 + w**2)
    inv = np.zeros_like(sym)
    np.divide(1.0, sym, out=inv, where=(sym != 0))

    if a2m1 is None or (not np.any(a2m1) and not np.any(b)):
        phi = inv * f_hat
        phi[0, 0] = 0.0
        return phi, {"sweeps": 1, "contraction": 0.0, "residual": 0.0}

    fnorm = float(np.linalg.norm(f_hat))
    if fnorm == 0.0:
        return np.zeros_like(f_hat), {"sweeps": 0, "contraction": 0.0, "residual": 0.0}

    mask = grid.dealias_mask
    phi = phi0.copy() if phi0 is not None else inv * f_hat
    phi[0, 0] = 0.0
    prev_r = None
    worst_ratio = 0.0
    for sweep in range(1, max_sweeps + 1):
        pvv = scipy.fft.ifft2(-(w**2) * phi, norm="forward")
        pv = scipy.fft.ifft2(1j * w * phi, norm="forward")
        pert = scipy.fft.fft2(a2m1[None, :] * pvv + b[None, :] * pv, norm="forward")
        pert *= mask
        pert[0, 0] = 0.0
        resid = sym * phi + pert - f_hat
        resid[0, 0] = 0.0
        r = float(np.linalg.norm(resid))
        if prev_r is not None and prev_r > 0:
            worst_ratio = max(worst_ratio, r / prev_r)
        if r <= tol * fnorm:
            return phi, {"sweeps": sweep, "contraction": worst_ratio, "residual": r / fnorm}
        prev_r = r
        phi = inv * (f_hat - pert)
        phi[0, 0] = 0.0
    raise EllipticError(
        f"delta too large for elliptic solve: residual {r/fnorm:.3e} after "
        f"{max_sweeps} sweeps"
    )


def zero_mode_velocity(phi_hat: np.ndarray, grid: FrequencyGrid, t: float,
                       a_ph: np.ndarray | None = None) -> np.ndarray:
    """Spectral u0^z, the z-average of the streamwise velocity.

    Couette frame: u0^z = -d_v phi0, i.e. -i eta phihat(0, eta).  General
    frame: u0^z = -a(v) (d_v phi)0, composed in physical space.
    """
    col = -1j * grid.eta * phi_hat[0, :]
    if a_ph is None:
        return col
    dphi0 = scipy.fft.ifft(col, norm="forward")
    return scipy.fft.fft(a_ph * dphi0, norm="forward")


class Stepper:
    """Integrating-factor Runge-Kutta stepper with per-stage flux capture."""

    def __init__(self, config: SolverConfig):
        self.cfg = config
        g = config.grid
        self.grid = g
        self.nu = config.nu
        self.params = MultiplierParams(nu=config.nu, N=config.N)
        self.w2n = sobolev_weight(g, config.N) * np.ones((g.n_z, g.n_v))
        self.mask = g.dealias_mask
        self._mult_cache: tuple[float, MultiplierState] | None = None
        # shear tables (general frame); refreshed on a step ladder
        self.a_ph: np.ndarray | None = None
        self.a2m1_ph: np.ndarray | None = None
        self.b_ph: np.ndarray | None = None
        self.max_a2m1 = 0.0
        self.shear_state: ShearState | None = None
        self.phi_cache: np.ndarray | None = None
        self.elliptic_sweeps = 0
        self.elliptic_contraction = 0.0
        if config.frame == "general":
            self.refresh_shear(0.0)

    # -- shear coefficient tables -----------------------------------------

    def refresh_shear(self, t: float):
        state = evolve_shear(self.cfg.shear, self.nu, t)
        invert_map(state)
        am1, b = coefficients(state)
        self.shear_state = state
        self.a_ph = 1.0 + am1
        self.a2m1_ph = self.a_ph**2 - 1.0
        self.b_ph = b
        self.max_a2m1 = float(np.max(np.abs(self.a2m1_ph)))

    # -- multiplier tables --------------------------------------------------

    def tables(self, t: float) -> MultiplierState:
        if self._mult_cache is not None and self._mult_cache[0] == t:
            return self._mult_cache[1]
        st = MultiplierState(self.grid, self.params, t)
        self._mult_cache = (t, st)
        return st

    # -- right-hand side ----------------------------------------------------

    def rhs(self, f_hat: np.ndarray, t: float) -> tuple[np.ndarray, dict]:
        """Non-stiff tendency and the instantaneous energy fluxes.

        Returns (N_hat, aux) where N_hat excludes nu*Delta_L (handled by
        the integrating factor) and aux carries the flux values
        D_visc, D_ghost, <A N, A f>, velocity maxima, and the k=0
        velocity data used by the kinetic-energy bookkeeping.
        """
        g = self.grid
        K, E = g.K, g.E
        w = E - K * t
        general = self.cfg.frame == "general"

        if general:
            phi, info = solve_poisson_t(
                f_hat, g, t, self.a2m1_ph, self.b_ph,
                tol=self.cfg.elliptic_tol, phi0=self.phi_cache)
            self.phi_cache = phi
            self.elliptic_sweeps = max(self.elliptic_sweeps, info["sweeps"])
            self.elliptic_contraction = max(self.elliptic_contraction,
                                            info["contraction"])
        else:
            sym = -(K**2 + w**2)
            inv = np.zeros_like(sym)
            np.divide(1.0, sym, out=inv, where=(sym != 0))
            phi = inv * f_hat
            phi[0, 0] = 0.0

        st = self.tables(t)
        absf2 = f_hat.real**2 + f_hat.imag**2
        d_visc = self.nu * float(np.sum((K**2 + w**2) * st.A2 * absf2))
        d_ghost = float(np.sum(st.ghost2 * absf2))

        aux = {"d_visc": d_visc, "d_ghost": d_ghost, "flux_n": 0.0,
               "uz_max": 0.0, "uv_max": 0.0,
               "u0_l2sq": 0.0, "u0_visc": 0.0, "u0_flux": 0.0}

        eta = g.eta
        u0 = zero_mode_velocity(phi, g, t, self.a_ph if general else None)
        aux["u0_l2sq"] = float(np.sum(np.abs(u0) ** 2))
        aux["u0_visc"] = self.nu * float(np.sum(eta**2 * np.abs(u0) ** 2))

        if not self.cfg.nonlinear:
            return np.zeros_like(f_hat), aux

        pz = scipy.fft.ifft2(1j * K * phi, norm="forward")
        pv = scipy.fft.ifft2(1j * w * phi, norm="forward")
        fz = scipy.fft.ifft2(1j * K * f_hat, norm="forward")
        fv = scipy.fft.ifft2(1j * w * f_hat, norm="forward")

        transport = pz * fv - pv * fz
        if general:
            transport *= self.a_ph[None, :]
            dvv = scipy.fft.ifft2(-(w**2) * f_hat, norm="forward")
            nl_phys = (-transport + self.b_ph[None, :] * pz
                       + self.nu * self.a2m1_ph[None, :] * dvv)
            uz_max = float(np.max(np.abs(self.a_ph[None, :] * pv)))
        else:
            nl_phys = -transport
            uz_max = float(np.max(np.abs(pv)))

        n_hat = scipy.fft.fft2(nl_phys, norm="forward")
        n_hat *= self.mask
        n_hat[0, 0] = 0.0

        aux["flux_n"] = float(np.sum(st.A2 * (np.conj(f_hat) * n_hat).real))
        aux["uz_max"] = uz_max
        aux["uv_max"] = float(np.max(np.abs(pz)))
        if not general:
            # transport's k=0 column drives the zero-mode velocity:
            # d/dt u0 = -(i/eta) T(0,eta) - nu eta^2 u0, T = fft(u.grad f)
            t_hat0 = scipy.fft.fft(np.mean(transport, axis=0), norm="forward")
            t_hat0 *= np.abs(g.q) <= g.q_cut
            drive = np.zeros(g.n_v, dtype=np.complex128)
            np.divide(-1j * t_hat0, eta, out=drive, where=(eta != 0))
            aux["u0_flux"] = float(np.sum((np.conj(u0) * drive).real))
        return n_hat, aux

    # -- single step ----------------------------------------------------------

    def step(self, t: float, f_hat: np.ndarray, h: float) -> tuple[np.ndarray, dict]:
        g = self.grid
        nu = self.nu
        if self.cfg.rk_order == 4:
            e_half = if_factor(g, nu, t, t + 0.5 * h)
            e_half2 = if_factor(g, nu, t + 0.5 * h, t + h)
            e_full = e_half * e_half2
            k1, a1 = self.rhs(f_hat, t)
            k2, a2 = self.rhs(e_half * (f_hat + 0.5 * h * k1), t + 0.5 * h)
            k3, a3 = self.rhs(e_half * f_hat + 0.5 * h * k2, t + 0.5 * h)
            k4, a4 = self.rhs(e_full * f_hat + h * e_half2 * k3, t + h)
            f_new = e_full * f_hat + (h / 6.0) * (
                e_full * k1 + 2.0 * e_half2 * (k2 + k3) + k4)
            wts = (h / 6.0, h / 3.0, h / 3.0, h / 6.0)
            auxes = (a1, a2, a3, a4)
        else:
            e_full = if_factor(g, nu, t, t + h)
            k1, a1 = self.rhs(f_hat, t)
            k2, a2 = self.rhs(e_full * (f_hat + h * k1), t + h)
            f_new = e_full * f_hat + 0.5 * h * (e_full * k1 + k2)
            wts = (0.5 * h, 0.5 * h)
            auxes = (a1, a2)

        quad = {}
        for key in ("d_visc", "d_ghost", "flux_n", "u0_visc", "u0_flux"):
            quad["dq_" + key] = float(sum(wt * a[key] for wt, a in zip(wts, auxes)))
        quad["dq_total"] = (quad["dq_d_visc"] + quad["dq_d_ghost"]
                            - quad["dq_flux_n"])
        quad["uz_max"] = auxes[-1]["uz_max"]
        quad["uv_max"] = auxes[-1]["uv_max"]
        return f_new, quad

    # -- CFL ---------------------------------------------------------------

    def choose_dt(self, t: float, remaining: float, uz_max: float,
                  uv_max: float) -> float:
        cfg = self.cfg
        if cfg.dt_policy == "fixed":
            return min(cfg.dt, remaining)
        dt = cfg.dt
        if uz_max > 0:
            dt = min(dt, cfg.cfl_number * self.grid.dz / uz_max)
        if uv_max > 0:
            dt = min(dt, cfg.cfl_number * self.grid.dv / uv_max)
        if cfg.frame == "general" and self.max_a2m1 > 0:
            wmax = self.grid.eta_cut + self.grid.k_cut * (t + dt)
            cap = cfg.visc_safety / (self.nu * self.max_a2m1 * wmax**2)
            dt = min(dt, cap)
        return min(dt, remaining)


@dataclass
class RunResult:
    status: str
    state: RunState
    steps: int
    trace: dict
    stored: dict
    integrals: dict
    sups: dict
    elliptic: dict
    config: SolverConfig = field(repr=False, default=None)
    initial: dict = field(default_factory=dict)


def step_couette(state: RunState, dt: float, config: SolverConfig) -> RunState:
    """One Couette-frame step (convenience wrapper around Stepper)."""
    if config.frame != "couette":
        raise ConfigError("step_couette needs frame='couette'")
    stepper = Stepper(config)
    f_new, _ = stepper.step(state.t, state.f.coeffs, dt)
    return RunState(t=state.t + dt, f=SpectralField(config.grid, f_new),
                    step=state.step + 1)


def step_general(state: RunState, dt: float, config: SolverConfig) -> RunState:
    """One general-frame step (coefficients refreshed at the state time)."""
    if config.frame != "general":
        raise ConfigError("step_general needs frame='general'")
    stepper = Stepper(config)
    stepper.refresh_shear(state.t)
    f_new, _ = stepper.step(state.t, state.f.coeffs, dt)
    return RunState(t=state.t + dt, f=SpectralField(config.grid, f_new),
                    step=state.step + 1)


def _guard_thresholds(grid: FrequencyGrid, frac: float) -> np.ndarray:
    """Per-k-column time after which the column must be empty."""
    out = np.full(grid.n_z, np.inf)
    nz = grid.k != 0
    out[nz] = frac * grid.eta_cut / np.abs(grid.k[nz])
    out[np.abs(grid.k) > grid.k_cut] = np.inf  # dealiased anyway
    return out


def run_simulation(config: SolverConfig, f0: SpectralField,
                   on_checkpoint=None) -> RunResult:
    """Advance f0 to T_final collecting the per-step energy trace.

    Raises ResolutionError / EllipticError / BlowupError with the last
    good state attached as exc.state for checkpointing.
    """
    if f0.grid != config.grid:
        raise ConfigError("initial data grid does not match config grid")
    stepper = Stepper(config)
    g = config.grid
    K, E = g.K, g.E
    f_hat = (f0.coeffs * g.dealias_mask).astype(np.complex128)
    f_hat[0, 0] = 0.0
    t = 0.0
    step = 0
    thresholds = _guard_thresholds(g, config.guard_frac)

    trace = {k: [] for k in
             ("t", "dt", "E_A", "nz_HN2", "z_HN2", "nz_L2sq", "u0_l2sq",
              "r_raw", "dq_visc", "dq_ghost", "dq_u0visc", "dq_u0flux",
              "dq_total", "gradL2")}
    stored = {k: [] for k in
              ("t", "E_A", "D_visc", "D_ghost", "nz_HN", "z_HN", "psi_nz",
               "u0_L2", "r_raw", "dt")}

    def weighted(table, fh):
        return float(np.sum(table * (fh.real**2 + fh.imag**2)))

    def energy(fh, tt):
        return weighted(stepper.tables(tt).A2, fh)

    def norms(fh, tt):
        w = E - K * tt
        absf2 = fh.real**2 + fh.imag**2
        z_absf2 = np.abs(fh[0, :]) ** 2
        nz2 = weighted(stepper.w2n, fh) - float(np.sum(stepper.w2n[0, :] * z_absf2))
        z2 = float(np.sum(stepper.w2n[0, :] * z_absf2))
        nzl2 = float(np.sum(absf2)) - float(np.sum(z_absf2))
        grad2 = weighted(K**2 + w**2, fh)
        return nz2, z2, nzl2, grad2

    def current_phi(fh, tt):
        if config.frame == "general":
            phi, _ = solve_poisson_t(fh, g, tt, stepper.a2m1_ph, stepper.b_ph,
                                     tol=config.elliptic_tol,
                                     phi0=stepper.phi_cache)
            stepper.phi_cache = phi
            return phi
        w = E - K * tt
        sym = -(K**2 + w**2)
        inv = np.zeros_like(sym)
        np.divide(1.0, sym, out=inv, where=(sym != 0))
        phi = inv * fh
        phi[0, 0] = 0.0
        return phi

    def u0_l2sq_of(fh, tt):
        phi = current_phi(fh, tt)
        a_ph = stepper.a_ph if config.frame == "general" else None
        u0 = zero_mode_velocity(phi, g, tt, a_ph)
        return float(np.sum(np.abs(u0) ** 2)), phi

    def store_frame(tt, fh, phi):
        st = stepper.tables(tt)
        w = E - K * tt
        phi_nz = phi.copy()
        phi_nz[0, :] = 0.0
        a_ph = stepper.a_ph if config.frame == "general" else None
        u0 = zero_mode_velocity(phi, g, tt, a_ph)
        nz2, z2, _, _ = norms(fh, tt)
        stored["t"].append(tt)
        stored["E_A"].append(weighted(st.A2, fh))
        stored["D_visc"].append(config.nu * weighted((K**2 + w**2) * st.A2, fh))
        stored["D_ghost"].append(weighted(st.ghost2, fh))
        stored["nz_HN"].append(float(np.sqrt(nz2)))
        stored["z_HN"].append(float(np.sqrt(z2)))
        stored["psi_nz"].append(float(np.sqrt(np.sum(np.abs(phi_nz) ** 2))))
        stored["u0_L2"].append(float(np.sqrt(np.sum(np.abs(u0) ** 2))))
        stored["r_raw"].append(trace["r_raw"][-1] if trace["r_raw"] else 0.0)
        stored["dt"].append(trace["dt"][-1] if trace["dt"] else 0.0)

    e_prev = energy(f_hat, 0.0)
    nz2_prev, z2_0, nzl2_0, grad2_0 = norms(f_hat, 0.0)
    u0sq_prev, phi0 = u0_l2sq_of(f_hat, 0.0)
    initial = {"E_A": e_prev, "nz_HN2": nz2_prev, "z_HN2": z2_0,
               "nz_L2sq": nzl2_0, "gradL2": grad2_0, "u0_l2sq": u0sq_prev}
    store_frame(0.0, f_hat, phi0)

    sup_E = e_prev
    sup_u0 = float(np.sqrt(u0sq_prev))
    max_grad_ratio = 1.0
    int_visc = 0.0
    int_ghost = 0.0
    int_u0visc = 0.0
    int_nz2 = 0.0

    # velocity probe for the first CFL decision
    _, aux0 = stepper.rhs(f_hat, 0.0)
    uz_max, uv_max = aux0["uz_max"], aux0["uv_max"]

    last_ck = _time.monotonic()
    T = config.T_final
    while t < T - 1e-12:
        if config.frame == "general" and step > 0 and \
                step % config.shear_refresh_every == 0:
            stepper.refresh_shear(t)
        dt = stepper.choose_dt(t, T - t, uz_max, uv_max)
        if dt <= 0 or not np.isfinite(dt):
            raise BlowupError(f"step size collapsed at t={t:.6g}")
        try:
            f_new, quad = stepper.step(t, f_hat, dt)
        except EllipticError as exc:
            exc.state = RunState(t=t, f=SpectralField(g, f_hat), step=step)
            exc.stored_partial = stored
            raise
        t_new = t + dt
        if not np.all(np.isfinite(f_new)):
            exc = BlowupError(f"NaN/Inf in the state at t={t_new:.6g}")
            exc.state = RunState(t=t, f=SpectralField(g, f_hat), step=step)
            exc.stored_partial = stored
            raise exc

        e_new = energy(f_new, t_new)
        r_raw = 0.5 * (e_new - e_prev) + quad["dq_total"]
        nz2_new, z2_new, nzl2_new, grad2_new = norms(f_new, t_new)
        u0sq_new, phi_new = u0_l2sq_of(f_new, t_new)

        trace["t"].append(t_new)
        trace["dt"].append(dt)
        trace["E_A"].append(e_new)
        trace["nz_HN2"].append(nz2_new)
        trace["z_HN2"].append(z2_new)
        trace["nz_L2sq"].append(nzl2_new)
        trace["u0_l2sq"].append(u0sq_new)
        trace["r_raw"].append(r_raw)
        trace["dq_visc"].append(quad["dq_d_visc"])
        trace["dq_ghost"].append(quad["dq_d_ghost"])
        trace["dq_u0visc"].append(quad["dq_u0_visc"])
        trace["dq_u0flux"].append(quad["dq_u0_flux"])
        trace["dq_total"].append(quad["dq_total"])
        trace["gradL2"].append(grad2_new)

        int_visc += quad["dq_d_visc"]
        int_ghost += quad["dq_d_ghost"]
        int_u0visc += quad["dq_u0_visc"]
        int_nz2 += 0.5 * dt * (nz2_prev + nz2_new)
        sup_E = max(sup_E, e_new)
        sup_u0 = max(sup_u0, float(np.sqrt(u0sq_new)))
        if grad2_0 > 0:
            max_grad_ratio = max(max_grad_ratio, float(np.sqrt(grad2_new / grad2_0)))

        f_hat = f_new
        e_prev = e_new
        nz2_prev = nz2_new
        t = t_new
        step += 1
        uz_max, uv_max = quad["uz_max"], quad["uv_max"]

        # resolution guard: late columns must be empty
        live = np.where(t > thresholds)[0]
        if live.size:
            col_mass = np.sqrt(np.sum(
                f_hat.real[live, :]**2 + f_hat.imag[live, :]**2, axis=1))
            bad = col_mass > config.guard_tol
            if np.any(bad):
                ik = live[np.argmax(col_mass)]
                exc = ResolutionError(
                    f"shear-resolution exhausted: k={int(g.k[ik])} column "
                    f"carries {col_mass.max():.3e} at t={t:.4g} "
                    f"(limit {thresholds[ik]:.4g})")
                exc.state = RunState(t=t, f=SpectralField(g, f_hat), step=step)
                exc.stored_partial = stored
                raise exc

        if step % config.store_every == 0 or t >= T - 1e-12:
            store_frame(t, f_hat, phi_new)
        if on_checkpoint is not None and config.checkpoint_interval_sec > 0:
            now = _time.monotonic()
            if now - last_ck >= config.checkpoint_interval_sec:
                on_checkpoint(t, SpectralField(g, f_hat))
                last_ck = now

    state = RunState(t=t, f=SpectralField(g, f_hat), phi=stepper.phi_cache,
                     step=step)
    trace_np = {k: np.asarray(v) for k, v in trace.items()}
    stored_np = {k: np.asarray(v) for k, v in stored.items()}
    integrals = {
        "int_D_visc": int_visc,
        "int_D_ghost": int_ghost,
        "int_u0_visc": int_u0visc,
        "nz_L2HN": float(np.sqrt(int_nz2)),
    }
    sups = {
        "sup_E_A": sup_E,
        "sup_Af": float(np.sqrt(sup_E)),
        "sup_u0_L2": sup_u0,
        "max_grad_ratio": float(max_grad_ratio),
    }
    elliptic = {"max_sweeps": stepper.elliptic_sweeps,
                "max_contraction": stepper.elliptic_contraction}
    return RunResult(status="ok", state=state, steps=step, trace=trace_np,
                     stored=stored_np, integrals=integrals, sups=sups,
                     elliptic=elliptic, config=config, initial=initial)
