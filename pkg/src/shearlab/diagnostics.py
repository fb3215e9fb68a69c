"""Energy functionals, budget closure, rate fits, and stability classification.

The weighted energy E_A = |A f|^2 with A = M <D>^N obeys, along the flow,

    1/2 dE_A/dt = -D_visc - D_ghost - <A(u.grad f), Af>
                  + <A(b d_z phi), Af> + nu <A((a^2-1) d_vv^L f), Af>

so the solver's Runge-Kutta quadrature of the right side must cancel the
measured energy increments to the order of the integrator; the residual
is the budget closure check.  Bootstrap classification compares the five
proof functionals against 8*eps (stable) and 4*eps (strongly stable).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ShearlabError
from .multiplier import CAP_E, MultiplierState
from .shear import ShearState
from .solver import RunResult, RunState, solve_poisson_t, zero_mode_velocity
from .spectral import sobolev_weight


@dataclass
class DiagnosticFrame:
    t: float
    E_A: float
    D_visc: float
    D_ghost: float
    nz_HN: float
    z_HN: float
    psi_nz: float
    u0_L2: float
    budget_residual: float = 0.0

    FIELDS = ("t", "E_A", "D_visc", "D_ghost", "nz_HN", "z_HN", "psi_nz",
              "u0_L2", "budget_residual")

    def as_row(self) -> list[float]:
        return [getattr(self, k) for k in self.FIELDS]


@dataclass
class RateFit:
    label: str
    window: tuple[float, float]
    value: float
    residual: float
    extra: dict = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {"label": self.label, "window": list(self.window),
                "value": self.value, "residual": self.residual,
                **self.extra}


def frame(state: RunState, mult_state: MultiplierState,
          shear_state: ShearState | None = None) -> DiagnosticFrame:
    """All functionals of one snapshot, evaluated spectrally."""
    grid = mult_state.grid
    nu = mult_state.params.nu
    t = state.t
    fh = state.f.coeffs
    K, E = grid.K, grid.E
    w = E - K * t
    absf2 = fh.real**2 + fh.imag**2

    e_a = float(np.sum(mult_state.A2 * absf2))
    d_visc = nu * float(np.sum((K**2 + w**2) * mult_state.A2 * absf2))
    d_ghost = float(np.sum(mult_state.ghost2 * absf2))

    w2n = sobolev_weight(grid, mult_state.params.N) * np.ones_like(absf2)
    z2 = float(np.sum(w2n[0, :] * absf2[0, :]))
    nz2 = float(np.sum(w2n * absf2)) - z2

    a2m1 = b = None
    a_ph = None
    if shear_state is not None and shear_state.a_minus_1 is not None:
        a_ph = 1.0 + shear_state.a_minus_1
        a2m1 = a_ph**2 - 1.0
        b = shear_state.b
    phi, _ = solve_poisson_t(fh, grid, t, a2m1, b, tol=1e-10,
                             phi0=state.phi)
    phi_nz = phi.copy()
    phi_nz[0, :] = 0.0
    u0 = zero_mode_velocity(phi, grid, t, a_ph)

    _assert_interpolation(mult_state, nu)
    return DiagnosticFrame(
        t=t,
        E_A=e_a,
        D_visc=d_visc,
        D_ghost=d_ghost,
        nz_HN=float(np.sqrt(nz2)),
        z_HN=float(np.sqrt(z2)),
        psi_nz=float(np.sqrt(np.sum(np.abs(phi_nz) ** 2))),
        u0_L2=float(np.sqrt(np.sum(np.abs(u0) ** 2))),
    )


def _assert_interpolation(mult_state: MultiplierState, nu: float):
    """Pointwise 1 <= C nu^{-1/6} (sqrt(-Mdot M) + nu^{1/2} |(k, eta-kt)|)."""
    grid = mult_state.grid
    K, E = grid.K, grid.E
    w = E - K * mult_state.t
    nz = (K != 0) & np.ones_like(E, dtype=bool)
    ghost = -mult_state.Mdot * mult_state.M
    lhs = nu ** (-1.0 / 6.0) * (np.sqrt(ghost) + np.sqrt(nu) * np.sqrt(K**2 + w**2))
    if not np.all(lhs[nz] * CAP_E >= 1.0 - 1e-12):
        raise ShearlabError("nu^(-1/6) interpolation inequality failed on the grid")


def budget_residual(result: RunResult) -> dict:
    """Per-step budget residual, normalized by the peak weighted energy."""
    tr = result.trace
    if tr["t"].size == 0:
        return {"max_norm": 0.0, "per_step": np.zeros(0), "e_max": 0.0}
    e_max = max(float(np.max(tr["E_A"])), float(result.initial.get("E_A", 0.0)))
    if e_max == 0.0:
        return {"max_norm": 0.0, "per_step": np.zeros_like(tr["t"]), "e_max": 0.0}
    per_step = np.abs(tr["r_raw"] / tr["dt"]) / e_max
    return {"max_norm": float(np.max(per_step)), "per_step": per_step,
            "e_max": e_max}


def efold_time_from_series(t: np.ndarray, y: np.ndarray) -> float:
    """First crossing of y below y[0]/e, log-interpolated between samples."""
    y0 = y[0]
    if y0 <= 0:
        raise ValueError("no nonzero-mode content at t=0")
    target = y0 / np.e
    below = np.where(y <= target)[0]
    if below.size == 0:
        raise ValueError("series never decays by a factor e; window underresolved")
    j = below[0]
    if j == 0:
        return float(t[0])
    t1, t2 = t[j - 1], t[j]
    ly1, ly2 = np.log(y[j - 1]), np.log(y[j])
    lt = np.log(target)
    return float(t1 + (t2 - t1) * (lt - ly1) / (ly2 - ly1))


def fit_enhanced_dissipation(t: np.ndarray, nz_l2: np.ndarray, nu: float,
                             window: tuple[float, float] | None = None) -> RateFit:
    """Fit |f_neq(t)| to exp(-c nu t^3); report c and the e-folding time.

    The arrays must include t=0.  The run must reach 3 nu^(-1/3).
    """
    t = np.asarray(t, dtype=float)
    y = np.asarray(nz_l2, dtype=float)
    if nu <= 0:
        raise ValueError("nu must be positive")
    scale = nu ** (-1.0 / 3.0)
    if t[-1] < 3.0 * scale - 1e-9:
        raise ValueError(f"run too short for a rate fit: {t[-1]:.3g} < 3 nu^(-1/3)")
    if y[0] <= 0:
        raise ValueError("fit rejected: no nonzero-mode content")

    t_e = efold_time_from_series(t, y)
    if window is None:
        window = (0.3 * float(t[-1]), float(t[-1]))
    lo, hi = window
    sel = (t >= lo) & (t <= hi) & (y > 0)
    if np.count_nonzero(sel) < 4:
        raise ValueError("window underresolved: fewer than 4 samples")
    x = nu * t[sel] ** 3
    ly = np.log(y[sel] / y[0])
    coef = np.polyfit(x, ly, 1)
    resid = float(np.sqrt(np.mean((np.polyval(coef, x) - ly) ** 2)))
    c = -float(coef[0])
    return RateFit(
        label="enhanced_dissipation",
        window=(float(lo), float(hi)),
        value=c,
        residual=resid,
        extra={
            "t_efold": t_e,
            "enhanced_scale": scale,
            "heat_scale": nu**-0.5,
            "efold_over_heat": t_e / nu**-0.5,
        },
    )


BOOTSTRAP_NAMES = ("sup_Af", "visc_L2t", "ghost_L2t", "sup_u0", "u0_visc_L2t")


def check_bootstrap(result: RunResult, eps: float, nu: float) -> dict:
    """Compare the five proof functionals against 8*eps and 4*eps.

    Returns {classification, first_violation, functionals, K} where K is
    the measured constant in |f_neq|_{L2_t H^N} <= K eps nu^(-1/6).
    """
    tr = result.trace
    ints = result.integrals
    sups = result.sups
    funcs = {
        "sup_Af": sups["sup_Af"],
        "visc_L2t": float(np.sqrt(ints["int_D_visc"])),
        "ghost_L2t": float(np.sqrt(ints["int_D_ghost"])),
        "sup_u0": sups["sup_u0_L2"],
        "u0_visc_L2t": float(np.sqrt(ints["int_u0_visc"])),
    }
    stable_cap = 8.0 * eps
    strong_cap = 4.0 * eps

    if all(v <= strong_cap + 1e-300 for v in funcs.values()):
        classification = "strong"
    elif all(v <= stable_cap for v in funcs.values()):
        classification = "stable"
    else:
        classification = "violated"

    first_violation = None
    if classification == "violated" and tr["t"].size:
        e0 = float(result.initial.get("E_A", 0.0))
        u00 = float(result.initial.get("u0_l2sq", 0.0))
        running = {
            "sup_Af": np.sqrt(np.maximum.accumulate(
                np.maximum(tr["E_A"], e0))),
            "visc_L2t": np.sqrt(np.cumsum(tr["dq_visc"])),
            "ghost_L2t": np.sqrt(np.cumsum(tr["dq_ghost"])),
            "sup_u0": np.sqrt(np.maximum.accumulate(
                np.maximum(tr["u0_l2sq"], u00))),
            "u0_visc_L2t": np.sqrt(np.cumsum(tr["dq_u0visc"])),
        }
        bad = np.zeros(tr["t"].size, dtype=bool)
        for arr in running.values():
            bad |= arr > stable_cap
        hits = np.where(bad)[0]
        if hits.size:
            first_violation = float(tr["t"][hits[0]])

    K = ints["nz_L2HN"] / (eps * nu ** (-1.0 / 6.0)) if eps > 0 else 0.0
    return {
        "classification": classification,
        "first_violation": first_violation,
        "functionals": funcs,
        "thresholds": {"stable": stable_cap, "strong": strong_cap},
        "K_conclusion": float(K),
        "eps": eps,
        "nu": nu,
    }


def kinetic_transfer_residual(result: RunResult) -> dict:
    """Closure of d/dt |u0|^2/2 + nu |d_v u0|^2 = nonzero-mode flux.

    Valid for Couette-frame runs; per-step residual of the Runge-Kutta
    quadrature, normalized by the scale of the quantities involved.
    """
    tr = result.trace
    u0sq = np.concatenate([[result.initial.get("u0_l2sq", 0.0)], tr["u0_l2sq"]])
    r = 0.5 * np.diff(u0sq) + tr["dq_u0visc"] - tr["dq_u0flux"]
    scale = max(0.5 * float(np.max(u0sq)),
                float(np.sum(np.abs(tr["dq_u0flux"]))),
                float(np.sum(tr["dq_u0visc"])))
    if scale == 0.0:
        return {"max_raw": float(np.max(np.abs(r))) if r.size else 0.0,
                "max_norm": 0.0}
    return {"max_raw": float(np.max(np.abs(r))),
            "max_norm": float(np.max(np.abs(r))) / scale}
