"""Acceptance battery: nine gates, one printed verdict line each.

Run with `pytest tests/test_acceptance.py -v -s` to stream the verdict
lines; each test prints `[A#] PASS/FAIL - detail` before asserting.
"""

import json
import time

import numpy as np
import pytest
from scipy.optimize import brentq

from shearlab.config import load_config
from shearlab.checkpoint import read_checkpoint, write_checkpoint
from shearlab.diagnostics import budget_residual, efold_time_from_series
from shearlab.kelvin import (
    KelvinMode,
    default_fit_window,
    inviscid_damping_check,
    orr_amplification,
    viscous_exponent,
    viscous_exponent_quad,
)
from shearlab.multiplier import ode_crosscheck, verify_conditions
from shearlab.runner import run_single
from shearlab.shear import (
    chain_rule_residual,
    couette,
    gauss_bump,
    heat_norm_budget,
    roundtrip_error,
    shear_state,
)
from shearlab.solver import DataSpec, SolverConfig, initial_data, run_simulation
from shearlab.spectral import FrequencyGrid, SpectralField
from shearlab.sweep import read_records, run_sweep


def report(tag: str, ok: bool, detail: str) -> None:
    line = f"[{tag}] {'PASS' if ok else 'FAIL'} - {detail}"
    print("\n" + line, flush=True)
    assert ok, line


# -- A1: multiplier conditions ------------------------------------------------


def test_a1_multiplier_conditions():
    t0 = time.monotonic()
    grid = FrequencyGrid(64, 256, 16.0)
    passed = []
    consts = []
    worst_ode = 0.0
    for nu in (1e-1, 1e-2, 1e-3):
        rep = verify_conditions(grid, nu, 2.0)
        passed.append(rep["passed"])
        c = rep["conditions"]
        consts.append((c["d"]["C_d"], c["e"]["C_e"], c["f"]["C_f"]))
        worst_ode = max(worst_ode, ode_crosscheck(nu))
    wall = time.monotonic() - t0
    ok = all(passed) and worst_ode <= 1e-8 and wall < 60.0
    worst = tuple(max(col) for col in zip(*consts))
    report("A1", ok,
           f"conditions (a)-(f) hold at nu=1e-1,1e-2,1e-3 on 64x256; "
           f"worst C_d={worst[0]:.3f} C_e={worst[1]:.3f} C_f={worst[2]:.3f}; "
           f"ode rel err {worst_ode:.2e} (<=1e-8); wall {wall:.1f}s (<60s)")


# -- A2: closed-form linear oracle --------------------------------------------


def test_a2_kelvin_oracle():
    worst = 0.0
    for k in (1, 2, 5):
        for eta0 in range(-10, 11):
            for t in (0.1, 1.0, 10.0):
                a = viscous_exponent(k, float(eta0), t)
                b = viscous_exponent_quad(k, float(eta0), t)
                worst = max(worst, abs(a - b) / max(abs(a), 1e-300))
    battery_ok = worst <= 1e-10

    mode = KelvinMode(1, 10.0, nu=0.0)
    lo, hi = default_fit_window(mode.t_crit)
    fit = inviscid_damping_check(mode, np.linspace(lo, hi, 200))
    slopes_ok = (abs(fit["psi_slope"] + 2.0) <= 0.05
                 and abs(fit["dy_psi_slope"] + 1.0) <= 0.05)

    orr = orr_amplification(1, 10.0)
    orr_ok = abs(orr - 101.0) <= 1e-12 * 101.0

    ok = battery_ok and slopes_ok and orr_ok
    report("A2", ok,
           f"exponent battery worst rel {worst:.2e} (<=1e-10); "
           f"slopes psi {fit['psi_slope']:+.4f} (-2+-0.05) "
           f"dy_psi {fit['dy_psi_slope']:+.4f} (-1+-0.05); "
           f"Orr {orr:.12g} (=101 rel 1e-12)")


# -- A3: solver against the closed form ---------------------------------------


def test_a3_solver_vs_oracle():
    t0 = time.monotonic()
    nu, eps = 1e-2, 1e-6
    grid = FrequencyGrid(128, 512, 32.0)
    T = 2.0 * nu ** (-1.0 / 3.0)
    f0 = initial_data(DataSpec(kind="single_mode", k=1, q=0), grid, eps, 0, 2.0)
    cfg = SolverConfig(frame="couette", nu=nu, grid=grid, T_final=T, N=2.0,
                       dt=0.1, dt_policy="cfl", store_every=50)
    res = run_simulation(cfg, f0)

    exact = np.zeros_like(f0.coeffs)
    i, j = grid.index_of(1, 0)
    exact[i, j] = f0.coeffs[i, j] * np.exp(
        -nu * viscous_exponent(1, 0.0, res.state.t))
    rel = (np.linalg.norm(res.state.f.coeffs - exact)
           / np.linalg.norm(exact))
    wall = time.monotonic() - t0
    ok = rel <= 1e-3 and wall < 300.0
    report("A3", ok,
           f"single mode (1,0) at 128x512, T={T:.2f}, {res.steps} CFL steps: "
           f"rel L2 error {rel:.2e} (<=1e-3); wall {wall:.1f}s (<300s)")


# -- A4: enhanced dissipation scaling ------------------------------------------


def test_a4_enhanced_dissipation_scaling():
    # independent root solve of nu*(t + t^3/3) = 1 for mode (1, 0)
    frozen = {1e-2: 6.545, 1e-3: 14.353, 1e-4: 31.040}
    horizons = {1e-2: 14.0, 1e-3: 30.0, 1e-4: 34.0}
    grid = FrequencyGrid(8, 384, 16.0)
    measured = {}
    for nu, T in horizons.items():
        target = brentq(lambda t: nu * (t + t**3 / 3.0) - 1.0, 0.0, 1e4)
        assert abs(target - frozen[nu]) <= 1e-3
        f0 = initial_data(DataSpec(kind="single_mode", k=1, q=0), grid,
                          1e-3, 0, 2.0)
        cfg = SolverConfig(frame="couette", nu=nu, grid=grid, T_final=T,
                           N=2.0, dt=0.25, dt_policy="fixed",
                           nonlinear=False, store_every=1000)
        res = run_simulation(cfg, f0)
        t_arr = np.concatenate([[0.0], res.trace["t"]])
        y = np.sqrt(np.concatenate([[res.initial["nz_L2sq"]],
                                    res.trace["nz_L2sq"]]))
        t_e = efold_time_from_series(t_arr, y)
        assert t_e == pytest.approx(target, rel=1e-3)
        measured[nu] = t_e

    nus = np.array(sorted(measured))
    tes = np.array([measured[nu] for nu in nus])
    slope = float(np.polyfit(np.log(nus), np.log(tes), 1)[0])
    slope_ok = abs(slope + 1.0 / 3.0) <= 0.05
    heat_ok = measured[1e-4] <= 0.5 * 1e-4 ** -0.5
    ok = slope_ok and heat_ok
    report("A4", ok,
           f"t_e = {measured[1e-2]:.3f}/{measured[1e-3]:.3f}/"
           f"{measured[1e-4]:.3f} at nu=1e-2/1e-3/1e-4 "
           f"(root-solve targets 6.545/14.353/31.040); "
           f"log-log slope {slope:+.4f} (-1/3+-0.05); "
           f"t_e(1e-4) {measured[1e-4]:.2f} <= 50 = 0.5 nu^(-1/2)")


# -- A5: energy budget closure --------------------------------------------------


def test_a5_budget_closure(quick_result):
    res1 = quick_result  # eps=1e-3, nu=1e-2, random_band seed 7, dt=0.1
    rep1 = budget_residual(res1)

    grid = res1.config.grid
    f0 = initial_data(DataSpec(kind="random_band"), grid, 1e-3, 7, 2.0)
    cfg2 = SolverConfig(frame="couette", nu=1e-2, grid=grid, T_final=2.0,
                        N=2.0, dt=0.05, dt_policy="fixed")
    res2 = run_simulation(cfg2, f0)
    rep2 = budget_residual(res2)

    ratio = (np.max(np.abs(res1.trace["r_raw"]))
             / np.max(np.abs(res2.trace["r_raw"])))
    ok = rep1["max_norm"] <= 1e-4 and ratio >= 8.0
    report("A5", ok,
           f"normalized residual {rep1['max_norm']:.2e} (<=1e-4) at dt=0.1; "
           f"raw residual drops x{ratio:.1f} (>=8, order 4) on dt halving "
           f"(dt=0.05 residual {rep2['max_norm']:.2e})")


# -- A6: general frame reduction ------------------------------------------------


def test_a6_general_frame_reduction():
    grid = FrequencyGrid(32, 256, 16.0)
    nu, eps = 1e-2, 1e-3
    f0 = initial_data(DataSpec(kind="random_band"), grid, eps, 7, 2.0)

    base = dict(nu=nu, grid=grid, T_final=2.0, N=2.0, dt=0.02,
                dt_policy="fixed", store_every=100)
    res_c = run_simulation(SolverConfig(frame="couette", **base), f0)
    res_g = run_simulation(SolverConfig(frame="general",
                                        shear=couette(grid), **base), f0)
    scale = float(np.max(np.abs(res_c.state.f.coeffs)))
    mismatch = float(np.max(np.abs(res_c.state.f.coeffs
                                   - res_g.state.f.coeffs))) / scale
    reduction_ok = mismatch <= 1e-10 and res_c.steps == 100

    prof = gauss_bump(grid, delta=0.01)
    res_s = run_simulation(
        SolverConfig(frame="general", nu=nu, grid=grid, T_final=1.0, N=2.0,
                     dt=0.05, dt_policy="fixed", shear=prof, store_every=100),
        f0)
    contraction = res_s.elliptic["max_contraction"]
    elliptic_ok = contraction <= 0.2

    chain = max(chain_rule_residual(shear_state(prof, nu, t))
                for t in (0.0, 1.0))
    rt = max(roundtrip_error(shear_state(prof, nu, t)) for t in (0.0, 1.0))
    maps_ok = chain <= 1e-8 and rt <= 1e-10

    ok = reduction_ok and elliptic_ok and maps_ok
    report("A6", ok,
           f"delta=0 general vs couette over 100 steps: {mismatch:.2e} "
           f"(<=1e-10); elliptic contraction {contraction:.2e} (<=0.2); "
           f"chain rule {chain:.2e} (<=1e-8); roundtrip {rt:.2e} (<=1e-10)")


# -- A7: threshold stability sweep -----------------------------------------------


def test_a7_threshold_stability(tmp_path):
    t0 = time.monotonic()
    coeff = 0.05
    settings = load_config(None, [
        "grid.n_z=32", "grid.n_v=768", "grid.l_v=16.0",
        "shear.delta=0.01",
        "sweep.nus=1e-3,3e-3,1e-2",
        "sweep.profiles=couette,gauss_bump",
        "sweep.seeds=1,2,3",
        f"sweep.eps_coeffs={coeff}",
        "sweep.t_final=auto",
        "sweep.bisect_rounds=0",
        "sweep.workers=0",
    ])
    out = tmp_path / "sweep"
    code, summary = run_sweep(settings, outdir=out)
    records = read_records(out / "records.csv")
    wall = time.monotonic() - t0

    all_ok = all(r["status"] == "ok" for r in records)
    all_stable = all(r["classification"] in ("strong", "stable")
                     for r in records)
    k_max = summary["K_max_stable"]
    ok = (code == 0 and summary["n_cells"] == 18 and all_ok and all_stable
          and k_max is not None and 0.0 < k_max < np.inf and wall < 3600.0)
    report("A7", ok,
           f"18/18 cells stable (nu in 1e-3,3e-3,1e-2; couette+gauss_bump "
           f"delta=0.01; eps=0.05 sqrt(nu); seeds 1,2,3); "
           f"K = |f_neq|_L2tHN / (eps nu^-1/6) <= {k_max:.3f}; "
           f"wall {wall:.0f}s (<3600s)")


# -- A8: heat semigroup budget ----------------------------------------------------


def test_a8_heat_budget():
    from scipy.integrate import quad

    grid = FrequencyGrid(16, 256, 16.0)
    prof = gauss_bump(grid, delta=0.01)
    sup_ok, mono_ok = True, True
    worst_mode = 0.0
    k_vals = {}
    for nu in (1e-2, 1e-3):
        T = 3.0 * nu ** (-1.0 / 3.0)
        rep = heat_norm_budget(prof, nu, T)
        sup_ok &= rep["ineq_up"] and rep["ineq_upp"] and rep["sup_attained_at_0"]
        mono_ok &= rep["monotone"]
        k_vals[nu] = rep["K"]

        # closed form of the per-mode time integral vs adaptive quadrature
        for eta in np.unique(np.abs(grid.eta[np.abs(grid.q) <= grid.q_cut])):
            if eta == 0.0:
                continue
            rate = 2.0 * nu * eta**2
            closed = (1.0 - np.exp(-rate * T)) / rate
            num, _ = quad(lambda t: np.exp(-rate * t), 0.0, T,
                          limit=200, epsabs=1e-14, epsrel=1e-12)
            worst_mode = max(worst_mode, abs(num - closed) / closed)
    modes_ok = worst_mode <= 1e-8
    k_ok = all(0.0 < k <= 2.0 for k in k_vals.values())

    ok = sup_ok and mono_ok and modes_ok and k_ok
    report("A8", ok,
           f"sup norms attained at t=0 and monotone at nu=1e-2,1e-3; "
           f"per-mode time integral vs quadrature worst rel {worst_mode:.2e} "
           f"(<=1e-8); |Ubar''|_L2tHs = K delta nu^-1/2 with "
           f"K={k_vals[1e-2]:.3f}/{k_vals[1e-3]:.3f}")


# -- A9: determinism and persistence ----------------------------------------------


def test_a9_determinism(tmp_path, rng):
    overrides = [
        "grid.n_z=32", "grid.n_v=128", "grid.l_v=16.0",
        "solver.dt=0.1", "solver.dt_policy=fixed",
        "sweep.nus=1e-2", "sweep.eps_coeffs=0.02", "sweep.seeds=1,2",
        "sweep.t_final=2.0", "sweep.bisect_rounds=0",
    ]
    outs = []
    for name in ("first", "second"):
        out = tmp_path / name
        code, _ = run_sweep(load_config(None, list(overrides)), outdir=out)
        assert code == 0
        outs.append(out)
    rec_same = (outs[0] / "records.csv").read_bytes() == \
        (outs[1] / "records.csv").read_bytes()
    cell = ("cells", "cell0000", "checkpoints", "final.bin")
    ck_same = outs[0].joinpath(*cell).read_bytes() == \
        outs[1].joinpath(*cell).read_bytes()

    g = FrequencyGrid(16, 64, 12.0)
    f = SpectralField(g, rng.standard_normal((16, 64))
                      + 1j * rng.standard_normal((16, 64)))
    path = tmp_path / "state.bin"
    write_checkpoint(path, f, t=1.5, nu=1e-3, N=2.0, frame="couette")
    back, meta = read_checkpoint(path)
    rt_same = np.array_equal(back.coeffs, f.coeffs) and meta["t"] == 1.5

    ok = rec_same and ck_same and rt_same
    report("A9", ok,
           f"sweep rerun: records byte-identical {rec_same}, final "
           f"checkpoint byte-identical {ck_same}; checkpoint round trip "
           f"bit-exact {rt_same}")
