"""Single-run orchestration: artifacts, diagnostics, exit codes.

A run directory contains config.ini (full echo, defaults included),
series.csv (stored diagnostic frames), rates.json (decay-rate fits),
summary.json (classification and integrals), and checkpoints/ with at
least the final state.  Exit codes: 0 stable or strongly stable, 2
bootstrap violated, 1 NaN or step-size collapse, 3 resolution guard,
4 elliptic solver failure.
"""

from __future__ import annotations

import json
import os
import time
from pathlib import Path

import numpy as np

from .checkpoint import write_checkpoint
from .config import RunSettings
from .diagnostics import (
    budget_residual,
    check_bootstrap,
    fit_enhanced_dissipation,
    kinetic_transfer_residual,
)
from .errors import BlowupError, EllipticError, ResolutionError
from .solver import initial_data, run_simulation
from .spectral import SpectralField

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_VIOLATION = 2
EXIT_RESOLUTION = 3
EXIT_ELLIPTIC = 4

SERIES_COLUMNS = ("t", "E_A", "D_visc", "D_ghost", "nz_HN", "z_HN",
                  "psi_nz", "u0_L2", "budget_residual")


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = str(path) + ".tmp"
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def write_json(path: Path, payload: dict) -> None:
    _atomic_write_text(path, json.dumps(_jsonable(payload), indent=2,
                                        sort_keys=True) + "\n")


def series_text(stored: dict, e_max: float) -> str:
    """CSV text for the stored frames; floats via repr for determinism."""
    lines = [",".join(SERIES_COLUMNS)]
    n = len(stored["t"])
    for i in range(n):
        dt = float(stored["dt"][i])
        r = float(stored["r_raw"][i])
        resid = abs(r) / (dt * e_max) if dt > 0 and e_max > 0 else 0.0
        row = [float(stored[c][i]) for c in SERIES_COLUMNS[:-1]] + [resid]
        lines.append(",".join(repr(x) for x in row))
    return "\n".join(lines) + "\n"


def _write_series(outdir: Path, stored: dict) -> None:
    e_arr = np.asarray(stored["E_A"], dtype=float)
    e_max = float(np.max(e_arr)) if e_arr.size else 0.0
    _atomic_write_text(outdir / "series.csv", series_text(stored, e_max))


def run_single(settings: RunSettings, outdir: str | Path | None = None,
               echo=None) -> tuple[int, dict]:
    """Execute one configuration and write its artifact directory."""
    say = echo if echo is not None else (lambda *_: None)
    out = Path(outdir) if outdir is not None else Path(settings.outdir)
    out.mkdir(parents=True, exist_ok=True)
    ckdir = out / "checkpoints"
    ckdir.mkdir(exist_ok=True)
    _atomic_write_text(out / "config.ini", settings.echo_ini())

    grid = settings.build_grid()
    profile = settings.build_profile(grid)
    cfg = settings.build_solver_config(grid, profile)
    f0 = initial_data(settings.build_dataspec(), grid, settings.eps,
                      settings.seed, settings.N)

    counter = {"n": 0}

    def on_checkpoint(t, field):
        counter["n"] += 1
        write_checkpoint(ckdir / f"ckpt_{counter['n']:06d}.bin", field, t,
                         settings.nu, settings.N, settings.frame)

    say(f"[{settings.label}] frame={settings.frame} nu={settings.nu:g} "
        f"eps={settings.eps:g} grid={grid.n_z}x{grid.n_v} T={cfg.T_final:g}")
    t0 = time.monotonic()
    summary = {
        "label": settings.label,
        "frame": settings.frame,
        "nu": settings.nu,
        "eps": settings.eps,
        "N": settings.N,
        "seed": settings.seed,
        "grid": {"n_z": grid.n_z, "n_v": grid.n_v, "L_v": grid.L_v},
        "profile": settings.profile_name,
        "delta": settings.delta if settings.frame == "general" else 0.0,
        "data_kind": settings.data_kind,
        "T_final": cfg.T_final,
    }

    try:
        result = run_simulation(cfg, f0, on_checkpoint=on_checkpoint)
    except (ResolutionError, EllipticError, BlowupError) as exc:
        wall = time.monotonic() - t0
        code = {ResolutionError: EXIT_RESOLUTION,
                EllipticError: EXIT_ELLIPTIC,
                BlowupError: EXIT_NUMERICAL}[type(exc)]
        summary.update(status=type(exc).__name__, error=str(exc),
                       exit_code=code, wall_time_sec=wall)
        state = getattr(exc, "state", None)
        if state is not None:
            write_checkpoint(ckdir / "final.bin", state.f, state.t,
                             settings.nu, settings.N, settings.frame)
            summary["t_reached"] = state.t
            summary["steps"] = state.step
        stored = getattr(exc, "stored_partial", None)
        if stored is not None and stored["t"]:
            _write_series(out, {k: np.asarray(v) for k, v in stored.items()})
        write_json(out / "rates.json", {"skipped": str(exc)})
        write_json(out / "summary.json", summary)
        say(f"[{settings.label}] FAILED ({summary['status']}): {exc}")
        return code, summary

    wall = time.monotonic() - t0
    write_checkpoint(ckdir / "final.bin", result.state.f, result.state.t,
                     settings.nu, settings.N, settings.frame)
    _write_series(out, result.stored)

    budget = budget_residual(result)
    boot = check_bootstrap(result, settings.eps, settings.nu)
    kinetic = None
    if settings.frame == "couette" and cfg.nonlinear:
        kinetic = kinetic_transfer_residual(result)

    rates: dict = {}
    t_arr = np.concatenate([[0.0], result.trace["t"]])
    nz_l2 = np.sqrt(np.concatenate([[result.initial["nz_L2sq"]],
                                    result.trace["nz_L2sq"]]))
    try:
        fit = fit_enhanced_dissipation(t_arr, nz_l2, settings.nu)
        rates["enhanced_dissipation"] = fit.as_dict()
    except ValueError as err:
        rates["enhanced_dissipation"] = {"skipped": str(err)}
    write_json(out / "rates.json", rates)

    code = EXIT_OK if boot["classification"] in ("strong", "stable") \
        else EXIT_VIOLATION
    summary.update(
        status="ok",
        exit_code=code,
        classification=boot["classification"],
        bootstrap=boot,
        budget_max=budget["max_norm"],
        kinetic_transfer=kinetic,
        integrals=result.integrals,
        sups=result.sups,
        elliptic=result.elliptic,
        steps=result.steps,
        t_reached=result.state.t,
        wall_time_sec=wall,
    )
    write_json(out / "summary.json", summary)
    say(f"[{settings.label}] {boot['classification']} "
        f"(steps={result.steps}, wall={wall:.1f}s, "
        f"budget={budget['max_norm']:.2e})")
    return code, summary


def load_series(path: str | Path) -> dict:
    """Read back a series.csv into column arrays."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    if data.shape == ():
        data = data.reshape(1)
    return {name: np.asarray(data[name], dtype=float)
            for name in data.dtype.names}
