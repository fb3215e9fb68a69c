"""Stability sweeps over (profile, nu, eps, seed) with boundary bisection.

The grid phase runs every configured cell; afterwards each (profile, nu)
lane whose tested amplitudes bracket the stability boundary is refined by
geometric bisection in the amplitude coefficient (eps = coeff * sqrt(nu)).
records.csv holds only deterministic per-cell facts so reruns are
byte-identical; wall times go to timings.csv.  The sweep summary is a
pure function of the records, so it can be rebuilt from records.csv.
"""

from __future__ import annotations

import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RunSettings
from .runner import _atomic_write_text, run_single, write_json

RECORD_COLUMNS = ("index", "phase", "profile", "nu", "seed", "eps_coeff",
                  "eps", "status", "classification", "exit_code", "sup_af",
                  "k_conclusion", "budget_max", "steps", "t_reached")

_STABLE = ("strong", "stable")


@dataclass(frozen=True)
class Cell:
    index: int
    phase: str
    profile: str
    nu: float
    seed: int
    eps_coeff: float

    @property
    def eps(self) -> float:
        return self.eps_coeff * self.nu**0.5


def _cell_raw(base_raw: dict, cell: Cell, t_final: str) -> dict:
    raw = {sec: dict(kv) for sec, kv in base_raw.items()}
    frame = "couette" if cell.profile == "couette" else "general"
    raw["run"]["frame"] = frame
    raw["run"]["nu"] = repr(cell.nu)
    raw["run"]["eps"] = repr(cell.eps)
    raw["run"]["seed"] = str(cell.seed)
    raw["run"]["label"] = f"cell{cell.index:04d}"
    raw["run"]["t_final"] = t_final
    raw["shear"]["profile"] = cell.profile
    return raw


def _run_cell(args) -> tuple[int, dict, float]:
    cell, base_raw, out_str, t_final = args
    settings = RunSettings(_cell_raw(base_raw, cell, t_final))
    cell_dir = Path(out_str) / "cells" / f"cell{cell.index:04d}"
    t0 = time.monotonic()
    code, summary = run_single(settings, outdir=cell_dir)
    wall = time.monotonic() - t0
    record = {
        "index": cell.index,
        "phase": cell.phase,
        "profile": cell.profile,
        "nu": cell.nu,
        "seed": cell.seed,
        "eps_coeff": cell.eps_coeff,
        "eps": cell.eps,
        "status": summary["status"],
        "classification": summary.get("classification", "none"),
        "exit_code": summary["exit_code"],
        "sup_af": summary.get("sups", {}).get("sup_Af", float("nan")),
        "k_conclusion": summary.get("bootstrap", {}).get("K_conclusion",
                                                         float("nan")),
        "budget_max": summary.get("budget_max", float("nan")),
        "steps": summary.get("steps", 0),
        "t_reached": summary.get("t_reached", float("nan")),
    }
    return cell.index, record, wall


def resolve_workers(settings: RunSettings) -> int:
    if settings.sweep_workers > 0:
        return settings.sweep_workers
    env = os.environ.get("SHEARLAB_WORKERS", "").strip()
    if env:
        try:
            n = int(env)
        except ValueError:
            n = 1
        return max(1, n)
    return 1


def _execute(cells, base_raw, out: Path, t_final: str, workers: int,
             echo) -> tuple[list[dict], dict]:
    args = [(c, base_raw, str(out), t_final) for c in cells]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_cell, args))
    else:
        results = [_run_cell(a) for a in args]
    records, timings = [], {}
    for index, record, wall in sorted(results, key=lambda r: r[0]):
        records.append(record)
        timings[index] = wall
        echo(f"  cell{index:04d} {record['profile']:>11s} nu={record['nu']:g} "
             f"seed={record['seed']} eps={record['eps']:.4g} "
             f"-> {record['classification']} ({wall:.1f}s)")
    return records, timings


def _lane_key(rec: dict) -> tuple:
    return (rec["profile"], rec["nu"])


def _lane_verdicts(records: list[dict]) -> dict:
    """Per (lane, eps_coeff): all-seed verdict, failures excluded."""
    table: dict = {}
    for rec in records:
        key = (_lane_key(rec), rec["eps_coeff"])
        table.setdefault(key, []).append(rec)
    verdicts = {}
    for key, recs in table.items():
        if any(r["status"] != "ok" for r in recs):
            verdicts[key] = "failed"
        elif all(r["classification"] in _STABLE for r in recs):
            verdicts[key] = "stable"
        else:
            verdicts[key] = "violated"
    return verdicts


def summarize_records(records: list[dict],
                      bisect_rounds: int = 0) -> dict:
    """Sweep summary derived from the record rows alone."""
    counts = {"strong": 0, "stable": 0, "violated": 0, "failed": 0}
    for rec in records:
        if rec["status"] != "ok":
            counts["failed"] += 1
        else:
            counts[rec["classification"]] += 1

    verdicts = _lane_verdicts(records)
    lanes = []
    lane_keys = sorted({_lane_key(r) for r in records},
                       key=lambda k: (k[0], k[1]))
    for lane in lane_keys:
        coeffs = sorted({c for (lk, c) in verdicts if lk == lane})
        stable = [c for c in coeffs if verdicts[(lane, c)] == "stable"]
        violated = [c for c in coeffs if verdicts[(lane, c)] == "violated"]
        lo = max(stable) if stable else None
        hi = min(violated) if violated else None
        bracketed = lo is not None and hi is not None and lo < hi
        boundary = float(np.sqrt(lo * hi)) if bracketed else None
        lanes.append({
            "profile": lane[0], "nu": lane[1],
            "coeffs_tested": coeffs,
            "stable_max": lo, "violated_min": hi,
            "bracketed": bracketed,
            "boundary_coeff": boundary,
            "boundary_eps": boundary * lane[1]**0.5 if bracketed else None,
            "note": None if bracketed else (
                "boundary above tested range" if hi is None
                else "boundary below tested range" if lo is None else None),
        })

    gamma_fits = {}
    for profile in sorted({ln["profile"] for ln in lanes}):
        pts = [(ln["nu"], ln["boundary_eps"]) for ln in lanes
               if ln["profile"] == profile and ln["bracketed"]]
        if len(pts) >= 2:
            lx = np.log([p[0] for p in pts])
            ly = np.log([p[1] for p in pts])
            coef = np.polyfit(lx, ly, 1)
            resid = float(np.sqrt(np.mean((np.polyval(coef, lx) - ly) ** 2)))
            gamma_fits[profile] = {"gamma": float(coef[0]),
                                   "residual": resid, "n_points": len(pts)}
        else:
            gamma_fits[profile] = {"skipped":
                                   "fewer than 2 bracketed lanes"}

    # classification must be monotone in eps within a lane and seed
    suspicious = []
    by_lane_seed: dict = {}
    for rec in records:
        if rec["status"] != "ok":
            continue
        by_lane_seed.setdefault((_lane_key(rec), rec["seed"]), []).append(rec)
    for (lane, seed), recs in sorted(by_lane_seed.items(),
                                     key=lambda kv: (kv[0][0], kv[0][1])):
        recs = sorted(recs, key=lambda r: r["eps"])
        seen_violated_eps = None
        for rec in recs:
            if rec["classification"] == "violated" and seen_violated_eps is None:
                seen_violated_eps = rec["eps"]
            elif (rec["classification"] in _STABLE
                  and seen_violated_eps is not None
                  and rec["eps"] > seen_violated_eps):
                suspicious.append({
                    "profile": lane[0], "nu": lane[1], "seed": seed,
                    "stable_eps": rec["eps"],
                    "violated_eps": seen_violated_eps,
                    "note": "stable above a violated amplitude"})

    ok = [r for r in records if r["status"] == "ok"]
    k_vals = [r["k_conclusion"] for r in ok
              if r["classification"] in _STABLE and np.isfinite(r["k_conclusion"])]
    return {
        "n_cells": len(records),
        "counts": counts,
        "lanes": lanes,
        "gamma_fits": gamma_fits,
        "suspicious": suspicious,
        "K_max_stable": max(k_vals) if k_vals else None,
        "bisect_rounds": bisect_rounds,
    }


def _records_text(records: list[dict]) -> str:
    lines = [",".join(RECORD_COLUMNS)]
    for rec in records:
        vals = []
        for col in RECORD_COLUMNS:
            v = rec[col]
            vals.append(repr(float(v)) if isinstance(v, float) else str(v))
        lines.append(",".join(vals))
    return "\n".join(lines) + "\n"


def read_records(path) -> list[dict]:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    out = []
    ints = {"index", "seed", "exit_code", "steps"}
    strs = {"phase", "profile", "status", "classification"}
    for row in rows:
        rec = {}
        for col, tok in zip(header, row):
            if col in ints:
                rec[col] = int(tok)
            elif col in strs:
                rec[col] = tok
            else:
                rec[col] = float(tok)
        out.append(rec)
    return out


def run_sweep(settings: RunSettings, outdir: str | Path | None = None,
              echo=None) -> tuple[int, dict]:
    """Grid phase, lane bisection, records, timings, summary."""
    say = echo if echo is not None else (lambda *_: None)
    out = Path(outdir) if outdir is not None else Path(settings.outdir)
    out.mkdir(parents=True, exist_ok=True)
    _atomic_write_text(out / "config.ini", settings.echo_ini())
    base_raw = settings.raw
    t_final = settings.sweep_t_final
    workers = resolve_workers(settings)

    cells = []
    idx = 0
    for profile in settings.sweep_profiles:
        for nu in settings.sweep_nus:
            for coeff in settings.sweep_eps_coeffs:
                for seed in settings.sweep_seeds:
                    cells.append(Cell(idx, "grid", profile, nu, seed, coeff))
                    idx += 1
    say(f"sweep: {len(cells)} grid cells, workers={workers}")
    records, timings = _execute(cells, base_raw, out, t_final, workers, say)

    # lane bisection between the largest stable and smallest violated coeff
    rounds = settings.sweep_bisect_rounds
    verdicts = _lane_verdicts(records)
    lanes = sorted({_lane_key(r) for r in records}, key=lambda k: (k[0], k[1]))
    for lane in lanes:
        coeffs = sorted({c for (lk, c) in verdicts if lk == lane})
        stable = [c for c in coeffs if verdicts[(lane, c)] == "stable"]
        violated = [c for c in coeffs if verdicts[(lane, c)] == "violated"]
        if not stable or not violated:
            continue
        lo, hi = max(stable), min(violated)
        if lo >= hi:
            continue
        say(f"bisect {lane[0]} nu={lane[1]:g}: [{lo:.4g}, {hi:.4g}]")
        for _ in range(rounds):
            mid = float(np.sqrt(lo * hi))
            batch = [Cell(idx + i, "bisect", lane[0], lane[1], seed, mid)
                     for i, seed in enumerate(settings.sweep_seeds)]
            idx += len(batch)
            recs, tms = _execute(batch, base_raw, out, t_final, workers, say)
            records.extend(recs)
            timings.update(tms)
            if any(r["status"] != "ok" for r in recs):
                break
            if all(r["classification"] in _STABLE for r in recs):
                lo = mid
            else:
                hi = mid

    records.sort(key=lambda r: r["index"])
    _atomic_write_text(out / "records.csv", _records_text(records))
    tlines = ["index,wall_time_sec"]
    tlines += [f"{i},{timings[i]:.3f}" for i in sorted(timings)]
    _atomic_write_text(out / "timings.csv", "\n".join(tlines) + "\n")

    summary = summarize_records(records, bisect_rounds=rounds)
    summary["workers"] = workers
    write_json(out / "summary.json", summary)

    code = 0 if summary["counts"]["failed"] == 0 else 1
    say(f"sweep done: {summary['counts']} -> exit {code}")
    return code, summary
