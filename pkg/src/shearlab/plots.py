"""Headless figures from run, sweep, and closed-form artifacts."""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .runner import load_series
from .sweep import read_records


def plot_run(run_dir, out_dir=None) -> list[str]:
    """Energy decay, dissipation channels, and budget residual panels."""
    run_dir = Path(run_dir)
    out_dir = Path(out_dir) if out_dir is not None else run_dir
    series = load_series(run_dir / "series.csv")
    t = series["t"]

    rates = {}
    rates_path = run_dir / "rates.json"
    if rates_path.exists():
        rates = json.loads(rates_path.read_text())
    nu = None
    summary_path = run_dir / "summary.json"
    if summary_path.exists():
        nu = json.loads(summary_path.read_text()).get("nu")

    fig, axes = plt.subplots(2, 2, figsize=(11, 8))
    ax = axes[0, 0]
    ax.semilogy(t, np.maximum(series["E_A"], 1e-300), label="E_A")
    ax.semilogy(t, np.maximum(series["nz_HN"] ** 2, 1e-300),
                label="|f_neq|_HN^2")
    fit = rates.get("enhanced_dissipation", {})
    if nu is not None and "value" in fit and series["nz_HN"][0] > 0:
        env = (series["nz_HN"][0] ** 2
               * np.exp(-2.0 * fit["value"] * nu * t**3))
        ax.semilogy(t, np.maximum(env, 1e-300), "k--",
                    label=f"exp(-2c nu t^3), c={fit['value']:.3g}")
    ax.set_xlabel("t")
    ax.set_title("weighted energy decay")
    ax.legend()

    ax = axes[0, 1]
    ax.semilogy(t, np.maximum(series["D_visc"], 1e-300), label="D_visc")
    ax.semilogy(t, np.maximum(series["D_ghost"], 1e-300), label="D_ghost")
    ax.set_xlabel("t")
    ax.set_title("dissipation channels")
    ax.legend()

    ax = axes[1, 0]
    ax.semilogy(t, np.maximum(series["budget_residual"], 1e-300))
    ax.set_xlabel("t")
    ax.set_title("normalized budget residual")

    ax = axes[1, 1]
    ax.semilogy(t, np.maximum(series["u0_L2"], 1e-300), label="|u0|")
    ax.semilogy(t, np.maximum(series["psi_nz"], 1e-300), label="|psi_neq|")
    ax.set_xlabel("t")
    ax.set_title("zero-mode flow and stream function")
    ax.legend()

    fig.tight_layout()
    out = out_dir / "run.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [str(out)]


def plot_linear(csv_path, out_path=None) -> list[str]:
    """Closed-form mode history with the inviscid-damping slope guides."""
    csv_path = Path(csv_path)
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    meta = {}
    meta_path = csv_path.with_suffix(".json")
    if meta_path.exists():
        meta = json.loads(meta_path.read_text())
    t = np.asarray(data["t"], dtype=float)
    t_crit = float(meta.get("t_crit", 0.0))
    x = np.sqrt(1.0 + (t - t_crit) ** 2)

    fig, axes = plt.subplots(1, 2, figsize=(11, 4.5))
    ax = axes[0]
    names = [("psi", "|psi|"), ("dz_psi", "|dz psi|"), ("dy_psi", "|dy psi|")]
    for key, label in names:
        ax.loglog(x, np.maximum(data[key], 1e-300), label=label)
    for slope, y0 in ((-2.0, data["psi"][0]), (-1.0, data["dy_psi"][0])):
        ax.loglog(x, y0 * (x / x[0]) ** slope, "k:",
                  label=f"slope {slope:g}")
    ax.set_xlabel("<t - t_crit>")
    ax.set_title("inviscid damping")
    ax.legend(fontsize=8)

    ax = axes[1]
    ax.semilogy(t, np.maximum(data["omega"], 1e-300), label="|omega|")
    ax.semilogy(t, np.maximum(data["envelope"] * data["omega"][0], 1e-300),
                "k--", label="cubic-exponent envelope")
    ax.set_xlabel("t")
    ax.set_title("vorticity amplitude")
    ax.legend()

    fig.tight_layout()
    out = Path(out_path) if out_path is not None else csv_path.with_suffix(".png")
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [str(out)]


def plot_sweep(records_path, out_path=None) -> list[str]:
    """Stability map in the (nu, eps) plane, one marker per cell."""
    records_path = Path(records_path)
    records = read_records(records_path)
    colors = {"strong": "tab:green", "stable": "tab:olive",
              "violated": "tab:red", "none": "tab:gray"}
    markers = {}
    profiles = sorted({r["profile"] for r in records})
    for i, p in enumerate(profiles):
        markers[p] = "osD^v"[i % 5]

    fig, ax = plt.subplots(figsize=(7, 5))
    seen = set()
    for rec in records:
        cls = rec["classification"] if rec["status"] == "ok" else "none"
        label = f"{rec['profile']} {cls}"
        ax.scatter(rec["nu"], rec["eps"], c=colors.get(cls, "tab:gray"),
                   marker=markers[rec["profile"]], s=36,
                   label=label if label not in seen else None)
        seen.add(label)
    nus = sorted({r["nu"] for r in records})
    guide = np.asarray(nus, dtype=float)
    ax.plot(guide, 0.05 * np.sqrt(guide), "k--", lw=1,
            label="0.05 sqrt(nu)")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("nu")
    ax.set_ylabel("eps")
    ax.set_title("stability sweep")
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(out_path) if out_path is not None \
        else records_path.parent / "sweep.png"
    fig.savefig(out, dpi=120)
    plt.close(fig)
    return [str(out)]
