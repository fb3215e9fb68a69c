import json

import numpy as np
import pytest

import shearlab.runner as runner
from shearlab.checkpoint import read_checkpoint
from shearlab.config import load_config
from shearlab.runner import (
    EXIT_NUMERICAL,
    EXIT_OK,
    EXIT_RESOLUTION,
    EXIT_VIOLATION,
    SERIES_COLUMNS,
    load_series,
    run_single,
)
from conftest import QUICK


def test_run_directory_artifacts(quick_run_dir, quick_settings):
    out = quick_run_dir
    assert (out / "config.ini").exists()
    assert (out / "series.csv").exists()
    assert (out / "rates.json").exists()
    assert (out / "summary.json").exists()
    assert (out / "checkpoints" / "final.bin").exists()

    # config echo reloads to the same settings
    reloaded = load_config(str(out / "config.ini"))
    assert reloaded.echo_ini() == quick_settings.echo_ini()

    summary = json.loads((out / "summary.json").read_text())
    assert summary["status"] == "ok"
    assert summary["exit_code"] == EXIT_OK
    assert summary["classification"] in ("strong", "stable")
    assert summary["budget_max"] < 1e-6
    assert summary["kinetic_transfer"]["max_norm"] < 1e-10
    assert summary["steps"] == 20
    assert summary["t_reached"] == pytest.approx(2.0)

    # final checkpoint carries the run metadata
    field, meta = read_checkpoint(out / "checkpoints" / "final.bin")
    assert meta["t"] == pytest.approx(2.0)
    assert meta["nu"] == pytest.approx(1e-2)
    assert meta["frame"] == "couette"
    assert field.grid.n_z == 32

    rates = json.loads((out / "rates.json").read_text())
    assert "skipped" in rates["enhanced_dissipation"]  # T=2 < 3 nu^(-1/3)


def test_series_roundtrip(quick_run_dir):
    series = load_series(quick_run_dir / "series.csv")
    assert set(series) == set(SERIES_COLUMNS)
    assert series["t"][0] == 0.0
    assert series["t"][-1] == pytest.approx(2.0)
    assert series["t"].size == 5  # stored every 5 steps of 20, plus t=0
    assert np.all(np.diff(series["t"]) > 0)
    assert np.all(series["E_A"] > 0)
    assert series["budget_residual"][0] == 0.0
    assert np.all(series["budget_residual"][1:] < 1e-6)


def test_series_byte_determinism(tmp_path, quick_settings, quick_run_dir):
    out = tmp_path / "again"
    code, _ = run_single(quick_settings, outdir=out)
    assert code == EXIT_OK
    assert (out / "series.csv").read_bytes() == \
        (quick_run_dir / "series.csv").read_bytes()
    assert (out / "checkpoints" / "final.bin").read_bytes() == \
        (quick_run_dir / "checkpoints" / "final.bin").read_bytes()
    # summary differs only through wall_time_sec
    a = json.loads((out / "summary.json").read_text())
    b = json.loads((quick_run_dir / "summary.json").read_text())
    a.pop("wall_time_sec"), b.pop("wall_time_sec")
    assert a == b


def test_violation_maps_to_exit_2(tmp_path, quick_settings, monkeypatch):
    def fake_bootstrap(result, eps, nu):
        return {"classification": "violated", "first_violation": 0.5,
                "functionals": {}, "thresholds": {}, "K_conclusion": 0.0,
                "eps": eps, "nu": nu}

    monkeypatch.setattr(runner, "check_bootstrap", fake_bootstrap)
    code, summary = run_single(quick_settings, outdir=tmp_path / "v")
    assert code == EXIT_VIOLATION
    assert summary["classification"] == "violated"


def test_resolution_failure_artifacts(tmp_path):
    settings = load_config(None, [
        "run.nu=1e-6", "run.eps=1e-3", "run.t_final=3.0",
        "grid.n_z=32", "grid.n_v=128", "grid.l_v=16.0",
        "data.kind=single_mode", "data.k=6", "data.q=0",
        "solver.dt=0.1", "solver.dt_policy=fixed", "solver.nonlinear=false",
        "solver.store_every=5",
    ])
    out = tmp_path / "resfail"
    code, summary = run_single(settings, outdir=out)
    assert code == EXIT_RESOLUTION
    assert summary["status"] == "ResolutionError"
    assert "shear-resolution exhausted" in summary["error"]
    assert 0.0 < summary["t_reached"] <= 3.0

    # partial artifacts still land on disk
    field, meta = read_checkpoint(out / "checkpoints" / "final.bin")
    assert meta["t"] == pytest.approx(summary["t_reached"])
    series = load_series(out / "series.csv")
    assert series["t"].size >= 1
    rates = json.loads((out / "rates.json").read_text())
    assert "skipped" in rates
    assert json.loads((out / "summary.json").read_text())["exit_code"] == 3


def test_blowup_maps_to_exit_1(tmp_path, monkeypatch):
    from shearlab.errors import BlowupError

    def explode(cfg, f0, on_checkpoint=None):
        raise BlowupError("NaN/Inf in the state at t=0.1")

    monkeypatch.setattr(runner, "run_simulation", explode)
    settings = load_config(None, QUICK)
    code, summary = run_single(settings, outdir=tmp_path / "b")
    assert code == EXIT_NUMERICAL
    assert summary["status"] == "BlowupError"
    # no state attached, so no final checkpoint; summary still written
    assert not (tmp_path / "b" / "checkpoints" / "final.bin").exists()
    assert (tmp_path / "b" / "summary.json").exists()


def test_rate_fit_on_long_linear_run(tmp_path):
    # single Kelvin mode (1, 0) decays like exp(-nu t^3/3): c fits to 1/3
    settings = load_config(None, [
        "run.nu=1e-2", "run.eps=1e-3", "run.t_final=16.0",
        "grid.n_z=8", "grid.n_v=192", "grid.l_v=16.0",
        "data.kind=single_mode", "data.k=1", "data.q=0",
        "solver.dt=0.25", "solver.dt_policy=fixed", "solver.store_every=4",
    ])
    out = tmp_path / "lin"
    code, summary = run_single(settings, outdir=out)
    assert code == EXIT_OK
    rates = json.loads((out / "rates.json").read_text())
    fit = rates["enhanced_dissipation"]
    assert fit["value"] == pytest.approx(1.0 / 3.0, abs=0.05)
    assert fit["t_efold"] == pytest.approx(6.546, abs=0.15)
    assert fit["efold_over_heat"] < 1.0


def test_echo_callback(tmp_path, quick_settings):
    lines = []
    run_single(quick_settings, outdir=tmp_path / "e", echo=lambda m: lines.append(m))
    assert len(lines) == 2
    assert "frame=couette" in lines[0]
    assert "strong" in lines[1] or "stable" in lines[1]
