import numpy as np

from shearlab.cli import main
from shearlab.plots import plot_linear, plot_run, plot_sweep
from shearlab.sweep import _records_text


def test_plot_run(quick_run_dir, tmp_path):
    written = plot_run(quick_run_dir, out_dir=tmp_path)
    assert written == [str(tmp_path / "run.png")]
    assert (tmp_path / "run.png").stat().st_size > 1000


def test_plot_linear(tmp_path):
    csv = tmp_path / "lin.csv"
    assert main(["linear", "--k", "1", "--eta0", "5.0", "--nu", "1e-3",
                 "--samples", "401", "-q", "--out", str(csv)]) == 0
    written = plot_linear(csv, out_path=tmp_path / "lin.png")
    assert written == [str(tmp_path / "lin.png")]
    assert (tmp_path / "lin.png").stat().st_size > 1000


def test_plot_sweep(tmp_path):
    recs = []
    i = 0
    for nu in (1e-3, 1e-2):
        for coeff, cls, code in ((0.02, "strong", 0), (0.08, "violated", 2)):
            recs.append({
                "index": i, "phase": "grid", "profile": "couette", "nu": nu,
                "seed": 1, "eps_coeff": coeff, "eps": coeff * nu**0.5,
                "status": "ok", "classification": cls, "exit_code": code,
                "sup_af": 1e-3, "k_conclusion": 0.4, "budget_max": 1e-9,
                "steps": 10, "t_reached": 2.0,
            })
            i += 1
    path = tmp_path / "records.csv"
    path.write_text(_records_text(recs))
    written = plot_sweep(path)
    assert written == [str(tmp_path / "sweep.png")]
    assert (tmp_path / "sweep.png").stat().st_size > 1000


def test_plot_cli_on_run(quick_run_dir, capsys):
    assert main(["plot", "--run", str(quick_run_dir)]) == 0
    assert "run.png" in capsys.readouterr().out
