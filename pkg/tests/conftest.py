import numpy as np
import pytest

from shearlab.config import load_config
from shearlab.runner import run_single
from shearlab.solver import DataSpec, SolverConfig, initial_data, run_simulation
from shearlab.spectral import FrequencyGrid

QUICK = [
    "run.nu=1e-2", "run.eps=1e-3", "run.t_final=2.0", "run.seed=7",
    "grid.n_z=32", "grid.n_v=256", "grid.l_v=16.0",
    "solver.dt=0.1", "solver.dt_policy=fixed", "solver.store_every=5",
]


@pytest.fixture(scope="session")
def quick_settings():
    return load_config(None, list(QUICK))


@pytest.fixture(scope="session")
def quick_run_dir(tmp_path_factory, quick_settings):
    out = tmp_path_factory.mktemp("quickrun")
    code, summary = run_single(quick_settings, outdir=out)
    assert code == 0, summary
    return out


@pytest.fixture(scope="session")
def quick_result():
    grid = FrequencyGrid(32, 256, 16.0)
    f0 = initial_data(DataSpec(kind="random_band"), grid, 1e-3, 7, 2.0)
    cfg = SolverConfig(frame="couette", nu=1e-2, grid=grid, T_final=2.0,
                       N=2.0, dt=0.1, dt_policy="fixed")
    return run_simulation(cfg, f0)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
