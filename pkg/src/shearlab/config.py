"""Run configuration: INI schema, defaults, validation, provenance echo.

Every run directory gets a config.ini with all keys written out,
defaults included, so a run is reproducible from its output alone.
Unknown sections or keys are rejected rather than ignored.
"""

from __future__ import annotations

import configparser
import io

from .errors import ConfigError
from .shear import ShearProfile, couette, from_table, gauss_bump, tanh_defect
from .solver import DataSpec, SolverConfig
from .spectral import FrequencyGrid

DEFAULTS = {
    "run": {
        "frame": "couette",
        "nu": "1e-3",
        "eps": "0.01",
        "t_final": "auto",
        "n": "2.0",
        "seed": "0",
        "label": "run",
    },
    "grid": {
        "n_z": "64",
        "n_v": "256",
        "l_v": "16.0",
    },
    "shear": {
        "profile": "couette",
        "delta": "0.01",
        "width": "1.0",
        "s": "4.0",
        "table": "",
    },
    "data": {
        "kind": "random_band",
        "k": "1",
        "q": "0",
        "k_max": "2",
        "eta_max": "2.0",
        "width": "0.5",
        "envelope_width": "0.0",
    },
    "solver": {
        "dt": "0.1",
        "dt_policy": "cfl",
        "cfl_number": "0.4",
        "visc_safety": "0.5",
        "rk_order": "4",
        "nonlinear": "true",
        "elliptic_tol": "1e-8",
        "shear_refresh_every": "10",
        "store_every": "10",
        "guard_frac": "0.8",
        "guard_tol": "1e-14",
        "checkpoint_interval_sec": "0.0",
    },
    "output": {
        "dir": "runs/out",
    },
    "sweep": {
        "nus": "1e-3,3e-3,1e-2",
        "profiles": "couette",
        "seeds": "1,2,3",
        "eps_coeffs": "0.05",
        "t_final": "auto",
        "bisect_rounds": "3",
        "workers": "0",
    },
}

_FRAMES = ("couette", "general")
_PROFILES = ("couette", "gauss_bump", "tanh_defect", "table")
_KINDS = ("single_mode", "random_band", "dipole")


def _float(raw, sec, key):
    try:
        return float(raw[sec][key])
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: not a number: {raw[sec][key]!r}") from None


def _int(raw, sec, key):
    try:
        return int(raw[sec][key])
    except ValueError:
        raise ConfigError(f"[{sec}] {key}: not an integer: {raw[sec][key]!r}") from None


def _bool(raw, sec, key):
    v = raw[sec][key].strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{sec}] {key}: not a boolean: {raw[sec][key]!r}")


def _choice(raw, sec, key, allowed):
    v = raw[sec][key].strip().lower()
    if v not in allowed:
        raise ConfigError(f"[{sec}] {key}: {v!r} not one of {allowed}")
    return v


def _float_list(raw, sec, key):
    out = []
    for tok in raw[sec][key].split(","):
        tok = tok.strip()
        if tok:
            try:
                out.append(float(tok))
            except ValueError:
                raise ConfigError(f"[{sec}] {key}: bad entry {tok!r}") from None
    return out


def _int_list(raw, sec, key):
    return [int(x) for x in _float_list(raw, sec, key)]


class RunSettings:
    """Typed view over a fully-defaulted raw string table."""

    def __init__(self, raw: dict):
        self.raw = raw

        self.frame = _choice(raw, "run", "frame", _FRAMES)
        self.nu = _float(raw, "run", "nu")
        if not 0.0 < self.nu <= 1.0:
            raise ConfigError("[run] nu must be in (0, 1]")
        self.eps = _float(raw, "run", "eps")
        if self.eps < 0:
            raise ConfigError("[run] eps must be nonnegative")
        self.N = _float(raw, "run", "n")
        if self.N <= 1.0:
            raise ConfigError("[run] n must exceed 1")
        tf = raw["run"]["t_final"].strip().lower()
        self.T_final = 3.0 * self.nu ** (-1.0 / 3.0) if tf == "auto" else float(tf)
        if self.T_final <= 0:
            raise ConfigError("[run] t_final must be positive")
        self.seed = _int(raw, "run", "seed")
        self.label = raw["run"]["label"].strip() or "run"

        self.n_z = _int(raw, "grid", "n_z")
        self.n_v = _int(raw, "grid", "n_v")
        self.L_v = _float(raw, "grid", "l_v")
        for name, n in (("n_z", self.n_z), ("n_v", self.n_v)):
            if n < 8 or n % 2:
                raise ConfigError(f"[grid] {name} must be even and at least 8")
        if self.L_v <= 0:
            raise ConfigError("[grid] l_v must be positive")

        self.profile_name = _choice(raw, "shear", "profile", _PROFILES)
        self.delta = _float(raw, "shear", "delta")
        self.shear_width = _float(raw, "shear", "width")
        self.shear_s = _float(raw, "shear", "s")
        self.shear_table = raw["shear"]["table"].strip()
        if self.profile_name == "table" and not self.shear_table:
            raise ConfigError("[shear] profile=table needs a table path")
        if self.frame == "couette" and self.profile_name != "couette":
            raise ConfigError(
                "[run] frame=couette is incompatible with a nontrivial shear profile")

        self.data_kind = _choice(raw, "data", "kind", _KINDS)
        self.data_k = _int(raw, "data", "k")
        self.data_q = _int(raw, "data", "q")
        self.data_k_max = _int(raw, "data", "k_max")
        self.data_eta_max = _float(raw, "data", "eta_max")
        self.data_width = _float(raw, "data", "width")
        self.data_env_width = _float(raw, "data", "envelope_width")
        self._check_band()

        self.dt = _float(raw, "solver", "dt")
        if self.dt <= 0:
            raise ConfigError("[solver] dt must be positive")
        self.dt_policy = _choice(raw, "solver", "dt_policy", ("cfl", "fixed"))
        self.cfl_number = _float(raw, "solver", "cfl_number")
        self.visc_safety = _float(raw, "solver", "visc_safety")
        for name, x in (("cfl_number", self.cfl_number),
                        ("visc_safety", self.visc_safety)):
            if not 0.0 < x <= 1.0:
                raise ConfigError(f"[solver] {name} must be in (0, 1]")
        self.rk_order = _int(raw, "solver", "rk_order")
        if self.rk_order not in (2, 4):
            raise ConfigError("[solver] rk_order must be 2 or 4")
        self.nonlinear = _bool(raw, "solver", "nonlinear")
        self.elliptic_tol = _float(raw, "solver", "elliptic_tol")
        self.shear_refresh_every = _int(raw, "solver", "shear_refresh_every")
        self.store_every = _int(raw, "solver", "store_every")
        if self.store_every < 1 or self.shear_refresh_every < 1:
            raise ConfigError("[solver] cadence settings must be at least 1")
        self.guard_frac = _float(raw, "solver", "guard_frac")
        self.guard_tol = _float(raw, "solver", "guard_tol")
        self.checkpoint_interval_sec = _float(raw, "solver",
                                              "checkpoint_interval_sec")

        self.outdir = raw["output"]["dir"].strip()

        self.sweep_nus = _float_list(raw, "sweep", "nus")
        self.sweep_profiles = [p.strip().lower()
                               for p in raw["sweep"]["profiles"].split(",")
                               if p.strip()]
        for p in self.sweep_profiles:
            if p not in _PROFILES[:3]:
                raise ConfigError(f"[sweep] profiles: unknown profile {p!r}")
        self.sweep_seeds = _int_list(raw, "sweep", "seeds")
        self.sweep_eps_coeffs = _float_list(raw, "sweep", "eps_coeffs")
        self.sweep_t_final = raw["sweep"]["t_final"].strip().lower()
        if self.sweep_t_final != "auto":
            if float(self.sweep_t_final) <= 0:
                raise ConfigError("[sweep] t_final must be positive or auto")
        self.sweep_bisect_rounds = _int(raw, "sweep", "bisect_rounds")
        if self.sweep_bisect_rounds < 0:
            raise ConfigError("[sweep] bisect_rounds must be nonnegative")
        self.sweep_workers = _int(raw, "sweep", "workers")
        if self.sweep_workers < 0:
            raise ConfigError("[sweep] workers must be nonnegative")

    def _check_band(self):
        """Reject data requests outside the dealiased band before any compute."""
        k_cut = self.n_z // 3
        q_cut = self.n_v // 3
        if self.data_kind == "single_mode":
            if self.data_k == 0 and self.data_q == 0:
                raise ConfigError("[data] mode (0, 0) carries no perturbation")
            if abs(self.data_k) > k_cut or abs(self.data_q) > q_cut:
                raise ConfigError(
                    f"[data] mode ({self.data_k}, {self.data_q}) outside the "
                    f"dealiased band |k|<={k_cut}, |q|<={q_cut}")
        elif self.data_kind == "random_band":
            q_max = int(self.data_eta_max * self.L_v / (2.0 * 3.141592653589793))
            if self.data_k_max > k_cut or q_max > q_cut:
                raise ConfigError(
                    f"[data] band k_max={self.data_k_max}, eta_max="
                    f"{self.data_eta_max} exceeds the dealiased band")

    def build_grid(self) -> FrequencyGrid:
        return FrequencyGrid(self.n_z, self.n_v, self.L_v)

    def build_profile(self, grid: FrequencyGrid) -> ShearProfile | None:
        if self.frame == "couette":
            return None
        if self.profile_name == "couette":
            return couette(grid, s=self.shear_s)
        if self.profile_name == "gauss_bump":
            return gauss_bump(grid, delta=self.delta, width=self.shear_width,
                              s=self.shear_s)
        if self.profile_name == "tanh_defect":
            return tanh_defect(grid, delta=self.delta, width=self.shear_width,
                               s=self.shear_s)
        return from_table(grid, self.shear_table, s=self.shear_s)

    def build_dataspec(self) -> DataSpec:
        return DataSpec(kind=self.data_kind, k=self.data_k, q=self.data_q,
                        k_max=self.data_k_max, eta_max=self.data_eta_max,
                        width=self.data_width,
                        envelope_width=self.data_env_width)

    def build_solver_config(self, grid: FrequencyGrid,
                            profile: ShearProfile | None) -> SolverConfig:
        return SolverConfig(
            frame=self.frame, nu=self.nu, grid=grid, T_final=self.T_final,
            N=self.N, dt=self.dt, dt_policy=self.dt_policy,
            cfl_number=self.cfl_number, visc_safety=self.visc_safety,
            rk_order=self.rk_order, nonlinear=self.nonlinear,
            elliptic_tol=self.elliptic_tol, shear=profile,
            shear_refresh_every=self.shear_refresh_every,
            store_every=self.store_every, guard_frac=self.guard_frac,
            guard_tol=self.guard_tol,
            checkpoint_interval_sec=self.checkpoint_interval_sec)

    def echo_ini(self) -> str:
        """Full INI text, defaults included, in a fixed order."""
        buf = io.StringIO()
        for sec in DEFAULTS:
            buf.write(f"[{sec}]\n")
            for key in DEFAULTS[sec]:
                buf.write(f"{key} = {self.raw[sec][key]}\n")
            buf.write("\n")
        return buf.getvalue()


def _merged(path: str | None, overrides: list[str] | None) -> dict:
    raw = {sec: dict(kv) for sec, kv in DEFAULTS.items()}
    if path is not None:
        cp = configparser.ConfigParser(interpolation=None)
        read = cp.read(path)
        if not read:
            raise ConfigError(f"cannot read config file: {path}")
        for sec in cp.sections():
            if sec not in raw:
                raise ConfigError(f"unknown config section [{sec}]")
            for key, val in cp.items(sec):
                if key not in raw[sec]:
                    raise ConfigError(f"unknown key {key!r} in section [{sec}]")
                raw[sec][key] = val
    for item in overrides or []:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override must look like section.key=value: {item!r}")
        dotted, val = item.split("=", 1)
        sec, key = dotted.split(".", 1)
        sec, key = sec.strip().lower(), key.strip().lower()
        if sec not in raw or key not in raw[sec]:
            raise ConfigError(f"unknown override target {sec}.{key}")
        raw[sec][key] = val.strip()
    return raw


def load_config(path: str | None = None,
                overrides: list[str] | None = None) -> RunSettings:
    """Defaults, then the INI file, then command-line overrides."""
    return RunSettings(_merged(path, overrides))
