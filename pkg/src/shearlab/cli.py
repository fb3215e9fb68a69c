"""Command line entry points: simulate, linear, multiplier-check, sweep, plot."""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, GridError, ShearlabError

EXIT_CONFIG = 64


def _echo(quiet: bool):
    if quiet:
        return lambda *_: None
    return lambda msg: print(msg, flush=True)


def _cmd_simulate(args) -> int:
    settings = load_config(args.config, args.set)
    from .runner import run_single
    code, _ = run_single(settings, outdir=args.outdir,
                         echo=_echo(args.quiet))
    return code


def _cmd_linear(args) -> int:
    from .kelvin import (
        KelvinMode,
        default_fit_window,
        inviscid_damping_check,
        linear_series,
        orr_amplification,
    )

    mode = KelvinMode(k=args.k, eta0=args.eta0, amplitude=args.amplitude,
                      nu=args.nu)
    t_crit = mode.t_crit
    t_max = args.t_max
    if t_max <= 0:
        t_max = 1.2 * (10.0 * t_crit + 50.0)
    times = np.linspace(0.0, t_max, args.samples)
    series = linear_series(mode, times)

    cols = ("t", "omega", "psi", "dz_psi", "dy_psi", "envelope")
    lines = [",".join(cols)]
    for i in range(times.size):
        lines.append(",".join(repr(float(series[c][i])) for c in cols))
    out = args.out
    with open(out, "w") as fh:
        fh.write("\n".join(lines) + "\n")

    meta = {
        "k": args.k, "eta0": args.eta0, "nu": args.nu,
        "amplitude": args.amplitude, "t_crit": t_crit, "t_max": t_max,
    }
    if args.k != 0:
        meta["orr_amplification"] = orr_amplification(args.k, args.eta0)
    if args.fit and args.k != 0:
        # the algebraic damping rates are a property of the inviscid flow
        inviscid = KelvinMode(k=args.k, eta0=args.eta0,
                              amplitude=args.amplitude, nu=0.0)
        lo, hi = default_fit_window(t_crit)
        fit_times = np.linspace(lo, hi, 200)
        meta["damping_fit"] = inviscid_damping_check(inviscid, fit_times)
    import json
    json_path = out[:-4] + ".json" if out.endswith(".csv") else out + ".json"
    with open(json_path, "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    if not args.quiet:
        print(f"wrote {out} and {json_path}")
        if "damping_fit" in meta:
            f = meta["damping_fit"]
            print(f"  slopes: psi {f['psi_slope']:+.4f}  "
                  f"dz_psi {f['dz_psi_slope']:+.4f}  "
                  f"dy_psi {f['dy_psi_slope']:+.4f}")
    return 0


def _cmd_multiplier_check(args) -> int:
    from .multiplier import ode_crosscheck, verify_conditions
    from .spectral import FrequencyGrid

    grid = FrequencyGrid(args.n_z, args.n_v, args.l_v)
    nus = args.nu if args.nu else [1e-1, 1e-2, 1e-3]
    reports = []
    all_pass = True
    for nu in nus:
        report = verify_conditions(grid, nu, args.norm_index)
        if args.ode:
            report["ode_max_rel_err"] = ode_crosscheck(nu)
        reports.append(report)
        all_pass &= report["passed"]
        if not args.quiet:
            cond = report["conditions"]
            flags = " ".join(
                f"({name}) {'ok' if cond[name]['pass'] else 'FAIL'}"
                for name in "abcdef")
            print(f"nu={nu:g}: {flags}  C_d={cond['d']['C_d']:.3f} "
                  f"C_e={cond['e']['C_e']:.3f} C_f={cond['f']['C_f']:.3f}"
                  + (f"  ode_err={report['ode_max_rel_err']:.2e}"
                     if args.ode else ""))
    import json
    payload = {"reports": reports, "passed": bool(all_pass)}
    with open(args.out, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")
    if not args.quiet:
        print(f"wrote {args.out}")
    return 0 if all_pass else 2


def _cmd_sweep(args) -> int:
    overrides = list(args.set or [])
    if args.workers is not None:
        overrides.append(f"sweep.workers={args.workers}")
    settings = load_config(args.config, overrides)
    from .sweep import run_sweep
    code, _ = run_sweep(settings, outdir=args.outdir, echo=_echo(args.quiet))
    return code


def _cmd_plot(args) -> int:
    written = []
    if args.run:
        from .plots import plot_run
        written += plot_run(args.run, out_dir=args.out)
    if args.linear:
        from .plots import plot_linear
        written += plot_linear(args.linear, out_path=args.out)
    if args.sweep:
        from .plots import plot_sweep
        written += plot_sweep(args.sweep, out_path=args.out)
    if not written:
        print("nothing to plot: pass --run, --linear, or --sweep",
              file=sys.stderr)
        return EXIT_CONFIG
    for path in written:
        print(f"wrote {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="shearlab",
        description="Spectral lab for shear-flow perturbation dynamics: "
                    "ghost-multiplier energies, inviscid damping, enhanced "
                    "dissipation, stability sweeps.")
    sub = p.add_subparsers(dest="cmd", required=True)

    sim = sub.add_parser("simulate", help="run one configuration")
    sim.add_argument("-c", "--config", default=None, help="INI config file")
    sim.add_argument("-s", "--set", action="append", metavar="SEC.KEY=VAL",
                     help="override a config entry")
    sim.add_argument("-o", "--outdir", default=None)
    sim.add_argument("-q", "--quiet", action="store_true")
    sim.set_defaults(func=_cmd_simulate)

    lin = sub.add_parser("linear", help="closed-form single-mode history")
    lin.add_argument("--k", type=int, default=1)
    lin.add_argument("--eta0", type=float, default=0.0)
    lin.add_argument("--nu", type=float, default=0.0)
    lin.add_argument("--amplitude", type=float, default=1.0)
    lin.add_argument("--t-max", type=float, default=0.0,
                     help="0 means past the damping fit window")
    lin.add_argument("--samples", type=int, default=2001)
    lin.add_argument("--out", default="linear.csv")
    lin.add_argument("--fit", action="store_true",
                     help="fit the inviscid damping slopes")
    lin.add_argument("-q", "--quiet", action="store_true")
    lin.set_defaults(func=_cmd_linear)

    mlt = sub.add_parser("multiplier-check",
                         help="verify the ghost-multiplier conditions")
    mlt.add_argument("--nu", type=float, action="append",
                     help="repeatable; default 1e-1 1e-2 1e-3")
    mlt.add_argument("--n-z", type=int, default=64)
    mlt.add_argument("--n-v", type=int, default=256)
    mlt.add_argument("--l-v", type=float, default=16.0)
    mlt.add_argument("--norm-index", type=float, default=2.0)
    mlt.add_argument("--ode", action="store_true",
                     help="cross-check against an ODE integration")
    mlt.add_argument("--out", default="multiplier_report.json")
    mlt.add_argument("-q", "--quiet", action="store_true")
    mlt.set_defaults(func=_cmd_multiplier_check)

    swp = sub.add_parser("sweep", help="stability sweep with bisection")
    swp.add_argument("-c", "--config", default=None)
    swp.add_argument("-s", "--set", action="append", metavar="SEC.KEY=VAL")
    swp.add_argument("-o", "--outdir", default=None)
    swp.add_argument("-w", "--workers", type=int, default=None,
                     help="overrides [sweep] workers and SHEARLAB_WORKERS")
    swp.add_argument("-q", "--quiet", action="store_true")
    swp.set_defaults(func=_cmd_sweep)

    plo = sub.add_parser("plot", help="figures from artifacts")
    plo.add_argument("--run", default=None, help="run directory")
    plo.add_argument("--linear", default=None, help="linear CSV path")
    plo.add_argument("--sweep", default=None, help="records.csv path")
    plo.add_argument("--out", default=None)
    plo.set_defaults(func=_cmd_plot)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, GridError) as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except ShearlabError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
