"""Command-line entry point.

Exit codes: 0 success, 1 invalid configuration, 2 numerical failure, 3 I/O.
"""
import argparse
import sys
import warnings

from . import analysis
from .network import ConfigError, watts_to_dbm
from .optimize import optimize_apce, optimize_ee, per_km2
from .harness.anchors import read_anchors
from .harness.calibrate import calibrate_constants
from .harness.configfile import format_config, read_config
from .harness.montecarlo import DETECTORS, OUTPUTS, Report, report_meta, run_point
from .harness.sweep import csv_text, read_spec, run_sweep, sweep
from .specfun import QuadratureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 1, 2, 3


def _density(args, extra):
    v = getattr(args, "density_per_km2", None)
    if v is None and "density_per_km2" in extra:
        v = float(extra["density_per_km2"])
    return None if v is None else per_km2(v)


def cmd_analyze(args, out):
    cfg, extra = read_config(args.config)
    rep = analysis.analyze(cfg, _density(args, extra))
    for name in ("p0", "p_per", "avg_nmse", "xi_mean", "avg_rate", "p_dev_bar", "ee", "apce"):
        val = getattr(rep, name)
        if val is not None:
            out.write(f"{name}={val!r}\n")
    for j, v in rep.mse_by_j.items():
        out.write(f"mse_j[{j}]={v!r}\n")


def cmd_simulate(args, out):
    cfg, extra = read_config(args.config)
    dets = args.detector or ["ta_omp"]
    row = run_point(cfg, dets, args.trials, args.seed, outputs=args.outputs,
                    density=_density(args, extra), value=0.0, workers=args.workers)
    rep = Report("none", [row], report_meta(cfg, args.seed))
    text = csv_text(rep)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        out.write(text)


def cmd_sweep(args, out):
    spec = read_spec(args.spec)
    path = args.out or spec.out
    if path is None:
        out.write(csv_text(run_sweep(spec)))
        return
    sweep(spec, path)
    out.write(f"wrote {path}\n")


def cmd_optimize(args, out):
    cfg, extra = read_config(args.config)
    if args.target == "ee":
        res = optimize_ee(cfg, min_pper=args.min_pper)
        unit = "dBm"
    else:
        dens = _density(args, extra)
        if dens is None:
            raise ConfigError("apce needs density_per_km2 (config key or --density-per-km2)")
        res = optimize_apce(cfg, dens, min_pper=args.min_pper)
        unit = "m"
    out.write(f"arg_opt_{unit}={res.arg_opt!r}\nvalue_opt={res.value_opt!r}\n"
              f"p_per_at_opt={res.p_per_at_opt!r}\n")
    if res.constrained_arg is None:
        out.write(f"constrained=infeasible (p_per >= {args.min_pper} not reachable)\n")
    else:
        out.write(f"constrained_arg_{unit}={res.constrained_arg!r}\n"
                  f"constrained_value={res.constrained_value!r}\n"
                  f"p_per_at_constrained={res.p_per_at_constrained!r}\n")


def cmd_calibrate(args, out):
    base, anchors = read_anchors(args.anchors)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        cal = calibrate_constants(anchors, c2=args.fix_c2)
    for w in caught:
        sys.stderr.write(f"WARNING: {w.message}\n")
    text = format_config(cal.apply(base))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        out.write(text)
    for (cfg, target), r in zip(anchors, cal.residuals):
        sys.stderr.write(f"anchor N={cfg.n_devices:g} P={watts_to_dbm(cfg.tx_power):.2f} dBm "
                         f"target={target} fitted={target + r:.4f}\n")
    if not cal.ok:
        sys.stderr.write(f"WARNING: CALIBRATION RESIDUAL {cal.worst:.4f} ABOVE LIMIT\n")


def build_parser():
    p = argparse.ArgumentParser(prog="gfnoma", description="Grant-free NOMA cell laboratory")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", help="print the closed-form metrics")
    a.add_argument("config")
    a.add_argument("--density-per-km2", type=float)
    a.set_defaults(func=cmd_analyze)

    s = sub.add_parser("simulate", help="Monte Carlo at one configuration")
    s.add_argument("config")
    s.add_argument("--trials", type=int, default=1000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--detector", action="append", choices=DETECTORS)
    s.add_argument("--outputs", nargs="+", default=["p_per", "nmse", "rate"], choices=OUTPUTS)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--density-per-km2", type=float)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    w = sub.add_parser("sweep", help="run a sweep spec and write CSV")
    w.add_argument("spec")
    w.add_argument("--out")
    w.set_defaults(func=cmd_sweep)

    o = sub.add_parser("optimize", help="EE over power or APCE over radius")
    o.add_argument("target", choices=["ee", "apce"])
    o.add_argument("config")
    o.add_argument("--min-pper", type=float, default=0.9)
    o.add_argument("--density-per-km2", type=float)
    o.set_defaults(func=cmd_optimize)

    c = sub.add_parser("calibrate", help="fit c2, c3 to anchor points")
    c.add_argument("anchors")
    c.add_argument("--fix-c2", type=float)
    c.add_argument("--out")
    c.set_defaults(func=cmd_calibrate)
    return p


def main(argv=None, out=None):
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        args.func(args, out)
    except ConfigError as e:
        sys.stderr.write(f"invalid configuration: {e}\n")
        return EXIT_CONFIG
    except (QuadratureError, ArithmeticError) as e:
        sys.stderr.write(f"numerical failure: {e}\n")
        return EXIT_NUMERIC
    except OSError as e:
        sys.stderr.write(f"I/O error: {e}\n")
        return EXIT_IO
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
