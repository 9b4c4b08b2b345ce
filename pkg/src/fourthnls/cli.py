"""Command line: ``fourthnls <experiment> [--config FILE] [--key value ...]``.

Flags override keys of the JSON config file. Exit codes: 0 success,
2 usage error, 1 numerical failure.

Usable N for ``estimate-norms`` is limited by the time grid: the modulation
weight is evaluated after demodulating each mode, so the tau range does not
have to cover max |p(k)|, but the L^4 norm is a Riemann sum in time and is
only trustworthy while dt * max|p(k)| stays moderate.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .errors import FourthNLSError, InvalidArgument, NotFoundError, UsageError
from .harness import EXPERIMENTS, ExperimentConfig, RunRecord, emit_plot_data, run_experiment

log = logging.getLogger("fourthnls")

# config key -> (flag type, help)
OPTIONS = {
    "n_modes": (int, "number of Fourier modes N (even)"),
    "T": (float, "control / simulation horizon (nondimensional)"),
    "dt": (float, "time step"),
    "lambda": (float, "cubic coefficient"),
    "b": (float, "modulation exponent for norm estimates"),
    "s": (float, "Sobolev exponent for norm estimates"),
    "omega": (json.loads, "damping arcs as JSON, e.g. '[[0, 3.14]]', or '\"full\"'"),
    "damping_level": (float, "plateau value of a(x)"),
    "damping_width": (float, "transition width of a(x)"),
    "eta": (float, "lower bound of a^2 on the plateau"),
    "cutoff": (str, "temporal cutoff: bump or constant"),
    "tol": (float, "iteration / residual tolerance"),
    "max_iter": (int, "Picard iteration cap"),
    "seed": (int, "master seed"),
    "ensemble_size": (int, "ensemble members"),
    "u0_norm": (float, "L2 norm of the initial state (control-nonlinear)"),
    "stride": (int, "output stride in time steps"),
    "n_times": (int, "time samples per window (estimate-norms)"),
    "triples": (int, "trilinear triples (estimate-norms)"),
    "convention": (str, "modulation symbol: solver or quartic"),
    "max_horizon": (float, "stabilization time limit (steer)"),
    "output_dir": (str, "directory for artifacts"),
}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fourthnls", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in EXPERIMENTS:
        sp = sub.add_parser(name, help=f"run the {name} experiment")
        sp.add_argument("--config", help="JSON config file")
        for key, (typ, hlp) in OPTIONS.items():
            sp.add_argument("--" + key.replace("_", "-"), dest=key, type=typ, help=hlp,
                            default=argparse.SUPPRESS)
    pp = sub.add_parser("plot", help="write plot data for a finished run")
    pp.add_argument("output_dir")
    pp.add_argument("--kind", required=True, choices=("decay", "control", "ratios"))
    pp.add_argument("--svg", action="store_true", help="also render an SVG")
    return p


def build_config(args: argparse.Namespace) -> ExperimentConfig:
    base = {}
    if getattr(args, "config", None):
        base = ExperimentConfig.load(args.config).to_dict()
    for key in OPTIONS:
        if hasattr(args, key):
            base[key] = getattr(args, key)
    base["experiment"] = args.command
    return ExperimentConfig.from_dict(base)


def main(argv=None) -> int:
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "plot":
            for path in emit_plot_data(RunRecord.load(args.output_dir), args.kind, svg=args.svg):
                print(path)
            return 0
        cfg = build_config(args)
        record = run_experiment(cfg)
    except UsageError as exc:
        print(f"fourthnls: usage error: {exc}", file=sys.stderr)
        return 2
    except (NotFoundError, InvalidArgument) as exc:
        print(f"fourthnls: {exc}", file=sys.stderr)
        return 2
    except (FourthNLSError, FloatingPointError, ArithmeticError) as exc:
        print(f"fourthnls: {args.command} failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(record.summary, indent=2, sort_keys=True, default=str))
    print(f"artifacts in {record.output_dir}", file=sys.stderr)
    return 0


def main_entry():
    sys.exit(main())


if __name__ == "__main__":
    main_entry()
