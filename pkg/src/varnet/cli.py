"""Command-line entry point ``varnet``.

Every failure exits with status 1 after printing one JSON line
``{"error": <kind>, "message": ...}`` to stderr.
"""
import argparse
import json
import os
import sys

import numpy as np

from . import checkpoint, harness

SWEEP_COMMANDS = {
    "rate-sweep": ("rate", "fig2-default"),
    "variation-sweep": ("variation", "variation-default"),
    "rademacher": ("rademacher", "rademacher-default"),
    "grad-check": ("grad_check", "grad-check-default"),
}


def _add_run_args(p, default_preset):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--config", help="JSON config file (every field explicit)")
    src.add_argument("--preset", default=None,
                     help=f"named preset (default: {default_preset})")
    p.add_argument("--out", help=f"output directory (overrides ${harness.OUTPUT_ENV} and the config)")
    p.add_argument("--threads", type=int, default=1, help="worker processes")
    p.add_argument("--no-plot", action="store_true", help="skip the figure")


def build_parser():
    parser = argparse.ArgumentParser(prog="varnet", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (experiment, default_preset) in SWEEP_COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {experiment} experiment")
        _add_run_args(p, default_preset)

    p = sub.add_parser("train", help="train one network and save a checkpoint")
    _add_run_args(p, "train-default")
    p.add_argument("--n", type=int, help="sample size (default: first entry of n_list)")
    p.add_argument("--replication", type=int, default=0)
    p.add_argument("--V", type=float, help="projection radius (projection mode only)")

    p = sub.add_parser("show-preset", help="print a preset as a complete JSON config")
    p.add_argument("name", choices=sorted(harness.PRESETS))

    p = sub.add_parser("plot", help="re-draw the figure for a sweep CSV")
    p.add_argument("csv")
    p.add_argument("--output", help="figure path (default: next to the CSV)")

    p = sub.add_parser("covering", help="greedy cover sizes of the toy [1,1,1] class")
    p.add_argument("--V", type=float, default=1.0)
    p.add_argument("--eps", type=float, nargs="+", default=[0.4, 0.2, 0.1, 0.05, 0.025])
    p.add_argument("--grid-step", type=float, help="weight grid spacing (default: V/4)")
    p.add_argument("--out", default="results/covering")
    p.add_argument("--no-plot", action="store_true")
    return parser


def _config(args, experiment, default_preset):
    if args.config:
        cfg = harness.load_config(args.config)
    else:
        cfg = harness.preset(args.preset or default_preset)
    if cfg.experiment != experiment:
        raise harness.ConfigError(f"config is for experiment {cfg.experiment!r}, command needs {experiment!r}")
    return cfg


def _run_sweep(args, experiment, default_preset):
    cfg = _config(args, experiment, default_preset)
    if args.threads < 1:
        raise harness.ConfigError(f"--threads must be >= 1, got {args.threads}")
    result = harness.run_sweep(cfg, threads=args.threads)
    out = harness.output_dir(cfg, args.out)
    paths = harness.write_outputs(result, out, plot=not args.no_plot)
    harness.save_config(cfg, os.path.join(out, f"{experiment}_config.json"))
    keys = ("slope", "intercept", "r_squared")
    print(json.dumps({"experiment": experiment, **{k: result.summary.get(k) for k in keys},
                      "rows": len(result.rows), **paths}))
    return 0


def _run_train(args):
    cfg = harness.load_config(args.config) if args.config else harness.preset(args.preset or "train-default")
    if cfg.experiment not in ("rate", "variation"):
        raise harness.ConfigError(f"train needs a rate or variation config, got {cfg.experiment!r}")
    n = args.n or cfg.n_list[0]
    if args.V is not None and cfg.train.mode != "projection":
        raise harness.ConfigError("--V applies to projection mode only")
    row, net, trace = harness.train_cell(cfg, n, args.replication, args.V)
    out = harness.output_dir(cfg, args.out)
    os.makedirs(out, exist_ok=True)
    paths = {
        "checkpoint": os.path.join(out, "model.json"),
        "trace": os.path.join(out, "trace.csv"),
    }
    checkpoint.save(net, paths["checkpoint"])
    trace.to_csv(paths["trace"])
    if not args.no_plot:
        from . import plotting
        paths["figure"] = plotting.plot_trace(trace, os.path.join(out, "trace.png"))
    summary = {k: row[k] for k in ("n", "replication", "seed", "train_loss", "risk_l2_sq",
                                   "max_row_variation", "total_l1_norm")}
    summary["violations"] = trace.violations
    print(json.dumps({**summary, **paths}))
    return 0


def _run_covering(args):
    from .complexity import covering_curve
    step = args.grid_step or args.V / 4
    curve = covering_curve(args.V, sorted(args.eps, reverse=True), step)
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "covering.csv")
    with open(path, "w") as fh:
        fh.write("V,eps,cover_size\n")
        for eps, size in curve:
            fh.write(f"{args.V!r},{eps!r},{size}\n")
    paths = {"csv": path}
    if not args.no_plot:
        from . import plotting
        paths["figure"] = plotting.plot_covering(curve, os.path.join(args.out, "covering.png"), args.V)
    print(json.dumps({"V": args.V, "curve": curve, **paths}))
    return 0


def _error_kind(exc):
    if isinstance(exc, harness.ConfigError):
        return "config"
    if isinstance(exc, checkpoint.CheckpointError):
        return "checkpoint"
    if isinstance(exc, OSError):
        return "io"
    if isinstance(exc, ValueError):
        return "value"
    return "internal"


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        with np.errstate(over="ignore"):
            if args.command in SWEEP_COMMANDS:
                return _run_sweep(args, *SWEEP_COMMANDS[args.command])
            if args.command == "train":
                return _run_train(args)
            if args.command == "show-preset":
                print(json.dumps(harness.preset(args.name).to_dict(), indent=2))
                return 0
            if args.command == "plot":
                from . import plotting
                print(json.dumps({"figure": plotting.plot_csv(args.csv, args.output)}))
                return 0
            if args.command == "covering":
                return _run_covering(args)
    except Exception as exc:  # noqa: BLE001
        print(json.dumps({"error": _error_kind(exc), "message": str(exc)}), file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
