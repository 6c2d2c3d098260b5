"""Command-line interface: sweep execution, BPS window sweeps, and
plot-data extraction from result files."""

import argparse
import logging
import sys

from .config import ConfigError, config_from_dict, load_config, preset, \
    preset_names, preset_overrides
from .experiment import emit_nbps_series, emit_plot_series, load_results, \
    plot_series, run_experiment, sweep_nbps


def _add_config_args(p):
    p.add_argument("--config", help="YAML experiment configuration")
    p.add_argument("--preset", choices=preset_names(),
                   help="named base configuration; a --config file is "
                        "layered on top of it")
    p.add_argument("--seed", type=int, default=None,
                   help="override master_seed")


def _resolve_config(args):
    if args.config:
        overrides = preset_overrides(args.preset) if args.preset else None
        cfg = load_config(args.config, overrides=overrides)
    elif args.preset:
        cfg = preset(args.preset)
    else:
        raise ConfigError("provide --config and/or --preset")
    if args.seed is not None:
        raw = dict(cfg.raw)
        raw["master_seed"] = args.seed
        cfg = config_from_dict(raw)
    return cfg


def _open_out(path):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", newline="", encoding="utf-8"), True


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="pasim",
        description="Shaped coherent WDM transmission sweeps: ESS/MB "
                    "sources over a nonlinear fiber link with EDC/DBP and "
                    "BPS/MPR carrier recovery, scored by GMI.")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute the configured sweep")
    _add_config_args(run_p)
    run_p.add_argument("--out", default="results.csv",
                       help="results CSV (existing rows are reused)")
    run_p.add_argument("--workers", type=int, default=1,
                       help="parallel sweep-point processes")
    run_p.add_argument("--quiet", action="store_true",
                       help="suppress progress logging")

    nbps_p = sub.add_parser("sweep-nbps",
                            help="GMI versus BPS averaging window")
    _add_config_args(nbps_p)
    nbps_p.add_argument("--out", default=None,
                        help="output CSV (default: stdout)")
    nbps_p.add_argument("--quiet", action="store_true")

    plot_p = sub.add_parser("plotdata",
                            help="per-curve plot series from a results CSV")
    plot_p.add_argument("--in", dest="infile", required=True,
                        help="results CSV produced by `pasim run`")
    plot_p.add_argument("--figure", required=True, choices=("fig2", "fig3"))
    plot_p.add_argument("--out", default=None,
                        help="output CSV (default: stdout)")

    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO, stream=sys.stderr,
                        format="%(levelname)s %(message)s")

    try:
        if args.command == "run":
            cfg = _resolve_config(args)
            rows = run_experiment(cfg, out_path=args.out,
                                  workers=args.workers,
                                  progress=not args.quiet)
            ok = sum(1 for r in rows if r.gmi_bits == r.gmi_bits)
            print(f"{len(rows)} rows ({ok} ok) -> {args.out}")
        elif args.command == "sweep-nbps":
            cfg = _resolve_config(args)
            records = sweep_nbps(cfg, progress=not args.quiet)
            stream, close = _open_out(args.out)
            try:
                emit_nbps_series(records, stream)
            finally:
                if close:
                    stream.close()
        elif args.command == "plotdata":
            rows = load_results(args.infile)
            records = plot_series(rows, args.figure)
            stream, close = _open_out(args.out)
            try:
                emit_plot_series(records, stream)
            finally:
                if close:
                    stream.close()
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
