"""Command-line interface: run one scenario, sweep an axis, or compare
coordination/precoder variants on paired drops."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .harness import dump_channels, emit, emit_compare, parse_variant, run_compare, run_point, run_sweep
from .scenario import ConfigError, ScenarioConfig, load_config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=str, default=None, help="YAML scenario config (defaults apply if omitted)")
    parser.add_argument("--out", type=str, required=True, help="output directory for CSVs, provenance, and figures")
    parser.add_argument("--seed", type=int, default=None, help="override the master seed")
    parser.add_argument("--drops", type=int, default=None, help="override the Monte-Carlo drop count")
    parser.add_argument("--parallel", type=int, default=1, help="worker processes for the drop loop")
    parser.add_argument("--paired", action="store_true", help="pair seeds across schemes (always on for compare)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cransim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Monte-Carlo run of a single scenario point")
    _add_common(p_run)
    p_run.add_argument("--dump-channels", type=str, default=None, metavar="NPZ",
                       help="also write per-drop H / H_cross records to this npz file")

    p_sweep = sub.add_parser("sweep", help="sweep the axis configured by sweep_param/sweep_values")
    _add_common(p_sweep)

    p_cmp = sub.add_parser("compare", help="compare scheme variants on identical drops")
    _add_common(p_cmp)
    p_cmp.add_argument(
        "--variant",
        action="append",
        required=True,
        metavar="SPEC",
        help="scheme such as GC-ZFBF, NC-ZFBF, LC4-CB; repeatable",
    )
    return parser


def _load(args) -> ScenarioConfig:
    cfg = load_config(args.config) if args.config else ScenarioConfig().validated()
    if args.seed is not None:
        cfg = replace(cfg, master_seed=args.seed)
    if args.drops is not None:
        cfg = replace(cfg, n_drops=args.drops)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load(args)
        if args.command == "run":
            result = run_point(cfg, parallel=args.parallel)
            files = emit(result, args.out)
            if args.dump_channels:
                dump_channels(cfg, args.dump_channels)
                files.append(args.dump_channels)
        elif args.command == "sweep":
            result = run_sweep(cfg, parallel=args.parallel)
            files = emit(result, args.out)
        else:
            variants = [parse_variant(v) for v in args.variant]
            results = run_compare(cfg, variants, parallel=args.parallel)
            files = emit_compare(results, args.out)
    except (ConfigError, ValueError, RuntimeError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    for path in files:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
