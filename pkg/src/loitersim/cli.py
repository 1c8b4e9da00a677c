"""Command-line interface.

Verbs:
    simulate      run one episode and export its trace
    montecarlo    run repeated episodes and export the aggregate report
    export-field  sample the guidance field on a grid (quiver-plot data)
    validate      print the config/gain/feasibility report

Exit codes: 0 on success, 2 on validation failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness, presets


def _add_config_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_mutually_exclusive_group(required=True)
    group.add_argument("--preset", choices=sorted(presets.PRESETS),
                       help="named scenario preset")
    group.add_argument("--config", help="path to a JSON scenario config")


def _load(args) -> harness.ScenarioConfig:
    if args.preset:
        return presets.get(args.preset)
    return harness.load_config(args.config)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="loitersim",
        description="Seeded UAV-loitering simulations: guidance field, "
                    "sliding-mode control, camera/radar sensing, RBPF estimation.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="verb", required=True)

    sim = sub.add_parser("simulate", help="run one episode")
    _add_config_args(sim)
    sim.add_argument("--seed", type=int, default=None, help="override the config seed")
    sim.add_argument("--horizon", type=int, default=None, help="override the horizon (steps)")
    sim.add_argument("--out", default="trace.csv", help="output path")
    sim.add_argument("--format", choices=("csv", "json"), default="csv")

    mc = sub.add_parser("montecarlo", help="run repeated episodes")
    _add_config_args(mc)
    mc.add_argument("--runs", type=int, default=100, help="number of episodes")
    mc.add_argument("--seed", type=int, default=None, help="base seed (run i uses seed+i)")
    mc.add_argument("--horizon", type=int, default=None, help="override the horizon (steps)")
    mc.add_argument("--parallelism", type=int, default=1, help="worker processes")
    mc.add_argument("--out", default="report.json", help="output path")
    mc.add_argument("--format", choices=("csv", "json"), default="json")

    fld = sub.add_parser("export-field", help="sample the guidance field on a grid")
    _add_config_args(fld)
    fld.add_argument("--xmin", type=float, default=None)
    fld.add_argument("--xmax", type=float, default=None)
    fld.add_argument("--ymin", type=float, default=None)
    fld.add_argument("--ymax", type=float, default=None)
    fld.add_argument("--nx", type=int, default=25)
    fld.add_argument("--ny", type=int, default=25)
    fld.add_argument("--out", default="field.csv", help="output path")

    val = sub.add_parser("validate", help="config/gain/feasibility report")
    _add_config_args(val)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    config = _load(args)
    if getattr(args, "horizon", None):
        import dataclasses

        config = dataclasses.replace(config, horizon=args.horizon)

    if args.verb == "validate":
        report = harness.validate_config(config)
        for line in report.lines():
            print(line)
        return 0 if report.clean else 2

    report = harness.validate_config(config)
    if not report.ok:
        for line in report.lines():
            print(line, file=sys.stderr)
        return 2

    if args.verb == "simulate":
        trace = harness.run_episode(config, args.seed)
        harness.export_trace(trace, args.out, args.format)
        print(f"wrote {args.out} ({trace.row_count()} steps, seed "
              f"{config.seed if args.seed is None else args.seed})")
        return 0

    if args.verb == "montecarlo":
        mc = harness.run_monte_carlo(
            config, args.runs, parallelism=args.parallelism, base_seed=args.seed
        )
        harness.export_report(mc, args.out, args.format)
        print(f"wrote {args.out} ({mc.n_runs} runs, steady RMSE {mc.steady_rmse():.3f} m)")
        return 0

    if args.verb == "export-field":
        r = config.loiter.radius
        xmin = -2.0 * r if args.xmin is None else args.xmin
        xmax = 2.0 * r if args.xmax is None else args.xmax
        ymin = -2.0 * r if args.ymin is None else args.ymin
        ymax = 2.0 * r if args.ymax is None else args.ymax
        grid = harness.field_grid(
            config.loiter, np.linspace(xmin, xmax, args.nx), np.linspace(ymin, ymax, args.ny)
        )
        harness.export_field_grid(grid, args.out)
        print(f"wrote {args.out} ({grid.shape[0]} samples)")
        return 0

    raise AssertionError(f"unhandled verb {args.verb}")


if __name__ == "__main__":
    sys.exit(main())
