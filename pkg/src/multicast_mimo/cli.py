"""Command-line entry point: run campaigns, run figure recipes, or solve
the downlink max-min power allocation from a serialized gain table."""

from __future__ import annotations

import argparse
import json
import sys

from .channel import dbm_to_watt
from .harness import CampaignConfig, run_campaign
from .performance import GainTable
from .power_control import inter_subgroup_mmf
from .recipes import figure_recipes, recipe_names


def _run(config: CampaignConfig, args) -> int:
    if args.snapshots is not None:
        config.n_snapshots = args.snapshots
    if args.seed is not None:
        config.seed = args.seed
    result = run_campaign(config, workers=args.workers, out_dir=args.out)
    for label, summary in result.summaries.items():
        print(f"{label}: mean={summary.mean:.3f} "
              f"p10={summary.percentile(10):.3f} "
              f"p50={summary.percentile(50):.3f} b/s/Hz")
    for label in result.failed_strategies:
        print(f"{label}: FAILED on every snapshot", file=sys.stderr)
    return 1 if result.failed_strategies else 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="multicast-mimo",
        description="Multicast massive-MIMO link-level simulation campaigns")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a campaign from a JSON config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--snapshots", type=int, default=None)
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--out", default=None)

    p_rec = sub.add_parser("recipe", help="run a pre-baked figure recipe")
    p_rec.add_argument("name", help=f"one of: {', '.join(recipe_names())}")
    p_rec.add_argument("--snapshots", type=int, default=None)
    p_rec.add_argument("--workers", type=int, default=1)
    p_rec.add_argument("--seed", type=int, default=None)
    p_rec.add_argument("--out", default=None)
    p_rec.add_argument("--dump-config", action="store_true",
                       help="print the config JSON instead of running")

    p_pow = sub.add_parser("power-solve",
                           help="max-min DL powers from a gain-table JSON")
    p_pow.add_argument("--gains", required=True)
    p_pow.add_argument("--p-dl-dbm", type=float, default=33.0)
    p_pow.add_argument("--eps", type=float, default=1e-6)

    args = parser.parse_args(argv)

    if args.command == "run":
        return _run(CampaignConfig.from_json_file(args.config), args)

    if args.command == "recipe":
        try:
            config = figure_recipes(args.name)
        except ValueError as exc:
            print(exc, file=sys.stderr)
            return 2
        if args.dump_config:
            print(json.dumps(config.to_dict(), indent=2, sort_keys=True))
            return 0
        return _run(config, args)

    if args.command == "power-solve":
        with open(args.gains) as fh:
            gains = GainTable.from_json(fh.read())
        res = inter_subgroup_mmf(gains, dbm_to_watt(args.p_dl_dbm),
                                 eps=args.eps)
        print(json.dumps({"p": res.p.tolist(),
                          "gamma_star": res.gamma_star,
                          "iterations": res.iterations,
                          "degenerate": res.degenerate}))
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
