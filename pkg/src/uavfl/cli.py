"""Command-line entry points: run, compare, gen-data, dedup-report."""

from __future__ import annotations

import argparse
import os
import sys

from .config import ExperimentConfig, load_config
from .datagen import (MANIFEST_HEADER, generate_uav_dataset, load_manifest,
                      write_pgm)
from .harness import (build_scenario, compare_strategies, emit_csv, emit_metadata,
                      emit_summary_csv, genspec_from_config, run_experiment)
from .similarity import SsimParams, deduplicate


def _load(args) -> ExperimentConfig:
    config = load_config(args.config) if args.config else ExperimentConfig()
    if getattr(args, "strategy", None):
        config.strategy = args.strategy
    if getattr(args, "ssim_th", None) is not None:
        config.ssim_threshold = args.ssim_th
    if getattr(args, "seed", None) is not None:
        config.master_seed = args.seed
    if getattr(args, "out", None):
        config.output_dir = args.out
    if getattr(args, "workers", None) is not None:
        config.workers = args.workers
    return config


def cmd_run(args) -> int:
    config = _load(args)
    summary = run_experiment(config)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    emit_csv(summary.records, os.path.join(out, f"rounds_{summary.label}.csv"))
    emit_summary_csv([summary], os.path.join(out, "summary.csv"))
    emit_metadata(config, os.path.join(out, "metadata.json"))
    print(f"strategy={summary.label} rounds={len(summary.records)} "
          f"final_accuracy={summary.final_accuracy:.4f} "
          f"lambda_t={summary.avg_round_time_s:.2f}s chi_r={summary.rounds_to_convergence} "
          f"rho_t={summary.time_to_convergence_min:.2f}min")
    return 0


def cmd_compare(args) -> int:
    config = _load(args)
    strategies = [("deeps", 0.1), ("deeps", 0.5), ("random", None)]
    compare_strategies(config, strategies, out_dir=config.output_dir)
    return 0


def cmd_gen_data(args) -> int:
    """Materialize the configured synthetic datasets as PGM files + manifest."""
    config = _load(args)
    out = config.output_dir
    os.makedirs(out, exist_ok=True)
    genspec = genspec_from_config(config)
    rows = [",".join(MANIFEST_HEADER)]
    for uid in range(1, config.n_uavs + 1):
        subregion = (uid - 1) % config.subregion_count + 1
        data = generate_uav_dataset(genspec, subregion, uid, config.master_seed,
                                    shard_count=config.n_rounds_max)
        img_dir = os.path.join(out, f"uav{uid:03d}")
        os.makedirs(img_dir, exist_ok=True)
        for i, s in enumerate(data.train.samples):
            rel = os.path.join(f"uav{uid:03d}", f"{i:05d}.pgm")
            write_pgm(os.path.join(out, rel), s.image)
            rows.append(f"{rel},{s.label},{subregion},{uid}")
    manifest = os.path.join(out, "manifest.csv")
    with open(manifest, "w", newline="\n", encoding="utf-8") as fh:
        fh.write("\n".join(rows) + "\n")
    print(f"wrote {len(rows) - 1} images and {manifest}")
    return 0


def cmd_dedup_report(args) -> int:
    datasets = load_manifest(args.manifest, image_root=os.path.dirname(args.manifest))
    params = SsimParams()
    total_before = total_after = 0
    print(f"{'uav':>6}{'samples':>10}{'removed':>10}{'kept':>10}")
    for uid, ds in datasets.items():
        before = len(ds)
        removed = deduplicate(ds, args.ssim_th, params)
        total_before += before
        total_after += len(ds)
        print(f"{uid:>6}{before:>10}{removed:>10}{len(ds):>10}")
    print(f"total: {total_before} -> {total_after} at threshold {args.ssim_th:g}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uavfl",
                                     description="UAV edge FL selection simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one strategy")
    run.add_argument("--config", help="JSON config file")
    run.add_argument("--strategy", choices=["deeps", "random"])
    run.add_argument("--ssim-th", type=float, dest="ssim_th")
    run.add_argument("--seed", type=int)
    run.add_argument("--out")
    run.add_argument("--workers", type=int)
    run.set_defaults(func=cmd_run)

    comp = sub.add_parser("compare", help="run deeps(0.1)/deeps(0.5)/random on shared data")
    comp.add_argument("--config", help="JSON config file")
    comp.add_argument("--seed", type=int)
    comp.add_argument("--out")
    comp.add_argument("--workers", type=int)
    comp.set_defaults(func=cmd_compare)

    gen = sub.add_parser("gen-data", help="write synthetic datasets as PGM + manifest")
    gen.add_argument("--config", help="JSON config file")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen_data)

    ded = sub.add_parser("dedup-report", help="near-duplicate removal stats for a manifest")
    ded.add_argument("--manifest", required=True)
    ded.add_argument("--ssim-th", type=float, dest="ssim_th", default=0.5)
    ded.set_defaults(func=cmd_dedup_report)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
