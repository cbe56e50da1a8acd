"""Command-line entry point.

Subcommands mirror the pipeline stages: ``simulate`` materializes stream
pairs, ``run`` executes the grid, ``recommend`` applies strategies to a
results directory, ``analyze-embeddings`` compares label embeddings,
``reproduce-tables`` checks the embedded fixtures, and ``report``
re-emits the aggregate tables. Progress goes to stderr; machine-readable
results go to files.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .config import ConfigError, apply_overrides, validate_config
from .embeddings import (EmbeddingSet, distance_distribution_csv,
                         mean_distance_distribution, name_overlap,
                         nn_threshold_table, threshold_table_csv)
from .feature_store import FeatureStoreError
from .fixtures import reproduce_tables
from .grid import (load_records_dir, run_grid, simulate_streams,
                   write_record_tables, write_recommendations)


def _log(message: str) -> None:
    print(f"[cilrec] {message}", file=sys.stderr, flush=True)


def _add_config_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="run config (TOML or JSON)")
    parser.add_argument("--out", help="override the output directory")
    parser.add_argument("--seed", type=int, help="run a single seed instead of "
                        "the configured list")
    parser.add_argument("--workers", type=int,
                        help="worker pool size (falls back to $CILREC_WORKERS)")
    parser.add_argument("--epoch-scale", type=float, dest="epoch_scale",
                        help="multiply every epoch budget by this factor")


def _load_config(args):
    config = validate_config(args.config)
    workers = args.workers
    if workers is None and os.environ.get("CILREC_WORKERS"):
        workers = int(os.environ["CILREC_WORKERS"])
    return apply_overrides(config, seed=args.seed, output_dir=args.out,
                           workers=workers, epoch_scale=args.epoch_scale)


def _cmd_simulate(args) -> int:
    config = _load_config(args)
    written = simulate_streams(config)
    _log(f"wrote {len(written)} stream stores under {config.output_dir}/streams")
    return 0


def _cmd_run(args) -> int:
    config = _load_config(args)
    result = run_grid(config)
    _log(f"completed {result.completed} runs, resumed {result.resumed}, "
         f"failures {len(result.failures)}")
    if not result.ok:
        for failure in result.failures:
            _log(f"failure: {failure.source_id} {failure.scenario_label} "
                 f"{failure.algorithm_id} seed {failure.seed} "
                 f"[{failure.variant}] {failure.error}")
        return 1
    return 0


def _cmd_recommend(args) -> int:
    config = _load_config(args)
    records_dir = Path(args.records) if args.records else Path(config.output_dir) / "records"
    records = load_records_dir(records_dir)
    if not records:
        _log(f"no records found under {records_dir}")
        return 1
    write_recommendations(records, config.strategies, config.output_dir)
    _log(f"recommendations written under {config.output_dir}")
    return 0


def _cmd_report(args) -> int:
    config = _load_config(args)
    records_dir = Path(args.records) if args.records else Path(config.output_dir) / "records"
    records = load_records_dir(records_dir)
    if not records:
        _log(f"no records found under {records_dir}")
        return 1
    write_record_tables(records, config.output_dir)
    _log(f"aggregate tables written under {config.output_dir}")
    return 0


def _cmd_analyze_embeddings(args) -> int:
    real = EmbeddingSet.from_feature_store(args.real, normalize=args.normalize)
    simulated = EmbeddingSet.from_feature_store(args.simulated,
                                                normalize=args.normalize)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    distribution = mean_distance_distribution(real, simulated)
    (out_dir / "mean_distances.csv").write_text(
        distance_distribution_csv(distribution), encoding="utf-8")

    thresholds = sorted(args.thresholds)
    percentages = nn_threshold_table(simulated, real, thresholds)
    (out_dir / "nn_thresholds.csv").write_text(
        threshold_table_csv(thresholds, percentages), encoding="utf-8")

    exact, substring = name_overlap(simulated.labels, real.labels)
    (out_dir / "name_overlap.json").write_text(
        json.dumps({"exact_percent": exact, "substring_percent": substring},
                   sort_keys=True) + "\n", encoding="utf-8")
    _log(f"embedding analysis written under {out_dir}")
    return 0


def _cmd_reproduce_tables(args) -> int:
    report = reproduce_tables(tolerance=args.tolerance)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "table_comparison.csv").write_text(report.to_csv(),
                                                      encoding="utf-8")
        (out_dir / "table_comparison.txt").write_text(report.to_text(),
                                                      encoding="utf-8")
        _log(f"comparison written under {out_dir}")
    else:
        sys.stdout.write(report.to_text())
    _log("fixture tables PASS" if report.passed else
         f"fixture tables FAIL ({len(report.failures)} cells)")
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cilrec",
        description="Benchmark harness and recommendation engine for "
                    "data-free class-incremental learners.")
    commands = parser.add_subparsers(dest="command", required=True)

    simulate = commands.add_parser("simulate", help="materialize stream pairs")
    _add_config_options(simulate)
    simulate.set_defaults(handler=_cmd_simulate)

    run = commands.add_parser("run", help="execute the experiment grid")
    _add_config_options(run)
    run.set_defaults(handler=_cmd_run)

    recommend = commands.add_parser("recommend",
                                    help="apply strategies to recorded results")
    _add_config_options(recommend)
    recommend.add_argument("--records", help="records directory "
                           "(default: <output_dir>/records)")
    recommend.set_defaults(handler=_cmd_recommend)

    report = commands.add_parser("report", help="re-emit aggregate tables")
    _add_config_options(report)
    report.add_argument("--records", help="records directory "
                        "(default: <output_dir>/records)")
    report.set_defaults(handler=_cmd_report)

    embeddings = commands.add_parser("analyze-embeddings",
                                     help="compare label embedding sets")
    embeddings.add_argument("--real", required=True,
                            help="feature-store manifest of real label embeddings")
    embeddings.add_argument("--simulated", required=True,
                            help="feature-store manifest of simulated label embeddings")
    embeddings.add_argument("--thresholds", type=float, nargs="+",
                            default=[0.05, 0.2, 0.4],
                            help="nearest-neighbor distance thresholds")
    embeddings.add_argument("--normalize", action="store_true",
                            help="L2-normalize stored vectors before analysis")
    embeddings.add_argument("--out", default="out/embeddings",
                            help="output directory")
    embeddings.set_defaults(handler=_cmd_analyze_embeddings)

    tables = commands.add_parser("reproduce-tables",
                                 help="recompute the published aggregate tables "
                                      "from the embedded grid")
    tables.add_argument("--out", help="write CSV/text reports here instead of stdout")
    tables.add_argument("--tolerance", type=float, default=0.01)
    tables.set_defaults(handler=_cmd_reproduce_tables)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as error:
        _log(f"config error: {error}")
        return 2
    except (OSError, ValueError, FeatureStoreError) as error:
        _log(f"error: {type(error).__name__}: {error}")
        return 2


if __name__ == "__main__":
    sys.exit(main())
