"""Grid execution: run every (source, scenario, algorithm, seed) cell.

Each cell runs the algorithm twice, once on the real stream and once on
the simulated one, writing one JSON record per run. Finished records
double as resume markers: rerunning skips them. After the grid, the
records are folded into CSV tables, per-cell recommendation reports,
and aggregate summaries. All outputs are byte-deterministic for a fixed
config.
"""

from __future__ import annotations

import json
import re
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .config import DatasetSpec, DomainSpec, RunConfig
from .evaluation import RunRecord, records_to_csv, run_experiment
from .feature_store import load_feature_store, save_stream
from .recommend import (IncompleteGridError, RecommendationOutcome, RecommendError,
                        ResultsTable, Source, Strategy, aggregate, dynamics_trace,
                        oracle)
from .streams import (DrawnStream, FeatureStream, ScenarioSpec, draw_stream,
                      generate_domain, simulate_future, split_into_scenario)

_REAL = "real"
_SIMULATED = "simulated"


def _log(message: str) -> None:
    print(f"[cilrec] {message}", file=sys.stderr, flush=True)


def _sanitize(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "-", name).strip("-") or "x"


def _scenario_tag(spec: ScenarioSpec) -> str:
    return (f"{spec.initial_class_count}-{spec.classes_per_step}-"
            f"{spec.total_steps}-{spec.samples_per_class}")


@dataclass(frozen=True)
class RunUnit:
    """One (source, scenario, algorithm, seed, variant) execution."""

    source_id: str
    scenario: ScenarioSpec
    algorithm_index: int
    algorithm_id: str
    seed: int
    variant: str  # "real" | "simulated"

    def file_name(self) -> str:
        return (f"{_sanitize(self.source_id)}__{_scenario_tag(self.scenario)}__"
                f"{_sanitize(self.algorithm_id)}__s{self.seed}__{self.variant}.json")


@dataclass(frozen=True)
class CellFailure:
    source_id: str
    scenario_label: str
    algorithm_id: str
    seed: int
    variant: str
    error: str


@dataclass(frozen=True)
class GridResult:
    output_dir: Path
    completed: int
    resumed: int
    failures: tuple[CellFailure, ...]
    report_notes: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.failures


class _StreamCache:
    """Builds each (source, scenario, seed) stream set exactly once."""

    def __init__(self, config: RunConfig):
        self._config = config
        self._sources = {d.domain_id: d for d in config.domains}
        self._sources.update({d.dataset_id: d for d in config.datasets})
        self._datasets: dict[str, object] = {}
        self._built: dict[tuple[str, str, int], dict[str, tuple[FeatureStream, FeatureStream]]] = {}

    def variants_of(self, source_id: str) -> tuple[str, ...]:
        source = self._sources[source_id]
        if isinstance(source, DomainSpec) or source.simulation is not None:
            return (_REAL, _SIMULATED)
        return (_REAL,)

    def _dataset(self, spec: DatasetSpec):
        if spec.dataset_id not in self._datasets:
            self._datasets[spec.dataset_id] = load_feature_store(spec.manifest)
        return self._datasets[spec.dataset_id]

    def build(self, source_id: str, scenario: ScenarioSpec, seed: int):
        key = (source_id, scenario.label, seed)
        if key in self._built:
            return self._built[key]
        source = self._sources[source_id]
        streams: dict[str, tuple[FeatureStream, FeatureStream]] = {}
        if isinstance(source, DomainSpec):
            domain = generate_domain(source.dimension, source.between_class_scale,
                                     source.within_class_scale, source.seed)
            prefix = draw_stream(domain, scenario, seed).train.steps[0]
            pair = simulate_future(prefix, domain, scenario, source.fidelity, seed)
            streams[_REAL] = (pair.real, pair.real_test)
            streams[_SIMULATED] = (pair.simulated, pair.simulated_test)
        else:
            dataset = self._dataset(source)
            real: DrawnStream = split_into_scenario(dataset, scenario, seed)
            streams[_REAL] = (real.train, real.test)
            if source.simulation is not None:
                sim = source.simulation
                domain = generate_domain(sim.dimension, sim.between_class_scale,
                                         sim.within_class_scale, sim.seed)
                pair = simulate_future(real.train.steps[0], domain, scenario,
                                       sim.fidelity, seed)
                # the simulated run starts from the real first step, so it
                # also keeps the real step-1 test rows
                sim_test = FeatureStream(
                    pair.simulated_test.dimension,
                    (real.test.steps[0],) + pair.simulated_test.steps[1:])
                streams[_SIMULATED] = (pair.simulated, sim_test)
        self._built[key] = streams
        return streams


def _plan_units(config: RunConfig, cache: _StreamCache) -> list[RunUnit]:
    units: list[RunUnit] = []
    source_ids = ([d.domain_id for d in config.domains]
                  + [d.dataset_id for d in config.datasets])
    for source_id in source_ids:
        for scenario in config.scenarios:
            for index, algorithm in enumerate(config.algorithms):
                for seed in config.seeds:
                    for variant in cache.variants_of(source_id):
                        units.append(RunUnit(source_id, scenario, index,
                                             algorithm.algorithm_id, seed, variant))
    return units


def run_grid(config: RunConfig) -> GridResult:
    """Execute the full grid and write records, recommendations, aggregates."""
    out_dir = Path(config.output_dir)
    records_dir = out_dir / "records"
    records_dir.mkdir(parents=True, exist_ok=True)

    cache = _StreamCache(config)
    units = _plan_units(config, cache)
    pending = [u for u in units if not (records_dir / u.file_name()).exists()]
    resumed = len(units) - len(pending)
    if resumed:
        _log(f"resuming: {resumed} of {len(units)} runs already recorded")

    # materialize every stream set a pending unit needs (single-threaded,
    # the generators are cheap and the frozen streams are then shared)
    needed = sorted({(u.source_id, u.scenario, u.seed) for u in pending},
                    key=lambda k: (k[0], k[1].label, k[2]))
    for source_id, scenario, seed in needed:
        cache.build(source_id, scenario, seed)

    failures: list[CellFailure] = []
    done = 0

    def execute(unit: RunUnit):
        streams = cache.build(unit.source_id, unit.scenario, unit.seed)
        train, test = streams[unit.variant]
        algorithm = config.algorithms[unit.algorithm_index]
        record = run_experiment(algorithm, train, test,
                                dataset_id=unit.source_id,
                                scenario=unit.scenario, seed=unit.seed)
        path = records_dir / unit.file_name()
        path.write_text(json.dumps(record.to_json_dict(), sort_keys=True) + "\n",
                        encoding="utf-8")
        return record

    workers = config.workers or 1
    started = time.perf_counter()
    if pending:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for unit, outcome in zip(pending, pool.map(
                    lambda u: _guarded(execute, u), pending)):
                if isinstance(outcome, Exception):
                    failures.append(CellFailure(
                        unit.source_id, unit.scenario.label, unit.algorithm_id,
                        unit.seed, unit.variant, f"{type(outcome).__name__}: {outcome}"))
                    _log(f"FAILED {unit.file_name()}: {outcome}")
                else:
                    done += 1
                    _log(f"done {unit.file_name()} "
                         f"({done}/{len(pending)}, {time.perf_counter() - started:.1f}s)")

    if failures:
        summary = [f.__dict__ for f in sorted(
            failures, key=lambda f: (f.source_id, f.scenario_label,
                                     f.algorithm_id, f.seed, f.variant))]
        (out_dir / "failures.json").write_text(
            json.dumps(summary, sort_keys=True, indent=2) + "\n", encoding="utf-8")

    records = load_records_dir(records_dir)
    notes = write_reports(records, config.strategies, out_dir)
    return GridResult(out_dir, done, resumed, tuple(failures), tuple(notes))


def _guarded(function, unit):
    try:
        return function(unit)
    except Exception as error:  # per-cell isolation: the grid continues
        return error


def load_records_dir(records_dir) -> list[tuple[RunRecord, Source]]:
    """Read every per-run JSON record under a records directory."""
    records_dir = Path(records_dir)
    loaded: list[tuple[RunRecord, Source]] = []
    for path in sorted(records_dir.glob("*.json")):
        variant = path.stem.rsplit("__", 1)[-1]
        if variant not in (_REAL, _SIMULATED):
            continue
        record = RunRecord.from_json_dict(
            json.loads(path.read_text(encoding="utf-8")))
        source = Source.REAL if variant == _REAL else Source.SIMULATED
        loaded.append((record, source))
    return loaded


def build_results_table(records) -> ResultsTable:
    table = ResultsTable()
    for record, source in records:
        table.add_run_record(record, source)
    return table


def write_record_tables(records, out_dir) -> None:
    """Emit the per-step CSVs and the mean real-AA aggregate."""
    out_dir = Path(out_dir)
    records_dir = out_dir / "records"
    aggregates_dir = out_dir / "aggregates"
    for directory in (records_dir, aggregates_dir):
        directory.mkdir(parents=True, exist_ok=True)

    real_records = [r for r, s in records if s is Source.REAL]
    simulated_records = [r for r, s in records if s is Source.SIMULATED]
    (records_dir / "real.csv").write_text(records_to_csv(real_records),
                                          encoding="utf-8")
    (records_dir / "simulated.csv").write_text(records_to_csv(simulated_records),
                                               encoding="utf-8")

    table = build_results_table(records)
    lines = ["dataset,scenario,algorithm,mean_aa"]
    for dataset in table.datasets:
        for scenario in table.scenarios:
            for algorithm in table.candidates(dataset, scenario, Source.REAL):
                value = table.aa(dataset, scenario, algorithm, Source.REAL)
                lines.append(f"{dataset},\"{scenario}\",{algorithm},{value:.6f}")
    (aggregates_dir / "real_aa.csv").write_text("\n".join(lines) + "\n",
                                                encoding="utf-8")


def write_recommendations(records, strategies: tuple[Strategy, ...],
                          out_dir) -> list[str]:
    """Per-cell recommendation JSONs plus the aggregate gap table."""
    out_dir = Path(out_dir)
    recommendations_dir = out_dir / "recommendations"
    aggregates_dir = out_dir / "aggregates"
    for directory in (recommendations_dir, aggregates_dir):
        directory.mkdir(parents=True, exist_ok=True)
    notes: list[str] = []

    table = build_results_table(records)
    datasets = table.datasets
    scenarios = table.scenarios

    gap_grids: dict[str, dict[tuple[str, str], float]] = {}
    for dataset in datasets:
        for scenario in scenarios:
            real_set = table.candidates(dataset, scenario, Source.REAL)
            simulated_set = table.candidates(dataset, scenario, Source.SIMULATED)
            if not simulated_set:
                notes.append(f"no simulated records for ({dataset}, {scenario}); "
                             f"recommendations skipped")
                continue
            if set(real_set) != set(simulated_set):
                notes.append(f"candidate sets differ for ({dataset}, {scenario}); "
                             f"recommendations skipped")
                continue
            best = oracle(table, dataset, scenario)
            outcomes: list[RecommendationOutcome] = []
            for strategy in strategies:
                try:
                    outcome = strategy.run(table, dataset, scenario)
                    trace = dynamics_trace(table, strategy, dataset, scenario)
                except RecommendError as error:
                    notes.append(f"strategy {strategy.tag(table.total_steps_of(scenario))} "
                                 f"on ({dataset}, {scenario}): {error}")
                    continue
                outcomes.append(RecommendationOutcome(
                    outcome.strategy, dataset, scenario, outcome.chosen,
                    outcome.steps_consumed, outcome.gap, trace))
                gap_grids.setdefault(outcome.strategy, {})[(dataset, scenario)] = outcome.gap
            payload = {
                "dataset": dataset,
                "scenario": scenario,
                "oracle": {"algorithm": best.algorithm_id, "real_aa": best.real_aa,
                           "tied": list(best.tied_ids)},
                "outcomes": [o.to_json_dict() for o in outcomes],
            }
            name = f"{_sanitize(dataset)}__{_sanitize(scenario)}.json"
            (recommendations_dir / name).write_text(
                json.dumps(payload, sort_keys=True, indent=2) + "\n",
                encoding="utf-8")

    # aggregate strategy gaps over the full grid where complete
    lines = ["strategy,row,mean_gap"]
    for strategy_tag in sorted(gap_grids):
        grid = gap_grids[strategy_tag]
        try:
            result = aggregate(grid, datasets=datasets, scenarios=scenarios)
        except IncompleteGridError as error:
            notes.append(f"strategy {strategy_tag}: {error}")
            continue
        for scenario in scenarios:
            lines.append(f"{strategy_tag},\"{scenario}\","
                         f"{result.per_scenario[scenario]:.6f}")
        for dataset in datasets:
            lines.append(f"{strategy_tag},{dataset},{result.per_dataset[dataset]:.6f}")
        lines.append(f"{strategy_tag},overall,{result.overall:.6f}")
    (aggregates_dir / "strategy_gaps.csv").write_text("\n".join(lines) + "\n",
                                                      encoding="utf-8")
    for note in notes:
        _log(note)
    return notes


def write_reports(records, strategies: tuple[Strategy, ...], out_dir) -> list[str]:
    """Fold records into CSVs, recommendation JSONs, and aggregates."""
    write_record_tables(records, out_dir)
    return write_recommendations(records, strategies, out_dir)


def simulate_streams(config: RunConfig) -> list[Path]:
    """Materialize every stream pair and save it in feature-store form."""
    out_dir = Path(config.output_dir) / "streams"
    cache = _StreamCache(config)
    written: list[Path] = []
    source_ids = ([d.domain_id for d in config.domains]
                  + [d.dataset_id for d in config.datasets])
    for source_id in source_ids:
        for scenario in config.scenarios:
            for seed in config.seeds:
                variants = cache.variants_of(source_id)
                if _SIMULATED not in variants:
                    _log(f"{source_id}: no simulation parameters, skipping")
                    continue
                streams = cache.build(source_id, scenario, seed)
                base = out_dir / (f"{_sanitize(source_id)}__"
                                  f"{_scenario_tag(scenario)}__s{seed}")
                for variant in variants:
                    train, test = streams[variant]
                    written.append(save_stream(base / f"{variant}_train", train))
                    written.append(save_stream(base / f"{variant}_test", test))
                _log(f"wrote streams for {source_id} {scenario.label} seed {seed}")
    return written
