"""Algorithm recommendation over a table of run results.

A ResultsTable holds average incremental accuracies (and, when
available, per-step accuracy series) indexed by dataset, scenario,
algorithm, source (real or simulated), and seed. The oracle picks the
best real result; the recommendation strategies only look at simulated
results and are scored by the gap between their pick's real accuracy
and the oracle's.

Deterministic tie handling throughout: argmax ties keep the lowest
algorithm id, pruning (argmin) ties drop the highest.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from itertools import combinations


class RecommendError(ValueError):
    pass


class MissingRecordError(RecommendError, KeyError):
    pass


class IncompleteGridError(RecommendError):
    def __init__(self, missing_cells):
        self.missing_cells = tuple(missing_cells)
        cells = ", ".join(f"({d}, {s})" for d, s in self.missing_cells)
        super().__init__(f"gap grid is missing cells: {cells}")


class Source(str, Enum):
    REAL = "real"
    SIMULATED = "simulated"


@dataclass(frozen=True)
class TableEntry:
    aa: float
    steps: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        if not math.isfinite(self.aa):
            raise RecommendError(f"non-finite accuracy {self.aa}")
        if self.steps is not None:
            mean = math.fsum(self.steps) / len(self.steps)
            if abs(mean - self.aa) > 1e-9:
                raise RecommendError("aa does not match the step-series mean")


class ResultsTable:
    """Run results indexed by (dataset, scenario, algorithm, source, seed).

    Entries may carry a full per-step accuracy series or only the final
    average; prefix-based strategies require the series.
    """

    def __init__(self) -> None:
        self._entries: dict[tuple[str, str, str, Source, int], TableEntry] = {}
        self._scenario_steps: dict[str, int] = {}

    # construction -----------------------------------------------------
    def add_series(self, dataset: str, scenario: str, algorithm: str,
                   source: Source, seed: int, step_accuracies) -> None:
        steps = tuple(float(q) for q in step_accuracies)
        if not steps:
            raise RecommendError("empty step series")
        known = self._scenario_steps.get(scenario)
        if known is not None and known != len(steps):
            raise RecommendError(
                f"scenario {scenario} has {known} steps, got a series of {len(steps)}")
        self._scenario_steps[scenario] = len(steps)
        aa = math.fsum(steps) / len(steps)
        self._put(dataset, scenario, algorithm, source, seed, TableEntry(aa, steps))

    def add_aa(self, dataset: str, scenario: str, algorithm: str,
               source: Source, seed: int, aa: float) -> None:
        self._put(dataset, scenario, algorithm, source, seed, TableEntry(float(aa)))

    def add_run_record(self, record, source: Source, *, dataset: str | None = None,
                       scenario: str | None = None) -> None:
        self.add_series(dataset or record.dataset_id,
                        scenario or record.scenario.label,
                        record.algorithm_id, Source(source), record.seed,
                        record.step_accuracies)

    def _put(self, dataset, scenario, algorithm, source, seed, entry) -> None:
        key = (str(dataset), str(scenario), str(algorithm), Source(source), int(seed))
        if key in self._entries:
            raise RecommendError(f"duplicate record for {key}")
        self._entries[key] = entry

    # inspection -------------------------------------------------------
    @property
    def datasets(self) -> tuple[str, ...]:
        return tuple(sorted({k[0] for k in self._entries}))

    @property
    def scenarios(self) -> tuple[str, ...]:
        return tuple(sorted({k[1] for k in self._entries}))

    @property
    def algorithms(self) -> tuple[str, ...]:
        return tuple(sorted({k[2] for k in self._entries}))

    def candidates(self, dataset: str, scenario: str, source: Source) -> tuple[str, ...]:
        found = {k[2] for k in self._entries
                 if k[0] == dataset and k[1] == scenario and k[3] == source}
        return tuple(sorted(found))

    def total_steps_of(self, scenario: str) -> int | None:
        return self._scenario_steps.get(scenario)

    def _seed_entries(self, dataset, scenario, algorithm, source) -> list[TableEntry]:
        hits = [entry for key, entry in self._entries.items()
                if key[:4] == (dataset, scenario, algorithm, source)]
        if not hits:
            raise MissingRecordError(
                f"no {source.value} record for algorithm {algorithm!r} on "
                f"({dataset}, {scenario})")
        return hits

    def aa(self, dataset: str, scenario: str, algorithm: str, source: Source) -> float:
        hits = self._seed_entries(dataset, scenario, algorithm, Source(source))
        return math.fsum(e.aa for e in hits) / len(hits)

    def prefix_mean(self, dataset: str, scenario: str, algorithm: str,
                    source: Source, horizon: int) -> float:
        hits = self._seed_entries(dataset, scenario, algorithm, Source(source))
        values = []
        for entry in hits:
            if entry.steps is None:
                raise MissingRecordError(
                    f"algorithm {algorithm!r} on ({dataset}, {scenario}) has no "
                    f"step series; prefix means need one")
            if horizon > len(entry.steps):
                raise RecommendError(
                    f"horizon {horizon} exceeds the {len(entry.steps)}-step series")
            values.append(math.fsum(entry.steps[:horizon]) / horizon)
        return math.fsum(values) / len(values)

    def validate(self) -> None:
        # every (dataset, scenario, source) cell must cover one shared
        # candidate set
        cells: dict[tuple[str, str, Source], set[str]] = {}
        for dataset, scenario, algorithm, source, _seed in self._entries:
            cells.setdefault((dataset, scenario, source), set()).add(algorithm)
        expected = set(self.algorithms)
        for cell, seen in sorted(cells.items(), key=lambda kv: (kv[0][0], kv[0][1], kv[0][2].value)):
            if seen != expected:
                missing = sorted(expected - seen)
                raise RecommendError(
                    f"cell {cell[0]}/{cell[1]}/{cell[2].value} lacks records "
                    f"for {missing}")

    def restrict(self, algorithms) -> "ResultsTable":
        keep = {str(a) for a in algorithms}
        unknown = keep - set(self.algorithms)
        if unknown:
            raise RecommendError(f"unknown algorithms: {sorted(unknown)}")
        table = ResultsTable()
        table._scenario_steps = dict(self._scenario_steps)
        table._entries = {k: v for k, v in self._entries.items() if k[2] in keep}
        return table


# strategy tags ---------------------------------------------------------

class StrategyKind(str, Enum):
    GREEDY_T = "GREEDY_T"
    GREEDY_HALF = "GREEDY_HALF"
    TGREEDY = "TGREEDY"
    EXPLORE_PRUNE = "EXPLORE_PRUNE"


@dataclass(frozen=True)
class Strategy:
    """A recommendation strategy tag with its parameters."""

    kind: StrategyKind
    t: int = 3
    t_max: int | None = None  # None resolves to T when the strategy runs

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", StrategyKind(self.kind))
        if self.t < 1:
            raise RecommendError(f"t must be >= 1, got {self.t}")
        if self.t_max is not None and self.t_max < self.t:
            raise RecommendError(f"t_max {self.t_max} must be >= t {self.t}")

    def tag(self, total_steps: int | None = None) -> str:
        if self.kind is StrategyKind.TGREEDY:
            return f"TGREEDY({self.t})"
        if self.kind is StrategyKind.EXPLORE_PRUNE:
            limit = self.t_max if self.t_max is not None else total_steps
            return f"EXPLORE_PRUNE({self.t}, {limit if limit is not None else 'T'})"
        return self.kind.value

    @classmethod
    def parse(cls, text: str) -> "Strategy":
        text = text.strip()
        if "(" in text:
            name, _, rest = text.partition("(")
            arguments = [part.strip() for part in rest.rstrip(")").split(",") if part.strip()]
            name = name.strip().upper()
            if name == "TGREEDY" and len(arguments) == 1:
                return cls(StrategyKind.TGREEDY, t=int(arguments[0]))
            if name == "EXPLORE_PRUNE" and len(arguments) in (1, 2):
                t_max = None
                if len(arguments) == 2 and arguments[1].upper() != "T":
                    t_max = int(arguments[1])
                return cls(StrategyKind.EXPLORE_PRUNE, t=int(arguments[0]), t_max=t_max)
            raise RecommendError(f"unparseable strategy {text!r}")
        try:
            return cls(StrategyKind(text.upper()))
        except ValueError:
            raise RecommendError(f"unknown strategy {text!r}") from None

    def run(self, table: ResultsTable, dataset: str, scenario: str) -> "RecommendationOutcome":
        total = table.total_steps_of(scenario)
        if self.kind is StrategyKind.GREEDY_T:
            if total is None:
                raise RecommendError(f"scenario {scenario} has no step series")
            outcome = greedy(table, dataset, scenario, total)
        elif self.kind is StrategyKind.GREEDY_HALF:
            if total is None:
                raise RecommendError(f"scenario {scenario} has no step series")
            outcome = greedy(table, dataset, scenario, math.ceil(total / 2))
        elif self.kind is StrategyKind.TGREEDY:
            outcome = t_greedy(table, dataset, scenario, self.t)
        else:
            limit = self.t_max if self.t_max is not None else total
            if limit is None:
                raise RecommendError(f"scenario {scenario} has no step series")
            outcome = explore_then_prune(table, dataset, scenario, self.t, limit)
        return replace(outcome, strategy=self.tag(total))


@dataclass(frozen=True)
class OracleChoice:
    """Best real algorithm; tied_ids lists every argmax before breaking."""

    algorithm_id: str
    real_aa: float
    tied_ids: tuple[str, ...]

    def __str__(self) -> str:
        return self.algorithm_id


@dataclass(frozen=True)
class RecommendationOutcome:
    strategy: str
    dataset: str
    scenario: str
    chosen: str
    steps_consumed: int
    gap: float
    trace: tuple[float, ...] | None = None

    def to_json_dict(self) -> dict:
        payload = {
            "dataset": self.dataset,
            "scenario": self.scenario,
            "strategy": self.strategy,
            "chosen": self.chosen,
            "gap": self.gap,
            "steps_consumed": self.steps_consumed,
        }
        if self.trace is not None:
            payload["trace"] = list(self.trace)
        return payload

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _argmax_lowest(pairs) -> tuple[str, float]:
    """(id, value) with the highest value; ties keep the lowest id."""
    best_id, best_value = None, None
    for candidate, value in sorted(pairs):
        if best_value is None or value > best_value:
            best_id, best_value = candidate, value
    if best_id is None:
        raise RecommendError("empty candidate set")
    return best_id, best_value


def _argmin_highest(pairs) -> tuple[str, float]:
    """(id, value) with the lowest value; ties keep the highest id."""
    worst_id, worst_value = None, None
    for candidate, value in sorted(pairs):
        if worst_value is None or value <= worst_value:
            worst_id, worst_value = candidate, value
    if worst_id is None:
        raise RecommendError("empty candidate set")
    return worst_id, worst_value


def oracle(table: ResultsTable, dataset: str, scenario: str) -> OracleChoice:
    """Argmax of real average incremental accuracy, ties to lowest id."""
    candidates = table.candidates(dataset, scenario, Source.REAL)
    if not candidates:
        raise MissingRecordError(f"no real records for ({dataset}, {scenario})")
    scored = [(c, table.aa(dataset, scenario, c, Source.REAL)) for c in candidates]
    chosen, best = _argmax_lowest(scored)
    tied = tuple(c for c, value in scored if value == best)
    return OracleChoice(chosen, best, tied)


def gap(table: ResultsTable, dataset: str, scenario: str, chosen) -> float:
    """Real AA of the chosen algorithm minus the oracle's; never positive."""
    chosen_id = str(chosen)
    reference = oracle(table, dataset, scenario)
    return table.aa(dataset, scenario, chosen_id, Source.REAL) - reference.real_aa


def _simulated_candidates(table, dataset, scenario) -> tuple[str, ...]:
    candidates = table.candidates(dataset, scenario, Source.SIMULATED)
    if not candidates:
        raise MissingRecordError(f"no simulated records for ({dataset}, {scenario})")
    return candidates


def greedy(table: ResultsTable, dataset: str, scenario: str,
           horizon: int) -> RecommendationOutcome:
    """Argmax of simulated mean accuracy over the first ``horizon`` steps."""
    if horizon < 1:
        raise RecommendError(f"horizon must be >= 1, got {horizon}")
    total = table.total_steps_of(scenario)
    if total is not None and horizon > total:
        raise RecommendError(f"horizon {horizon} exceeds the {total}-step scenario")
    candidates = _simulated_candidates(table, dataset, scenario)
    scored = [(c, table.prefix_mean(dataset, scenario, c, Source.SIMULATED, horizon))
              for c in candidates]
    chosen, _ = _argmax_lowest(scored)
    tag = "GREEDY_T" if total is not None and horizon == total else f"TGREEDY({horizon})"
    return RecommendationOutcome(
        strategy=tag, dataset=dataset, scenario=scenario, chosen=chosen,
        steps_consumed=len(candidates) * horizon,
        gap=gap(table, dataset, scenario, chosen))


def t_greedy(table: ResultsTable, dataset: str, scenario: str,
             t: int) -> RecommendationOutcome:
    """Run every candidate for t steps, pick the best simulated mean."""
    outcome = greedy(table, dataset, scenario, t)
    return replace(outcome, strategy=f"TGREEDY({t})")


def explore_then_prune(table: ResultsTable, dataset: str, scenario: str,
                       t: int, t_max: int) -> RecommendationOutcome:
    """Explore all candidates t steps, then drop the worst each step.

    After the shared exploration phase, each further simulated step first
    removes the candidate with the lowest running mean accuracy (ties
    drop the highest id), then runs the survivors one more step, until
    t_max steps are reached or a single candidate remains. The pick is
    the survivor with the best running mean.
    """
    if not 1 <= t <= t_max:
        raise RecommendError(f"need 1 <= t <= t_max, got t={t}, t_max={t_max}")
    total = table.total_steps_of(scenario)
    if total is not None and t_max > total:
        raise RecommendError(f"t_max {t_max} exceeds the {total}-step scenario")
    survivors = list(_simulated_candidates(table, dataset, scenario))
    executed = t
    consumed = len(survivors) * t

    def running_means():
        return [(c, table.prefix_mean(dataset, scenario, c, Source.SIMULATED, executed))
                for c in survivors]

    while executed < t_max and len(survivors) > 1:
        dropped, _ = _argmin_highest(running_means())
        survivors.remove(dropped)
        executed += 1
        consumed += len(survivors)
    chosen, _ = _argmax_lowest(running_means())
    return RecommendationOutcome(
        strategy=f"EXPLORE_PRUNE({t}, {t_max})", dataset=dataset, scenario=scenario,
        chosen=chosen, steps_consumed=consumed,
        gap=gap(table, dataset, scenario, chosen))


@dataclass(frozen=True)
class AggregateResult:
    per_scenario: dict[str, float]
    per_dataset: dict[str, float]
    overall: float

    def rounded(self, decimals: int = 2) -> "AggregateResult":
        return AggregateResult(
            per_scenario={k: round(v, decimals) for k, v in self.per_scenario.items()},
            per_dataset={k: round(v, decimals) for k, v in self.per_dataset.items()},
            overall=round(self.overall, decimals))


def aggregate(gaps: dict[tuple[str, str], float], *, datasets=None,
              scenarios=None) -> AggregateResult:
    """Mean over datasets (per scenario), scenarios (per dataset), and all.

    ``gaps`` maps (dataset, scenario) to one value; the grid must be
    complete over the declared (or observed) dataset and scenario lists.
    """
    if not gaps:
        raise IncompleteGridError([("<any>", "<any>")])
    datasets = tuple(datasets) if datasets else tuple(sorted({d for d, _ in gaps}))
    scenarios = tuple(scenarios) if scenarios else tuple(sorted({s for _, s in gaps}))
    missing = [(d, s) for d in datasets for s in scenarios if (d, s) not in gaps]
    if missing:
        raise IncompleteGridError(missing)
    per_scenario = {s: math.fsum(gaps[(d, s)] for d in datasets) / len(datasets)
                    for s in scenarios}
    per_dataset = {d: math.fsum(gaps[(d, s)] for s in scenarios) / len(scenarios)
                   for d in datasets}
    overall = math.fsum(gaps[(d, s)] for d in datasets for s in scenarios) / (
        len(datasets) * len(scenarios))
    return AggregateResult(per_scenario, per_dataset, overall)


@dataclass(frozen=True)
class SubsetAblationResult:
    k: int
    subset_count: int
    mean_best_real_aa: float
    strategy_gaps: dict[str, float] = field(default_factory=dict)


def subset_ablation(table: ResultsTable, k: int,
                    strategies: tuple[Strategy, ...] = ()) -> SubsetAblationResult:
    """Restrict the candidate set to every size-k subset and re-run.

    Averages, over all C(|A|, k) subsets and all (dataset, scenario)
    cells, the restricted oracle's real accuracy and (optionally) each
    strategy's gap against the restricted oracle.
    """
    algorithms = table.algorithms
    if not 1 <= k <= len(algorithms):
        raise RecommendError(f"k must lie in 1..{len(algorithms)}, got {k}")
    cells = [(d, s) for d in table.datasets for s in table.scenarios]
    subsets = list(combinations(algorithms, k))
    best_values: list[float] = []
    strategy_values: dict[str, list[float]] = {}
    for subset in subsets:
        restricted = table.restrict(subset)
        for dataset, scenario in cells:
            best_values.append(oracle(restricted, dataset, scenario).real_aa)
            for strategy in strategies:
                outcome = strategy.run(restricted, dataset, scenario)
                strategy_values.setdefault(outcome.strategy, []).append(outcome.gap)
    mean_best = math.fsum(best_values) / len(best_values)
    strategy_gaps = {tag: math.fsum(values) / len(values)
                     for tag, values in strategy_values.items()}
    return SubsetAblationResult(k, len(subsets), mean_best, strategy_gaps)


@dataclass(frozen=True)
class RankExtremes:
    second_best: str
    worst: str
    ranking: tuple[str, ...]


def rank_extremes(table: ResultsTable, dataset: str,
                  scenario: str) -> dict[Source, RankExtremes]:
    """Second-best and worst algorithm per source, by full AA sort."""
    result: dict[Source, RankExtremes] = {}
    for source in Source:
        candidates = table.candidates(dataset, scenario, source)
        if not candidates:
            continue
        if len(candidates) < 2:
            raise RecommendError(
                f"ranking needs at least 2 candidates, {source.value} has "
                f"{len(candidates)}")
        scored = [(c, table.aa(dataset, scenario, c, source)) for c in candidates]
        ranking = tuple(c for c, _ in sorted(scored, key=lambda cv: (-cv[1], cv[0])))
        result[source] = RankExtremes(ranking[1], ranking[-1], ranking)
    if not result:
        raise MissingRecordError(f"no records for ({dataset}, {scenario})")
    return result


def dynamics_trace(table: ResultsTable, strategy: Strategy, dataset: str,
                   scenario: str) -> tuple[float, ...]:
    """Gap of the strategy when only t = 1..T simulated steps are used.

    Greedy-family strategies re-run as t_greedy(t). Explore-then-prune
    keeps its exploration length and prunes up to step t once t reaches
    it; before that it degenerates to t_greedy(t).
    """
    total = table.total_steps_of(scenario)
    if total is None:
        raise RecommendError(f"scenario {scenario} has no step series")
    trace: list[float] = []
    for t in range(1, total + 1):
        if strategy.kind is StrategyKind.EXPLORE_PRUNE and t >= strategy.t:
            outcome = explore_then_prune(table, dataset, scenario, strategy.t, t)
        else:
            outcome = t_greedy(table, dataset, scenario, t)
        trace.append(outcome.gap)
    return tuple(trace)
