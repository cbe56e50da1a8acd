"""Published benchmark results embedded as fixtures.

The study behind these numbers ran six incremental learners over three
1000-class image datasets under six scenarios, reporting for each
(dataset, scenario) cell the best real average incremental accuracy
(rho_ref), each algorithm's gap to it, and the gaps of the picks made
from generator-based and proxy-dataset simulations. Those runs need
GPU-scale training, so the per-cell grid ships here as data and every
aggregate table is recomputed from it.

Columns that the source reports only in aggregate form (the "effi",
3-step, and half-horizon strategy variants, and the simulated-pick
columns of the subset ablation) cannot be rebuilt from the grid; they
are carried as recorded values and marked as such in comparisons.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .recommend import (ResultsTable, Source, oracle, rank_extremes,
                        subset_ablation)

STUDY_ALGORITHMS = ("PlaStIL", "BSIL", "NCM", "DSLDA", "FeTrIL", "FeCAM")

DATASETS = ("IN1k", "iNat1k", "Land1k")

SCENARIOS = ("(20,50)", "(100,10)", "(200,5)", "(500,6)", "(500,11)", "(500,101)")

# Two scenario labels appear under slightly different names in the
# source's aggregate table; the canonical keys above follow the detailed
# grid ((initial classes, total steps)).
SCENARIO_PRINT_ALIASES = {"(20,50)": "(20, 49)", "(500,6)": "(500, 5)"}

OVERALL = "overall"


@dataclass(frozen=True)
class FixtureRow:
    """One (dataset, scenario) cell of the detailed results grid."""

    dataset: str
    scenario: str
    rho_ref: float
    delta_gen: float
    delta_proxy: float
    deltas: dict[str, float]

    def __post_init__(self) -> None:
        if set(self.deltas) != set(STUDY_ALGORITHMS):
            raise ValueError(f"row {self.dataset}/{self.scenario} must cover "
                             f"all of {STUDY_ALGORITHMS}")
        zeros = [a for a in STUDY_ALGORITHMS if self.deltas[a] == 0.0]
        if len(zeros) != 1:
            raise ValueError(
                f"row {self.dataset}/{self.scenario} must have exactly one "
                f"zero gap, found {zeros}")
        for name, value in self.deltas.items():
            if value > 0:
                raise ValueError(f"gap for {name} must be <= 0, got {value}")

    @property
    def best_algorithm(self) -> str:
        return next(a for a in STUDY_ALGORITHMS if self.deltas[a] == 0.0)

    def real_aa(self, algorithm: str) -> float:
        return self.rho_ref + self.deltas[algorithm]


def _row(dataset, scenario, rho_ref, gen, proxy, *deltas) -> FixtureRow:
    return FixtureRow(dataset, scenario, rho_ref, gen, proxy,
                      dict(zip(STUDY_ALGORITHMS, deltas)))


# Column order of the trailing six values: PlaStIL, BSIL, NCM, DSLDA,
# FeTrIL, FeCAM.
DETAILED_GRID: tuple[FixtureRow, ...] = (
    _row("IN1k", "(20,50)", 28.07, 0.0, 0.0, -9.06, -11.86, -12.82, -1.61, -2.39, 0.0),
    _row("IN1k", "(100,10)", 44.05, 0.0, -3.82, -3.82, 0.0, -7.85, -3.08, -1.28, -0.94),
    _row("IN1k", "(200,5)", 54.64, 0.0, 0.0, -6.29, 0.0, -9.27, -8.15, -5.80, -5.71),
    _row("IN1k", "(500,6)", 56.35, -0.41, -0.41, -5.65, 0.0, -0.56, -2.54, -1.89, -0.41),
    _row("IN1k", "(500,11)", 55.72, 0.0, 0.0, -11.50, -7.24, -0.05, -2.01, -2.18, 0.0),
    _row("IN1k", "(500,101)", 55.58, -0.04, -0.04, -48.89, -48.41, 0.0, -1.95, -4.45, -0.04),
    _row("iNat1k", "(20,50)", 30.91, 0.0, 0.0, -10.34, -7.64, -13.40, -2.00, -2.52, 0.0),
    _row("iNat1k", "(100,10)", 57.59, 0.0, 0.0, -10.20, 0.0, -15.04, -10.11, -7.11, -7.18),
    _row("iNat1k", "(200,5)", 66.22, 0.0, 0.0, -7.60, 0.0, -12.05, -12.25, -8.02, -8.50),
    _row("iNat1k", "(500,6)", 71.55, 0.0, -1.93, -6.93, 0.0, -1.96, -6.41, -3.32, -1.93),
    _row("iNat1k", "(500,11)", 69.41, -0.14, -0.14, -12.19, -2.62, 0.0, -4.38, -2.13, -0.14),
    _row("iNat1k", "(500,101)", 69.26, -0.28, -0.28, -63.46, -62.98, 0.0, -4.32, -3.76, -0.28),
    _row("Land1k", "(20,50)", 46.39, 0.0, 0.0, -15.64, -15.13, -24.79, -3.31, -8.14, 0.0),
    _row("Land1k", "(100,10)", 70.02, -4.22, -4.97, -4.97, 0.0, -15.74, -7.48, -7.38, -4.22),
    _row("Land1k", "(200,5)", 79.95, 0.0, -3.30, -3.30, 0.0, -12.99, -11.22, -7.53, -7.69),
    _row("Land1k", "(500,6)", 85.28, 0.0, -5.57, -5.57, 0.0, -6.91, -9.59, -5.76, -6.18),
    _row("Land1k", "(500,11)", 78.81, -0.63, -0.62, -5.51, -0.49, -0.62, -3.24, -0.63, 0.0),
    _row("Land1k", "(500,101)", 78.55, 0.0, -0.49, -68.41, -67.94, -0.49, -3.09, -2.68, 0.0),
)

assert len(DETAILED_GRID) == 18

_GRID_INDEX = {(row.dataset, row.scenario): row for row in DETAILED_GRID}


def grid_row(dataset: str, scenario: str) -> FixtureRow:
    try:
        return _GRID_INDEX[(dataset, scenario)]
    except KeyError:
        raise KeyError(f"no fixture row for ({dataset}, {scenario})") from None


def fixture_results_table() -> ResultsTable:
    """The detailed grid as a real-results table (AA values in percent)."""
    table = ResultsTable()
    for row in DETAILED_GRID:
        for algorithm in STUDY_ALGORITHMS:
            table.add_aa(row.dataset, row.scenario, algorithm, Source.REAL, 0,
                         row.real_aa(algorithm))
    return table


def resolve_recorded_choice(row: FixtureRow, recorded_gap: float) -> str:
    """Map a recorded strategy gap back to the algorithm it implies.

    A zero gap means the strategy agreed with the best algorithm; other
    values match the unique algorithm carrying that gap. Ambiguous
    matches resolve to the lowest algorithm name.
    """
    if recorded_gap == 0.0:
        return row.best_algorithm
    matches = sorted(a for a in STUDY_ALGORITHMS
                     if row.deltas[a] == recorded_gap)
    if not matches:
        raise ValueError(
            f"recorded gap {recorded_gap} matches no algorithm in "
            f"{row.dataset}/{row.scenario}")
    return matches[0]


def generator_choice(dataset: str, scenario: str) -> str:
    row = grid_row(dataset, scenario)
    return resolve_recorded_choice(row, row.delta_gen)


def proxy_choice(dataset: str, scenario: str) -> str:
    row = grid_row(dataset, scenario)
    return resolve_recorded_choice(row, row.delta_proxy)


# Published aggregate tables. Keys: the six scenario rows, the three
# dataset rows, and the overall row. Column keys: rho_ref; gen_*/proxy_*
# for the simulation-based strategies (T = full horizon, half = ceil(T/2),
# 3 = three steps, effi = explore-then-prune); advisil for the static
# recommender the study compares against; one column per algorithm.
PUBLISHED_AGGREGATES: dict[str, dict[str, float]] = {
    "(20,50)": {"rho_ref": 35.12, "gen_T": 0.0, "gen_effi": -3.95, "gen_3": -3.95,
                "gen_half": 0.0, "proxy_T": 0.0, "proxy_effi": -2.55, "proxy_3": -6.5,
                "proxy_half": 0.0, "advisil": 0.0, "PlaStIL": -11.68, "BSIL": -11.54,
                "NCM": -17.0, "DSLDA": -2.31, "FeTrIL": -4.35, "FeCAM": 0.0},
    "(100,10)": {"rho_ref": 57.22, "gen_T": -1.41, "gen_effi": 0.0, "gen_3": 0.0,
                 "gen_half": 0.0, "proxy_T": -2.93, "proxy_effi": -1.66,
                 "proxy_3": -1.66, "proxy_half": -1.66, "advisil": -4.11,
                 "PlaStIL": -6.33, "BSIL": 0.0, "NCM": -12.88, "DSLDA": -6.89,
                 "FeTrIL": -5.26, "FeCAM": -4.11},
    "(200,5)": {"rho_ref": 66.94, "gen_T": 0.0, "gen_effi": 0.0, "gen_3": 0.0,
                "gen_half": 0.0, "proxy_T": -1.1, "proxy_effi": -1.1, "proxy_3": -1.1,
                "proxy_half": -1.1, "advisil": -7.3, "PlaStIL": -5.73, "BSIL": 0.0,
                "NCM": -11.44, "DSLDA": -10.54, "FeTrIL": -7.12, "FeCAM": -7.3},
    "(500,6)": {"rho_ref": 71.06, "gen_T": -0.14, "gen_effi": 0.0, "gen_3": 0.0,
                "gen_half": 0.0, "proxy_T": -2.64, "proxy_effi": -1.99,
                "proxy_3": -1.86, "proxy_half": -1.86, "advisil": -2.84,
                "PlaStIL": -6.05, "BSIL": 0.0, "NCM": -3.14, "DSLDA": -6.18,
                "FeTrIL": -3.66, "FeCAM": -2.84},
    "(500,11)": {"rho_ref": 67.98, "gen_T": -0.26, "gen_effi": -0.26, "gen_3": -3.5,
                 "gen_half": -1.08, "proxy_T": -0.25, "proxy_effi": -0.22,
                 "proxy_3": -1.05, "proxy_half": -0.22, "advisil": -0.05,
                 "PlaStIL": -9.73, "BSIL": -3.45, "NCM": -0.22, "DSLDA": -3.21,
                 "FeTrIL": -1.65, "FeCAM": -0.05},
    "(500,101)": {"rho_ref": 67.8, "gen_T": -0.11, "gen_effi": -0.16, "gen_3": -0.89,
                  "gen_half": -0.11, "proxy_T": -0.27, "proxy_effi": -0.16,
                  "proxy_3": -0.16, "proxy_half": -0.16, "advisil": -0.11,
                  "PlaStIL": -60.25, "BSIL": -59.78, "NCM": -0.16, "DSLDA": -3.12,
                  "FeTrIL": -3.63, "FeCAM": -0.11},
    "IN1k": {"rho_ref": 49.07, "gen_T": -0.08, "gen_effi": -1.98, "gen_3": -3.18,
             "gen_half": -0.01, "proxy_T": -0.71, "proxy_effi": -0.08,
             "proxy_3": -1.98, "proxy_half": -0.01, "advisil": -1.18,
             "PlaStIL": -14.2, "BSIL": -11.25, "NCM": -5.09, "DSLDA": -3.22,
             "FeTrIL": -3.0, "FeCAM": -1.18},
    "iNat1k": {"rho_ref": 60.82, "gen_T": -0.07, "gen_effi": -0.02, "gen_3": -0.44,
               "gen_half": -0.48, "proxy_T": -0.39, "proxy_effi": -1.27,
               "proxy_3": -1.71, "proxy_half": 0.0, "advisil": -3.01,
               "PlaStIL": -18.45, "BSIL": -12.21, "NCM": -7.08, "DSLDA": -6.58,
               "FeTrIL": -4.48, "FeCAM": -3.01},
    "Land1k": {"rho_ref": 73.17, "gen_T": -0.81, "gen_effi": -0.19, "gen_3": -0.55,
               "gen_half": -0.1, "proxy_T": -2.49, "proxy_effi": -2.49,
               "proxy_3": -2.47, "proxy_half": -2.49, "advisil": -3.02,
               "PlaStIL": -17.23, "BSIL": -13.93, "NCM": -10.26, "DSLDA": -6.32,
               "FeTrIL": -5.35, "FeCAM": -3.02},
    OVERALL: {"rho_ref": 61.02, "gen_T": -0.32, "gen_effi": -0.73, "gen_3": -1.39,
              "gen_half": -0.2, "proxy_T": -1.2, "proxy_effi": -1.28,
              "proxy_3": -2.06, "proxy_half": -0.83, "advisil": -2.4,
              "PlaStIL": -16.63, "BSIL": -12.46, "NCM": -7.47, "DSLDA": -5.37,
              "FeTrIL": -4.28, "FeCAM": -2.4},
}

# Columns whose per-cell values live in the detailed grid; everything
# else is aggregate-only in the source.
DERIVABLE_COLUMNS = ("rho_ref", "gen_T", "proxy_T", "advisil") + STUDY_ALGORITHMS

# Candidate-subset ablation: restricting the portfolio to every size-k
# subset. rho_ref_k is derivable; the strategy rows are recorded means.
PUBLISHED_SUBSET_TABLE: dict[int, dict[str, float]] = {
    1: {"rho_ref_k": 52.92, "gen_k": 0.0, "proxy_k": 0.0},
    2: {"rho_ref_k": 57.70, "gen_k": -0.32, "proxy_k": -0.67},
    3: {"rho_ref_k": 59.40, "gen_k": -0.28, "proxy_k": -0.82},
    4: {"rho_ref_k": 60.09, "gen_k": -0.29, "proxy_k": -0.98},
    5: {"rho_ref_k": 60.60, "gen_k": -0.32, "proxy_k": -1.12},
    6: {"rho_ref_k": 61.02, "gen_k": -0.32, "proxy_k": -1.2},
}
PUBLISHED_SUBSET_AVERAGE = {"rho_ref_k": 58.62, "gen_k": -0.26, "proxy_k": -0.8}

# Rank extremes over the grid: the mean real AA of the second-best and
# of the worst algorithm per cell (the study also reports how far the
# simulations land from those targets; recorded-only).
PUBLISHED_SECOND_BEST_MEAN = 58.51
PUBLISHED_WORST_MEAN = 41.23
PUBLISHED_RANK_DISTANCES = {
    "second_best": {"gen": -0.39, "proxy": -0.74},
    "worst": {"gen": 2.01, "proxy": 2.73},
}


def _grid_aggregate(per_cell) -> dict[str, float]:
    """Scenario rows, dataset rows, and the overall mean of a cell map."""
    rows: dict[str, float] = {}
    for scenario in SCENARIOS:
        values = [per_cell[(d, scenario)] for d in DATASETS]
        rows[scenario] = math.fsum(values) / len(values)
    for dataset in DATASETS:
        values = [per_cell[(dataset, s)] for s in SCENARIOS]
        rows[dataset] = math.fsum(values) / len(values)
    everything = [per_cell[(d, s)] for d in DATASETS for s in SCENARIOS]
    rows[OVERALL] = math.fsum(everything) / len(everything)
    return rows


def compute_aggregates() -> dict[str, dict[str, float]]:
    """Recompute every derivable aggregate column from the grid."""
    columns: dict[str, dict[tuple[str, str], float]] = {}
    columns["rho_ref"] = {(r.dataset, r.scenario): r.rho_ref for r in DETAILED_GRID}
    columns["gen_T"] = {(r.dataset, r.scenario): r.delta_gen for r in DETAILED_GRID}
    columns["proxy_T"] = {(r.dataset, r.scenario): r.delta_proxy
                          for r in DETAILED_GRID}
    # the static recommender always proposes FeCAM, so its gap column is
    # FeCAM's
    columns["advisil"] = {(r.dataset, r.scenario): r.deltas["FeCAM"]
                          for r in DETAILED_GRID}
    for algorithm in STUDY_ALGORITHMS:
        columns[algorithm] = {(r.dataset, r.scenario): r.deltas[algorithm]
                              for r in DETAILED_GRID}
    result: dict[str, dict[str, float]] = {key: {} for key in PUBLISHED_AGGREGATES}
    for column, per_cell in columns.items():
        for row_label, value in _grid_aggregate(per_cell).items():
            result[row_label][column] = value
    return result


def compute_subset_reference(k: int) -> float:
    """Mean best real AA over all size-k candidate subsets and cells."""
    return subset_ablation(fixture_results_table(), k).mean_best_real_aa


def compute_rank_extreme_means() -> dict[str, float]:
    """Mean real AA of the per-cell second-best and worst algorithms."""
    table = fixture_results_table()
    second, worst = [], []
    for row in DETAILED_GRID:
        extremes = rank_extremes(table, row.dataset, row.scenario)[Source.REAL]
        second.append(row.real_aa(extremes.second_best))
        worst.append(row.real_aa(extremes.worst))
    return {"second_best": math.fsum(second) / len(second),
            "worst": math.fsum(worst) / len(worst)}


@dataclass(frozen=True)
class ComparisonCell:
    table: str
    row: str
    column: str
    published: float
    computed: float | None
    status: str  # "ok" | "fail" | "recorded"

    @property
    def difference(self) -> float | None:
        if self.computed is None:
            return None
        return abs(self.computed - self.published)


@dataclass(frozen=True)
class ComparisonReport:
    tolerance: float
    cells: tuple[ComparisonCell, ...]

    @property
    def failures(self) -> tuple[ComparisonCell, ...]:
        return tuple(c for c in self.cells if c.status == "fail")

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_text(self) -> str:
        lines = [f"tolerance ±{self.tolerance}"]
        for cell in self.cells:
            if cell.computed is None:
                lines.append(f"{cell.table:9s} {cell.row:10s} {cell.column:12s} "
                             f"published={cell.published:8.2f}  (recorded only)")
            else:
                lines.append(f"{cell.table:9s} {cell.row:10s} {cell.column:12s} "
                             f"published={cell.published:8.2f} "
                             f"computed={cell.computed:9.4f} "
                             f"|diff|={cell.difference:.4f} {cell.status}")
        verdict = "PASS" if self.passed else f"FAIL ({len(self.failures)} cells)"
        lines.append(f"result: {verdict}")
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        lines = ["table,row,column,published,computed,abs_diff,status"]
        for cell in self.cells:
            computed = "" if cell.computed is None else f"{cell.computed:.6f}"
            diff = "" if cell.difference is None else f"{cell.difference:.6f}"
            lines.append(f"{cell.table},\"{cell.row}\",{cell.column},"
                         f"{cell.published},{computed},{diff},{cell.status}")
        return "\n".join(lines) + "\n"


def reproduce_tables(tolerance: float = 0.01) -> ComparisonReport:
    """Rebuild every derivable published aggregate and compare."""
    cells: list[ComparisonCell] = []
    computed = compute_aggregates()
    derivable = set(DERIVABLE_COLUMNS)
    for row_label, published_row in PUBLISHED_AGGREGATES.items():
        for column, published in published_row.items():
            if column in derivable:
                value = computed[row_label][column]
                status = "ok" if abs(value - published) <= tolerance else "fail"
                cells.append(ComparisonCell("table1", row_label, column,
                                            published, value, status))
            else:
                cells.append(ComparisonCell("table1", row_label, column,
                                            published, None, "recorded"))
    for k, published_row in PUBLISHED_SUBSET_TABLE.items():
        value = compute_subset_reference(k)
        published = published_row["rho_ref_k"]
        status = "ok" if abs(value - published) <= tolerance else "fail"
        cells.append(ComparisonCell("subsets", f"k={k}", "rho_ref_k",
                                    published, value, status))
        for column in ("gen_k", "proxy_k"):
            cells.append(ComparisonCell("subsets", f"k={k}", column,
                                        published_row[column], None, "recorded"))
    mean_of_refs = math.fsum(compute_subset_reference(k)
                             for k in PUBLISHED_SUBSET_TABLE) / len(PUBLISHED_SUBSET_TABLE)
    status = ("ok" if abs(mean_of_refs - PUBLISHED_SUBSET_AVERAGE["rho_ref_k"])
              <= tolerance else "fail")
    cells.append(ComparisonCell("subsets", "average", "rho_ref_k",
                                PUBLISHED_SUBSET_AVERAGE["rho_ref_k"],
                                mean_of_refs, status))
    extremes = compute_rank_extreme_means()
    for name, published in (("second_best", PUBLISHED_SECOND_BEST_MEAN),
                            ("worst", PUBLISHED_WORST_MEAN)):
        value = extremes[name]
        status = "ok" if abs(value - published) <= tolerance else "fail"
        cells.append(ComparisonCell("extremes", name, "mean_real_aa",
                                    published, value, status))
    return ComparisonReport(tolerance, tuple(cells))


def sanity_check_grid() -> None:
    """Internal consistency of the embedded grid; raises on violation."""
    if len(DETAILED_GRID) != 18:
        raise AssertionError(f"expected 18 rows, found {len(DETAILED_GRID)}")
    seen = {(r.dataset, r.scenario) for r in DETAILED_GRID}
    expected = {(d, s) for d in DATASETS for s in SCENARIOS}
    if seen != expected:
        raise AssertionError("grid does not cover the dataset x scenario product")
    table = fixture_results_table()
    for row in DETAILED_GRID:
        pick = oracle(table, row.dataset, row.scenario)
        if pick.algorithm_id != row.best_algorithm:
            raise AssertionError(
                f"oracle {pick.algorithm_id} disagrees with the zero-gap "
                f"algorithm {row.best_algorithm} in {row.dataset}/{row.scenario}")
        generator_choice(row.dataset, row.scenario)
        proxy_choice(row.dataset, row.scenario)
