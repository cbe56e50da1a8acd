from __future__ import annotations

import csv
import io
import statistics

import pytest

from cilrec.fixtures import (
    DATASETS,
    DERIVABLE_COLUMNS,
    DETAILED_GRID,
    OVERALL,
    PUBLISHED_AGGREGATES,
    PUBLISHED_RANK_DISTANCES,
    PUBLISHED_SECOND_BEST_MEAN,
    PUBLISHED_SUBSET_AVERAGE,
    PUBLISHED_SUBSET_TABLE,
    PUBLISHED_WORST_MEAN,
    SCENARIO_PRINT_ALIASES,
    SCENARIOS,
    STUDY_ALGORITHMS,
    ComparisonCell,
    ComparisonReport,
    FixtureRow,
    compute_aggregates,
    compute_rank_extreme_means,
    compute_subset_reference,
    fixture_results_table,
    generator_choice,
    grid_row,
    proxy_choice,
    reproduce_tables,
    resolve_recorded_choice,
    sanity_check_grid,
)
from cilrec.recommend import Source, oracle


def synthetic_row(**overrides):
    deltas = {"PlaStIL": -1.0, "BSIL": -1.0, "NCM": -2.0, "DSLDA": -3.0,
              "FeTrIL": -4.0, "FeCAM": 0.0}
    deltas.update(overrides)
    return FixtureRow("d", "s", 50.0, 0.0, -1.0, deltas)


# ------------------------------------------------------------------ grid shape

def test_grid_passes_its_own_sanity_check():
    sanity_check_grid()


def test_grid_covers_the_dataset_scenario_product():
    assert len(DETAILED_GRID) == len(DATASETS) * len(SCENARIOS) == 18
    seen = {(row.dataset, row.scenario) for row in DETAILED_GRID}
    assert seen == {(d, s) for d in DATASETS for s in SCENARIOS}


def test_grid_row_lookup_and_missing_cell():
    row = grid_row("IN1k", "(100,10)")
    assert row.rho_ref == 44.05
    assert row.best_algorithm == "BSIL"
    with pytest.raises(KeyError):
        grid_row("IN1k", "(7,7)")


def test_real_aa_is_reference_plus_gap():
    row = grid_row("Land1k", "(500,11)")
    assert row.real_aa("FeCAM") == 78.81
    assert row.real_aa("PlaStIL") == pytest.approx(78.81 - 5.51)


def test_print_aliases_rename_known_scenarios_only():
    assert set(SCENARIO_PRINT_ALIASES) <= set(SCENARIOS)
    for canonical, printed in SCENARIO_PRINT_ALIASES.items():
        assert printed != canonical


# ----------------------------------------------------------- row validation

def test_row_requires_every_algorithm():
    deltas = {a: -1.0 for a in STUDY_ALGORITHMS[:-1]}
    with pytest.raises(ValueError, match="must cover"):
        FixtureRow("d", "s", 50.0, 0.0, 0.0, deltas)


def test_row_requires_exactly_one_zero_gap():
    with pytest.raises(ValueError, match="exactly one"):
        synthetic_row(FeCAM=-0.5)
    with pytest.raises(ValueError, match="exactly one"):
        synthetic_row(PlaStIL=0.0)


def test_row_rejects_positive_gaps():
    with pytest.raises(ValueError, match="must be <= 0"):
        synthetic_row(NCM=0.5)


# --------------------------------------------------------- recorded choices

def test_zero_gap_resolves_to_the_best_algorithm():
    row = grid_row("iNat1k", "(20,50)")
    assert resolve_recorded_choice(row, 0.0) == row.best_algorithm == "FeCAM"


def test_nonzero_gap_resolves_to_its_unique_carrier():
    row = grid_row("Land1k", "(500,11)")
    assert resolve_recorded_choice(row, -0.62) == "NCM"
    assert resolve_recorded_choice(row, -0.63) == "FeTrIL"


def test_ambiguous_gap_resolves_to_the_lowest_name():
    assert resolve_recorded_choice(synthetic_row(), -1.0) == "BSIL"


def test_unmatched_gap_raises():
    with pytest.raises(ValueError, match="matches no algorithm"):
        resolve_recorded_choice(synthetic_row(), -9.9)


def test_generator_and_proxy_choices_read_the_grid():
    assert generator_choice("IN1k", "(100,10)") == "BSIL"
    assert proxy_choice("IN1k", "(100,10)") == "PlaStIL"
    assert generator_choice("Land1k", "(100,10)") == "FeCAM"
    assert proxy_choice("Land1k", "(100,10)") == "PlaStIL"


def test_every_cell_has_resolvable_recorded_choices():
    for row in DETAILED_GRID:
        assert generator_choice(row.dataset, row.scenario) in STUDY_ALGORITHMS
        assert proxy_choice(row.dataset, row.scenario) in STUDY_ALGORITHMS


# ------------------------------------------------------------ results table

def test_fixture_table_holds_every_real_run():
    table = fixture_results_table()
    assert len(table.algorithms) == len(STUDY_ALGORITHMS)
    pick = oracle(table, "IN1k", "(100,10)")
    assert pick.algorithm_id == "BSIL"
    assert pick.real_aa == 44.05


def test_oracle_on_the_table_matches_the_zero_gap_column():
    table = fixture_results_table()
    for row in DETAILED_GRID:
        assert oracle(table, row.dataset, row.scenario).algorithm_id == \
            row.best_algorithm


# ---------------------------------------------------------- aggregate oracle
# Independent route: plain statistics.mean over rows selected by loops
# written here, compared cell-by-cell against compute_aggregates().

def independent_aggregates():
    def cell(row, column):
        if column == "rho_ref":
            return row.rho_ref
        if column == "gen_T":
            return row.delta_gen
        if column == "proxy_T":
            return row.delta_proxy
        if column == "advisil":
            return row.deltas["FeCAM"]
        return row.deltas[column]

    result = {}
    for column in DERIVABLE_COLUMNS:
        by_scenario = {s: statistics.mean(
            cell(r, column) for r in DETAILED_GRID if r.scenario == s)
            for s in SCENARIOS}
        by_dataset = {d: statistics.mean(
            cell(r, column) for r in DETAILED_GRID if r.dataset == d)
            for d in DATASETS}
        overall = statistics.mean(cell(r, column) for r in DETAILED_GRID)
        result[column] = {**by_scenario, **by_dataset, OVERALL: overall}
    return result


def test_aggregates_match_an_independent_mean():
    computed = compute_aggregates()
    expected = independent_aggregates()
    for column in DERIVABLE_COLUMNS:
        for row_label in list(SCENARIOS) + list(DATASETS) + [OVERALL]:
            assert computed[row_label][column] == \
                pytest.approx(expected[column][row_label], abs=1e-12)


def test_every_derivable_published_cell_reproduces_within_rounding():
    computed = compute_aggregates()
    for row_label, published_row in PUBLISHED_AGGREGATES.items():
        for column in DERIVABLE_COLUMNS:
            assert computed[row_label][column] == \
                pytest.approx(published_row[column], abs=0.01), \
                f"{row_label}/{column}"


def test_published_static_recommendation_column_equals_fecam():
    for row_label, published_row in PUBLISHED_AGGREGATES.items():
        assert published_row["advisil"] == published_row["FeCAM"], row_label


def test_overall_row_spot_values():
    overall = compute_aggregates()[OVERALL]
    assert overall["rho_ref"] == pytest.approx(61.02, abs=0.01)
    assert overall["gen_T"] == pytest.approx(-0.32, abs=0.01)
    assert overall["proxy_T"] == pytest.approx(-1.20, abs=0.01)
    assert overall["advisil"] == pytest.approx(-2.40, abs=0.01)


# ------------------------------------------------------------ subset ablation

def test_full_subset_equals_the_mean_reference():
    expected = statistics.mean(row.rho_ref for row in DETAILED_GRID)
    assert compute_subset_reference(6) == pytest.approx(expected, abs=1e-9)


def test_single_algorithm_subsets_average_every_run():
    expected = statistics.mean(row.real_aa(a) for row in DETAILED_GRID
                               for a in STUDY_ALGORITHMS)
    assert compute_subset_reference(1) == pytest.approx(expected, abs=1e-9)


@pytest.mark.parametrize("k", sorted(PUBLISHED_SUBSET_TABLE))
def test_subset_reference_matches_the_published_row(k):
    assert compute_subset_reference(k) == \
        pytest.approx(PUBLISHED_SUBSET_TABLE[k]["rho_ref_k"], abs=0.01)


def test_subset_reference_grows_with_portfolio_size():
    values = [compute_subset_reference(k) for k in range(1, 7)]
    assert values == sorted(values)


def test_subset_average_row_matches():
    mean = statistics.mean(compute_subset_reference(k) for k in range(1, 7))
    assert mean == pytest.approx(PUBLISHED_SUBSET_AVERAGE["rho_ref_k"], abs=0.01)


# -------------------------------------------------------------- rank extremes

def test_rank_extreme_means_match_a_direct_sort():
    second, worst = [], []
    for row in DETAILED_GRID:
        ranked = sorted((row.real_aa(a) for a in STUDY_ALGORITHMS), reverse=True)
        second.append(ranked[1])
        worst.append(ranked[-1])
    computed = compute_rank_extreme_means()
    assert computed["second_best"] == pytest.approx(statistics.mean(second), abs=1e-9)
    assert computed["worst"] == pytest.approx(statistics.mean(worst), abs=1e-9)


def test_rank_extreme_means_match_published_values():
    computed = compute_rank_extreme_means()
    assert computed["second_best"] == pytest.approx(PUBLISHED_SECOND_BEST_MEAN,
                                                    abs=0.01)
    assert computed["worst"] == pytest.approx(PUBLISHED_WORST_MEAN, abs=0.01)


def test_rank_distances_are_recorded_for_both_simulations():
    assert set(PUBLISHED_RANK_DISTANCES) == {"second_best", "worst"}
    for distances in PUBLISHED_RANK_DISTANCES.values():
        assert set(distances) == {"gen", "proxy"}


# ------------------------------------------------------------- reproduction

def test_reproduction_report_passes_at_the_stated_tolerance():
    report = reproduce_tables()
    assert report.tolerance == 0.01
    assert report.passed
    assert report.failures == ()


def test_reproduction_report_covers_every_published_cell():
    report = reproduce_tables()
    table1 = [c for c in report.cells if c.table == "table1"]
    subsets = [c for c in report.cells if c.table == "subsets"]
    extremes = [c for c in report.cells if c.table == "extremes"]
    assert len(table1) == len(PUBLISHED_AGGREGATES) * 16
    assert len(subsets) == len(PUBLISHED_SUBSET_TABLE) * 3 + 1
    assert len(extremes) == 2
    recorded = [c for c in table1 if c.status == "recorded"]
    assert all(c.computed is None for c in recorded)
    assert len(recorded) == len(PUBLISHED_AGGREGATES) * 6


def test_reproduction_fails_at_an_unreachable_tolerance():
    # Published values are rounded to two decimals, so a tolerance far
    # below the rounding grain must report failures.
    report = reproduce_tables(tolerance=1e-9)
    assert not report.passed
    assert all(c.status in ("ok", "fail", "recorded") for c in report.cells)


def test_text_report_mentions_verdict_and_recorded_cells():
    text = reproduce_tables().to_text()
    assert text.startswith("tolerance ±0.01")
    assert "(recorded only)" in text
    assert text.rstrip().endswith("result: PASS")
    failing = ComparisonReport(0.01, (
        ComparisonCell("table1", OVERALL, "rho_ref", 61.02, 99.0, "fail"),))
    assert "FAIL (1 cells)" in failing.to_text()


def test_csv_report_is_well_formed():
    rows = list(csv.reader(io.StringIO(reproduce_tables().to_csv())))
    assert rows[0] == ["table", "row", "column", "published", "computed",
                       "abs_diff", "status"]
    assert len(rows) == 1 + len(reproduce_tables().cells)
    for row in rows[1:]:
        assert len(row) == 7
        assert row[6] in ("ok", "fail", "recorded")
        if row[6] == "recorded":
            assert row[4] == "" and row[5] == ""
        else:
            assert float(row[5]) <= 0.01


def test_comparison_cell_difference():
    cell = ComparisonCell("t", "r", "c", 1.0, 1.25, "fail")
    assert cell.difference == 0.25
    assert ComparisonCell("t", "r", "c", 1.0, None, "recorded").difference is None
