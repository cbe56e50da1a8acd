from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, strategies as st

from cilrec.embeddings import (
    EmbeddingError,
    EmbeddingSet,
    distance_distribution_csv,
    mean_distance_distribution,
    name_overlap,
    nearest_neighbor_distances,
    nn_threshold_table,
    threshold_table_csv,
)
from cilrec.feature_store import save_feature_store


def unit_rows(count, dimension, seed=0):
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((count, dimension))
    return rows / np.linalg.norm(rows, axis=1, keepdims=True)


def embedding_set(count, dimension, seed=0, prefix="label"):
    return EmbeddingSet(tuple(f"{prefix}{i}" for i in range(count)),
                        unit_rows(count, dimension, seed))


BASIS = np.eye(3)


# -------------------------------------------------------------- construction

def test_set_exposes_labels_dimension_and_length():
    made = embedding_set(4, 7)
    assert made.labels == ("label0", "label1", "label2", "label3")
    assert made.dimension == 7
    assert len(made) == 4


def test_vectors_are_frozen():
    made = embedding_set(2, 3)
    with pytest.raises(ValueError):
        made.vectors[0, 0] = 9.0


def test_labels_are_coerced_to_strings():
    made = EmbeddingSet((1, 2), BASIS[:2])
    assert made.labels == ("1", "2")


def test_empty_set_is_rejected():
    with pytest.raises(EmbeddingError, match="empty"):
        EmbeddingSet((), np.zeros((0, 3)))


def test_duplicate_labels_are_rejected():
    with pytest.raises(EmbeddingError, match="unique"):
        EmbeddingSet(("a", "a"), BASIS[:2])


def test_row_count_must_match_labels():
    with pytest.raises(EmbeddingError, match="vector rows"):
        EmbeddingSet(("a", "b", "c"), BASIS[:2])


def test_rows_must_be_unit_norm():
    with pytest.raises(EmbeddingError, match="unit norm"):
        EmbeddingSet(("a", "b"), np.array([[1.0, 0.0, 0.0], [0.0, 2.0, 0.0]]))


def test_from_vectors_can_normalize():
    made = EmbeddingSet.from_vectors(("a", "b"), [[3.0, 0.0], [0.0, 0.5]],
                                     normalize=True)
    assert np.array_equal(made.vectors, np.eye(2))


def test_normalizing_a_zero_vector_fails():
    with pytest.raises(EmbeddingError, match="zero vector"):
        EmbeddingSet.from_vectors(("a", "b"), [[1.0, 0.0], [0.0, 0.0]],
                                  normalize=True)


def test_from_feature_store_loads_one_vector_per_label(tmp_path):
    raw = unit_rows(3, 5, seed=2).astype(np.float32)
    manifest = save_feature_store(
        tmp_path, 5, {7: ("oak", raw[:1]), 8: ("pine", raw[1:2]),
                      9: ("fir", raw[2:])})
    made = EmbeddingSet.from_feature_store(manifest, normalize=True)
    assert made.labels == ("oak", "pine", "fir")
    assert made.dimension == 5
    assert np.allclose(made.vectors, raw.astype(np.float64), atol=1e-7)


def test_from_feature_store_rejects_multi_row_classes(tmp_path):
    manifest = save_feature_store(
        tmp_path, 3, {1: ("oak", np.eye(3, dtype=np.float32))})
    with pytest.raises(EmbeddingError, match="exactly one"):
        EmbeddingSet.from_feature_store(manifest)


# -------------------------------------------------------- distance summaries

def test_mean_distances_on_known_geometry():
    real = EmbeddingSet(("x", "y"), BASIS[:2])
    simulated = EmbeddingSet(("still_x", "opposite_x"),
                             np.array([[1.0, 0, 0], [-1.0, 0, 0]]))
    by_real = mean_distance_distribution(real, simulated)
    # x sees distances 0 and 2; y is orthogonal to both simulated rows.
    assert by_real == {"x": 1.0, "y": 1.0}
    by_sim = mean_distance_distribution(real, simulated, per="simulated")
    assert by_sim == {"still_x": 0.5, "opposite_x": 1.5}


def test_mean_distances_match_a_pairwise_oracle():
    real = embedding_set(6, 9, seed=3, prefix="r")
    simulated = embedding_set(4, 9, seed=4, prefix="s")
    summary = mean_distance_distribution(real, simulated)
    for index, label in enumerate(real.labels):
        pair_means = np.mean([1.0 - float(np.dot(real.vectors[index], row))
                              for row in simulated.vectors])
        assert summary[label] == pytest.approx(pair_means, abs=1e-12)


def test_mean_distances_validate_direction_and_dimension():
    with pytest.raises(EmbeddingError, match="per must be"):
        mean_distance_distribution(embedding_set(2, 3), embedding_set(2, 3),
                                   per="both")
    with pytest.raises(EmbeddingError, match="dimension mismatch"):
        mean_distance_distribution(embedding_set(2, 3), embedding_set(2, 4))


# ---------------------------------------------------------- nearest neighbor

def test_nearest_distance_is_zero_for_shared_vectors():
    real = EmbeddingSet(("x", "y", "z"), BASIS)
    simulated = EmbeddingSet(("also_y",), BASIS[1:2])
    assert nearest_neighbor_distances(simulated, real).tolist() == [0.0]


def test_nearest_distances_match_a_brute_force_search():
    # The oracle walks every pair of the shared distance matrix and keeps
    # the running minimum; equality is bitwise.
    simulated = embedding_set(40, 16, seed=5, prefix="s")
    real = embedding_set(60, 16, seed=6, prefix="r")
    fast = nearest_neighbor_distances(simulated, real)
    distances = 1.0 - simulated.vectors @ real.vectors.T
    slow = []
    for i in range(len(simulated)):
        best = distances[i, 0]
        for j in range(1, len(real)):
            if distances[i, j] < best:
                best = distances[i, j]
        slow.append(best)
    assert np.array_equal(fast, np.array(slow))


def test_nearest_distances_ignore_real_set_order():
    simulated = embedding_set(10, 8, seed=7, prefix="s")
    real = embedding_set(20, 8, seed=8, prefix="r")
    order = np.random.default_rng(9).permutation(len(real))
    shuffled = EmbeddingSet(tuple(real.labels[i] for i in order),
                            real.vectors[order])
    assert np.array_equal(nearest_neighbor_distances(simulated, real),
                          nearest_neighbor_distances(simulated, shuffled))


def test_nearest_distances_survive_a_shared_rotation():
    simulated = embedding_set(10, 8, seed=10, prefix="s")
    real = embedding_set(20, 8, seed=11, prefix="r")
    rotation, _ = np.linalg.qr(np.random.default_rng(12).standard_normal((8, 8)))
    turned_sim = EmbeddingSet.from_vectors(simulated.labels,
                                           simulated.vectors @ rotation,
                                           normalize=True)
    turned_real = EmbeddingSet.from_vectors(real.labels,
                                            real.vectors @ rotation,
                                            normalize=True)
    assert np.allclose(nearest_neighbor_distances(simulated, real),
                       nearest_neighbor_distances(turned_sim, turned_real),
                       atol=1e-10)


# ------------------------------------------------------------ threshold table

def test_threshold_table_counts_a_known_geometry():
    real = EmbeddingSet(("x", "y"), BASIS[:2])
    diagonal = np.array([[1.0, 1.0, 0.0]]) / np.sqrt(2.0)
    simulated = EmbeddingSet(("x2", "mix", "y2"),
                             np.vstack([BASIS[0], diagonal, BASIS[1]]))
    table = nn_threshold_table(simulated, real, [0.0, 0.1, 0.5])
    assert table == (pytest.approx(200.0 / 3), pytest.approx(200.0 / 3), 100.0)


def test_threshold_table_validates_its_thresholds():
    simulated, real = embedding_set(3, 4), embedding_set(3, 4, seed=1)
    with pytest.raises(EmbeddingError, match="empty"):
        nn_threshold_table(simulated, real, [])
    with pytest.raises(EmbeddingError, match="sorted"):
        nn_threshold_table(simulated, real, [0.5, 0.1])


@given(st.integers(0, 2 ** 32 - 1),
       st.lists(st.floats(-0.5, 2.5, allow_nan=False), min_size=1, max_size=8))
def test_threshold_table_is_monotone_for_any_sorted_list(seed, thresholds):
    simulated = embedding_set(12, 6, seed=seed, prefix="s")
    real = embedding_set(9, 6, seed=seed + 1, prefix="r")
    table = nn_threshold_table(simulated, real, sorted(thresholds))
    assert all(0.0 <= value <= 100.0 for value in table)
    assert all(a <= b for a, b in zip(table, table[1:]))


def test_threshold_table_hits_both_endpoints():
    simulated = embedding_set(15, 5, seed=13, prefix="s")
    real = embedding_set(10, 5, seed=14, prefix="r")
    nearest = nearest_neighbor_distances(simulated, real)
    table = nn_threshold_table(simulated, real,
                               [float(nearest.min()) - 1e-9,
                                float(nearest.max())])
    assert table[0] == 0.0
    assert table[-1] == 100.0


# ---------------------------------------------------------------- name overlap

def test_identical_label_lists_overlap_fully():
    assert name_overlap(["oak", "pine"], ["pine", "oak"]) == (100.0, 100.0)


def test_exact_matching_folds_case_only():
    exact, substring = name_overlap(["Brown Bear"], ["brown bear"])
    assert exact == 100.0 and substring == 100.0


def test_substring_matching_catches_specializations():
    exact, substring = name_overlap(["brown bear"], ["Alaskan brown bear"])
    assert exact == 0.0
    assert substring == 100.0


def test_substring_matching_strips_punctuation():
    exact, substring = name_overlap(["brown-bear"], ["brown bear"])
    assert exact == 0.0
    assert substring == 100.0


def test_overlap_counts_first_set_labels():
    exact, substring = name_overlap(["brown bear", "cat"], ["bear"])
    assert exact == 0.0
    assert substring == 50.0


def test_disjoint_labels_do_not_overlap():
    left = [f"a-{i}" for i in range(4)]
    right = [f"b-{i}" for i in range(4)]
    assert name_overlap(left, right) == (0.0, 0.0)


def test_overlap_requires_non_empty_lists():
    with pytest.raises(EmbeddingError, match="non-empty"):
        name_overlap([], ["oak"])
    with pytest.raises(EmbeddingError, match="non-empty"):
        name_overlap(["oak"], [])


# ------------------------------------------------------------------ csv output

def test_distance_csv_sorts_labels_and_quotes_them():
    text = distance_distribution_csv({"b,comma": 0.25, "a": 0.125})
    assert text == ('label,mean_distance\n'
                    '"a",0.125000\n'
                    '"b,comma",0.250000\n')


def test_threshold_csv_pairs_thresholds_with_percentages():
    text = threshold_table_csv([0.1, 0.2], (50.0, 100.0))
    assert text == ('threshold,percentage\n'
                    '0.100000,50.000000\n'
                    '0.200000,100.000000\n')
