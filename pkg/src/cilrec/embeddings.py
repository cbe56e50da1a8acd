"""Cosine-distance diagnostics between sets of labeled embeddings.

Compares the class names of a simulated stream against the real ones in
embedding space: per-label mean cosine distances, the share of simulated
names whose nearest real neighbor lies within a distance threshold, and
plain string overlap of the label sets.
"""

from __future__ import annotations

import string
from dataclasses import dataclass

import numpy as np

from .feature_store import load_feature_store


class EmbeddingError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EmbeddingSet:
    """Unique labels with one unit-norm vector each."""

    labels: tuple[str, ...]
    vectors: np.ndarray

    def __post_init__(self) -> None:
        labels = tuple(str(label) for label in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise EmbeddingError("embedding set is empty")
        if len(set(labels)) != len(labels):
            raise EmbeddingError("labels must be unique")
        vectors = np.asarray(self.vectors, dtype=np.float64)
        if vectors.ndim != 2 or len(vectors) != len(labels):
            raise EmbeddingError(
                f"expected {len(labels)} vector rows, got shape {vectors.shape}")
        norms = np.linalg.norm(vectors, axis=1)
        if np.any(np.abs(norms - 1.0) > 1e-6):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise EmbeddingError(
                f"rows must be unit norm within 1e-6 (worst deviation {worst:.3e})")
        vectors = vectors.copy()
        vectors.setflags(write=False)
        object.__setattr__(self, "vectors", vectors)

    @property
    def dimension(self) -> int:
        return int(self.vectors.shape[1])

    def __len__(self) -> int:
        return len(self.labels)

    @classmethod
    def from_vectors(cls, labels, vectors, *, normalize: bool = False) -> "EmbeddingSet":
        vectors = np.asarray(vectors, dtype=np.float64)
        if normalize:
            norms = np.linalg.norm(vectors, axis=1, keepdims=True)
            if np.any(norms == 0):
                raise EmbeddingError("cannot normalize a zero vector")
            vectors = vectors / norms
        return cls(tuple(labels), vectors)

    @classmethod
    def from_feature_store(cls, manifest_path, *, normalize: bool = False) -> "EmbeddingSet":
        """Load one embedding per class from a feature store (rows = 1)."""
        dataset = load_feature_store(manifest_path)
        labels, rows = [], []
        for class_id in dataset.class_ids:
            matrix = dataset.matrix(class_id)
            if len(matrix) != 1:
                raise EmbeddingError(
                    f"class {class_id} has {len(matrix)} rows; embedding "
                    f"stores carry exactly one per label")
            labels.append(dataset.name(class_id))
            rows.append(matrix[0])
        return cls.from_vectors(labels, np.vstack(rows), normalize=normalize)


def _check_dimensions(a: EmbeddingSet, b: EmbeddingSet) -> None:
    if a.dimension != b.dimension:
        raise EmbeddingError(
            f"dimension mismatch: {a.dimension} vs {b.dimension}")


def mean_distance_distribution(real: EmbeddingSet, simulated: EmbeddingSet,
                               *, per: str = "real") -> dict[str, float]:
    """Mean cosine distance from each label of one set to all of the other.

    By default one value per real label (mean over all simulated
    vectors); ``per="simulated"`` flips the direction.
    """
    _check_dimensions(real, simulated)
    if per not in ("real", "simulated"):
        raise EmbeddingError(f"per must be 'real' or 'simulated', got {per!r}")
    anchor, other = (real, simulated) if per == "real" else (simulated, real)
    distances = 1.0 - anchor.vectors @ other.vectors.T
    means = distances.mean(axis=1)
    return {label: float(value) for label, value in zip(anchor.labels, means)}


def nearest_neighbor_distances(simulated: EmbeddingSet,
                               real: EmbeddingSet) -> np.ndarray:
    """Minimum cosine distance from each simulated label to any real one."""
    _check_dimensions(simulated, real)
    distances = 1.0 - simulated.vectors @ real.vectors.T
    return distances.min(axis=1)


def nn_threshold_table(simulated: EmbeddingSet, real: EmbeddingSet,
                       thresholds) -> tuple[float, ...]:
    """Percent of simulated labels with a real neighbor within each threshold."""
    thresholds = [float(t) for t in thresholds]
    if not thresholds:
        raise EmbeddingError("threshold list is empty")
    if any(b < a for a, b in zip(thresholds, thresholds[1:])):
        raise EmbeddingError("thresholds must be sorted ascending")
    nearest = nearest_neighbor_distances(simulated, real)
    return tuple(float(100.0 * np.count_nonzero(nearest <= t) / len(nearest))
                 for t in thresholds)


_PUNCTUATION = {ord(ch): " " for ch in string.punctuation}


def _normalize_label(label: str) -> str:
    return " ".join(label.casefold().translate(_PUNCTUATION).split())


def name_overlap(set_a_labels, set_b_labels) -> tuple[float, float]:
    """(exact %, substring %) of first-set labels found in the second.

    Exact matching casefolds only; substring matching additionally strips
    punctuation and checks containment in either direction.
    """
    a_labels = [str(label) for label in set_a_labels]
    b_labels = [str(label) for label in set_b_labels]
    if not a_labels or not b_labels:
        raise EmbeddingError("label lists must be non-empty")
    b_exact = {label.casefold().strip() for label in b_labels}
    b_normalized = [_normalize_label(label) for label in b_labels]
    exact = sum(1 for label in a_labels if label.casefold().strip() in b_exact)
    substring = 0
    for label in a_labels:
        a_norm = _normalize_label(label)
        if any(a_norm and b_norm and (a_norm in b_norm or b_norm in a_norm)
               for b_norm in b_normalized):
            substring += 1
    scale = 100.0 / len(a_labels)
    return exact * scale, substring * scale


def distance_distribution_csv(distribution: dict[str, float]) -> str:
    lines = ["label,mean_distance"]
    for label in sorted(distribution):
        lines.append(f"\"{label}\",{distribution[label]:.6f}")
    return "\n".join(lines) + "\n"


def threshold_table_csv(thresholds, percentages) -> str:
    lines = ["threshold,percentage"]
    for threshold, percentage in zip(thresholds, percentages):
        lines.append(f"{float(threshold):.6f},{percentage:.6f}")
    return "\n".join(lines) + "\n"
