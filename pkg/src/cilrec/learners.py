"""The portfolio of class-incremental learners over fixed features.

All learners share one protocol: initialize on the first step's batch,
update on each later batch without revisiting earlier raw rows, predict
over every class seen so far. Five algorithms are provided:

* ``NCM``: nearest class mean under cosine distance.
* ``SLDA``: streaming linear discriminant analysis with a shared,
  shrinkage-stabilized covariance.
* ``FECAM``: Mahalanobis distance to class means of L2-normalized
  features under a single shared shrunk covariance.
* ``FETRIL``: linear one-vs-rest hinge classifiers retrained each step on
  current rows plus pseudo-features translated from stored prototypes.
* ``LINEAR_BSM``: a linear softmax head trained with balanced-softmax
  logit adjustment, representing past classes by replicated prototypes.

Every argmax/argmin prediction breaks exact ties toward the lowest class
id.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .linear_svm import OneVsRestModel, fit_one_vs_rest, train_linear_ovr
from .seeding import keyed_rng
from .streams import StepBatch

__all__ = [
    "AlgorithmKind", "OptimizerConfig", "AlgorithmConfig", "ProtocolError",
    "shrink_covariance", "mahalanobis_argmin", "balanced_softmax_logits",
    "footprint_value_count", "epoch_schedule", "make_learner", "init_learner",
    "update", "predict", "memory_footprint", "train_linear_ovr",
]


class AlgorithmKind(str, Enum):
    NCM = "NCM"
    SLDA = "SLDA"
    FECAM = "FECAM"
    FETRIL = "FETRIL"
    LINEAR_BSM = "LINEAR_BSM"


class ProtocolError(ValueError):
    """The incremental protocol was violated (ordering, repeats, shape)."""


@dataclass(frozen=True)
class OptimizerConfig:
    """Mini-batch SGD settings for the linear softmax head."""

    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 128
    epochs_initial: int = 90
    epochs_incremental: int = 60
    decay_factor: float = 0.1  # applied at 1/3 and 2/3 of the epoch budget
    epoch_scale: float = 1.0

    def __post_init__(self) -> None:
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        for name in ("epochs_initial", "epochs_incremental"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if not 0 < self.decay_factor <= 1:
            raise ValueError(f"decay_factor must lie in (0, 1], got {self.decay_factor}")
        if not self.epoch_scale > 0:
            raise ValueError(f"epoch_scale must be > 0, got {self.epoch_scale}")

    def effective_epochs(self, budget: int) -> int:
        return max(1, round(budget * self.epoch_scale))


@dataclass(frozen=True)
class AlgorithmConfig:
    """One candidate algorithm with all tunables and their defaults."""

    kind: AlgorithmKind
    algorithm_id: str = ""
    slda_shrinkage: float = 1e-4
    fecam_gamma1_initial: float = 10.0
    fecam_gamma2_initial: float = 10.0
    fecam_gamma1_inc: float = 0.0
    fecam_gamma2_inc: float = 0.0
    svc_regularization: float = 1.0
    svc_tolerance: float = 1e-4
    bsm_past_fraction: float = 0.03
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", AlgorithmKind(self.kind))
        if not self.algorithm_id:
            object.__setattr__(self, "algorithm_id", self.kind.value.lower())
        for name in ("slda_shrinkage", "fecam_gamma1_initial", "fecam_gamma2_initial",
                     "fecam_gamma1_inc", "fecam_gamma2_inc"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if not 0 < self.bsm_past_fraction <= 1:
            raise ValueError(
                f"bsm_past_fraction must lie in (0, 1], got {self.bsm_past_fraction}")
        if not self.svc_regularization > 0:
            raise ValueError(
                f"svc_regularization must be > 0, got {self.svc_regularization}")
        if not self.svc_tolerance > 0:
            raise ValueError(f"svc_tolerance must be > 0, got {self.svc_tolerance}")

    def with_epochs(self, initial: int, incremental: int) -> "AlgorithmConfig":
        optimizer = replace(self.optimizer, epochs_initial=initial,
                            epochs_incremental=incremental)
        return replace(self, optimizer=optimizer)


def epoch_schedule(initial_class_count: int) -> tuple[int, int]:
    """Published epoch budgets (initial, incremental) per scenario family."""
    if initial_class_count >= 500:
        return 120, 90
    if initial_class_count >= 100:
        return 90, 60
    return 60, 50


def footprint_value_count(kind: AlgorithmKind, dimension: int, class_count: int) -> int:
    """Stored float count of a learner with ``class_count`` seen classes."""
    kind = AlgorithmKind(kind)
    d, n = int(dimension), int(class_count)
    if kind is AlgorithmKind.NCM:
        return d * n
    if kind in (AlgorithmKind.SLDA, AlgorithmKind.FECAM):
        return d * n + d * d
    if kind is AlgorithmKind.FETRIL:
        return (d + 1) * n + d * n
    return (d + 1) * n  # LINEAR_BSM: the linear head only


def _loading_terms(matrix: np.ndarray, gamma1: float, gamma2: float) -> np.ndarray:
    d = matrix.shape[0]
    v1 = float(np.abs(np.diag(matrix)).mean())
    if d > 1:
        off_mass = float(np.abs(matrix).sum() - np.abs(np.diag(matrix)).sum())
        v2 = off_mass / (d * d - d)
    else:
        v2 = 0.0
    eye = np.eye(d)
    return gamma1 * v1 * eye + gamma2 * v2 * (np.ones((d, d)) - eye)


def shrink_covariance(matrix: np.ndarray, gamma1: float, gamma2: float) -> np.ndarray:
    """Add diagonal and off-diagonal loading scaled by mean magnitudes.

    Returns ``S + gamma1 * v1 * I + gamma2 * v2 * (J - I)`` where ``v1``
    is the mean absolute diagonal of S, ``v2`` the mean absolute
    off-diagonal, and J the all-ones matrix.
    """
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {matrix.shape}")
    if not np.allclose(matrix, matrix.T, rtol=1e-9, atol=1e-12):
        raise ValueError("covariance input must be symmetric")
    return matrix + _loading_terms(matrix, gamma1, gamma2)


def _safe_rows(features: np.ndarray, dimension: int) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != dimension:
        raise ProtocolError(
            f"expected rows of dimension {dimension}, got shape {features.shape}")
    return features


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    return rows / np.maximum(norms, 1e-12)


def mahalanobis_argmin(means: np.ndarray, class_ids: np.ndarray,
                       precision: np.ndarray, queries: np.ndarray) -> np.ndarray:
    """Label queries by the class minimizing (x-mu)' P (x-mu).

    The per-query term x'Px is constant across classes and dropped, so
    exact ties resolve to the first (lowest) class id.
    """
    projected = precision @ means.T                      # (d, C)
    cross = queries @ projected                          # (n, C)
    offsets = np.einsum("cd,dc->c", means, projected)    # mu' P mu
    return class_ids[np.argmin(offsets - 2.0 * cross, axis=1)]


def balanced_softmax_logits(logits: np.ndarray, class_counts: np.ndarray) -> np.ndarray:
    """Shift logits by log class counts (the balanced-softmax adjustment)."""
    counts = np.asarray(class_counts, dtype=np.float64)
    if np.any(counts <= 0):
        raise ValueError("class counts must be positive")
    return logits + np.log(counts)


class IncrementalLearner:
    """Common protocol: start on step 1, learn later steps, predict."""

    kind: AlgorithmKind

    def __init__(self, config: AlgorithmConfig, dimension: int, seed: int = 0):
        if config.kind is not self.kind:
            raise ProtocolError(
                f"config kind {config.kind.value} does not match {self.kind.value}")
        if dimension < 1:
            raise ProtocolError(f"dimension must be >= 1, got {dimension}")
        self.config = config
        self.dimension = int(dimension)
        self.seed = int(seed)
        self._ids: list[int] = []
        self._step = 0

    @property
    def seen_class_ids(self) -> tuple[int, ...]:
        return tuple(self._ids)

    @property
    def class_count(self) -> int:
        return len(self._ids)

    def _admit(self, batch: StepBatch) -> None:
        if batch.dimension != self.dimension:
            raise ProtocolError(
                f"batch dimension {batch.dimension} does not match "
                f"learner dimension {self.dimension}")
        repeats = set(batch.class_ids).intersection(self._ids)
        if repeats:
            raise ProtocolError(f"classes were already seen: {sorted(repeats)}")
        self._ids = sorted(set(self._ids).union(batch.class_ids))

    def start(self, batch: StepBatch) -> "IncrementalLearner":
        if self._step != 0:
            raise ProtocolError("start() may only be called once")
        self._admit(batch)
        self._step = 1
        self._start(batch)
        return self

    def learn(self, batch: StepBatch) -> "IncrementalLearner":
        if self._step == 0:
            raise ProtocolError("learn() before start()")
        self._admit(batch)
        self._step += 1
        self._learn(batch)
        return self

    def predict(self, features: np.ndarray) -> np.ndarray:
        if self._step == 0:
            raise ProtocolError("predict() on an empty learner")
        return self._predict(_safe_rows(features, self.dimension))

    def memory_footprint(self) -> int:
        return footprint_value_count(self.kind, self.dimension, self.class_count)

    # subclass hooks
    def _start(self, batch: StepBatch) -> None:
        raise NotImplementedError

    def _learn(self, batch: StepBatch) -> None:
        raise NotImplementedError

    def _predict(self, features: np.ndarray) -> np.ndarray:
        raise NotImplementedError


class _MeanTracker:
    """Per-class means kept in id-sorted arrays for tie-stable argmins."""

    def __init__(self, dimension: int):
        self._means: dict[int, np.ndarray] = {}
        self._counts: dict[int, int] = {}
        self._dimension = dimension
        self._id_array = np.zeros(0, dtype=np.int64)
        self._mean_matrix = np.zeros((0, dimension))

    def absorb(self, batch: StepBatch, rows: np.ndarray) -> None:
        for class_id in batch.class_ids:
            block = rows[batch.labels == class_id]
            self._means[class_id] = block.mean(axis=0)
            self._counts[class_id] = len(block)
        order = sorted(self._means)
        self._id_array = np.array(order, dtype=np.int64)
        self._mean_matrix = np.vstack([self._means[c] for c in order])

    @property
    def ids(self) -> np.ndarray:
        return self._id_array

    @property
    def means(self) -> np.ndarray:
        return self._mean_matrix

    def mean_of(self, class_id: int) -> np.ndarray:
        return self._means[class_id]

    def count_of(self, class_id: int) -> int:
        return self._counts[class_id]


class NcmLearner(IncrementalLearner):
    """Nearest class mean under cosine distance."""

    kind = AlgorithmKind.NCM

    def __init__(self, config, dimension, seed=0):
        super().__init__(config, dimension, seed)
        self._tracker = _MeanTracker(self.dimension)

    def _start(self, batch: StepBatch) -> None:
        self._tracker.absorb(batch, np.asarray(batch.features, dtype=np.float64))

    _learn = _start

    def _predict(self, features: np.ndarray) -> np.ndarray:
        similarity = _unit_rows(features) @ _unit_rows(self._tracker.means).T
        return self._tracker.ids[np.argmin(1.0 - similarity, axis=1)]


class SldaLearner(IncrementalLearner):
    """Streaming LDA: class means plus one pooled covariance.

    The pooled covariance is the within-class scatter divided by the
    total row count; ``slda_shrinkage * I`` is added immediately before
    inversion, and the inverse is recomputed once per step.
    """

    kind = AlgorithmKind.SLDA

    def __init__(self, config, dimension, seed=0):
        super().__init__(config, dimension, seed)
        self._tracker = _MeanTracker(self.dimension)
        self._scatter = np.zeros((self.dimension, self.dimension))
        self._rows_seen = 0
        self._weights = np.zeros((0, self.dimension))
        self._biases = np.zeros(0)

    def _absorb(self, batch: StepBatch) -> None:
        rows = np.asarray(batch.features, dtype=np.float64)
        self._tracker.absorb(batch, rows)
        for class_id in batch.class_ids:
            block = rows[batch.labels == class_id]
            deviations = block - self._tracker.mean_of(class_id)
            self._scatter += deviations.T @ deviations
        self._scatter = 0.5 * (self._scatter + self._scatter.T)
        self._rows_seen += len(rows)
        self._refresh()

    _start = _absorb
    _learn = _absorb

    @property
    def covariance(self) -> np.ndarray:
        return self._scatter / self._rows_seen

    def _refresh(self) -> None:
        shrunk = self.covariance + self.config.slda_shrinkage * np.eye(self.dimension)
        precision = np.linalg.inv(shrunk)
        precision = 0.5 * (precision + precision.T)
        means = self._tracker.means
        self._weights = means @ precision
        self._biases = -0.5 * np.einsum("cd,cd->c", means, self._weights)

    def _predict(self, features: np.ndarray) -> np.ndarray:
        scores = features @ self._weights.T + self._biases
        return self._tracker.ids[np.argmax(scores, axis=1)]


class FecamLearner(IncrementalLearner):
    """Mahalanobis classifier under one shared shrunk covariance.

    Features are L2-normalized before any statistics. The raw covariance
    accumulates over all steps; the loading terms of the initial
    shrinkage (and optional incremental shrinkage) are kept additively on
    top of it.
    """

    kind = AlgorithmKind.FECAM

    def __init__(self, config, dimension, seed=0):
        super().__init__(config, dimension, seed)
        self._tracker = _MeanTracker(self.dimension)
        self._scatter = np.zeros((self.dimension, self.dimension))
        self._rows_seen = 0
        self._loading = np.zeros((self.dimension, self.dimension))
        self._precision = np.eye(self.dimension)

    def _absorb(self, batch: StepBatch, gamma1: float, gamma2: float) -> None:
        rows = _unit_rows(np.asarray(batch.features, dtype=np.float64))
        self._tracker.absorb(batch, rows)
        for class_id in batch.class_ids:
            block = rows[batch.labels == class_id]
            deviations = block - self._tracker.mean_of(class_id)
            self._scatter += deviations.T @ deviations
        self._scatter = 0.5 * (self._scatter + self._scatter.T)
        self._rows_seen += len(rows)
        if gamma1 > 0 or gamma2 > 0:
            self._loading += _loading_terms(self.raw_covariance, gamma1, gamma2)
        self._refresh()

    def _start(self, batch: StepBatch) -> None:
        self._absorb(batch, self.config.fecam_gamma1_initial,
                     self.config.fecam_gamma2_initial)

    def _learn(self, batch: StepBatch) -> None:
        self._absorb(batch, self.config.fecam_gamma1_inc,
                     self.config.fecam_gamma2_inc)

    @property
    def raw_covariance(self) -> np.ndarray:
        return self._scatter / self._rows_seen

    @property
    def shrunk_covariance(self) -> np.ndarray:
        return self.raw_covariance + self._loading

    def _refresh(self) -> None:
        shrunk = self.shrunk_covariance
        try:
            precision = np.linalg.inv(shrunk)
        except np.linalg.LinAlgError:
            precision = np.linalg.pinv(shrunk, hermitian=True)
        self._precision = 0.5 * (precision + precision.T)

    def _predict(self, features: np.ndarray) -> np.ndarray:
        return mahalanobis_argmin(self._tracker.means, self._tracker.ids,
                                  self._precision, _unit_rows(features))


class FetrilLearner(IncrementalLearner):
    """Hinge classifiers over current rows plus translated pseudo-rows.

    Each step keeps only class prototypes from the past. For every past
    class p the new class s nearest to it by cosine donates its rows,
    translated by (mu_p - mu_s), and one-vs-rest classifiers for all seen
    classes are retrained from scratch.
    """

    kind = AlgorithmKind.FETRIL

    def __init__(self, config, dimension, seed=0):
        super().__init__(config, dimension, seed)
        self._tracker = _MeanTracker(self.dimension)
        self._model: OneVsRestModel | None = None
        self.last_fit_converged = True

    def _fit(self, features: np.ndarray, labels: np.ndarray) -> None:
        self._model = fit_one_vs_rest(
            features, labels, c=self.config.svc_regularization,
            tol=self.config.svc_tolerance,
            seed=keyed_rng("fetril", self.seed, self._step).integers(2**31))
        self.last_fit_converged = all(self._model.converged)
        if not self.last_fit_converged:
            warnings.warn("some one-vs-rest fits hit the epoch cap",
                          RuntimeWarning, stacklevel=3)

    def _start(self, batch: StepBatch) -> None:
        if len(batch.class_ids) < 2:
            raise ProtocolError("FETRIL needs at least two classes at step 1")
        rows = np.asarray(batch.features, dtype=np.float64)
        self._tracker.absorb(batch, rows)
        self._fit(rows, np.asarray(batch.labels))

    def _learn(self, batch: StepBatch) -> None:
        past_ids = [c for c in self._ids if c not in set(batch.class_ids)]
        rows = np.asarray(batch.features, dtype=np.float64)
        self._tracker.absorb(batch, rows)
        new_ids = np.array(sorted(batch.class_ids), dtype=np.int64)
        new_means = np.vstack([self._tracker.mean_of(c) for c in new_ids])
        blocks = [rows]
        labels = [np.asarray(batch.labels)]
        for past in past_ids:
            similarity = (_unit_rows(self._tracker.mean_of(past)[None, :])
                          @ _unit_rows(new_means).T)[0]
            source = int(new_ids[np.argmax(similarity)])
            donor = rows[np.asarray(batch.labels) == source]
            pseudo = donor - self._tracker.mean_of(source) + self._tracker.mean_of(past)
            blocks.append(pseudo)
            labels.append(np.full(len(pseudo), past, dtype=np.int64))
        self._fit(np.vstack(blocks), np.concatenate(labels))

    def _predict(self, features: np.ndarray) -> np.ndarray:
        assert self._model is not None
        scores = self._model.scores(features)
        ids = np.array(self._model.class_ids, dtype=np.int64)
        return ids[np.argmax(scores, axis=1)]


class LinearBsmLearner(IncrementalLearner):
    """Linear softmax head trained with balanced-softmax adjustment.

    New classes train on their real rows; past classes contribute only
    their stored prototypes, replicated to bsm_past_fraction times the
    mean new-class count. The count-based logit shift applies during
    training only; prediction uses raw linear scores.
    """

    kind = AlgorithmKind.LINEAR_BSM

    def __init__(self, config, dimension, seed=0):
        super().__init__(config, dimension, seed)
        self._tracker = _MeanTracker(self.dimension)
        self._weights = np.zeros((0, self.dimension))
        self._biases = np.zeros(0)

    def _train(self, features: np.ndarray, labels: np.ndarray,
               counts: np.ndarray, budget: int) -> None:
        optimizer = self.config.optimizer
        ids = self._tracker.ids
        columns = np.searchsorted(ids, labels)
        epochs = optimizer.effective_epochs(budget)
        milestones = {epochs // 3, (2 * epochs) // 3} - {0}
        log_prior = np.log(counts.astype(np.float64))
        rng = keyed_rng("bsm", self.seed, self._step)
        lr = optimizer.learning_rate
        velocity_w = np.zeros_like(self._weights)
        velocity_b = np.zeros_like(self._biases)
        for epoch in range(epochs):
            if epoch in milestones:
                lr *= optimizer.decay_factor
            order = rng.permutation(len(features))
            for first in range(0, len(order), optimizer.batch_size):
                chunk = order[first:first + optimizer.batch_size]
                block = features[chunk]
                target = columns[chunk]
                logits = block @ self._weights.T + self._biases + log_prior
                logits -= logits.max(axis=1, keepdims=True)
                probabilities = np.exp(logits)
                probabilities /= probabilities.sum(axis=1, keepdims=True)
                probabilities[np.arange(len(chunk)), target] -= 1.0
                probabilities /= len(chunk)
                grad_w = probabilities.T @ block + optimizer.weight_decay * self._weights
                grad_b = probabilities.sum(axis=0) + optimizer.weight_decay * self._biases
                velocity_w = optimizer.momentum * velocity_w + grad_w
                velocity_b = optimizer.momentum * velocity_b + grad_b
                self._weights -= lr * velocity_w
                self._biases -= lr * velocity_b

    def _start(self, batch: StepBatch) -> None:
        rows = np.asarray(batch.features, dtype=np.float64)
        self._tracker.absorb(batch, rows)
        self._weights = np.zeros((len(self._ids), self.dimension))
        self._biases = np.zeros(len(self._ids))
        counts = np.array([self._tracker.count_of(c) for c in self._tracker.ids],
                          dtype=np.int64)
        self._train(rows, np.asarray(batch.labels), counts,
                    self.config.optimizer.epochs_initial)

    def _learn(self, batch: StepBatch) -> None:
        past_ids = list(self._tracker.ids)
        past_rows = {c: self._tracker.mean_of(c) for c in past_ids}
        rows = np.asarray(batch.features, dtype=np.float64)
        self._tracker.absorb(batch, rows)

        # grow the head, keeping trained rows aligned with sorted ids
        old_index = {c: i for i, c in enumerate(past_ids)}
        weights = np.zeros((len(self._ids), self.dimension))
        biases = np.zeros(len(self._ids))
        for row, class_id in enumerate(self._tracker.ids):
            if int(class_id) in old_index:
                weights[row] = self._weights[old_index[int(class_id)]]
                biases[row] = self._biases[old_index[int(class_id)]]
        self._weights, self._biases = weights, biases

        new_counts = [int((batch.labels == c).sum()) for c in batch.class_ids]
        replicas = max(1, round(self.config.bsm_past_fraction
                                * (sum(new_counts) / len(new_counts))))
        blocks = [rows]
        labels = [np.asarray(batch.labels)]
        for past in past_ids:
            blocks.append(np.tile(past_rows[int(past)], (replicas, 1)))
            labels.append(np.full(replicas, past, dtype=np.int64))
        counts = np.array(
            [replicas if int(c) in old_index else int((batch.labels == c).sum())
             for c in self._tracker.ids], dtype=np.int64)
        self._train(np.vstack(blocks), np.concatenate(labels), counts,
                    self.config.optimizer.epochs_incremental)

    def _predict(self, features: np.ndarray) -> np.ndarray:
        scores = features @ self._weights.T + self._biases
        return self._tracker.ids[np.argmax(scores, axis=1)]


_LEARNERS: dict[AlgorithmKind, type[IncrementalLearner]] = {
    AlgorithmKind.NCM: NcmLearner,
    AlgorithmKind.SLDA: SldaLearner,
    AlgorithmKind.FECAM: FecamLearner,
    AlgorithmKind.FETRIL: FetrilLearner,
    AlgorithmKind.LINEAR_BSM: LinearBsmLearner,
}


def make_learner(config: AlgorithmConfig, dimension: int, seed: int = 0) -> IncrementalLearner:
    return _LEARNERS[config.kind](config, dimension, seed)


def init_learner(config: AlgorithmConfig, step1: StepBatch, seed: int = 0) -> IncrementalLearner:
    """Build a learner from the first step's batch."""
    return make_learner(config, step1.dimension, seed).start(step1)


def update(state: IncrementalLearner, batch: StepBatch) -> IncrementalLearner:
    """Absorb one later step; mutates and returns ``state``."""
    return state.learn(batch)


def predict(state: IncrementalLearner, features: np.ndarray) -> np.ndarray:
    return state.predict(features)


def memory_footprint(state: IncrementalLearner) -> int:
    return state.memory_footprint()
