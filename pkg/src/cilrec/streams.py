"""Feature streams for class-incremental benchmarks.

A stream presents disjoint groups of classes one step at a time. Streams
come from two sources: a parametric Gaussian domain (each class is an
isotropic cloud around a hidden prototype) or a stored feature dataset
split into a scenario. The simulator extends a stream prefix with a
surrogate continuation whose closeness to the true continuation is set by
a ``fidelity`` knob in [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .seeding import keyed_rng


class StreamError(ValueError):
    """Invalid stream construction or inconsistent stream arguments."""


class CapacityError(StreamError):
    """A dataset cannot supply the classes or rows a scenario requires."""


def _frozen_array(values, dtype, ndim: int) -> np.ndarray:
    arr = np.array(values, dtype=dtype, order="C", copy=True)
    if arr.ndim != ndim:
        raise StreamError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScenarioSpec:
    """Shape of an incremental process.

    Step 1 introduces ``initial_class_count`` classes; each of the
    remaining ``total_steps - 1`` steps introduces ``classes_per_step``
    fresh classes, every class carrying ``samples_per_class`` training
    rows.
    """

    initial_class_count: int
    classes_per_step: int
    total_steps: int
    samples_per_class: int

    def __post_init__(self) -> None:
        for name in ("initial_class_count", "classes_per_step",
                     "total_steps", "samples_per_class"):
            value = getattr(self, name)
            if not isinstance(value, int) or value < 1:
                raise StreamError(f"{name} must be an integer >= 1, got {value!r}")

    @property
    def total_class_count(self) -> int:
        return self.initial_class_count + self.classes_per_step * (self.total_steps - 1)

    @property
    def holdout_per_class(self) -> int:
        # Held-out rows per class; the benchmark protocol keeps one test
        # row for every five training rows, at least one.
        return math.ceil(self.samples_per_class / 5)

    @property
    def label(self) -> str:
        return (f"({self.initial_class_count},{self.classes_per_step},"
                f"{self.total_steps},{self.samples_per_class})")

    def classes_at_step(self, step_index: int) -> int:
        if not 1 <= step_index <= self.total_steps:
            raise StreamError(f"step_index {step_index} outside 1..{self.total_steps}")
        return self.initial_class_count if step_index == 1 else self.classes_per_step

    def to_json_dict(self) -> dict:
        return {
            "initial_class_count": self.initial_class_count,
            "classes_per_step": self.classes_per_step,
            "total_steps": self.total_steps,
            "samples_per_class": self.samples_per_class,
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "ScenarioSpec":
        return cls(
            initial_class_count=int(data["initial_class_count"]),
            classes_per_step=int(data["classes_per_step"]),
            total_steps=int(data["total_steps"]),
            samples_per_class=int(data["samples_per_class"]),
        )


@dataclass(frozen=True, eq=False)
class StepBatch:
    """Labeled feature rows for the classes introduced at one step.

    ``features`` is float32 row-major, one row per sample; ``labels``
    holds the class id of each row. Arrays are frozen after construction.
    """

    step_index: int
    class_ids: tuple[int, ...]
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        if not isinstance(self.step_index, int) or self.step_index < 1:
            raise StreamError(f"step_index must be >= 1, got {self.step_index!r}")
        ids = tuple(int(c) for c in self.class_ids)
        if len(set(ids)) != len(ids):
            raise StreamError("class_ids contains duplicates")
        object.__setattr__(self, "class_ids", tuple(sorted(ids)))
        features = _frozen_array(self.features, np.float32, 2)
        labels = _frozen_array(self.labels, np.int64, 1)
        if features.shape[0] != labels.shape[0]:
            raise StreamError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels")
        if not np.all(np.isfinite(features)):
            raise StreamError("features contain non-finite values")
        if set(labels.tolist()) != set(self.class_ids):
            raise StreamError("labels must cover exactly the declared class_ids")
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "labels", labels)

    @property
    def dimension(self) -> int:
        return int(self.features.shape[1])

    @property
    def row_count(self) -> int:
        return int(self.features.shape[0])

    def rows_of(self, class_id: int) -> np.ndarray:
        return self.features[self.labels == class_id]


@dataclass(frozen=True, eq=False)
class FeatureStream:
    """A sequence of step batches with pairwise disjoint class sets."""

    dimension: int
    steps: tuple[StepBatch, ...]

    def __post_init__(self) -> None:
        steps = tuple(self.steps)
        if not steps:
            raise StreamError("a stream needs at least one step")
        object.__setattr__(self, "steps", steps)
        seen: set[int] = set()
        for position, batch in enumerate(steps, start=1):
            if batch.step_index != position:
                raise StreamError(
                    f"step {position} carries step_index {batch.step_index}")
            if batch.dimension != self.dimension:
                raise StreamError(
                    f"step {position} has dimension {batch.dimension}, "
                    f"stream declares {self.dimension}")
            overlap = seen.intersection(batch.class_ids)
            if overlap:
                raise StreamError(f"classes repeat across steps: {sorted(overlap)}")
            seen.update(batch.class_ids)

    @property
    def total_steps(self) -> int:
        return len(self.steps)

    @property
    def all_class_ids(self) -> tuple[int, ...]:
        out: list[int] = []
        for batch in self.steps:
            out.extend(batch.class_ids)
        return tuple(out)

    def classes_through(self, step_index: int) -> tuple[int, ...]:
        out: list[int] = []
        for batch in self.steps[:step_index]:
            out.extend(batch.class_ids)
        return tuple(out)


@dataclass(frozen=True, eq=False)
class DrawnStream:
    """A training stream with its held-out test stream (same step layout)."""

    train: FeatureStream
    test: FeatureStream

    def __post_init__(self) -> None:
        if self.train.total_steps != self.test.total_steps:
            raise StreamError("train and test streams disagree on step count")
        for tr, te in zip(self.train.steps, self.test.steps):
            if tr.class_ids != te.class_ids:
                raise StreamError(
                    f"train/test class sets differ at step {tr.step_index}")


@dataclass(frozen=True, eq=False)
class DomainModel:
    """A reproducible class population in feature space.

    Class prototypes are drawn from an isotropic Gaussian of scale
    ``between_class_scale`` around ``prototype_center``; samples of a class
    are drawn isotropically with scale ``within_class_scale`` around its
    prototype. Prototypes and samples are pure functions of the domain
    seed, the class id and the sampling keys.
    """

    dimension: int
    prototype_center: np.ndarray
    between_class_scale: float
    within_class_scale: float
    seed: int

    def __post_init__(self) -> None:
        if not isinstance(self.dimension, int) or self.dimension < 1:
            raise StreamError(f"dimension must be >= 1, got {self.dimension!r}")
        for name in ("between_class_scale", "within_class_scale"):
            value = getattr(self, name)
            if not math.isfinite(value) or value < 0:
                raise StreamError(f"{name} must be finite and >= 0, got {value!r}")
        center = _frozen_array(self.prototype_center, np.float64, 1)
        if center.shape != (self.dimension,):
            raise StreamError(
                f"prototype_center has shape {center.shape}, expected ({self.dimension},)")
        object.__setattr__(self, "prototype_center", center)

    def class_prototype(self, class_id: int) -> np.ndarray:
        rng = keyed_rng("prototype", self.seed, int(class_id))
        return (self.prototype_center
                + self.between_class_scale * rng.standard_normal(self.dimension))

    def sample_rows(self, class_id: int, count: int, *, purpose: str,
                    stream_seed: int, prototype: np.ndarray | None = None) -> np.ndarray:
        """Draw ``count`` rows of a class around its (or a given) prototype."""
        if count < 1:
            raise StreamError(f"count must be >= 1, got {count}")
        if prototype is None:
            prototype = self.class_prototype(class_id)
        rng = keyed_rng("rows", self.seed, purpose, int(stream_seed), int(class_id))
        noise = rng.standard_normal((count, self.dimension))
        return prototype + self.within_class_scale * noise


@dataclass(frozen=True, eq=False)
class StreamPair:
    """A real stream next to a simulated alternative of the same shape.

    Both streams share step 1 value-exactly; their continuations cover the
    same class ids with identical cardinalities. Test streams are carried
    for both sides so a full run can be scored on either.
    """

    real: FeatureStream
    simulated: FeatureStream
    real_test: FeatureStream
    simulated_test: FeatureStream
    fidelity: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.fidelity <= 1.0:
            raise StreamError(f"fidelity must lie in [0, 1], got {self.fidelity!r}")
        if self.real.total_steps != self.simulated.total_steps:
            raise StreamError("real and simulated streams disagree on step count")
        first_real, first_sim = self.real.steps[0], self.simulated.steps[0]
        if first_real.class_ids != first_sim.class_ids or not np.array_equal(
                first_real.features, first_sim.features):
            raise StreamError("step 1 must be shared value-exactly")


def generate_domain(dimension: int, between_class_scale: float,
                    within_class_scale: float, seed: int) -> DomainModel:
    """Build a Gaussian class domain with a seeded prototype center."""
    if not isinstance(dimension, int) or dimension < 1:
        raise StreamError(f"dimension must be an integer >= 1, got {dimension!r}")
    for name, value in (("between_class_scale", between_class_scale),
                        ("within_class_scale", within_class_scale)):
        if not math.isfinite(value) or value < 0:
            raise StreamError(f"{name} must be finite and >= 0, got {value!r}")
    center_rng = keyed_rng("domain-center", int(seed))
    center = between_class_scale * center_rng.standard_normal(dimension)
    return DomainModel(dimension=dimension, prototype_center=center,
                       between_class_scale=between_class_scale,
                       within_class_scale=within_class_scale, seed=int(seed))


def _step_class_ids(spec: ScenarioSpec, first_id: int) -> list[tuple[int, ...]]:
    """Dense class ids per step, starting at ``first_id``."""
    out: list[tuple[int, ...]] = []
    cursor = first_id
    for step in range(1, spec.total_steps + 1):
        width = spec.classes_at_step(step)
        out.append(tuple(range(cursor, cursor + width)))
        cursor += width
    return out


def _batch_from_domain(domain: DomainModel, class_ids: tuple[int, ...],
                       rows_per_class: int, step_index: int, *, purpose: str,
                       stream_seed: int,
                       prototypes: dict[int, np.ndarray] | None = None) -> StepBatch:
    blocks = []
    labels = []
    for class_id in class_ids:
        proto = None if prototypes is None else prototypes[class_id]
        rows = domain.sample_rows(class_id, rows_per_class, purpose=purpose,
                                  stream_seed=stream_seed, prototype=proto)
        blocks.append(rows.astype(np.float32))
        labels.extend([class_id] * rows_per_class)
    return StepBatch(step_index=step_index, class_ids=class_ids,
                     features=np.vstack(blocks), labels=np.array(labels))


def draw_stream(domain: DomainModel, spec: ScenarioSpec, seed: int) -> DrawnStream:
    """Materialize a scenario from a domain.

    Class ids are dense integers in generation order (step 1 gets
    0..initial_class_count-1). The returned pair carries
    ``samples_per_class`` training rows and ``holdout_per_class`` test
    rows per class, drawn disjointly from the same class distribution.
    """
    seed = int(seed)
    per_step = _step_class_ids(spec, first_id=0)
    train_steps = []
    test_steps = []
    for index, class_ids in enumerate(per_step, start=1):
        train_steps.append(_batch_from_domain(
            domain, class_ids, spec.samples_per_class, index,
            purpose="train", stream_seed=seed))
        test_steps.append(_batch_from_domain(
            domain, class_ids, spec.holdout_per_class, index,
            purpose="test", stream_seed=seed))
    return DrawnStream(train=FeatureStream(domain.dimension, tuple(train_steps)),
                       test=FeatureStream(domain.dimension, tuple(test_steps)))


def simulated_prototype(domain: DomainModel, class_id: int, fidelity: float,
                        seed: int) -> np.ndarray:
    """Prototype the simulator believes a class has.

    The true prototype is perturbed by an additive Gaussian of scale
    ``(1 - fidelity) * between_class_scale``; fidelity 1 returns the true
    prototype, fidelity 0 a fully displaced one. The perturbation
    direction depends on (domain seed, stream seed, class id) only, so
    fidelity moves each prototype along a fixed ray.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise StreamError(f"fidelity must lie in [0, 1], got {fidelity!r}")
    rng = keyed_rng("simulated-prototype", domain.seed, int(seed), int(class_id))
    wobble = domain.between_class_scale * rng.standard_normal(domain.dimension)
    return domain.class_prototype(class_id) + (1.0 - fidelity) * wobble


def simulate_future(real_prefix: StepBatch, domain: DomainModel, spec: ScenarioSpec,
                    fidelity: float, seed: int) -> StreamPair:
    """Extend a step-1 batch with the true and a simulated continuation.

    The real side reproduces exactly what ``draw_stream`` would have
    produced for the same seed; the simulated side shares step 1 bitwise
    and draws steps 2..T around perturbed prototypes, with the same class
    cardinalities as the real continuation.
    """
    if not 0.0 <= fidelity <= 1.0:
        raise StreamError(f"fidelity must lie in [0, 1], got {fidelity!r}")
    if real_prefix.step_index != 1:
        raise StreamError("the prefix must be a step-1 batch")
    if len(real_prefix.class_ids) != spec.initial_class_count:
        raise StreamError(
            f"prefix has {len(real_prefix.class_ids)} classes, scenario "
            f"declares {spec.initial_class_count}")
    if real_prefix.dimension != domain.dimension:
        raise StreamError(
            f"prefix dimension {real_prefix.dimension} does not match "
            f"domain dimension {domain.dimension}")
    seed = int(seed)
    future_steps: list[tuple[int, ...]] = []
    cursor = max(real_prefix.class_ids) + 1
    for step in range(2, spec.total_steps + 1):
        width = spec.classes_at_step(step)
        future_steps.append(tuple(range(cursor, cursor + width)))
        cursor += width

    prefix_test = _batch_from_domain(
        domain, real_prefix.class_ids, spec.holdout_per_class, 1,
        purpose="test", stream_seed=seed)

    real_steps = [real_prefix]
    real_test_steps = [prefix_test]
    sim_steps = [real_prefix]
    sim_test_steps = [prefix_test]
    for index, class_ids in enumerate(future_steps, start=2):
        real_steps.append(_batch_from_domain(
            domain, class_ids, spec.samples_per_class, index,
            purpose="train", stream_seed=seed))
        real_test_steps.append(_batch_from_domain(
            domain, class_ids, spec.holdout_per_class, index,
            purpose="test", stream_seed=seed))
        believed = {c: simulated_prototype(domain, c, fidelity, seed)
                    for c in class_ids}
        sim_steps.append(_batch_from_domain(
            domain, class_ids, spec.samples_per_class, index,
            purpose="sim", stream_seed=seed, prototypes=believed))
        sim_test_steps.append(_batch_from_domain(
            domain, class_ids, spec.holdout_per_class, index,
            purpose="sim-test", stream_seed=seed, prototypes=believed))
    d = domain.dimension
    return StreamPair(
        real=FeatureStream(d, tuple(real_steps)),
        simulated=FeatureStream(d, tuple(sim_steps)),
        real_test=FeatureStream(d, tuple(real_test_steps)),
        simulated_test=FeatureStream(d, tuple(sim_test_steps)),
        fidelity=float(fidelity),
    )


def split_into_scenario(dataset, spec: ScenarioSpec, seed: int) -> DrawnStream:
    """Carve a stored feature dataset into an incremental scenario.

    Classes are shuffled by ``seed`` and partitioned into steps; within
    each class, rows are shuffled by ``seed`` and split into disjoint
    train and test blocks. Raises :class:`CapacityError` when the dataset
    cannot cover the scenario.
    """
    seed = int(seed)
    available = tuple(sorted(dataset.class_ids))
    needed = spec.total_class_count
    if len(available) < needed:
        raise CapacityError(
            f"scenario needs {needed} classes, dataset has {len(available)}")
    order = keyed_rng("split-classes", seed).permutation(len(available))
    chosen = [available[i] for i in order[:needed]]

    rows_needed = spec.samples_per_class + spec.holdout_per_class
    for class_id in chosen:
        have = dataset.row_count(class_id)
        if have < rows_needed:
            raise CapacityError(
                f"class {class_id} has {have} rows, scenario needs "
                f"{rows_needed} (train {spec.samples_per_class} + "
                f"test {spec.holdout_per_class})")

    cursor = 0
    train_steps = []
    test_steps = []
    for index in range(1, spec.total_steps + 1):
        width = spec.classes_at_step(index)
        step_classes = tuple(chosen[cursor:cursor + width])
        cursor += width
        train_blocks, test_blocks = [], []
        train_labels, test_labels = [], []
        for class_id in step_classes:
            matrix = dataset.matrix(class_id)
            perm = keyed_rng("split-rows", seed, int(class_id)).permutation(len(matrix))
            train_idx = perm[:spec.samples_per_class]
            test_idx = perm[spec.samples_per_class:rows_needed]
            train_blocks.append(matrix[train_idx])
            test_blocks.append(matrix[test_idx])
            train_labels.extend([class_id] * len(train_idx))
            test_labels.extend([class_id] * len(test_idx))
        batch_ids = tuple(sorted(step_classes))
        train_steps.append(StepBatch(index, batch_ids, np.vstack(train_blocks),
                                     np.array(train_labels)))
        test_steps.append(StepBatch(index, batch_ids, np.vstack(test_blocks),
                                    np.array(test_labels)))
    return DrawnStream(train=FeatureStream(dataset.dimension, tuple(train_steps)),
                       test=FeatureStream(dataset.dimension, tuple(test_steps)))
