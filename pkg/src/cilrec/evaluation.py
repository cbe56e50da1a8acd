"""Running one learner over one stream and scoring it.

The quality of an incremental run is the average incremental accuracy:
the mean over steps of the accuracy q_i measured after step i on the
test rows of every class seen so far.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .learners import AlgorithmConfig, IncrementalLearner, init_learner, update
from .streams import FeatureStream, ScenarioSpec


class EvaluationError(ValueError):
    pass


def average_incremental_accuracy(step_accuracies) -> float:
    """Arithmetic mean of per-step accuracies q_1..q_T."""
    values = [float(q) for q in step_accuracies]
    if not values:
        raise EvaluationError("need at least one step accuracy")
    for q in values:
        if not 0.0 <= q <= 1.0:
            raise EvaluationError(f"step accuracy {q} outside [0, 1]")
    return math.fsum(values) / len(values)


def step_accuracy(state: IncrementalLearner, features: np.ndarray,
                  labels: np.ndarray) -> float:
    """Fraction of rows the learner labels correctly."""
    labels = np.asarray(labels, dtype=np.int64)
    features = np.asarray(features)
    if features.ndim != 2 or len(features) != len(labels):
        raise EvaluationError(
            f"features {features.shape} do not pair with {len(labels)} labels")
    if len(labels) == 0:
        raise EvaluationError("empty test set")
    unseen = set(labels.tolist()) - set(state.seen_class_ids)
    if unseen:
        raise EvaluationError(f"test labels contain unseen classes: {sorted(unseen)}")
    predicted = state.predict(features)
    return float(np.mean(predicted == labels))


@dataclass(frozen=True)
class RunRecord:
    """Outcome of one (algorithm, dataset, scenario, seed) run."""

    algorithm_id: str
    dataset_id: str
    scenario: ScenarioSpec
    step_accuracies: tuple[float, ...]
    average_incremental_accuracy: float
    memory_trace: tuple[int, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.step_accuracies) != self.scenario.total_steps:
            raise EvaluationError(
                f"{len(self.step_accuracies)} step accuracies for a "
                f"{self.scenario.total_steps}-step scenario")
        if len(self.memory_trace) != len(self.step_accuracies):
            raise EvaluationError("memory trace length must match step count")
        mean = average_incremental_accuracy(self.step_accuracies)
        if abs(mean - self.average_incremental_accuracy) > 1e-12:
            raise EvaluationError(
                "average_incremental_accuracy does not match the step mean")

    def to_json_dict(self) -> dict:
        return {
            "algorithm_id": self.algorithm_id,
            "dataset_id": self.dataset_id,
            "scenario": self.scenario.to_json_dict(),
            "step_accuracies": list(self.step_accuracies),
            "average_incremental_accuracy": self.average_incremental_accuracy,
            "memory_trace": list(self.memory_trace),
            "seed": self.seed,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "RunRecord":
        return cls(
            algorithm_id=payload["algorithm_id"],
            dataset_id=payload["dataset_id"],
            scenario=ScenarioSpec.from_json_dict(payload["scenario"]),
            step_accuracies=tuple(payload["step_accuracies"]),
            average_incremental_accuracy=payload["average_incremental_accuracy"],
            memory_trace=tuple(payload["memory_trace"]),
            seed=payload["seed"],
        )

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RunRecord":
        return cls.from_json_dict(json.loads(text))


def _cumulative_test(test_stream: FeatureStream, through_step: int):
    blocks = [test_stream.steps[i].features for i in range(through_step)]
    labels = [test_stream.steps[i].labels for i in range(through_step)]
    return np.vstack(blocks), np.concatenate(labels)


def run_experiment(config: AlgorithmConfig, stream: FeatureStream,
                   test_stream: FeatureStream, *, dataset_id: str = "synthetic",
                   scenario: ScenarioSpec | None = None, seed: int = 0) -> RunRecord:
    """Initialize on step 1, then alternate update and evaluate.

    q_i is measured after step i on the concatenated test rows of all
    classes seen through step i. The memory trace snapshots the stored
    value count after each step.
    """
    if stream.total_steps != test_stream.total_steps:
        raise EvaluationError(
            f"train stream has {stream.total_steps} steps, "
            f"test stream has {test_stream.total_steps}")
    for train_batch, test_batch in zip(stream.steps, test_stream.steps):
        if set(train_batch.class_ids) != set(test_batch.class_ids):
            raise EvaluationError(
                f"step {train_batch.step_index} train/test class sets differ")
    if scenario is not None and scenario.total_steps != stream.total_steps:
        raise EvaluationError("scenario step count does not match the stream")
    if scenario is None:
        first = len(stream.steps[0].class_ids)
        per_step = (len(stream.steps[1].class_ids) if stream.total_steps > 1 else 1)
        rows = stream.steps[0].row_count // max(1, first)
        scenario = ScenarioSpec(first, per_step, stream.total_steps, max(1, rows))

    state = init_learner(config, stream.steps[0], seed=seed)
    accuracies: list[float] = []
    memory: list[int] = []
    for index, batch in enumerate(stream.steps):
        if index > 0:
            state = update(state, batch)
        features, labels = _cumulative_test(test_stream, index + 1)
        accuracies.append(step_accuracy(state, features, labels))
        memory.append(state.memory_footprint())

    return RunRecord(
        algorithm_id=config.algorithm_id,
        dataset_id=dataset_id,
        scenario=scenario,
        step_accuracies=tuple(accuracies),
        average_incremental_accuracy=average_incremental_accuracy(accuracies),
        memory_trace=tuple(memory),
        seed=seed,
    )


def records_to_csv(records) -> str:
    """One row per (record, step): dataset, scenario, algorithm, seed, step, q."""
    lines = ["dataset,scenario,algorithm,seed,step,q"]
    ordered = sorted(records, key=lambda r: (r.dataset_id, r.scenario.label,
                                             r.algorithm_id, r.seed))
    for record in ordered:
        for step, q in enumerate(record.step_accuracies, start=1):
            lines.append(f"{record.dataset_id},\"{record.scenario.label}\","
                         f"{record.algorithm_id},{record.seed},{step},{q:.6f}")
    return "\n".join(lines) + "\n"
