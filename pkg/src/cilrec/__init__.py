"""Benchmark harness and recommendation engine for data-free
class-incremental learning over fixed feature representations."""

from .config import (ConfigError, DatasetSpec, DomainSpec, RunConfig,
                     validate_config, validate_config_data)
from .embeddings import (EmbeddingError, EmbeddingSet,
                         mean_distance_distribution, name_overlap,
                         nn_threshold_table)
from .evaluation import (EvaluationError, RunRecord,
                         average_incremental_accuracy, run_experiment,
                         step_accuracy)
from .feature_store import (FeatureDataset, FeatureStoreError,
                            load_feature_store, save_feature_store)
from .learners import (AlgorithmConfig, AlgorithmKind, OptimizerConfig,
                       ProtocolError, epoch_schedule, footprint_value_count,
                       init_learner, memory_footprint, predict,
                       shrink_covariance, train_linear_ovr, update)
from .recommend import (IncompleteGridError, MissingRecordError, OracleChoice,
                        RecommendationOutcome, RecommendError, ResultsTable,
                        Source, Strategy, StrategyKind, aggregate,
                        dynamics_trace, explore_then_prune, gap, greedy,
                        oracle, rank_extremes, subset_ablation, t_greedy)
from .streams import (CapacityError, DomainModel, DrawnStream, FeatureStream,
                      ScenarioSpec, StepBatch, StreamError, StreamPair,
                      draw_stream, generate_domain, simulate_future,
                      split_into_scenario)

__version__ = "0.1.0"

__all__ = [
    "AlgorithmConfig", "AlgorithmKind", "CapacityError", "ConfigError",
    "DatasetSpec", "DomainModel", "DomainSpec", "DrawnStream",
    "EmbeddingError", "EmbeddingSet", "EvaluationError", "FeatureDataset",
    "FeatureStoreError", "FeatureStream", "IncompleteGridError",
    "MissingRecordError", "OptimizerConfig", "OracleChoice", "ProtocolError",
    "RecommendError", "RecommendationOutcome", "ResultsTable", "RunConfig",
    "RunRecord", "ScenarioSpec", "Source", "StepBatch", "Strategy",
    "StrategyKind", "StreamError", "StreamPair",
    "aggregate", "average_incremental_accuracy", "draw_stream",
    "dynamics_trace", "epoch_schedule", "explore_then_prune",
    "footprint_value_count", "gap", "generate_domain", "greedy",
    "init_learner", "load_feature_store", "mean_distance_distribution",
    "memory_footprint", "name_overlap", "nn_threshold_table", "oracle",
    "predict", "rank_extremes", "run_experiment", "save_feature_store",
    "shrink_covariance", "simulate_future", "split_into_scenario",
    "step_accuracy", "subset_ablation", "t_greedy", "train_linear_ovr",
    "update", "validate_config", "validate_config_data",
]
