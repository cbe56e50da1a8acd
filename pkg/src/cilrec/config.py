"""Run configuration: parsing, validation, and serialization.

Configs are TOML (or JSON with the same shape). Every validation error
names the offending key path, e.g. ``scenarios[0].samples_per_class``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .learners import AlgorithmConfig, AlgorithmKind, OptimizerConfig
from .recommend import RecommendError, Strategy
from .streams import ScenarioSpec, StreamError

DEFAULT_STRATEGIES = ("GREEDY_T", "GREEDY_HALF", "TGREEDY(3)", "EXPLORE_PRUNE(3)")


class ConfigError(ValueError):
    def __init__(self, key_path: str, message: str):
        self.key_path = key_path
        super().__init__(f"{key_path}: {message}")


@dataclass(frozen=True)
class DomainSpec:
    """A synthetic feature domain plus its simulation fidelity."""

    domain_id: str
    dimension: int
    between_class_scale: float
    within_class_scale: float
    seed: int = 0
    fidelity: float = 1.0


@dataclass(frozen=True)
class DatasetSpec:
    """An on-disk feature store; simulation needs surrogate scales."""

    dataset_id: str
    manifest: str
    simulation: DomainSpec | None = None


@dataclass(frozen=True)
class RunConfig:
    scenarios: tuple[ScenarioSpec, ...]
    algorithms: tuple[AlgorithmConfig, ...]
    domains: tuple[DomainSpec, ...] = ()
    datasets: tuple[DatasetSpec, ...] = ()
    strategies: tuple[Strategy, ...] = ()
    seeds: tuple[int, ...] = (0,)
    output_dir: str = "out"
    epoch_scale: float = 1.0
    workers: int | None = None

    def to_json_dict(self) -> dict:
        def domain_dict(domain: DomainSpec) -> dict:
            return {"id": domain.domain_id, "dimension": domain.dimension,
                    "between_class_scale": domain.between_class_scale,
                    "within_class_scale": domain.within_class_scale,
                    "seed": domain.seed, "fidelity": domain.fidelity}

        payload = {
            "output_dir": self.output_dir,
            "epoch_scale": self.epoch_scale,
            "seeds": list(self.seeds),
            "scenarios": [s.to_json_dict() for s in self.scenarios],
            "domains": [domain_dict(d) for d in self.domains],
            "datasets": [
                {"id": d.dataset_id, "manifest": d.manifest,
                 **({"simulation": domain_dict(d.simulation)}
                    if d.simulation else {})}
                for d in self.datasets],
            "algorithms": [_algorithm_dict(a) for a in self.algorithms],
            "strategies": [s.tag() for s in self.strategies],
        }
        if self.workers is not None:
            payload["workers"] = self.workers
        return payload


_OPTIMIZER_KEYS = {
    "learning_rate": float, "momentum": float, "weight_decay": float,
    "batch_size": int, "epochs_initial": int, "epochs_incremental": int,
    "decay_factor": float, "epoch_scale": float,
}

_ALGORITHM_KEYS = {
    "slda_shrinkage": float, "fecam_gamma1_initial": float,
    "fecam_gamma2_initial": float, "fecam_gamma1_inc": float,
    "fecam_gamma2_inc": float, "svc_regularization": float,
    "svc_tolerance": float, "bsm_past_fraction": float,
}


def _algorithm_dict(config: AlgorithmConfig) -> dict:
    payload: dict = {"kind": config.kind.value, "id": config.algorithm_id}
    defaults = AlgorithmConfig(config.kind)
    for key in _ALGORITHM_KEYS:
        if getattr(config, key) != getattr(defaults, key):
            payload[key] = getattr(config, key)
    optimizer = {key: getattr(config.optimizer, key) for key in _OPTIMIZER_KEYS
                 if getattr(config.optimizer, key) != getattr(OptimizerConfig(), key)}
    if optimizer:
        payload["optimizer"] = optimizer
    return payload


def _expect(data, key_path: str, expected) -> None:
    if not isinstance(data, expected):
        kinds = (expected.__name__ if isinstance(expected, type)
                 else "/".join(t.__name__ for t in expected))
        raise ConfigError(key_path, f"expected {kinds}, got {type(data).__name__}")


def _take(table: dict, key: str, path: str, expected, default):
    if key not in table:
        if default is _REQUIRED:
            raise ConfigError(f"{path}.{key}" if path else key, "missing required key")
        return default
    value = table.pop(key)
    _expect(value, f"{path}.{key}" if path else key, expected)
    return value


_REQUIRED = object()
_NUMBER = (int, float)


def _number(table, key, path, default, *, minimum=None, maximum=None,
            strict_min=False) -> float:
    value = _take(table, key, path, _NUMBER, default)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}" if path else key, "expected a number")
    value = float(value)
    full = f"{path}.{key}" if path else key
    if minimum is not None and (value <= minimum if strict_min else value < minimum):
        bound = f"> {minimum}" if strict_min else f">= {minimum}"
        raise ConfigError(full, f"must be {bound}, got {value}")
    if maximum is not None and value > maximum:
        raise ConfigError(full, f"must be <= {maximum}, got {value}")
    return value


def _integer(table, key, path, default, *, minimum=None) -> int:
    value = _take(table, key, path, int, default)
    if isinstance(value, bool):
        raise ConfigError(f"{path}.{key}" if path else key, "expected an integer")
    full = f"{path}.{key}" if path else key
    if minimum is not None and value < minimum:
        raise ConfigError(full, f"must be >= {minimum}, got {value}")
    return int(value)


def _string(table, key, path, default) -> str:
    return _take(table, key, path, str, default)


def _reject_unknown(table: dict, path: str) -> None:
    if table:
        key = sorted(table)[0]
        raise ConfigError(f"{path}.{key}" if path else key, "unknown key")


def _parse_scenario(table, path: str) -> ScenarioSpec:
    _expect(table, path, dict)
    table = dict(table)
    spec_args = {
        "initial_class_count": _integer(table, "initial_class_count", path,
                                        _REQUIRED, minimum=1),
        "classes_per_step": _integer(table, "classes_per_step", path,
                                     _REQUIRED, minimum=1),
        "total_steps": _integer(table, "total_steps", path, _REQUIRED, minimum=1),
        "samples_per_class": _integer(table, "samples_per_class", path,
                                      _REQUIRED, minimum=1),
    }
    _reject_unknown(table, path)
    try:
        return ScenarioSpec(**spec_args)
    except StreamError as error:
        raise ConfigError(path, str(error)) from error


def _parse_domain(table, path: str, fallback_id: str) -> DomainSpec:
    _expect(table, path, dict)
    table = dict(table)
    domain = DomainSpec(
        domain_id=_string(table, "id", path, fallback_id),
        dimension=_integer(table, "dimension", path, _REQUIRED, minimum=1),
        between_class_scale=_number(table, "between_class_scale", path,
                                    _REQUIRED, minimum=0.0, strict_min=True),
        within_class_scale=_number(table, "within_class_scale", path,
                                   _REQUIRED, minimum=0.0, strict_min=True),
        seed=_integer(table, "seed", path, 0),
        fidelity=_number(table, "fidelity", path, 1.0, minimum=0.0, maximum=1.0),
    )
    _reject_unknown(table, path)
    return domain


def _parse_dataset(table, path: str, base_dir: Path) -> DatasetSpec:
    _expect(table, path, dict)
    table = dict(table)
    manifest = _string(table, "manifest", path, _REQUIRED)
    resolved = Path(manifest)
    if not resolved.is_absolute():
        resolved = base_dir / resolved
    if not resolved.exists():
        raise ConfigError(f"{path}.manifest", f"path does not exist: {resolved}")
    dataset_id = _string(table, "id", path, Path(manifest).parent.name or "dataset")
    simulation = None
    if "simulation" in table:
        sim_table = table.pop("simulation")
        simulation = _parse_domain(sim_table, f"{path}.simulation",
                                   f"{dataset_id}-sim")
    _reject_unknown(table, path)
    return DatasetSpec(dataset_id, str(resolved), simulation)


def _parse_optimizer(table, path: str, global_epoch_scale: float) -> OptimizerConfig:
    _expect(table, path, dict)
    table = dict(table)
    values = {}
    for key, kind in _OPTIMIZER_KEYS.items():
        if key in table:
            values[key] = (_integer(table, key, path, _REQUIRED, minimum=1)
                           if kind is int
                           else _number(table, key, path, _REQUIRED))
    _reject_unknown(table, path)
    values.setdefault("epoch_scale", global_epoch_scale)
    try:
        return OptimizerConfig(**values)
    except ValueError as error:
        raise ConfigError(path, str(error)) from error


def _parse_algorithm(table, path: str, global_epoch_scale: float) -> AlgorithmConfig:
    _expect(table, path, dict)
    table = dict(table)
    kind_name = _string(table, "kind", path, _REQUIRED)
    try:
        kind = AlgorithmKind(kind_name.upper())
    except ValueError:
        choices = ", ".join(k.value for k in AlgorithmKind)
        raise ConfigError(f"{path}.kind",
                          f"unknown kind {kind_name!r}; choices: {choices}") from None
    values: dict = {"kind": kind}
    identifier = _string(table, "id", path, "")
    if identifier:
        values["algorithm_id"] = identifier
    for key in _ALGORITHM_KEYS:
        if key in table:
            values[key] = _number(table, key, path, _REQUIRED)
    optimizer_table = table.pop("optimizer", {})
    values["optimizer"] = _parse_optimizer(optimizer_table, f"{path}.optimizer",
                                           global_epoch_scale)
    _reject_unknown(table, path)
    try:
        return AlgorithmConfig(**values)
    except ValueError as error:
        raise ConfigError(path, str(error)) from error


def validate_config_data(data: dict, base_dir: Path | str = ".") -> RunConfig:
    _expect(data, "<config>", dict)
    table = dict(data)
    base_dir = Path(base_dir)

    output_dir = _string(table, "output_dir", "", "out")
    epoch_scale = _number(table, "epoch_scale", "", 1.0, minimum=0.0,
                          strict_min=True)
    workers = table.pop("workers", None)
    if workers is not None:
        _expect(workers, "workers", int)
        if workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {workers}")

    seeds_raw = _take(table, "seeds", "", list, [0])
    if not seeds_raw:
        raise ConfigError("seeds", "need at least one seed")
    seeds = []
    for index, seed in enumerate(seeds_raw):
        if isinstance(seed, bool) or not isinstance(seed, int):
            raise ConfigError(f"seeds[{index}]", "expected an integer")
        seeds.append(seed)

    scenarios_raw = _take(table, "scenarios", "", list, _REQUIRED)
    if not scenarios_raw:
        raise ConfigError("scenarios", "need at least one scenario")
    scenarios = tuple(_parse_scenario(entry, f"scenarios[{i}]")
                      for i, entry in enumerate(scenarios_raw))

    domains_raw = _take(table, "domains", "", list, [])
    domains = tuple(_parse_domain(entry, f"domains[{i}]", f"domain-{i}")
                    for i, entry in enumerate(domains_raw))
    domain_ids = [d.domain_id for d in domains]
    if len(set(domain_ids)) != len(domain_ids):
        duplicate = sorted({i for i in domain_ids if domain_ids.count(i) > 1})[0]
        raise ConfigError("domains", f"duplicate domain id {duplicate!r}")

    datasets_raw = _take(table, "datasets", "", list, [])
    datasets = tuple(_parse_dataset(entry, f"datasets[{i}]", base_dir)
                     for i, entry in enumerate(datasets_raw))
    dataset_ids = [d.dataset_id for d in datasets]
    if len(set(dataset_ids)) != len(dataset_ids):
        duplicate = sorted({i for i in dataset_ids if dataset_ids.count(i) > 1})[0]
        raise ConfigError("datasets", f"duplicate dataset id {duplicate!r}")

    if not domains and not datasets:
        raise ConfigError("domains", "need at least one domain or dataset")

    algorithms_raw = _take(table, "algorithms", "", list, _REQUIRED)
    if not algorithms_raw:
        raise ConfigError("algorithms", "need at least one algorithm")
    algorithms = tuple(_parse_algorithm(entry, f"algorithms[{i}]", epoch_scale)
                       for i, entry in enumerate(algorithms_raw))
    identifiers = [a.algorithm_id for a in algorithms]
    if len(set(identifiers)) != len(identifiers):
        duplicate = sorted({i for i in identifiers if identifiers.count(i) > 1})[0]
        raise ConfigError("algorithms", f"duplicate algorithm id {duplicate!r}")

    strategies_raw = _take(table, "strategies", "", list, list(DEFAULT_STRATEGIES))
    if not strategies_raw:
        raise ConfigError("strategies", "need at least one strategy")
    strategies = []
    for index, text in enumerate(strategies_raw):
        _expect(text, f"strategies[{index}]", str)
        try:
            strategies.append(Strategy.parse(text))
        except RecommendError as error:
            raise ConfigError(f"strategies[{index}]", str(error)) from error

    duplicated = {d.domain_id for d in domains} & {d.dataset_id for d in datasets}
    if duplicated:
        raise ConfigError("datasets", f"ids collide with domains: {sorted(duplicated)}")

    _reject_unknown(table, "")
    return RunConfig(
        scenarios=scenarios, algorithms=algorithms, domains=domains,
        datasets=datasets, strategies=tuple(strategies), seeds=tuple(seeds),
        output_dir=output_dir, epoch_scale=epoch_scale, workers=workers,
    )


def validate_config(path) -> RunConfig:
    """Parse and validate a TOML or JSON config file."""
    path = Path(path)
    if not path.exists():
        raise ConfigError("<config>", f"file does not exist: {path}")
    text = path.read_bytes()
    if path.suffix.lower() == ".json":
        try:
            data = json.loads(text.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as error:
            raise ConfigError("<config>", f"JSON parse error: {error}") from error
    else:
        try:
            data = tomllib.loads(text.decode("utf-8"))
        except (UnicodeDecodeError, tomllib.TOMLDecodeError) as error:
            raise ConfigError("<config>", f"TOML parse error: {error}") from error
    return validate_config_data(data, base_dir=path.parent)


def apply_overrides(config: RunConfig, *, seed: int | None = None,
                    output_dir: str | None = None, workers: int | None = None,
                    epoch_scale: float | None = None) -> RunConfig:
    """Apply command-line overrides on top of a validated config."""
    if seed is not None:
        config = replace(config, seeds=(seed,))
    if output_dir is not None:
        config = replace(config, output_dir=output_dir)
    if workers is not None:
        if workers < 1:
            raise ConfigError("workers", f"must be >= 1, got {workers}")
        config = replace(config, workers=workers)
    if epoch_scale is not None:
        if epoch_scale <= 0:
            raise ConfigError("epoch_scale", f"must be > 0, got {epoch_scale}")
        algorithms = tuple(
            replace(a, optimizer=replace(a.optimizer, epoch_scale=epoch_scale))
            for a in config.algorithms)
        config = replace(config, epoch_scale=epoch_scale, algorithms=algorithms)
    return config
