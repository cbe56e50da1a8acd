"""On-disk format for per-class feature matrices.

A store is a JSON manifest next to one binary payload per class. The
manifest declares the shared dimension and, per class, an id, a display
name, a row count and the payload's relative path. Payloads are raw
32-bit little-endian floats, row-major, exactly ``rows * dimension``
values with no header, so a write/read round trip is bit-exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .streams import FeatureStream, StepBatch

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
_STEPS_NAME = "steps.json"


class FeatureStoreError(Exception):
    """Base class for feature-store load and save failures."""


class ManifestError(FeatureStoreError):
    """The manifest is unreadable or structurally invalid."""


class DimensionMismatchError(FeatureStoreError):
    """Declared and expected dimensions disagree."""


class TruncatedPayloadError(FeatureStoreError):
    """A payload file holds fewer bytes than the manifest declares."""


class OversizedPayloadError(FeatureStoreError):
    """A payload file holds more bytes than the manifest declares."""


class UnknownClassError(FeatureStoreError):
    """A class id is not present in the dataset."""


@dataclass(frozen=True, eq=False)
class FeatureDataset:
    """Per-class feature matrices loaded from a store."""

    dimension: int
    class_ids: tuple[int, ...]
    names: dict[int, str]
    _matrices: dict[int, np.ndarray]

    def matrix(self, class_id: int) -> np.ndarray:
        try:
            return self._matrices[int(class_id)]
        except KeyError:
            raise UnknownClassError(
                f"class id {class_id} is not in this dataset") from None

    def row_count(self, class_id: int) -> int:
        return int(self.matrix(class_id).shape[0])

    def name(self, class_id: int) -> str:
        if int(class_id) not in self.names:
            raise UnknownClassError(f"class id {class_id} is not in this dataset")
        return self.names[int(class_id)]

    @property
    def total_rows(self) -> int:
        return sum(m.shape[0] for m in self._matrices.values())


def save_feature_store(directory: str | Path, dimension: int,
                       classes: dict[int, tuple[str, np.ndarray]]) -> Path:
    """Write a store under ``directory`` and return the manifest path.

    ``classes`` maps class id to ``(name, matrix)``; matrices are cast to
    float32 and must be 2-d with ``dimension`` columns.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    entries = []
    for class_id in sorted(classes):
        name, matrix = classes[class_id]
        matrix = np.asarray(matrix, dtype=np.float32)
        if matrix.ndim != 2 or matrix.shape[1] != dimension:
            raise FeatureStoreError(
                f"class {class_id}: matrix shape {matrix.shape} does not "
                f"match dimension {dimension}")
        file_name = f"class_{int(class_id):06d}.bin"
        payload = np.ascontiguousarray(matrix, dtype="<f4").tobytes(order="C")
        (directory / file_name).write_bytes(payload)
        entries.append({"id": int(class_id), "name": str(name),
                        "rows": int(matrix.shape[0]), "file": file_name})
    manifest = {"format_version": FORMAT_VERSION, "dimension": int(dimension),
                "classes": entries}
    manifest_path = directory / MANIFEST_NAME
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n",
                             encoding="utf-8")
    return manifest_path


def load_feature_store(manifest_path: str | Path,
                       expected_dimension: int | None = None) -> FeatureDataset:
    """Load a store, validating the manifest and every payload size."""
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    try:
        raw = manifest_path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ManifestError(f"cannot read manifest {manifest_path}: {exc}") from exc
    try:
        manifest = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ManifestError(f"manifest {manifest_path} is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise ManifestError(f"manifest {manifest_path} must be a JSON object")
    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ManifestError(
            f"manifest {manifest_path} has format_version {version!r}, "
            f"this reader supports {FORMAT_VERSION}")
    dimension = manifest.get("dimension")
    if not isinstance(dimension, int) or dimension < 1:
        raise ManifestError(f"manifest dimension must be an integer >= 1, got {dimension!r}")
    if expected_dimension is not None and dimension != expected_dimension:
        raise DimensionMismatchError(
            f"manifest declares dimension {dimension}, expected {expected_dimension}")
    class_list = manifest.get("classes")
    if not isinstance(class_list, list):
        raise ManifestError("manifest key 'classes' must be a list")

    matrices: dict[int, np.ndarray] = {}
    names: dict[int, str] = {}
    base = manifest_path.parent
    for position, entry in enumerate(class_list):
        if not isinstance(entry, dict):
            raise ManifestError(f"classes[{position}] must be an object")
        try:
            class_id = int(entry["id"])
            name = str(entry["name"])
            rows = int(entry["rows"])
            file_name = str(entry["file"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ManifestError(f"classes[{position}] is malformed: {exc}") from exc
        if rows < 0:
            raise ManifestError(f"class {class_id}: negative row count {rows}")
        if class_id in matrices:
            raise ManifestError(f"class id {class_id} appears twice in the manifest")
        payload_path = base / file_name
        try:
            payload = payload_path.read_bytes()
        except OSError as exc:
            raise ManifestError(
                f"class {class_id}: cannot read payload {payload_path}: {exc}") from exc
        expected_bytes = rows * dimension * 4
        if len(payload) < expected_bytes:
            raise TruncatedPayloadError(
                f"class {class_id}: payload {file_name} holds {len(payload)} "
                f"bytes, expected {expected_bytes} ({rows} rows x {dimension})")
        if len(payload) > expected_bytes:
            raise OversizedPayloadError(
                f"class {class_id}: payload {file_name} holds {len(payload)} "
                f"bytes, expected {expected_bytes} ({rows} rows x {dimension})")
        matrix = np.frombuffer(payload, dtype="<f4").reshape(rows, dimension)
        matrix = matrix.astype(np.float32, copy=True)
        matrix.flags.writeable = False
        matrices[class_id] = matrix
        names[class_id] = name
    return FeatureDataset(dimension=dimension,
                          class_ids=tuple(sorted(matrices)),
                          names=names, _matrices=matrices)


def save_stream(directory: str | Path, stream: FeatureStream,
                names: dict[int, str] | None = None) -> Path:
    """Persist a stream as a feature store plus a step-layout sidecar.

    The store itself is step-agnostic; ``steps.json`` records which class
    ids belong to which step so the stream can be reassembled.
    """
    directory = Path(directory)
    classes: dict[int, tuple[str, np.ndarray]] = {}
    for batch in stream.steps:
        for class_id in batch.class_ids:
            label = (names or {}).get(class_id, f"class_{class_id}")
            classes[class_id] = (label, batch.rows_of(class_id))
    manifest_path = save_feature_store(directory, stream.dimension, classes)
    layout = [[int(c) for c in batch.class_ids] for batch in stream.steps]
    (directory / _STEPS_NAME).write_text(
        json.dumps(layout, sort_keys=True) + "\n", encoding="utf-8")
    return manifest_path


def load_stream(directory: str | Path) -> FeatureStream:
    """Reassemble a stream written by :func:`save_stream`."""
    directory = Path(directory)
    dataset = load_feature_store(directory / MANIFEST_NAME)
    try:
        layout = json.loads((directory / _STEPS_NAME).read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read step layout in {directory}: {exc}") from exc
    steps = []
    for index, ids in enumerate(layout, start=1):
        ids = tuple(int(c) for c in ids)
        blocks = [dataset.matrix(c) for c in ids]
        labels = np.concatenate([np.full(len(b), c, dtype=np.int64)
                                 for c, b in zip(ids, blocks)])
        steps.append(StepBatch(index, ids, np.vstack(blocks), labels))
    return FeatureStream(dataset.dimension, tuple(steps))
