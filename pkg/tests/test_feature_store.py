from __future__ import annotations

import json

import numpy as np
import pytest

from cilrec.feature_store import (
    DimensionMismatchError,
    FeatureStoreError,
    ManifestError,
    OversizedPayloadError,
    TruncatedPayloadError,
    UnknownClassError,
    load_feature_store,
    load_stream,
    save_feature_store,
    save_stream,
)
from cilrec.streams import FeatureStream, StepBatch


def write_store(tmp_path, *, dimension: int = 3):
    rng = np.random.default_rng(1)
    classes = {
        5: ("oak", rng.normal(size=(4, dimension))),
        2: ("pine", rng.normal(size=(2, dimension))),
    }
    return save_feature_store(tmp_path / "store", dimension, classes), classes


def test_round_trip_preserves_rows_and_names(tmp_path):
    manifest, classes = write_store(tmp_path)
    dataset = load_feature_store(manifest)
    assert dataset.class_ids == (2, 5)
    assert dataset.dimension == 3
    assert dataset.name(5) == "oak"
    assert dataset.row_count(2) == 2
    assert dataset.total_rows == 6
    assert np.allclose(dataset.matrix(5),
                       classes[5][1].astype(np.float32), atol=0)


def test_loaded_matrices_are_read_only(tmp_path):
    manifest, _ = write_store(tmp_path)
    dataset = load_feature_store(manifest)
    with pytest.raises(ValueError):
        dataset.matrix(5)[0, 0] = 1.0


def test_load_accepts_directory_path(tmp_path):
    manifest, _ = write_store(tmp_path)
    dataset = load_feature_store(manifest.parent)
    assert dataset.class_ids == (2, 5)


def test_unknown_class_lookup(tmp_path):
    manifest, _ = write_store(tmp_path)
    dataset = load_feature_store(manifest)
    with pytest.raises(UnknownClassError):
        dataset.matrix(99)


def test_expected_dimension_is_enforced(tmp_path):
    manifest, _ = write_store(tmp_path)
    with pytest.raises(DimensionMismatchError):
        load_feature_store(manifest, expected_dimension=8)


def test_save_rejects_wrong_shape(tmp_path):
    with pytest.raises(FeatureStoreError):
        save_feature_store(tmp_path / "bad", 3,
                           {0: ("x", np.zeros((2, 4)))})


def test_truncated_payload_is_detected(tmp_path):
    manifest, _ = write_store(tmp_path)
    victim = manifest.parent / "class_000005.bin"
    victim.write_bytes(victim.read_bytes()[:-4])
    with pytest.raises(TruncatedPayloadError):
        load_feature_store(manifest)


def test_oversized_payload_is_detected(tmp_path):
    manifest, _ = write_store(tmp_path)
    victim = manifest.parent / "class_000005.bin"
    victim.write_bytes(victim.read_bytes() + b"\x00\x00\x00\x00")
    with pytest.raises(OversizedPayloadError):
        load_feature_store(manifest)


def test_missing_payload_file(tmp_path):
    manifest, _ = write_store(tmp_path)
    (manifest.parent / "class_000005.bin").unlink()
    with pytest.raises(ManifestError):
        load_feature_store(manifest)


def test_invalid_json_manifest(tmp_path):
    manifest, _ = write_store(tmp_path)
    manifest.write_text("{not json", encoding="utf-8")
    with pytest.raises(ManifestError):
        load_feature_store(manifest)


def test_unsupported_format_version(tmp_path):
    manifest, _ = write_store(tmp_path)
    data = json.loads(manifest.read_text(encoding="utf-8"))
    data["format_version"] = 999
    manifest.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ManifestError):
        load_feature_store(manifest)


def test_duplicate_class_entry(tmp_path):
    manifest, _ = write_store(tmp_path)
    data = json.loads(manifest.read_text(encoding="utf-8"))
    data["classes"].append(dict(data["classes"][0]))
    manifest.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ManifestError):
        load_feature_store(manifest)


def test_malformed_class_entry_names_position(tmp_path):
    manifest, _ = write_store(tmp_path)
    data = json.loads(manifest.read_text(encoding="utf-8"))
    del data["classes"][1]["rows"]
    manifest.write_text(json.dumps(data), encoding="utf-8")
    with pytest.raises(ManifestError, match=r"classes\[1\]"):
        load_feature_store(manifest)


def test_stream_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    steps = (
        StepBatch(1, (0, 1), rng.normal(size=(4, 3)).astype(np.float32),
                  np.array([0, 0, 1, 1])),
        StepBatch(2, (2,), rng.normal(size=(2, 3)).astype(np.float32),
                  np.array([2, 2])),
    )
    stream = FeatureStream(3, steps)
    save_stream(tmp_path / "stream", stream, names={0: "ash"})
    loaded = load_stream(tmp_path / "stream")
    assert loaded.total_steps == 2
    for original, copy in zip(stream.steps, loaded.steps):
        assert original.class_ids == copy.class_ids
        for class_id in original.class_ids:
            assert np.array_equal(original.rows_of(class_id),
                                  copy.rows_of(class_id))


def test_load_stream_requires_layout(tmp_path):
    manifest, _ = write_store(tmp_path)
    with pytest.raises(ManifestError):
        load_stream(manifest.parent)
