import json
import logging

import numpy as np
import pytest

from soundtex.exceptions import ManifestError
from soundtex.manifest import (
    Manifest,
    ManifestRecord,
    parse_manifest,
    read_manifest,
    sample_windows,
    write_manifest,
)


def jsonl(*records):
    return "\n".join(json.dumps(r) for r in records) + "\n"


def test_parse_minimal_records(tmp_path):
    text = jsonl(
        {"clip_id": "a", "path": "a.wav", "duration_s": 10.0},
        {"clip_id": "b", "path": "/abs/b.wav", "duration_s": 5.0, "window_centers_s": [2.0, 3.0]},
    )
    manifest = parse_manifest(text, base_dir=tmp_path)
    assert len(manifest) == 2
    assert manifest.records[0].window_centers_s == []
    assert manifest.records[1].window_centers_s == [2.0, 3.0]
    assert manifest.records[0].resolve(tmp_path) == tmp_path / "a.wav"
    assert str(manifest.records[1].resolve(tmp_path)) == "/abs/b.wav"


def test_numeric_looking_clip_ids_stay_strings():
    manifest = parse_manifest(jsonl({"clip_id": "007", "path": "x.wav", "duration_s": 4.0}))
    assert manifest.records[0].clip_id == "007"


def test_duplicate_clip_id():
    text = jsonl(
        {"clip_id": "a", "path": "a.wav", "duration_s": 10.0},
        {"clip_id": "a", "path": "b.wav", "duration_s": 10.0},
    )
    with pytest.raises(ManifestError, match="duplicate"):
        parse_manifest(text)


def test_window_center_outside_clip():
    text = jsonl({"clip_id": "a", "path": "a.wav", "duration_s": 5.0, "window_centers_s": [4.0]})
    with pytest.raises(ManifestError):
        parse_manifest(text)


def test_missing_required_field():
    with pytest.raises(ManifestError, match="duration_s"):
        parse_manifest(jsonl({"clip_id": "a", "path": "a.wav"}))


def test_invalid_duration():
    with pytest.raises(ManifestError):
        Manifest(records=[ManifestRecord("a", "a.wav", 0.0)]).validate()


def test_empty_manifest():
    assert len(parse_manifest("")) == 0


def test_write_then_read(tmp_path):
    manifest = Manifest(records=[
        ManifestRecord("clip000", "clip000.wav", 6.0, [1.875, 3.0]),
        ManifestRecord("clip001", "clip001.wav", 2.0),
    ])
    path = tmp_path / "manifest.jsonl"
    write_manifest(path, manifest)
    loaded = read_manifest(path)
    assert [r.clip_id for r in loaded] == ["clip000", "clip001"]
    assert loaded.records[0].window_centers_s == [1.875, 3.0]
    assert loaded.records[1].window_centers_s == []
    assert loaded.base_dir == tmp_path


def test_sample_windows_exact_length_clip():
    centers = sample_windows(3.75, 4, seed=0)
    np.testing.assert_array_equal(centers, 1.875)


def test_sample_windows_sorted_within_range():
    centers = sample_windows(30.0, 50, seed=1)
    assert centers.shape == (50,)
    assert np.all(np.diff(centers) >= 0)
    assert centers.min() >= 1.875
    assert centers.max() <= 30.0 - 1.875


def test_sample_windows_deterministic():
    np.testing.assert_array_equal(sample_windows(12.0, 5, seed=[3, 1]), sample_windows(12.0, 5, seed=[3, 1]))
    assert not np.array_equal(sample_windows(12.0, 5, seed=0), sample_windows(12.0, 5, seed=1))


def test_sample_windows_short_clip_warns(caplog):
    with caplog.at_level(logging.WARNING, logger="soundtex.manifest"):
        centers = sample_windows(2.0, 3, seed=0)
    assert centers.size == 0
    assert "shorter than" in caplog.text
