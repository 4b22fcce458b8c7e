"""Corpus loading and task-label assembly."""

import numpy as np
import pytest

from courier_har.datasets import (ACTIVITY_INDEX, build_arrays,
                                  load_corpus_windows, load_stream_windows,
                                  window_task_label)
from courier_har.errors import DataError
from courier_har.sensorio import ImuWindow


def test_activity_index_order():
    assert ACTIVITY_INDEX == {"still": 0, "walk": 1, "ride": 2}


def test_load_corpus_windows(small_corpus_dir, small_windows):
    assert len(small_windows) > 0
    assert all(w.values.shape == (60, 6) for w in small_windows)
    assert all(w.label in ("still", "walk", "ride") for w in small_windows)


def test_load_corpus_without_manifest(small_corpus_dir, small_windows,
                                      tmp_path):
    import shutil

    for p in small_corpus_dir.glob("stream_0000*"):
        shutil.copy(p, tmp_path / p.name)
    windows = load_corpus_windows(tmp_path)
    first_stream = [w for w in small_windows if w.stream_id == "stream_0000"]
    assert len(windows) == len(first_stream)


def test_load_missing_corpus_is_data_error(tmp_path):
    with pytest.raises(DataError):
        load_corpus_windows(tmp_path)


def test_accel_only_loading(small_corpus_dir):
    windows = load_corpus_windows(small_corpus_dir, channels=3)
    assert all(w.values.shape == (60, 3) for w in windows)
    assert all(w.channel_set == "acc" for w in windows)


def test_build_arrays_normalizes(small_windows):
    x, y, stats = build_arrays(small_windows, task="activity3")
    assert x.shape[1:] == (60, 6)
    assert len(x) == len(y)
    assert set(np.unique(y)) <= {0, 1, 2}
    flat = x.reshape(-1, 6)
    assert np.all(np.abs(flat.mean(axis=0)) < 0.1)
    assert np.all(np.abs(flat.std(axis=0) - 1.0) < 0.2)


def test_build_arrays_reuses_given_stats(small_windows):
    _, _, stats = build_arrays(small_windows)
    x1, _, _ = build_arrays(small_windows[:5], stats=stats)
    x2, _, s2 = build_arrays(small_windows[:5], stats=stats)
    np.testing.assert_array_equal(x1, x2)
    assert s2 is stats


def test_window_task_label_riding2():
    w = ImuWindow(values=np.zeros((60, 6), dtype=np.float32), start_t_ms=0,
                  stream_id="s", channel_set="acc+gyro",
                  io_state="outdoor", gps_speed=6.0)
    assert window_task_label(w, "riding2") == 1
    w.gps_speed = 1.0
    assert window_task_label(w, "riding2") == 0
    w.io_state = None
    assert window_task_label(w, "riding2") is None


def test_window_task_label_elevation2():
    t = np.arange(60) * 100
    w = ImuWindow(values=np.zeros((60, 6), dtype=np.float32), start_t_ms=0,
                  stream_id="s", channel_set="acc+gyro",
                  pressure=1013.0 + np.linspace(0, 0.4, 60), t_ms=t)
    assert window_task_label(w, "elevation2") == 1
    w.pressure = np.full(60, 1013.0)
    assert window_task_label(w, "elevation2") == 0
    w.pressure = None
    assert window_task_label(w, "elevation2") is None


def test_window_task_label_unknown_task():
    w = ImuWindow(values=np.zeros((60, 6), dtype=np.float32), start_t_ms=0,
                  stream_id="s", channel_set="acc+gyro")
    with pytest.raises(DataError):
        window_task_label(w, "mystery")


def test_build_arrays_drops_unlabeled(small_windows):
    stripped = []
    for i, w in enumerate(small_windows[:20]):
        if i % 2 == 0:
            w = ImuWindow(values=w.values, start_t_ms=w.start_t_ms,
                          stream_id=w.stream_id, channel_set=w.channel_set)
        stripped.append(w)
    x, y, _ = build_arrays(stripped, task="activity3")
    assert len(x) == 10
