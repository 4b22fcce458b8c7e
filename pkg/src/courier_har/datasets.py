"""Corpus assembly: streams -> resampled runs -> labeled window arrays."""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import DataError
from .finetune import TASK_CLASSES
from .sensorio import (compute_norm_stats, make_windows, normalize,
                       parse_stream, synchronize_and_resample, NormStats)
from .weaklabel import (LabelKind, elevation_label_window, label_window)

ACTIVITY_INDEX = {name: i for i, name in enumerate(TASK_CLASSES["activity3"])}


def load_stream_windows(path, stream_id=None, stride=20, channels=6):
    """Parse one ndjson stream and cut it into windows."""
    records, _ = parse_stream(path)
    runs = synchronize_and_resample(records,
                                    stream_id=stream_id or Path(path).stem)
    windows = []
    for run in runs:
        if channels == 6 and run.gyro is None:
            continue
        for w in make_windows(run, stride=stride):
            if channels == 3 and w.values.shape[1] == 6:
                w.values = w.values[:, :3].copy()
                w.channel_set = "acc"
            windows.append(w)
    return windows


def load_corpus_windows(data_dir, stride=20, channels=6):
    """All windows from every stream listed in a manifest directory."""
    data_dir = Path(data_dir)
    manifest_path = data_dir / "manifest.json"
    if manifest_path.exists():
        with open(manifest_path) as f:
            manifest = json.load(f)
        files = [data_dir / e["data"] for e in manifest["streams"]]
    else:
        files = sorted(data_dir.glob("*.ndjson"))
    if not files:
        raise DataError(f"no streams found under {data_dir}")
    windows = []
    for path in files:
        windows.extend(load_stream_windows(path, stride=stride,
                                           channels=channels))
    return windows


def window_task_label(window, task):
    """Integer class id for a window under the given task, or None."""
    if task == "activity3":
        if window.label is None:
            return None
        return ACTIVITY_INDEX[window.label]
    if task == "riding2":
        weak = label_window(window)
        if weak.kind is LabelKind.RIDING:
            return 1
        if weak.kind is LabelKind.NON_RIDING:
            return 0
        return None
    if task == "elevation2":
        weak = elevation_label_window(window)
        if weak.kind is LabelKind.VERTICAL:
            return 1
        if weak.kind is LabelKind.NON_VERTICAL:
            return 0
        return None
    raise DataError(f"unknown task {task!r}")


def build_arrays(windows, task=None, stats: NormStats | None = None):
    """Stack windows into (X, y, stats); computes stats when not given.

    With a task, windows without a label are dropped and y holds class ids;
    otherwise y is None.
    """
    if task is not None:
        pairs = [(w, window_task_label(w, task)) for w in windows]
        pairs = [(w, y) for w, y in pairs if y is not None]
        if not pairs:
            raise DataError(f"no labeled windows for task {task!r}")
        windows = [w for w, _ in pairs]
        y = np.array([lbl for _, lbl in pairs], dtype=np.int64)
    else:
        y = None
    raw = [w.values for w in windows]
    if stats is None:
        stats = compute_norm_stats(raw)
    x = np.stack([normalize(v, stats) for v in raw])
    return x, y, stats
