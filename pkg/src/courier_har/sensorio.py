"""Sensor stream parsing, 10 Hz synchronization/resampling, and windowing.

Input streams are newline-delimited JSON, one record per line:

    {"t": int_ms, "ax": f, "ay": f, "az": f,
     "gx": f?, "gy": f?, "gz": f?, "p": f?,
     "lat": f?, "lon": f?, "spd": f?, "io": "in"|"out"?,
     "lbl": "still"|"walk"|"ride"?}

Units: m/s^2, rad/s, hPa, m/s, degrees. Gyroscope fields may be absent for
gyroscope-less devices; such streams resample to 3-channel runs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PERIOD_MS = 100  # 10 Hz grid
GAP_MS = 500  # larger sample gaps split the stream
WINDOW_LEN = 60
DEFAULT_STRIDE = 20  # 2 s prediction cadence

_LABELS = {"still", "walk", "ride"}
_IO_STATES = {"in": "indoor", "out": "outdoor"}


@dataclass
class SensorRecord:
    t_ms: int
    accel: tuple
    gyro: tuple | None = None
    pressure: float | None = None
    lat: float | None = None
    lon: float | None = None
    speed: float | None = None
    io_state: str | None = None  # "indoor" | "outdoor"
    label: str | None = None  # "still" | "walk" | "ride"


@dataclass
class ParseReport:
    parsed: int = 0
    skipped: int = 0
    errors: list = field(default_factory=list)


@dataclass
class ResampledRun:
    """One gap-free stretch of the stream on the exact 100 ms grid."""
    t_ms: np.ndarray
    acc: np.ndarray  # (N, 3)
    gyro: np.ndarray | None  # (N, 3) or None for accel-only devices
    pressure: np.ndarray | None
    lat: np.ndarray | None
    lon: np.ndarray | None
    speed: np.ndarray | None
    io_state: list | None  # nearest-sample state per grid point
    label: list | None
    stream_id: str = ""

    @property
    def channels(self):
        return 3 if self.gyro is None else 6

    def imu(self):
        if self.gyro is None:
            return self.acc
        return np.concatenate([self.acc, self.gyro], axis=1)


@dataclass
class ImuWindow:
    values: np.ndarray  # (window_len, C) float32, raw units until normalized
    start_t_ms: int
    stream_id: str
    channel_set: str  # "acc+gyro" | "acc"
    t_ms: np.ndarray | None = None
    pressure: np.ndarray | None = None
    io_state: str | None = None  # majority state over the window
    gps_speed: float | None = None  # median GPS speed over the window
    lat: float | None = None  # window-center coordinates
    lon: float | None = None
    label: str | None = None  # majority human/ground-truth label


def _record_from_obj(obj):
    t = obj["t"]
    accel = (float(obj["ax"]), float(obj["ay"]), float(obj["az"]))
    gyro = None
    if all(k in obj for k in ("gx", "gy", "gz")):
        gyro = (float(obj["gx"]), float(obj["gy"]), float(obj["gz"]))
    io_state = _IO_STATES.get(obj["io"]) if "io" in obj else None
    label = obj.get("lbl")
    if label is not None and label not in _LABELS:
        raise DataError(f"unknown label {label!r}")
    rec = SensorRecord(
        t_ms=int(t), accel=accel, gyro=gyro,
        pressure=float(obj["p"]) if "p" in obj else None,
        lat=float(obj["lat"]) if "lat" in obj else None,
        lon=float(obj["lon"]) if "lon" in obj else None,
        speed=float(obj["spd"]) if "spd" in obj else None,
        io_state=io_state, label=label)
    for v in rec.accel + (rec.gyro or ()):
        if not np.isfinite(v):
            raise DataError("non-finite sensor value")
    if rec.speed is not None and rec.speed < 0:
        raise DataError(f"negative GPS speed {rec.speed}")
    return rec


def serialize_record(rec: SensorRecord) -> str:
    obj = {"t": rec.t_ms, "ax": rec.accel[0], "ay": rec.accel[1],
           "az": rec.accel[2]}
    if rec.gyro is not None:
        obj["gx"], obj["gy"], obj["gz"] = rec.gyro
    if rec.pressure is not None:
        obj["p"] = rec.pressure
    if rec.lat is not None:
        obj["lat"] = rec.lat
    if rec.lon is not None:
        obj["lon"] = rec.lon
    if rec.speed is not None:
        obj["spd"] = rec.speed
    if rec.io_state is not None:
        obj["io"] = "in" if rec.io_state == "indoor" else "out"
    if rec.label is not None:
        obj["lbl"] = rec.label
    return json.dumps(obj)


def parse_stream(source):
    """Parse an ndjson stream (path, file object, or iterable of lines).

    Malformed lines are counted and skipped; more than 50% malformed lines
    is a hard error.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as f:
            return parse_stream(f)
    records = []
    report = ParseReport()
    total = 0
    for line in source:
        line = line.strip()
        if not line:
            continue
        total += 1
        try:
            records.append(_record_from_obj(json.loads(line)))
            report.parsed += 1
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            report.skipped += 1
            if len(report.errors) < 20:
                report.errors.append(str(e))
    if total > 0 and report.skipped > total / 2:
        raise DataError(
            f"{report.skipped} of {total} lines malformed (>50%)")
    records.sort(key=lambda r: r.t_ms)
    return records, report


def _coverage_intervals(times, gap_ms):
    """Intervals [t_i, t_j] over which consecutive samples are <= gap apart."""
    intervals = []
    start = times[0]
    prev = times[0]
    for t in times[1:]:
        if t - prev > gap_ms:
            intervals.append((start, prev))
            start = t
        prev = t
    intervals.append((start, prev))
    return intervals


def _intersect(a, b):
    out = []
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo <= hi:
            out.append((lo, hi))
        if a[i][1] < b[j][1]:
            i += 1
        else:
            j += 1
    return out


def _nearest(times, values, grid):
    idx = np.searchsorted(times, grid)
    idx = np.clip(idx, 0, len(times) - 1)
    left = np.clip(idx - 1, 0, len(times) - 1)
    use_left = np.abs(grid - times[left]) <= np.abs(times[idx] - grid)
    pick = np.where(use_left, left, idx)
    return [values[i] for i in pick]


def synchronize_and_resample(records, stream_id="", gap_ms=GAP_MS,
                             period_ms=PERIOD_MS):
    """Align all channels onto a uniform 10 Hz grid via linear interpolation.

    Gaps larger than ``gap_ms`` in the accelerometer or gyroscope split the
    stream into separate contiguous runs. Gyroscope is treated as present
    when the stream carries at least 2 gyro samples.
    """
    if len(records) < 2:
        raise DataError("stream must contain at least 2 records")
    acc_t = np.array([r.t_ms for r in records], dtype=np.int64)
    acc_v = np.array([r.accel for r in records], dtype=np.float64)
    gyro_recs = [(r.t_ms, r.gyro) for r in records if r.gyro is not None]
    has_gyro = len(gyro_recs) >= 2
    intervals = _coverage_intervals(acc_t, gap_ms)
    if has_gyro:
        gyro_t = np.array([t for t, _ in gyro_recs], dtype=np.int64)
        gyro_v = np.array([g for _, g in gyro_recs], dtype=np.float64)
        intervals = _intersect(intervals, _coverage_intervals(gyro_t, gap_ms))

    aux = {}
    for name, getter in (("pressure", lambda r: r.pressure),
                         ("lat", lambda r: r.lat), ("lon", lambda r: r.lon),
                         ("speed", lambda r: r.speed)):
        pairs = [(r.t_ms, getter(r)) for r in records if getter(r) is not None]
        if len(pairs) >= 2:
            aux[name] = (np.array([p[0] for p in pairs], dtype=np.int64),
                         np.array([p[1] for p in pairs], dtype=np.float64))
    io_pairs = [(r.t_ms, r.io_state) for r in records if r.io_state]
    lbl_pairs = [(r.t_ms, r.label) for r in records if r.label]

    runs = []
    for lo, hi in intervals:
        start = int(np.ceil(lo / period_ms)) * period_ms
        if start > hi:
            continue
        grid = np.arange(start, hi + 1, period_ms, dtype=np.int64)
        if len(grid) < 2:
            continue
        acc = np.stack([np.interp(grid, acc_t, acc_v[:, k])
                        for k in range(3)], axis=1)
        gyro = None
        if has_gyro:
            gyro = np.stack([np.interp(grid, gyro_t, gyro_v[:, k])
                             for k in range(3)], axis=1)
        extras = {}
        for name, (t, v) in aux.items():
            extras[name] = np.interp(grid, t, v)
        io_state = None
        if io_pairs:
            io_state = _nearest(np.array([p[0] for p in io_pairs]),
                                [p[1] for p in io_pairs], grid)
        label = None
        if lbl_pairs:
            label = _nearest(np.array([p[0] for p in lbl_pairs]),
                             [p[1] for p in lbl_pairs], grid)
        runs.append(ResampledRun(
            t_ms=grid, acc=acc, gyro=gyro,
            pressure=extras.get("pressure"), lat=extras.get("lat"),
            lon=extras.get("lon"), speed=extras.get("speed"),
            io_state=io_state, label=label, stream_id=stream_id))
    return runs


def _majority(items):
    counts = {}
    for x in items:
        counts[x] = counts.get(x, 0) + 1
    return max(counts, key=counts.get)


def make_windows(run: ResampledRun, stride=DEFAULT_STRIDE,
                 window_len=WINDOW_LEN):
    """Cut a run into fixed-length windows; short runs yield no windows."""
    imu = run.imu()
    n = len(run.t_ms)
    windows = []
    channel_set = "acc" if run.gyro is None else "acc+gyro"
    for start in range(0, n - window_len + 1, stride):
        end = start + window_len
        mid = start + window_len // 2
        w = ImuWindow(
            values=imu[start:end].astype(np.float32),
            start_t_ms=int(run.t_ms[start]),
            stream_id=run.stream_id,
            channel_set=channel_set,
            t_ms=run.t_ms[start:end],
            pressure=(run.pressure[start:end]
                      if run.pressure is not None else None),
            io_state=(_majority(run.io_state[start:end])
                      if run.io_state else None),
            gps_speed=(float(np.median(run.speed[start:end]))
                       if run.speed is not None else None),
            lat=float(run.lat[mid]) if run.lat is not None else None,
            lon=float(run.lon[mid]) if run.lon is not None else None,
            label=(_majority(run.label[start:end]) if run.label else None))
        windows.append(w)
    return windows


@dataclass(frozen=True)
class NormStats:
    mean: tuple
    std: tuple

    def to_dict(self):
        return {"mean": list(self.mean), "std": list(self.std)}

    @classmethod
    def from_dict(cls, d):
        return cls(mean=tuple(d["mean"]), std=tuple(d["std"]))


STD_FLOOR = 1e-6


def compute_norm_stats(arrays):
    """Per-channel mean/std over a stack of (L, C) window arrays."""
    stacked = np.concatenate([np.asarray(a, dtype=np.float64)
                              for a in arrays], axis=0)
    mean = stacked.mean(axis=0)
    std = np.maximum(stacked.std(axis=0), STD_FLOOR)
    return NormStats(mean=tuple(mean.tolist()), std=tuple(std.tolist()))


def normalize(values, stats: NormStats):
    mean = np.asarray(stats.mean, dtype=np.float64)
    std = np.asarray(stats.std, dtype=np.float64)
    return ((np.asarray(values, dtype=np.float64) - mean) / std).astype(
        np.float32)
