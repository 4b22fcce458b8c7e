"""Parsing, synchronization/resampling, windowing, normalization."""

import json

import numpy as np
import pytest

from courier_har.errors import DataError
from courier_har.sensorio import (GAP_MS, PERIOD_MS, NormStats, SensorRecord,
                                  compute_norm_stats, make_windows, normalize,
                                  parse_stream, serialize_record,
                                  synchronize_and_resample)


def line(t, ax=0.0, ay=0.0, az=9.81, **extra):
    obj = {"t": t, "ax": ax, "ay": ay, "az": az}
    obj.update(extra)
    return json.dumps(obj)


def grid_records(n, period=PERIOD_MS, t0=0, gyro=True, **extra):
    lines = []
    for i in range(n):
        kw = dict(extra)
        if gyro:
            kw.update(gx=0.01 * i, gy=0.0, gz=-0.01 * i)
        lines.append(line(t0 + i * period, ax=0.1 * i, **kw))
    records, _ = parse_stream(lines)
    return records


def test_empty_file_empty_stream(tmp_path):
    path = tmp_path / "empty.ndjson"
    path.write_text("")
    records, report = parse_stream(path)
    assert records == []
    assert report.parsed == 0 and report.skipped == 0


def test_missing_gyro_accepted():
    records, report = parse_stream([line(0), line(100)])
    assert report.parsed == 2
    assert all(r.gyro is None for r in records)


def test_three_lines_one_bad():
    records, report = parse_stream([line(0), "{not json", line(100)])
    assert report.parsed == 2
    assert report.skipped == 1
    assert len(records) == 2


def test_majority_malformed_is_hard_error():
    with pytest.raises(DataError):
        parse_stream(["oops", "nope", line(0)])


def test_records_sorted_by_time():
    records, _ = parse_stream([line(200), line(0), line(100)])
    assert [r.t_ms for r in records] == [0, 100, 200]


def test_negative_speed_rejected_at_parse():
    _, report = parse_stream([line(0, spd=-1.0), line(100)])
    assert report.skipped == 1


def test_parse_serialize_round_trip():
    src = [line(0, gx=0.1, gy=0.2, gz=0.3, p=1013.0, lat=32.1, lon=119.4,
                spd=5.0, io="out", lbl="ride"),
           line(100, gx=0.1, gy=0.2, gz=0.3)]
    records, _ = parse_stream(src)
    again, _ = parse_stream([serialize_record(r) for r in records])
    assert records == again


def test_perfect_grid_passes_through():
    records = grid_records(20)
    runs = synchronize_and_resample(records)
    assert len(runs) == 1
    run = runs[0]
    np.testing.assert_array_equal(run.t_ms, np.arange(20) * PERIOD_MS)
    np.testing.assert_allclose(run.acc[:, 0], 0.1 * np.arange(20), atol=1e-9)
    np.testing.assert_allclose(run.gyro[:, 0], 0.01 * np.arange(20),
                               atol=1e-9)


def test_grid_timestamps_are_exact_multiples():
    records = grid_records(30, t0=37)  # off-grid start
    run = synchronize_and_resample(records)[0]
    assert np.all(run.t_ms % PERIOD_MS == 0)
    assert run.t_ms[0] >= 37


def test_mixed_rate_sync_matches_interpolation_oracle():
    # Accel at 25 Hz, gyro at 10 Hz shifted by 30 ms.
    lines = []
    for i in range(100):
        lines.append(line(i * 40, ax=np.sin(i * 0.2)))
    for j in range(40):
        lines.append(json.dumps({"t": 30 + j * 100, "ax": 0.0, "ay": 0.0,
                                 "az": 9.81, "gx": float(j), "gy": 0.0,
                                 "gz": 0.0}))
    records, _ = parse_stream(lines)
    run = synchronize_and_resample(records)[0]
    acc_t = np.array([r.t_ms for r in records])
    acc_x = np.array([r.accel[0] for r in records])
    gyro = [(r.t_ms, r.gyro[0]) for r in records if r.gyro is not None]
    gt = np.array([t for t, _ in gyro])
    gx = np.array([g for _, g in gyro])
    np.testing.assert_allclose(run.acc[:, 0],
                               np.interp(run.t_ms, acc_t, acc_x), atol=1e-12)
    np.testing.assert_allclose(run.gyro[:, 0],
                               np.interp(run.t_ms, gt, gx), atol=1e-12)
    assert np.all(np.diff(run.t_ms) == PERIOD_MS)


def test_two_second_gap_splits_into_two_runs():
    records = grid_records(10) + grid_records(10, t0=10 * PERIOD_MS + 2000)
    runs = synchronize_and_resample(records)
    assert len(runs) == 2
    assert runs[1].t_ms[0] - runs[0].t_ms[-1] > GAP_MS


def test_fewer_than_two_records_rejected():
    with pytest.raises(DataError):
        synchronize_and_resample(grid_records(1))


def test_run_of_sixty_gives_one_window():
    run = synchronize_and_resample(grid_records(60))[0]
    windows = make_windows(run)
    assert len(windows) == 1
    assert windows[0].values.shape == (60, 6)


def test_run_of_hundred_stride_twenty_gives_three():
    run = synchronize_and_resample(grid_records(100))[0]
    windows = make_windows(run, stride=20)
    assert [w.start_t_ms for w in windows] == [0, 2000, 4000]


def test_stride_sixty_tiles_without_overlap():
    run = synchronize_and_resample(grid_records(180))[0]
    windows = make_windows(run, stride=60)
    assert len(windows) == 3
    starts = [w.start_t_ms for w in windows]
    assert starts == [0, 6000, 12000]


def test_short_run_yields_no_windows():
    run = synchronize_and_resample(grid_records(59))[0]
    assert make_windows(run) == []


def test_accel_only_run_gives_three_channel_windows():
    run = synchronize_and_resample(grid_records(60, gyro=False))[0]
    w = make_windows(run)[0]
    assert w.values.shape == (60, 3)
    assert w.channel_set == "acc"


def test_windows_never_cross_gap_boundary():
    records = grid_records(70) + grid_records(70, t0=70 * PERIOD_MS + 1000)
    runs = synchronize_and_resample(records)
    windows = [w for run in runs for w in make_windows(run)]
    for w in windows:
        assert np.all(np.diff(w.t_ms) == PERIOD_MS)


def test_normalization_stats_on_corpus():
    rng = np.random.Generator(np.random.PCG64(0))
    arrays = [rng.normal(loc=3.0, scale=2.0, size=(60, 6)) for _ in range(50)]
    stats = compute_norm_stats(arrays)
    normed = np.concatenate([normalize(a, stats) for a in arrays])
    assert np.all(np.abs(normed.mean(axis=0)) < 1e-3)
    assert np.all(np.abs(normed.std(axis=0) - 1.0) < 1e-2)


def test_constant_channel_floors_to_zero():
    arrays = [np.full((60, 6), 5.0)]
    stats = compute_norm_stats(arrays)
    normed = normalize(arrays[0], stats)
    assert np.all(normed == 0.0)


def test_norm_stats_round_trip_through_checkpoint_dict():
    rng = np.random.Generator(np.random.PCG64(1))
    arrays = [rng.normal(size=(60, 6)) for _ in range(10)]
    stats = compute_norm_stats(arrays)
    revived = NormStats.from_dict(stats.to_dict())
    np.testing.assert_array_equal(normalize(arrays[0], stats),
                                  normalize(arrays[0], revived))


def test_window_aux_fields():
    lines = []
    for i in range(60):
        extra = {}
        if i % 10 == 0:
            extra.update(p=1013.0 - 0.01 * i, lat=32.0 + 1e-5 * i,
                         lon=119.0, spd=5.0, io="out")
        lines.append(line(i * 100, lbl="ride", **extra))
    records, _ = parse_stream(lines)
    run = synchronize_and_resample(records)[0]
    w = make_windows(run)[0]
    assert w.label == "ride"
    assert w.io_state == "outdoor"
    assert w.gps_speed == pytest.approx(5.0)
    assert w.pressure is not None and len(w.pressure) == 60
    assert w.lat == pytest.approx(32.0 + 1e-5 * 30, abs=1e-4)
