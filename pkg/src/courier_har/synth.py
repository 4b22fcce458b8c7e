"""Deterministic synthetic courier scenarios with exact ground truth.

Signal models are intentionally simple: the goal is class separability with
controllable confusions (e.g. constant-speed riding that looks like being
still), not physical realism. All randomness flows from one seeded generator,
so identical seeds give bitwise-identical streams.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .sensorio import SensorRecord, serialize_record

GRAVITY = 9.81
BASE_PRESSURE_HPA = 1013.25
EARTH_M_PER_DEG_LAT = 111320.0

# Yangzhou-style 3-class sample proportions (still / walk / ride).
DEFAULT_MIX = {"still": 277140, "walk": 168007, "ride": 456629}

ACTIVITY_SPEED = {"still": 0.0, "walking": 1.4, "riding": 6.0,
                  "elevator": 0.0}
THREE_CLASS = {"still": "still", "walking": "walk", "riding": "ride",
               "elevator": "still"}


@dataclass(frozen=True)
class DeviceProfile:
    has_gyro: bool = True
    has_barometer: bool = True
    accel_rate_hz: float = 10.0
    gyro_every: int = 1  # carry gyro on every k-th accel record
    gps_every: int = 10  # GPS fields every k-th record (1 Hz at 10 Hz accel)
    pressure_every: int = 10
    clock_offset_ms: int = 0
    handling_spike_rate: float = 0.02  # spikes per second while still
    riding_still_confusion: float = 0.0  # fraction of smooth riding time
    random_orientation: bool = True  # random fixed device pose per stream


@dataclass(frozen=True)
class Phase:
    activity: str  # "still" | "walking" | "riding" | "elevator"
    duration_s: float
    indoor: bool = False
    pressure_delta_hpa: float = 0.0  # elevator phases ramp by this amount

    def __post_init__(self):
        if self.activity not in ACTIVITY_SPEED:
            raise ConfigError(f"unknown activity {self.activity!r}")
        if self.duration_s <= 0:
            raise ConfigError("phase duration must be positive")


@dataclass(frozen=True)
class ScenarioPlan:
    seed: int
    phases: tuple
    waypoints: tuple  # ((lat, lon), ...) route polyline
    device: DeviceProfile = DeviceProfile()
    start_t_ms: int = 0

    def __post_init__(self):
        moving = any(p.activity in ("walking", "riding") for p in self.phases)
        if moving and len(self.waypoints) < 2:
            raise ConfigError("moving phases require >= 2 waypoints")


@dataclass
class GroundTruth:
    t_ms: np.ndarray
    activity: list  # per-tick 3-class label: "still" | "walk" | "ride"
    phase_activity: list  # raw phase activity incl. "elevator"
    phase_bounds: list  # (activity, start_ms, end_ms)
    mounts: list  # (t_ms, lat, lon) ride starts
    dismounts: list  # (t_ms, lat, lon) ride ends
    vertical_intervals: list  # (start_ms, end_ms)

    def to_obj(self):
        return {
            "t_ms": [int(t) for t in self.t_ms],
            "activity": self.activity,
            "phase_activity": self.phase_activity,
            "phase_bounds": [[a, int(s), int(e)]
                             for a, s, e in self.phase_bounds],
            "mounts": [[int(t), lat, lon] for t, lat, lon in self.mounts],
            "dismounts": [[int(t), lat, lon]
                          for t, lat, lon in self.dismounts],
            "vertical_intervals": [[int(s), int(e)]
                                   for s, e in self.vertical_intervals],
        }

    @classmethod
    def from_obj(cls, obj):
        return cls(
            t_ms=np.array(obj["t_ms"], dtype=np.int64),
            activity=list(obj["activity"]),
            phase_activity=list(obj["phase_activity"]),
            phase_bounds=[(a, s, e) for a, s, e in obj["phase_bounds"]],
            mounts=[tuple(m) for m in obj["mounts"]],
            dismounts=[tuple(m) for m in obj["dismounts"]],
            vertical_intervals=[tuple(v)
                                for v in obj["vertical_intervals"]])


def _route_position(waypoints, distance_m):
    """Point at ``distance_m`` along the waypoint polyline (clamped)."""
    lat0 = waypoints[0][0]
    m_per_deg_lon = EARTH_M_PER_DEG_LAT * np.cos(np.radians(lat0))
    remaining = distance_m
    for (lat_a, lon_a), (lat_b, lon_b) in zip(waypoints[:-1], waypoints[1:]):
        dy = (lat_b - lat_a) * EARTH_M_PER_DEG_LAT
        dx = (lon_b - lon_a) * m_per_deg_lon
        seg = float(np.hypot(dx, dy))
        if remaining <= seg or seg == 0.0:
            frac = 0.0 if seg == 0.0 else remaining / seg
            return (lat_a + (lat_b - lat_a) * frac,
                    lon_a + (lon_b - lon_a) * frac)
        remaining -= seg
    return waypoints[-1]


def _random_rotation_matrix(rng):
    axis = rng.normal(size=3)
    axis /= np.linalg.norm(axis)
    angle = rng.uniform(0.0, 2.0 * np.pi)
    from scipy.spatial.transform import Rotation
    return Rotation.from_rotvec(axis * angle).as_matrix()


def _accel_gyro(activity, t_s, rng, gait_hz, sway_hz, spike_rate,
                smooth_riding, dt_s):
    """One accel/gyro sample for the given activity at time t_s."""
    acc = np.array([0.0, 0.0, GRAVITY])
    gyr = np.zeros(3)
    if activity == "still":
        acc += rng.normal(0.0, 0.08, size=3)
        gyr += rng.normal(0.0, 0.02, size=3)
        if spike_rate > 0 and rng.random() < spike_rate * dt_s:
            acc[rng.integers(0, 3)] += rng.normal(0.0, 3.0)
            gyr[rng.integers(0, 3)] += rng.normal(0.0, 0.8)
    elif activity == "walking":
        w = 2.0 * np.pi * gait_hz * t_s
        acc[2] += 2.5 * np.sin(w) + 0.8 * np.sin(2 * w)
        acc[0] += 0.9 * np.sin(w + 0.7)
        acc[1] += 0.7 * np.cos(w + 1.1)
        acc += rng.normal(0.0, 0.25, size=3)
        gyr += np.array([0.45 * np.sin(w + 0.3), 0.35 * np.cos(w),
                         0.25 * np.sin(w + 1.9)])
        gyr += rng.normal(0.0, 0.05, size=3)
    elif activity == "riding":
        w = 2.0 * np.pi * sway_hz * t_s
        if smooth_riding:
            # constant-speed stretch: vibration collapses toward still-like
            acc += rng.normal(0.0, 0.12, size=3)
            gyr += rng.normal(0.0, 0.03, size=3)
        else:
            acc[0] += 0.6 * np.sin(w)
            acc[1] += 0.5 * np.cos(w * 0.7)
            acc += rng.normal(0.0, 1.1, size=3)
            gyr += np.array([0.25 * np.sin(w), 0.2 * np.cos(w * 0.9), 0.0])
            gyr += rng.normal(0.0, 0.15, size=3)
    elif activity == "elevator":
        acc += rng.normal(0.0, 0.06, size=3)
        gyr += rng.normal(0.0, 0.015, size=3)
    return acc, gyr


def generate(plan: ScenarioPlan):
    """Synthesize (SensorRecords, GroundTruth) for a scenario plan."""
    rng = np.random.Generator(np.random.PCG64(plan.seed))
    dev = plan.device
    dt_s = 1.0 / dev.accel_rate_hz
    period_ms = int(round(1000.0 * dt_s))
    gait_hz = rng.uniform(1.85, 2.15)
    sway_hz = rng.uniform(0.4, 0.6)
    # fixed device pose for the whole stream (phone-in-pocket orientation)
    pose = np.eye(3)
    if dev.random_orientation:
        pose = _random_rotation_matrix(rng)

    records = []
    gt_t, gt_act, gt_phase_act = [], [], []
    phase_bounds, mounts, dismounts, verticals = [], [], [], []
    t_ms = plan.start_t_ms
    distance = 0.0
    pressure = BASE_PRESSURE_HPA + rng.uniform(-2.0, 2.0)
    tick = 0
    for phase in plan.phases:
        n_ticks = int(round(phase.duration_s * dev.accel_rate_hz))
        phase_start_ms = t_ms
        ramp = (phase.pressure_delta_hpa / n_ticks
                if phase.activity == "elevator" and n_ticks else 0.0)
        smooth_until = -1.0
        pos = _route_position(plan.waypoints, distance)
        if phase.activity == "riding":
            mounts.append((t_ms, pos[0], pos[1]))
        for k in range(n_ticks):
            t_s = (t_ms - plan.start_t_ms) / 1000.0
            smooth = False
            if (phase.activity == "riding"
                    and dev.riding_still_confusion > 0.0):
                if t_s < smooth_until:
                    smooth = True
                elif rng.random() < dev.riding_still_confusion * dt_s:
                    smooth_until = t_s + rng.uniform(2.0, 5.0)
                    smooth = True
            acc, gyr = _accel_gyro(phase.activity, t_s, rng, gait_hz,
                                   sway_hz, dev.handling_spike_rate, smooth,
                                   dt_s)
            acc = pose @ acc
            gyr = pose @ gyr
            speed = ACTIVITY_SPEED[phase.activity]
            if phase.activity == "walking":
                speed = max(0.0, speed + rng.normal(0.0, 0.15))
            elif phase.activity == "riding":
                speed = max(0.0, speed + rng.normal(0.0, 0.8))
            distance += speed * dt_s
            pos = _route_position(plan.waypoints, distance)
            pressure += ramp + rng.normal(0.0, 0.002)
            rec = SensorRecord(
                t_ms=t_ms + dev.clock_offset_ms,
                accel=tuple(acc),
                gyro=(tuple(gyr)
                      if dev.has_gyro and tick % dev.gyro_every == 0
                      else None),
                io_state="indoor" if phase.indoor else "outdoor",
                label=THREE_CLASS[phase.activity])
            if tick % dev.gps_every == 0 and not phase.indoor:
                rec.lat, rec.lon = pos
                rec.speed = max(0.0, speed + rng.normal(0.0, 0.2))
            if dev.has_barometer and tick % dev.pressure_every == 0:
                rec.pressure = pressure
            records.append(rec)
            gt_t.append(t_ms)
            gt_act.append(THREE_CLASS[phase.activity])
            gt_phase_act.append(phase.activity)
            t_ms += period_ms
            tick += 1
        phase_bounds.append((phase.activity, phase_start_ms, t_ms))
        if phase.activity == "riding":
            dismounts.append((t_ms - period_ms, pos[0], pos[1]))
        if phase.activity == "elevator":
            verticals.append((phase_start_ms, t_ms))
    truth = GroundTruth(
        t_ms=np.array(gt_t, dtype=np.int64), activity=gt_act,
        phase_activity=gt_phase_act, phase_bounds=phase_bounds,
        mounts=mounts, dismounts=dismounts, vertical_intervals=verticals)
    return records, truth


def _random_route(rng, n_points=6, lat0=31.20, lon0=121.40):
    """A wandering polyline with 300-800 m legs."""
    pts = [(lat0 + rng.uniform(-0.05, 0.05), lon0 + rng.uniform(-0.05, 0.05))]
    heading = rng.uniform(0.0, 2.0 * np.pi)
    m_per_deg_lon = EARTH_M_PER_DEG_LAT * np.cos(np.radians(lat0))
    for _ in range(n_points - 1):
        heading += rng.uniform(-0.9, 0.9)
        leg = rng.uniform(300.0, 800.0)
        lat, lon = pts[-1]
        pts.append((lat + leg * np.cos(heading) / EARTH_M_PER_DEG_LAT,
                    lon + leg * np.sin(heading) / m_per_deg_lon))
    return tuple(pts)


def delivery_cycle_plan(seed, mix=None, total_s=None, device=None,
                        include_elevator=False, indoor_still=True):
    """A Fig-1 style cycle: ride -> walk -> still -> walk -> ride.

    Per-class durations follow ``mix`` proportions exactly, so corpus-level
    class balance matches the requested mix up to window rounding.
    """
    rng = np.random.Generator(np.random.PCG64(np.uint64(seed) ^ 0x5EED))
    mix = dict(mix or DEFAULT_MIX)
    total_weight = sum(mix.values())
    props = {k: v / total_weight for k, v in mix.items()}
    if total_s is None:
        total_s = rng.uniform(280.0, 420.0)
    ride_s = total_s * props.get("ride", 0.0)
    walk_s = total_s * props.get("walk", 0.0)
    still_s = total_s * props.get("still", 0.0)
    split = rng.uniform(0.4, 0.6)
    phases = [
        Phase("riding", max(10.0, ride_s * split)),
        Phase("walking", max(6.0, walk_s * 0.5)),
        Phase("still", max(8.0, still_s), indoor=indoor_still),
        Phase("walking", max(6.0, walk_s * 0.5)),
        Phase("riding", max(10.0, ride_s * (1.0 - split))),
    ]
    if include_elevator:
        phases.insert(3, Phase("elevator", rng.uniform(12.0, 20.0),
                               indoor=True,
                               pressure_delta_hpa=rng.choice([-0.4, 0.4])))
    return ScenarioPlan(seed=seed, phases=tuple(phases),
                        waypoints=_random_route(rng),
                        device=device or DeviceProfile())


def generate_corpus(n_streams, mix=None, seed=0, out_dir=None, device=None,
                    include_elevator=False):
    """Generate n streams plus a manifest with ground-truth references.

    When ``out_dir`` is given, writes stream_XXXX.ndjson, matching
    .truth.json sidecars, and manifest.json.
    """
    if n_streams < 1:
        raise ConfigError("n_streams must be >= 1")
    mix = dict(mix or DEFAULT_MIX)
    streams = []
    totals = {"still": 0, "walk": 0, "ride": 0}
    for i in range(n_streams):
        plan = delivery_cycle_plan(seed * 1_000_003 + i, mix=mix,
                                   device=device,
                                   include_elevator=include_elevator)
        records, truth = generate(plan)
        for a in truth.activity:
            totals[a] += 1
        streams.append((f"stream_{i:04d}", records, truth))
    grand = sum(totals.values())
    manifest = {
        "n_streams": n_streams,
        "seed": seed,
        "requested_mix": {k: v / sum(mix.values()) for k, v in mix.items()},
        "realized_mix": {k: v / grand for k, v in totals.items()},
        "streams": [],
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    for name, records, truth in streams:
        entry = {"name": name, "ticks": len(truth.t_ms)}
        if out_dir is not None:
            data_path = out_dir / f"{name}.ndjson"
            with open(data_path, "w") as f:
                for rec in records:
                    f.write(serialize_record(rec) + "\n")
            truth_path = out_dir / f"{name}.truth.json"
            with open(truth_path, "w") as f:
                json.dump(truth.to_obj(), f)
            entry["data"] = data_path.name
            entry["truth"] = truth_path.name
        manifest["streams"].append(entry)
    if out_dir is not None:
        with open(out_dir / "manifest.json", "w") as f:
            json.dump(manifest, f, indent=2)
    return manifest, streams
