"""Trajectory segmentation from per-point activity states.

Pipeline: majority-vote smoothing of the activity stream, clustering into
maximal runs (short runs merged into the longer neighbor), per-cluster GPS
outlier refinement against activity speed caps, segmentation with the
mount/dismount proximity constraint, and time-of-stop extraction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError

SMOOTH_WINDOW = 5  # predictions (10 s at the 2 s cadence)
MIN_CLUSTER_S = 4.0
SPEED_CAP_MPS = {"ride": 20.0, "walk": 3.0, "still": 1.0}
MAX_MOUNT_GAP_M = 100.0
RESNAP_HORIZON = 10  # points searched on each side when re-snapping

EARTH_RADIUS_M = 6371000.0


@dataclass
class TrajPoint:
    t_ms: int
    lat: float
    lon: float
    activity: str  # "still" | "walk" | "ride"


@dataclass
class Segment:
    activity: str
    start_t_ms: int
    end_t_ms: int
    entry: tuple  # (lat, lon)
    exit: tuple
    point_count: int
    flag: str | None = None

    def to_obj(self):
        obj = {"act": self.activity, "t0": int(self.start_t_ms),
               "t1": int(self.end_t_ms),
               "p0": [self.entry[0], self.entry[1]],
               "p1": [self.exit[0], self.exit[1]]}
        if self.flag:
            obj["flag"] = self.flag
        return obj


def haversine_m(lat1, lon1, lat2, lon2):
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dp = p2 - p1
    dl = np.radians(lon2 - lon1)
    a = np.sin(dp / 2) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * np.arcsin(np.sqrt(a))


def smooth_acts(labels, window_size=SMOOTH_WINDOW):
    """Per-position majority vote over a centered window.

    Ties resolve toward the previous smoothed label when it is among the
    tied candidates, else toward the point's own label.
    """
    if window_size < 1 or window_size % 2 == 0:
        raise ContractError(f"window_size must be odd and >= 1, "
                            f"got {window_size}")
    labels = list(labels)
    if not labels or window_size == 1:
        return labels
    half = window_size // 2
    out = []
    for i in range(len(labels)):
        lo, hi = max(0, i - half), min(len(labels), i + half + 1)
        counts = {}
        for lbl in labels[lo:hi]:
            counts[lbl] = counts.get(lbl, 0) + 1
        best = max(counts.values())
        tied = [lbl for lbl, c in counts.items() if c == best]
        if len(tied) == 1:
            out.append(tied[0])
        elif out and out[-1] in tied:
            out.append(out[-1])
        elif labels[i] in tied:
            out.append(labels[i])
        else:
            out.append(tied[0])
    return out


@dataclass
class Cluster:
    activity: str
    start: int  # index range [start, end) into the point list
    end: int


def find_act_clusters(labels, t_ms=None, min_duration_s=MIN_CLUSTER_S,
                      cadence_s=2.0):
    """Maximal equal-label runs; runs shorter than min_duration merge into
    the longer neighbor (cascading until stable)."""
    labels = list(labels)
    if not labels:
        return []
    runs = []
    start = 0
    for i in range(1, len(labels) + 1):
        if i == len(labels) or labels[i] != labels[start]:
            runs.append(Cluster(labels[start], start, i))
            start = i

    def duration(run):
        # span between the run's first and last detections
        if t_ms is not None:
            last = min(run.end, len(labels)) - 1
            return (t_ms[last] - t_ms[run.start]) / 1000.0
        return (run.end - run.start - 1) * cadence_s

    changed = True
    while changed and len(runs) > 1:
        changed = False
        # merge the shortest offending run first
        short = [r for r in runs if duration(r) < min_duration_s]
        if not short:
            break
        run = min(short, key=duration)
        i = runs.index(run)
        left = runs[i - 1] if i > 0 else None
        right = runs[i + 1] if i + 1 < len(runs) else None
        if left is not None and (right is None
                                 or duration(left) >= duration(right)):
            target = left
        else:
            target = right
        run.activity = target.activity
        # coalesce equal-label neighbors
        merged = []
        for r in runs:
            if merged and merged[-1].activity == r.activity:
                merged[-1].end = r.end
            else:
                merged.append(r)
        runs = merged
        changed = True
    return runs


def refine_gps(clusters, points):
    """Replace per-cluster GPS outliers by neighbor interpolation.

    A point whose implied speed to both retained neighbors exceeds the
    cluster's physical cap is considered a GPS glitch. Timestamps are never
    changed.
    """
    refined = [TrajPoint(p.t_ms, p.lat, p.lon, p.activity) for p in points]
    for c in clusters:
        cap = SPEED_CAP_MPS.get(c.activity, SPEED_CAP_MPS["ride"])
        for i in range(c.start + 1, min(c.end, len(refined)) - 1):
            prev, cur, nxt = refined[i - 1], refined[i], refined[i + 1]
            dt_prev = max((cur.t_ms - prev.t_ms) / 1000.0, 1e-6)
            dt_next = max((nxt.t_ms - cur.t_ms) / 1000.0, 1e-6)
            v_prev = haversine_m(prev.lat, prev.lon, cur.lat, cur.lon) / dt_prev
            v_next = haversine_m(cur.lat, cur.lon, nxt.lat, nxt.lon) / dt_next
            if v_prev > cap and v_next > cap:
                span = max(nxt.t_ms - prev.t_ms, 1)
                frac = (cur.t_ms - prev.t_ms) / span
                cur.lat = prev.lat + (nxt.lat - prev.lat) * frac
                cur.lon = prev.lon + (nxt.lon - prev.lon) * frac
    return refined


def segment_gps(points, clusters, max_mount_gap_m=MAX_MOUNT_GAP_M):
    """One Segment per cluster; consecutive segments share boundary times.

    Consecutive ride segments separated only by non-ride segments must have
    dismount and re-mount locations within ``max_mount_gap_m``; violations
    are re-snapped to the nearest satisfying point pair when possible, else
    flagged.
    """
    if not clusters:
        return []
    bounds = [c.start for c in clusters] + [len(points)]
    segments = []
    for c, lo, hi in zip(clusters, bounds[:-1], bounds[1:]):
        start_t = points[lo].t_ms
        end_t = points[hi].t_ms if hi < len(points) else points[-1].t_ms
        segments.append(Segment(
            activity=c.activity, start_t_ms=start_t, end_t_ms=end_t,
            entry=(points[lo].lat, points[lo].lon),
            exit=(points[hi - 1].lat, points[hi - 1].lon),
            point_count=hi - lo))
    ride_idx = [i for i, s in enumerate(segments) if s.activity == "ride"]
    for a, b in zip(ride_idx[:-1], ride_idx[1:]):
        if any(segments[k].activity == "ride" for k in range(a + 1, b)):
            continue
        dis = segments[a].exit
        mount = segments[b].entry
        if haversine_m(dis[0], dis[1], mount[0], mount[1]) <= max_mount_gap_m:
            continue
        snapped = _resnap(points, clusters, a, b, bounds, max_mount_gap_m)
        if snapped is not None:
            segments[a].exit = snapped[0]
            segments[b].entry = snapped[1]
            segments[a].flag = segments[b].flag = "mount_gap_resnapped"
        else:
            segments[a].flag = segments[b].flag = "mount_gap"
    return segments


def _resnap(points, clusters, a, b, bounds, max_gap_m):
    """Nearest (dismount, mount) point pair within the gap constraint."""
    end_a = bounds[a + 1]
    start_b = bounds[b]
    cand_a = range(end_a - 1, max(bounds[a], end_a - RESNAP_HORIZON) - 1, -1)
    cand_b = range(start_b, min(bounds[b + 1], start_b + RESNAP_HORIZON))
    best = None
    best_cost = None
    for off_a, i in enumerate(cand_a):
        for off_b, j in enumerate(cand_b):
            p, q = points[i], points[j]
            if haversine_m(p.lat, p.lon, q.lat, q.lon) <= max_gap_m:
                cost = off_a + off_b
                if best_cost is None or cost < best_cost:
                    best_cost = cost
                    best = ((p.lat, p.lon), (q.lat, q.lon))
    return best


def time_of_stop(segments):
    """Durations of maximal non-ride gaps between consecutive ride segments.

    Returns a list of (dismount_t_ms, mount_t_ms, duration_s). Trailing
    non-ride activity without a re-mount produces no stop.
    """
    stops = []
    ride_segs = [s for s in segments if s.activity == "ride"]
    for prev, nxt in zip(ride_segs[:-1], ride_segs[1:]):
        dismount = prev.end_t_ms
        mount = nxt.start_t_ms
        if mount > dismount:
            stops.append((dismount, mount, (mount - dismount) / 1000.0))
    return stops


def segment_trajectory(points, smooth_window=SMOOTH_WINDOW,
                       min_duration_s=MIN_CLUSTER_S,
                       max_mount_gap_m=MAX_MOUNT_GAP_M):
    """Full pipeline: smooth, cluster, refine, segment."""
    if not points:
        return []
    labels = smooth_acts([p.activity for p in points], smooth_window)
    t_ms = [p.t_ms for p in points]
    cadence = ((t_ms[-1] - t_ms[0]) / max(len(t_ms) - 1, 1)) / 1000.0
    clusters = find_act_clusters(labels, t_ms=t_ms,
                                 min_duration_s=min_duration_s,
                                 cadence_s=max(cadence, 1e-3))
    refined = refine_gps(clusters, points)
    for c in clusters:
        for i in range(c.start, min(c.end, len(refined))):
            refined[i].activity = c.activity
    return segment_gps(refined, clusters, max_mount_gap_m)


def segments_to_geojson(segments, points=None):
    """GeoJSON FeatureCollection with one LineString per segment."""
    features = []
    for seg in segments:
        if points is not None:
            coords = [[p.lon, p.lat] for p in points
                      if seg.start_t_ms <= p.t_ms <= seg.end_t_ms]
        else:
            coords = [[seg.entry[1], seg.entry[0]],
                      [seg.exit[1], seg.exit[0]]]
        features.append({
            "type": "Feature",
            "geometry": {"type": "LineString", "coordinates": coords},
            "properties": seg.to_obj(),
        })
    return {"type": "FeatureCollection", "features": features}


def write_segments_ndjson(segments, path):
    with open(path, "w") as f:
        for seg in segments:
            f.write(json.dumps(seg.to_obj()) + "\n")
