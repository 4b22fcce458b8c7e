"""Rule-based weak labels.

Riding rule: outdoors with GPS speed strictly above 4 m/s is riding; anything
indoors is non-riding. Slow outdoor motion defaults to non-riding (the
"strict" policy emits unlabeled instead). Vertical-movement rule: pressure
change of at least 0.25 hPa over the window AND change rate above
0.016 hPa/s.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import DataError

SPEED_THRESHOLD_MPS = 4.0
PRESSURE_DELTA_HPA = 0.25
PRESSURE_RATE_HPA_PER_S = 0.016


class LabelKind(str, Enum):
    RIDING = "riding"
    NON_RIDING = "non_riding"
    VERTICAL = "vertical"
    NON_VERTICAL = "non_vertical"
    UNLABELED = "unlabeled"


class LabelSource(str, Enum):
    RULE_IO_GPS = "rule_io_gps"
    RULE_BAROMETER = "rule_barometer"
    HUMAN = "human"


class OutdoorSlowPolicy(str, Enum):
    NON_RIDING = "non_riding"  # default: slow outdoor motion is non-riding
    STRICT = "strict"  # slow outdoor motion stays unlabeled


@dataclass(frozen=True)
class WeakLabel:
    kind: LabelKind
    source: LabelSource
    start_t_ms: int | None = None

    def to_obj(self):
        return {"start_t": self.start_t_ms, "kind": self.kind.value,
                "source": self.source.value}


def riding_label(io_state, gps_speed,
                 policy=OutdoorSlowPolicy.NON_RIDING) -> WeakLabel:
    """Classify a window as riding/non-riding from IO state and GPS speed.

    ``io_state`` is "indoor", "outdoor", or None/"unknown"; ``gps_speed`` in
    m/s or None when no fix is available.
    """
    if gps_speed is not None and gps_speed < 0:
        raise DataError(f"negative GPS speed {gps_speed}")
    src = LabelSource.RULE_IO_GPS
    if io_state == "indoor":
        return WeakLabel(LabelKind.NON_RIDING, src)
    if io_state == "outdoor":
        if gps_speed is None:
            return WeakLabel(LabelKind.UNLABELED, src)
        if gps_speed > SPEED_THRESHOLD_MPS:
            return WeakLabel(LabelKind.RIDING, src)
        if policy is OutdoorSlowPolicy.STRICT:
            return WeakLabel(LabelKind.UNLABELED, src)
        return WeakLabel(LabelKind.NON_RIDING, src)
    return WeakLabel(LabelKind.UNLABELED, src)


def merge_to_binary(activity) -> LabelKind:
    """Fold the 3-class activity label into riding / non-riding."""
    if activity in ("ride", "riding"):
        return LabelKind.RIDING
    if activity in ("still", "walk", "walking"):
        return LabelKind.NON_RIDING
    raise DataError(f"unknown activity label {activity!r}")


def elevation_label(pressure, t_ms=None) -> WeakLabel:
    """Vertical-movement label from a window's pressure series.

    The pressure delta and rate are computed end-to-end over the window.
    Missing barometer data yields unlabeled.
    """
    src = LabelSource.RULE_BAROMETER
    if pressure is None:
        return WeakLabel(LabelKind.UNLABELED, src)
    pressure = np.asarray(pressure, dtype=np.float64)
    if pressure.size < 2:
        return WeakLabel(LabelKind.UNLABELED, src)
    if t_ms is None:
        from .sensorio import PERIOD_MS
        dt_s = (pressure.size - 1) * PERIOD_MS / 1000.0
    else:
        t_ms = np.asarray(t_ms)
        dt_s = (t_ms[-1] - t_ms[0]) / 1000.0
    if dt_s <= 0:
        raise DataError(f"non-positive window duration {dt_s} s")
    delta = abs(float(pressure[-1] - pressure[0]))
    rate = delta / dt_s
    if delta >= PRESSURE_DELTA_HPA and rate > PRESSURE_RATE_HPA_PER_S:
        return WeakLabel(LabelKind.VERTICAL, src)
    return WeakLabel(LabelKind.NON_VERTICAL, src)


def label_window(window, policy=OutdoorSlowPolicy.NON_RIDING) -> WeakLabel:
    """Apply the riding rule to an ImuWindow's aggregated IO/GPS signals."""
    lbl = riding_label(window.io_state, window.gps_speed, policy)
    return WeakLabel(lbl.kind, lbl.source, start_t_ms=window.start_t_ms)


def elevation_label_window(window) -> WeakLabel:
    lbl = elevation_label(window.pressure, window.t_ms)
    return WeakLabel(lbl.kind, lbl.source, start_t_ms=window.start_t_ms)
