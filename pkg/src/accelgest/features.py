"""Statistical feature bank over accelerometer windows.

Ten feature kinds over single axes (or axis pairs for the cross-axis median
difference).  Definitions are fixed conventions:

- mean: arithmetic mean.
- variance: population variance (divide by L).
- kurtosis: population excess kurtosis m4/m2^2 - 3; 0 when m2 < 1e-12.
- p25: 25th percentile, linear interpolation between order statistics.
- iqr_range: p75 - p25.
- neg_zero_crossings: count of i >= 1 with (x[i-1] - mean) > 0 and
  (x[i] - mean) <= 0, i.e. downward crossings of the window mean.  Crossings
  are counted against the mean rather than raw zero because accelerometer
  channels carry a gravity bias.
- global_min_max_sum: min(x) + max(x).
- median_cross_axis_diff(a, b): median(a) - median(b).
- min_max_distance: |argmax(x) - argmin(x)| in samples, first occurrence on
  ties.  Temporal counterpart of the amplitude-based peak-to-peak.
- global_p2p: max(x) - min(x).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Window
from .errors import DegenerateFeature, TooShort

_DEGENERATE_STD = 1e-9


class Axis(Enum):
    X = 0
    Y = 1
    Z = 2


class AxisPair(Enum):
    XY = (0, 1)
    YZ = (1, 2)
    XZ = (0, 2)


class FeatureId(Enum):
    MEAN = "mean"
    VARIANCE = "variance"
    KURTOSIS = "kurtosis"
    P25 = "p25"
    IQR_RANGE = "iqr_range"
    NEG_ZERO_CROSSINGS = "neg_zero_crossings"
    GLOBAL_MIN_MAX_SUM = "global_min_max_sum"
    MEDIAN_CROSS_AXIS_DIFF = "median_cross_axis_diff"
    MIN_MAX_DISTANCE = "min_max_distance"
    GLOBAL_P2P = "global_p2p"


PAIR_FEATURES = frozenset({FeatureId.MEDIAN_CROSS_AXIS_DIFF})

FeatureEntry = tuple[FeatureId, "Axis | AxisPair"]


def entry_name(entry: FeatureEntry) -> str:
    fid, axis = entry
    return f"{fid.value}_{axis.name.lower()}"


@dataclass(frozen=True)
class FeatureSet:
    """Ordered, duplicate-free list of (feature, axis) entries.  The order is
    part of any trained model's identity."""

    entries: tuple[FeatureEntry, ...]

    def __post_init__(self):
        seen = set()
        for fid, axis in self.entries:
            if fid in PAIR_FEATURES and not isinstance(axis, AxisPair):
                raise ValueError(f"{fid.value} requires an axis pair")
            if fid not in PAIR_FEATURES and not isinstance(axis, Axis):
                raise ValueError(f"{fid.value} requires a single axis")
            if (fid, axis) in seen:
                raise ValueError(f"duplicate feature entry {entry_name((fid, axis))}")
            seen.add((fid, axis))

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def names(self) -> list[str]:
        return [entry_name(e) for e in self.entries]

    def to_jsonable(self) -> list[dict]:
        return [{"feature": f.value, "axis": a.name.lower()} for f, a in self.entries]

    @classmethod
    def from_jsonable(cls, items: list[dict]) -> "FeatureSet":
        entries = []
        for item in items:
            fid = FeatureId(item["feature"])
            axis_name = item["axis"].upper()
            axis = AxisPair[axis_name] if fid in PAIR_FEATURES else Axis[axis_name]
            entries.append((fid, axis))
        return cls(tuple(entries))


def default_feature_set() -> FeatureSet:
    """The 20-entry consensus set found by the pipeline search (the cross-axis
    median difference contributes all three pairs)."""
    f = FeatureId
    a = Axis
    p = AxisPair
    return FeatureSet(
        (
            (f.MEAN, a.X),
            (f.MEAN, a.Y),
            (f.VARIANCE, a.Y),
            (f.VARIANCE, a.Z),
            (f.KURTOSIS, a.Y),
            (f.P25, a.Y),
            (f.IQR_RANGE, a.X),
            (f.IQR_RANGE, a.Y),
            (f.NEG_ZERO_CROSSINGS, a.X),
            (f.NEG_ZERO_CROSSINGS, a.Y),
            (f.NEG_ZERO_CROSSINGS, a.Z),
            (f.GLOBAL_MIN_MAX_SUM, a.X),
            (f.MEDIAN_CROSS_AXIS_DIFF, p.XY),
            (f.MEDIAN_CROSS_AXIS_DIFF, p.YZ),
            (f.MEDIAN_CROSS_AXIS_DIFF, p.XZ),
            (f.MIN_MAX_DISTANCE, a.X),
            (f.MIN_MAX_DISTANCE, a.Y),
            (f.MIN_MAX_DISTANCE, a.Z),
            (f.GLOBAL_P2P, a.Y),
            (f.GLOBAL_P2P, a.Z),
        )
    )


def full_feature_pool() -> FeatureSet:
    """All 30 candidates: 9 single-axis features on each of X/Y/Z plus the
    three cross-axis pairs, in table row order."""
    entries: list[FeatureEntry] = []
    for fid in FeatureId:
        if fid in PAIR_FEATURES:
            entries.extend((fid, p) for p in AxisPair)
        else:
            entries.extend((fid, a) for a in Axis)
    return FeatureSet(tuple(entries))


def _kurtosis(x: np.ndarray) -> float:
    if x.shape[0] < 4:
        raise TooShort("kurtosis needs at least 4 samples")
    d = x - x.mean()
    m2 = np.mean(d * d)
    if m2 < 1e-12:
        return 0.0
    m4 = np.mean(d**4)
    return float(m4 / (m2 * m2) - 3.0)


def _neg_zero_crossings(x: np.ndarray) -> float:
    s = x - x.mean()
    return float(np.count_nonzero((s[:-1] > 0) & (s[1:] <= 0)))


def feature_value(window: Window, fid: FeatureId, axis: "Axis | AxisPair") -> float:
    """Single feature of a single window."""
    if fid in PAIR_FEATURES:
        if not isinstance(axis, AxisPair):
            raise ValueError(f"{fid.value} requires an axis pair")
        a, b = axis.value
        return float(np.median(window.data[:, a]) - np.median(window.data[:, b]))
    if not isinstance(axis, Axis):
        raise ValueError(f"{fid.value} requires a single axis")
    x = window.data[:, axis.value]
    if fid is FeatureId.MEAN:
        return float(x.mean())
    if fid is FeatureId.VARIANCE:
        return float(x.var())
    if fid is FeatureId.KURTOSIS:
        return _kurtosis(x)
    if fid is FeatureId.P25:
        return float(np.percentile(x, 25))
    if fid is FeatureId.IQR_RANGE:
        return float(np.percentile(x, 75) - np.percentile(x, 25))
    if fid is FeatureId.NEG_ZERO_CROSSINGS:
        return _neg_zero_crossings(x)
    if fid is FeatureId.GLOBAL_MIN_MAX_SUM:
        return float(x.min() + x.max())
    if fid is FeatureId.MIN_MAX_DISTANCE:
        return float(abs(int(np.argmax(x)) - int(np.argmin(x))))
    if fid is FeatureId.GLOBAL_P2P:
        return float(x.max() - x.min())
    raise ValueError(f"unknown feature {fid}")


def extract_vector(window: Window, feature_set: FeatureSet) -> np.ndarray:
    """Feature vector of one window, in feature-set order."""
    if len(feature_set) == 0:
        raise ValueError("feature set is empty")
    out = np.empty(len(feature_set), dtype=np.float64)
    for i, (fid, axis) in enumerate(feature_set):
        try:
            out[i] = feature_value(window, fid, axis)
        except TooShort as exc:
            raise TooShort(f"entry {i} ({entry_name((fid, axis))}): {exc}") from exc
    return out


def extract_matrix(windows, feature_set: FeatureSet) -> np.ndarray:
    """Vectorized feature matrix (n_windows, n_features); row i equals
    ``extract_vector(windows[i], feature_set)``."""
    if len(feature_set) == 0:
        raise ValueError("feature set is empty")
    windows = list(windows)
    if not windows:
        return np.empty((0, len(feature_set)))
    data = np.stack([w.data for w in windows])  # (N, L, 3)
    length = data.shape[1]
    out = np.empty((data.shape[0], len(feature_set)), dtype=np.float64)
    for j, (fid, axis) in enumerate(feature_set):
        if fid in PAIR_FEATURES:
            a, b = axis.value
            out[:, j] = np.median(data[:, :, a], axis=1) - np.median(data[:, :, b], axis=1)
            continue
        x = data[:, :, axis.value]
        if fid is FeatureId.MEAN:
            out[:, j] = x.mean(axis=1)
        elif fid is FeatureId.VARIANCE:
            out[:, j] = x.var(axis=1)
        elif fid is FeatureId.KURTOSIS:
            if length < 4:
                raise TooShort("kurtosis needs at least 4 samples")
            d = x - x.mean(axis=1, keepdims=True)
            m2 = np.mean(d * d, axis=1)
            m4 = np.mean(d**4, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                k = m4 / (m2 * m2) - 3.0
            out[:, j] = np.where(m2 < 1e-12, 0.0, k)
        elif fid is FeatureId.P25:
            out[:, j] = np.percentile(x, 25, axis=1)
        elif fid is FeatureId.IQR_RANGE:
            out[:, j] = np.percentile(x, 75, axis=1) - np.percentile(x, 25, axis=1)
        elif fid is FeatureId.NEG_ZERO_CROSSINGS:
            s = x - x.mean(axis=1, keepdims=True)
            out[:, j] = np.count_nonzero((s[:, :-1] > 0) & (s[:, 1:] <= 0), axis=1)
        elif fid is FeatureId.GLOBAL_MIN_MAX_SUM:
            out[:, j] = x.min(axis=1) + x.max(axis=1)
        elif fid is FeatureId.MIN_MAX_DISTANCE:
            out[:, j] = np.abs(np.argmax(x, axis=1) - np.argmin(x, axis=1))
        elif fid is FeatureId.GLOBAL_P2P:
            out[:, j] = x.max(axis=1) - x.min(axis=1)
        else:
            raise ValueError(f"unknown feature {fid}")
    return out


@dataclass(frozen=True)
class Scaler:
    """Per-feature z-score standardization fitted on training data."""

    mean: np.ndarray
    std: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        std = np.asarray(self.std, dtype=np.float64)
        if mean.shape != std.shape or mean.ndim != 1:
            raise ValueError("scaler mean/std must be 1-d and matching")
        if np.any(std <= 0):
            raise ValueError("scaler std components must be > 0")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)

    def to_jsonable(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_jsonable(cls, obj: dict) -> "Scaler":
        return cls(np.asarray(obj["mean"]), np.asarray(obj["std"]))


def fit_scaler(vectors: np.ndarray) -> Scaler:
    """Fit z-score parameters; rejects constant features."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("scaler fit needs a (n >= 2, d) matrix")
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    for i, s in enumerate(std):
        if s <= _DEGENERATE_STD:
            raise DegenerateFeature(i)
    return Scaler(mean, std)


def apply_scaler(scaler: Scaler, vectors: np.ndarray) -> np.ndarray:
    """Standardize a vector or matrix; affine and invertible."""
    x = np.asarray(vectors, dtype=np.float64)
    if x.shape[-1] != scaler.mean.shape[0]:
        raise ValueError("dimension mismatch between scaler and input")
    return (x - scaler.mean) / scaler.std


def invert_scaler(scaler: Scaler, vectors: np.ndarray) -> np.ndarray:
    x = np.asarray(vectors, dtype=np.float64)
    return x * scaler.std + scaler.mean
