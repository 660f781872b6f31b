"""Core accelerometer timeseries types and the streaming window segmenter.

Samples are triaxial accelerations in g at a nominal 25 Hz.  A Window is the
unit of classification: a fixed-length contiguous slice of a recording, 100
samples (about 4 s) by default.  All containers are immutable after
construction and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import EdgeClipped, EmptyInput, InvalidClass

SENSOR_FULL_SCALE_G = 16.0
DEFAULT_WINDOW_LEN = 100
DEFAULT_RATE_HZ = 25.0
DEFAULT_STRIDE = 25
# A window inherits a gesture label when it covers at least this fraction of
# the annotation span.  Chosen so a window shifted by up to one stride still
# inherits the label.
OVERLAP_LABEL_THRESHOLD = 0.75


class GestureClass(Enum):
    O = "O"
    X = "X"
    RANDOM = "RANDOM"
    UNCERTAIN = "UNCERTAIN"


# Fixed class order used for label indices, votes and confusion matrices.
GROUND_TRUTH_CLASSES = (GestureClass.O, GestureClass.X, GestureClass.RANDOM)
N_CLASSES = len(GROUND_TRUTH_CLASSES)

ORIGIN_SYNTHETIC = "synthetic"
ORIGIN_AUGMENTED = "augmented"
ORIGIN_INGESTED = "ingested"


def class_index(label: GestureClass) -> int:
    """Index of a ground-truth class in the fixed class order."""
    if label not in GROUND_TRUTH_CLASSES:
        raise InvalidClass(f"{label} is not a ground-truth class")
    return GROUND_TRUTH_CLASSES.index(label)


@dataclass(frozen=True)
class Sample:
    """One triaxial accelerometer reading at sample index ``t``."""

    t: int
    ax: float
    ay: float
    az: float

    def __post_init__(self):
        for v in (self.ax, self.ay, self.az):
            if not np.isfinite(v):
                raise ValueError("sample values must be finite")
            if abs(v) > SENSOR_FULL_SCALE_G:
                raise ValueError(f"|{v}| exceeds the {SENSOR_FULL_SCALE_G} g full-scale bound")


def _validate_signal(data: np.ndarray, what: str) -> np.ndarray:
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != 3:
        raise ValueError(f"{what} must have shape (n, 3), got {data.shape}")
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{what} contains non-finite values")
    if np.any(np.abs(data) > SENSOR_FULL_SCALE_G):
        raise ValueError(f"{what} exceeds the {SENSOR_FULL_SCALE_G} g full-scale bound")
    return data


@dataclass(frozen=True, eq=False)
class Window:
    """Fixed-length triaxial segment; ``start`` is the index of the first
    sample in the parent recording (consecutive indices are implicit)."""

    data: np.ndarray  # (L, 3) columns ax, ay, az
    start: int = 0
    rate_hz: float = DEFAULT_RATE_HZ
    label: GestureClass | None = None

    def __post_init__(self):
        data = _validate_signal(self.data, "window").copy()
        if data.shape[0] < 2:
            raise ValueError("window length must be >= 2")
        if self.label is GestureClass.UNCERTAIN:
            raise InvalidClass("Uncertain is a prediction-only value, never a ground-truth label")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    def __len__(self) -> int:
        return self.data.shape[0]

    def axis(self, i: int) -> np.ndarray:
        return self.data[:, i]

    @property
    def samples(self) -> tuple[Sample, ...]:
        return tuple(
            Sample(self.start + i, float(r[0]), float(r[1]), float(r[2]))
            for i, r in enumerate(self.data)
        )

    def with_label(self, label: GestureClass | None) -> "Window":
        return Window(self.data, self.start, self.rate_hz, label)

    def same_signal(self, other: "Window") -> bool:
        return self.data.shape == other.data.shape and bool(np.array_equal(self.data, other.data))


@dataclass(frozen=True)
class Annotation:
    """Half-open [start, end) gesture span inside a recording."""

    start: int
    end: int
    label: GestureClass

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError(f"annotation span [{self.start},{self.end}) is empty")
        if self.label not in GROUND_TRUTH_CLASSES:
            raise InvalidClass("annotations must carry a ground-truth class")

    @property
    def length(self) -> int:
        return self.end - self.start

    @property
    def midpoint(self) -> float:
        return (self.start + self.end) / 2.0


@dataclass(frozen=True, eq=False)
class Recording:
    """Long unsegmented sample stream plus its gesture annotations."""

    data: np.ndarray  # (N, 3)
    annotations: tuple[Annotation, ...] = ()
    rate_hz: float = DEFAULT_RATE_HZ

    def __post_init__(self):
        data = _validate_signal(self.data, "recording").copy()
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        anns = tuple(sorted(self.annotations, key=lambda a: a.start))
        for a in anns:
            if a.start < 0 or a.end > data.shape[0]:
                raise ValueError(f"annotation [{a.start},{a.end}) out of recording bounds")
        for prev, cur in zip(anns, anns[1:]):
            if cur.start < prev.end:
                raise ValueError(
                    f"annotations [{prev.start},{prev.end}) and [{cur.start},{cur.end}) overlap"
                )
        object.__setattr__(self, "annotations", anns)

    def __len__(self) -> int:
        return self.data.shape[0]

    def slice_window(self, start: int, length: int, label: GestureClass | None = None) -> Window:
        if start < 0 or start + length > len(self):
            raise EdgeClipped(f"window [{start},{start + length}) outside recording of {len(self)}")
        return Window(self.data[start : start + length], start=start, rate_hz=self.rate_hz, label=label)


@dataclass(frozen=True)
class Provenance:
    """How a window came to exist; ``source`` is the dataset index of the
    parent window for augmented copies."""

    origin: str
    seed: int | None = None
    user: int | None = None
    source: int | None = None

    def __post_init__(self):
        if self.origin not in (ORIGIN_SYNTHETIC, ORIGIN_AUGMENTED, ORIGIN_INGESTED):
            raise ValueError(f"unknown provenance origin {self.origin!r}")


@dataclass
class Dataset:
    """Labeled windows plus per-window provenance, aligned by index."""

    windows: list[Window] = field(default_factory=list)
    provenance: list[Provenance] = field(default_factory=list)

    def __post_init__(self):
        if len(self.windows) != len(self.provenance):
            raise ValueError("windows and provenance must have equal length")
        if self.windows:
            length = len(self.windows[0])
            rate = self.windows[0].rate_hz
            for w in self.windows:
                if len(w) != length or w.rate_hz != rate:
                    raise ValueError("all windows in a dataset must share length and rate")
                if w.label not in GROUND_TRUTH_CLASSES:
                    raise InvalidClass("dataset windows must carry a ground-truth label")

    def __len__(self) -> int:
        return len(self.windows)

    @property
    def window_len(self) -> int:
        return len(self.windows[0]) if self.windows else 0

    @property
    def rate_hz(self) -> float:
        return self.windows[0].rate_hz if self.windows else DEFAULT_RATE_HZ

    def labels(self) -> list[GestureClass]:
        return [w.label for w in self.windows]

    def label_indices(self) -> np.ndarray:
        return np.array([class_index(w.label) for w in self.windows], dtype=np.int64)

    def class_counts(self) -> dict[GestureClass, int]:
        counts = {c: 0 for c in GROUND_TRUTH_CLASSES}
        for w in self.windows:
            counts[w.label] += 1
        return counts

    def subset(self, indices) -> "Dataset":
        """New dataset from the given indices.  Provenance ``source`` fields
        still refer to indices in the original dataset."""
        idx = [int(i) for i in indices]
        return Dataset([self.windows[i] for i in idx], [self.provenance[i] for i in idx])


def _overlap_label(start: int, end: int, annotations: tuple[Annotation, ...]) -> GestureClass:
    """Label for window [start,end): the class of the annotation whose span is
    covered >= 75% by the window, else Random.  Best coverage wins; ties go to
    the earlier annotation."""
    best_frac = 0.0
    best_label = GestureClass.RANDOM
    for a in annotations:
        ov = min(end, a.end) - max(start, a.start)
        if ov <= 0:
            continue
        frac = ov / a.length
        if frac >= OVERLAP_LABEL_THRESHOLD and frac > best_frac:
            best_frac = frac
            best_label = a.label
    return best_label


def segment_stream(
    recording: Recording,
    window_len: int = DEFAULT_WINDOW_LEN,
    stride: int = DEFAULT_STRIDE,
) -> list[Window]:
    """Slide a fixed window over a recording.

    Produces floor((N - window_len) / stride) + 1 windows at offsets
    0, stride, 2*stride, ...  Each window is labeled by annotation overlap
    (see ``_overlap_label``); windows covering no annotation are Random.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    n = len(recording)
    if n < window_len:
        raise EmptyInput(f"recording of {n} samples is shorter than window_len={window_len}")
    out = []
    for start in range(0, n - window_len + 1, stride):
        label = _overlap_label(start, start + window_len, recording.annotations)
        out.append(recording.slice_window(start, window_len, label))
    return out


def extract_annotated(recording: Recording, window_len: int = DEFAULT_WINDOW_LEN) -> list[Window]:
    """One window per annotation, centered on the annotation midpoint.

    Spans shorter than ``window_len`` are padded from the surrounding
    recording; spans too close to the edge raise EdgeClipped naming the
    annotation.
    """
    if window_len < 2:
        raise ValueError("window_len must be >= 2")
    out = []
    for a in recording.annotations:
        start = (a.start + a.end - window_len) // 2
        if start < 0 or start + window_len > len(recording):
            raise EdgeClipped(
                f"annotation [{a.start},{a.end}) too close to the recording edge "
                f"to fill a {window_len}-sample window"
            )
        out.append(recording.slice_window(start, window_len, a.label))
    return out
