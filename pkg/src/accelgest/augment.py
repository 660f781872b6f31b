"""The three timeseries augmentations and class balancing.

Temporal shifting moves the crop along the parent recording (it models
segmenter phase, so rolling samples inside a window would fabricate
discontinuities), amplitude scaling multiplies every axis, and time
stretching resamples around the window center with edge padding.  Balancing
raises every class to the majority count by sampling one augmentation per
generated window, uniformly over the three ops.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GROUND_TRUTH_CLASSES,
    ORIGIN_AUGMENTED,
    Annotation,
    Dataset,
    Provenance,
    Recording,
    Window,
    extract_annotated,
)
from .errors import EdgeClipped
from .seeds import derive_seed

_OPS = ("shift", "amplitude", "stretch")


@dataclass(frozen=True)
class AugmentSpec:
    """Ranges for the three augmentations; defaults follow the study design
    (shift 7-15 samples, amplitude +/-10%, stretch +/-5%)."""

    shift_range: tuple[int, int] = (7, 15)
    amp_range: tuple[float, float] = (0.90, 1.10)
    stretch_range: tuple[float, float] = (0.95, 1.05)
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.shift_range
        if lo <= 0 or hi < lo:
            raise ValueError("shift_range bounds must be positive and ordered")
        for name, (a, b) in (("amp_range", self.amp_range), ("stretch_range", self.stretch_range)):
            if b < a:
                raise ValueError(f"{name} is empty")
            if not a <= 1.0 <= b:
                raise ValueError(f"{name} must contain 1.0")


def temporal_shift(recording: Recording, annotation: Annotation, shift: int) -> Window:
    """Translate the centered annotation window by ``shift`` samples along the
    recording, keeping the original label."""
    if not 7 <= abs(shift) <= 15:
        raise ValueError(f"|shift| must be in [7, 15], got {shift}")
    base = extract_annotated(Recording(recording.data, (annotation,), recording.rate_hz))[0]
    start = base.start + shift
    if start < 0 or start + len(base) > len(recording):
        raise EdgeClipped(
            f"shift {shift:+d} pushes window [{base.start},{base.start + len(base)}) "
            "outside the recording"
        )
    return recording.slice_window(start, len(base), annotation.label)


def amplitude_scale(window: Window, factor: float) -> Window:
    """Multiply every axis value by ``factor``; label preserved."""
    if not np.isfinite(factor) or factor <= 0:
        raise ValueError("factor must be a positive finite number")
    return Window(window.data * factor, window.start, window.rate_hz, window.label)


def time_stretch(window: Window, factor: float) -> Window:
    """Resample the signal around the window center so its tempo changes by
    ``factor`` (>1 slows the motion down); output length equals input length,
    with edge values padding positions that fall outside the source."""
    if not np.isfinite(factor) or factor <= 0:
        raise ValueError("factor must be a positive finite number")
    length = len(window)
    idx = np.arange(length, dtype=np.float64)
    center = (length - 1) / 2.0
    pos = np.clip((idx - center) / factor + center, 0.0, length - 1)
    out = np.empty_like(window.data)
    for c in range(3):
        out[:, c] = np.interp(pos, idx, window.data[:, c])
    return Window(out, window.start, window.rate_hz, window.label)


def shift_within(window: Window, shift: int) -> Window:
    """Slide the window contents by ``shift`` samples, edge-replicating the
    exposed end.  Stand-in for ``temporal_shift`` when the parent recording is
    no longer available (e.g. synthetic windows inside a dataset)."""
    if not 7 <= abs(shift) <= 15:
        raise ValueError(f"|shift| must be in [7, 15], got {shift}")
    data = window.data
    if shift > 0:
        out = np.concatenate([data[shift:], np.repeat(data[-1:], shift, axis=0)])
    else:
        out = np.concatenate([np.repeat(data[:1], -shift, axis=0), data[:shift]])
    return Window(out, window.start + shift, window.rate_hz, window.label)


def _draw_shift(rng: np.random.Generator, spec: AugmentSpec) -> int:
    lo, hi = spec.shift_range
    mag = int(rng.integers(lo, hi + 1))
    return mag if rng.random() < 0.5 else -mag


def augment_window(window: Window, spec: AugmentSpec, rng: np.random.Generator) -> tuple[Window, str]:
    """One augmentation drawn uniformly over the three ops."""
    op = _OPS[int(rng.integers(0, len(_OPS)))]
    if op == "shift":
        return shift_within(window, _draw_shift(rng, spec)), op
    if op == "amplitude":
        return amplitude_scale(window, float(rng.uniform(*spec.amp_range))), op
    return time_stretch(window, float(rng.uniform(*spec.stretch_range))), op


def balance_classes(dataset: Dataset, spec: AugmentSpec) -> Dataset:
    """Raise every class count to the majority count with augmented copies.

    Original windows are kept untouched; each copy records its source index
    and the augmentation seed in provenance.  Deterministic under the spec
    seed.  An already balanced dataset is returned as-is.
    """
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    counts = dataset.class_counts()
    if any(counts[c] == 0 for c in GROUND_TRUTH_CLASSES):
        raise ValueError("every class needs at least one window to balance")
    target = max(counts.values())
    if all(counts[c] == target for c in GROUND_TRUTH_CLASSES):
        return dataset
    windows = list(dataset.windows)
    provenance = list(dataset.provenance)
    for cls in GROUND_TRUTH_CLASSES:
        deficit = target - counts[cls]
        if deficit == 0:
            continue
        pool = [i for i, w in enumerate(dataset.windows) if w.label is cls]
        rng = np.random.default_rng(derive_seed(spec.rng_seed, "balance", cls.value))
        for _ in range(deficit):
            src = pool[int(rng.integers(0, len(pool)))]
            augmented, _op = augment_window(dataset.windows[src], spec, rng)
            windows.append(augmented)
            provenance.append(
                Provenance(
                    ORIGIN_AUGMENTED,
                    seed=spec.rng_seed,
                    user=dataset.provenance[src].user,
                    source=src,
                )
            )
    return Dataset(windows, provenance)
