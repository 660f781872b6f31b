"""Host-side latency micro-benchmark for trained models.

Times two paths separately with a monotonic clock: the full per-window
pipeline (feature extraction + scaling + inference) and inference alone on
precomputed vectors.  The measurement overhead of an empty call, estimated
the same way, is subtracted from every sample (clamped at zero).  Warm-up
repetitions are excluded.  Figures are microseconds on the host; on-target
numbers differ by the usual microcontroller factors, so cross-model
comparisons should rely on ordering and the analytic op counts.

Profiling is strictly single-threaded; do not run it concurrently with
other work if the numbers are meant to be quotable.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .features import FeatureSet, Scaler, apply_scaler, extract_vector

MIN_REPS = 30
MIN_WARMUP = 10


@dataclass(frozen=True)
class LatencyStats:
    mean_us: float
    p50_us: float
    p99_us: float
    n_calls: int

    def to_jsonable(self) -> dict:
        return {
            "mean_us": self.mean_us,
            "p50_us": self.p50_us,
            "p99_us": self.p99_us,
            "n_calls": self.n_calls,
        }


def _time_loop(fn, args, reps: int, warmup: int) -> np.ndarray:
    """Per-call nanosecond samples over reps passes, warm-up excluded."""
    samples = []
    clock = time.perf_counter_ns
    for rep in range(warmup + reps):
        keep = rep >= warmup
        for a in args:
            t0 = clock()
            fn(a)
            t1 = clock()
            if keep:
                samples.append(t1 - t0)
    return np.asarray(samples, dtype=np.float64)


def _noop(_a):
    return None


def _stats(ns: np.ndarray, baseline_ns: float) -> LatencyStats:
    us = np.maximum(ns - baseline_ns, 0.0) / 1000.0
    return LatencyStats(
        mean_us=float(us.mean()),
        p50_us=float(np.percentile(us, 50)),
        p99_us=float(np.percentile(us, 99)),
        n_calls=int(us.size),
    )


def profile_latency(
    model,
    windows,
    feature_set: FeatureSet,
    scaler: Scaler,
    reps: int = 50,
    warmup: int = MIN_WARMUP,
) -> dict:
    """Latency stats for a model over a window set.

    Returns ``{"full": ..., "inference": ..., "baseline_us": ...,
    "op_count": ...}`` with mean/p50/p99 per call in microseconds.
    """
    windows = list(windows)
    if not windows:
        raise ValueError("no windows to profile")
    if reps < MIN_REPS:
        raise ValueError(f"reps must be >= {MIN_REPS}")
    warmup = max(warmup, MIN_WARMUP)

    vectors = [apply_scaler(scaler, extract_vector(w, feature_set)) for w in windows]

    def full_call(w):
        model.predict(apply_scaler(scaler, extract_vector(w, feature_set)))

    baseline_ns = float(_time_loop(_noop, [None] * len(windows), reps, warmup).mean())
    infer_ns = _time_loop(model.predict, vectors, reps, warmup)
    full_ns = _time_loop(full_call, windows, reps, warmup)
    return {
        "full": _stats(full_ns, baseline_ns),
        "inference": _stats(infer_ns, baseline_ns),
        "baseline_us": baseline_ns / 1000.0,
        "op_count": model.op_count(),
    }
