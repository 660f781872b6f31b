"""Deterministic synthetic generator for X, O and Random gesture windows.

Gestures are built in trajectory space and differentiated twice to
acceleration, which yields physically plausible oscillatory signatures: the
O gesture is a circular arc (two sinusoids in quadrature on the x/y axes),
the X gesture is the five-stroke polyline center -> top-right -> bottom-left
-> top-left -> bottom-right -> center with blended corners, and Random is a
band-limited noise walk with low-frequency drift and occasional high-energy
bursts.  Gravity contributes a constant 1 g along a per-user wrist axis.
Everything is a pure function of (inputs, seed).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import (
    DEFAULT_RATE_HZ,
    DEFAULT_WINDOW_LEN,
    GROUND_TRUTH_CLASSES,
    ORIGIN_SYNTHETIC,
    Dataset,
    GestureClass,
    Provenance,
    Window,
)
from .errors import InvalidClass
from .seeds import derive_seed

GRAVITY_G = 1.0
# Nominal gesture duration in samples before tempo/jitter (about 2.6 s at 25 Hz).
BASE_GESTURE_SPAN = 64


@dataclass(frozen=True)
class SynthParams:
    """Knobs of the synthetic generator."""

    amplitude_g: float = 1.5
    noise_std_g: float = 0.05
    speed_jitter: float = 0.1
    per_user_offset_g: tuple[float, float, float] = (0.05, 0.05, 0.05)
    rng_seed: int = 0

    def __post_init__(self):
        if self.amplitude_g <= 0:
            raise ValueError("amplitude_g must be > 0")
        if self.noise_std_g < 0:
            raise ValueError("noise_std_g must be >= 0")
        if not 0 <= self.speed_jitter < 0.3:
            raise ValueError("speed_jitter must be in [0, 0.3)")


@dataclass(frozen=True)
class UserProfile:
    """Simulated per-participant variance: axis gains, bias, tempo and the
    wrist gravity axis."""

    user_id: int
    scale: tuple[float, float, float] = (1.0, 1.0, 1.0)
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)
    tempo: float = 1.0
    gravity: tuple[float, float, float] = (0.0, 0.0, 1.0)

    def __post_init__(self):
        if not all(0.7 <= s <= 1.3 for s in self.scale):
            raise ValueError("scale components must be in [0.7, 1.3]")
        if not 0.8 <= self.tempo <= 1.25:
            raise ValueError("tempo must be in [0.8, 1.25]")
        norm = math.sqrt(sum(g * g for g in self.gravity))
        if abs(norm - 1.0) > 1e-9:
            raise ValueError("gravity axis must be a unit vector")


NEUTRAL_USER = UserProfile(user_id=0)

# X-gesture waypoints in the x/y plane, in stroke order.
_X_WAYPOINTS = np.array(
    [[0.0, 0.0], [1.0, 1.0], [-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [0.0, 0.0]]
)


def _smooth(traj: np.ndarray, kernel_len: int) -> np.ndarray:
    """Moving Hann-window smoothing with edge replication; blends corners so
    the second difference stays bounded."""
    if kernel_len < 3:
        return traj
    k = np.hanning(kernel_len + 2)[1:-1]
    k /= k.sum()
    pad = kernel_len // 2
    padded = np.concatenate([np.repeat(traj[:1], pad, 0), traj, np.repeat(traj[-1:], pad, 0)])
    out = np.empty_like(traj)
    for c in range(traj.shape[1]):
        out[:, c] = np.convolve(padded[:, c], k, mode="valid")[: traj.shape[0]]
    return out


def _second_difference(traj: np.ndarray) -> np.ndarray:
    padded = np.concatenate([traj[:1], traj, traj[-1:]])
    return padded[2:] - 2.0 * padded[1:-1] + padded[:-2]


def _polyline_positions(waypoints: np.ndarray, n: int) -> np.ndarray:
    """Constant-speed positions along a polyline, n samples inclusive."""
    seg = np.diff(waypoints, axis=0)
    seg_len = np.linalg.norm(seg, axis=1)
    cum = np.concatenate([[0.0], np.cumsum(seg_len)])
    s = np.linspace(0.0, cum[-1], n)
    pos = np.empty((n, waypoints.shape[1]))
    for c in range(waypoints.shape[1]):
        pos[:, c] = np.interp(s, cum, waypoints[:, c])
    return pos


def _gesture_span(rng: np.random.Generator, params: SynthParams, user: UserProfile, length: int) -> tuple[int, int]:
    jitter = 1.0 + params.speed_jitter * rng.uniform(-1.0, 1.0)
    span = int(round(BASE_GESTURE_SPAN * user.tempo * jitter))
    span = max(24, min(span, length - 12))
    start = int(rng.integers(4, length - span - 3))
    return start, span


def _trajectory_o(rng, params, user, length):
    start, span = _gesture_span(rng, params, user, length)
    traj = np.zeros((length, 3))
    phase0 = rng.uniform(0.0, 2.0 * math.pi)
    # Clockwise full circle; closed loop so rest position matches start/end.
    phase = phase0 - np.linspace(0.0, 2.0 * math.pi, span)
    traj[start : start + span, 0] = 0.5 * (np.cos(phase) - math.cos(phase0))
    traj[start : start + span, 1] = 0.5 * (np.sin(phase) - math.sin(phase0))
    return traj


def _trajectory_x(rng, params, user, length):
    start, span = _gesture_span(rng, params, user, length)
    traj = np.zeros((length, 3))
    traj[start : start + span, :2] = _polyline_positions(_X_WAYPOINTS, span)
    return traj


def _trajectory_random(rng, params, user, length):
    # Band-limited noise walk on all three axes plus slow drift.
    sigma = rng.uniform(2.0, 6.0)
    half = int(3 * sigma)
    t = np.arange(-half, half + 1)
    kernel = np.exp(-0.5 * (t / sigma) ** 2)
    kernel /= kernel.sum()
    noise = rng.normal(size=(length + 2 * half, 3))
    traj = np.empty((length, 3))
    for c in range(3):
        traj[:, c] = np.convolve(noise[:, c], kernel, mode="valid")[:length]
    drift_freq = rng.uniform(0.2, 0.8)  # cycles over the window
    drift_phase = rng.uniform(0.0, 2.0 * math.pi, size=3)
    tt = np.linspace(0.0, 2.0 * math.pi * drift_freq, length)
    traj += 0.4 * np.sin(tt[:, None] + drift_phase[None, :]) * rng.uniform(0.2, 1.0, size=3)
    if rng.random() < 0.3:  # occasional high-energy burst
        center = int(rng.integers(10, length - 10))
        width = int(rng.integers(3, 8))
        bump = np.exp(-0.5 * ((np.arange(length) - center) / width) ** 2)
        traj[:, rng.integers(0, 3)] += rng.choice([-1.0, 1.0]) * rng.uniform(1.0, 2.5) * bump
    traj *= rng.uniform(0.3, 1.4)
    return traj


_BUILDERS = {
    GestureClass.O: _trajectory_o,
    GestureClass.X: _trajectory_x,
    GestureClass.RANDOM: _trajectory_random,
}


def synth_window(
    gesture: GestureClass,
    params: SynthParams,
    user: UserProfile = NEUTRAL_USER,
    instance: int = 0,
    window_len: int = DEFAULT_WINDOW_LEN,
) -> Window:
    """Generate one labeled window; identical inputs give identical output.

    ``instance`` separates repeated draws of the same (class, params, user)
    combination inside a dataset.
    """
    if gesture not in GROUND_TRUTH_CLASSES:
        raise InvalidClass(f"cannot synthesize class {gesture}")
    if window_len < 40:
        raise ValueError("window_len must be >= 40 to fit a gesture span")
    rng = np.random.default_rng(
        derive_seed(params.rng_seed, "window", gesture.value, user.user_id, instance)
    )
    traj = _BUILDERS[gesture](rng, params, user, window_len)
    traj = _smooth(traj, 5)
    acc = _second_difference(traj)
    peak = np.max(np.abs(acc))
    if peak > 0:
        acc *= params.amplitude_g / peak
    acc = acc * np.asarray(user.scale)[None, :]
    acc += GRAVITY_G * np.asarray(user.gravity)[None, :]
    acc += np.asarray(user.offset)[None, :]
    if params.noise_std_g > 0:
        acc = acc + rng.normal(0.0, params.noise_std_g, size=acc.shape)
    return Window(acc, start=0, rate_hz=DEFAULT_RATE_HZ, label=gesture)


def draw_users(n_users: int, params: SynthParams) -> list[UserProfile]:
    """Deterministic user profiles; user 0 is always the neutral profile."""
    users = [NEUTRAL_USER]
    for uid in range(1, n_users):
        rng = np.random.default_rng(derive_seed(params.rng_seed, "user", uid))
        scale = tuple(float(s) for s in rng.uniform(0.8, 1.2, size=3))
        off = np.asarray(params.per_user_offset_g)
        offset = tuple(float(o) for o in rng.uniform(-1.0, 1.0, size=3) * off)
        tempo = float(rng.uniform(0.85, 1.2))
        tilt = rng.normal(0.0, 0.12, size=3)
        g = np.array([0.0, 0.0, 1.0]) + tilt
        g /= np.linalg.norm(g)
        users.append(UserProfile(uid, scale, offset, tempo, tuple(float(x) for x in g)))
    return users


def synth_dataset(n_per_class: int, n_users: int, params: SynthParams) -> Dataset:
    """Class-balanced dataset of 3 * n_per_class * n_users synthetic windows."""
    if n_per_class < 1:
        raise ValueError("n_per_class must be >= 1")
    if not 1 <= n_users <= 100:
        raise ValueError("n_users must be in [1, 100]")
    users = draw_users(n_users, params)
    windows, provenance = [], []
    for user in users:
        for gesture in GROUND_TRUTH_CLASSES:
            for i in range(n_per_class):
                windows.append(synth_window(gesture, params, user, instance=i))
                provenance.append(
                    Provenance(ORIGIN_SYNTHETIC, seed=params.rng_seed, user=user.user_id)
                )
    return Dataset(windows, provenance)
