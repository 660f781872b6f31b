"""Prototype matcher with per-prototype area of influence (AIF).

The matcher mirrors hardware pattern matching engines: feature vectors are
mapped to uint8 components (standardized features times ``byte_gain``,
re-centered at 128 and clipped), prototypes store byte centers, and
distances are integer L1 sums over the byte components.  The AIF bounds
(25 min, 400 max) and the 128-neuron capacity are natural in that byte
space.

Training follows the classic commit/shrink procedure: a sample that fires
no correct-class prototype commits a new prototype whose AIF is the clamped
L1 distance to the nearest other-class prototype, and any other-class
prototype firing on the sample shrinks its AIF to just under that distance.
Passes repeat until a full pass makes no change, capped at ``epochs``.
Inference returns the class of the nearest firing prototype (ties to the
lower prototype index) or Uncertain if none fires.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..core import GROUND_TRUTH_CLASSES, GestureClass
from ..errors import CapacityExhausted, ShapeError
from .base import (
    CODE_CONST_BYTES,
    OP_BASIC,
    Footprint,
    Prediction,
    decode_tensor,
    encode_tensor,
    tensor_bytes,
)


@dataclass(frozen=True)
class PmeConfig:
    aif_min: int = 25
    aif_max: int = 400
    max_neurons: int = 128
    epochs: int = 5
    byte_gain: float = 16.0  # bytes per standardized unit; full range spans +/-8 sigma
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.aif_min <= self.aif_max:
            raise ValueError("need 0 < aif_min <= aif_max")
        if self.max_neurons < 1:
            raise ValueError("max_neurons must be >= 1")
        if self.byte_gain <= 0:
            raise ValueError("byte_gain must be > 0")


def to_bytes_space(X: np.ndarray, byte_gain: float) -> np.ndarray:
    """Map standardized features onto the uint8 grid of the matcher."""
    X = np.asarray(X, dtype=np.float64)
    return np.clip(np.round(X * byte_gain) + 128.0, 0, 255).astype(np.uint8)


@dataclass
class PmeModel:
    kind = "pme"

    centers: np.ndarray  # (P, D) uint8
    aifs: np.ndarray  # (P,) uint16
    classes: np.ndarray  # (P,) uint8, indices into the fixed class order
    config: PmeConfig
    converged: bool = False
    epochs_run: int = 0
    capacity_exhausted: bool = False

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def n_features(self) -> int:
        return int(self.centers.shape[1])

    def distances(self, v: np.ndarray) -> np.ndarray:
        """Integer L1 byte distances from a standardized vector to every
        prototype."""
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_features,):
            raise ShapeError(f"expected vector of dim {self.n_features}, got {v.shape}")
        q = to_bytes_space(v, self.config.byte_gain).astype(np.int64)
        return np.abs(self.centers.astype(np.int64) - q).sum(axis=1)

    def predict(self, v: np.ndarray) -> Prediction:
        d = self.distances(v)
        firing = d <= self.aifs.astype(np.int64)
        if not firing.any():
            return Prediction(GestureClass.UNCERTAIN, 0.0)
        masked = np.where(firing, d, np.iinfo(np.int64).max)
        i = int(np.argmin(masked))  # first minimum wins ties
        score = 1.0 - float(d[i]) / float(self.aifs[i])
        return Prediction(GROUND_TRUTH_CLASSES[int(self.classes[i])], score)

    def predict_batch(self, X: np.ndarray) -> list[Prediction]:
        return [self.predict(x) for x in np.asarray(X, dtype=np.float64)]

    def op_count(self) -> int:
        # Fixed-latency full-capacity scan (hardware broadcasts the query to
        # every neuron slot): |sub| + abs + accumulate per byte, plus firing
        # test and best tracking per slot.
        d = self.n_features
        return self.config.max_neurons * (3 * d + 4) * OP_BASIC

    def footprint(self) -> Footprint:
        flash = tensor_bytes(self.centers, self.aifs, self.classes) + CODE_CONST_BYTES
        # Workspace: distance accumulator plus best (distance, index) tracker.
        ram = 32 + 4 * len(GROUND_TRUTH_CLASSES)
        return Footprint(flash, ram)

    def params_jsonable(self) -> dict:
        return {
            "centers": encode_tensor(self.centers),
            "aifs": encode_tensor(self.aifs),
            "classes": encode_tensor(self.classes),
        }

    def config_jsonable(self) -> dict:
        return {
            "aif_min": self.config.aif_min,
            "aif_max": self.config.aif_max,
            "max_neurons": self.config.max_neurons,
            "epochs": self.config.epochs,
            "byte_gain": self.config.byte_gain,
            "converged": self.converged,
            "epochs_run": self.epochs_run,
            "capacity_exhausted": self.capacity_exhausted,
        }

    @classmethod
    def from_envelope(cls, obj: dict) -> "PmeModel":
        tc = obj["training_config"]
        cfg = PmeConfig(
            aif_min=tc["aif_min"],
            aif_max=tc["aif_max"],
            max_neurons=tc["max_neurons"],
            epochs=tc["epochs"],
            byte_gain=tc["byte_gain"],
            seed=obj["seed"],
        )
        return cls(
            centers=decode_tensor(obj["params"]["centers"]),
            aifs=decode_tensor(obj["params"]["aifs"]),
            classes=decode_tensor(obj["params"]["classes"]),
            config=cfg,
            converged=tc["converged"],
            epochs_run=tc["epochs_run"],
            capacity_exhausted=tc["capacity_exhausted"],
        )


def pme_train(X: np.ndarray, y: np.ndarray, config: PmeConfig = PmeConfig()) -> PmeModel:
    """Commit/shrink training over standardized feature rows.

    Warns CapacityExhausted (and keeps going) once ``max_neurons`` prototypes
    exist and a sample would commit another.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be (n, d) with matching labels")
    Q = to_bytes_space(X, config.byte_gain).astype(np.int64)
    centers: list[np.ndarray] = []
    aifs: list[int] = []
    classes: list[int] = []
    cap_hit = False
    converged = False
    epochs_run = 0
    for _epoch in range(config.epochs):
        changed = False
        epochs_run += 1
        for qi, yi in zip(Q, y):
            if centers:
                d = np.abs(np.asarray(centers) - qi).sum(axis=1)
                cls_arr = np.asarray(classes)
                firing = d <= np.asarray(aifs)
                # Shrink every other-class prototype that fires on this sample.
                for j in np.nonzero(firing & (cls_arr != yi))[0]:
                    new_aif = max(config.aif_min, int(d[j]) - 1)
                    if new_aif < aifs[j]:
                        aifs[j] = new_aif
                        changed = True
                correct_fire = bool(np.any(firing & (cls_arr == yi)))
                other = d[cls_arr != yi]
                nearest_other = int(other.min()) if other.size else config.aif_max
            else:
                correct_fire = False
                nearest_other = config.aif_max
            if not correct_fire:
                if len(centers) >= config.max_neurons:
                    if not cap_hit:
                        warnings.warn(
                            f"prototype capacity {config.max_neurons} reached; "
                            "further commits skipped",
                            CapacityExhausted,
                        )
                    cap_hit = True
                    continue
                centers.append(qi.copy())
                aifs.append(int(np.clip(nearest_other, config.aif_min, config.aif_max)))
                classes.append(int(yi))
                changed = True
        if not changed:
            converged = True
            break
    return PmeModel(
        centers=np.asarray(centers, dtype=np.uint8).reshape(len(centers), X.shape[1]),
        aifs=np.asarray(aifs, dtype=np.uint16),
        classes=np.asarray(classes, dtype=np.uint8),
        config=config,
        converged=converged,
        epochs_run=epochs_run,
        capacity_exhausted=cap_hit,
    )
