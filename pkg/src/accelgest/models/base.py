"""Shared classifier contract: predictions, footprints, the analytic op-count
cost model, and the JSON model envelope.

Model file format (all kinds): a JSON object
``{format, kind, feature_set, scaler, params, footprint, training_config, seed}``
where ``params`` maps tensor names to ``{dtype, shape, data}`` with ``data``
base64 over little-endian bytes.  Float tensors are float32, quantized
tensors int8/int32; round-trips are bit-exact.

Footprint convention: ``flash_bytes`` is the serialized parameter bytes plus
a fixed nominal per-kind code constant of 64 bytes (a dispatch stub; real
firmware library code is out of scope and excluded).  ``ram_bytes`` is the
peak per-inference workspace documented per model kind.

Op-count cost model (per inference, dimensionless "ops"): multiply-accumulate
counts as 2, a visited tree node costs 16 (struct fetch, compare, branch),
and a transcendental call (exp/tanh) costs 96.  The constants reflect
microcontroller-class cost ratios where straight-line dense arithmetic is
cheap relative to branchy traversal and libm calls.  Prototype matchers are
costed over their full neuron capacity: hardware pattern matchers broadcast a
query to every neuron slot, so scan latency is fixed by capacity, not by how
many prototypes are committed.
"""

from __future__ import annotations

import base64
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..core import GestureClass
from ..features import FeatureSet, Scaler

OP_MAC = 2
OP_BASIC = 1
OP_TREE_NODE = 16
OP_TRANSCENDENTAL = 96

CODE_CONST_BYTES = 64

FORMAT_NAME = "accelgest.model/1"


@dataclass(frozen=True)
class Prediction:
    """A classifier decision with a model-specific confidence score."""

    label: GestureClass
    score: float


@dataclass(frozen=True)
class Footprint:
    """Deployment cost estimate: serialized parameter flash vs peak inference
    workspace RAM, both in bytes."""

    flash_bytes: int
    ram_bytes: int

    def __post_init__(self):
        if self.flash_bytes <= 0 or self.ram_bytes <= 0:
            raise ValueError("footprint byte counts must be positive")

    def to_jsonable(self) -> dict:
        return {"flash_bytes": self.flash_bytes, "ram_bytes": self.ram_bytes}


_DTYPES = {
    "float32": "<f4",
    "float64": "<f8",
    "int8": "<i1",
    "int16": "<i2",
    "int32": "<i4",
    "uint8": "<u1",
    "uint16": "<u2",
    "uint32": "<u4",
}


def encode_tensor(arr: np.ndarray) -> dict:
    name = str(arr.dtype)
    if name not in _DTYPES:
        raise ValueError(f"unsupported tensor dtype {name}")
    le = np.ascontiguousarray(arr.astype(_DTYPES[name], copy=False))
    return {
        "dtype": name,
        "shape": list(arr.shape),
        "data": base64.b64encode(le.tobytes()).decode("ascii"),
    }


def decode_tensor(obj: dict) -> np.ndarray:
    raw = base64.b64decode(obj["data"])
    arr = np.frombuffer(raw, dtype=_DTYPES[obj["dtype"]]).reshape(obj["shape"])
    return arr.astype(obj["dtype"], copy=True)


def tensor_bytes(*arrays: np.ndarray) -> int:
    return int(sum(a.size * a.itemsize for a in arrays))


def dumps_canonical(obj) -> str:
    """Stable JSON text: sorted keys, no whitespace drift."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


@dataclass
class ModelArtifact:
    """A trained model bundled with the feature set and scaler it expects."""

    model: object
    feature_set: FeatureSet
    scaler: Scaler

    def to_jsonable(self) -> dict:
        return {
            "format": FORMAT_NAME,
            "kind": self.model.kind,
            "feature_set": self.feature_set.to_jsonable(),
            "scaler": self.scaler.to_jsonable(),
            "params": self.model.params_jsonable(),
            "footprint": self.model.footprint().to_jsonable(),
            "training_config": self.model.config_jsonable(),
            "seed": self.model.seed,
        }

    def save(self, path) -> None:
        Path(path).write_text(dumps_canonical(self.to_jsonable()) + "\n")


def load_artifact(path) -> ModelArtifact:
    from . import MODEL_KINDS  # late import; registry lives in the package init

    obj = json.loads(Path(path).read_text())
    if obj.get("format") != FORMAT_NAME:
        raise ValueError(f"not a model file: {path}")
    cls = MODEL_KINDS[obj["kind"]]
    model = cls.from_envelope(obj)
    return ModelArtifact(
        model=model,
        feature_set=FeatureSet.from_jsonable(obj["feature_set"]),
        scaler=Scaler.from_jsonable(obj["scaler"]),
    )


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)
