"""Dense softmax classifier and its post-training int8 quantization.

Architecture: hidden dense layers (16, 16, 8, 4 by default), each followed
by batch normalization, ReLU and train-time dropout, then a dense layer over
the three gesture classes with softmax.  Trained with Adam on cross-entropy.
Predictions below the confidence threshold (0.6) map to Uncertain.

Quantization folds batch norm into the dense weights, then quantizes weights
per-tensor symmetric int8 and activations per-tensor affine int8 calibrated
on a representative feature matrix; biases stay int32 at the accumulator
scale.  The int8 inference path uses integer arithmetic end to end and
dequantizes only the final logits for the softmax.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GROUND_TRUTH_CLASSES, N_CLASSES, GestureClass
from ..errors import DivergedTraining, ShapeError
from ..seeds import derive_seed
from .base import (
    CODE_CONST_BYTES,
    OP_BASIC,
    OP_MAC,
    OP_TRANSCENDENTAL,
    Footprint,
    Prediction,
    decode_tensor,
    encode_tensor,
    softmax,
    tensor_bytes,
)

_BN_EPS = 1e-5


@dataclass(frozen=True)
class NnConfig:
    hidden: tuple[int, ...] = (16, 16, 8, 4)
    lr: float = 0.0015
    dropout: float = 0.1
    epochs: int = 10
    batch_size: int = 32
    batchnorm: bool = True
    confidence_threshold: float = 0.6
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    bn_momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.dropout < 1:
            raise ValueError("dropout must be in [0, 1)")
        if not 0 < self.confidence_threshold <= 1:
            raise ValueError("confidence_threshold must be in (0, 1]")


@dataclass
class BatchNormStats:
    gamma: np.ndarray
    beta: np.ndarray
    mean: np.ndarray
    var: np.ndarray


@dataclass
class NnModel:
    kind = "nn"

    weights: list[np.ndarray]  # per layer (in, out) float32
    biases: list[np.ndarray]  # per layer (out,) float32
    bn: list[BatchNormStats]  # one per hidden layer when batchnorm on, else []
    config: NnConfig

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def n_features(self) -> int:
        return int(self.weights[0].shape[0])

    def logits(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) features, got {X.shape}")
        h = X
        n_hidden = len(self.weights) - 1
        for i in range(n_hidden):
            h = h @ self.weights[i].astype(np.float64) + self.biases[i].astype(np.float64)
            if self.bn:
                s = self.bn[i]
                h = (h - s.mean) / np.sqrt(s.var + _BN_EPS) * s.gamma + s.beta
            h = np.maximum(h, 0.0)
        return h @ self.weights[-1].astype(np.float64) + self.biases[-1].astype(np.float64)

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.logits(X))

    def predict(self, v: np.ndarray) -> Prediction:
        p = self.probabilities(np.asarray(v, dtype=np.float64)[None, :])[0]
        return threshold_prediction(p, self.config.confidence_threshold)

    def predict_batch(self, X: np.ndarray) -> list[Prediction]:
        probs = self.probabilities(X)
        return [threshold_prediction(p, self.config.confidence_threshold) for p in probs]

    def op_count(self) -> int:
        ops = 0
        n_hidden = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            ops += OP_MAC * w.shape[0] * w.shape[1] + OP_BASIC * b.shape[0]
            if i < n_hidden:
                if self.bn:
                    ops += 2 * OP_BASIC * b.shape[0]  # folded scale and shift
                ops += OP_BASIC * b.shape[0]  # relu
        ops += N_CLASSES * (OP_TRANSCENDENTAL + 2)  # softmax
        return ops

    def _all_tensors(self) -> list[np.ndarray]:
        out = list(self.weights) + list(self.biases)
        for s in self.bn:
            out += [s.gamma, s.beta, s.mean, s.var]
        return out

    def footprint(self) -> Footprint:
        flash = tensor_bytes(*self._all_tensors()) + CODE_CONST_BYTES
        widths = [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]
        # double-buffered activations for the widest layer pair
        ram = 4 * max(widths[i] + widths[i + 1] for i in range(len(widths) - 1)) + 32
        return Footprint(flash, ram)

    def params_jsonable(self) -> dict:
        params = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            params[f"w{i}"] = encode_tensor(w)
            params[f"b{i}"] = encode_tensor(b)
        for i, s in enumerate(self.bn):
            params[f"bn{i}_gamma"] = encode_tensor(s.gamma)
            params[f"bn{i}_beta"] = encode_tensor(s.beta)
            params[f"bn{i}_mean"] = encode_tensor(s.mean)
            params[f"bn{i}_var"] = encode_tensor(s.var)
        return params

    def config_jsonable(self) -> dict:
        c = self.config
        return {
            "hidden": list(c.hidden),
            "lr": c.lr,
            "dropout": c.dropout,
            "epochs": c.epochs,
            "batch_size": c.batch_size,
            "batchnorm": c.batchnorm,
            "confidence_threshold": c.confidence_threshold,
        }

    @classmethod
    def from_envelope(cls, obj: dict) -> "NnModel":
        tc = obj["training_config"]
        cfg = NnConfig(
            hidden=tuple(tc["hidden"]),
            lr=tc["lr"],
            dropout=tc["dropout"],
            epochs=tc["epochs"],
            batch_size=tc["batch_size"],
            batchnorm=tc["batchnorm"],
            confidence_threshold=tc["confidence_threshold"],
            seed=obj["seed"],
        )
        params = obj["params"]
        n_layers = len(cfg.hidden) + 1
        weights = [decode_tensor(params[f"w{i}"]) for i in range(n_layers)]
        biases = [decode_tensor(params[f"b{i}"]) for i in range(n_layers)]
        bn = []
        if cfg.batchnorm:
            for i in range(len(cfg.hidden)):
                bn.append(
                    BatchNormStats(
                        decode_tensor(params[f"bn{i}_gamma"]),
                        decode_tensor(params[f"bn{i}_beta"]),
                        decode_tensor(params[f"bn{i}_mean"]),
                        decode_tensor(params[f"bn{i}_var"]),
                    )
                )
        return cls(weights=weights, biases=biases, bn=bn, config=cfg)


def threshold_prediction(probs: np.ndarray, threshold: float) -> Prediction:
    """Map a softmax row to a decision; below-threshold confidence is
    Uncertain.  The boundary itself (max prob == threshold) commits."""
    top = int(np.argmax(probs))
    score = float(probs[top])
    if score < threshold:
        return Prediction(GestureClass.UNCERTAIN, score)
    return Prediction(GROUND_TRUTH_CLASSES[top], score)


class _TrainState:
    """Float64 parameters plus Adam moments during training."""

    def __init__(self, n_in: int, cfg: NnConfig, rng: np.random.Generator):
        widths = [n_in, *cfg.hidden, N_CLASSES]
        self.cfg = cfg
        self.weights = [
            rng.normal(0.0, np.sqrt(2.0 / widths[i]), size=(widths[i], widths[i + 1]))
            for i in range(len(widths) - 1)
        ]
        self.biases = [np.zeros(widths[i + 1]) for i in range(len(widths) - 1)]
        self.gamma = [np.ones(h) for h in cfg.hidden] if cfg.batchnorm else []
        self.beta = [np.zeros(h) for h in cfg.hidden] if cfg.batchnorm else []
        self.run_mean = [np.zeros(h) for h in cfg.hidden]
        self.run_var = [np.ones(h) for h in cfg.hidden]
        self._params = self.weights + self.biases + self.gamma + self.beta
        self._m = [np.zeros_like(p) for p in self._params]
        self._v = [np.zeros_like(p) for p in self._params]
        self._t = 0

    def forward_backward(self, X, y_onehot, rng=None, update_running=True):
        """Training-mode loss and gradients (batch statistics, dropout drawn
        from ``rng`` when given)."""
        cfg = self.cfg
        n_hidden = len(cfg.hidden)
        caches = []
        h = X
        for i in range(n_hidden):
            lin = h @ self.weights[i] + self.biases[i]
            if cfg.batchnorm:
                mu = lin.mean(axis=0)
                var = lin.var(axis=0)
                inv = 1.0 / np.sqrt(var + _BN_EPS)
                xhat = (lin - mu) * inv
                bn_out = xhat * self.gamma[i] + self.beta[i]
                if update_running:
                    m = cfg.bn_momentum
                    self.run_mean[i] = m * self.run_mean[i] + (1 - m) * mu
                    self.run_var[i] = m * self.run_var[i] + (1 - m) * var
            else:
                xhat, inv, bn_out = None, None, lin
            act = np.maximum(bn_out, 0.0)
            if rng is not None and cfg.dropout > 0:
                mask = (rng.random(act.shape) >= cfg.dropout) / (1.0 - cfg.dropout)
            else:
                mask = None
            out = act * mask if mask is not None else act
            caches.append((h, xhat, inv, bn_out, mask))
            h = out
        logits = h @ self.weights[-1] + self.biases[-1]
        probs = softmax(logits)
        n = X.shape[0]
        eps = 1e-12
        loss = float(-np.sum(y_onehot * np.log(probs + eps)) / n)

        d_logits = (probs - y_onehot) / n
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_g = [None] * n_hidden if cfg.batchnorm else []
        grads_beta = [None] * n_hidden if cfg.batchnorm else []
        grads_w[-1] = h.T @ d_logits
        grads_b[-1] = d_logits.sum(axis=0)
        dh = d_logits @ self.weights[-1].T
        for i in range(n_hidden - 1, -1, -1):
            hin, xhat, inv, bn_out, mask = caches[i]
            if mask is not None:
                dh = dh * mask
            dh = dh * (bn_out > 0)
            if cfg.batchnorm:
                grads_g[i] = np.sum(dh * xhat, axis=0)
                grads_beta[i] = dh.sum(axis=0)
                m = dh.shape[0]
                dxhat = dh * self.gamma[i]
                dlin = (
                    inv / m * (m * dxhat - dxhat.sum(axis=0) - xhat * np.sum(dxhat * xhat, axis=0))
                )
            else:
                dlin = dh
            grads_w[i] = hin.T @ dlin
            grads_b[i] = dlin.sum(axis=0)
            dh = dlin @ self.weights[i].T
        return loss, grads_w + grads_b + grads_g + grads_beta

    def adam_step(self, grads):
        cfg = self.cfg
        self._t += 1
        b1, b2 = cfg.beta1, cfg.beta2
        for p, g, m, v in zip(self._params, grads, self._m, self._v):
            m *= b1
            m += (1 - b1) * g
            v *= b2
            v += (1 - b2) * (g * g)
            mhat = m / (1 - b1**self._t)
            vhat = v / (1 - b2**self._t)
            p -= cfg.lr * mhat / (np.sqrt(vhat) + cfg.adam_eps)

    def to_model(self) -> NnModel:
        bn = []
        f32_max = float(np.finfo(np.float32).max)
        if self.cfg.batchnorm:
            for i in range(len(self.cfg.hidden)):
                bn.append(
                    BatchNormStats(
                        self.gamma[i].astype(np.float32),
                        self.beta[i].astype(np.float32),
                        self.run_mean[i].astype(np.float32),
                        np.clip(self.run_var[i], 0.0, f32_max).astype(np.float32),
                    )
                )
        return NnModel(
            weights=[w.astype(np.float32) for w in self.weights],
            biases=[b.astype(np.float32) for b in self.biases],
            bn=bn,
            config=self.cfg,
        )


def nn_train(X: np.ndarray, y: np.ndarray, config: NnConfig = NnConfig()) -> NnModel:
    """Adam on cross-entropy for the configured epoch/batch budget."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be (n, d) with matching labels")
    rng = np.random.default_rng(derive_seed(config.seed, "nn-train"))
    state = _TrainState(X.shape[1], config, rng)
    onehot = np.zeros((X.shape[0], N_CLASSES))
    onehot[np.arange(X.shape[0]), y] = 1.0
    n = X.shape[0]
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            if batch.size < 2 and config.batchnorm:
                continue  # batch statistics are undefined on singletons
            loss, grads = state.forward_backward(X[batch], onehot[batch], rng=rng)
            if not np.isfinite(loss):
                raise DivergedTraining(epoch)
            state.adam_step(grads)
    return state.to_model()


# ---------------------------------------------------------------------------
# Post-training int8 quantization


@dataclass
class QuantizedNnModel:
    kind = "nn_int8"

    q_weights: list[np.ndarray]  # (in, out) int8, symmetric per tensor
    q_biases: list[np.ndarray]  # (out,) int32, scale w_scale * in_scale
    w_scales: np.ndarray  # (layers,) float32
    act_scales: np.ndarray  # (layers + 1,) float32, input tensor first
    act_zps: np.ndarray  # (layers + 1,) int32
    config: NnConfig

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def n_features(self) -> int:
        return int(self.q_weights[0].shape[0])

    def _quantize_input(self, X: np.ndarray) -> np.ndarray:
        q = np.round(X / float(self.act_scales[0])) + int(self.act_zps[0])
        return np.clip(q, -128, 127).astype(np.int32)

    def int8_logits(self, X: np.ndarray) -> np.ndarray:
        """Integer inference; returns dequantized float logits."""
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) features, got {X.shape}")
        q = self._quantize_input(X)
        n_layers = len(self.q_weights)
        for i in range(n_layers):
            centered = (q - int(self.act_zps[i])).astype(np.int64)
            acc = centered @ self.q_weights[i].astype(np.int64) + self.q_biases[i].astype(np.int64)
            acc_scale = float(self.w_scales[i]) * float(self.act_scales[i])
            if i == n_layers - 1:
                return acc.astype(np.float64) * acc_scale
            out_scale = float(self.act_scales[i + 1])
            zp = int(self.act_zps[i + 1])
            q = np.round(acc.astype(np.float64) * (acc_scale / out_scale)) + zp
            q = np.clip(q, -128, 127).astype(np.int32)
            q = np.maximum(q, zp)  # ReLU: real zero sits at the zero point
        raise AssertionError("unreachable")

    def probabilities(self, X: np.ndarray) -> np.ndarray:
        return softmax(self.int8_logits(X))

    def predict(self, v: np.ndarray) -> Prediction:
        p = self.probabilities(np.asarray(v, dtype=np.float64)[None, :])[0]
        return threshold_prediction(p, self.config.confidence_threshold)

    def predict_batch(self, X: np.ndarray) -> list[Prediction]:
        return [threshold_prediction(p, self.config.confidence_threshold)
                for p in self.probabilities(X)]

    def op_count(self) -> int:
        ops = 0
        for w in self.q_weights:
            ops += OP_MAC * w.shape[0] * w.shape[1] + 3 * OP_BASIC * w.shape[1]
        ops += N_CLASSES * (OP_TRANSCENDENTAL + 2)
        return ops

    def footprint(self) -> Footprint:
        flash = tensor_bytes(*self.q_weights, *self.q_biases) + CODE_CONST_BYTES
        flash += self.w_scales.size * 4 + self.act_scales.size * 4 + self.act_zps.size * 4
        widths = [self.q_weights[0].shape[0]] + [w.shape[1] for w in self.q_weights]
        ram = max(widths[i] + widths[i + 1] for i in range(len(widths) - 1))
        ram += 4 * max(widths[1:])  # int32 accumulator row
        return Footprint(flash, ram + 32)

    def params_jsonable(self) -> dict:
        params = {}
        for i, (w, b) in enumerate(zip(self.q_weights, self.q_biases)):
            params[f"qw{i}"] = encode_tensor(w)
            params[f"qb{i}"] = encode_tensor(b)
        params["w_scales"] = encode_tensor(self.w_scales)
        params["act_scales"] = encode_tensor(self.act_scales)
        params["act_zps"] = encode_tensor(self.act_zps)
        return params

    def config_jsonable(self) -> dict:
        return {
            "hidden": list(self.config.hidden),
            "confidence_threshold": self.config.confidence_threshold,
            "batchnorm_folded": True,
        }

    @classmethod
    def from_envelope(cls, obj: dict) -> "QuantizedNnModel":
        tc = obj["training_config"]
        cfg = NnConfig(
            hidden=tuple(tc["hidden"]),
            confidence_threshold=tc["confidence_threshold"],
            seed=obj["seed"],
        )
        params = obj["params"]
        n_layers = len(cfg.hidden) + 1
        return cls(
            q_weights=[decode_tensor(params[f"qw{i}"]) for i in range(n_layers)],
            q_biases=[decode_tensor(params[f"qb{i}"]) for i in range(n_layers)],
            w_scales=decode_tensor(params["w_scales"]),
            act_scales=decode_tensor(params["act_scales"]),
            act_zps=decode_tensor(params["act_zps"]),
            config=cfg,
        )


def fold_batchnorm(model: NnModel) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Dense weights with batch norm folded in; exact at inference time."""
    weights = [w.astype(np.float64).copy() for w in model.weights]
    biases = [b.astype(np.float64).copy() for b in model.biases]
    if model.bn:
        for i, s in enumerate(model.bn):
            inv = s.gamma.astype(np.float64) / np.sqrt(s.var.astype(np.float64) + _BN_EPS)
            weights[i] = weights[i] * inv[None, :]
            biases[i] = (biases[i] - s.mean.astype(np.float64)) * inv + s.beta.astype(np.float64)
    return weights, biases


def quantize_weight(w: np.ndarray) -> tuple[np.ndarray, float]:
    """Symmetric per-tensor int8; scale maps 127 to the max magnitude."""
    peak = float(np.max(np.abs(w)))
    scale = peak / 127.0 if peak > 0 else 1.0
    q = np.clip(np.round(w / scale), -127, 127).astype(np.int8)
    return q, scale


def _affine_range(lo: float, hi: float) -> tuple[float, int]:
    lo = min(lo, 0.0)
    hi = max(hi, 0.0)
    if hi == lo:
        hi = lo + 1e-6
    scale = (hi - lo) / 255.0
    zp = int(np.clip(np.round(-128 - lo / scale), -128, 127))
    return scale, zp


def quantize_nn(model: NnModel, calibration: np.ndarray) -> QuantizedNnModel:
    """Post-training int8 quantization calibrated on scaled feature rows."""
    calibration = np.asarray(calibration, dtype=np.float64)
    if calibration.ndim != 2 or calibration.shape[0] < 100:
        raise ValueError("calibration needs at least 100 feature vectors")
    weights, biases = fold_batchnorm(model)
    # Per-tensor activation ranges from a float pass over the calibration set.
    act_ranges = [(float(calibration.min()), float(calibration.max()))]
    h = calibration
    for i in range(len(weights) - 1):
        h = np.maximum(h @ weights[i] + biases[i], 0.0)
        act_ranges.append((float(h.min()), float(h.max())))
    logits = h @ weights[-1] + biases[-1]
    act_ranges.append((float(logits.min()), float(logits.max())))

    act_scales, act_zps = zip(*(_affine_range(lo, hi) for lo, hi in act_ranges))
    q_weights, w_scales, q_biases = [], [], []
    for i, (w, b) in enumerate(zip(weights, biases)):
        qw, ws = quantize_weight(w)
        q_weights.append(qw)
        w_scales.append(ws)
        q_biases.append(np.round(b / (ws * act_scales[i])).astype(np.int32))
    return QuantizedNnModel(
        q_weights=q_weights,
        q_biases=q_biases,
        w_scales=np.asarray(w_scales, dtype=np.float32),
        act_scales=np.asarray(act_scales, dtype=np.float32),
        act_zps=np.asarray(act_zps, dtype=np.int32),
        config=model.config,
    )
