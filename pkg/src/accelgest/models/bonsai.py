"""Shallow decision tree in a learned low-dimensional projection.

The input is linearly projected to d_hat dimensions; every tree node owns a
pair of class predictors whose product (linear times tanh gate) is summed
along the root-to-leaf path.  Training uses soft path indicators (sigmoids
of the branching functions) so the whole structure is differentiable under
mini-batch gradient descent on a multiclass hinge loss; the indicator
steepness is annealed to effectively hard over the first 60% of epochs.
Inference walks the hard path, visiting exactly ``depth`` nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..core import GROUND_TRUTH_CLASSES, N_CLASSES
from ..errors import DivergedTraining, ShapeError
from ..seeds import derive_seed
from .base import (
    CODE_CONST_BYTES,
    OP_MAC,
    OP_TRANSCENDENTAL,
    Footprint,
    Prediction,
    decode_tensor,
    encode_tensor,
    softmax,
    tensor_bytes,
)


@dataclass(frozen=True)
class BonsaiConfig:
    proj_dim: int = 13
    depth: int = 4
    sigma: float = 0.3
    epochs: int = 500
    batch_size: int = 32
    lr: float = 0.01
    anneal_frac: float = 0.6
    steepness_max: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.proj_dim < 1 or self.depth < 1:
            raise ValueError("proj_dim and depth must be >= 1")
        if not 0 < self.anneal_frac <= 1:
            raise ValueError("anneal_frac must be in (0, 1]")

    @property
    def n_nodes(self) -> int:
        return 2**self.depth - 1

    @property
    def n_internal(self) -> int:
        return 2 ** (self.depth - 1) - 1


def _sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    e = np.exp(x[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def _soft_indicators(zhat, theta, s, n_nodes, n_internal):
    """Multiplicative soft path weights over all nodes, plus the per-node
    sigmoid gates needed for backprop."""
    b = zhat @ theta.T if n_internal else np.zeros((zhat.shape[0], 0))
    ind = np.zeros((zhat.shape[0], n_nodes))
    ind[:, 0] = 1.0
    gates = np.zeros_like(b)
    for k in range(n_internal):
        g = _sigmoid(s * b[:, k])
        gates[:, k] = g
        ind[:, 2 * k + 1] = ind[:, k] * g
        ind[:, 2 * k + 2] = ind[:, k] * (1.0 - g)
    return ind, gates, b


def forward_scores(Z, theta, W, V, X, sigma, s):
    """Soft-path class scores for a batch; returns intermediates for backprop."""
    zhat = X @ Z.T
    ind, gates, b = _soft_indicators(zhat, theta, s, W.shape[0], theta.shape[0])
    Wz = np.einsum("kcd,bd->bkc", W, zhat)
    Vz = np.einsum("kcd,bd->bkc", V, zhat)
    T = np.tanh(sigma * Vz)
    P = Wz * T
    scores = np.einsum("bk,bkc->bc", ind, P)
    return scores, (zhat, ind, gates, Wz, Vz, T, P)


def loss_and_grads(Z, theta, W, V, X, y, sigma, s):
    """Mean multiclass hinge loss and analytic gradients for all parameters."""
    n = X.shape[0]
    scores, (zhat, ind, gates, Wz, Vz, T, P) = forward_scores(Z, theta, W, V, X, sigma, s)
    rows = np.arange(n)
    true_scores = scores[rows, y]
    masked = scores.copy()
    masked[rows, y] = -np.inf
    top_wrong = np.argmax(masked, axis=1)
    margins = 1.0 - true_scores + masked[rows, top_wrong]
    violated = margins > 0
    loss = float(np.mean(np.maximum(margins, 0.0)))
    if not np.isfinite(loss):
        # caller raises DivergedTraining; skip backprop through non-finite state
        zeros = {k: np.zeros_like(v) for k, v in (("Z", Z), ("theta", theta), ("W", W), ("V", V))}
        return loss, zeros

    d_scores = np.zeros_like(scores)
    d_scores[rows[violated], y[violated]] = -1.0 / n
    d_scores[rows[violated], top_wrong[violated]] += 1.0 / n

    dP = ind[:, :, None] * d_scores[:, None, :]
    dI = np.einsum("bkc,bc->bk", P, d_scores)
    dWz = dP * T
    dT = dP * Wz
    dVz = dT * sigma * (1.0 - T * T)
    dW = np.einsum("bkc,bd->kcd", dWz, zhat)
    dV = np.einsum("bkc,bd->kcd", dVz, zhat)
    d_zhat = np.einsum("bkc,kcd->bd", dWz, W) + np.einsum("bkc,kcd->bd", dVz, V)

    n_internal = theta.shape[0]
    d_theta = np.zeros_like(theta)
    dI = dI.copy()
    # children before parents so accumulated indicator gradients flow up
    for k in range(n_internal - 1, -1, -1):
        g = gates[:, k]
        dl, dr = dI[:, 2 * k + 1], dI[:, 2 * k + 2]
        dI[:, k] += dl * g + dr * (1.0 - g)
        db = (dl - dr) * ind[:, k] * g * (1.0 - g) * s
        d_theta[k] = db @ zhat
        d_zhat += np.outer(db, theta[k])
    dZ = d_zhat.T @ X
    return loss, {"Z": dZ, "theta": d_theta, "W": dW, "V": dV}


@dataclass
class BonsaiModel:
    kind = "bonsai"

    Z: np.ndarray  # (d_hat, D) float32
    theta: np.ndarray  # (n_internal, d_hat) float32
    W: np.ndarray  # (n_nodes, C, d_hat) float32
    V: np.ndarray  # (n_nodes, C, d_hat) float32
    config: BonsaiConfig

    @property
    def seed(self) -> int:
        return self.config.seed

    @property
    def n_features(self) -> int:
        return int(self.Z.shape[1])

    def hard_path(self, zhat: np.ndarray) -> list[int]:
        """Node indices visited by hard routing; length equals tree depth."""
        theta = self.theta.astype(np.float64)
        path = [0]
        k = 0
        while k < self.config.n_internal:
            k = 2 * k + 1 if float(zhat @ theta[k]) > 0 else 2 * k + 2
            path.append(k)
        return path

    def scores(self, v: np.ndarray) -> np.ndarray:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_features,):
            raise ShapeError(f"expected vector of dim {self.n_features}, got {v.shape}")
        zhat = self.Z.astype(np.float64) @ v
        out = np.zeros(N_CLASSES)
        for k in self.hard_path(zhat):
            wz = self.W[k].astype(np.float64) @ zhat
            vz = self.V[k].astype(np.float64) @ zhat
            out += wz * np.tanh(self.config.sigma * vz)
        return out

    def predict(self, v: np.ndarray) -> Prediction:
        p = softmax(self.scores(v))
        order = np.argsort(p)[::-1]
        margin = float(p[order[0]] - p[order[1]]) if p.size > 1 else float(p[order[0]])
        return Prediction(GROUND_TRUTH_CLASSES[int(np.argmax(p))], margin)

    def predict_batch(self, X: np.ndarray) -> list[Prediction]:
        return [self.predict(x) for x in np.asarray(X, dtype=np.float64)]

    def op_count(self) -> int:
        d_hat, d = self.Z.shape
        per_node = OP_MAC * d_hat * (2 * N_CLASSES + 1) + N_CLASSES * (OP_TRANSCENDENTAL + 2)
        softmax_ops = N_CLASSES * (OP_TRANSCENDENTAL + 2)
        return OP_MAC * d_hat * d + self.config.depth * per_node + softmax_ops

    def footprint(self) -> Footprint:
        flash = tensor_bytes(self.Z, self.theta, self.W, self.V) + CODE_CONST_BYTES
        ram = 4 * self.Z.shape[0] + 2 * 4 * N_CLASSES + 32
        return Footprint(flash, ram)

    def params_jsonable(self) -> dict:
        return {name: encode_tensor(getattr(self, name)) for name in ("Z", "theta", "W", "V")}

    def config_jsonable(self) -> dict:
        c = self.config
        return {
            "proj_dim": c.proj_dim,
            "depth": c.depth,
            "sigma": c.sigma,
            "epochs": c.epochs,
            "batch_size": c.batch_size,
            "lr": c.lr,
            "anneal_frac": c.anneal_frac,
            "steepness_max": c.steepness_max,
        }

    @classmethod
    def from_envelope(cls, obj: dict) -> "BonsaiModel":
        tc = obj["training_config"]
        cfg = BonsaiConfig(seed=obj["seed"], **tc)
        return cls(
            Z=decode_tensor(obj["params"]["Z"]),
            theta=decode_tensor(obj["params"]["theta"]),
            W=decode_tensor(obj["params"]["W"]),
            V=decode_tensor(obj["params"]["V"]),
            config=cfg,
        )


def bonsai_train(X: np.ndarray, y: np.ndarray, config: BonsaiConfig = BonsaiConfig()) -> BonsaiModel:
    """Mini-batch gradient descent on the soft-path hinge objective."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be (n, d) with matching labels")
    if X.shape[1] < config.proj_dim:
        raise ValueError(f"need >= {config.proj_dim} input features, got {X.shape[1]}")
    rng = np.random.default_rng(derive_seed(config.seed, "bonsai-init"))
    d = X.shape[1]
    Z = rng.normal(0.0, 1.0 / np.sqrt(d), size=(config.proj_dim, d))
    theta = rng.normal(0.0, 1.0, size=(config.n_internal, config.proj_dim))
    W = rng.normal(0.0, 0.3, size=(config.n_nodes, N_CLASSES, config.proj_dim))
    V = rng.normal(0.0, 0.3, size=(config.n_nodes, N_CLASSES, config.proj_dim))
    n = X.shape[0]
    anneal_epochs = max(1, int(config.anneal_frac * config.epochs))
    for epoch in range(config.epochs):
        s = 1.0 + (config.steepness_max - 1.0) * min(1.0, epoch / anneal_epochs)
        order = rng.permutation(n)
        for lo in range(0, n, config.batch_size):
            batch = order[lo : lo + config.batch_size]
            loss, grads = loss_and_grads(Z, theta, W, V, X[batch], y[batch], config.sigma, s)
            if not np.isfinite(loss):
                raise DivergedTraining(epoch)
            Z -= config.lr * grads["Z"]
            theta -= config.lr * grads["theta"]
            W -= config.lr * grads["W"]
            V -= config.lr * grads["V"]
    return BonsaiModel(
        Z=Z.astype(np.float32),
        theta=theta.astype(np.float32),
        W=W.astype(np.float32),
        V=V.astype(np.float32),
        config=config,
    )
