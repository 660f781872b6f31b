"""Random forest of Gini CART trees on bootstrap resamples.

Each split draws ceil(sqrt(D)) candidate features; thresholds sit at
midpoints between consecutive distinct sorted values.  Classification is the
majority vote over per-tree leaf argmax classes; vote ties fall back to the
larger summed leaf probability, then to the fixed class order.  The vote
fraction is reported as the score so downstream evaluation may apply a
confidence threshold, but the forest itself never emits Uncertain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import GROUND_TRUTH_CLASSES, N_CLASSES
from ..errors import DegenerateLabels, ShapeError
from ..seeds import derive_seed
from .base import (
    CODE_CONST_BYTES,
    OP_TREE_NODE,
    Footprint,
    Prediction,
    decode_tensor,
    encode_tensor,
)

_LEAF = -1


@dataclass(frozen=True)
class RfConfig:
    n_trees: int = 40
    max_depth: int = 7
    bootstrap: bool = True
    n_split_features: int | None = None  # default ceil(sqrt(D))
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1:
            raise ValueError("n_trees and max_depth must be >= 1")


@dataclass
class _Tree:
    """Flat array tree: internal nodes carry (feature, threshold, children);
    leaves carry class-count histograms."""

    feature: np.ndarray  # (n_nodes,) int32, _LEAF for leaves
    threshold: np.ndarray  # (n_nodes,) float32
    left: np.ndarray  # (n_nodes,) int32
    right: np.ndarray  # (n_nodes,) int32
    counts: np.ndarray  # (n_nodes, C) uint32, filled at leaves

    @property
    def n_nodes(self) -> int:
        return int(self.feature.shape[0])

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index for every row."""
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != _LEAF
        while active.any():
            idx = np.nonzero(active)[0]
            f = self.feature[node[idx]]
            go_left = X[idx, f] <= self.threshold[node[idx]]
            node[idx] = np.where(go_left, self.left[node[idx]], self.right[node[idx]])
            active = self.feature[node] != _LEAF
        return node


class _TreeBuilder:
    def __init__(self, X, y, max_depth, n_split_features, rng):
        self.X = X
        self.y = y
        self.max_depth = max_depth
        self.k = n_split_features
        self.rng = rng
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.counts: list[np.ndarray] = []

    def _new_node(self) -> int:
        self.feature.append(_LEAF)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.counts.append(np.zeros(N_CLASSES, dtype=np.uint32))
        return len(self.feature) - 1

    def _best_split(self, rows: np.ndarray):
        """Minimal weighted Gini over sampled features; None if no split."""
        n = rows.shape[0]
        feats = self.rng.choice(self.X.shape[1], size=self.k, replace=False)
        best = None  # (impurity, feature, threshold)
        yr = self.y[rows]
        onehot = np.zeros((n, N_CLASSES))
        onehot[np.arange(n), yr] = 1.0
        for f in np.sort(feats):
            vals = self.X[rows, f]
            order = np.argsort(vals, kind="stable")
            sv = vals[order]
            cum = np.cumsum(onehot[order], axis=0)  # class counts left of each cut
            cut = np.nonzero(sv[1:] > sv[:-1])[0]  # split between i and i+1
            if cut.size == 0:
                continue
            nl = (cut + 1).astype(np.float64)
            nr = n - nl
            cl = cum[cut]
            cr = cum[-1] - cl
            gini_l = 1.0 - ((cl / nl[:, None]) ** 2).sum(axis=1)
            gini_r = 1.0 - ((cr / nr[:, None]) ** 2).sum(axis=1)
            w = (nl * gini_l + nr * gini_r) / n
            j = int(np.argmin(w))
            if best is None or w[j] < best[0] - 1e-15:
                thr = 0.5 * (sv[cut[j]] + sv[cut[j] + 1])
                best = (float(w[j]), int(f), float(thr))
        return best

    def build(self, rows: np.ndarray, depth: int) -> int:
        node = self._new_node()
        yr = self.y[rows]
        hist = np.bincount(yr, minlength=N_CLASSES).astype(np.uint32)
        if depth >= self.max_depth or rows.shape[0] < 2 or np.count_nonzero(hist) == 1:
            self.counts[node] = hist
            return node
        best = self._best_split(rows)
        if best is None:
            self.counts[node] = hist
            return node
        _, f, thr = best
        mask = self.X[rows, f] <= thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self.build(rows[mask], depth + 1)
        self.right[node] = self.build(rows[~mask], depth + 1)
        return node

    def finish(self) -> _Tree:
        return _Tree(
            np.asarray(self.feature, dtype=np.int32),
            np.asarray(self.threshold, dtype=np.float32),
            np.asarray(self.left, dtype=np.int32),
            np.asarray(self.right, dtype=np.int32),
            np.stack(self.counts).astype(np.uint32),
        )


@dataclass
class RfModel:
    kind = "rf"

    trees: list[_Tree]
    config: RfConfig
    n_features: int

    @property
    def seed(self) -> int:
        return self.config.seed

    def _votes(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Per-class vote counts and summed leaf probabilities."""
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.n_features:
            raise ShapeError(f"expected (n, {self.n_features}) features, got {X.shape}")
        votes = np.zeros((X.shape[0], N_CLASSES), dtype=np.int64)
        probs = np.zeros((X.shape[0], N_CLASSES), dtype=np.float64)
        for tree in self.trees:
            leaves = tree.apply(X)
            counts = tree.counts[leaves].astype(np.float64)
            # argmax with ties to the smaller class index
            cls = np.argmax(counts, axis=1)
            votes[np.arange(X.shape[0]), cls] += 1
            probs += counts / np.maximum(counts.sum(axis=1, keepdims=True), 1.0)
        return votes, probs

    def predict_batch(self, X: np.ndarray) -> list[Prediction]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        votes, probs = self._votes(X)
        out = []
        for i in range(X.shape[0]):
            v = votes[i]
            top = int(v.max())
            tied = np.nonzero(v == top)[0]
            if tied.size == 1:
                cls = int(tied[0])
            else:
                p = probs[i, tied]
                cls = int(tied[int(np.argmax(p))])  # argmax keeps class order on ties
            out.append(Prediction(GROUND_TRUTH_CLASSES[cls], top / self.config.n_trees))
        return out

    def predict(self, v: np.ndarray) -> Prediction:
        v = np.asarray(v, dtype=np.float64)
        if v.shape != (self.n_features,):
            raise ShapeError(f"expected vector of dim {self.n_features}, got {v.shape}")
        return self.predict_batch(v[None, :])[0]

    def op_count(self) -> int:
        # Worst-case root-to-leaf walk per tree plus the vote tally.
        return self.config.n_trees * (self.config.max_depth * OP_TREE_NODE + N_CLASSES)

    def footprint(self) -> Footprint:
        flash = CODE_CONST_BYTES
        for t in self.trees:
            internal = int(np.count_nonzero(t.feature != _LEAF))
            leaves = t.n_nodes - internal
            # internal: feature u16 + threshold f32 + child index u16;
            # leaf: marker u16 + per-class counts u16
            flash += internal * 8 + leaves * (2 + 2 * N_CLASSES)
        # Traversal stack frame per depth level plus the vote accumulator.
        ram = self.config.max_depth * 8 + 4 * N_CLASSES + 16
        return Footprint(flash, ram)

    def params_jsonable(self) -> dict:
        return {
            f"tree{i}_{name}": encode_tensor(getattr(t, name))
            for i, t in enumerate(self.trees)
            for name in ("feature", "threshold", "left", "right", "counts")
        }

    def config_jsonable(self) -> dict:
        return {
            "n_trees": self.config.n_trees,
            "max_depth": self.config.max_depth,
            "bootstrap": self.config.bootstrap,
            "n_split_features": self.config.n_split_features,
            "n_features": self.n_features,
        }

    @classmethod
    def from_envelope(cls, obj: dict) -> "RfModel":
        tc = obj["training_config"]
        cfg = RfConfig(
            n_trees=tc["n_trees"],
            max_depth=tc["max_depth"],
            bootstrap=tc["bootstrap"],
            n_split_features=tc["n_split_features"],
            seed=obj["seed"],
        )
        trees = []
        for i in range(cfg.n_trees):
            trees.append(
                _Tree(*(decode_tensor(obj["params"][f"tree{i}_{n}"])
                        for n in ("feature", "threshold", "left", "right", "counts")))
            )
        return cls(trees=trees, config=cfg, n_features=tc["n_features"])


def rf_train(X: np.ndarray, y: np.ndarray, config: RfConfig = RfConfig()) -> RfModel:
    """Fit the forest; bit-reproducible under the config seed."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise ShapeError("X must be (n, d) with matching labels")
    if np.unique(y).size < 2:
        raise DegenerateLabels("training data contains a single class")
    k = config.n_split_features or math.ceil(math.sqrt(X.shape[1]))
    k = min(k, X.shape[1])
    trees = []
    for t in range(config.n_trees):
        rng = np.random.default_rng(derive_seed(config.seed, "tree", t))
        rows = (
            rng.integers(0, X.shape[0], size=X.shape[0])
            if config.bootstrap
            else np.arange(X.shape[0])
        )
        builder = _TreeBuilder(X, y, config.max_depth, k, rng)
        builder.build(np.asarray(rows), 0)
        trees.append(builder.finish())
    return RfModel(trees=trees, config=config, n_features=X.shape[1])
