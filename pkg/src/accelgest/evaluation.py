"""Dataset splitting, confusion-matrix metrics and the comparison report.

The split is stratified 60/20/20 by default with exact global sizes
(largest-remainder rounding per class plus a cross-class fixup).  Augmented
windows never enter the test split: each follows its source window's split
and is dropped outright when the source lands in test.  With
``group_by_user`` every user's windows stay inside one split as a leakage
guard.

Confusion matrices have the three gesture classes as rows (ground truth)
and the three classes plus Uncertain as columns.  Accuracy counts committed
correct predictions over all test windows (an Uncertain outcome is never
correct); precision treats Uncertain as neither true nor false positive;
macro F1 averages over the three gesture classes only.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    GROUND_TRUTH_CLASSES,
    N_CLASSES,
    ORIGIN_AUGMENTED,
    Dataset,
    GestureClass,
    class_index,
)
from .errors import SplitInfeasible
from .features import FeatureSet, Scaler, apply_scaler, extract_matrix
from .models.base import Footprint
from .seeds import derive_seed

CONFUSION_COLUMNS = (*GROUND_TRUTH_CLASSES, GestureClass.UNCERTAIN)
REPORT_COLUMNS = ("model", "accuracy", "f1", "latency_us", "ram_bytes", "flash_bytes")


@dataclass(frozen=True)
class SplitSpec:
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2
    rng_seed: int = 0
    stratified: bool = True
    group_by_user: bool = False

    def __post_init__(self):
        ratios = (self.train, self.val, self.test)
        if any(r <= 0 for r in ratios):
            raise ValueError("every split ratio must be > 0")
        if abs(sum(ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")

    @property
    def ratios(self) -> tuple[float, float, float]:
        return (self.train, self.val, self.test)


_SPLITS = ("train", "val", "test")


def _largest_remainder(n: int, ratios: tuple[float, float, float]) -> list[int]:
    raw = [n * r for r in ratios]
    counts = [int(x) for x in raw]
    rem = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in range(rem):
        counts[order[i]] += 1
    return counts


def _resolve_source(dataset: Dataset, i: int) -> int:
    """Follow augmented-provenance chains back to an original window."""
    seen = set()
    while dataset.provenance[i].origin == ORIGIN_AUGMENTED:
        if i in seen or dataset.provenance[i].source is None:
            raise SplitInfeasible(f"augmented window {i} has a broken source chain")
        seen.add(i)
        i = dataset.provenance[i].source
    return i


def split_indices(dataset: Dataset, spec: SplitSpec) -> dict[str, np.ndarray]:
    """Index arrays for train/val/test plus dropped augmented windows."""
    n = len(dataset)
    if n == 0:
        raise SplitInfeasible("dataset is empty")
    origins = [p.origin for p in dataset.provenance]
    original = [i for i in range(n) if origins[i] != ORIGIN_AUGMENTED]
    augmented = [i for i in range(n) if origins[i] == ORIGIN_AUGMENTED]
    y = dataset.label_indices()

    assign = np.full(n, -1, dtype=np.int64)  # 0/1/2 = train/val/test, -9 dropped
    if spec.group_by_user:
        users = {}
        for i in original:
            u = dataset.provenance[i].user
            if u is None:
                raise SplitInfeasible("group_by_user needs user ids on every original window")
            users.setdefault(u, []).append(i)
        if len(users) < 3:
            raise SplitInfeasible(f"group_by_user needs >= 3 users, got {len(users)}")
        quotas = [len(original) * r for r in spec.ratios]
        filled = [0, 0, 0]
        for u in sorted(users, key=lambda u: (-len(users[u]), u)):
            s = max(range(3), key=lambda k: quotas[k] - filled[k])
            for i in users[u]:
                assign[i] = s
            filled[s] += len(users[u])
    elif spec.stratified:
        counts = np.bincount(y[original], minlength=N_CLASSES)
        if np.any(counts < 10):
            raise SplitInfeasible(
                "stratified split needs >= 10 original windows per class, got "
                + str(counts.tolist())
            )
        global_targets = _largest_remainder(len(original), spec.ratios)
        quotas = [_largest_remainder(int(counts[c]), spec.ratios) for c in range(N_CLASSES)]
        # Cross-class fixup so the global sizes are exact.
        for s in range(3):
            while sum(q[s] for q in quotas) > global_targets[s]:
                deficit = [k for k in range(3) if sum(q[k] for q in quotas) < global_targets[k]]
                donor_cls = max(range(N_CLASSES), key=lambda c: (quotas[c][s], -c))
                quotas[donor_cls][s] -= 1
                quotas[donor_cls][deficit[0]] += 1
        for c in range(N_CLASSES):
            idx = np.array([i for i in original if y[i] == c], dtype=np.int64)
            rng = np.random.default_rng(derive_seed(spec.rng_seed, "split", c))
            rng.shuffle(idx)
            lo = 0
            for s in range(3):
                assign[idx[lo : lo + quotas[c][s]]] = s
                lo += quotas[c][s]
    else:
        idx = np.asarray(original, dtype=np.int64)
        rng = np.random.default_rng(derive_seed(spec.rng_seed, "split"))
        rng.shuffle(idx)
        quota = _largest_remainder(len(original), spec.ratios)
        lo = 0
        for s in range(3):
            assign[idx[lo : lo + quota[s]]] = s
            lo += quota[s]

    # Augmented windows follow their source; sources in test drop the copy.
    for i in augmented:
        src = _resolve_source(dataset, i)
        assign[i] = assign[src] if assign[src] in (0, 1) else -9
    out = {name: np.nonzero(assign == s)[0] for s, name in enumerate(_SPLITS)}
    out["dropped"] = np.nonzero(assign == -9)[0]
    return out


def split(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    """Disjoint train/val/test datasets (dropped augmented windows are
    excluded from all three)."""
    idx = split_indices(dataset, spec)
    return (
        dataset.subset(idx["train"]),
        dataset.subset(idx["val"]),
        dataset.subset(idx["test"]),
    )


def metrics_from_confusion(confusion: np.ndarray) -> dict:
    """Exact metrics from a (classes x classes+uncertain) count matrix."""
    conf = np.asarray(confusion, dtype=np.int64)
    if conf.shape != (N_CLASSES, N_CLASSES + 1):
        raise ValueError(f"confusion must be {N_CLASSES}x{N_CLASSES + 1}, got {conf.shape}")
    supports = conf.sum(axis=1)
    total = int(conf.sum())
    correct = int(np.trace(conf[:, :N_CLASSES]))
    committed = conf[:, :N_CLASSES].sum(axis=0)
    recall = np.zeros(N_CLASSES)
    precision = np.zeros(N_CLASSES)
    f1 = np.zeros(N_CLASSES)
    for c in range(N_CLASSES):
        tp = conf[c, c]
        recall[c] = tp / supports[c] if supports[c] else 0.0
        precision[c] = tp / committed[c] if committed[c] else 0.0
        denom = precision[c] + recall[c]
        f1[c] = 2 * precision[c] * recall[c] / denom if denom > 0 else 0.0
    return {
        "accuracy": correct / total if total else 0.0,
        "recall": recall,
        "precision": precision,
        "f1": f1,
        "macro_f1": float(f1.mean()),
        "supports": supports,
        "total": total,
        "uncertain": int(conf[:, N_CLASSES].sum()),
    }


@dataclass
class EvalReport:
    model_kind: str
    confusion: np.ndarray  # (3, 4) int64
    accuracy: float
    precision: np.ndarray
    recall: np.ndarray
    f1: np.ndarray
    macro_f1: float
    supports: np.ndarray
    footprint: Footprint | None = None
    latency: dict | None = None  # filled by profiling when available

    def to_jsonable(self) -> dict:
        out = {
            "model_kind": self.model_kind,
            "confusion": {
                "rows": [c.value for c in GROUND_TRUTH_CLASSES],
                "columns": [c.value for c in CONFUSION_COLUMNS],
                "counts": self.confusion.tolist(),
            },
            "accuracy": self.accuracy,
            "precision": self.precision.tolist(),
            "recall": self.recall.tolist(),
            "f1": self.f1.tolist(),
            "macro_f1": self.macro_f1,
            "supports": self.supports.tolist(),
        }
        if self.footprint is not None:
            out["footprint"] = self.footprint.to_jsonable()
        if self.latency is not None:
            out["latency"] = self.latency
        return out


def confusion_from_predictions(true_labels, predictions) -> np.ndarray:
    conf = np.zeros((N_CLASSES, N_CLASSES + 1), dtype=np.int64)
    cols = {c: j for j, c in enumerate(CONFUSION_COLUMNS)}
    for t, p in zip(true_labels, predictions):
        conf[class_index(t), cols[p.label]] += 1
    return conf


def evaluate(model, windows, feature_set: FeatureSet, scaler: Scaler) -> EvalReport:
    """Score a model over labeled windows."""
    windows = list(windows)
    if not windows:
        raise ValueError("no windows to evaluate")
    X = apply_scaler(scaler, extract_matrix(windows, feature_set))
    preds = model.predict_batch(X)
    conf = confusion_from_predictions((w.label for w in windows), preds)
    m = metrics_from_confusion(conf)
    return EvalReport(
        model_kind=model.kind,
        confusion=conf,
        accuracy=m["accuracy"],
        precision=m["precision"],
        recall=m["recall"],
        f1=m["f1"],
        macro_f1=m["macro_f1"],
        supports=m["supports"],
        footprint=model.footprint(),
    )


def report_rows(named_reports: list[tuple[str, EvalReport]]) -> list[dict]:
    """Comparison-table rows; latency in microseconds when profiled."""
    rows = []
    for name, rep in named_reports:
        lat = rep.latency or {}
        inference = lat.get("inference", {})
        rows.append(
            {
                "model": name,
                "accuracy": rep.accuracy,
                "f1": rep.macro_f1,
                "latency_us": inference.get("mean_us"),
                "ram_bytes": rep.footprint.ram_bytes if rep.footprint else None,
                "flash_bytes": rep.footprint.flash_bytes if rep.footprint else None,
            }
        )
    return rows


def render_report_csv(rows: list[dict]) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in rows:
        lines.append(",".join("" if row[c] is None else str(row[c]) for c in REPORT_COLUMNS))
    return "\n".join(lines) + "\n"


def render_report_text(rows: list[dict]) -> str:
    headers = list(REPORT_COLUMNS)
    table = [headers]
    for row in rows:
        table.append(
            [
                str(row["model"]),
                f"{row['accuracy']:.4f}",
                f"{row['f1']:.4f}",
                "-" if row["latency_us"] is None else f"{row['latency_us']:.1f}",
                str(row["ram_bytes"]),
                str(row["flash_bytes"]),
            ]
        )
    widths = [max(len(r[i]) for r in table) for i in range(len(headers))]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip() for r in table]
    return "\n".join(lines) + "\n"
