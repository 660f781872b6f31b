"""File formats: recording/dataset CSV, provenance and annotation sidecars.

Recording CSV: header ``t,ax,ay,az[,label]``, one row per sample, ``t`` a
monotone sample index.  The optional label column marks annotation spans as
runs of equal non-empty values (``O|X|RANDOM``); empty means rest.
Annotations may instead come from a sidecar JSON list of
``{"start", "end", "class"}`` objects, which takes precedence.

Dataset CSV: the same sample format with windows stored back to back (window
i occupies rows [i*L, (i+1)*L)) and the window label repeated on its rows.
A provenance JSON sidecar records window length, rate and per-window origin
metadata; it is required to read a dataset back.

Floats are written with ``repr`` so read/write round-trips are byte-exact.
"""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .core import (
    Annotation,
    Dataset,
    GestureClass,
    Provenance,
    Recording,
    Window,
)

DATASET_SCHEMA = "accelgest.dataset/1"
MANIFEST_SCHEMA = "accelgest.manifest/1"


def _format_row(t: int, row, label: str) -> list[str]:
    return [str(t), repr(float(row[0])), repr(float(row[1])), repr(float(row[2])), label]


def write_recording_csv(recording: Recording, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ax", "ay", "az", "label"])
        labels = [""] * len(recording)
        for a in recording.annotations:
            for i in range(a.start, a.end):
                labels[i] = a.label.value
        for t, row in enumerate(recording.data):
            w.writerow(_format_row(t, row, labels[t]))


def _annotations_from_labels(labels: list[str]) -> tuple[Annotation, ...]:
    spans = []
    start = None
    current = ""
    for i, lab in enumerate([*labels, ""]):  # sentinel closes the last run
        if lab != current:
            if current:
                spans.append(Annotation(start, i, GestureClass(current)))
            start = i
            current = lab
    return tuple(spans)


def read_recording_csv(path, annotations_path=None, rate_hz: float = 25.0) -> Recording:
    rows = []
    labels = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[:4] != ["t", "ax", "ay", "az"]:
            raise ValueError(f"unexpected recording CSV header {header}")
        has_label = len(header) > 4 and header[4] == "label"
        for rec in reader:
            rows.append([float(rec[1]), float(rec[2]), float(rec[3])])
            labels.append(rec[4] if has_label and len(rec) > 4 else "")
    data = np.asarray(rows, dtype=np.float64)
    if annotations_path is not None:
        items = json.loads(Path(annotations_path).read_text())
        annotations = tuple(
            Annotation(int(it["start"]), int(it["end"]), GestureClass(it["class"]))
            for it in items
        )
    else:
        annotations = _annotations_from_labels(labels)
    return Recording(data, annotations, rate_hz)


def write_annotations_json(annotations, path) -> None:
    items = [{"start": a.start, "end": a.end, "class": a.label.value} for a in annotations]
    Path(path).write_text(json.dumps(items, indent=2) + "\n")


def write_dataset(dataset: Dataset, csv_path, provenance_path) -> None:
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "ax", "ay", "az", "label"])
        t = 0
        for window in dataset.windows:
            for row in window.data:
                w.writerow(_format_row(t, row, window.label.value))
                t += 1
    meta = {
        "schema": DATASET_SCHEMA,
        "window_len": dataset.window_len,
        "rate_hz": dataset.rate_hz,
        "windows": [
            {
                "start": w.start,
                "label": w.label.value,
                "origin": p.origin,
                "seed": p.seed,
                "user": p.user,
                "source": p.source,
            }
            for w, p in zip(dataset.windows, dataset.provenance)
        ],
    }
    Path(provenance_path).write_text(json.dumps(meta, sort_keys=True) + "\n")


def read_dataset(csv_path, provenance_path) -> Dataset:
    meta = json.loads(Path(provenance_path).read_text())
    if meta.get("schema") != DATASET_SCHEMA:
        raise ValueError(f"not a dataset provenance file: {provenance_path}")
    length = int(meta["window_len"])
    rate = float(meta["rate_hz"])
    rows = []
    with open(csv_path, newline="") as fh:
        reader = csv.reader(fh)
        next(reader)
        for rec in reader:
            rows.append([float(rec[1]), float(rec[2]), float(rec[3])])
    data = np.asarray(rows, dtype=np.float64)
    if data.shape[0] != length * len(meta["windows"]):
        raise ValueError("dataset CSV row count does not match provenance window count")
    windows, provenance = [], []
    for i, rec in enumerate(meta["windows"]):
        chunk = data[i * length : (i + 1) * length]
        windows.append(
            Window(chunk, start=int(rec["start"]), rate_hz=rate, label=GestureClass(rec["label"]))
        )
        provenance.append(
            Provenance(
                origin=rec["origin"],
                seed=rec["seed"],
                user=rec["user"],
                source=rec["source"],
            )
        )
    return Dataset(windows, provenance)


def write_feature_csv(X: np.ndarray, names: list[str], path, labels=None) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        header = list(names) + (["label"] if labels is not None else [])
        w.writerow(header)
        for i, row in enumerate(np.asarray(X)):
            out = [repr(float(v)) for v in row]
            if labels is not None:
                out.append(labels[i].value if isinstance(labels[i], GestureClass) else str(labels[i]))
            w.writerow(out)


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(dumps_canonical(config).encode()).hexdigest()


def write_manifest(path, command: str, config: dict, seeds: dict, outputs: list[str]) -> dict:
    """Reproducibility manifest: config, its hash, seeds and produced files.
    Deliberately carries no timestamps so identical runs write identical
    manifests."""
    from . import __version__

    manifest = {
        "schema": MANIFEST_SCHEMA,
        "version": __version__,
        "command": command,
        "config": config,
        "config_hash": config_hash(config),
        "seeds": seeds,
        "outputs": sorted(outputs),
    }
    Path(path).write_text(dumps_canonical(manifest) + "\n")
    return manifest
