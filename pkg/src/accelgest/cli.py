"""Command-line pipeline driver.

One executable, batch subcommands: generate, ingest, augment, extract,
train, evaluate, automl, profile, export, report.  Every stochastic step
derives its stream from the run's ``--seed`` (printed and recorded), all
artifacts land in the ``-o`` directory together with a manifest holding the
resolved config, its hash and the seeds.  Manifests carry no timestamps, so
two runs with identical configs produce byte-identical artifacts.

Exit codes: 0 success, 1 runtime error (single-line cause on stderr),
2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .augment import AugmentSpec, balance_classes
from .automl import CandidatePool, SearchConfig, evolve, feature_frequency
from .core import (
    GROUND_TRUTH_CLASSES,
    ORIGIN_INGESTED,
    Dataset,
    Provenance,
    extract_annotated,
    segment_stream,
)
from .dataio import (
    dumps_canonical,
    read_dataset,
    read_recording_csv,
    write_dataset,
    write_feature_csv,
    write_manifest,
)
from .errors import PipelineError
from .evaluation import (
    CONFUSION_COLUMNS,
    EvalReport,
    SplitSpec,
    evaluate,
    metrics_from_confusion,
    render_report_csv,
    render_report_text,
    report_rows,
    split_indices,
)
from .features import (
    FeatureSet,
    apply_scaler,
    default_feature_set,
    extract_matrix,
    fit_scaler,
    full_feature_pool,
)
from .models import (
    BonsaiConfig,
    Footprint,
    ModelArtifact,
    NnConfig,
    PmeConfig,
    RfConfig,
    TRAINERS,
    load_artifact,
    quantize_nn,
)
from .profiling import profile_latency
from .seeds import derive_seed
from .synth import SynthParams, synth_dataset

DATA_CSV = "data.csv"
PROVENANCE_JSON = "provenance.json"


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load_dataset(data_dir: str) -> Dataset:
    d = Path(data_dir)
    return read_dataset(d / DATA_CSV, d / PROVENANCE_JSON)


def _resolve_features(spec: str) -> FeatureSet:
    if spec == "default20":
        return default_feature_set()
    if spec == "pool30":
        return full_feature_pool()
    return FeatureSet.from_jsonable(json.loads(Path(spec).read_text()))


def _write_json(path: Path, obj) -> None:
    path.write_text(dumps_canonical(obj) + "\n")


def _config_dict(args, keys) -> dict:
    return {k: getattr(args, k) for k in keys}


def _parse_config_file(path: str) -> dict:
    """Flat ``key = value`` config format; '#' starts a comment."""
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"bad config line: {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        out[key.replace("-", "_")] = _parse_scalar(value)
    return out


def _parse_scalar(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _write_config_file(path: Path, config: dict) -> None:
    lines = [f"{k} = {v}" for k, v in sorted(config.items()) if v is not None]
    path.write_text("\n".join(lines) + "\n")


def _apply_config_file(args, parser_defaults: dict) -> None:
    """File values fill in any arg still at its parser default."""
    if not getattr(args, "config", None):
        return
    file_cfg = _parse_config_file(args.config)
    for key, value in file_cfg.items():
        if key in parser_defaults and getattr(args, key) == parser_defaults[key]:
            setattr(args, key, value)


# ---------------------------------------------------------------------------
# handlers


def cmd_generate(args) -> dict:
    out = _outdir(args)
    params = SynthParams(
        amplitude_g=args.amplitude,
        noise_std_g=args.noise,
        speed_jitter=args.speed_jitter,
        rng_seed=args.seed,
    )
    ds = synth_dataset(args.per_class, args.users, params)
    write_dataset(ds, out / DATA_CSV, out / PROVENANCE_JSON)
    config = _config_dict(args, ["per_class", "users", "seed", "amplitude", "noise", "speed_jitter"])
    _write_config_file(out / "config.cfg", config)
    write_manifest(
        out / "manifest.json",
        "generate",
        config,
        {"root": args.seed},
        [DATA_CSV, PROVENANCE_JSON, "config.cfg"],
    )
    return {
        "windows": len(ds),
        "per_class": {c.value: n for c, n in ds.class_counts().items()},
        "out": str(out),
        "seed": args.seed,
    }


def cmd_ingest(args) -> dict:
    out = _outdir(args)
    recording = read_recording_csv(args.recording, args.annotations)
    if args.mode == "stream":
        windows = segment_stream(recording, args.window_len, args.stride)
    else:
        windows = extract_annotated(recording, args.window_len)
    provenance = [Provenance(ORIGIN_INGESTED, user=args.user) for _ in windows]
    ds = Dataset(windows, provenance)
    write_dataset(ds, out / DATA_CSV, out / PROVENANCE_JSON)
    config = _config_dict(args, ["recording", "annotations", "mode", "window_len", "stride", "user"])
    write_manifest(out / "manifest.json", "ingest", config, {}, [DATA_CSV, PROVENANCE_JSON])
    return {
        "windows": len(ds),
        "per_class": {c.value: n for c, n in ds.class_counts().items()},
        "out": str(out),
    }


def cmd_augment(args) -> dict:
    out = _outdir(args)
    ds = _load_dataset(args.data)
    spec = AugmentSpec(rng_seed=derive_seed(args.seed, "augment"))
    balanced = balance_classes(ds, spec)
    write_dataset(balanced, out / DATA_CSV, out / PROVENANCE_JSON)
    config = _config_dict(args, ["data", "seed"])
    write_manifest(out / "manifest.json", "augment", config, {"root": args.seed,
                   "augment": spec.rng_seed}, [DATA_CSV, PROVENANCE_JSON])
    return {
        "windows_in": len(ds),
        "windows_out": len(balanced),
        "per_class": {c.value: n for c, n in balanced.class_counts().items()},
        "out": str(out),
    }


def cmd_extract(args) -> dict:
    out = _outdir(args)
    ds = _load_dataset(args.data)
    fs = _resolve_features(args.features)
    X = extract_matrix(ds.windows, fs)
    write_feature_csv(X, fs.names, out / "features.csv", labels=ds.labels())
    _write_json(out / "feature_set.json", fs.to_jsonable())
    config = _config_dict(args, ["data", "features"])
    write_manifest(out / "manifest.json", "extract", config, {},
                   ["features.csv", "feature_set.json"])
    return {"windows": X.shape[0], "features": X.shape[1], "out": str(out)}


def _model_config(args, seed: int):
    kind = args.model
    if kind == "pme":
        return PmeConfig(aif_min=args.aif_min, aif_max=args.aif_max,
                         max_neurons=args.max_neurons, seed=seed)
    if kind == "rf":
        return RfConfig(n_trees=args.n_trees, max_depth=args.max_depth, seed=seed)
    if kind == "bonsai":
        return BonsaiConfig(proj_dim=args.proj_dim, depth=args.depth, sigma=args.sigma,
                            epochs=args.epochs or 500, lr=args.lr or 0.01, seed=seed)
    if kind == "nn":
        return NnConfig(lr=args.lr or 0.0015, dropout=args.dropout,
                        epochs=args.epochs or 10,
                        confidence_threshold=args.threshold, seed=seed)
    raise PipelineError(f"unknown model kind {kind!r}")


def cmd_train(args) -> dict:
    out = _outdir(args)
    ds = _load_dataset(args.data)
    fs = _resolve_features(args.features)
    split_seed = derive_seed(args.seed, "split")
    spec = SplitSpec(rng_seed=split_seed, group_by_user=args.group_by_user)
    idx = split_indices(ds, spec)
    _write_json(out / "split.json", {k: v.tolist() for k, v in idx.items()})
    train_ds = ds.subset(idx["train"])
    val_ds = ds.subset(idx["val"])
    test_ds = ds.subset(idx["test"])
    if args.balance:
        train_ds = balance_classes(train_ds, AugmentSpec(rng_seed=derive_seed(args.seed, "balance-train")))
        val_ds = balance_classes(val_ds, AugmentSpec(rng_seed=derive_seed(args.seed, "balance-val")))
    X_train = extract_matrix(train_ds.windows, fs)
    scaler = fit_scaler(X_train)
    train_seed = derive_seed(args.seed, "train", args.model)
    trainer, _cfg_cls = TRAINERS[args.model]
    model = trainer(apply_scaler(scaler, X_train), train_ds.label_indices(),
                    _model_config(args, train_seed))
    artifact = ModelArtifact(model, fs, scaler)
    artifact.save(out / "model.json")
    val_report = evaluate(model, val_ds.windows, fs, scaler)
    test_report = evaluate(model, test_ds.windows, fs, scaler)
    _write_json(out / "eval_val.json", val_report.to_jsonable())
    _write_json(out / "eval_test.json", test_report.to_jsonable())
    config_keys = ["data", "model", "features", "seed", "balance", "group_by_user",
                   "epochs", "lr", "dropout", "threshold", "n_trees", "max_depth",
                   "aif_min", "aif_max", "max_neurons", "proj_dim", "depth", "sigma"]
    config = _config_dict(args, config_keys)
    _write_config_file(out / "config.cfg", config)
    write_manifest(
        out / "manifest.json",
        "train",
        config,
        {"root": args.seed, "split": split_seed, "train": train_seed},
        ["model.json", "split.json", "eval_val.json", "eval_test.json", "config.cfg"],
    )
    return {
        "model": args.model,
        "train_windows": len(train_ds),
        "val_accuracy": val_report.accuracy,
        "test_accuracy": test_report.accuracy,
        "test_macro_f1": test_report.macro_f1,
        "out": str(out),
        "seed": args.seed,
    }


def _confusion_csv(report: EvalReport) -> str:
    lines = ["true\\pred," + ",".join(c.value for c in CONFUSION_COLUMNS)]
    for i, c in enumerate(GROUND_TRUTH_CLASSES):
        lines.append(c.value + "," + ",".join(str(int(v)) for v in report.confusion[i]))
    return "\n".join(lines) + "\n"


def cmd_evaluate(args) -> dict:
    out = _outdir(args)
    artifact = load_artifact(args.model)
    ds = _load_dataset(args.data)
    windows = ds.windows
    if args.split:
        idx = json.loads(Path(args.split).read_text())[args.subset]
        windows = [ds.windows[i] for i in idx]
    report = evaluate(artifact.model, windows, artifact.feature_set, artifact.scaler)
    _write_json(out / "eval.json", report.to_jsonable())
    (out / "confusion.csv").write_text(_confusion_csv(report))
    config = _config_dict(args, ["model", "data", "split", "subset"])
    write_manifest(out / "manifest.json", "evaluate", config, {}, ["eval.json", "confusion.csv"])
    return {
        "model_kind": report.model_kind,
        "windows": len(windows),
        "accuracy": report.accuracy,
        "macro_f1": report.macro_f1,
        "out": str(out),
    }


def cmd_automl(args) -> dict:
    out = _outdir(args)
    ds = _load_dataset(args.data)
    pool = (
        CandidatePool.from_feature_set(default_feature_set())
        if args.pool == "default20"
        else CandidatePool.default()
    )
    spec = SplitSpec(rng_seed=derive_seed(args.seed, "split"))
    idx = split_indices(ds, spec)
    train_ds = ds.subset(idx["train"])
    val_ds = ds.subset(idx["val"])
    fs = FeatureSet(tuple(e for e in pool.entries))
    X_train = extract_matrix(train_ds.windows, fs)
    X_val = extract_matrix(val_ds.windows, fs)
    y_train = train_ds.label_indices()
    y_val = val_ds.label_indices()
    runs = []
    outputs = []
    for r in range(args.runs):
        cfg = SearchConfig(
            population=args.population,
            generations=args.generations,
            rng_seed=derive_seed(args.seed, "run", r),
        )
        result = evolve(cfg, pool, X_train, y_train, X_val, y_val, max_workers=args.threads)
        log_name = f"runlog_{r}.jsonl"
        result.write_log(out / log_name)
        outputs.append(log_name)
        runs.append(result.ranked)
    freq = feature_frequency(runs, args.top_n, pool)
    lines = ["feature,count"]
    lines += [f"{name},{count}" for name, count in freq]
    (out / "consensus.csv").write_text("\n".join(lines) + "\n")
    ranked_payload = [
        {
            "run": r,
            "top": [
                {**p.to_jsonable(pool), "scalar": s.scalar, "accuracy": s.accuracy}
                for p, s in ranked[: args.top_n]
            ],
        }
        for r, ranked in enumerate(runs)
    ]
    _write_json(out / "ranked.json", ranked_payload)
    config = _config_dict(args, ["data", "pool", "population", "generations", "runs", "top_n", "seed"])
    write_manifest(out / "manifest.json", "automl", config, {"root": args.seed},
                   outputs + ["consensus.csv", "ranked.json"])
    best = runs[0][0]
    return {
        "runs": args.runs,
        "best_kind": best[0].kind,
        "best_scalar": best[1].scalar,
        "best_accuracy": best[1].accuracy,
        "consensus_top5": [name for name, _ in freq[:5]],
        "out": str(out),
    }


def cmd_profile(args) -> dict:
    out = _outdir(args)
    artifact = load_artifact(args.model)
    ds = _load_dataset(args.data)
    windows = ds.windows[: args.limit] if args.limit else ds.windows
    stats = profile_latency(
        artifact.model, windows, artifact.feature_set, artifact.scaler, reps=args.reps
    )
    payload = {
        "model_kind": artifact.model.kind,
        "full": stats["full"].to_jsonable(),
        "inference": stats["inference"].to_jsonable(),
        "baseline_us": stats["baseline_us"],
        "op_count": stats["op_count"],
        "footprint": artifact.model.footprint().to_jsonable(),
    }
    _write_json(out / "latency.json", payload)
    config = _config_dict(args, ["model", "data", "reps", "limit"])
    write_manifest(out / "manifest.json", "profile", config, {}, ["latency.json"])
    return payload


def cmd_export(args) -> dict:
    out = _outdir(args)
    artifact = load_artifact(args.model)
    if artifact.model.kind != "nn":
        raise PipelineError(f"int8 export supports nn models, got {artifact.model.kind!r}")
    ds = _load_dataset(args.data)
    X = apply_scaler(artifact.scaler, extract_matrix(ds.windows, artifact.feature_set))
    quantized = quantize_nn(artifact.model, X)
    q_artifact = ModelArtifact(quantized, artifact.feature_set, artifact.scaler)
    q_artifact.save(out / "model_int8.json")
    config = _config_dict(args, ["model", "data"])
    write_manifest(out / "manifest.json", "export", config, {}, ["model_int8.json"])
    float_fp = artifact.model.footprint()
    q_fp = quantized.footprint()
    return {
        "out": str(out),
        "float_flash_bytes": float_fp.flash_bytes,
        "int8_flash_bytes": q_fp.flash_bytes,
        "flash_ratio": q_fp.flash_bytes / float_fp.flash_bytes,
    }


def cmd_report(args) -> dict:
    out = _outdir(args)
    latency_by_kind = {}
    for path in args.latency or []:
        obj = json.loads(Path(path).read_text())
        latency_by_kind[obj["model_kind"]] = {
            "full": obj["full"],
            "inference": obj["inference"],
            "op_count": obj["op_count"],
        }
    named = []
    for path in args.inputs:
        obj = json.loads(Path(path).read_text())
        conf = np.asarray(obj["confusion"]["counts"], dtype=np.int64)
        m = metrics_from_confusion(conf)
        rep = EvalReport(
            model_kind=obj["model_kind"],
            confusion=conf,
            accuracy=m["accuracy"],
            precision=m["precision"],
            recall=m["recall"],
            f1=m["f1"],
            macro_f1=m["macro_f1"],
            supports=m["supports"],
            footprint=Footprint(**obj["footprint"]) if "footprint" in obj else None,
            latency=obj.get("latency") or latency_by_kind.get(obj["model_kind"]),
        )
        named.append((Path(path).stem + ":" + obj["model_kind"], rep))
    rows = report_rows(named)
    (out / "report.csv").write_text(render_report_csv(rows))
    _write_json(out / "report.json", rows)
    (out / "report.txt").write_text(render_report_text(rows))
    config = {"inputs": list(args.inputs), "latency": list(args.latency or [])}
    write_manifest(out / "manifest.json", "report", config, {},
                   ["report.csv", "report.json", "report.txt"])
    return {"rows": len(rows), "out": str(out)}


# ---------------------------------------------------------------------------
# parser


_SUBPARSERS: dict[str, argparse.ArgumentParser] = {}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="accelgest",
        description="Gesture recognition pipeline for triaxial accelerometer data.",
    )
    parser.add_argument("--version", action="version", version=f"accelgest {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="command")

    def add(name, fn, help_):
        p = sub.add_parser(name, help=help_)
        p.set_defaults(handler=fn)
        p.add_argument("--json", action="store_true", help="machine-readable stdout summary")
        p.add_argument("--config", help="flat key=value config file; flags override")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for parallel sections (default 1)")
        p.add_argument("-o", "--out", required=True, help="output directory")
        _SUBPARSERS[name] = p
        return p

    p = add("generate", cmd_generate, "synthesize a labeled gesture dataset")
    p.add_argument("--per-class", type=int, default=200, dest="per_class")
    p.add_argument("--users", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--amplitude", type=float, default=1.5, help="peak gesture acceleration in g")
    p.add_argument("--noise", type=float, default=0.05, help="additive noise std in g")
    p.add_argument("--speed-jitter", type=float, default=0.1, dest="speed_jitter")

    p = add("ingest", cmd_ingest, "segment a recording CSV into a dataset")
    p.add_argument("--recording", required=True)
    p.add_argument("--annotations", help="sidecar JSON of {start,end,class} spans")
    p.add_argument("--mode", choices=["stream", "annotated"], default="stream")
    p.add_argument("--window-len", type=int, default=100, dest="window_len")
    p.add_argument("--stride", type=int, default=25)
    p.add_argument("--user", type=int, default=None, help="user id recorded in provenance")

    p = add("augment", cmd_augment, "balance classes with augmented copies")
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--seed", type=int, default=0)

    p = add("extract", cmd_extract, "write the feature matrix CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--features", default="default20",
                   help="default20 | pool30 | path to a feature-set JSON")

    p = add("train", cmd_train, "split, balance, train and evaluate one model")
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True, choices=["pme", "rf", "bonsai", "nn"])
    p.add_argument("--features", default="default20")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--balance", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--group-by-user", action="store_true", dest="group_by_user")
    p.add_argument("--epochs", type=int, default=None, help="nn/bonsai epoch override")
    p.add_argument("--lr", type=float, default=None, help="nn/bonsai learning-rate override")
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--threshold", type=float, default=0.6, help="nn confidence threshold")
    p.add_argument("--n-trees", type=int, default=40, dest="n_trees")
    p.add_argument("--max-depth", type=int, default=7, dest="max_depth")
    p.add_argument("--aif-min", type=int, default=25, dest="aif_min")
    p.add_argument("--aif-max", type=int, default=400, dest="aif_max")
    p.add_argument("--max-neurons", type=int, default=128, dest="max_neurons")
    p.add_argument("--proj-dim", type=int, default=13, dest="proj_dim")
    p.add_argument("--depth", type=int, default=4)
    p.add_argument("--sigma", type=float, default=0.3)

    p = add("evaluate", cmd_evaluate, "evaluate a saved model on a dataset")
    p.add_argument("--model", required=True, help="model.json path")
    p.add_argument("--data", required=True)
    p.add_argument("--split", help="split.json from a train run")
    p.add_argument("--subset", choices=["train", "val", "test"], default="test")

    p = add("automl", cmd_automl, "genetic pipeline search")
    p.add_argument("--data", required=True)
    p.add_argument("--pool", choices=["default20", "pool30"], default="pool30")
    p.add_argument("--population", type=int, default=24)
    p.add_argument("--generations", type=int, default=12)
    p.add_argument("--runs", type=int, default=1)
    p.add_argument("--top-n", type=int, default=5, dest="top_n")
    p.add_argument("--seed", type=int, default=0)

    p = add("profile", cmd_profile, "latency micro-benchmark for a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--limit", type=int, default=20, help="windows to time (0 = all)")

    p = add("export", cmd_export, "post-training int8 quantization of an nn model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="calibration dataset directory")

    p = add("report", cmd_report, "comparison table from evaluation JSON files")
    p.add_argument("--inputs", nargs="+", required=True, help="eval JSON paths")
    p.add_argument("--latency", nargs="*", help="latency JSON paths, matched by model kind")

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not hasattr(args, "handler"):
        parser.print_usage(file=sys.stderr)
        return 2
    subparser = _SUBPARSERS[args.command]
    defaults = {
        k: subparser.get_default(k) for k in vars(args) if k not in ("handler", "command")
    }
    try:
        _apply_config_file(args, defaults)
        summary = args.handler(args)
    except (PipelineError, ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    if args.json:
        print(dumps_canonical(summary))
    else:
        for key in sorted(summary):
            print(f"{key}: {summary[key]}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
