"""Acceptance gate: one test per criterion, each printing a pass/fail line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as they
complete.  The end-to-end fixture (criterion 2) trains all four models on
the 6000-window synthetic dataset once and is shared by criteria 8 and 10.
"""

import time

import numpy as np
import pytest

from accelgest import (
    SynthParams,
    apply_scaler,
    default_feature_set,
    extract_matrix,
    fit_scaler,
    synth_dataset,
)
from accelgest.augment import AugmentSpec, balance_classes
from accelgest.automl import CandidatePool, SearchConfig, evolve, feature_frequency
from accelgest.core import GestureClass
from accelgest.evaluation import SplitSpec, evaluate, metrics_from_confusion, split_indices
from accelgest.models import (
    BonsaiConfig,
    NnConfig,
    PmeConfig,
    RfConfig,
    bonsai_train,
    nn_train,
    pme_train,
    quantize_nn,
    rf_train,
    threshold_prediction,
)
from accelgest.profiling import profile_latency
from accelgest.seeds import derive_seed


def ok(n, name):
    print(f"ACCEPTANCE {n} ({name}): PASS")


@pytest.fixture(scope="module")
def e2e():
    """Criterion 2 pipeline: synthetic dataset, 60/20/20 split, balanced
    train/val, default hyperparameters, all four models."""
    t0 = time.monotonic()
    root = 42
    ds = synth_dataset(400, 5, SynthParams(rng_seed=root))
    idx = split_indices(ds, SplitSpec(rng_seed=derive_seed(root, "split")))
    train_ds = balance_classes(ds.subset(idx["train"]), AugmentSpec(rng_seed=derive_seed(root, "bal-tr")))
    val_ds = balance_classes(ds.subset(idx["val"]), AugmentSpec(rng_seed=derive_seed(root, "bal-va")))
    test_ds = ds.subset(idx["test"])  # unbalanced-test protocol: never touched
    fs = default_feature_set()
    X_train = extract_matrix(train_ds.windows, fs)
    scaler = fit_scaler(X_train)
    Xt = apply_scaler(scaler, X_train)
    yt = train_ds.label_indices()
    models = {
        "pme": pme_train(Xt, yt, PmeConfig(seed=derive_seed(root, "pme"))),
        "rf": rf_train(Xt, yt, RfConfig(seed=derive_seed(root, "rf"))),
        "bonsai": bonsai_train(Xt, yt, BonsaiConfig(seed=derive_seed(root, "bonsai"))),
        "nn": nn_train(Xt, yt, NnConfig(seed=derive_seed(root, "nn"))),
    }
    reports = {k: evaluate(m, test_ds.windows, fs, scaler) for k, m in models.items()}
    elapsed = time.monotonic() - t0
    return {
        "models": models,
        "reports": reports,
        "feature_set": fs,
        "scaler": scaler,
        "train_X_scaled": Xt,
        "test_ds": test_ds,
        "val_ds": val_ds,
        "elapsed_s": elapsed,
    }


class TestCriterion1MetricEngine:
    def test_published_confusion_matrix_values(self):
        """Integer arithmetic, zero tolerance.  Per-class figures reproduce
        under one-decimal truncation; the frozen overall accuracy is the
        half-up rounding of the same fraction (the reference values mix the
        two conventions)."""
        matrix = np.array(
            [[113, 0, 0, 1], [0, 223, 0, 1], [4, 3, 482, 7]], dtype=np.int64
        )
        m = metrics_from_confusion(matrix)
        diag = np.diag(matrix[:, :3])
        supports = matrix.sum(axis=1)
        committed = matrix[:, :3].sum(axis=0)
        assert supports.tolist() == [114, 224, 496]
        # recalls 99.1 / 99.5 / 97.1, truncated tenths of a percent
        assert [(1000 * int(d)) // int(s) for d, s in zip(diag, supports)] == [991, 995, 971]
        # precisions 96.5 / 98.6 / 100
        assert [(1000 * int(d)) // int(c) for d, c in zip(diag, committed)] == [965, 986, 1000]
        # accuracy 98.1 (818/834 rounded half-up to one decimal)
        correct, total = int(diag.sum()), int(supports.sum())
        assert (correct, total) == (818, 834)
        assert (1000 * correct + total // 2) // total == 981
        # the engine's exact fractions match the same integers
        assert m["accuracy"] == correct / total
        for i in range(3):
            assert m["recall"][i] == int(diag[i]) / int(supports[i])
            assert m["precision"][i] == int(diag[i]) / int(committed[i])
        ok(1, "metric-engine oracle")


class TestCriterion2EndToEnd:
    def test_all_models_reach_90_percent_and_nn_95_f1(self, e2e):
        for kind, report in e2e["reports"].items():
            assert report.accuracy >= 0.90, f"{kind} accuracy {report.accuracy:.4f}"
        assert e2e["reports"]["nn"].macro_f1 >= 0.95
        assert e2e["elapsed_s"] < 300.0
        ok(2, "synthetic end-to-end, four models")


class TestCriterion3FeatureOracle:
    def test_features_match_brute_force_and_invariances(self, random_windows):
        from test_features import brute_feature

        from accelgest.features import (
            Axis,
            FeatureId,
            feature_value,
            full_feature_pool,
        )

        pool = full_feature_pool()
        X = extract_matrix(random_windows, pool)
        for i, w in enumerate(random_windows):
            for j, (fid, axis) in enumerate(pool):
                assert abs(X[i, j] - brute_feature(w, fid, axis)) <= 1e-9
        # invariance table spot-checks at fixed shift/scale
        rng = np.random.default_rng(0)
        xs = rng.uniform(-2, 2, size=100)
        from test_features import window_from_x

        w0, w_shift, w_scale = (
            window_from_x(xs),
            window_from_x(xs + 1.7),
            window_from_x(xs * 2.3),
        )
        for fid in (FeatureId.VARIANCE, FeatureId.KURTOSIS, FeatureId.IQR_RANGE,
                    FeatureId.NEG_ZERO_CROSSINGS, FeatureId.GLOBAL_P2P,
                    FeatureId.MIN_MAX_DISTANCE):
            assert abs(feature_value(w0, fid, Axis.X) - feature_value(w_shift, fid, Axis.X)) <= 1e-9
        for fid in (FeatureId.MEAN, FeatureId.P25, FeatureId.GLOBAL_MIN_MAX_SUM,
                    FeatureId.GLOBAL_P2P):
            assert feature_value(w_scale, fid, Axis.X) == pytest.approx(
                2.3 * feature_value(w0, fid, Axis.X), abs=1e-8
            )
        assert feature_value(w_scale, FeatureId.VARIANCE, Axis.X) == pytest.approx(
            2.3**2 * feature_value(w0, FeatureId.VARIANCE, Axis.X), abs=1e-8
        )
        for fid in (FeatureId.KURTOSIS, FeatureId.NEG_ZERO_CROSSINGS,
                    FeatureId.MIN_MAX_DISTANCE):
            assert feature_value(w_scale, fid, Axis.X) == pytest.approx(
                feature_value(w0, fid, Axis.X), abs=1e-9
            )
        ok(3, "feature oracle suite, 1000 windows")


class TestCriterion4GradientChecks:
    def test_bonsai_and_nn_finite_differences_under_10s(self):
        t0 = time.monotonic()
        from test_bonsai import TestGradients as BonsaiGradients
        from test_nn import TestGradients as NnGradients

        BonsaiGradients().test_analytic_matches_central_finite_differences()
        nn = NnGradients()
        from accelgest.models import NnConfig

        assert nn._finite_difference_check(NnConfig(hidden=(4,), batchnorm=False, dropout=0.0, seed=5)) < 1e-4
        assert nn._finite_difference_check(NnConfig(hidden=(4,), batchnorm=True, dropout=0.0, seed=6)) < 1e-4
        elapsed = time.monotonic() - t0
        assert elapsed < 10.0
        ok(4, f"gradient checks ({elapsed:.1f}s)")


class TestCriterion5PmeProperties:
    def test_aif_bounds_capacity_and_oracle(self, e2e):
        from test_pme import brute_force_classify

        model = e2e["models"]["pme"]
        assert np.all(model.aifs >= 25) and np.all(model.aifs <= 400)
        assert model.centers.shape[0] <= 128
        rng = np.random.default_rng(77)
        queries = rng.uniform(-4, 4, size=(1000, model.n_features))
        for q in queries:
            expected_label, expected_score = brute_force_classify(model, q)
            pred = model.predict(q)
            assert pred.label is expected_label
            assert pred.score == pytest.approx(expected_score, abs=1e-12)
        ok(5, "prototype property suite")


class TestCriterion6UncertaintyGate:
    def test_threshold_boundary_exact(self):
        cases = [
            (np.array([0.59, 0.20, 0.21]), GestureClass.UNCERTAIN),
            (np.array([0.61, 0.19, 0.20]), GestureClass.O),
            (np.array([0.6 - 1e-9, 0.2, 0.2 + 1e-9]), GestureClass.UNCERTAIN),
            (np.array([0.6, 0.2, 0.2]), GestureClass.O),
            (np.array([0.6 + 1e-9, 0.2, 0.2 - 1e-9]), GestureClass.O),
            (np.array([0.2, 0.75, 0.05]), GestureClass.X),
        ]
        for probs, expected in cases:
            assert threshold_prediction(probs, 0.6).label is expected
        ok(6, "uncertainty gate at 0.6")


class TestCriterion7AutomlSanity:
    def test_planted_constants_rank_below_informative(self):
        ds = synth_dataset(40, 2, SynthParams(rng_seed=5))
        fs = default_feature_set()
        X = extract_matrix(ds.windows, fs)
        X = np.hstack([X, np.full((X.shape[0], 1), 2.0), np.full((X.shape[0], 1), -1.0)])
        pool = CandidatePool(
            tuple([*fs.names, "const_a", "const_b"]),
            tuple([*fs.entries, None, None]),
        )
        y = ds.label_indices()
        rng = np.random.default_rng(1)
        order = rng.permutation(len(y))
        cut = int(0.7 * len(y))
        Xt, yt = X[order[:cut]], y[order[:cut]]
        Xv, yv = X[order[cut:]], y[order[cut:]]
        runs = []
        for r in range(4):
            cfg = SearchConfig(population=10, generations=4, rng_seed=derive_seed(5, "run", r))
            result = evolve(cfg, pool, Xt, yt, Xv, yv)
            # elitism monotonicity in every logged run
            best = {}
            for rec in result.log:
                g = rec["generation"]
                best[g] = max(best.get(g, -1.0), rec["scalar"])
            gens = sorted(best)
            for a, b in zip(gens, gens[1:]):
                assert best[b] >= best[a] - 1e-12
            runs.append(result.ranked)
        freq = feature_frequency(runs, top_n=5, pool=pool)
        position = {name: i for i, (name, _c) in enumerate(freq)}
        informative = [n for n in pool.names if not n.startswith("const_")]
        for planted in ("const_a", "const_b"):
            for name in informative:
                assert position[planted] > position[name], (planted, name)
        ok(7, "pipeline-search sanity, 4 runs x top 5")


class TestCriterion8Quantization:
    def test_agreement_and_flash_ratio(self, e2e):
        model = e2e["models"]["nn"]
        quantized = quantize_nn(model, e2e["train_X_scaled"])
        fs, scaler = e2e["feature_set"], e2e["scaler"]
        X_test = apply_scaler(scaler, extract_matrix(e2e["test_ds"].windows, fs))
        float_preds = model.predict_batch(X_test)
        int8_preds = quantized.predict_batch(X_test)
        agreement = np.mean([a.label is b.label for a, b in zip(float_preds, int8_preds)])
        assert agreement >= 0.98, f"agreement {agreement:.4f}"
        ratio = quantized.footprint().flash_bytes / model.footprint().flash_bytes
        assert ratio <= 0.30, f"flash ratio {ratio:.3f}"
        ok(8, f"int8 quantization (agreement {agreement:.3f}, flash ratio {ratio:.2f})")


class TestCriterion9Reproducibility:
    def test_identical_manifests_byte_identical_artifacts(self, tmp_path):
        from accelgest.cli import main

        data = tmp_path / "data"
        assert main(["generate", "--per-class", "30", "--users", "2", "--seed", "3",
                     "-o", str(data)]) == 0
        outs = []
        for name in ("a", "b"):
            out = tmp_path / name
            assert main(["train", "--data", str(data), "--model", "nn", "--seed", "9",
                         "-o", str(out)]) == 0
            outs.append(out)
        a, b = outs
        assert (a / "manifest.json").read_bytes() == (b / "manifest.json").read_bytes()
        for artifact in ("model.json", "eval_val.json", "eval_test.json", "split.json"):
            assert (a / artifact).read_bytes() == (b / artifact).read_bytes(), artifact
        ok(9, "byte-identical reruns")


class TestCriterion10LatencyHarness:
    def test_fields_overhead_and_nn_op_count_minimum(self, e2e):
        fs, scaler = e2e["feature_set"], e2e["scaler"]
        windows = e2e["test_ds"].windows[:5]
        stats = profile_latency(e2e["models"]["nn"], windows, fs, scaler, reps=30)
        for section in ("full", "inference"):
            s = stats[section]
            assert s.mean_us >= 0.0 and s.p50_us >= 0.0 and s.p99_us >= s.p50_us
        assert stats["baseline_us"] > 0.0  # empty-call overhead measured and subtracted
        assert stats["inference"].mean_us <= stats["full"].mean_us
        ops = {kind: m.op_count() for kind, m in e2e["models"].items()}
        assert ops["nn"] == min(ops.values()), ops
        ok(10, f"latency harness, op counts {ops}")
