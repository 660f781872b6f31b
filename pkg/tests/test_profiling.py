import pytest

from accelgest.models import (
    BonsaiConfig,
    NnConfig,
    PmeConfig,
    RfConfig,
    bonsai_train,
    nn_train,
    pme_train,
    rf_train,
)
from accelgest.profiling import profile_latency


@pytest.fixture(scope="module")
def profiled(small_features_module):
    fs, scaler, Xs, y, windows = small_features_module
    model = pme_train(Xs, y, PmeConfig(seed=0))
    stats = profile_latency(model, windows[:4], fs, scaler, reps=30)
    return stats


@pytest.fixture(scope="module")
def small_features_module():
    from accelgest import SynthParams, apply_scaler, default_feature_set, extract_matrix, fit_scaler, synth_dataset

    ds = synth_dataset(10, 2, SynthParams(rng_seed=55))
    fs = default_feature_set()
    X = extract_matrix(ds.windows, fs)
    scaler = fit_scaler(X)
    return fs, scaler, apply_scaler(scaler, X), ds.label_indices(), ds.windows


class TestLatencyHarness:
    def test_fields_and_call_counts(self, profiled):
        for key in ("full", "inference", "baseline_us", "op_count"):
            assert key in profiled
        assert profiled["inference"].n_calls == 30 * 4
        for stats in (profiled["full"], profiled["inference"]):
            assert stats.mean_us >= 0
            assert stats.p50_us <= stats.p99_us

    def test_inference_not_slower_than_full_pipeline(self, profiled):
        assert profiled["inference"].mean_us <= profiled["full"].mean_us

    def test_reps_minimum_enforced(self, small_features_module):
        fs, scaler, Xs, y, windows = small_features_module
        model = pme_train(Xs, y, PmeConfig(seed=0))
        with pytest.raises(ValueError):
            profile_latency(model, windows[:2], fs, scaler, reps=10)

    def test_stability_across_rep_counts(self, small_features_module):
        """Doubling reps moves the mean < 20%.  The gate presumes a quiet
        machine, so allow up to three attempts; a systematic rep-count
        dependence would fail every attempt."""
        fs, scaler, Xs, y, windows = small_features_module
        model = pme_train(Xs, y, PmeConfig(seed=0))
        ratios = []
        for _attempt in range(3):
            a = profile_latency(model, windows[:8], fs, scaler, reps=40)
            b = profile_latency(model, windows[:8], fs, scaler, reps=80)
            ratios.append(b["inference"].mean_us / a["inference"].mean_us)
            if 0.8 < ratios[-1] < 1.2:
                return
        pytest.fail(f"mean shifted more than 20% in all attempts: {ratios}")


class TestOpCounts:
    def test_nn_minimum_among_default_models(self, small_features_module):
        fs, scaler, Xs, y, _windows = small_features_module
        models = {
            "pme": pme_train(Xs, y, PmeConfig(seed=0)),
            "rf": rf_train(Xs, y, RfConfig(seed=0)),
            "bonsai": bonsai_train(Xs, y, BonsaiConfig(epochs=5, seed=0)),
            "nn": nn_train(Xs, y, NnConfig(epochs=1, seed=0)),
        }
        ops = {k: m.op_count() for k, m in models.items()}
        assert ops["nn"] == min(ops.values())
        assert all(v > 0 for v in ops.values())

    def test_op_count_deterministic(self, small_features_module):
        fs, scaler, Xs, y, _windows = small_features_module
        model = rf_train(Xs, y, RfConfig(seed=3))
        assert model.op_count() == model.op_count()
