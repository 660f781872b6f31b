import numpy as np
import pytest

from accelgest.core import GestureClass
from accelgest.errors import DivergedTraining
from accelgest.models import (
    ModelArtifact,
    NnConfig,
    NnModel,
    load_artifact,
    nn_train,
    quantize_nn,
    threshold_prediction,
)
from accelgest.models.base import softmax
from accelgest.models.nn import _TrainState, fold_batchnorm, quantize_weight
from accelgest.seeds import derive_seed


def blobs3(n=60, seed=0, d=8):
    rng = np.random.default_rng(seed)
    centers = np.array([[0.0] * d, [4.0] * d, [-4.0] + [2.0] * (d - 1)])
    X = np.vstack([rng.normal(c, 0.5, size=(n, d)) for c in centers])
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    y = np.repeat(np.arange(3), n)
    return X, y


def model_with_probs(probs):
    """Zero-weight network whose output biases are log-probabilities, so the
    softmax reproduces ``probs`` exactly up to float error."""
    probs = np.asarray(probs, dtype=np.float64)
    cfg = NnConfig(hidden=(4,), batchnorm=False)
    weights = [np.zeros((3, 4), dtype=np.float32), np.zeros((4, 3), dtype=np.float32)]
    biases = [np.zeros(4, dtype=np.float32), np.log(probs).astype(np.float32)]
    return NnModel(weights=weights, biases=biases, bn=[], config=cfg)


class TestForward:
    def test_softmax_sums_to_one(self):
        rng = np.random.default_rng(0)
        X, y = blobs3()
        model = nn_train(X, y, NnConfig(seed=1))
        probs = model.probabilities(rng.normal(size=(50, X.shape[1])))
        assert np.all(np.abs(probs.sum(axis=1) - 1.0) <= 1e-6)

    def test_training_learns_blobs(self):
        X, y = blobs3(n=100, seed=2)
        model = nn_train(X, y, NnConfig(epochs=40, seed=3))
        probs = model.probabilities(X)
        assert np.mean(probs.argmax(axis=1) == y) >= 0.98

    def test_diverged_training_on_nonfinite_loss(self):
        # Adam's normalized steps keep lr-driven blowups finite, so drive the
        # loss non-finite directly; the guard must name the epoch.
        X, y = blobs3(seed=4)
        X = X.copy()
        X[0, 0] = np.inf
        with np.errstate(invalid="ignore"), pytest.raises(DivergedTraining):
            nn_train(X, y, NnConfig(batchnorm=False, epochs=1, seed=0))


class TestGradients:
    def _finite_difference_check(self, cfg, d=3, n=8, seed=11):
        rng = np.random.default_rng(seed)
        X = rng.normal(size=(n, d))
        y = rng.integers(0, 3, size=n)
        onehot = np.zeros((n, 3))
        onehot[np.arange(n), y] = 1.0
        state = _TrainState(d, cfg, np.random.default_rng(derive_seed(cfg.seed, "nn-train")))
        _, grads = state.forward_backward(X, onehot, rng=None)
        eps = 1e-6
        worst = 0.0
        for p, g in zip(state._params, grads):
            flat, g_flat = p.reshape(-1), np.asarray(g).reshape(-1)
            for idx in range(flat.size):
                orig = flat[idx]
                flat[idx] = orig + eps
                lp, _ = state.forward_backward(X, onehot, rng=None, update_running=False)
                flat[idx] = orig - eps
                lm, _ = state.forward_backward(X, onehot, rng=None, update_running=False)
                flat[idx] = orig
                fd = (lp - lm) / (2 * eps)
                denom = max(abs(fd), abs(g_flat[idx]), 1e-8)
                worst = max(worst, abs(fd - g_flat[idx]) / denom)
        return worst

    def test_backprop_matches_finite_differences_plain(self):
        """[3 -> 4 -> 3] dense sub-network without batch norm."""
        cfg = NnConfig(hidden=(4,), batchnorm=False, dropout=0.0, seed=5)
        assert self._finite_difference_check(cfg) < 1e-4

    def test_backprop_matches_finite_differences_batchnorm(self):
        cfg = NnConfig(hidden=(4,), batchnorm=True, dropout=0.0, seed=6)
        assert self._finite_difference_check(cfg) < 1e-4


class TestConfidenceThreshold:
    def test_threshold_decision_cases(self):
        low = model_with_probs([0.59, 0.20, 0.21]).predict(np.zeros(3))
        assert low.label is GestureClass.UNCERTAIN
        high = model_with_probs([0.61, 0.19, 0.20]).predict(np.zeros(3))
        assert high.label is GestureClass.O
        assert high.score == pytest.approx(0.61, abs=1e-6)

    def test_exact_boundary(self):
        just_below = threshold_prediction(np.array([0.6 - 1e-9, 0.2, 0.2 + 1e-9]), 0.6)
        assert just_below.label is GestureClass.UNCERTAIN
        at = threshold_prediction(np.array([0.6, 0.2, 0.2]), 0.6)
        assert at.label is GestureClass.O
        just_above = threshold_prediction(np.array([0.6 + 1e-9, 0.2, 0.2 - 1e-9]), 0.6)
        assert just_above.label is GestureClass.O

    def test_uncertain_iff_below_threshold(self):
        X, y = blobs3(seed=7)
        model = nn_train(X, y, NnConfig(seed=8))
        rng = np.random.default_rng(9)
        Q = rng.normal(size=(300, X.shape[1]))
        probs = model.probabilities(Q)
        for p_row, q in zip(probs, Q):
            pred = model.predict(q)
            assert (pred.label is GestureClass.UNCERTAIN) == (p_row.max() < 0.6)


class TestFootprint:
    def test_dense_parameter_count_closed_form(self):
        """Plain [20 -> 16 -> 16 -> 8 -> 4 -> 3] float32 network: parameter
        bytes from the layer-size formula."""
        widths = [20, 16, 16, 8, 4, 3]
        expected_params = sum(widths[i] * widths[i + 1] + widths[i + 1] for i in range(5))
        assert expected_params == 795  # oracle: closed-form count
        X = np.random.default_rng(0).normal(size=(40, 20))
        y = np.random.default_rng(1).integers(0, 3, size=40)
        model = nn_train(X, y, NnConfig(batchnorm=False, epochs=1, seed=0))
        from accelgest.models.base import CODE_CONST_BYTES, tensor_bytes

        param_bytes = tensor_bytes(*model.weights, *model.biases)
        assert param_bytes == expected_params * 4 == 3180
        assert model.footprint().flash_bytes == param_bytes + CODE_CONST_BYTES

    def test_default_model_flash_matches_frozen_figure(self):
        """Default batch-norm network serializes to 3948 flash bytes: 971
        parameters (dense + batch norm) plus the 64-byte code constant."""
        X = np.random.default_rng(0).normal(size=(40, 20))
        y = np.random.default_rng(1).integers(0, 3, size=40)
        model = nn_train(X, y, NnConfig(epochs=1, seed=0))
        assert model.footprint().flash_bytes == 3948

    def test_footprint_deterministic(self):
        X, y = blobs3()
        model = nn_train(X, y, NnConfig(epochs=2, seed=1))
        assert model.footprint() == model.footprint()


class TestQuantization:
    def test_weight_round_trip_error_within_half_step(self):
        rng = np.random.default_rng(2)
        w = rng.normal(0.0, 0.4, size=(16, 8))
        q, scale = quantize_weight(w)
        assert np.all(np.abs(q.astype(np.float64) * scale - w) <= scale / 2 + 1e-12)

    def test_all_zero_weights_quantize_to_zero(self):
        q, scale = quantize_weight(np.zeros((4, 4)))
        assert np.all(q == 0)

    def test_fold_batchnorm_exact(self):
        X, y = blobs3(seed=10)
        model = nn_train(X, y, NnConfig(seed=11))
        weights, biases = fold_batchnorm(model)
        h = X.copy()
        for i in range(len(weights) - 1):
            h = np.maximum(h @ weights[i] + biases[i], 0.0)
        folded_logits = h @ weights[-1] + biases[-1]
        assert np.allclose(folded_logits, model.logits(X), atol=1e-4)

    def test_quantized_agreement_at_least_98_percent(self):
        X, y = blobs3(n=150, seed=12)
        rng = np.random.default_rng(13)
        order = rng.permutation(len(y))
        train, test = order[:300], order[300:]
        model = nn_train(X[train], y[train], NnConfig(epochs=30, seed=14))
        quantized = quantize_nn(model, X[train])
        agree = np.mean(
            [
                model.predict(v).label is quantized.predict(v).label
                for v in X[test]
            ]
        )
        assert agree >= 0.98

    def test_calibration_minimum(self):
        X, y = blobs3(seed=15)
        model = nn_train(X, y, NnConfig(epochs=1, seed=0))
        with pytest.raises(ValueError):
            quantize_nn(model, X[:50])

    def test_quantized_flash_under_30_percent_of_float(self):
        X, y = blobs3(n=100, seed=16, d=20)
        model = nn_train(X, y, NnConfig(epochs=2, seed=3))
        quantized = quantize_nn(model, X)
        ratio = quantized.footprint().flash_bytes / model.footprint().flash_bytes
        assert ratio <= 0.30


class TestSerialization:
    def test_float_round_trip(self, tmp_path):
        from accelgest.features import Scaler, full_feature_pool

        X, y = blobs3(seed=17, d=30)
        model = nn_train(X, y, NnConfig(epochs=3, seed=18))
        fs = full_feature_pool()
        artifact = ModelArtifact(model, fs, Scaler(np.zeros(30), np.ones(30)))
        path = tmp_path / "nn.json"
        artifact.save(path)
        loaded = load_artifact(path)
        rng = np.random.default_rng(19)
        Q = rng.normal(size=(1000, 30))
        pa, pb = model.probabilities(Q), loaded.model.probabilities(Q)
        assert np.array_equal(pa, pb)

    def test_quantized_round_trip(self, tmp_path):
        from accelgest.features import Scaler, full_feature_pool

        X, y = blobs3(seed=20, d=30)
        model = nn_train(X, y, NnConfig(epochs=3, seed=21))
        quantized = quantize_nn(model, X)
        artifact = ModelArtifact(quantized, full_feature_pool(), Scaler(np.zeros(30), np.ones(30)))
        path = tmp_path / "qnn.json"
        artifact.save(path)
        loaded = load_artifact(path)
        rng = np.random.default_rng(22)
        for q in rng.normal(size=(500, 30)):
            a, b = quantized.predict(q), loaded.model.predict(q)
            assert a.label is b.label and a.score == b.score
