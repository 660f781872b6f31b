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


@pytest.fixture(scope="session")
def small_dataset():
    """120 windows over 2 users; enough for quick model fits."""
    return synth_dataset(20, 2, SynthParams(rng_seed=101))


@pytest.fixture(scope="session")
def small_features(small_dataset):
    fs = default_feature_set()
    X = extract_matrix(small_dataset.windows, fs)
    scaler = fit_scaler(X)
    return fs, scaler, apply_scaler(scaler, X), small_dataset.label_indices()


@pytest.fixture(scope="session")
def random_windows():
    """1000 random 100-sample windows for feature oracles."""
    from accelgest import Window

    rng = np.random.default_rng(2024)
    windows = []
    for _ in range(1000):
        data = rng.uniform(-4.0, 4.0, size=(100, 3))
        windows.append(Window(data))
    return windows
