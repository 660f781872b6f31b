"""Four lightweight gesture classifiers behind one contract, plus model I/O.

Every model exposes ``predict(vector) -> Prediction``, ``predict_batch``,
``op_count()``, ``footprint()`` and the envelope hooks used by
``ModelArtifact``.  Prediction is pure and deterministic for
dimension-matching inputs.
"""

from .base import (
    Footprint,
    ModelArtifact,
    Prediction,
    dumps_canonical,
    load_artifact,
    softmax,
)
from .bonsai import BonsaiConfig, BonsaiModel, bonsai_train
from .forest import RfConfig, RfModel, rf_train
from .nn import (
    NnConfig,
    NnModel,
    QuantizedNnModel,
    nn_train,
    quantize_nn,
    threshold_prediction,
)
from .pme import PmeConfig, PmeModel, pme_train

MODEL_KINDS = {
    "pme": PmeModel,
    "rf": RfModel,
    "bonsai": BonsaiModel,
    "nn": NnModel,
    "nn_int8": QuantizedNnModel,
}


def model_footprint(model) -> Footprint:
    """Deterministic flash/ram estimate for any trained model."""
    return model.footprint()

TRAINERS = {
    "pme": (pme_train, PmeConfig),
    "rf": (rf_train, RfConfig),
    "bonsai": (bonsai_train, BonsaiConfig),
    "nn": (nn_train, NnConfig),
}

__all__ = [
    "Footprint",
    "ModelArtifact",
    "Prediction",
    "MODEL_KINDS",
    "TRAINERS",
    "load_artifact",
    "model_footprint",
    "dumps_canonical",
    "softmax",
    "PmeConfig",
    "PmeModel",
    "pme_train",
    "RfConfig",
    "RfModel",
    "rf_train",
    "BonsaiConfig",
    "BonsaiModel",
    "bonsai_train",
    "NnConfig",
    "NnModel",
    "nn_train",
    "QuantizedNnModel",
    "quantize_nn",
    "threshold_prediction",
]
