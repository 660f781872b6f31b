"""Gesture recognition pipeline for triaxial accelerometer windows.

End-to-end desk-scale pipeline: synthesize or ingest 25 Hz accelerometer
recordings, segment them into 100-sample windows, augment, extract a
20-entry statistical feature bank, train four lightweight classifiers
(prototype matcher, random forest, projected shallow tree, dense NN), search
feature/model pipelines with a genetic algorithm, and profile latency and
memory footprint of the results.
"""

from .core import (
    Annotation,
    Dataset,
    GestureClass,
    Provenance,
    Recording,
    Sample,
    Window,
    extract_annotated,
    segment_stream,
)
from .features import (
    Axis,
    AxisPair,
    FeatureId,
    FeatureSet,
    Scaler,
    apply_scaler,
    default_feature_set,
    extract_matrix,
    extract_vector,
    feature_value,
    fit_scaler,
    full_feature_pool,
)
from .synth import NEUTRAL_USER, SynthParams, UserProfile, synth_dataset, synth_window
from .augment import AugmentSpec, amplitude_scale, balance_classes, temporal_shift, time_stretch

__version__ = "0.1.0"
