import json

import numpy as np
from accelgest.core import Annotation, GestureClass, Recording
from accelgest.dataio import (
    config_hash,
    read_dataset,
    read_recording_csv,
    write_annotations_json,
    write_dataset,
    write_recording_csv,
)
from accelgest.synth import SynthParams, synth_dataset


class TestRecordingCsv:
    def test_round_trip_with_label_column(self, tmp_path):
        rng = np.random.default_rng(0)
        anns = (Annotation(30, 80, GestureClass.O), Annotation(120, 190, GestureClass.X))
        rec = Recording(rng.uniform(-2, 2, size=(250, 3)), anns)
        path = tmp_path / "rec.csv"
        write_recording_csv(rec, path)
        back = read_recording_csv(path)
        assert np.array_equal(back.data, rec.data)
        assert back.annotations == rec.annotations

    def test_sidecar_annotations_take_precedence(self, tmp_path):
        rng = np.random.default_rng(1)
        rec = Recording(rng.uniform(-2, 2, size=(200, 3)))
        csv_path, ann_path = tmp_path / "rec.csv", tmp_path / "ann.json"
        write_recording_csv(rec, csv_path)
        write_annotations_json((Annotation(10, 120, GestureClass.X),), ann_path)
        back = read_recording_csv(csv_path, ann_path)
        assert back.annotations == (Annotation(10, 120, GestureClass.X),)


class TestDatasetRoundTrip:
    def test_bitwise_round_trip(self, tmp_path):
        ds = synth_dataset(5, 2, SynthParams(rng_seed=42))
        csv_path = tmp_path / "data.csv"
        prov_path = tmp_path / "provenance.json"
        write_dataset(ds, csv_path, prov_path)
        back = read_dataset(csv_path, prov_path)
        assert len(back) == len(ds)
        for wa, wb in zip(ds.windows, back.windows):
            assert np.array_equal(wa.data, wb.data)
            assert wa.label is wb.label
        assert back.provenance == ds.provenance

    def test_rewrite_is_byte_identical(self, tmp_path):
        ds = synth_dataset(4, 1, SynthParams(rng_seed=7))
        first_csv, first_prov = tmp_path / "a.csv", tmp_path / "a.json"
        write_dataset(ds, first_csv, first_prov)
        back = read_dataset(first_csv, first_prov)
        second_csv, second_prov = tmp_path / "b.csv", tmp_path / "b.json"
        write_dataset(back, second_csv, second_prov)
        assert first_csv.read_bytes() == second_csv.read_bytes()
        assert first_prov.read_bytes() == second_prov.read_bytes()


class TestConfigHash:
    def test_stable_and_order_independent(self):
        a = config_hash({"x": 1, "y": [1, 2]})
        b = config_hash({"y": [1, 2], "x": 1})
        assert a == b
        assert a != config_hash({"x": 2, "y": [1, 2]})
