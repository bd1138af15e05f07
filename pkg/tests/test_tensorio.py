import json

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from repalign import tensorio
from repalign.errors import DataError, ManifestError

from oracles import colwise_mean_std


def _write_raw_manifest(tmp_path, rows, cols, payload_bytes, name="m"):
    (tmp_path / "m.f32").write_bytes(payload_bytes)
    doc = {
        "entries": [
            {"name": name, "path": "m.f32", "rows": rows, "cols": cols,
             "dtype": "f32le", "meta": {"kind": "activations", "model_id": "x"}}
        ]
    }
    manifest = tmp_path / "manifest.json"
    manifest.write_text(json.dumps(doc))
    return manifest


class TestLoadSave:
    def test_hand_written_2x3(self, tmp_path):
        payload = np.asarray([1, 2, 3, 4, 5, 6], dtype="<f4").tobytes()
        manifest = _write_raw_manifest(tmp_path, 2, 3, payload)
        loaded = tensorio.load_matrix(manifest, "m")
        assert_array_equal(loaded.data, [[1, 2, 3], [4, 5, 6]])

    def test_size_mismatch_rejected(self, tmp_path):
        manifest = _write_raw_manifest(tmp_path, 2, 3, b"\x00" * 23)
        with pytest.raises(ManifestError, match="23 bytes"):
            tensorio.load_matrix(manifest, "m")

    def test_large_roundtrip_bit_exact(self, tmp_path):
        rng = np.random.default_rng(0)
        data = rng.standard_normal((243, 1024)).astype(np.float32)
        tensor = tensorio.ActivationTensor(data=data, model_id="model-a")
        manifest = tmp_path / "manifest.json"
        tensorio.save_matrix(tensor, manifest, "layers/0")
        back = tensorio.load_matrix(manifest, "layers/0")
        assert back.data.tobytes() == data.tobytes()
        assert back.model_id == "model-a"

    def test_one_element_roundtrip(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        resp = tensorio.ResponseMatrix(data=np.zeros((1, 1), np.float32), subject_id="s1")
        tensorio.save_matrix(resp, manifest, "resp")
        back = tensorio.load_matrix(manifest, "resp")
        assert back.data[0, 0] == 0.0
        assert back.subject_id == "s1"

    def test_nan_rejected_on_construction(self):
        data = np.zeros((2, 2), np.float32)
        data[0, 0] = np.nan
        with pytest.raises(DataError, match="NaN or Inf"):
            tensorio.ActivationTensor(data=data, model_id="m")

    def test_nan_payload_rejected_on_load(self, tmp_path):
        payload = np.asarray([1, np.nan], dtype="<f4").tobytes()
        manifest = _write_raw_manifest(tmp_path, 1, 2, payload)
        with pytest.raises(ManifestError, match="NaN or Inf"):
            tensorio.load_matrix(manifest, "m")

    def test_missing_entry_and_missing_file(self, tmp_path):
        with pytest.raises(ManifestError, match="not found"):
            tensorio.load_matrix(tmp_path / "absent.json", "m")
        manifest = _write_raw_manifest(tmp_path, 1, 1, b"\x00" * 4)
        with pytest.raises(ManifestError, match="not listed"):
            tensorio.load_matrix(manifest, "other")

    def test_roundtrip_property_many_matrices(self, tmp_path):
        rng = np.random.default_rng(7)
        manifest = tmp_path / "manifest.json"
        for i in range(100):
            rows = int(rng.integers(1, 12))
            cols = int(rng.integers(1, 12))
            data = (
                rng.standard_normal((rows, cols)) * 10.0 ** rng.integers(-3, 4)
            ).astype(np.float32)
            tensorio.save_array(data, manifest, f"m{i}")
            back, _ = tensorio.load_array(manifest, f"m{i}")
            assert back.tobytes() == data.tobytes(), f"matrix {i} not bit-exact"

    def test_save_replaces_existing_entry(self, tmp_path):
        manifest = tmp_path / "manifest.json"
        tensorio.save_array(np.ones((2, 2), np.float32), manifest, "a")
        tensorio.save_array(np.zeros((3, 1), np.float32), manifest, "a")
        assert tensorio.manifest_entry_names(manifest) == ["a"]
        back, _ = tensorio.load_array(manifest, "a")
        assert back.shape == (3, 1)

    def test_voxel_labels_roundtrip(self, tmp_path):
        resp = tensorio.ResponseMatrix(
            data=np.ones((2, 3), np.float32),
            subject_id="s1",
            voxel_labels=("IFG", "STG", "TP"),
        )
        manifest = tmp_path / "manifest.json"
        tensorio.save_matrix(resp, manifest, "r")
        back = tensorio.load_matrix(manifest, "r")
        assert back.voxel_labels == ("IFG", "STG", "TP")


class TestTypes:
    def test_stimulus_set_invariants(self):
        stim = tensorio.StimulusSet(ids=("a", "b", "c"))
        assert stim.count == 3
        with pytest.raises(DataError, match="unique"):
            tensorio.StimulusSet(ids=("a", "a"))
        with pytest.raises(DataError, match="texts"):
            tensorio.StimulusSet(ids=("a", "b"), texts=("only one",))

    def test_stimulus_set_from_text_file(self, tmp_path):
        path = tmp_path / "stimuli.txt"
        path.write_text("The dog barked.\n\nA cat slept.\n", encoding="utf-8")
        stim = tensorio.StimulusSet.from_text_file(path)
        assert stim.count == 2
        assert stim.texts[1] == "A cat slept."

    def test_activation_unit_checked(self):
        with pytest.raises(DataError, match="unit"):
            tensorio.ActivationTensor(
                data=np.ones((2, 2), np.float32), model_id="m", unit="bogus"
            )

    def test_response_label_length_checked(self):
        with pytest.raises(DataError, match="voxel_labels"):
            tensorio.ResponseMatrix(
                data=np.ones((2, 3), np.float32), subject_id="s", voxel_labels=("a",)
            )


class TestZscore:
    def test_two_point_column(self):
        stats = tensorio.zscore_fit(np.array([[1.0], [3.0]]))
        assert stats.means[0] == 2.0
        assert stats.stds[0] == 1.0
        assert_allclose(tensorio.zscore_apply(stats, np.array([[1.0], [3.0]])), [[-1], [1]])

    def test_constant_column(self):
        stats = tensorio.zscore_fit(np.array([[5.0], [5.0], [5.0]]))
        assert stats.means[0] == 5.0
        assert stats.stds[0] == 0.0
        out = tensorio.zscore_apply(stats, np.array([[5.0], [7.0]]))
        assert_array_equal(out, [[0.0], [0.0]])

    def test_against_loop_oracle(self):
        rng = np.random.default_rng(3)
        x = rng.standard_normal((50, 10)) * 4 + 1
        stats = tensorio.zscore_fit(x)
        means, stds = colwise_mean_std(x)
        assert_allclose(stats.means, means, atol=1e-6)
        assert_allclose(stats.stds, stds, atol=1e-6)

    def test_self_application_property(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((40, 6)) * 3 - 2
        z = tensorio.zscore_apply(tensorio.zscore_fit(x), x)
        assert np.abs(z.mean(axis=0)).max() < 1e-6
        assert np.abs(z.std(axis=0) - 1).max() < 1e-6

    def test_idempotent_on_standardized_data(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((30, 4))
        z1 = tensorio.zscore_apply(tensorio.zscore_fit(x), x)
        z2 = tensorio.zscore_apply(tensorio.zscore_fit(z1), z1)
        assert np.abs(z2 - z1).max() < 1e-6

    def test_requires_two_rows(self):
        with pytest.raises(DataError, match="2 rows"):
            tensorio.zscore_fit(np.ones((1, 3)))

    def test_dimension_mismatch(self):
        stats = tensorio.zscore_fit(np.ones((3, 2)))
        with pytest.raises(DataError, match="column count"):
            tensorio.zscore_apply(stats, np.ones((3, 5)))
