"""Tests for the binary model file format: round trips, sizes, parse errors."""

import hashlib

import numpy as np
import pytest

from drosonet.model import TrainConfig, quantize
from drosonet.persist import FORMAT_VERSION, MAGIC, ModelFileError, load, save
from drosonet.voting import Ensemble, train_ensemble, vote


@pytest.fixture(scope="module")
def images():
    rng = np.random.default_rng(0)
    return [rng.random(256) for _ in range(10)]


@pytest.fixture(scope="module")
def quantized_ensemble(images):
    return train_ensemble(
        images, TrainConfig(epochs=20), n_models=3, n_activations=32, master_seed=5
    )


@pytest.fixture(scope="module")
def float_ensemble(images):
    return train_ensemble(
        images,
        TrainConfig(epochs=20),
        n_models=2,
        n_activations=32,
        master_seed=6,
        quantized=False,
    )


class TestRoundTrip:
    def test_quantized_fields_survive(self, quantized_ensemble, tmp_path):
        path = tmp_path / "model.drsn"
        save(quantized_ensemble, path)
        loaded = load(path)
        assert loaded.radius == quantized_ensemble.radius
        assert loaded.master_seed == quantized_ensemble.master_seed
        for original, restored in zip(quantized_ensemble.models, loaded.models):
            assert restored.seed == original.seed
            assert np.array_equal(restored.projection.rows, original.projection.rows)
            assert restored.weights.scale == original.weights.scale
            assert np.array_equal(restored.weights.q, original.weights.q)

    def test_float_weights_survive_bit_exact(self, float_ensemble, tmp_path):
        path = tmp_path / "model.drsn"
        save(float_ensemble, path)
        loaded = load(path)
        for original, restored in zip(float_ensemble.models, loaded.models):
            assert np.array_equal(np.asarray(restored.weights), np.asarray(original.weights))

    def test_votes_identical_after_round_trip(self, quantized_ensemble, tmp_path):
        path = tmp_path / "model.drsn"
        save(quantized_ensemble, path)
        loaded = load(path)
        rng = np.random.default_rng(1)
        for _ in range(10):
            img = rng.random(256)
            place_a, fused_a = vote(quantized_ensemble, img)
            place_b, fused_b = vote(loaded, img)
            assert place_a == place_b
            assert np.array_equal(fused_a, fused_b)

    def test_save_is_deterministic(self, quantized_ensemble, tmp_path):
        first = tmp_path / "a.drsn"
        second = tmp_path / "b.drsn"
        size_a = save(quantized_ensemble, first)
        size_b = save(quantized_ensemble, second)
        assert size_a == size_b
        assert hashlib.sha256(first.read_bytes()).digest() == hashlib.sha256(
            second.read_bytes()
        ).digest()

    def test_save_load_save_is_byte_identical(self, quantized_ensemble, tmp_path):
        first = tmp_path / "a.drsn"
        second = tmp_path / "b.drsn"
        save(quantized_ensemble, first)
        save(load(first), second)
        assert first.read_bytes() == second.read_bytes()

    def test_returned_size_matches_file(self, quantized_ensemble, tmp_path):
        path = tmp_path / "model.drsn"
        size = save(quantized_ensemble, path)
        assert path.stat().st_size == size


class TestFileSize:
    def test_quantized_size_formula_is_exact(self, images, tmp_path):
        ens = train_ensemble(
            images, TrainConfig(epochs=5), n_models=3, n_activations=32, master_seed=2
        )
        size = save(ens, tmp_path / "m.drsn")
        col_bytes = (256 + 7) // 8
        expected = 34 + 3 * (8 + col_bytes * 32 + 4 + 32 * 10)
        assert size == expected


class TestParseErrors:
    def _saved(self, quantized_ensemble, tmp_path):
        path = tmp_path / "model.drsn"
        save(quantized_ensemble, path)
        return path, bytearray(path.read_bytes())

    def test_bad_magic(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        data[:4] = b"NOPE"
        path.write_bytes(data)
        with pytest.raises(ModelFileError, match="magic"):
            load(path)

    def test_unsupported_version(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        data[4] = FORMAT_VERSION + 1
        path.write_bytes(data)
        with pytest.raises(ModelFileError, match="version"):
            load(path)

    def test_truncation_reports_offset(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        path.write_bytes(data[: len(data) // 2])
        with pytest.raises(ModelFileError, match="offset"):
            load(path)

    def test_truncated_header(self, tmp_path):
        path = tmp_path / "tiny.drsn"
        path.write_bytes(MAGIC + b"\x01")
        with pytest.raises(ModelFileError, match="header"):
            load(path)

    def test_trailing_bytes_rejected(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        path.write_bytes(bytes(data) + b"\x00")
        with pytest.raises(ModelFileError, match="trailing"):
            load(path)

    def test_corrupted_projection_popcount(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        data[42 : 42 + 32] = bytes(32)  # zero the first column bitset of model 0
        path.write_bytes(data)
        with pytest.raises(ModelFileError, match="column-exact"):
            load(path)

    def test_corrupted_scale_rejected(self, quantized_ensemble, tmp_path):
        path, data = self._saved(quantized_ensemble, tmp_path)
        scale_offset = 34 + 8 + 32 * 32  # header + seed + projection bitsets
        data[scale_offset : scale_offset + 4] = bytes(4)  # scale 0.0
        path.write_bytes(data)
        with pytest.raises(ModelFileError, match="scale"):
            load(path)

    def test_missing_file_has_path_context(self, tmp_path):
        with pytest.raises(OSError, match="nowhere.drsn"):
            load(tmp_path / "nowhere.drsn")


class TestSaveErrors:
    def test_mixed_weight_kinds_rejected(self, quantized_ensemble, float_ensemble, tmp_path):
        mixed = Ensemble(
            models=[quantized_ensemble.models[0], float_ensemble.models[0]],
            radius=1,
            master_seed=0,
        )
        with pytest.raises(ValueError, match="mixes"):
            save(mixed, tmp_path / "m.drsn")

    def test_unwritable_target_has_path_context(self, quantized_ensemble, tmp_path):
        target = tmp_path / "no" / "such" / "dir" / "m.drsn"
        with pytest.raises(OSError, match="m.drsn"):
            save(quantized_ensemble, target)
