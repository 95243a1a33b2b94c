"""Tests for synthetic traversal generation and its end-to-end behavior."""

import hashlib

import numpy as np
import pytest

from conftest import GOLDENS
from drosonet.evaluation import GroundTruth, evaluate
from drosonet.imaging import preprocess, read_pgm
from drosonet.model import TrainConfig
from drosonet.synth import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    SynthConfig,
    generate_query,
    generate_reference,
    write_frames,
)
from drosonet.voting import train_ensemble


class TestSynthConfig:
    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            SynthConfig(seed=0, places=1)
        with pytest.raises(ValueError):
            SynthConfig(seed=0, places=5, noise_sigma=-0.1)
        with pytest.raises(ValueError):
            SynthConfig(seed=0, places=5, shift_px=64)


class TestGenerateReference:
    def test_deterministic_per_seed(self):
        cfg = SynthConfig(seed=1, places=50)
        a = generate_reference(cfg)
        b = generate_reference(cfg)
        assert len(a) == 50
        for fa, fb in zip(a, b):
            assert fa.pixels.tobytes() == fb.pixels.tobytes()

    def test_frames_have_working_shape(self):
        frames = generate_reference(SynthConfig(seed=2, places=3))
        for frame in frames:
            assert (frame.width, frame.height, frame.channels) == (
                FRAME_WIDTH,
                FRAME_HEIGHT,
                1,
            )

    def test_two_places_differ(self):
        a, b = generate_reference(SynthConfig(seed=1, places=2))
        assert a.pixels.tobytes() != b.pixels.tobytes()

    def test_pairwise_distinct(self):
        frames = generate_reference(SynthConfig(seed=5, places=50))
        digests = {f.pixels.tobytes() for f in frames}
        assert len(digests) == 50

    def test_different_seeds_differ(self):
        a = generate_reference(SynthConfig(seed=1, places=5))
        b = generate_reference(SynthConfig(seed=2, places=5))
        assert any(
            fa.pixels.tobytes() != fb.pixels.tobytes() for fa, fb in zip(a, b)
        )


class TestGenerateQuery:
    def test_zero_perturbation_is_identity(self):
        cfg = SynthConfig(seed=3, places=4)
        reference = generate_reference(cfg)
        queries = generate_query(reference, cfg)
        for ref, query in zip(reference, queries):
            assert np.array_equal(ref.pixels, query.pixels)

    def test_pure_shift_is_a_circular_roll(self):
        cfg = SynthConfig(seed=3, places=4, shift_px=5)
        reference = generate_reference(cfg)
        queries = generate_query(reference, cfg)
        for ref, query in zip(reference, queries):
            assert np.array_equal(query.pixels, np.roll(ref.pixels, 5, axis=1))

    def test_brightness_never_darkens(self):
        cfg = SynthConfig(seed=3, places=4, brightness_shift=0.1)
        reference = generate_reference(cfg)
        queries = generate_query(reference, cfg)
        for ref, query in zip(reference, queries):
            assert np.all(query.pixels.astype(int) >= ref.pixels.astype(int))

    def test_noise_is_deterministic_and_matches_golden_checksum(self):
        golden = GOLDENS["synth_query_checksum"]
        cfg = SynthConfig(**golden["config"])
        reference = generate_reference(cfg)
        queries = generate_query(reference, cfg)
        digest = hashlib.sha256(queries[golden["frame"]].pixels.tobytes()).hexdigest()
        assert digest == golden["sha256"]

    def test_rejects_empty_reference(self):
        with pytest.raises(ValueError):
            generate_query([], SynthConfig(seed=0, places=2))


class TestWriteFrames:
    def test_names_encode_frame_order(self, tmp_path):
        frames = generate_reference(SynthConfig(seed=4, places=3))
        out = write_frames(tmp_path / "ref", frames)
        names = sorted(p.name for p in out.iterdir())
        assert names == ["000000.pgm", "000001.pgm", "000002.pgm"]
        loaded = read_pgm(out / "000001.pgm")
        assert np.array_equal(loaded.pixels, frames[1].pixels)


@pytest.fixture(scope="module")
def fitted():
    cfg = SynthConfig(seed=9, places=30)
    reference = generate_reference(cfg)
    vectors = [preprocess(f) for f in reference]
    ensemble = train_ensemble(vectors, TrainConfig(), n_models=8, master_seed=21, workers=4)
    return cfg, reference, ensemble


class TestEndToEnd:
    def test_clean_queries_give_perfect_auc_at_zero_tolerance(self, fitted):
        cfg, reference, ensemble = fitted
        queries = [preprocess(f) for f in generate_query(reference, cfg)]
        curve, _ = evaluate(ensemble, queries, GroundTruth(tolerance=0))
        assert curve.auc == 1.0

    def test_noise_degrades_monotonically(self, fitted):
        _, reference, ensemble = fitted
        aucs = []
        for sigma in (0.0, 0.05, 0.15, 0.30):
            noisy = SynthConfig(seed=9, places=30, noise_sigma=sigma)
            queries = [preprocess(f) for f in generate_query(reference, noisy)]
            curve, _ = evaluate(ensemble, queries, GroundTruth(tolerance=0))
            aucs.append(curve.auc)
        for low, high in zip(aucs, aucs[1:]):
            assert high <= low + 0.02, f"AUC rose from {low} to {high}"
