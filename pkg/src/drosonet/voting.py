"""Windowed score voting across a collection of models.

Each model's scores are soft-max normalized, zeroed outside an index
window of radius r around that model's own best place, then summed
across models in model order; the fused argmax is the prediction.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import DEFAULT_ACTIVATIONS, DrosoNet, TrainConfig, predict, quantize, train
from .seeds import MASK64, derive_seed

DEFAULT_MODELS = 64
DEFAULT_RADIUS_FRACTION = 0.5


def softmax_normalize(scores: np.ndarray) -> np.ndarray:
    """Max-shifted soft-max: sums to 1, argmax preserved, no overflow."""
    s = np.asarray(scores, dtype=np.float64)
    exps = np.exp(s - s.max())
    return exps / exps.sum()


def window_bounds(center: int, radius: int, length: int) -> tuple[int, int]:
    """Inclusive index window of half-width `radius`, clamped to [0, length)."""
    if not 0 <= center < length:
        raise ValueError(f"window center {center} outside [0, {length})")
    return max(0, center - radius), min(length - 1, center + radius)


def mask_scores(scores: np.ndarray, radius: int) -> np.ndarray:
    """Copy of `scores` zeroed outside the window around its own argmax."""
    s = np.asarray(scores, dtype=np.float64)
    lo, hi = window_bounds(int(np.argmax(s)), radius, s.shape[0])
    masked = np.zeros_like(s)
    masked[lo : hi + 1] = s[lo : hi + 1]
    return masked


def aggregate(masked: Sequence[np.ndarray]) -> np.ndarray:
    """Element-wise sum of masked vectors, accumulated in list order."""
    if len(masked) == 0:
        raise ValueError("nothing to aggregate")
    fused = np.zeros_like(np.asarray(masked[0], dtype=np.float64))
    for vec in masked:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.shape != fused.shape:
            raise ValueError(
                f"score vectors disagree on place count: {vec.shape} vs {fused.shape}"
            )
        fused += vec
    return fused


def fuse_scores(score_vectors: Sequence[np.ndarray], radius: int) -> tuple[int, np.ndarray]:
    """Normalize, window-mask and sum raw per-model scores; argmax wins."""
    masked = [mask_scores(softmax_normalize(s), radius) for s in score_vectors]
    fused = aggregate(masked)
    return int(np.argmax(fused)), fused


@dataclass
class Ensemble:
    """Ordered model collection voting with index-window radius `radius`."""

    models: list[DrosoNet]
    radius: int
    master_seed: int = 0

    def __post_init__(self):
        if len(self.models) < 1:
            raise ValueError("an ensemble needs at least one model")
        if self.radius < 0:
            raise ValueError("voting radius must be non-negative")
        first = self.models[0]
        for i, model in enumerate(self.models):
            if model.place_count != first.place_count:
                raise ValueError(f"model {i} disagrees on place count")
            if model.n_activations != first.n_activations:
                raise ValueError(f"model {i} disagrees on activation count")
            if model.projection.input_dim != first.projection.input_dim:
                raise ValueError(f"model {i} disagrees on input length")

    @property
    def n_models(self) -> int:
        return len(self.models)

    @property
    def place_count(self) -> int:
        return self.models[0].place_count


def vote(ensemble: Ensemble, img: np.ndarray) -> tuple[int, np.ndarray]:
    """Ensemble prediction for one image: fused scores and their argmax."""
    scores = [predict(model, img)[1] for model in ensemble.models]
    return fuse_scores(scores, ensemble.radius)


def default_radius(place_count: int) -> int:
    """Default window half-width: half the number of places, rounded down."""
    return int(DEFAULT_RADIUS_FRACTION * place_count)


def train_ensemble(
    images: Sequence[np.ndarray],
    cfg: TrainConfig | None = None,
    n_models: int = DEFAULT_MODELS,
    n_activations: int = DEFAULT_ACTIVATIONS,
    master_seed: int = 0,
    radius: int | None = None,
    quantized: bool = True,
    workers: int = 1,
) -> Ensemble:
    """Train `n_models` models from seeds derived off one master seed.

    Model i trains with seed derive_seed(master_seed, i), so a whole
    collection is reproducible from a single integer.  Each model is
    int8-quantized unless `quantized` is False.  Training fans out over
    `workers` threads; results are ordered by model index either way.
    """
    if n_models < 1:
        raise ValueError("n_models must be at least 1")
    seeds = [derive_seed(master_seed, i) for i in range(n_models)]

    def build(seed: int) -> DrosoNet:
        model = train(images, cfg, seed=seed, n_activations=n_activations)
        return quantize(model) if quantized else model

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            models = list(pool.map(build, seeds))
    else:
        models = [build(seed) for seed in seeds]

    if radius is None:
        radius = default_radius(len(images))
    return Ensemble(models=models, radius=radius, master_seed=master_seed & MASK64)
