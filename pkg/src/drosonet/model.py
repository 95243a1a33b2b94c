"""Sparse binary projection encoder with a trainable per-place linear scorer.

A model hashes a normalized image vector through a fixed random binary
projection (a column-exact 10% of the input rows feed each activation),
keeps the top half of the activation values as a binary tag, and scores
places with a single bias-free weight matrix applied to that tag.
After training, weights can be quantized to int8 with one per-tensor
scale; scoring then runs on integer accumulation.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence, Union

import numpy as np

from .seeds import MASK64

DEFAULT_ACTIVATIONS = 192
PROJECTION_DENSITY = 0.1


@dataclass(frozen=True)
class ProjectionMatrix:
    """Binary D x K projection stored as per-column sorted row indices."""

    input_dim: int
    rows: np.ndarray  # int32, shape (ones_per_column, n_activations)

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.size == 0:
            raise ValueError("projection needs at least one row index per column")
        if self.rows.min() < 0 or self.rows.max() >= self.input_dim:
            raise ValueError("projection row index out of range")
        if self.rows.shape[0] > 1 and not np.all(np.diff(self.rows, axis=0) > 0):
            raise ValueError("projection columns must hold sorted distinct row indices")

    @property
    def n_activations(self) -> int:
        return self.rows.shape[1]

    @property
    def ones_per_column(self) -> int:
        return self.rows.shape[0]

    def dense(self) -> np.ndarray:
        """Materialize the full (input_dim, n_activations) boolean matrix."""
        out = np.zeros((self.input_dim, self.n_activations), dtype=bool)
        out[self.rows, np.arange(self.n_activations)] = True
        return out


def _ones_per_column(input_dim: int, density: float) -> int:
    if not 0.0 < density < 1.0:
        raise ValueError(f"density must be in (0, 1), got {density}")
    count = int(np.floor(density * input_dim + 0.5))
    if count < 1:
        raise ValueError("density too low: would select zero rows per column")
    return count


def _projection_from_rng(rng, input_dim, n_activations, density) -> ProjectionMatrix:
    if input_dim < 1 or n_activations < 1:
        raise ValueError("input_dim and n_activations must be positive")
    count = _ones_per_column(input_dim, density)
    columns = np.empty((count, n_activations), dtype=np.int32)
    for k in range(n_activations):
        # partial Fisher-Yates: the first `count` slots are the chosen rows
        pool = list(range(input_dim))
        draws = rng.random(count)
        for j in range(count):
            r = j + int(draws[j] * (input_dim - j))
            pool[j], pool[r] = pool[r], pool[j]
        columns[:, k] = sorted(pool[:count])
    columns.setflags(write=False)
    return ProjectionMatrix(input_dim=input_dim, rows=columns)


def generate_projection(
    seed: int,
    input_dim: int,
    n_activations: int,
    density: float = PROJECTION_DENSITY,
) -> ProjectionMatrix:
    """Column-exact sparse binary projection; the same seed gives the identical matrix."""
    rng = np.random.default_rng(seed & MASK64)
    return _projection_from_rng(rng, input_dim, n_activations, density)


def encode(img: np.ndarray, projection: ProjectionMatrix) -> np.ndarray:
    """Binary tag marking the top half of activation sums, ties to lower index."""
    vec = np.asarray(img, dtype=np.float64)
    if vec.shape != (projection.input_dim,):
        raise ValueError(
            f"expected image vector of length {projection.input_dim}, got shape {vec.shape}"
        )
    activations = vec[projection.rows].sum(axis=0)
    keep = projection.n_activations // 2
    order = np.argsort(-activations, kind="stable")
    tag = np.zeros(projection.n_activations, dtype=np.uint8)
    tag[order[:keep]] = 1
    return tag


@dataclass(frozen=True)
class QuantizedWeights:
    """Int8 weight grid with one per-tensor scale = max|W| / 127."""

    scale: float
    q: np.ndarray  # int8, shape (n_activations, places)

    def __post_init__(self):
        if not np.isfinite(self.scale) or self.scale <= 0.0:
            raise ValueError(f"quantization scale must be positive, got {self.scale}")
        if self.q.dtype != np.int8 or self.q.ndim != 2:
            raise ValueError("quantized weights must be a 2-d int8 array")


Weights = Union[np.ndarray, QuantizedWeights]


def forward(tag: np.ndarray, weights: Weights) -> np.ndarray:
    """Place scores for a binary tag: the sum of the weight rows the tag selects."""
    mask = np.asarray(tag, dtype=bool)
    if isinstance(weights, QuantizedWeights):
        if mask.shape != (weights.q.shape[0],):
            raise ValueError(
                f"tag length {mask.shape} does not match weight rows {weights.q.shape[0]}"
            )
        acc = weights.q[mask].sum(axis=0, dtype=np.int64)
        return np.float64(weights.scale) * acc.astype(np.float64)
    grid = np.asarray(weights)
    if grid.ndim != 2:
        raise ValueError("float weights must be a 2-d array")
    if mask.shape != (grid.shape[0],):
        raise ValueError(
            f"tag length {mask.shape} does not match weight rows {grid.shape[0]}"
        )
    return grid[mask].sum(axis=0, dtype=np.float64)


@dataclass(frozen=True)
class DrosoNet:
    """One trained model: fixed projection plus float32 or int8 place weights."""

    seed: int
    projection: ProjectionMatrix
    weights: Weights

    def __post_init__(self):
        grid = self.weights.q if self.quantized else self.weights
        if not self.quantized:
            if grid.ndim != 2:
                raise ValueError("float weights must be a 2-d array")
            if not np.all(np.isfinite(grid)):
                raise ValueError("weights must be finite")
        if grid.shape[0] != self.projection.n_activations:
            raise ValueError(
                f"weight rows {grid.shape[0]} != projection activations "
                f"{self.projection.n_activations}"
            )
        if grid.shape[1] < 2:
            raise ValueError("a model needs at least 2 places")

    @property
    def quantized(self) -> bool:
        return isinstance(self.weights, QuantizedWeights)

    @property
    def place_count(self) -> int:
        grid = self.weights.q if self.quantized else self.weights
        return grid.shape[1]

    @property
    def n_activations(self) -> int:
        return self.projection.n_activations


@dataclass(frozen=True)
class TrainConfig:
    """Classifier fitting recipe; the defaults fit one-image-per-place data."""

    epochs: int = 100
    learning_rate: float = 0.01
    shuffle: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be at least 1")
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")


def _softmax(scores: np.ndarray) -> np.ndarray:
    shifted = scores - scores.max()
    exps = np.exp(shifted)
    return exps / exps.sum()


def train(
    images: Sequence[np.ndarray],
    cfg: TrainConfig | None = None,
    seed: int | None = None,
    n_activations: int = DEFAULT_ACTIVATIONS,
) -> DrosoNet:
    """Fit one model, one image per place (label = index); deterministic per seed.

    Plain SGD on soft-max cross-entropy, one image at a time in per-epoch
    shuffled order, weights initialized uniform in [-0.01, 0.01].  The
    projection, the initial weights and the shuffles all come from a
    single stream seeded with `seed` (falling back to `cfg.seed`).
    """
    cfg = cfg or TrainConfig()
    places = len(images)
    if places < 2:
        raise ValueError(f"need at least 2 places to train, got {places}")
    data = [np.asarray(img, dtype=np.float64) for img in images]
    input_dim = data[0].shape[0]
    for i, vec in enumerate(data):
        if vec.shape != (input_dim,):
            raise ValueError(f"image {i} has shape {vec.shape}, expected ({input_dim},)")

    model_seed = (cfg.seed if seed is None else seed) & MASK64
    rng = np.random.default_rng(model_seed)
    projection = _projection_from_rng(rng, input_dim, n_activations, PROJECTION_DENSITY)
    tags = np.stack([encode(vec, projection) for vec in data]).astype(bool)
    weights = rng.uniform(-0.01, 0.01, size=(n_activations, places))

    lr = cfg.learning_rate
    for _ in range(cfg.epochs):
        order = rng.permutation(places) if cfg.shuffle else range(places)
        for p in order:
            active = tags[p]
            grad = _softmax(weights[active].sum(axis=0))
            grad[p] -= 1.0
            weights[active] -= lr * grad

    final = weights.astype(np.float32)
    final.setflags(write=False)
    return DrosoNet(seed=model_seed, projection=projection, weights=final)


def quantize(model: DrosoNet) -> DrosoNet:
    """Int8 per-tensor requantization of a float-weight model."""
    if model.quantized:
        raise ValueError("model is already quantized")
    grid = np.asarray(model.weights, dtype=np.float64)
    peak = float(np.abs(grid).max())
    if peak == 0.0:
        raise ValueError("cannot quantize all-zero weights (scale undefined)")
    scale = float(np.float32(peak / 127.0))
    q = np.clip(np.rint(grid / scale), -127, 127).astype(np.int8)
    q.setflags(write=False)
    return replace(model, weights=QuantizedWeights(scale=scale, q=q))


def predict(model: DrosoNet, img: np.ndarray) -> tuple[int, np.ndarray]:
    """Best place index (lowest index on ties) and the raw score vector."""
    scores = forward(encode(img, model.projection), model.weights)
    return int(np.argmax(scores)), scores
