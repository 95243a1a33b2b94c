"""Self-contained synthetic traversals: reference scenes plus perturbed queries.

Reference frames are 128x64 grayscale compositions of gradients and
rectangles (twice the working resolution, so downsampling is genuinely
exercised).  Query frames perturb them with a horizontal circular shift,
a brightness offset and Gaussian noise.  Everything is seeded.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .imaging import RawFrame, _round_half_up, write_pgm
from .seeds import MASK64, derive_seed

FRAME_WIDTH = 128
FRAME_HEIGHT = 64

_QUERY_STREAM = 0x71  # keeps query noise decoupled from scene generation

# mid-range gradients and low-contrast rectangles keep places distinct on
# clean frames yet confusable under query noise, like real traversals
_GRADIENT_LOW = 90.0
_GRADIENT_HIGH = 165.0
_RECT_CONTRAST = 25.0


@dataclass(frozen=True)
class SynthConfig:
    """Traversal recipe: scene seed plus query perturbation strengths."""

    seed: int
    places: int
    noise_sigma: float = 0.0       # Gaussian noise, fraction of full intensity
    brightness_shift: float = 0.0  # additive offset, fraction of full intensity
    shift_px: int = 0              # horizontal circular shift, pixels

    def __post_init__(self):
        if self.places < 2:
            raise ValueError("a traversal needs at least 2 places")
        if self.noise_sigma < 0.0:
            raise ValueError("noise_sigma must be non-negative")
        if abs(self.shift_px) >= 64:
            raise ValueError("|shift_px| must stay below 64")


def _scene(rng: np.random.Generator) -> np.ndarray:
    low = rng.uniform(_GRADIENT_LOW, _GRADIENT_HIGH)
    high = rng.uniform(_GRADIENT_LOW, _GRADIENT_HIGH)
    if rng.integers(0, 2) == 0:
        ramp = np.linspace(low, high, FRAME_WIDTH)
        canvas = np.broadcast_to(ramp, (FRAME_HEIGHT, FRAME_WIDTH)).copy()
    else:
        ramp = np.linspace(low, high, FRAME_HEIGHT)
        canvas = np.broadcast_to(ramp[:, None], (FRAME_HEIGHT, FRAME_WIDTH)).copy()
    for _ in range(int(rng.integers(4, 9))):
        w = int(rng.integers(8, 49))
        h = int(rng.integers(6, 33))
        x = int(rng.integers(0, FRAME_WIDTH - w + 1))
        y = int(rng.integers(0, FRAME_HEIGHT - h + 1))
        delta = rng.choice([-1.0, 1.0]) * rng.uniform(0.4 * _RECT_CONTRAST, _RECT_CONTRAST)
        canvas[y : y + h, x : x + w] += delta
    return np.clip(_round_half_up(canvas), 0, 255).astype(np.uint8)


def generate_reference(cfg: SynthConfig) -> list[RawFrame]:
    """`places` distinct 128x64 scenes, byte-deterministic per seed."""
    rng = np.random.default_rng(cfg.seed & MASK64)
    return [RawFrame.from_array(_scene(rng)) for _ in range(cfg.places)]


def generate_query(reference: list[RawFrame], cfg: SynthConfig) -> list[RawFrame]:
    """Perturbed copy of each reference frame: shift, brightness, noise, clamp."""
    if len(reference) == 0:
        raise ValueError("reference traversal is empty")
    rng = np.random.default_rng(derive_seed(cfg.seed, _QUERY_STREAM))
    out = []
    for frame in reference:
        pixels = frame.pixels.astype(np.float64)
        if cfg.shift_px:
            pixels = np.roll(pixels, cfg.shift_px, axis=1)
        if cfg.brightness_shift:
            pixels = pixels + cfg.brightness_shift * 255.0
        if cfg.noise_sigma > 0.0:
            pixels = pixels + rng.normal(0.0, cfg.noise_sigma * 255.0, size=pixels.shape)
        clamped = np.clip(_round_half_up(pixels), 0, 255).astype(np.uint8)
        out.append(RawFrame.from_array(clamped))
    return out


def write_frames(directory, frames: list[RawFrame]) -> Path:
    """Write frames as 000000.pgm, 000001.pgm, ... so name order is frame order."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(frames):
        write_pgm(directory / f"{i:06d}.pgm", frame)
    return directory
