"""Frame decoding and preprocessing into fixed-length normalized vectors.

Any input frame (grayscale or RGB, any resolution) is reduced to a 64x32
grayscale image by luma conversion and area-averaged resizing, then
flattened row-major and scaled into [0, 1].  The resulting vector of
length 2048 is what the classifier consumes.

Frames are read from PNG/JPEG via Pillow and from binary PGM (P5)
natively; a directory of frames is consumed in ascending lexicographic
filename order, the ordinal position being the frame index.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

VECTOR_LENGTH = 2048
WORK_WIDTH = 64
WORK_HEIGHT = 32

_DECODABLE_SUFFIXES = (".pgm", ".png", ".jpg", ".jpeg")


def _round_half_up(values: np.ndarray) -> np.ndarray:
    # round-half-up keeps pixel arithmetic reproducible across platforms
    return np.floor(values + 0.5)


@dataclass(frozen=True)
class RawFrame:
    """8-bit image; grayscale pixels are (h, w), RGB pixels (h, w, 3)."""

    width: int
    height: int
    channels: int
    pixels: np.ndarray

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("frame dimensions must be at least 1x1")
        if self.channels not in (1, 3):
            raise ValueError(f"unsupported channel count {self.channels}")
        expected = (self.height, self.width)
        if self.channels == 3:
            expected = (self.height, self.width, 3)
        if self.pixels.dtype != np.uint8 or self.pixels.shape != expected:
            raise ValueError(
                f"pixel buffer must be uint8 with shape {expected}, "
                f"got {self.pixels.dtype} {self.pixels.shape}"
            )

    @classmethod
    def from_array(cls, pixels) -> "RawFrame":
        """Build a frame from a (h, w) or (h, w, 3) uint8-compatible array."""
        arr = np.array(pixels, dtype=np.uint8, copy=True)
        if arr.ndim == 3 and arr.shape[2] == 1:
            arr = arr[:, :, 0]
        if arr.ndim not in (2, 3):
            raise ValueError(f"expected a 2-d or 3-d pixel array, got {arr.ndim}-d")
        arr.setflags(write=False)
        channels = 1 if arr.ndim == 2 else arr.shape[2]
        return cls(width=arr.shape[1], height=arr.shape[0], channels=channels, pixels=arr)


def to_grayscale(frame: RawFrame) -> RawFrame:
    """Luma conversion (0.299 R + 0.587 G + 0.114 B, rounded); identity on gray.

    Computed in integers (x1000 weights) so half-way cases round up exactly
    the same on every platform.
    """
    if frame.channels == 1:
        return frame
    px = frame.pixels.astype(np.int64)
    luma = (299 * px[:, :, 0] + 587 * px[:, :, 1] + 114 * px[:, :, 2] + 500) // 1000
    return RawFrame.from_array(luma.astype(np.uint8))


def _box_weights(n_in: int, n_out: int) -> np.ndarray:
    """(n_out, n_in) source-pixel coverage per output cell, scaled by n_out.

    Cell o spans [o*n_in/n_out, (o+1)*n_in/n_out); multiplying through by
    n_out keeps every overlap an exact integer.
    """
    weights = np.zeros((n_out, n_in), dtype=np.int64)
    for o in range(n_out):
        lo, hi = o * n_in, (o + 1) * n_in
        first = lo // n_out
        last = min(-(-hi // n_out), n_in)
        for i in range(first, last):
            overlap = min((i + 1) * n_out, hi) - max(i * n_out, lo)
            if overlap > 0:
                weights[o, i] = overlap
    return weights


def resize_box(frame: RawFrame, out_w: int, out_h: int) -> RawFrame:
    """Area-average resize of a grayscale frame.

    Each output pixel is the mean of the axis-aligned source rectangle it
    covers, with fractional pixels weighted by their coverage.  Weighted
    sums run in scaled integer arithmetic, so the result is the exact
    half-up rounding of the true mean for any scale ratio.
    """
    if frame.channels != 1:
        raise ValueError("resize_box expects a grayscale frame")
    if out_w < 1 or out_h < 1:
        raise ValueError("output dimensions must be at least 1x1")
    src = frame.pixels.astype(np.int64)
    wy = _box_weights(frame.height, out_h)
    wx = _box_weights(frame.width, out_w)
    sums = wy @ src @ wx.T
    # every cell's total scaled weight is exactly in_h * in_w
    den = frame.height * frame.width
    out = (2 * sums + den) // (2 * den)
    return RawFrame.from_array(out.astype(np.uint8))


def flatten_normalize(frame: RawFrame) -> np.ndarray:
    """Row-major flatten of a 64x32 grayscale frame into [0, 1] floats."""
    if frame.channels != 1 or frame.width != WORK_WIDTH or frame.height != WORK_HEIGHT:
        raise ValueError(
            f"expected a {WORK_WIDTH}x{WORK_HEIGHT} grayscale frame, got "
            f"{frame.width}x{frame.height} with {frame.channels} channel(s)"
        )
    return frame.pixels.astype(np.float64).reshape(-1) / 255.0


def preprocess(frame: RawFrame) -> np.ndarray:
    """Full pipeline: grayscale, resize to 64x32, flatten, normalize."""
    return flatten_normalize(resize_box(to_grayscale(frame), WORK_WIDTH, WORK_HEIGHT))


def _next_token(data: bytes, pos: int, path) -> tuple[bytes, int]:
    while pos < len(data):
        byte = data[pos : pos + 1]
        if byte == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
        elif byte.isspace():
            pos += 1
        else:
            break
    start = pos
    while pos < len(data) and not data[pos : pos + 1].isspace():
        pos += 1
    if start == pos:
        raise ValueError(f"{path}: truncated PGM header")
    return data[start:pos], pos


def read_pgm(path) -> RawFrame:
    """Read a binary (P5) PGM file with maxval up to 255."""
    path = Path(path)
    data = path.read_bytes()
    if data[:2] != b"P5":
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    pos = 2
    fields = []
    for name in ("width", "height", "maxval"):
        token, pos = _next_token(data, pos, path)
        try:
            fields.append(int(token))
        except ValueError:
            raise ValueError(f"{path}: bad PGM {name} field {token!r}") from None
    width, height, maxval = fields
    if width < 1 or height < 1:
        raise ValueError(f"{path}: bad PGM dimensions {width}x{height}")
    if not 0 < maxval <= 255:
        raise ValueError(f"{path}: unsupported PGM maxval {maxval}")
    pos += 1  # single whitespace byte before the raster
    raster = data[pos : pos + width * height]
    if len(raster) < width * height:
        raise ValueError(
            f"{path}: truncated PGM raster ({len(raster)} of {width * height} bytes)"
        )
    return RawFrame.from_array(np.frombuffer(raster, dtype=np.uint8).reshape(height, width))


def write_pgm(path, frame: RawFrame) -> None:
    """Write a grayscale frame as binary (P5) PGM with maxval 255."""
    if frame.channels != 1:
        raise ValueError("PGM output supports grayscale frames only")
    header = f"P5\n{frame.width} {frame.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + frame.pixels.tobytes())


def load_frame(path) -> RawFrame:
    """Decode one PGM/PNG/JPEG file into a frame."""
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix == ".pgm":
        return read_pgm(path)
    if suffix in (".png", ".jpg", ".jpeg"):
        with Image.open(path) as img:
            if img.mode == "L":
                arr = np.asarray(img)
            else:
                arr = np.asarray(img.convert("RGB"))
        return RawFrame.from_array(arr)
    raise ValueError(f"{path}: unsupported frame format {suffix!r}")


def load_frame_dir(directory) -> list[RawFrame]:
    """Decode every frame in a directory, ordered by ascending filename."""
    directory = Path(directory)
    if not directory.is_dir():
        raise ValueError(f"{directory}: not a directory")
    names = sorted(
        entry.name
        for entry in directory.iterdir()
        if entry.suffix.lower() in _DECODABLE_SUFFIXES
    )
    if not names:
        raise ValueError(f"{directory}: no decodable frames (*.pgm, *.png, *.jpg)")
    frames, bad = [], []
    for name in names:
        try:
            frames.append(load_frame(directory / name))
        except Exception as exc:  # every bad file gets reported
            bad.append(f"{name}: {exc}")
    if bad:
        raise ValueError(
            f"{directory}: {len(bad)} undecodable frame(s):\n  " + "\n  ".join(bad)
        )
    return frames
