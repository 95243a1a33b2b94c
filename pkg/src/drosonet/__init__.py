"""Compact visual place recognition: sparse binary hashing plus windowed voting.

Images are reduced to 2048-long normalized vectors, hashed through a
fixed sparse binary projection into 96-of-192 binary tags, and scored by
a tiny per-place linear layer.  Many such models, trained from one
master seed, vote by summing soft-max scores inside an index window
around each model's own best match.
"""

from .evaluation import (
    BenchmarkStats,
    GroundTruth,
    MatchResult,
    PRCurve,
    benchmark,
    evaluate,
    match_correct,
    pr_curve,
    write_match_csv,
    write_pr_csv,
)
from .imaging import (
    VECTOR_LENGTH,
    WORK_HEIGHT,
    WORK_WIDTH,
    RawFrame,
    flatten_normalize,
    load_frame,
    load_frame_dir,
    preprocess,
    read_pgm,
    resize_box,
    to_grayscale,
    write_pgm,
)
from .model import (
    DEFAULT_ACTIVATIONS,
    PROJECTION_DENSITY,
    DrosoNet,
    ProjectionMatrix,
    QuantizedWeights,
    TrainConfig,
    encode,
    forward,
    generate_projection,
    predict,
    quantize,
    train,
)
from .persist import FORMAT_VERSION, MAGIC, ModelFileError, load, save
from .seeds import derive_seed, splitmix64
from .synth import (
    FRAME_HEIGHT,
    FRAME_WIDTH,
    SynthConfig,
    generate_query,
    generate_reference,
    write_frames,
)
from .voting import (
    DEFAULT_MODELS,
    DEFAULT_RADIUS_FRACTION,
    Ensemble,
    aggregate,
    default_radius,
    fuse_scores,
    mask_scores,
    softmax_normalize,
    train_ensemble,
    vote,
    window_bounds,
)

__version__ = "0.1.0"
