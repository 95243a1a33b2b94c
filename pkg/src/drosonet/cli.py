"""Command-line pipeline: synthesize traversals, train, evaluate, benchmark, sweep.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.
The env var DROSO_THREADS caps the worker count for training fan-out and
query evaluation.  Every command echoes a config line that reproduces it,
and the same line is embedded as a comment header in every CSV written.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path

import numpy as np

from .evaluation import GroundTruth, benchmark, evaluate, write_match_csv, write_pr_csv
from .imaging import load_frame_dir, preprocess
from .model import DEFAULT_ACTIVATIONS, TrainConfig, predict
from .persist import ModelFileError, load, save
from .seeds import derive_seed
from .synth import SynthConfig, generate_query, generate_reference, write_frames
from .voting import DEFAULT_MODELS, DEFAULT_RADIUS_FRACTION, train_ensemble

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3


class UsageError(Exception):
    """Bad flags or flag values."""


class DataError(Exception):
    """Unreadable, undecodable or inconsistent input data."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); usage errors are exit 1 here
        raise UsageError(message)


def _workers(n_tasks: int) -> int:
    raw = os.environ.get("DROSO_THREADS")
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise UsageError(f"DROSO_THREADS must be an integer, got {raw!r}") from None
        if cap < 1:
            raise UsageError("DROSO_THREADS must be at least 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_tasks))


def _load_vectors(directory, minimum: int, what: str) -> list[np.ndarray]:
    try:
        frames = load_frame_dir(directory)
    except ValueError as exc:
        raise DataError(str(exc)) from None
    if len(frames) < minimum:
        raise DataError(f"{directory}: need at least {minimum} {what}, found {len(frames)}")
    return [preprocess(frame) for frame in frames]


def _load_model(path):
    if not Path(path).is_file():
        raise DataError(f"{path}: missing model file")
    try:
        return load(path)
    except ModelFileError as exc:
        raise DataError(str(exc)) from None


def _require_parent(path) -> None:
    """Output paths are validated before any work starts."""
    if path is None:
        return
    parent = Path(path).parent
    if not parent.is_dir():
        raise DataError(f"{path}: output directory {parent} does not exist")


def _read_mapping(path, n_queries: int) -> tuple[int, ...]:
    """Parse a `query,reference` CSV into a total query->reference mapping."""
    try:
        text = Path(path).read_text(encoding="ascii")
    except OSError as exc:
        raise DataError(f"cannot read ground-truth file {path}: {exc}") from None
    entries: dict[int, int] = {}
    first_content = True
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'query,reference', got {line!r}")
        if first_content:
            first_content = False
            if not parts[0].lstrip("-").isdigit():
                continue  # header row
        try:
            query, reference = int(parts[0]), int(parts[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: non-integer indices in {line!r}") from None
        if query in entries:
            raise DataError(f"{path}:{lineno}: duplicate query index {query}")
        entries[query] = reference
    missing = [q for q in range(n_queries) if q not in entries]
    if missing:
        raise DataError(
            f"{path}: mapping must cover every query; missing {len(missing)} "
            f"(first: {missing[0]})"
        )
    return tuple(entries[q] for q in range(n_queries))


def _int_list(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from None
    if not values or any(v < 1 for v in values):
        raise UsageError(f"list values must be positive integers, got {text!r}")
    return values


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(
            seed=args.seed,
            places=args.places,
            noise_sigma=args.noise_sigma,
            brightness_shift=args.brightness,
            shift_px=args.shift_px,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = (
        f"command=synth out_ref={args.out_ref} out_query={args.out_query} "
        f"places={args.places} noise_sigma={args.noise_sigma} "
        f"brightness={args.brightness} shift_px={args.shift_px} seed={args.seed}"
    )
    print(f"# {config}")
    reference = generate_reference(cfg)
    write_frames(args.out_ref, reference)
    print(f"wrote {len(reference)} reference frames to {args.out_ref}")
    if args.out_query:
        queries = generate_query(reference, cfg)
        write_frames(args.out_query, queries)
        print(f"wrote {len(queries)} query frames to {args.out_query}")
    return EXIT_OK


def cmd_train(args) -> int:
    _require_parent(args.model)
    vectors = _load_vectors(args.ref_dir, minimum=2, what="places (decodable frames)")
    places = len(vectors)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, shuffle=True, seed=args.seed)
    radius = int(args.radius_frac * places)
    config = (
        f"command=train ref_dir={args.ref_dir} model={args.model} models={args.models} "
        f"activations={args.activations} radius_frac={args.radius_frac} "
        f"epochs={args.epochs} lr={args.lr} seed={args.seed}"
    )
    print(f"# {config}")
    started = time.perf_counter()
    ensemble = train_ensemble(
        vectors,
        cfg,
        n_models=args.models,
        n_activations=args.activations,
        master_seed=args.seed,
        radius=radius,
        quantized=True,
        workers=_workers(args.models),
    )
    for i, model in enumerate(ensemble.models):
        hits = sum(predict(model, vec)[0] == p for p, vec in enumerate(vectors))
        print(f"model {i:02d}: train accuracy {hits}/{places} ({100.0 * hits / places:.1f}%)")
    size = save(ensemble, args.model)
    elapsed = time.perf_counter() - started
    print(f"trained {args.models} models in {elapsed:.1f} s -> {args.model} ({size} bytes)")
    return EXIT_OK


def cmd_evaluate(args) -> int:
    _require_parent(args.pr_out)
    _require_parent(args.log_out)
    ensemble = _load_model(args.model)
    queries = _load_vectors(args.query_dir, minimum=1, what="query frames")
    mapping = _read_mapping(args.gt, len(queries)) if args.gt else None
    if mapping is None and len(queries) != ensemble.place_count:
        raise DataError(
            f"{args.query_dir}: {len(queries)} queries != {ensemble.place_count} "
            f"places; supply a --gt mapping for unaligned traversals"
        )
    if mapping is not None and max(mapping) >= ensemble.place_count:
        raise DataError(
            f"{args.gt}: reference index {max(mapping)} outside "
            f"0..{ensemble.place_count - 1}"
        )
    gt = GroundTruth(tolerance=args.tolerance, mapping=mapping)
    config = (
        f"command=evaluate model={args.model} query_dir={args.query_dir} "
        f"tolerance={args.tolerance} gt={args.gt or '-'} "
        f"pr_out={args.pr_out or '-'} log_out={args.log_out or '-'}"
    )
    print(f"# {config}")
    curve, results = evaluate(ensemble, queries, gt, workers=_workers(len(queries)))
    if args.pr_out:
        write_pr_csv(args.pr_out, curve, config)
    if args.log_out:
        write_match_csv(args.log_out, results, config)
    print(f"AUC: {curve.auc:.4f}")
    return EXIT_OK


def cmd_benchmark(args) -> int:
    ensemble = _load_model(args.model)
    if args.query_dir:
        img = _load_vectors(args.query_dir, minimum=1, what="query frames")[0]
    else:
        input_dim = ensemble.models[0].projection.input_dim
        img = np.random.default_rng(args.seed).random(input_dim)
    config = (
        f"command=benchmark model={args.model} iterations={args.iterations} "
        f"query_dir={args.query_dir or '-'} seed={args.seed}"
    )
    print(f"# {config}")
    try:
        stats = benchmark(ensemble, img, args.iterations)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    print(
        f"n={ensemble.n_models} P={ensemble.place_count}: "
        f"mean {stats.mean_ms:.3f} ms, p95 {stats.p95_ms:.3f} ms, {stats.fps:.1f} fps"
    )
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require_parent(args.out)
    ref_vectors = _load_vectors(args.ref_dir, minimum=2, what="places (decodable frames)")
    query_vectors = _load_vectors(args.query_dir, minimum=1, what="query frames")
    places = len(ref_vectors)
    mapping = _read_mapping(args.gt, len(query_vectors)) if args.gt else None
    if mapping is None and len(query_vectors) != places:
        raise DataError(
            f"{args.query_dir}: {len(query_vectors)} queries != {places} places; "
            f"supply a --gt mapping for unaligned traversals"
        )
    if mapping is not None and max(mapping) >= places:
        raise DataError(
            f"{args.gt}: reference index {max(mapping)} outside 0..{places - 1}"
        )
    gt = GroundTruth(tolerance=args.tolerance, mapping=mapping)
    models_grid = _int_list(args.models)
    activations_grid = _int_list(args.activations)
    cfg = TrainConfig(epochs=args.epochs, learning_rate=args.lr, shuffle=True, seed=args.seed)
    radius = int(args.radius_frac * places)
    config = (
        f"command=sweep ref_dir={args.ref_dir} query_dir={args.query_dir} "
        f"models={args.models} activations={args.activations} "
        f"radius_frac={args.radius_frac} tolerance={args.tolerance} "
        f"epochs={args.epochs} lr={args.lr} seed={args.seed} out={args.out}"
    )
    print(f"# {config}")
    rows = []
    cell = 0
    for n_models in models_grid:
        for n_activations in activations_grid:
            cell_seed = derive_seed(args.seed, cell)
            cell += 1
            try:
                t0 = time.perf_counter()
                ensemble = train_ensemble(
                    ref_vectors,
                    cfg,
                    n_models=n_models,
                    n_activations=n_activations,
                    master_seed=cell_seed,
                    radius=radius,
                    quantized=True,
                    workers=_workers(n_models),
                )
                train_s = time.perf_counter() - t0
                t1 = time.perf_counter()
                curve, _ = evaluate(
                    ensemble, query_vectors, gt, workers=_workers(len(query_vectors))
                )
                eval_ms = (time.perf_counter() - t1) * 1000.0
                rows.append(
                    f"{n_models},{n_activations},{curve.auc:.6f},"
                    f"{train_s:.3f},{eval_ms:.3f}"
                )
                print(f"n_models={n_models} activations={n_activations}: auc={curve.auc:.4f}")
            except Exception as exc:  # a failed cell must not kill the run
                print(
                    f"n_models={n_models} activations={n_activations} failed: {exc}",
                    file=sys.stderr,
                )
                rows.append(f"{n_models},{n_activations},nan,nan,nan")
    lines = [f"# {config}", "n_models,activations,auc,train_s,eval_ms", *rows]
    Path(args.out).write_text("\n".join(lines) + "\n", encoding="ascii")
    print(f"wrote {len(rows)} sweep rows to {args.out}")
    return EXIT_OK


def _add_common(parser, *flags):
    if "models" in flags:
        parser.add_argument("--models", type=int, default=DEFAULT_MODELS,
                            help=f"number of models to train (default {DEFAULT_MODELS})")
    if "activations" in flags:
        parser.add_argument("--activations", type=int, default=DEFAULT_ACTIVATIONS,
                            help=f"activations per model (default {DEFAULT_ACTIVATIONS})")
    if "radius" in flags:
        parser.add_argument("--radius-frac", type=float, default=DEFAULT_RADIUS_FRACTION,
                            help="voting radius as a fraction of the place count "
                                 f"(default {DEFAULT_RADIUS_FRACTION})")
    if "tolerance" in flags:
        parser.add_argument("--tolerance", type=int, default=1,
                            help="frame tolerance for a correct match (default 1)")
    if "training" in flags:
        parser.add_argument("--epochs", type=int, default=100,
                            help="training epochs (default 100)")
        parser.add_argument("--lr", type=float, default=0.01,
                            help="learning rate (default 0.01)")
    parser.add_argument("--seed", type=int, default=0, help="master seed (default 0)")


def _build_parser() -> _Parser:
    parser = _Parser(
        prog="drosonet",
        description="Compact place recognition: train, evaluate and benchmark "
                    "sparse-hashing model ensembles.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic reference/query traversal as PGM files")
    p.add_argument("--out-ref", required=True, help="output directory for reference frames")
    p.add_argument("--out-query", default=None, help="output directory for perturbed query frames")
    p.add_argument("--places", type=int, default=50, help="number of places (default 50)")
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="query Gaussian noise as a fraction of full intensity")
    p.add_argument("--brightness", type=float, default=0.0,
                   help="query brightness shift as a fraction of full intensity")
    p.add_argument("--shift-px", type=int, default=0, help="query horizontal circular shift")
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train an ensemble on a reference directory")
    p.add_argument("--ref-dir", required=True, help="directory of reference frames")
    p.add_argument("--model", required=True, help="output model file")
    _add_common(p, "models", "activations", "radius", "training")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model file on a query directory")
    p.add_argument("--model", required=True, help="model file from `train`")
    p.add_argument("--query-dir", required=True, help="directory of query frames")
    p.add_argument("--gt", default=None, help="query,reference mapping CSV (default: identity)")
    p.add_argument("--pr-out", default=None, help="write the PR curve CSV here")
    p.add_argument("--log-out", default=None, help="write the match log CSV here")
    _add_common(p, "tolerance")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="measure vote() latency on one image")
    p.add_argument("--model", required=True, help="model file from `train`")
    p.add_argument("--query-dir", default=None,
                   help="use the first frame here instead of a random image")
    p.add_argument("--iterations", type=int, default=100,
                   help="timed iterations after 3 warm-up calls (default 100)")
    _add_common(p)
    p.set_defaults(func=cmd_benchmark)

    p = sub.add_parser("sweep", help="grid-sweep model count x activations, CSV of AUC per cell")
    p.add_argument("--ref-dir", required=True, help="directory of reference frames")
    p.add_argument("--query-dir", required=True, help="directory of query frames")
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--models", default="1,8,64", help="comma list of model counts")
    p.add_argument("--activations", default="64,192", help="comma list of activation counts")
    p.add_argument("--gt", default=None, help="query,reference mapping CSV (default: identity)")
    _add_common(p, "radius", "tolerance", "training")
    p.set_defaults(func=cmd_sweep)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ModelFileError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # the CLI boundary maps everything to exit codes
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
