"""Tolerance matching, precision-recall curves, and latency measurement."""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .voting import Ensemble, vote


@dataclass(frozen=True)
class GroundTruth:
    """Query-to-reference mapping (identity by default) with a frame tolerance."""

    tolerance: int = 1
    mapping: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.tolerance < 0:
            raise ValueError("tolerance must be non-negative")
        if self.mapping is not None and any(ref < 0 for ref in self.mapping):
            raise ValueError("mapping entries must be non-negative frame indices")

    def reference_for(self, query: int) -> int:
        if self.mapping is None:
            return query
        if not 0 <= query < len(self.mapping):
            raise ValueError(f"no ground-truth mapping for query {query}")
        return self.mapping[query]


@dataclass(frozen=True)
class MatchResult:
    """One query's prediction with its fused confidence and correctness."""

    query: int
    predicted: int
    truth: int
    confidence: float
    correct: bool


@dataclass(frozen=True)
class PRCurve:
    """(recall, precision) points with recall non-decreasing, plus the AUC."""

    points: tuple[tuple[float, float], ...]
    auc: float


def match_correct(predicted: int, truth: int, tolerance: int) -> bool:
    """A prediction counts as correct within an absolute frame distance."""
    return abs(predicted - truth) <= tolerance


def _trapezoid_auc(points: Sequence[tuple[float, float]]) -> float:
    # prefix at recall 0 carries the first point's precision
    path = [(0.0, points[0][1])] + list(points)
    return math.fsum(
        (r1 - r0) * (p0 + p1) / 2.0 for (r0, p0), (r1, p1) in zip(path, path[1:])
    )


def pr_curve(results: Sequence[MatchResult]) -> PRCurve:
    """Precision-recall curve from a threshold sweep over observed confidences.

    Results are ranked by confidence (highest first, ties by query index);
    each distinct confidence contributes one point where everything at or
    above it counts as retrieved.  AUC is the trapezoidal area over the
    recall axis.
    """
    if len(results) == 0:
        raise ValueError("cannot build a PR curve from zero results")
    if any(not math.isfinite(res.confidence) for res in results):
        raise ValueError("confidences must be finite")
    ordered = sorted(results, key=lambda res: (-res.confidence, res.query))
    total = len(ordered)
    points: list[tuple[float, float]] = []
    hits = 0
    retrieved = 0
    i = 0
    while i < total:
        threshold = ordered[i].confidence
        while i < total and ordered[i].confidence == threshold:
            retrieved += 1
            hits += ordered[i].correct
            i += 1
        points.append((hits / total, hits / retrieved))
    return PRCurve(points=tuple(points), auc=_trapezoid_auc(points))


def evaluate(
    ensemble: Ensemble,
    queries: Sequence[np.ndarray],
    gt: GroundTruth,
    workers: int = 1,
) -> tuple[PRCurve, list[MatchResult]]:
    """Vote on every query; returns the PR curve and the per-query match log.

    Queries may fan out over `workers` threads; the result list is ordered
    by query index regardless, and the output is deterministic for a fixed
    ensemble and query set.
    """
    if len(queries) == 0:
        raise ValueError("no queries to evaluate")

    def run(item: tuple[int, np.ndarray]) -> MatchResult:
        index, img = item
        place, fused = vote(ensemble, img)
        truth = gt.reference_for(index)
        return MatchResult(
            query=index,
            predicted=place,
            truth=truth,
            confidence=float(np.max(fused)),
            correct=match_correct(place, truth, gt.tolerance),
        )

    items = list(enumerate(queries))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(item) for item in items]
    return pr_curve(results), results


@dataclass(frozen=True)
class BenchmarkStats:
    mean_ms: float
    p95_ms: float
    fps: float


_WARMUP_CALLS = 3


def benchmark(ensemble: Ensemble, img: np.ndarray, iterations: int) -> BenchmarkStats:
    """Wall-clock stats over repeated vote() calls, strictly single-threaded."""
    if iterations < 10:
        raise ValueError("need at least 10 iterations for stable statistics")
    for _ in range(_WARMUP_CALLS):
        vote(ensemble, img)
    times = np.empty(iterations)
    for i in range(iterations):
        start = time.perf_counter()
        vote(ensemble, img)
        times[i] = (time.perf_counter() - start) * 1000.0
    mean_ms = float(times.mean())
    return BenchmarkStats(
        mean_ms=mean_ms,
        p95_ms=float(np.percentile(times, 95.0)),
        fps=1000.0 / mean_ms,
    )


def write_pr_csv(path, curve: PRCurve, config: str | None = None) -> None:
    """PR points as CSV (`recall,precision`, 6 decimals), config echoed as comment."""
    lines = []
    if config:
        lines.append(f"# {config}")
    lines.append("recall,precision")
    lines.extend(f"{recall:.6f},{precision:.6f}" for recall, precision in curve.points)
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def write_match_csv(path, results: Sequence[MatchResult], config: str | None = None) -> None:
    """Match log as CSV (`query,predicted,truth,confidence,correct`)."""
    lines = []
    if config:
        lines.append(f"# {config}")
    lines.append("query,predicted,truth,confidence,correct")
    lines.extend(
        f"{r.query},{r.predicted},{r.truth},{r.confidence:.6f},{int(r.correct)}"
        for r in results
    )
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")
