"""Pool scoring and batch selection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import _kernels
from .errors import PreconditionError, ShapeError, ValidationError
from .rng import Xoshiro256

ACQUISITIONS = ("lc", "entropy", "kcenters", "random")


@dataclass
class ScoreVector:
    scores: np.ndarray
    metric: str


@dataclass
class SelectionResult:
    indices: np.ndarray
    metric: str
    scoring_flops: int = 0
    extra: dict = field(default_factory=dict)


def _check_stochastic(probs: np.ndarray, tol: float = 1e-6) -> np.ndarray:
    p = np.asarray(probs, dtype=np.float64)
    if p.ndim != 2:
        raise ShapeError(f"expected an (n, C) probability matrix, got shape {p.shape}")
    if p.size and (p < 0).any():
        row = int(np.argwhere(p < 0)[0, 0])
        raise ValidationError(f"row {row} has a negative probability")
    sums = p.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise ValidationError(f"row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
    return p


def score_least_confidence(probs: np.ndarray) -> ScoreVector:
    """1 - max class probability per row."""
    p = _check_stochastic(probs)
    return ScoreVector(1.0 - p.max(axis=1), "lc")


def score_entropy(probs: np.ndarray) -> ScoreVector:
    """Natural-log entropy per row, with 0 log 0 = 0."""
    p = _check_stochastic(probs)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0)
    return ScoreVector(-terms.sum(axis=1) + 0.0, "entropy")


def select_top_k(scores: ScoreVector | np.ndarray, k: int) -> SelectionResult:
    """Indices of the k largest scores, ties to the lower index, in rank order."""
    if k < 0:
        raise ValidationError("k must be >= 0")
    metric = scores.metric if isinstance(scores, ScoreVector) else "score"
    s = np.asarray(scores.scores if isinstance(scores, ScoreVector) else scores, dtype=np.float64)
    if not np.isfinite(s).all():
        raise ValidationError("scores must be finite")
    order = np.argsort(-s, kind="stable")
    return SelectionResult(order[: min(k, s.size)].astype(np.int64), metric)


def greedy_k_centers(
    unlabeled: np.ndarray, labeled: np.ndarray | None, k: int
) -> SelectionResult:
    """Farthest-point selection under Euclidean distance.

    All labeled points start as centers. With no labeled points the
    lowest-index unlabeled point seeds the set and counts toward ``k``.
    Returned indices are into ``unlabeled``, in selection order.
    """
    u = np.ascontiguousarray(unlabeled, dtype=np.float64)
    if u.ndim != 2 or u.shape[0] == 0:
        raise PreconditionError("greedy k-centers needs a non-empty 2-D unlabeled pool")
    if k < 1:
        raise ValidationError("k must be >= 1")
    lab = None if labeled is None else np.ascontiguousarray(labeled, dtype=np.float64)
    if lab is not None and lab.size and (lab.ndim != 2 or lab.shape[1] != u.shape[1]):
        raise ShapeError(f"embedding dims differ: unlabeled {u.shape}, labeled {lab.shape}")
    n = u.shape[0]
    k = min(k, n)
    mind = np.full(n, np.inf)
    taken = np.zeros(n, dtype=np.bool_)
    chosen: list[int] = []
    if lab is not None and lab.shape[0] > 0:
        _kernels.min_sqdist_to_set(u, lab, mind)
        nxt = int(np.argmax(mind))  # farthest from the labeled set
    else:
        nxt = 0
    while len(chosen) < k:
        chosen.append(nxt)
        taken[nxt] = True
        if len(chosen) == k:
            break
        nxt = int(_kernels.update_and_argmax(u, u[nxt], mind, taken))
    return SelectionResult(np.asarray(chosen, dtype=np.int64), "kcenters")


def coverage_radius(points: np.ndarray, centers: np.ndarray) -> float:
    """max over points of the distance to the nearest center."""
    mind = np.full(points.shape[0], np.inf)
    _kernels.min_sqdist_to_set(
        np.ascontiguousarray(points, dtype=np.float64),
        np.ascontiguousarray(centers, dtype=np.float64),
        mind,
    )
    return float(np.sqrt(mind.max()))


def select_random(pool_size: int, k: int, seed: int) -> SelectionResult:
    """Uniform sample without replacement (seeded partial Fisher-Yates)."""
    if k < 0 or k > pool_size:
        raise ValidationError(f"cannot draw {k} samples from a pool of {pool_size}")
    return SelectionResult(Xoshiro256(seed).sample(pool_size, k), "random")


def write_scores_csv(path: str | Path, scores: ScoreVector, pool_indices=None) -> None:
    from .io import atomic_writer

    idx = np.arange(len(scores.scores)) if pool_indices is None else np.asarray(pool_indices)
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["pool_index", "score", "metric"])
        for i, s in zip(idx, scores.scores):
            w.writerow([int(i), repr(float(s)), scores.metric])
