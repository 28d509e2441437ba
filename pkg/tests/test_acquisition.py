import csv
import math

import numpy as np
import pytest

from prunefuse import _kernels as K
from prunefuse.acquisition import (
    coverage_radius,
    greedy_k_centers,
    score_entropy,
    score_least_confidence,
    select_random,
    select_top_k,
    write_scores_csv,
)
from prunefuse.errors import PreconditionError, ValidationError


def brute_k_centers(u, lab, k):
    """Quadratic reference: recompute every distance from scratch each step.

    Ties go to the lowest index; with no labeled set, index 0 seeds.
    """
    n = len(u)
    centers = [] if lab is None else [tuple(c) for c in lab]
    chosen = []
    if not centers:
        chosen.append(0)
        centers.append(tuple(u[0]))
    while len(chosen) < min(k, n):
        best, best_d = -1, -1.0
        for i in range(n):
            if i in chosen:
                continue
            d = min(sum((a - b) ** 2 for a, b in zip(u[i], c)) for c in centers)
            if d > best_d:
                best, best_d = i, d
        chosen.append(best)
        centers.append(tuple(u[best]))
    return chosen


def test_lc_examples():
    assert score_least_confidence(np.array([[0, 1.0, 0]])).scores[0] == 0
    assert score_least_confidence(np.full((1, 5), 0.2)).scores[0] == pytest.approx(0.8, abs=1e-12)
    assert score_least_confidence(np.array([[0.7, 0.2, 0.1]])).scores[0] == pytest.approx(0.3, abs=1e-12)


def test_entropy_examples():
    assert score_entropy(np.array([[0, 0, 1.0]])).scores[0] == 0
    assert score_entropy(np.full((1, 4), 0.25)).scores[0] == pytest.approx(math.log(4), abs=1e-12)
    assert score_entropy(np.array([[0.5, 0.5, 0, 0]])).scores[0] == pytest.approx(math.log(2), abs=1e-12)


def test_score_validation():
    with pytest.raises(ValidationError):
        score_least_confidence(np.array([[0.5, 0.6]]))
    with pytest.raises(ValidationError):
        score_entropy(np.array([[1.2, -0.2]]))


def test_top_k_examples(rng):
    assert select_top_k(np.array([5.0, 1, 5, 0]), 2).indices.tolist() == [0, 2]
    assert select_top_k(np.array([1.0, 2.0]), 0).indices.size == 0
    s = rng.standard_normal(1000)
    ref = sorted(range(1000), key=lambda i: (-s[i], i))[:100]
    assert select_top_k(s, 100).indices.tolist() == ref


def test_k_centers_hand_example():
    u = np.array([[1.0], [2.0], [3.0], [10.0]])
    sel = greedy_k_centers(u, np.array([[0.0]]), 2)
    assert u[sel.indices, 0].tolist() == [10.0, 3.0]


def test_k_centers_exhaustion(rng):
    u = rng.standard_normal((7, 3))
    sel = greedy_k_centers(u, rng.standard_normal((2, 3)), 7)
    assert sorted(sel.indices.tolist()) == list(range(7))


def test_k_centers_empty_pool():
    with pytest.raises(PreconditionError):
        greedy_k_centers(np.zeros((0, 2)), None, 1)


@pytest.mark.parametrize("seed", range(10))
def test_k_centers_brute_force(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 51))
    u = rng.integers(-3, 4, (n, 2)).astype(float)  # small ints force ties
    lab = rng.integers(-3, 4, (int(rng.integers(0, 4)), 2)).astype(float)
    k = int(rng.integers(1, 11))
    lab_arg = lab if len(lab) else None
    assert greedy_k_centers(u, lab_arg, k).indices.tolist() == brute_k_centers(u, lab_arg, k)


def test_kernel_paths_agree(rng):
    pts = rng.standard_normal((300, 8))
    a, b = np.full(300, np.inf), np.full(300, np.inf)
    taken = np.zeros(300, dtype=bool)
    taken[[3, 9]] = True
    i1 = K.update_and_argmax_nb(pts, pts[3], a, taken)
    i2 = K.update_and_argmax_np(pts, pts[3], b, taken)
    assert i1 == i2 and np.array_equal(a, b)
    c1, c2 = np.full(300, np.inf), np.full(300, np.inf)
    K.min_sqdist_to_set_nb(pts, pts[:5], c1)
    K.min_sqdist_to_set_np(pts, pts[:5], c2)
    assert np.array_equal(c1, c2)


def test_coverage_radius_shrinks_with_k(rng):
    u = rng.standard_normal((200, 2))
    r = [coverage_radius(u, u[greedy_k_centers(u, None, k).indices]) for k in (1, 5, 20)]
    assert r[0] >= r[1] >= r[2]


def test_select_random():
    assert sorted(select_random(10, 10, 3).indices.tolist()) == list(range(10))
    assert select_random(10, 0, 3).indices.size == 0
    assert select_random(10, 3, 5).indices.tolist() == select_random(10, 3, 5).indices.tolist()
    with pytest.raises(ValidationError):
        select_random(3, 4, 0)


def test_scores_csv(tmp_path):
    sv = score_entropy(np.array([[0.5, 0.5], [1.0, 0.0]]))
    write_scores_csv(tmp_path / "s.csv", sv, [7, 9])
    rows = list(csv.DictReader(open(tmp_path / "s.csv")))
    assert [r["pool_index"] for r in rows] == ["7", "9"]
    assert float(rows[0]["score"]) == sv.scores[0] and rows[0]["metric"] == "entropy"
