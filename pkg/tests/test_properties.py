"""Property-based checks over randomly drawn shapes, masks and scores."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from prunefuse.acquisition import greedy_k_centers, score_entropy, score_least_confidence, select_top_k
from prunefuse.fusion import ComplementPolicy, fuse_model
from prunefuse.io import checkpoint_bytes, parse_checkpoint
from prunefuse.net import NetworkSpec, forward, init_network, softmax
from prunefuse.pruning import PruneMask, build_mask, extract_pruned, mask_sparsity, score_channels

widths_st = st.lists(st.integers(1, 12), min_size=1, max_size=3)


@settings(max_examples=60, deadline=None)
@given(widths=widths_st, p=st.floats(0, 0.95), seed=st.integers(0, 2**32), mode=st.sampled_from(["per-layer", "global"]))
def test_mask_invariants(widths, p, seed, mode):
    spec = NetworkSpec((3, *widths, 2))
    params = init_network(spec, seed, dtype=np.float64)
    mask = build_mask(score_channels(params), p, mode)
    mask.check(spec)
    assert all(1 <= len(k) <= d for k, d in zip(mask.kept, widths))
    assert 0.0 <= mask_sparsity(mask, spec) < 1.0
    if mode == "per-layer":
        assert mask_sparsity(mask, spec) <= p + 1e-12


@settings(max_examples=40, deadline=None)
@given(widths=widths_st, p=st.floats(0, 0.9), seed=st.integers(0, 2**32),
       policy=st.sampled_from(["retain-init", "zero", "random-reinit"]))
def test_fuse_then_extract_recovers_pruned(widths, p, seed, policy):
    spec = NetworkSpec((4, *widths, 3))
    dense = init_network(spec, seed)
    trained = init_network(spec, seed + 1)
    mask = build_mask(score_channels(trained), p)
    _, pruned = extract_pruned(trained, mask)
    fused, report = fuse_model(dense, pruned, mask, ComplementPolicy(policy, seed))
    assert report.ok
    assert extract_pruned(fused, mask)[1].equals(pruned)


@settings(max_examples=40, deadline=None)
@given(widths=widths_st, seed=st.integers(0, 2**32))
def test_checkpoint_roundtrip(widths, seed):
    p = init_network(NetworkSpec((2, *widths, 2)), seed)
    assert parse_checkpoint(checkpoint_bytes(p)).equals(p)


@settings(max_examples=60, deadline=None)
@given(logits=st.lists(st.lists(st.floats(-50, 50), min_size=2, max_size=6), min_size=1, max_size=5)
       .filter(lambda rows: len({len(r) for r in rows}) == 1))
def test_score_bounds(logits):
    probs = softmax(np.array(logits))
    c = probs.shape[1]
    lc = score_least_confidence(probs).scores
    h = score_entropy(probs).scores
    assert np.all(lc >= -1e-12) and np.all(lc <= 1 - 1 / c + 1e-12)
    assert np.all(h >= -1e-12) and np.all(h <= np.log(c) + 1e-9)


@settings(max_examples=60, deadline=None)
@given(scores=st.lists(st.integers(-5, 5), min_size=1, max_size=40), k=st.integers(0, 40))
def test_top_k_is_sorted_prefix(scores, k):
    s = np.array(scores, dtype=float)
    got = select_top_k(s, k).indices.tolist()
    assert got == sorted(range(len(s)), key=lambda i: (-s[i], i))[:k]


@settings(max_examples=40, deadline=None)
@given(n=st.integers(1, 40), k=st.integers(1, 40), seed=st.integers(0, 1000))
def test_k_centers_distinct(n, k, seed):
    u = np.random.default_rng(seed).standard_normal((n, 3))
    got = greedy_k_centers(u, None, k).indices
    assert len(got) == min(n, k) == len(set(got.tolist()))


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32), n=st.integers(1, 20))
def test_forward_is_row_independent(seed, n):
    p = init_network(NetworkSpec((3, 5, 2)), seed, dtype=np.float64)
    x = np.random.default_rng(seed % 1000).standard_normal((n, 3))
    full = forward(p, x)[0]
    rows = np.vstack([forward(p, x[i : i + 1])[0] for i in range(n)])
    assert np.allclose(full, rows, atol=1e-12)


def test_full_mask_is_identity():
    spec = NetworkSpec((3, 4, 5, 2))
    p = init_network(spec, 0)
    assert extract_pruned(p, PruneMask.full(spec))[1].equals(p)
