"""Cost accounting and proxy-quality measurements.

FLOP convention: a multiply-accumulate is 2 FLOPs, biases and activations are
free, backward costs twice the forward pass, so one training epoch costs
3x forward per sample.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import PreconditionError, ShapeError, ValidationError
from .net import NetworkSpec, Parameters, evaluate, forward, log_softmax

COUNTERS = (
    "selector_training_flops",
    "scoring_flops",
    "target_training_flops",
    "fusion_ops",
    "pruning_ops",
)
_ALIASES = {
    "selector_training": "selector_training_flops",
    "scoring": "scoring_flops",
    "target_training": "target_training_flops",
    "fusion": "fusion_ops",
    "pruning": "pruning_ops",
}


def count_forward_flops(spec: NetworkSpec) -> int:
    """Forward FLOPs per sample: 2 * sum_j d_j * d_{j-1}."""
    w = spec.layer_widths
    return 2 * sum(w[j] * w[j - 1] for j in range(1, len(w)))


def count_training_flops(spec: NetworkSpec, samples: int, epochs: int) -> int:
    return 3 * count_forward_flops(spec) * samples * epochs


@dataclass
class CostLedger:
    """Monotone integer counters with per-round snapshots of the increments."""

    totals: dict[str, int] = field(default_factory=lambda: {k: 0 for k in COUNTERS})
    snapshots: list[dict[str, int]] = field(default_factory=list)
    _round: dict[str, int] = field(default_factory=lambda: {k: 0 for k in COUNTERS})

    def charge(self, counter: str, amount: int) -> None:
        key = _ALIASES.get(counter, counter)
        if key not in self.totals:
            raise ValidationError(f"unknown cost counter {counter!r}")
        amount = int(amount)
        if amount < 0:
            raise ValidationError("cost charges must be nonnegative")
        self.totals[key] += amount
        self._round[key] += amount

    def close_round(self) -> dict[str, int]:
        """Freeze the increments accumulated since the previous call."""
        snap = dict(self._round)
        self.snapshots.append(snap)
        self._round = {k: 0 for k in COUNTERS}
        return snap

    def snapshot_sum(self) -> dict[str, int]:
        out = {k: 0 for k in COUNTERS}
        for snap in self.snapshots:
            for k, v in snap.items():
                out[k] += v
        for k, v in self._round.items():
            out[k] += v
        return out

    def selector_total(self) -> int:
        return self.totals["selector_training_flops"] + self.totals["scoring_flops"]


@dataclass
class GapRecord:
    round: int
    rep_gap: float = math.nan
    rho_t: float = math.nan
    delta_sync: float = math.nan
    delta_fresh: float = math.nan


def _per_sample_ce(params: Parameters, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    logits = forward(params, x)[0].astype(np.float64)
    return -log_softmax(logits)[np.arange(len(y)), np.asarray(y, dtype=np.int64)]


def representativeness_gap(
    params: Parameters, subset_indices, x: np.ndarray, y: np.ndarray
) -> float:
    """|mean CE on the subset - mean CE on the whole dataset| under ``params``."""
    idx = np.asarray(subset_indices, dtype=np.int64)
    if idx.size == 0:
        raise PreconditionError("representativeness gap needs a non-empty subset")
    losses = _per_sample_ce(params, x, y)
    return float(abs(losses[idx].mean() - losses.mean()))


def embed_pruned(pruned: Parameters, mask, dense_spec: NetworkSpec) -> Parameters:
    """Place pruned tensors at their I_j x I_{j-1} coordinates of zero dense tensors."""
    sets = mask.index_sets(dense_spec)
    w_out, b_out = [], []
    for j in range(dense_spec.num_layers):
        rows, cols = sets[j + 1], sets[j]
        pw, pb = pruned.weights[j], pruned.biases[j]
        if pw.shape != (len(rows), len(cols)):
            raise ShapeError(
                f"layer {j + 1}: pruned weight {pw.shape} does not match mask ({len(rows)}, {len(cols)})"
            )
        w = np.zeros((dense_spec.layer_widths[j + 1], dense_spec.layer_widths[j]), dtype=np.float64)
        b = np.zeros(dense_spec.layer_widths[j + 1], dtype=np.float64)
        w[np.ix_(rows, cols)] = pw
        b[rows] = pb
        w_out.append(w)
        b_out.append(b)
    return Parameters(w_out, b_out)


def proxy_distance(theta_t: Parameters, theta_p_t: Parameters, mask) -> float:
    """L2 norm over all parameters of embed(theta_p_t) - theta_t."""
    dense = theta_t.astype(np.float64)
    emb = embed_pruned(theta_p_t, mask, theta_t.spec)
    diff = emb.flatten() - dense.flatten()
    return float(np.sqrt(np.dot(diff, diff)))


def alignment_gaps(
    target: Parameters,
    sync_proxy: Parameters,
    fresh_proxy: Parameters,
    x_val: np.ndarray,
    y_val: np.ndarray,
) -> tuple[float, float]:
    """(|Acc(target) - Acc(sync)|, |Acc(target) - Acc(fresh)|) on a validation set."""
    if len(y_val) == 0:
        raise PreconditionError("alignment gaps need a non-empty validation set")
    acc_t = evaluate(target, x_val, y_val)[0]
    acc_s = evaluate(sync_proxy, x_val, y_val)[0]
    acc_f = evaluate(fresh_proxy, x_val, y_val)[0]
    return abs(acc_t - acc_s), abs(acc_t - acc_f)


def epochs_to_fraction(curve, fraction: float = 0.95) -> int:
    """First epoch index whose value reaches ``fraction`` of the curve's final value."""
    curve = list(curve)
    if not curve:
        raise PreconditionError("empty curve")
    target = fraction * curve[-1]
    for e, v in enumerate(curve):
        if v >= target:
            return e
    return len(curve) - 1


def cumulative_selection_cost(round_log, n_pool: int | None = None) -> list[dict]:
    """Running selector cost (training + scoring) at each achieved budget level.

    Rows: budget_pct, labeled_count, selector_flops, target_flops, accuracy.
    ``accuracy`` is the target-model accuracy at that level when recorded,
    NaN otherwise.
    """
    rows, sel, tgt = [], 0, 0
    for rec in round_log:
        sel += rec.selector_train_flops + rec.scoring_flops
        tgt += rec.target_train_flops
        pct = 100.0 * rec.labeled_count / n_pool if n_pool else math.nan
        rows.append(
            {
                "budget_pct": pct,
                "labeled_count": rec.labeled_count,
                "selector_flops": sel,
                "target_flops": tgt,
                "accuracy": rec.target_acc,
            }
        )
    return rows
