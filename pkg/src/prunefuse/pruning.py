"""Structured channel pruning at initialization.

Hidden units of an MLP play the role of channels. A unit is scored by the L2
norm of its incoming weight row, a mask keeps the top-scoring units per layer
(or globally), and :func:`extract_pruned` slices out the subnetwork with its
weights retained.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import TYPE_CHECKING

import numpy as np

from .errors import FormatError, ValidationError
from .net import (
    NetworkSpec,
    Parameters,
    TrainHistory,
    TrainSchedule,
    evaluate,
    run_epochs,
)

if TYPE_CHECKING:
    from .diagnostics import CostLedger


@dataclass
class PruneMask:
    """Kept unit indices per hidden layer (strictly increasing), plus the requested ratio.

    Input and output layers are implicitly kept in full.
    """

    kept: list[np.ndarray]
    p: float = 0.0

    def __post_init__(self):
        self.kept = [np.asarray(k, dtype=np.int64) for k in self.kept]
        for j, k in enumerate(self.kept, start=1):
            if k.ndim != 1 or k.size == 0:
                raise ValidationError(f"hidden layer {j}: kept set must be a non-empty 1-D list")
            if k.size > 1 and not np.all(np.diff(k) > 0):
                raise ValidationError(f"hidden layer {j}: kept indices must be strictly increasing")

    @classmethod
    def full(cls, spec: NetworkSpec) -> "PruneMask":
        return cls([np.arange(d) for d in spec.hidden_widths], 0.0)

    def index_sets(self, spec: NetworkSpec) -> list[np.ndarray]:
        """[I_0, I_1, ..., I_L] including the implied full input/output sets."""
        self.check(spec)
        return [np.arange(spec.in_features)] + list(self.kept) + [np.arange(spec.num_classes)]

    def pruned_spec(self, spec: NetworkSpec) -> NetworkSpec:
        self.check(spec)
        return NetworkSpec((spec.in_features, *(len(k) for k in self.kept), spec.num_classes))

    def check(self, spec: NetworkSpec) -> None:
        hidden = spec.hidden_widths
        if len(self.kept) != len(hidden):
            raise ValidationError(
                f"mask has {len(self.kept)} hidden layers, network has {len(hidden)}"
            )
        for j, (k, d) in enumerate(zip(self.kept, hidden), start=1):
            if k[0] < 0 or k[-1] >= d:
                raise ValidationError(f"hidden layer {j}: index out of bounds for width {d}")

    def compose(self, inner: "PruneMask") -> "PruneMask":
        """Mask of ``inner`` (relative to this mask's kept sets) expressed in original coordinates."""
        if len(inner.kept) != len(self.kept):
            raise ValidationError("cannot compose masks with different depth")
        return PruneMask([outer[k] for outer, k in zip(self.kept, inner.kept)], inner.p)

    def equals(self, other: "PruneMask") -> bool:
        return len(self.kept) == len(other.kept) and all(
            np.array_equal(a, b) for a, b in zip(self.kept, other.kept)
        )

    def to_json(self) -> str:
        return json.dumps({"p": self.p, "kept": [k.tolist() for k in self.kept]})

    @classmethod
    def from_json(cls, text: str) -> "PruneMask":
        try:
            doc = json.loads(text)
            return cls([np.asarray(k, dtype=np.int64) for k in doc["kept"]], float(doc["p"]))
        except (KeyError, TypeError, json.JSONDecodeError) as exc:
            raise FormatError(f"malformed mask document: {exc}") from exc

    def save(self, path: str | Path) -> None:
        from .io import atomic_write_text

        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path: str | Path) -> "PruneMask":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def score_channels(params: Parameters) -> list[np.ndarray]:
    """L2 norm of each hidden unit's incoming weight row; the output layer is not scored."""
    return [np.sqrt((w.astype(np.float64) ** 2).sum(axis=1)) for w in params.weights[:-1]]


def _top_k(scores: np.ndarray, k: int) -> np.ndarray:
    # stable sort on -score: equal scores keep ascending index order
    order = np.argsort(-scores, kind="stable")
    return np.sort(order[:k])


def keep_count(width: int, p: float) -> int:
    """ceil((1 - p) * width) with a guard against float noise, at least 1."""
    raw = (1.0 - p) * width
    k = math.ceil(raw - 1e-9 * max(1.0, raw))
    return min(width, max(1, k))


def build_mask(scores: list[np.ndarray], p: float, mode: str = "per-layer") -> PruneMask:
    """Keep the highest-scoring units at sparsity ``p``; ties favour the lower index."""
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"pruning ratio must lie in [0, 1), got {p}")
    scores = [np.asarray(s, dtype=np.float64) for s in scores]
    if mode == "per-layer":
        return PruneMask([_top_k(s, keep_count(len(s), p)) for s in scores], p)
    if mode != "global":
        raise ValidationError(f"unknown mask mode {mode!r}")

    # Each layer's top unit is reserved so no layer empties; the remaining
    # budget is filled from the joint ranking (score desc, then layer/index asc).
    total = sum(len(s) for s in scores)
    budget = max(len(scores), total - math.floor(p * total + 1e-9))
    offsets = np.cumsum([0] + [len(s) for s in scores])
    flat = np.concatenate(scores)
    keep_flat = np.zeros(total, dtype=bool)
    for j, s in enumerate(scores):
        keep_flat[offsets[j] + _top_k(s, 1)[0]] = True
    remaining = budget - len(scores)
    for i in np.argsort(-flat, kind="stable"):
        if remaining <= 0:
            break
        if not keep_flat[i]:
            keep_flat[i] = True
            remaining -= 1
    kept = [np.flatnonzero(keep_flat[offsets[j] : offsets[j + 1]]) for j in range(len(scores))]
    return PruneMask(kept, p)


def extract_pruned(params: Parameters, mask: PruneMask) -> tuple[NetworkSpec, Parameters]:
    """Slice W[I_j x I_{j-1}] and b[I_j] out of every layer; no re-initialization."""
    spec = params.spec
    sets = mask.index_sets(spec)
    weights = [w[np.ix_(sets[j + 1], sets[j])].copy() for j, w in enumerate(params.weights)]
    biases = [b[sets[j + 1]].copy() for j, b in enumerate(params.biases)]
    return mask.pruned_spec(spec), Parameters(weights, biases)


def mask_sparsity(mask: PruneMask, spec: NetworkSpec) -> float:
    """1 - (kept hidden units) / (total hidden units)."""
    mask.check(spec)
    total = sum(spec.hidden_widths)
    if total == 0:
        return 0.0
    return 1.0 - sum(len(k) for k in mask.kept) / total


def prune(params: Parameters, p: float, mode: str = "per-layer") -> tuple[PruneMask, Parameters]:
    """Score, mask and extract in one call."""
    mask = build_mask(score_channels(params), p, mode)
    return mask, extract_pruned(params, mask)[1]


def pruning_cost(spec: NetworkSpec) -> int:
    """Operation count charged for one scoring + ranking pass (norms plus an n log n sort)."""
    w = spec.layer_widths
    norms = sum(w[j] * w[j - 1] for j in range(1, len(w) - 1))
    sorts = sum(math.ceil(d * math.log2(d)) if d > 1 else 1 for d in spec.hidden_widths)
    return norms + sorts


@dataclass
class DynamicPruneResult:
    spec: NetworkSpec
    params: Parameters
    mask: PruneMask
    width_history: list[tuple[int, ...]] = field(default_factory=list)
    history: TrainHistory = field(default_factory=TrainHistory)


def prune_dynamic(
    init: Parameters,
    p: float,
    x: np.ndarray,
    y: np.ndarray,
    schedule: TrainSchedule,
    steps: int = 5,
    warmup_epochs: int = 20,
    mode: str = "per-layer",
    ledger: "CostLedger | None" = None,
) -> DynamicPruneResult:
    """Interleave training with ``steps`` pruning events spread over ``warmup_epochs``.

    Event s (s = 1..steps) fires before epoch ``floor((s - 1) * warmup / steps)``
    and shrinks every hidden layer to ``keep_count(d, p_s)`` with
    ``p_s = 1 - (1 - p) ** (s / steps)``, so each event removes the same
    fraction of the surviving units and the last one lands on ``p``. The rest of
    the schedule trains the final subnetwork. Momentum buffers are sliced along
    with the weights.
    """
    if not 0.0 <= p < 1.0:
        raise ValidationError(f"pruning ratio must lie in [0, 1), got {p}")
    if steps < 1:
        raise ValidationError("steps must be >= 1")
    if warmup_epochs and warmup_epochs < steps:
        raise ValidationError("warmup_epochs must be 0 or >= steps")
    if warmup_epochs > schedule.total_epochs:
        raise ValidationError("warmup_epochs exceeds the schedule length")
    x = np.asarray(x)
    y = np.asarray(y, dtype=np.int64)
    dense_spec = init.spec
    events = {}
    for s in range(1, steps + 1):
        events.setdefault((s - 1) * warmup_epochs // steps, []).append(s)

    params, velocity = init.copy(), init.zeros_like()
    mask = PruneMask.full(dense_spec)
    widths = [dense_spec.hidden_widths]
    history = TrainHistory()
    for e in range(schedule.total_epochs + 1):
        for s in events.get(e, []):
            p_s = 1.0 - (1.0 - p) ** (s / steps) if s < steps else p
            targets = [keep_count(d, p_s) for d in dense_spec.hidden_widths]
            scores = score_channels(params)
            inner = PruneMask(
                [_top_k(sc, min(t, len(sc))) for sc, t in zip(scores, targets)], p_s
            )
            _, params = extract_pruned(params, inner)
            _, velocity = extract_pruned(velocity, inner)
            mask = mask.compose(inner)
            widths.append(params.spec.hidden_widths)
            if ledger is not None:
                ledger.charge("pruning_ops", pruning_cost(params.spec))
        if e == schedule.total_epochs:
            break
        params, velocity = run_epochs(
            params, velocity, x, y, schedule, [e], None, history, ledger, "selector_training"
        )
    mask.p = p
    if schedule.total_epochs:
        acc, loss = evaluate(params, x, y)
        history.final = {"train_accuracy": acc, "train_loss": loss}
    return DynamicPruneResult(params.spec, params, mask, widths, history)
