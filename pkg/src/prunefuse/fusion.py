"""Weight-aligned fusion of a trained pruned network into its dense parent.

The trained sub-tensor lands on the I_j x I_{j-1} coordinates it was cut
from; every other coordinate is filled by a complement policy.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ShapeError, ValidationError
from .net import Parameters, init_network
from .pruning import PruneMask
from .rng import Xoshiro256

POLICIES = ("retain-init", "zero", "random-reinit")


@dataclass(frozen=True)
class ComplementPolicy:
    kind: str = "random-reinit"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in POLICIES:
            raise ValidationError(f"unknown complement policy {self.kind!r}; expected one of {POLICIES}")


@dataclass
class LayerFusion:
    layer: int
    copied: int
    complement: int
    max_deviation: float


@dataclass
class FusionReport:
    layers: list[LayerFusion] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(r.max_deviation == 0.0 for r in self.layers)

    def flagged(self) -> list[int]:
        return [r.layer for r in self.layers if r.max_deviation != 0.0]

    def write_csv(self, path: str | Path) -> None:
        from .io import atomic_writer

        with atomic_writer(path) as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["layer", "copied", "complement", "max_deviation"])
            for r in self.layers:
                w.writerow([r.layer, r.copied, r.complement, repr(r.max_deviation)])


def _complement_source(dense_init: Parameters, policy: ComplementPolicy) -> Parameters:
    if policy.kind == "retain-init":
        return dense_init
    if policy.kind == "zero":
        return dense_init.zeros_like()
    return init_network(dense_init.spec, policy.seed, dtype=dense_init.dtype)


def fuse_model(
    dense_init: Parameters,
    pruned_trained: Parameters,
    mask: PruneMask,
    policy: ComplementPolicy | str = "random-reinit",
) -> tuple[Parameters, FusionReport]:
    """Copy ``pruned_trained`` into the masked coordinates of a dense model.

    Hidden layers copy W[I_j x I_{j-1}] and b[I_j]; the output layer keeps every
    row and aligns on the columns I_{L-1}. Complement coordinates (weights and
    biases alike) come from ``policy``.
    """
    if isinstance(policy, str):
        policy = ComplementPolicy(policy)
    spec = dense_init.spec
    try:
        sets = mask.index_sets(spec)
    except ValidationError as exc:
        raise ValidationError(f"mask does not fit the dense network: {exc}") from exc
    expected = mask.pruned_spec(spec)
    if pruned_trained.spec != expected:
        raise ValidationError(
            f"pruned network {pruned_trained.spec.layer_widths} does not match "
            f"mask-implied widths {expected.layer_widths}"
        )
    source = _complement_source(dense_init, policy)
    weights, biases = [], []
    for j in range(spec.num_layers):
        rows, cols = sets[j + 1], sets[j]
        w = source.weights[j].astype(dense_init.dtype, copy=True)
        b = source.biases[j].astype(dense_init.dtype, copy=True)
        w[np.ix_(rows, cols)] = pruned_trained.weights[j]
        b[rows] = pruned_trained.biases[j]
        weights.append(w)
        biases.append(b)
    fused = Parameters(weights, biases)
    return fused, verify_alignment(fused, pruned_trained, mask)


def verify_alignment(fused: Parameters, pruned: Parameters, mask: PruneMask) -> FusionReport:
    """Per-layer audit of the copy contract; deviation is 0 iff the copy is exact."""
    sets = mask.index_sets(fused.spec)
    report = FusionReport()
    for j in range(fused.num_layers):
        rows, cols = sets[j + 1], sets[j]
        sub_w = fused.weights[j][np.ix_(rows, cols)]
        sub_b = fused.biases[j][rows]
        if sub_w.shape != pruned.weights[j].shape:
            raise ShapeError(f"layer {j + 1}: pruned {pruned.weights[j].shape} vs slot {sub_w.shape}")
        dev = max(
            float(np.abs(sub_w.astype(np.float64) - pruned.weights[j]).max(initial=0.0)),
            float(np.abs(sub_b.astype(np.float64) - pruned.biases[j]).max(initial=0.0)),
        )
        size = fused.weights[j].size + fused.biases[j].size
        copied = sub_w.size + sub_b.size
        report.layers.append(LayerFusion(j + 1, copied, size - copied, dev))
    return report


def fuse_conv_tensor(
    dense_init: np.ndarray,
    pruned: np.ndarray,
    out_idx,
    in_idx,
    policy: ComplementPolicy | str = "retain-init",
) -> np.ndarray:
    """Conv-weight fusion as array algebra (no convolution is executed).

    ``dense_init`` is C_out x C_in x k_h x k_w; ``pruned`` is
    |out_idx| x |in_idx| x k_h x k_w. The copied block receives ``pruned``; the
    kept rows' complement input channels and all dropped rows follow the
    policy. Random re-init draws U(-sqrt(1/fan_in), +sqrt(1/fan_in)) with
    fan_in = C_in * k_h * k_w.
    """
    if isinstance(policy, str):
        policy = ComplementPolicy(policy)
    dense_init = np.asarray(dense_init)
    pruned = np.asarray(pruned)
    out_idx = np.asarray(out_idx, dtype=np.int64)
    in_idx = np.asarray(in_idx, dtype=np.int64)
    if dense_init.ndim != 4 or pruned.ndim != 4:
        raise ShapeError("conv fusion expects 4-D tensors")
    c_out, c_in, kh, kw = dense_init.shape
    if pruned.shape != (len(out_idx), len(in_idx), kh, kw):
        raise ShapeError(
            f"pruned tensor {pruned.shape} does not match ({len(out_idx)}, {len(in_idx)}, {kh}, {kw})"
        )
    for name, idx, bound in (("output", out_idx, c_out), ("input", in_idx, c_in)):
        if idx.size and (idx.min() < 0 or idx.max() >= bound):
            raise ValidationError(f"{name} channel index out of bounds for size {bound}")
        if len(np.unique(idx)) != len(idx):
            raise ValidationError(f"{name} channel indices must be unique")

    if policy.kind == "retain-init":
        fused = dense_init.copy()
    elif policy.kind == "zero":
        fused = np.zeros_like(dense_init)
    else:
        bound = math.sqrt(1.0 / (c_in * kh * kw))
        draw = Xoshiro256(policy.seed).uniform(-bound, bound, dense_init.size)
        fused = draw.reshape(dense_init.shape).astype(dense_init.dtype)
    fused[np.ix_(out_idx, in_idx)] = pruned
    return fused
