"""Fully-connected ReLU classifier: init, forward, exact backprop, SGD training."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .errors import PreconditionError, ShapeError, ValidationError
from .rng import Xoshiro256, derive_seed

if TYPE_CHECKING:
    from .diagnostics import CostLedger


@dataclass(frozen=True)
class NetworkSpec:
    """Layer widths ``[d0, d1, ..., dL]``; ReLU on hidden layers, identity on the output."""

    layer_widths: tuple[int, ...]

    def __post_init__(self):
        widths = tuple(int(w) for w in self.layer_widths)
        if len(widths) < 2:
            raise ValidationError(f"need at least 2 widths, got {widths}")
        if any(w < 1 for w in widths):
            raise ValidationError(f"every width must be >= 1, got {widths}")
        object.__setattr__(self, "layer_widths", widths)

    @property
    def num_layers(self) -> int:
        return len(self.layer_widths) - 1

    @property
    def in_features(self) -> int:
        return self.layer_widths[0]

    @property
    def num_classes(self) -> int:
        return self.layer_widths[-1]

    @property
    def hidden_widths(self) -> tuple[int, ...]:
        return self.layer_widths[1:-1]

    def num_parameters(self) -> int:
        w = self.layer_widths
        return sum(w[j] * w[j - 1] + w[j] for j in range(1, len(w)))


@dataclass
class Parameters:
    """Per-layer weights ``W[j]`` (d_j x d_{j-1}) and biases ``b[j]`` (d_j)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def __post_init__(self):
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ShapeError("weights and biases must be non-empty lists of equal length")
        for j, (w, b) in enumerate(zip(self.weights, self.biases), start=1):
            if w.ndim != 2 or b.ndim != 1 or b.shape[0] != w.shape[0]:
                raise ShapeError(f"layer {j}: weight {w.shape} and bias {b.shape} do not match")
            if j > 1 and w.shape[1] != self.weights[j - 2].shape[0]:
                raise ShapeError(
                    f"layer {j}: expects {w.shape[1]} inputs but layer {j - 1} "
                    f"emits {self.weights[j - 2].shape[0]}"
                )

    @property
    def spec(self) -> NetworkSpec:
        return NetworkSpec((self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights))

    @property
    def dtype(self) -> np.dtype:
        return self.weights[0].dtype

    @property
    def num_layers(self) -> int:
        return len(self.weights)

    def copy(self) -> "Parameters":
        return Parameters([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> "Parameters":
        return Parameters(
            [w.astype(dtype, copy=True) for w in self.weights],
            [b.astype(dtype, copy=True) for b in self.biases],
        )

    def zeros_like(self) -> "Parameters":
        return Parameters(
            [np.zeros_like(w) for w in self.weights], [np.zeros_like(b) for b in self.biases]
        )

    def tensors(self) -> list[np.ndarray]:
        """Interleaved [W1, b1, W2, b2, ...]."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def flatten(self) -> np.ndarray:
        return np.concatenate([t.ravel() for t in self.tensors()])

    def is_finite(self) -> bool:
        return all(np.isfinite(t).all() for t in self.tensors())

    def equals(self, other: "Parameters") -> bool:
        """Bit-for-bit equality (shapes, dtypes and values)."""
        a, b = self.tensors(), other.tensors()
        return len(a) == len(b) and all(
            x.shape == y.shape and x.dtype == y.dtype and np.array_equal(x, y) for x, y in zip(a, b)
        )


def init_network(spec: NetworkSpec, seed: int, dtype=np.float32) -> Parameters:
    """Fan-in scaled uniform weights U(-sqrt(1/fan_in), +sqrt(1/fan_in)), zero biases."""
    weights, biases = [], []
    widths = spec.layer_widths
    for j in range(1, len(widths)):
        fan_in, fan_out = widths[j - 1], widths[j]
        bound = math.sqrt(1.0 / fan_in)
        gen = Xoshiro256(derive_seed(seed, "layer", j))
        w = gen.uniform(-bound, bound, fan_out * fan_in).reshape(fan_out, fan_in)
        weights.append(w.astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Parameters(weights, biases)


@dataclass
class ForwardCache:
    pre: list[np.ndarray]  # z_j = a_{j-1} W_j^T + b_j, j = 1..L
    post: list[np.ndarray]  # a_0 = x, a_j = relu(z_j) for hidden j


def forward(params: Parameters, batch: np.ndarray) -> tuple[np.ndarray, np.ndarray, ForwardCache]:
    """Return (logits, penultimate embeddings, cache)."""
    x = np.asarray(batch)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != params.weights[0].shape[1]:
        raise ShapeError(
            f"layer 1 expects {params.weights[0].shape[1]} input features, got batch of shape {x.shape}"
        )
    a = x.astype(params.dtype, copy=False)
    pre, post = [], [a]
    last = params.num_layers - 1
    for j, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w.T + b
        pre.append(z)
        if j < last:
            a = np.maximum(z, 0)
            post.append(a)
    return pre[-1], post[-1], ForwardCache(pre, post)


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def softmax(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits)
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


@dataclass
class KDConfig:
    """Distillation settings; ``teacher`` is bound at fine-tuning time."""

    enabled: bool = False
    lam: float = 0.3
    temperature: float = 4.0
    teacher: Parameters | None = None

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise ValidationError(f"KD lambda must lie in [0, 1], got {self.lam}")
        if self.temperature <= 0:
            raise ValidationError(f"KD temperature must be > 0, got {self.temperature}")

    def with_teacher(self, teacher: Parameters) -> "KDConfig":
        return KDConfig(self.enabled, self.lam, self.temperature, teacher)

    @property
    def active(self) -> bool:
        return self.enabled and self.teacher is not None


def _check_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.int64)
    if y.size and (y.min() < 0 or y.max() >= num_classes):
        bad = y[(y < 0) | (y >= num_classes)][0]
        raise ValidationError(f"label {bad} outside [0, {num_classes - 1}]")
    return y


def loss_and_grads(
    params: Parameters,
    batch: np.ndarray,
    labels: np.ndarray,
    kd: KDConfig | None = None,
    teacher_logits: np.ndarray | None = None,
) -> tuple[float, Parameters]:
    """Mean loss over the batch and its exact gradient.

    With distillation active the loss is
    ``lam * CE + (1 - lam) * T^2 * KL(softmax(teacher/T) || softmax(student/T))``.
    ``teacher_logits`` may be passed to skip the teacher forward pass.
    """
    logits, _, cache = forward(params, batch)
    n, num_classes = logits.shape
    y = _check_labels(labels, num_classes)
    if n == 0:
        raise PreconditionError("empty batch")

    logp = log_softmax(logits)
    ce = -logp[np.arange(n), y].mean()
    dlogits = np.exp(logp)
    dlogits[np.arange(n), y] -= 1
    dlogits /= n
    loss = ce

    if kd is not None and kd.enabled:
        if teacher_logits is None:
            if kd.teacher is None:
                raise ValidationError("distillation enabled without a teacher")
            teacher_logits, _, _ = forward(kd.teacher, batch)
        if teacher_logits.shape != logits.shape:
            raise ShapeError(
                f"teacher emits {teacher_logits.shape[1]} classes, student {num_classes}"
            )
        tau = kd.temperature
        log_q = log_softmax(teacher_logits.astype(logits.dtype, copy=False) / tau)
        log_p = log_softmax(logits / tau)
        q = np.exp(log_q)
        kl = (q * (log_q - log_p)).sum(axis=1).mean()
        dkd = tau * (np.exp(log_p) - q) / n
        loss = kd.lam * ce + (1.0 - kd.lam) * (tau * tau) * kl
        dlogits = kd.lam * dlogits + (1.0 - kd.lam) * dkd

    dlogits = dlogits.astype(params.dtype, copy=False)
    grads_w: list[np.ndarray] = [None] * params.num_layers  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * params.num_layers  # type: ignore[list-item]
    dz = dlogits
    for j in range(params.num_layers - 1, -1, -1):
        a_prev = cache.post[j]
        grads_w[j] = dz.T @ a_prev
        grads_b[j] = dz.sum(axis=0)
        if j:
            dz = (dz @ params.weights[j]) * (cache.pre[j - 1] > 0)
    return float(loss), Parameters(grads_w, grads_b)


def sgd_step(
    params: Parameters,
    grads: Parameters,
    velocity: Parameters,
    lr: float,
    momentum: float,
    weight_decay: float,
) -> tuple[Parameters, Parameters]:
    """v' = momentum*v + g + wd*p ; p' = p - lr*v'."""
    new_p, new_v = [], []
    for p, g, v in zip(params.tensors(), grads.tensors(), velocity.tensors()):
        if p.shape != g.shape or p.shape != v.shape:
            raise ShapeError(f"sgd_step shape mismatch: {p.shape}, {g.shape}, {v.shape}")
        v2 = momentum * v + g + weight_decay * p
        new_v.append(v2.astype(p.dtype, copy=False))
        new_p.append((p - lr * v2).astype(p.dtype, copy=False))
    return Parameters(new_p[0::2], new_p[1::2]), Parameters(new_v[0::2], new_v[1::2])


@dataclass
class TrainSchedule:
    epoch_segments: list[tuple[int, float]] = field(
        default_factory=lambda: [(1, 0.01), (40, 0.1), (20, 0.01), (20, 0.001)]
    )
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    shuffle_seed: int = 0

    def __post_init__(self):
        self.epoch_segments = [(int(e), float(lr)) for e, lr in self.epoch_segments]
        for e, lr in self.epoch_segments:
            if e < 0 or lr <= 0:
                raise ValidationError(f"bad schedule segment ({e}, {lr})")
        if self.batch_size < 1:
            raise ValidationError("batch_size must be >= 1")

    @property
    def total_epochs(self) -> int:
        return sum(e for e, _ in self.epoch_segments)

    def learning_rates(self) -> list[float]:
        """One learning rate per epoch, segments in order."""
        return [lr for e, lr in self.epoch_segments for _ in range(e)]

    def scaled(self, fraction: float, shuffle_seed: int | None = None) -> "TrainSchedule":
        """Same learning rates with each segment's epochs scaled (rounded, never below 1 if nonzero)."""
        segs = [(max(1, round(e * fraction)) if e else 0, lr) for e, lr in self.epoch_segments]
        return TrainSchedule(
            segs,
            self.momentum,
            self.weight_decay,
            self.batch_size,
            self.shuffle_seed if shuffle_seed is None else shuffle_seed,
        )

    def reseeded(self, shuffle_seed: int) -> "TrainSchedule":
        return TrainSchedule(
            list(self.epoch_segments), self.momentum, self.weight_decay, self.batch_size, shuffle_seed
        )


@dataclass
class TrainHistory:
    loss: list[float] = field(default_factory=list)
    train_acc: list[float] = field(default_factory=list)
    cum_flops: list[int] = field(default_factory=list)
    eval_acc: list[float] = field(default_factory=list)  # filled only when eval data is given
    final: dict = field(default_factory=dict)

    @property
    def epochs(self) -> int:
        return len(self.loss)


def run_epochs(
    params: Parameters,
    velocity: Parameters,
    x: np.ndarray,
    y: np.ndarray,
    schedule: TrainSchedule,
    epochs: Sequence[int],
    kd: KDConfig | None,
    history: TrainHistory,
    ledger: "CostLedger | None" = None,
    counter: str = "selector_training",
    eval_data: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[Parameters, Parameters]:
    """Train over the given absolute epoch indices of ``schedule``.

    Shuffling for epoch e is drawn from the stream (shuffle_seed, "epoch", e),
    so any sub-range of a schedule reproduces the corresponding part of a
    full run.
    """
    from .diagnostics import count_forward_flops

    lrs = schedule.learning_rates()
    n = x.shape[0]
    kd_on = kd is not None and kd.enabled
    if kd_on and kd.teacher is None:
        raise ValidationError("distillation enabled without a teacher")
    teacher_logits = forward(kd.teacher, x)[0] if kd_on else None
    for e in epochs:
        spec = params.spec
        epoch_flops = 3 * count_forward_flops(spec) * n
        if kd_on:
            epoch_flops += count_forward_flops(kd.teacher.spec) * n
        order = Xoshiro256(derive_seed(schedule.shuffle_seed, "epoch", e)).permutation(n)
        total_loss = 0.0
        for start in range(0, n, schedule.batch_size):
            idx = order[start : start + schedule.batch_size]
            tl = teacher_logits[idx] if kd_on else None
            loss, grads = loss_and_grads(params, x[idx], y[idx], kd if kd_on else None, tl)
            total_loss += loss * len(idx)
            params, velocity = sgd_step(
                params, grads, velocity, lrs[e], schedule.momentum, schedule.weight_decay
            )
        if not params.is_finite():
            raise FloatingPointError(f"non-finite parameters after epoch {e}")
        correct = int((np.argmax(forward(params, x)[0], axis=1) == y).sum())
        if ledger is not None:
            ledger.charge(counter, epoch_flops)
        prev = history.cum_flops[-1] if history.cum_flops else 0
        history.loss.append(total_loss / n)
        history.train_acc.append(correct / n)
        history.cum_flops.append(prev + epoch_flops)
        if eval_data is not None:
            history.eval_acc.append(evaluate(params, *eval_data)[0])
    return params, velocity


def train(
    init: Parameters,
    x: np.ndarray,
    y: np.ndarray,
    schedule: TrainSchedule,
    kd: KDConfig | None = None,
    ledger: "CostLedger | None" = None,
    counter: str = "selector_training",
    eval_data: tuple[np.ndarray, np.ndarray] | None = None,
) -> tuple[Parameters, TrainHistory]:
    """Mini-batch SGD over ``schedule``; returns new parameters (``init`` is not modified)."""
    x = np.asarray(x)
    y = _check_labels(y, init.spec.num_classes)
    if x.shape[0] == 0:
        raise PreconditionError("cannot train on an empty labeled set")
    if x.shape[0] != y.shape[0]:
        raise ShapeError(f"{x.shape[0]} samples but {y.shape[0]} labels")
    history = TrainHistory()
    if eval_data is not None:
        history.eval_acc.append(evaluate(init, *eval_data)[0])  # epoch-0 point
    if schedule.total_epochs == 0:
        return init.copy(), history
    params, _ = run_epochs(
        init.copy(),
        init.zeros_like(),
        x,
        y,
        schedule,
        range(schedule.total_epochs),
        kd,
        history,
        ledger,
        counter,
        eval_data,
    )
    acc, loss = evaluate(params, x, y)
    history.final = {"train_accuracy": acc, "train_loss": loss}
    return params, history


def evaluate(params: Parameters, x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    """(accuracy, mean cross-entropy); argmax ties go to the lowest class index."""
    x = np.asarray(x)
    if x.shape[0] == 0:
        raise PreconditionError("cannot evaluate on an empty dataset")
    logits = forward(params, x)[0]
    yy = _check_labels(y, logits.shape[1])
    acc = float((np.argmax(logits, axis=1) == yy).mean())
    loss = float(-log_softmax(logits.astype(np.float64))[np.arange(len(yy)), yy].mean())
    return acc, loss
