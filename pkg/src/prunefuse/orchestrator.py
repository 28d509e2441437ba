"""Active-learning loops: pruned selector with fusion, and the dense-selector baseline.

Round structure (PruneFuse):

* round 0: initialise the dense model, prune it, train the selector on a
  random seed set;
* round r >= 1: score the unlabeled pool with the selector and label the top
  batch; then either retrain the selector from its initial pruned weights, or,
  every ``t_sync`` rounds, fuse it into the dense init, fine-tune with
  distillation, and re-prune the result to get the next selector;
* after the last round: fuse the selector into the dense init and fine-tune on
  everything labeled.

All randomness comes from named sub-streams of ``cfg.seed``; the dense init,
the seed set and random acquisitions are shared with the baseline.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .acquisition import (
    ACQUISITIONS,
    SelectionResult,
    greedy_k_centers,
    score_entropy,
    score_least_confidence,
    select_random,
    select_top_k,
)
from .data import Dataset
from .diagnostics import (
    CostLedger,
    alignment_gaps,
    count_forward_flops,
    proxy_distance,
    representativeness_gap,
)
from .errors import ValidationError
from .fusion import POLICIES, ComplementPolicy, fuse_model
from .net import (
    KDConfig,
    NetworkSpec,
    Parameters,
    TrainHistory,
    TrainSchedule,
    evaluate,
    forward,
    init_network,
    softmax,
    train,
)
from .pruning import PruneMask, build_mask, extract_pruned, mask_sparsity, pruning_cost, score_channels
from .rng import derive_seed

log = logging.getLogger(__name__)

_QUOTA_PCT = (2, 8, 10)


@dataclass
class ALConfig:
    p: float = 0.5
    budget: float = 0.5
    t_sync: int = 0
    acquisition: str = "lc"
    policy: str = "random-reinit"
    kd: KDConfig = field(default_factory=lambda: KDConfig(enabled=True, lam=0.3, temperature=4.0))
    selector_schedule: TrainSchedule = field(default_factory=TrainSchedule)
    target_schedule: TrainSchedule = field(default_factory=TrainSchedule)
    sync_finetune_fraction: float = 0.25
    hidden: tuple[int, ...] = (64, 64)
    seed: int = 0
    mask_mode: str = "per-layer"
    embedding: str = "penultimate"
    track_alignment: bool = True
    eval_each_round: bool = False
    dtype: str = "float32"

    def __post_init__(self):
        if not 0.0 <= self.p < 1.0:
            raise ValidationError(f"pruning ratio must lie in [0, 1), got {self.p}")
        if not 0.0 < self.budget <= 1.0:
            raise ValidationError(f"budget must lie in (0, 1], got {self.budget}")
        if self.t_sync < 0:
            raise ValidationError("t_sync must be >= 0")
        if self.acquisition not in ACQUISITIONS:
            raise ValidationError(f"unknown acquisition {self.acquisition!r}; expected {ACQUISITIONS}")
        if self.policy not in POLICIES:
            raise ValidationError(f"unknown complement policy {self.policy!r}")
        if self.embedding not in ("penultimate", "logits"):
            raise ValidationError("embedding must be 'penultimate' or 'logits'")
        if self.mask_mode not in ("per-layer", "global"):
            raise ValidationError("mask_mode must be 'per-layer' or 'global'")
        if self.dtype not in ("float32", "float64"):
            raise ValidationError("dtype must be float32 or float64")
        if not 0.0 < self.sync_finetune_fraction <= 1.0:
            raise ValidationError("sync_finetune_fraction must lie in (0, 1]")
        self.hidden = tuple(int(h) for h in self.hidden)


@dataclass
class RoundRecord:
    round: int
    labeled_count: int
    selector_train_flops: int = 0
    scoring_flops: int = 0
    target_train_flops: int = 0
    selector_val_acc: float = math.nan
    sync_event: bool = False
    delta_sync: float = math.nan
    delta_fresh: float = math.nan
    rep_gap: float = math.nan
    rho_t: float = math.nan
    target_acc: float = math.nan
    selected: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64), repr=False)


@dataclass
class ALResult:
    method: str
    final_params: Parameters
    labeled: np.ndarray
    history: TrainHistory
    rounds: list[RoundRecord]
    ledger: CostLedger
    final_accuracy: float
    spec: NetworkSpec
    n_pool: int
    theta_init: Parameters
    selector: Parameters
    selector_init: Parameters
    mask: PruneMask
    mask_init: PruneMask

    @property
    def cost_split(self) -> dict[str, int]:
        t = self.ledger.totals
        return {
            "selector_training": t["selector_training_flops"],
            "scoring": t["scoring_flops"],
            "target_training": t["target_training_flops"],
        }


def _pct_round(pct: int, n: int) -> int:
    """round(pct/100 * n), halves up, in exact integer arithmetic."""
    return (pct * n + 50) // 100


def budget_count(n: int, budget: float) -> int:
    return min(n, int(math.floor(budget * n + 0.5)))


def next_round_quota(round: int, n: int, labeled: int | None = None, budget: float | None = None) -> int:
    """Samples to label in ``round``: 2% seed set, then 8%, then 10% per round (each at least 1).

    With ``labeled`` and ``budget`` given, the quota is clipped so the labeled
    count never exceeds round(budget * n).
    """
    if round < 0:
        raise ValidationError("round must be >= 0")
    q = max(1, _pct_round(_QUOTA_PCT[min(round, 2)], n))
    if labeled is not None and budget is not None:
        q = max(0, min(q, budget_count(n, budget) - labeled))
    return q


def quota_schedule(n: int, budget: float) -> list[int]:
    """Per-round quotas [s0, q1, ...] until the budget is met."""
    cap = budget_count(n, budget)
    s0 = next_round_quota(0, n)
    if cap < s0:
        raise ValidationError(
            f"budget of {cap} samples is smaller than the {s0}-sample seed set"
        )
    quotas, labeled, r = [], 0, 0
    while labeled < cap:
        q = next_round_quota(r, n, labeled, budget)
        quotas.append(q)
        labeled += q
        r += 1
    return quotas


def _acquire(
    selector: Parameters,
    x_unlabeled: np.ndarray,
    x_labeled: np.ndarray,
    k: int,
    cfg: ALConfig,
    seed: int,
) -> SelectionResult:
    fwd = count_forward_flops(selector.spec)
    if cfg.acquisition == "random":
        return select_random(len(x_unlabeled), k, seed)
    if cfg.acquisition == "kcenters":
        logits_u, emb_u, _ = forward(selector, x_unlabeled)
        logits_l, emb_l, _ = forward(selector, x_labeled)
        if cfg.embedding == "logits":
            emb_u, emb_l = logits_u, logits_l
        sel = greedy_k_centers(emb_u, emb_l, k)
        sel.scoring_flops = fwd * (len(x_unlabeled) + len(x_labeled))
        return sel
    probs = softmax(forward(selector, x_unlabeled)[0].astype(np.float64))
    scores = score_least_confidence(probs) if cfg.acquisition == "lc" else score_entropy(probs)
    sel = select_top_k(scores, k)
    sel.scoring_flops = fwd * len(x_unlabeled)
    return sel


def sync_update(
    theta_f_star: Parameters,
    p: float,
    x: np.ndarray,
    y: np.ndarray,
    schedule: TrainSchedule,
    mode: str = "per-layer",
    ledger: CostLedger | None = None,
) -> tuple[PruneMask, Parameters]:
    """Re-derive the selector from a trained fused model: score, mask, extract, fine-tune."""
    mask = build_mask(score_channels(theta_f_star), p, mode)
    _, pruned = extract_pruned(theta_f_star, mask)
    if ledger is not None:
        ledger.charge("pruning_ops", pruning_cost(theta_f_star.spec))
    tuned, _ = train(pruned, x, y, schedule, None, ledger, "selector_training")
    return mask, tuned


def _run(train_ds: Dataset, test_ds: Dataset, cfg: ALConfig, method: str) -> ALResult:
    x, y = train_ds.features, train_ds.labels
    x_val, y_val = test_ds.features, test_ds.labels
    n = len(train_ds)
    quotas = quota_schedule(n, cfg.budget)
    dtype = np.float32 if cfg.dtype == "float32" else np.float64
    spec = NetworkSpec((train_ds.dim, *cfg.hidden, train_ds.num_classes))
    theta_init = init_network(spec, derive_seed(cfg.seed, "init"), dtype)
    ledger = CostLedger()
    prunefuse = method == "prunefuse"

    if prunefuse:
        mask_init = build_mask(score_channels(theta_init), cfg.p, cfg.mask_mode)
        _, selector_init = extract_pruned(theta_init, mask_init)
        ledger.charge("pruning_ops", pruning_cost(spec))
    else:
        mask_init, selector_init = PruneMask.full(spec), theta_init

    def sched(role: str, r: int, base: TrainSchedule | None = None, frac: float = 1.0):
        base = base or cfg.selector_schedule
        seed = derive_seed(cfg.seed, "shuffle", role, r)
        return base.scaled(frac, seed) if frac != 1.0 else base.reseeded(seed)

    in_labeled = np.zeros(n, dtype=bool)
    s0 = select_random(n, quotas[0], derive_seed(cfg.seed, "acquisition", 0)).indices
    labeled = list(s0)
    in_labeled[s0] = True
    selector, _ = train(selector_init, x[s0], y[s0], sched("selector", 0), None, ledger)
    sel_mask = mask_init
    rounds: list[RoundRecord] = []

    def close(rec: RoundRecord) -> None:
        snap = ledger.close_round()
        rec.selector_train_flops = snap["selector_training_flops"]
        rec.scoring_flops = snap["scoring_flops"]
        rec.target_train_flops = snap["target_training_flops"]
        rec.selector_val_acc = evaluate(selector, x_val, y_val)[0]
        rounds.append(rec)

    def would_be_target(lab: np.ndarray, r: int) -> float:
        # diagnostic only: the model this method would return if it stopped now
        if not prunefuse:
            return evaluate(selector, x_val, y_val)[0]
        fused, _ = fuse_model(
            theta_init, selector, sel_mask,
            ComplementPolicy(cfg.policy, derive_seed(cfg.seed, "reinit", r)),
        )
        tgt, _ = train(fused, x[lab], y[lab], sched("target", r, cfg.target_schedule),
                       cfg.kd.with_teacher(selector))
        return evaluate(tgt, x_val, y_val)[0]

    rec0 = RoundRecord(0, len(labeled), selected=np.asarray(s0))
    last = len(quotas) - 1
    if cfg.eval_each_round and last > 0:
        rec0.target_acc = would_be_target(np.asarray(labeled), 0)
    pending = rec0  # the last round's record is closed after final training
    if last > 0:
        close(rec0)

    for r in range(1, len(quotas)):
        rec = RoundRecord(r, 0)
        pool = np.flatnonzero(~in_labeled)
        lab = np.asarray(labeled)
        sel = _acquire(selector, x[pool], x[lab], quotas[r], cfg, derive_seed(cfg.seed, "acquisition", r))
        ledger.charge("scoring", sel.scoring_flops)
        picked = pool[sel.indices]
        if np.any(in_labeled[picked]) or len(np.unique(picked)) != len(picked):
            raise AssertionError("acquisition returned an already-labeled or duplicate sample")
        rec.rep_gap = representativeness_gap(selector, picked, x, y)
        labeled.extend(int(i) for i in picked)
        in_labeled[picked] = True
        lab = np.asarray(labeled)
        rec.labeled_count = len(labeled)
        rec.selected = picked

        if prunefuse and cfg.t_sync > 0 and r % cfg.t_sync == 0:
            rec.sync_event = True
            fused, report = fuse_model(
                theta_init, selector, sel_mask,
                ComplementPolicy(cfg.policy, derive_seed(cfg.seed, "reinit", r)),
            )
            if not report.ok:
                raise AssertionError(f"fusion misaligned on layers {report.flagged()}")
            ledger.charge("fusion", sum(lf.copied for lf in report.layers))
            frac = cfg.sync_finetune_fraction
            theta_f, _ = train(
                fused, x[lab], y[lab], sched("sync-target", r, frac=frac),
                cfg.kd.with_teacher(selector), ledger, "selector_training",
            )
            new_mask, new_selector = sync_update(
                theta_f, cfg.p, x[lab], y[lab], sched("sync-selector", r, frac=frac),
                cfg.mask_mode, ledger,
            )
            rec.rho_t = proxy_distance(theta_f, new_selector, new_mask)
            if cfg.track_alignment:
                fresh, _ = train(selector_init, x[lab], y[lab], sched("selector", r))
                rec.delta_sync, rec.delta_fresh = alignment_gaps(
                    theta_f, new_selector, fresh, x_val, y_val
                )
            selector, sel_mask = new_selector, new_mask
            log.debug("round %d: sync, sparsity %.3f", r, mask_sparsity(sel_mask, spec))
        else:
            selector, _ = train(selector_init, x[lab], y[lab], sched("selector", r), None, ledger)
            sel_mask = mask_init
        if cfg.eval_each_round and r < last:
            rec.target_acc = would_be_target(lab, r)
        if r < last:
            close(rec)
        else:
            pending = rec
        log.info("%s round %d: |L|=%d", method, r, len(labeled))

    lab = np.asarray(labeled)
    if prunefuse:
        fused, report = fuse_model(
            theta_init, selector, sel_mask,
            ComplementPolicy(cfg.policy, derive_seed(cfg.seed, "reinit", "final")),
        )
        if not report.ok:
            raise AssertionError(f"fusion misaligned on layers {report.flagged()}")
        ledger.charge("fusion", sum(lf.copied for lf in report.layers))
        final, history = train(
            fused, x[lab], y[lab], sched("target", len(quotas), cfg.target_schedule),
            cfg.kd.with_teacher(selector), ledger, "target_training",
        )
    else:
        final, history = train(
            theta_init, x[lab], y[lab], sched("target", len(quotas), cfg.target_schedule),
            None, ledger, "target_training",
        )
    final_acc = evaluate(final, x_val, y_val)[0]
    pending.target_acc = final_acc
    close(pending)
    return ALResult(
        method, final, lab, history, rounds, ledger, final_acc, spec, n,
        theta_init, selector, selector_init, sel_mask, mask_init,
    )


def run_prunefuse(train_ds: Dataset, test_ds: Dataset, cfg: ALConfig) -> ALResult:
    """Pruned selector, weight-aligned fusion and distillation refinement."""
    return _run(train_ds, test_ds, cfg, "prunefuse")


def run_baseline_al(train_ds: Dataset, test_ds: Dataset, cfg: ALConfig) -> ALResult:
    """Same loop with the dense model as selector; final model trained from scratch, no KD."""
    return _run(train_ds, test_ds, cfg, "baseline")


def run_method(method: str, train_ds: Dataset, test_ds: Dataset, cfg: ALConfig) -> ALResult:
    if method not in ("prunefuse", "baseline"):
        raise ValidationError(f"unknown method {method!r}")
    return _run(train_ds, test_ds, cfg, method)


@dataclass
class WarmStartComparison:
    fused_curve: list[float]
    scratch_curve: list[float]
    fused_epochs: int
    scratch_epochs: int


def compare_warm_start(
    result: ALResult,
    train_ds: Dataset,
    test_ds: Dataset,
    schedule: TrainSchedule,
    policy: str = "random-reinit",
    fraction: float = 0.95,
) -> WarmStartComparison:
    """Train fused-init and scratch-init dense models on the same labeled set, same schedule, no KD.

    Curves hold test accuracy before training (index 0) and after every epoch.
    """
    from .diagnostics import epochs_to_fraction

    x, y = train_ds.features[result.labeled], train_ds.labels[result.labeled]
    val = (test_ds.features, test_ds.labels)
    fused, _ = fuse_model(result.theta_init, result.selector, result.mask, ComplementPolicy(policy, 1))
    _, h_f = train(fused, x, y, schedule, eval_data=val)
    _, h_s = train(result.theta_init, x, y, schedule, eval_data=val)
    return WarmStartComparison(
        h_f.eval_acc, h_s.eval_acc,
        epochs_to_fraction(h_f.eval_acc, fraction), epochs_to_fraction(h_s.eval_acc, fraction),
    )
