"""Command-line entry point: ``prunefuse <subcommand> ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .errors import PruneFuseError, ValidationError
from .net import softmax

log = logging.getLogger("prunefuse")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError as exc:
        raise ValidationError(f"expected comma-separated integers, got {text!r}") from exc


def _segments(text: str) -> list[list[float]]:
    """'1:0.01,40:0.1' -> [[1, 0.01], [40, 0.1]]"""
    out = []
    for part in text.split(","):
        try:
            e, lr = part.split(":")
            out.append([int(e), float(lr)])
        except ValueError as exc:
            raise ValidationError(f"bad schedule segment {part!r}; expected epochs:lr") from exc
    return out


def _read_indices(path: str) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8").strip()
    if text.startswith("["):
        return np.asarray(json.loads(text), dtype=np.int64)
    return np.asarray([int(t) for t in text.split()], dtype=np.int64)


def cmd_gen_data(args) -> None:
    from .data import BlobConfig, gen_blobs, save_dataset

    cfg = BlobConfig(args.classes, args.dim, args.per_class, args.std, args.box, args.seed, args.n_total)
    train, test = gen_blobs(cfg)
    fmt = args.format
    save_dataset(args.out, train, fmt)
    save_dataset(args.test_out, test, fmt)
    print(f"wrote {len(train)} train rows to {args.out} and {len(test)} test rows to {args.test_out}")


def cmd_train(args) -> None:
    from .data import load_dataset
    from .io import save_checkpoint
    from .net import NetworkSpec, TrainSchedule, evaluate, init_network, train
    from .rng import derive_seed

    ds = load_dataset(args.data, args.format)
    hidden = _ints(args.hidden)
    if args.init:
        from .io import load_checkpoint

        init = load_checkpoint(args.init)
    else:
        init = init_network(NetworkSpec((ds.dim, *hidden, ds.num_classes)), derive_seed(args.seed, "init"))
    sched = TrainSchedule(_segments(args.schedule), args.momentum, args.weight_decay, args.batch_size,
                          derive_seed(args.seed, "shuffle"))
    params, hist = train(init, ds.features, ds.labels, sched)
    save_checkpoint(args.out, params)
    msg = f"trained {hist.epochs} epochs, train accuracy {hist.final.get('train_accuracy', float('nan')):.4f}"
    if args.test:
        test = load_dataset(args.test, args.format, ds.num_classes, "test")
        msg += f", test accuracy {evaluate(params, test.features, test.labels)[0]:.4f}"
    print(msg)


def cmd_prune(args) -> None:
    from .io import load_checkpoint, save_checkpoint
    from .pruning import build_mask, extract_pruned, mask_sparsity, score_channels

    params = load_checkpoint(args.checkpoint)
    mask = build_mask(score_channels(params), args.p, args.mode)
    spec, pruned = extract_pruned(params, mask)
    mask.save(args.mask_out)
    save_checkpoint(args.out, pruned)
    print(f"pruned {params.spec.layer_widths} -> {spec.layer_widths}, "
          f"sparsity {mask_sparsity(mask, params.spec):.4f}")


def cmd_select(args) -> None:
    from .acquisition import (
        greedy_k_centers,
        score_entropy,
        score_least_confidence,
        select_random,
        select_top_k,
        write_scores_csv,
    )
    from .data import load_dataset
    from .io import atomic_write_text, load_checkpoint
    from .net import forward

    params = load_checkpoint(args.checkpoint)
    ds = load_dataset(args.data, args.format)
    labeled = _read_indices(args.labeled) if args.labeled else np.zeros(0, dtype=np.int64)
    mask = np.ones(len(ds), dtype=bool)
    mask[labeled] = False
    pool = np.flatnonzero(mask)
    if args.acq == "random":
        chosen = select_random(len(pool), min(args.k, len(pool)), args.seed).indices
    elif args.acq == "kcenters":
        emb_u = forward(params, ds.features[pool])[1]
        emb_l = forward(params, ds.features[labeled])[1] if labeled.size else None
        chosen = greedy_k_centers(emb_u, emb_l, args.k).indices
    else:
        probs = softmax(forward(params, ds.features[pool])[0].astype(np.float64))
        scores = score_least_confidence(probs) if args.acq == "lc" else score_entropy(probs)
        if args.scores_out:
            write_scores_csv(args.scores_out, scores, pool)
        chosen = select_top_k(scores, args.k).indices
    picked = pool[chosen].tolist()
    if args.out:
        atomic_write_text(args.out, json.dumps(picked) + "\n")
    print(json.dumps(picked))


def cmd_fuse(args) -> None:
    from .fusion import ComplementPolicy, fuse_model
    from .io import load_checkpoint, save_checkpoint
    from .pruning import PruneMask

    dense = load_checkpoint(args.dense)
    pruned = load_checkpoint(args.pruned)
    mask = PruneMask.load(args.mask)
    fused, report = fuse_model(dense, pruned, mask, ComplementPolicy(args.policy, args.seed))
    save_checkpoint(args.out, fused)
    if args.report:
        report.write_csv(args.report)
    print(f"fused into {fused.spec.layer_widths}; alignment {'ok' if report.ok else 'FAILED'}")
    if not report.ok:
        raise PruneFuseError(f"fusion misaligned on layers {report.flagged()}")


def _datasets(cfg, seed):
    from .data import BlobConfig, gen_blobs, load_dataset

    if cfg.data == "blobs":
        bseed = seed if cfg.blob_seed is None else cfg.blob_seed
        return gen_blobs(BlobConfig(cfg.blob_classes, cfg.blob_dim, 1, cfg.blob_std, cfg.blob_box,
                                    bseed, cfg.blob_n_total))
    train = load_dataset(cfg.data)
    return train, load_dataset(cfg.test_data, num_classes=train.num_classes, split="test")


def cmd_run(args) -> None:
    from .config import RunConfig, config_from_mapping, load_config
    from .io import atomic_write_text
    from .orchestrator import run_method
    from .report import emit_metrics

    overrides = {
        "method": args.method,
        "p": args.p,
        "budget": args.budget,
        "tsync": args.tsync,
        "acq": args.acq,
        "policy": args.policy,
        "seeds": _ints(args.seeds) if args.seeds else None,
        "out": args.out,
        "data": args.data,
        "test_data": args.test_data,
        "hidden": _ints(args.hidden) if args.hidden else None,
        "schedule": _segments(args.schedule) if args.schedule else None,
        "kd": False if args.no_kd else None,
        "eval_each_round": True if args.eval_each_round else None,
    }
    if args.config:
        cfg = load_config(args.config, overrides)
    else:
        cfg = config_from_mapping({k: v for k, v in overrides.items() if v is not None})
    assert isinstance(cfg, RunConfig)
    out = Path(cfg.out)
    (out / cfg.method).mkdir(parents=True, exist_ok=True)
    atomic_write_text(out / cfg.method / "config.toml", cfg.to_toml())
    for seed in cfg.seeds:
        train, test = _datasets(cfg, seed)
        result = run_method(cfg.method, train, test, cfg.al_config(seed))
        run_dir = out / cfg.method / f"seed{seed}"
        emit_metrics(result, run_dir)
        print(f"{cfg.method} seed {seed}: |L|={len(result.labeled)} "
              f"accuracy {result.final_accuracy:.4f} selector FLOPs {result.ledger.selector_total():.4e} "
              f"-> {run_dir}")


def cmd_report(args) -> None:
    from .report import emit_plot, read_cost_table, write_cost_table

    tables: dict[str, list[dict]] = {}
    for run in args.runs:
        run = Path(run)
        cost_files = sorted(run.glob("**/cost.csv")) if run.is_dir() else [run]
        if not cost_files:
            raise PruneFuseError(f"no cost.csv under {run}")
        for f in cost_files:
            summary = f.parent / "summary.json"
            name = json.loads(summary.read_text())["method"] if summary.exists() else f.parent.name
            label = f"{name}/{f.parent.name}" if len(cost_files) > 1 or len(args.runs) > 1 else name
            if args.mean:
                tables.setdefault(name, []).append(read_cost_table(f))
            else:
                tables[label] = read_cost_table(f)
    if args.mean:
        merged = {}
        for name, runs in tables.items():
            rows = []
            for level in zip(*runs):
                rows.append({
                    "budget_pct": level[0]["budget_pct"],
                    "selector_flops": int(np.mean([r["selector_flops"] for r in level])),
                    "target_flops": int(np.mean([r["target_flops"] for r in level])),
                    "accuracy": float(np.mean([r["accuracy"] for r in level])),
                })
            merged[name] = rows
        tables = merged
    emit_plot(tables, args.out)
    if args.csv_dir:
        for name, rows in tables.items():
            write_cost_table(Path(args.csv_dir) / f"{name.replace('/', '_')}_cost.csv", rows)
    print(f"wrote {args.out} with {len(tables)} series")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="prunefuse", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write a synthetic blob dataset (train + test)")
    g.add_argument("--out", required=True)
    g.add_argument("--test-out", required=True)
    g.add_argument("--format", choices=["binary", "csv"], default=None)
    g.add_argument("--classes", type=int, default=8)
    g.add_argument("--dim", type=int, default=32)
    g.add_argument("--per-class", type=int, default=625)
    g.add_argument("--n-total", type=int, default=None)
    g.add_argument("--std", type=float, default=0.8)
    g.add_argument("--box", type=float, default=1.0)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_gen_data)

    t = sub.add_parser("train", help="plain supervised training of an MLP")
    t.add_argument("--data", required=True)
    t.add_argument("--test", default=None)
    t.add_argument("--format", choices=["binary", "csv"], default=None)
    t.add_argument("--hidden", default="64,64")
    t.add_argument("--init", default=None, help="start from this checkpoint instead of a fresh init")
    t.add_argument("--schedule", default="1:0.01,40:0.1,20:0.01,20:0.001")
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--weight-decay", type=float, default=5e-4)
    t.add_argument("--batch-size", type=int, default=64)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_train)

    p = sub.add_parser("prune", help="score channels, write mask and pruned checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--mode", choices=["per-layer", "global"], default="per-layer")
    p.add_argument("--mask-out", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_prune)

    s = sub.add_parser("select", help="score a pool with a checkpoint and pick k samples")
    s.add_argument("--checkpoint", required=True)
    s.add_argument("--data", required=True)
    s.add_argument("--format", choices=["binary", "csv"], default=None)
    s.add_argument("--labeled", default=None, help="file of already-labeled indices (JSON list or whitespace)")
    s.add_argument("--acq", choices=["lc", "entropy", "kcenters", "random"], default="lc")
    s.add_argument("--k", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--scores-out", default=None)
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_select)

    f = sub.add_parser("fuse", help="fuse a trained pruned checkpoint into a dense one")
    f.add_argument("--dense", required=True)
    f.add_argument("--pruned", required=True)
    f.add_argument("--mask", required=True)
    f.add_argument("--policy", choices=["retain-init", "zero", "random-reinit"], default="random-reinit")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", required=True)
    f.add_argument("--report", default=None)
    f.set_defaults(func=cmd_fuse)

    r = sub.add_parser("run", help="full active-learning run (prunefuse or baseline)")
    r.add_argument("--config", default=None)
    r.add_argument("--method", choices=["prunefuse", "baseline"], default=None)
    r.add_argument("--p", type=float, default=None)
    r.add_argument("--budget", type=float, default=None)
    r.add_argument("--tsync", type=int, default=None)
    r.add_argument("--acq", choices=["lc", "entropy", "kcenters", "random"], default=None)
    r.add_argument("--policy", choices=["retain-init", "zero", "random-reinit"], default=None)
    r.add_argument("--seeds", default=None, help="comma-separated, e.g. 0,1,2")
    r.add_argument("--hidden", default=None)
    r.add_argument("--schedule", default=None, help="epochs:lr segments, e.g. 1:0.01,40:0.1")
    r.add_argument("--data", default=None)
    r.add_argument("--test-data", default=None)
    r.add_argument("--no-kd", action="store_true")
    r.add_argument("--eval-each-round", action="store_true")
    r.add_argument("--out", default=None)
    r.set_defaults(func=cmd_run)

    rp = sub.add_parser("report", help="SVG accuracy-vs-selector-FLOPs plot from run directories")
    rp.add_argument("runs", nargs="+")
    rp.add_argument("--out", required=True)
    rp.add_argument("--mean", action="store_true", help="average seeds per method")
    rp.add_argument("--csv-dir", default=None)
    rp.set_defaults(func=cmd_report)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except PruneFuseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
