"""CSV and SVG emission for run logs and accuracy-vs-cost tables."""

from __future__ import annotations

import csv
import json
import math
from html import escape
from pathlib import Path

from .diagnostics import cumulative_selection_cost
from .io import atomic_write_text, atomic_writer, save_checkpoint
from .orchestrator import ALResult, RoundRecord

ROUND_LOG_COLUMNS = (
    "round",
    "labeled_count",
    "selector_train_flops",
    "scoring_flops",
    "selector_val_acc",
    "sync_event",
    "delta_sync",
    "delta_fresh",
    "rep_gap",
    "rho_t",
    "target_train_flops",
    "target_acc",
)
COST_COLUMNS = ("budget_pct", "selector_flops", "target_flops", "accuracy")
_INT_COLS = {"round", "labeled_count", "selector_train_flops", "scoring_flops", "target_train_flops"}


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, int):
        return str(value)
    return repr(float(value))


def write_round_log(path: str | Path, rounds: list[RoundRecord]) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ROUND_LOG_COLUMNS)
        for rec in rounds:
            w.writerow([_fmt(getattr(rec, c)) for c in ROUND_LOG_COLUMNS])


def read_round_log(path: str | Path) -> list[RoundRecord]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for c in ROUND_LOG_COLUMNS:
                if c in _INT_COLS:
                    kw[c] = int(row[c])
                elif c == "sync_event":
                    kw[c] = row[c] == "1"
                else:
                    kw[c] = float(row[c])
            out.append(RoundRecord(**kw))
    return out


def write_cost_table(path: str | Path, rows: list[dict]) -> None:
    with atomic_writer(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COST_COLUMNS)
        for r in rows:
            w.writerow([_fmt(r["budget_pct"]), str(int(r["selector_flops"])),
                        str(int(r["target_flops"])), _fmt(r["accuracy"])])


def read_cost_table(path: str | Path) -> list[dict]:
    with open(path, newline="", encoding="utf-8") as fh:
        return [
            {
                "budget_pct": float(r["budget_pct"]),
                "selector_flops": int(r["selector_flops"]),
                "target_flops": int(r["target_flops"]),
                "accuracy": float(r["accuracy"]),
            }
            for r in csv.DictReader(fh)
        ]


def emit_metrics(result: ALResult, outdir: str | Path) -> dict[str, Path]:
    """Write the round log, cost table, checkpoints, mask and a JSON summary."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {
        "round_log": outdir / "round_log.csv",
        "cost": outdir / "cost.csv",
        "checkpoint": outdir / "final.pfck",
        "selector": outdir / "selector.pfck",
        "mask": outdir / "mask.json",
        "summary": outdir / "summary.json",
    }
    write_round_log(paths["round_log"], result.rounds)
    write_cost_table(paths["cost"], cumulative_selection_cost(result.rounds, result.n_pool))
    save_checkpoint(paths["checkpoint"], result.final_params)
    save_checkpoint(paths["selector"], result.selector)
    result.mask.save(paths["mask"])
    summary = {
        "method": result.method,
        "final_accuracy": result.final_accuracy,
        "labeled_count": int(len(result.labeled)),
        "n_pool": result.n_pool,
        "widths": list(result.spec.layer_widths),
        "selector_widths": list(result.selector.spec.layer_widths),
        "ledger": result.ledger.totals,
    }
    atomic_write_text(paths["summary"], json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return paths


# -- SVG ----------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b")


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = 10 ** math.floor(math.log10((hi - lo) / n))
    for mult in (1, 2, 5, 10):
        if (hi - lo) / (step * mult) <= n:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    return [start + i * step for i in range(int((hi - start) / step + 1e-9) + 1)]


def render_svg(series: dict[str, list[tuple[float, float]]], title: str = "Accuracy vs selector cost",
               xlabel: str = "cumulative selector FLOPs", ylabel: str = "accuracy") -> str:
    """Line + marker plot, one <polyline> per series."""
    width, height = 640, 420
    left, right, top, bottom = 80, 150, 40, 60
    pts = [p for s in series.values() for p in s if math.isfinite(p[0]) and math.isfinite(p[1])]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] or [0.0, 1.0]
    x0, x1 = min(0.0, min(xs)), max(xs) if max(xs) > 0 else 1.0
    y0, y1 = min(ys), max(ys)
    if y1 - y0 < 1e-9:
        y0, y1 = y0 - 0.01, y1 + 0.01
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def sx(v):
        return left + (v - x0) / (x1 - x0) * (width - left - right)

    def sy(v):
        return height - bottom - (v - y0) / (y1 - y0) * (height - top - bottom)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2 - right / 2}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
        f'<line x1="{left}" y1="{height - bottom}" x2="{width - right}" y2="{height - bottom}" stroke="black"/>',
        f'<line x1="{left}" y1="{top}" x2="{left}" y2="{height - bottom}" stroke="black"/>',
    ]
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{sx(t):.2f}" y1="{height - bottom}" x2="{sx(t):.2f}" '
                   f'y2="{height - bottom + 4}" stroke="black"/>')
        out.append(f'<text x="{sx(t):.2f}" y="{height - bottom + 16}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{left - 4}" y1="{sy(t):.2f}" x2="{left}" y2="{sy(t):.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 6}" y="{sy(t) + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{(left + width - right) / 2}" y="{height - 18}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(20,{(top + height - bottom) / 2}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    for i, (name, s) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        good = [(x, y) for x, y in s if math.isfinite(x) and math.isfinite(y)]
        coords = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in good)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in good:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = top + 10 + 18 * i
        out.append(f'<line x1="{width - right + 12}" y1="{ly}" x2="{width - right + 32}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{width - right + 38}" y="{ly + 4}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(cost_tables: dict[str, list[dict]], path: str | Path) -> None:
    """Accuracy vs cumulative selector FLOPs, one line per method; rows without accuracy are skipped."""
    series = {
        name: [(float(r["selector_flops"]), float(r["accuracy"])) for r in rows
               if math.isfinite(float(r["accuracy"]))]
        for name, rows in cost_tables.items()
    }
    atomic_write_text(path, render_svg(series))
