"""Run configuration: flat TOML file, overridable from the command line."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from .errors import ValidationError
from .net import KDConfig, TrainSchedule
from .orchestrator import ALConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_SEGMENTS = [[1, 0.01], [40, 0.1], [20, 0.01], [20, 0.001]]


@dataclass
class RunConfig:
    method: str = "prunefuse"
    p: float = 0.5
    budget: float = 0.5
    tsync: int = 0
    acq: str = "lc"
    policy: str = "random-reinit"
    kd: bool = True
    kd_lambda: float = 0.3
    kd_temperature: float = 4.0
    hidden: list[int] = field(default_factory=lambda: [64, 64])
    seeds: list[int] = field(default_factory=lambda: [0])
    schedule: list[list[float]] = field(default_factory=lambda: [list(s) for s in DEFAULT_SEGMENTS])
    target_schedule: list[list[float]] | None = None
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    sync_fraction: float = 0.25
    mask_mode: str = "per-layer"
    embedding: str = "penultimate"
    track_alignment: bool = True
    eval_each_round: bool = False
    data: str = "blobs"  # "blobs" or a dataset path
    test_data: str = ""
    blob_classes: int = 8
    blob_dim: int = 32
    blob_n_total: int = 6250
    blob_std: float = 0.8
    blob_box: float = 1.0
    blob_seed: int | None = None  # None: use each run seed
    out: str = "runs"

    def __post_init__(self):
        if self.method not in ("prunefuse", "baseline"):
            raise ValidationError(f"method must be prunefuse or baseline, got {self.method!r}")
        if not self.seeds:
            raise ValidationError("at least one seed is required")
        if self.data != "blobs" and not self.test_data:
            raise ValidationError("a dataset path needs a matching test_data path")
        self.al_config(self.seeds[0])  # validate eagerly

    def _schedule(self, segments) -> TrainSchedule:
        try:
            segs = [(int(e), float(lr)) for e, lr in segments]
        except (TypeError, ValueError) as exc:
            raise ValidationError(f"schedule must be a list of [epochs, lr] pairs: {exc}") from exc
        return TrainSchedule(segs, self.momentum, self.weight_decay, self.batch_size)

    def al_config(self, seed: int) -> ALConfig:
        return ALConfig(
            p=self.p,
            budget=self.budget,
            t_sync=self.tsync,
            acquisition=self.acq,
            policy=self.policy,
            kd=KDConfig(self.kd, self.kd_lambda, self.kd_temperature),
            selector_schedule=self._schedule(self.schedule),
            target_schedule=self._schedule(self.target_schedule or self.schedule),
            sync_finetune_fraction=self.sync_fraction,
            hidden=tuple(self.hidden),
            seed=seed,
            mask_mode=self.mask_mode,
            embedding=self.embedding,
            track_alignment=self.track_alignment,
            eval_each_round=self.eval_each_round,
        )

    def to_toml(self) -> str:
        """Flat TOML; round-trips through :func:`load_config`."""
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            lines.append(f"{f.name} = {_toml_value(v)}")
        return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise ValidationError(f"cannot serialise {v!r} to TOML")


_KNOWN = {f.name for f in fields(RunConfig)}


def config_from_mapping(doc: dict) -> RunConfig:
    unknown = sorted(set(doc) - _KNOWN)
    if unknown:
        raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
    return RunConfig(**doc)


def load_config(path: str | Path, overrides: dict | None = None) -> RunConfig:
    try:
        doc = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    doc.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return config_from_mapping(doc)
