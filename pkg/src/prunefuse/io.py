"""Binary checkpoints and atomic file emission.

Checkpoint layout (little-endian): b"PFCK", u32 version=1, u32 L, (L+1) u32
widths, then for each layer the f32 weights row-major followed by f32 biases.
"""

from __future__ import annotations

import contextlib
import os
import struct
import tempfile
from pathlib import Path

import numpy as np

from .errors import FormatError
from .net import Parameters

CKPT_MAGIC = b"PFCK"
CKPT_VERSION = 1


@contextlib.contextmanager
def atomic_writer(path: str | Path, mode: str = "w"):
    """Write to a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        if "b" in mode:
            fh = os.fdopen(fd, mode)
        else:
            fh = os.fdopen(fd, mode, encoding="utf-8", newline="")
        with fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    with atomic_writer(path, "wb") as fh:
        fh.write(data)


def atomic_write_text(path: str | Path, text: str) -> None:
    with atomic_writer(path) as fh:
        fh.write(text)


def checkpoint_bytes(params: Parameters) -> bytes:
    widths = params.spec.layer_widths
    parts = [CKPT_MAGIC, struct.pack("<II", CKPT_VERSION, len(widths) - 1)]
    parts.append(struct.pack(f"<{len(widths)}I", *widths))
    for w, b in zip(params.weights, params.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(parts)


def parse_checkpoint(data: bytes) -> Parameters:
    if len(data) < 12 or data[:4] != CKPT_MAGIC:
        raise FormatError("not a checkpoint: bad magic at byte 0")
    version, n_layers = struct.unpack_from("<II", data, 4)
    if version != CKPT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version} at byte 4")
    if n_layers < 1:
        raise FormatError("checkpoint declares zero layers at byte 8")
    off = 12
    need = off + 4 * (n_layers + 1)
    if len(data) < need:
        raise FormatError(f"checkpoint truncated in width table (size {len(data)} < {need})")
    widths = struct.unpack_from(f"<{n_layers + 1}I", data, off)
    off = need
    weights, biases = [], []
    for j in range(1, n_layers + 1):
        nw, nb = widths[j] * widths[j - 1], widths[j]
        end = off + 4 * (nw + nb)
        if len(data) < end:
            raise FormatError(f"checkpoint truncated in layer {j} at byte {len(data)}")
        w = np.frombuffer(data, dtype="<f4", count=nw, offset=off).reshape(widths[j], widths[j - 1])
        b = np.frombuffer(data, dtype="<f4", count=nb, offset=off + 4 * nw)
        weights.append(w.astype(np.float32))
        biases.append(b.astype(np.float32))
        off = end
    if off != len(data):
        raise FormatError(f"{len(data) - off} trailing bytes after checkpoint payload")
    return Parameters(weights, biases)


def save_checkpoint(path: str | Path, params: Parameters) -> None:
    atomic_write_bytes(path, checkpoint_bytes(params))


def load_checkpoint(path: str | Path) -> Parameters:
    return parse_checkpoint(Path(path).read_bytes())
