"""Versioned flat-binary model checkpoints.

Layout, all little-endian::

    magic     8 bytes  b"PILSTMCK"
    header    7 x u32  version, kind (0 lstm / 1 mlp), n, d, target channel,
                       normalization channel count (0 = none), block count
    norm      per channel: u16 name length + utf-8 name; then mins, maxs as f64
    blocks    per block: u16 name length + utf-8 name, u32 ndim, ndim x u32
              dims, then the row-major f64 values
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from pilstm.data import NormalizationParams
from pilstm.errors import CheckpointError, ChannelMismatch, ShapeMismatch
from pilstm.neural.lstm import LstmParams
from pilstm.neural.mlp import MlpParams
from pilstm.neural.model import KINDS, SequenceModel

MAGIC = b"PILSTMCK"
VERSION = 1


def _name(s: str) -> bytes:
    raw = s.encode("utf-8")
    return struct.pack("<H", len(raw)) + raw


def dumps(model: SequenceModel) -> bytes:
    arrays = model.arrays()
    norm = model.norm
    out = [MAGIC, struct.pack(
        "<7I", VERSION, KINDS.index(model.kind), model.n, model.d, model.target_channel,
        0 if norm is None else len(norm.channels), len(arrays),
    )]
    if norm is not None:
        out += [_name(c) for c in norm.channels]
        out.append(np.asarray(norm.mins, dtype="<f8").tobytes())
        out.append(np.asarray(norm.maxs, dtype="<f8").tobytes())
    for key, a in arrays.items():
        out.append(_name(key))
        out.append(struct.pack(f"<I{a.ndim}I", a.ndim, *a.shape))
        out.append(np.ascontiguousarray(a, dtype="<f8").tobytes())
    return b"".join(out)


class _Reader:
    def __init__(self, buf: bytes) -> None:
        self.buf, self.pos = buf, 0

    def take(self, size: int) -> bytes:
        if self.pos + size > len(self.buf):
            raise CheckpointError("checkpoint is truncated")
        chunk = self.buf[self.pos : self.pos + size]
        self.pos += size
        return chunk

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))

    def name(self) -> str:
        (length,) = self.unpack("<H")
        return self.take(length).decode("utf-8")

    def floats(self, count: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * count), dtype="<f8").astype(np.float64)


def loads(buf: bytes) -> SequenceModel:
    r = _Reader(buf)
    if r.take(len(MAGIC)) != MAGIC:
        raise CheckpointError("not a model checkpoint (bad magic)")
    version, kind, n, d, target, n_norm, n_blocks = r.unpack("<7I")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    if kind >= len(KINDS):
        raise CheckpointError(f"unknown model kind code {kind}")
    norm = None
    if n_norm:
        channels = tuple(r.name() for _ in range(n_norm))
        try:
            norm = NormalizationParams(r.floats(n_norm), r.floats(n_norm), channels)
        except (ChannelMismatch, ValueError) as exc:
            raise CheckpointError(f"bad normalization block: {exc}") from exc
    arrays = {}
    for _ in range(n_blocks):
        key = r.name()
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}I")
        arrays[key] = r.floats(int(np.prod(shape, dtype=np.int64))).reshape(shape)
    if r.pos != len(buf):
        raise CheckpointError("trailing bytes after the last parameter block")
    for key, a in arrays.items():
        if not np.all(np.isfinite(a)):
            raise CheckpointError(f"parameter block {key} holds non-finite values")
    try:
        cls = LstmParams if kind == 0 else MlpParams
        return SequenceModel(KINDS[kind], cls.from_arrays(arrays), n, d, norm, target)
    except (KeyError, ShapeMismatch, ValueError) as exc:
        raise CheckpointError(f"parameter blocks are inconsistent: {exc}") from exc


def save_checkpoint(model: SequenceModel, path: str | Path) -> None:
    Path(path).write_bytes(dumps(model))


def load_checkpoint(path: str | Path) -> SequenceModel:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"checkpoint not found: {p}")
    return loads(p.read_bytes())
