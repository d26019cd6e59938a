"""Binary model checkpoints ("ALNF") with a JSON config sidecar, and checkpoint averaging.

Layout, all little-endian::

    b"ALNF" | u32 version | records...
    record = u32 name_len | name (UTF-8) | u32 rank | u64 dims[rank] | f32 payload
"""

from __future__ import annotations

import json
import logging
import struct
from collections import OrderedDict
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .errors import FormatError, ParameterError
from .export import atomic_write_bytes, atomic_write_text
from .models import ModelConfig
from .transformer import Transformer

logger = logging.getLogger(__name__)

MAGIC = b"ALNF"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


def encode_checkpoint(state: Dict[str, np.ndarray]) -> bytes:
    chunks: List[bytes] = [MAGIC, struct.pack("<I", FORMAT_VERSION)]
    for name, array in state.items():
        raw_name = name.encode("utf-8")
        array = np.ascontiguousarray(array, dtype="<f4")
        chunks.append(struct.pack("<I", len(raw_name)))
        chunks.append(raw_name)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(array.tobytes())
    return b"".join(chunks)


def decode_checkpoint(data: bytes, path: str = "<bytes>") -> "OrderedDict[str, np.ndarray]":
    if data[:4] != MAGIC:
        raise FormatError(f"not an ALNF checkpoint (magic {data[:4]!r})", None, path)
    offset = 4

    def take(fmt: str) -> Tuple:
        nonlocal offset
        size = struct.calcsize(fmt)
        if offset + size > len(data):
            raise FormatError(f"checkpoint truncated at byte {offset}", None, path)
        values = struct.unpack_from(fmt, data, offset)
        offset += size
        return values

    (version,) = take("<I")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}", None, path)

    state: "OrderedDict[str, np.ndarray]" = OrderedDict()
    while offset < len(data):
        (name_len,) = take("<I")
        (raw_name,) = take(f"<{name_len}s")
        (rank,) = take("<I")
        shape = take(f"<{rank}Q") if rank else ()
        count = int(np.prod(shape)) if shape else 1
        (payload,) = take(f"<{4 * count}s")
        name = raw_name.decode("utf-8")
        if name in state:
            raise FormatError(f"duplicate tensor {name!r} in checkpoint", None, path)
        state[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    return state


def write_checkpoint(path: PathLike, state: Dict[str, np.ndarray]) -> None:
    atomic_write_bytes(path, encode_checkpoint(state))


def read_checkpoint(path: PathLike) -> "OrderedDict[str, np.ndarray]":
    return decode_checkpoint(Path(path).read_bytes(), str(path))


def _sidecar(path: PathLike) -> Path:
    return Path(path).with_suffix(".json")


def save_model(model: Transformer, path: PathLike, seed: int = 1, extra: Optional[Mapping[str, Any]] = None) -> None:
    """Write parameters to ``path`` and the model config (plus ``extra``) next to it."""
    write_checkpoint(path, model.state_dict())
    meta = {"model": model.config.model_dump(), "vocab_size": model.vocab_size, "seed": seed, **dict(extra or {})}
    atomic_write_text(_sidecar(path), json.dumps(meta, indent=2, sort_keys=True))
    logger.debug("Saved checkpoint %s", path)


def read_sidecar(path: PathLike) -> Dict[str, Any]:
    sidecar = _sidecar(path)
    if not sidecar.exists():
        raise FormatError(f"missing config sidecar {sidecar}", None, str(path))
    try:
        return json.loads(sidecar.read_text(encoding="utf-8"))
    except ValueError as exc:
        raise FormatError(f"invalid config sidecar: {exc}", None, str(sidecar)) from exc


def load_model(path: PathLike) -> Transformer:
    meta = read_sidecar(path)
    sidecar = _sidecar(path)
    try:
        config = ModelConfig(**meta["model"])
        vocab_size = int(meta["vocab_size"])
    except (KeyError, ValueError, TypeError) as exc:
        raise FormatError(f"invalid config sidecar: {exc}", None, str(sidecar)) from exc
    model = Transformer(config, vocab_size, seed=int(meta.get("seed", 1)))
    model.load_state_dict(read_checkpoint(path))
    return model


def average_states(states: Sequence[Dict[str, np.ndarray]]) -> "OrderedDict[str, np.ndarray]":
    if not states:
        raise ParameterError("no checkpoints to average")
    reference = states[0]
    for k, state in enumerate(states[1:], start=1):
        if list(state) != list(reference):
            raise FormatError(f"checkpoint {k} has different parameter names")
        for name, value in state.items():
            if value.shape != reference[name].shape:
                raise FormatError(f"checkpoint {k}: {name!r} has shape {value.shape}, expected {reference[name].shape}")
    averaged: "OrderedDict[str, np.ndarray]" = OrderedDict()
    for name in reference:
        total = np.zeros(reference[name].shape, dtype=np.float64)
        for state in states:
            total += state[name]
        averaged[name] = (total / len(states)).astype(np.float32)
    return averaged


def average_checkpoints(paths: Sequence[PathLike], k: int) -> Transformer:
    """Arithmetic mean of the parameters of the last ``k`` checkpoints in ``paths``."""
    if k < 1 or not paths:
        raise ParameterError(f"need at least one checkpoint and k >= 1 (got {len(paths)} paths, k={k})")
    chosen = list(paths)[-k:]
    model = load_model(chosen[-1])
    model.load_state_dict(average_states([read_checkpoint(p) for p in chosen]))
    logger.info("Averaged %d checkpoints: %s", len(chosen), ", ".join(Path(p).name for p in chosen))
    return model
