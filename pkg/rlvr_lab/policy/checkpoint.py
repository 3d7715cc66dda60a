"""Self-describing checkpoint container.

Layout: 8-byte magic, little-endian uint32 header length, UTF-8 JSON
header (sorted keys), then every parameter as little-endian float64 in
``parameter_shapes`` order.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Union

import numpy as np

from rlvr_lab.policy.model import ModelConfig, PolicyParams, parameter_shapes
from rlvr_lab.tensor import Tensor

logger = logging.getLogger(__name__)

MAGIC = b"RLVRCKPT"
FORMAT_VERSION = 1
_LEN = struct.Struct("<I")


class CheckpointError(ValueError):
    """Unreadable, truncated or incompatible checkpoint file."""


@dataclass
class Checkpoint:
    params: PolicyParams
    rng_state: dict[str, Any] = field(default_factory=dict)
    header: dict[str, Any] = field(default_factory=dict)


def checkpoint_bytes(params: PolicyParams, rng_state: Optional[dict[str, Any]] = None) -> bytes:
    names = parameter_shapes(params.config)
    header = {
        "format_version": FORMAT_VERSION,
        "arch": params.config.model_dump(),
        "rng_state": rng_state or {},
        "params": [{"name": n, "shape": list(s)} for n, s in names],
    }
    blob = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")
    payload = b"".join(params[n].data.astype("<f8").tobytes() for n, _ in names)
    return MAGIC + _LEN.pack(len(blob)) + blob + payload


def save_checkpoint(
    path: Union[str, Path],
    params: PolicyParams,
    rng_state: Optional[dict[str, Any]] = None,
) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(checkpoint_bytes(params, rng_state))
    logger.info("Saved checkpoint %s", path)
    return path


def load_checkpoint(path: Union[str, Path], requires_grad: bool = False) -> Checkpoint:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise CheckpointError(f"cannot read checkpoint {path}: {e}") from e

    if not raw.startswith(MAGIC):
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    offset = len(MAGIC)
    if len(raw) < offset + _LEN.size:
        raise CheckpointError(f"{path}: truncated header")
    (hlen,) = _LEN.unpack_from(raw, offset)
    offset += _LEN.size
    try:
        header = json.loads(raw[offset:offset + hlen].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise CheckpointError(f"{path}: corrupt header ({e})") from e
    offset += hlen

    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    cfg = ModelConfig.model_validate(header["arch"])
    expected = [{"name": n, "shape": list(s)} for n, s in parameter_shapes(cfg)]
    if header.get("params") != expected:
        raise CheckpointError(f"{path}: parameter table does not match the architecture")

    tensors: dict[str, Tensor] = {}
    for name, shape in parameter_shapes(cfg):
        count = int(np.prod(shape))
        end = offset + 8 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated payload at {name}")
        data = np.frombuffer(raw, dtype="<f8", count=count, offset=offset).reshape(shape)
        tensors[name] = Tensor(data.astype(np.float64), requires_grad=requires_grad, name=name)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")

    return Checkpoint(PolicyParams(cfg, tensors), header.get("rng_state", {}), header)
