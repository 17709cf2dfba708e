"""LPGM binary checkpoints.

Layout (little endian)::

    b"LPGM" | u32 version | u32 len | config JSON | 64 bytes schema digest (hex)
    u32 count | count x (u16 len | name | u8 ndim | ndim x u64 | f8 data)
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from ..errors import DigestMismatch
from .model import GnnModel, ModelConfig

MAGIC = b"LPGM"
VERSION = 1


def save_checkpoint(model: GnnModel, path: str | Path, schema_digest: str, extra: dict | None = None) -> None:
    config = {"model": model.config.to_json(), "extra": extra or {}}
    blob = json.dumps(config, sort_keys=True).encode("utf-8")
    digest = schema_digest.encode("ascii").ljust(64, b"\0")[:64]
    params = model.parameters()
    with open(path, "wb") as fh:
        fh.write(MAGIC + struct.pack("<II", VERSION, len(blob)) + blob + digest)
        fh.write(struct.pack("<I", len(params)))
        for name, arr in params:
            raw_name = name.encode("utf-8")
            fh.write(struct.pack("<HB", len(raw_name), arr.ndim) + raw_name)
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path: str | Path, expected_digest: str | None = None) -> tuple[GnnModel, dict]:
    """Restore a model; refuses when ``expected_digest`` differs from the stored one."""
    raw = Path(path).read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path}: not an LPGM checkpoint")
    version, n = struct.unpack_from("<II", raw, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    pos = 12
    config = json.loads(raw[pos:pos + n].decode("utf-8"))
    pos += n
    digest = raw[pos:pos + 64].rstrip(b"\0").decode("ascii")
    pos += 64
    if expected_digest is not None and digest != expected_digest:
        raise DigestMismatch(f"checkpoint schema digest {digest[:12]}... != {expected_digest[:12]}...")
    (count,) = struct.unpack_from("<I", raw, pos)
    pos += 4
    state = {}
    for _ in range(count):
        name_len, ndim = struct.unpack_from("<HB", raw, pos)
        pos += 3
        name = raw[pos:pos + name_len].decode("utf-8")
        pos += name_len
        shape = struct.unpack_from(f"<{ndim}Q", raw, pos)
        pos += 8 * ndim
        size = int(np.prod(shape)) if ndim else 1
        state[name] = np.frombuffer(raw, dtype="<f8", count=size, offset=pos).reshape(shape).copy()
        pos += 8 * size
    model = GnnModel(ModelConfig(**config["model"]))
    model.load_state_dict(state)
    config["schema_digest"] = digest
    return model, config
