"""Portable weight container (RNLW format).

Layout, all little-endian:
  magic "RNLW" | u32 version=1 | u32 tensor count | per tensor:
  u16 name length | UTF-8 name | u8 dtype (0 = f32) | u8 rank |
  rank x u64 extents | raw f32 payload.

Tensors are written sorted by name, so output bytes are deterministic.
Payloads round-trip bit-exactly.
"""
from __future__ import annotations

import struct

import numpy as np

from .errors import DataError

MAGIC = b"RNLW"
VERSION = 1
DTYPE_F32 = 0


def write_container(path, tensors: dict[str, np.ndarray]) -> None:
    names = sorted(tensors)
    if len(set(names)) != len(names):
        raise DataError("tensor names must be unique")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(names)))
        for name in names:
            arr = np.asarray(tensors[name], dtype="<f4")  # tobytes() emits C order
            raw = name.encode("utf-8")
            if len(raw) > 0xFFFF:
                raise DataError(f"tensor name too long: {name[:40]}...")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())


def read_container(path) -> dict[str, np.ndarray]:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:4] != MAGIC:
        raise DataError(f"{path}: bad magic {data[:4]!r}, expected {MAGIC!r}")
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise DataError(f"{path}: unsupported container version {version}")
    off = 12
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", data, off)
        off += 2
        name = data[off : off + nlen].decode("utf-8")
        off += nlen
        dtype, rank = struct.unpack_from("<BB", data, off)
        off += 2
        if dtype != DTYPE_F32:
            raise DataError(f"{path}: tensor {name!r} has unsupported dtype code {dtype}")
        shape = struct.unpack_from(f"<{rank}Q", data, off)
        off += 8 * rank
        n = int(np.prod(shape)) if rank else 1
        payload = data[off : off + 4 * n]
        if len(payload) != 4 * n:
            raise DataError(f"{path}: truncated payload for tensor {name!r}")
        off += 4 * n
        if name in out:
            raise DataError(f"{path}: duplicate tensor name {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).astype(np.float32)
    return out
