"""Writer for the RNLW weight container (the engine-side interface format).

Layout, all little-endian:
  magic "RNLW" | u32 version=1 | u32 tensor count | per tensor:
  u16 name length | UTF-8 name | u8 dtype (0 = f32) | u8 rank |
  rank x u64 extents | raw f32 payload.

Tensors are written sorted by name so output bytes are deterministic, and
f32 payloads are copied bit-exactly.
"""
from __future__ import annotations

import struct

import numpy as np

MAGIC = b"RNLW"
VERSION = 1
DTYPE_F32 = 0


def write_container(path, tensors: dict[str, np.ndarray]) -> None:
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(tensors)))
        for name in sorted(tensors):
            arr = np.asarray(tensors[name], dtype="<f4")
            raw = name.encode("utf-8")
            fh.write(struct.pack("<H", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
            fh.write(struct.pack(f"<{arr.ndim}Q", *arr.shape))
            fh.write(arr.tobytes())
