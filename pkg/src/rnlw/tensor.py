"""Dense NCHW tensor conventions and hyperparameter records.

A tensor is a contiguous float32 numpy array of rank 4, laid out row-major in
(batch, channel, height, width) order. Kernels never mutate their inputs and
always return freshly allocated arrays, so tensors are safe to share between
threads once constructed.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, DegenerateShapeError, DimensionError

Tensor = np.ndarray

DTYPE = np.float32


def as_tensor(x) -> Tensor:
    """Coerce to a contiguous float32 NCHW array, validating rank."""
    arr = np.ascontiguousarray(x, dtype=DTYPE)
    if arr.ndim != 4:
        raise DimensionError(f"expected rank-4 NCHW tensor, got rank {arr.ndim}")
    return arr


def out_extent(size: int, kernel: int, stride: int, pad: int, axis: str) -> int:
    """Output extent of a sliding-window op; raises if the window never fits."""
    out = (size + 2 * pad - kernel) // stride + 1
    if out < 1:
        raise DegenerateShapeError(
            f"axis {axis}: extent {size} with kernel {kernel}, stride {stride}, "
            f"padding {pad} yields empty output"
        )
    return out


@dataclass(frozen=True)
class ConvParams:
    in_channels: int
    out_channels: int
    kernel: tuple[int, int] = (3, 3)
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (0, 0)
    groups: int = 1
    bias: bool = True

    def __post_init__(self):
        kh, kw = self.kernel
        if kh < 1 or kw < 1:
            raise DimensionError(f"kernel extents must be positive, got {self.kernel}")
        if min(self.stride) < 1 or min(self.padding) < 0:
            raise DimensionError("stride must be >= 1 and padding >= 0")
        if self.groups < 1 or self.in_channels % self.groups or self.out_channels % self.groups:
            raise DimensionError(
                f"groups={self.groups} must divide in_channels={self.in_channels} "
                f"and out_channels={self.out_channels}"
            )

    @property
    def weight_shape(self) -> tuple[int, int, int, int]:
        return (self.out_channels, self.in_channels // self.groups, *self.kernel)

    @property
    def depthwise(self) -> bool:
        return self.groups == self.in_channels and self.out_channels == self.in_channels

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, int, int, int]:
        n, c, h, w = in_shape
        if c != self.in_channels:
            raise DimensionError(
                f"axis C: input has {c} channels, conv expects {self.in_channels}"
            )
        ho = out_extent(h, self.kernel[0], self.stride[0], self.padding[0], "H")
        wo = out_extent(w, self.kernel[1], self.stride[1], self.padding[1], "W")
        return (n, self.out_channels, ho, wo)


@dataclass(frozen=True)
class PoolParams:
    kernel: tuple[int, int] = (5, 5)
    stride: tuple[int, int] = (1, 1)
    padding: tuple[int, int] = (2, 2)

    def __post_init__(self):
        kh, kw = self.kernel
        ph, pw = self.padding
        # A window that can lie entirely in padding would reduce over no real
        # cells; rule the configuration out up front.
        if ph >= kh or pw >= kw:
            raise DegenerateShapeError(
                f"pool padding {self.padding} >= kernel {self.kernel}: "
                "window may contain no real cells"
            )

    def out_shape(self, in_shape: tuple[int, ...]) -> tuple[int, int, int, int]:
        n, c, h, w = in_shape
        ho = out_extent(h, self.kernel[0], self.stride[0], self.padding[0], "H")
        wo = out_extent(w, self.kernel[1], self.stride[1], self.padding[1], "W")
        return (n, c, ho, wo)


@dataclass(frozen=True)
class UpsampleParams:
    """Bilinear resize target: explicit size, or match a reference input."""
    size: tuple[int, int] | None = None  # (out_h, out_w); None = match second input
    match_input: bool = field(default=False)

    def __post_init__(self):
        if self.size is None and not self.match_input:
            raise DimensionError("upsample needs an explicit size or a reference input")
        if self.size is not None and min(self.size) < 1:
            raise DimensionError(f"upsample target {self.size} must be >= 1")


# Raw tensor file: magic "RTEN", u32 version, u32 rank, rank x u64 extents,
# then the payload as little-endian float32 in C order.
_RTEN_MAGIC = b"RTEN"
_RTEN_VERSION = 1


def write_rten(path, tensor: Tensor) -> None:
    arr = as_tensor(tensor)
    with open(path, "wb") as fh:
        fh.write(_RTEN_MAGIC)
        fh.write(struct.pack("<II", _RTEN_VERSION, 4))
        fh.write(struct.pack("<4Q", *arr.shape))
        fh.write(arr.astype("<f4").tobytes())


def read_rten(path) -> Tensor:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _RTEN_MAGIC:
            raise DataError(f"{path}: bad magic {magic!r}, expected {_RTEN_MAGIC!r}")
        version, rank = struct.unpack("<II", fh.read(8))
        if version != _RTEN_VERSION:
            raise DataError(f"{path}: unsupported version {version}")
        if rank != 4:
            raise DataError(f"{path}: rank {rank}, only rank 4 supported")
        shape = struct.unpack("<4Q", fh.read(32))
        count = int(np.prod(shape))
        payload = fh.read(count * 4)
        if len(payload) != count * 4:
            raise DataError(f"{path}: truncated payload")
        data = np.frombuffer(payload, dtype="<f4").reshape(shape)
    return np.ascontiguousarray(data, dtype=DTYPE)
