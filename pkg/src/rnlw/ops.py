"""Optimized forward kernels.

Convolution lowers image patches to columns and multiplies by the reshaped
weight matrix (im2col + GEMM). Work is partitioned into fixed-size tiles of
output positions; a tile is always computed by exactly one worker through the
same GEMM call shapes, and BLAS itself is pinned to one thread, so results are
bit-identical for any worker count. No kernel mutates its inputs.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import DegenerateShapeError, DimensionError
from .tensor import ConvParams, PoolParams, Tensor, as_tensor

# Cap on the im2col buffer per tile (bytes); tile size depends only on the
# patch length K, never on the worker count, to keep outputs partition-stable.
_TILE_BYTES = 32 * 1024 * 1024

_workers = int(os.environ.get("RNLW_WORKERS", "1"))
_pool: ThreadPoolExecutor | None = None
_pool_size = 0

try:  # keep the BLAS behind numpy single-threaded; tiles provide parallelism
    import threadpoolctl

    _blas_limit = threadpoolctl.threadpool_limits(limits=1, user_api="blas")
except Exception:  # pragma: no cover - threadpoolctl is a declared dependency
    _blas_limit = None


def set_workers(n: int) -> None:
    global _workers
    if n < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    _workers = int(n)


def get_workers() -> int:
    return _workers


def _run_tiles(fn, ntiles: int) -> None:
    """Run fn(tile_index) for every tile, possibly on the worker pool."""
    global _pool, _pool_size
    if _workers == 1 or ntiles == 1:
        for t in range(ntiles):
            fn(t)
        return
    if _pool is None or _pool_size != _workers:
        if _pool is not None:
            _pool.shutdown(wait=True)
        _pool = ThreadPoolExecutor(max_workers=_workers)
        _pool_size = _workers
    list(_pool.map(fn, range(ntiles)))


def _tile_positions(k_rows: int, total: int) -> int:
    per_tile = max(1024, _TILE_BYTES // (4 * max(k_rows, 1)))
    return min(per_tile, total)


def _pad2d(x: Tensor, ph: int, pw: int, value: float = 0.0) -> Tensor:
    if ph == 0 and pw == 0:
        return x
    return np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=value)


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None, p: ConvParams) -> Tensor:
    """Cross-correlation (no kernel flip) with stride/padding/groups."""
    x = as_tensor(x)
    weight = np.ascontiguousarray(weight, dtype=np.float32)
    if weight.shape != p.weight_shape:
        raise DimensionError(
            f"weight shape {weight.shape} does not match conv expecting {p.weight_shape}"
        )
    if bias is not None:
        bias = np.ascontiguousarray(bias, dtype=np.float32).reshape(-1)
        if bias.shape[0] != p.out_channels:
            raise DimensionError(
                f"axis C: bias has {bias.shape[0]} entries, conv produces {p.out_channels}"
            )
    n, c, h, w = x.shape
    _, cout, ho, wo = p.out_shape(x.shape)
    kh, kw = p.kernel
    sh, sw = p.stride

    if p.depthwise and p.groups > 1:
        out = _conv_depthwise(x, weight, p, ho, wo)
    elif kh == 1 and kw == 1 and p.groups == 1:
        out = _conv_1x1(x, weight, p, ho, wo)
    else:
        out = _conv_im2col(x, weight, p, ho, wo)

    if bias is not None:
        out += bias[None, :, None, None]
    return out


def _conv_1x1(x, weight, p: ConvParams, ho, wo):
    n = x.shape[0]
    if p.padding != (0, 0):
        x = _pad2d(x, *p.padding)
    if p.stride != (1, 1):
        x = x[:, :, :: p.stride[0], :: p.stride[1]]
    w2 = weight.reshape(p.out_channels, p.in_channels)
    cols = np.ascontiguousarray(x[:, :, :ho, :wo]).reshape(n, p.in_channels, ho * wo)
    out = np.empty((n, p.out_channels, ho * wo), dtype=np.float32)
    total = ho * wo
    tile = _tile_positions(p.in_channels, total)
    ntiles = (total + tile - 1) // tile

    def run(t):
        lo, hi = t * tile, min((t + 1) * tile, total)
        for b in range(n):
            np.matmul(w2, cols[b, :, lo:hi], out=out[b, :, lo:hi])

    _run_tiles(run, ntiles)
    return out.reshape(n, p.out_channels, ho, wo)


def _conv_depthwise(x, weight, p: ConvParams, ho, wo):
    n, c = x.shape[0], x.shape[1]
    kh, kw = p.kernel
    sh, sw = p.stride
    xp = _pad2d(x, *p.padding)
    out = np.zeros((n, c, ho, wo), dtype=np.float32)
    # Accumulate taps in fixed row-major (ki, kj) order for determinism.
    for ki in range(kh):
        for kj in range(kw):
            patch = xp[:, :, ki : ki + sh * ho : sh, kj : kj + sw * wo : sw]
            out += weight[:, 0, ki, kj][None, :, None, None] * patch
    return out


def _conv_im2col(x, weight, p: ConvParams, ho, wo):
    n = x.shape[0]
    kh, kw = p.kernel
    sh, sw = p.stride
    cin_g = p.in_channels // p.groups
    cout_g = p.out_channels // p.groups
    k_rows = cin_g * kh * kw
    xp = _pad2d(x, *p.padding)
    out = np.empty((n, p.out_channels, ho * wo), dtype=np.float32)
    w2 = weight.reshape(p.groups, cout_g, k_rows)

    total = ho * wo
    tile = _tile_positions(k_rows, total)
    ntiles = (total + tile - 1) // tile
    ky, kx = np.divmod(np.arange(kh * kw), kw)

    def run(t):
        lo, hi = t * tile, min((t + 1) * tile, total)
        pos = np.arange(lo, hi)
        oy, ox = np.divmod(pos, wo)
        iy = oy[None, :] * sh + ky[:, None]  # (kh*kw, T)
        ix = ox[None, :] * sw + kx[:, None]
        for b in range(n):
            for g in range(p.groups):
                ch = slice(g * cin_g, (g + 1) * cin_g)
                cols = xp[b, ch][:, iy, ix].reshape(k_rows, hi - lo)
                np.matmul(w2[g], cols, out=out[b, g * cout_g : (g + 1) * cout_g, lo:hi])

    _run_tiles(run, ntiles)
    return out.reshape(n, p.out_channels, ho, wo)


def maxpool2d(x: Tensor, p: PoolParams) -> Tensor:
    """Window max; padding cells participate with value -inf."""
    x = as_tensor(x)
    n, c, ho, wo = p.out_shape(x.shape)
    kh, kw = p.kernel
    sh, sw = p.stride
    xp = _pad2d(x, *p.padding, value=-np.inf)
    out = np.full((n, c, ho, wo), -np.inf, dtype=np.float32)
    for ki in range(kh):
        for kj in range(kw):
            np.maximum(out, xp[:, :, ki : ki + sh * ho : sh, kj : kj + sw * wo : sw], out=out)
    return out


def relu(x: Tensor) -> Tensor:
    return np.maximum(as_tensor(x), np.float32(0.0))


def add(a: Tensor, b: Tensor) -> Tensor:
    a = as_tensor(a)
    b = as_tensor(b)
    if a.shape != b.shape:
        raise DimensionError(f"add operands differ: {a.shape} vs {b.shape}")
    return a + b


def bn_affine(x: Tensor, scale: Tensor, shift: Tensor) -> Tensor:
    """Per-channel y = scale * x + shift (inference-time folded batch norm)."""
    x = as_tensor(x)
    scale = np.asarray(scale, dtype=np.float32).reshape(-1)
    shift = np.asarray(shift, dtype=np.float32).reshape(-1)
    if scale.shape[0] != x.shape[1] or shift.shape[0] != x.shape[1]:
        raise DimensionError(
            f"axis C: affine vectors have {scale.shape[0]}/{shift.shape[0]} entries, "
            f"input has {x.shape[1]} channels"
        )
    return x * scale[None, :, None, None] + shift[None, :, None, None]


def _resize_coords(out_size: int, in_size: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Half-pixel (non-corner-aligned) source coordinates, clamped to the image."""
    scale = in_size / out_size
    src = (np.arange(out_size, dtype=np.float64) + 0.5) * scale - 0.5
    src = np.clip(src, 0.0, in_size - 1)
    i0 = np.floor(src).astype(np.int64)
    i1 = np.minimum(i0 + 1, in_size - 1)
    frac = (src - i0).astype(np.float32)
    return i0, i1, frac


def upsample_bilinear(x: Tensor, out_h: int, out_w: int) -> Tensor:
    x = as_tensor(x)
    if out_h < 1 or out_w < 1:
        raise DegenerateShapeError(f"upsample target {(out_h, out_w)} must be >= 1")
    n, c, h, w = x.shape
    if (out_h, out_w) == (h, w):
        return x.copy()
    y0, y1, fy = _resize_coords(out_h, h)
    x0, x1, fx = _resize_coords(out_w, w)
    # delta form of the lerp keeps constant inputs bit-exact
    r0 = x[:, :, y0]
    r1 = x[:, :, y1]
    top = r0[:, :, :, x0] + fx * (r0[:, :, :, x1] - r0[:, :, :, x0])
    bot = r1[:, :, :, x0] + fx * (r1[:, :, :, x1] - r1[:, :, :, x0])
    out = top + fy[None, None, :, None] * (bot - top)
    return np.ascontiguousarray(out, dtype=np.float32)
