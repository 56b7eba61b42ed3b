"""Naive reference kernels.

Direct loop implementations, accumulated in float64. Deliberately independent
of the optimized path: no im2col, no vectorized window tricks. Only suitable
for small tensors; the test suite uses them as ground truth.
"""
from __future__ import annotations

import numpy as np

from .tensor import ConvParams, PoolParams


def naive_conv2d(x, weight, bias, p: ConvParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    weight = np.asarray(weight, dtype=np.float64)
    n, c, h, w = x.shape
    _, cout, ho, wo = p.out_shape(x.shape)
    kh, kw = p.kernel
    sh, sw = p.stride
    ph, pw = p.padding
    cin_g = p.in_channels // p.groups
    cout_g = p.out_channels // p.groups
    out = np.zeros((n, cout, ho, wo), dtype=np.float64)
    for b in range(n):
        for oc in range(cout):
            g = oc // cout_g
            for oy in range(ho):
                for ox in range(wo):
                    acc = 0.0
                    for ic in range(cin_g):
                        for ki in range(kh):
                            iy = oy * sh + ki - ph
                            if iy < 0 or iy >= h:
                                continue
                            for kj in range(kw):
                                ix = ox * sw + kj - pw
                                if ix < 0 or ix >= w:
                                    continue
                                acc += x[b, g * cin_g + ic, iy, ix] * weight[oc, ic, ki, kj]
                    if bias is not None:
                        acc += float(bias[oc])
                    out[b, oc, oy, ox] = acc
    return out


def naive_maxpool2d(x, p: PoolParams) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    _, _, ho, wo = p.out_shape(x.shape)
    kh, kw = p.kernel
    sh, sw = p.stride
    ph, pw = p.padding
    out = np.full((n, c, ho, wo), -np.inf, dtype=np.float64)
    for b in range(n):
        for ch in range(c):
            for oy in range(ho):
                for ox in range(wo):
                    best = -np.inf
                    for ki in range(kh):
                        iy = oy * sh + ki - ph
                        if iy < 0 or iy >= h:
                            continue
                        for kj in range(kw):
                            ix = ox * sw + kj - pw
                            if ix < 0 or ix >= w:
                                continue
                            v = x[b, ch, iy, ix]
                            if v > best:
                                best = v
                    out[b, ch, oy, ox] = best
    return out


def naive_upsample_bilinear(x, out_h: int, out_w: int) -> np.ndarray:
    """Per-pixel half-pixel bilinear interpolation, scalar arithmetic."""
    x = np.asarray(x, dtype=np.float64)
    n, c, h, w = x.shape
    out = np.zeros((n, c, out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        sy = min(max((oy + 0.5) * h / out_h - 0.5, 0.0), h - 1)
        y0 = int(np.floor(sy))
        y1 = min(y0 + 1, h - 1)
        fy = sy - y0
        for ox in range(out_w):
            sx = min(max((ox + 0.5) * w / out_w - 0.5, 0.0), w - 1)
            x0 = int(np.floor(sx))
            x1 = min(x0 + 1, w - 1)
            fx = sx - x0
            for b in range(n):
                for ch in range(c):
                    top = x[b, ch, y0, x0] * (1 - fx) + x[b, ch, y0, x1] * fx
                    bot = x[b, ch, y1, x0] * (1 - fx) + x[b, ch, y1, x1] * fx
                    out[b, ch, oy, ox] = top * (1 - fy) + bot * fy
    return out


def naive_relu(x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, 0.0)


def naive_add(a, b) -> np.ndarray:
    return np.asarray(a, dtype=np.float64) + np.asarray(b, dtype=np.float64)
