"""Vector-Jacobian products for the forward kernels.

Each function takes the saved forward inputs plus the output cotangent and
returns cotangents for the tensor inputs. Scatter accumulation uses np.add.at,
which applies updates sequentially, so gradients are deterministic. Max-pool
routes gradient to the first maximum in row-major window scan order.
"""
from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import CapabilityError, DimensionError
from .tensor import ConvParams, PoolParams


def conv2d_vjp(x, weight, bias, p: ConvParams, grad_out):
    x = np.asarray(x, dtype=np.float32)
    weight = np.asarray(weight, dtype=np.float32)
    g = np.asarray(grad_out, dtype=np.float32)
    n, _, h, w = x.shape
    _, _, ho, wo = p.out_shape(x.shape)
    if g.shape != (n, p.out_channels, ho, wo):
        raise DimensionError(f"grad_out shape {g.shape} != {(n, p.out_channels, ho, wo)}")
    kh, kw = p.kernel
    sh, sw = p.stride
    ph, pw = p.padding
    cin_g = p.in_channels // p.groups
    cout_g = p.out_channels // p.groups
    k_rows = cin_g * kh * kw

    ky, kx = np.divmod(np.arange(kh * kw), kw)
    oy, ox = np.divmod(np.arange(ho * wo), wo)
    iy = oy[None, :] * sh + ky[:, None]  # padded-frame coords, (kh*kw, T)
    ix = ox[None, :] * sw + kx[:, None]

    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)))
    gxp = np.zeros_like(xp)
    gw = np.zeros_like(weight).reshape(p.groups, cout_g, k_rows)
    w2 = weight.reshape(p.groups, cout_g, k_rows)
    g2 = g.reshape(n, p.groups, cout_g, ho * wo)
    cidx = np.arange(cin_g)[:, None, None]

    for b in range(n):
        for grp in range(p.groups):
            ch = slice(grp * cin_g, (grp + 1) * cin_g)
            cols = xp[b, ch][:, iy, ix].reshape(k_rows, ho * wo)
            gw[grp] += g2[b, grp] @ cols.T
            gcols = (w2[grp].T @ g2[b, grp]).reshape(cin_g, kh * kw, ho * wo)
            np.add.at(gxp[b, ch], (cidx, iy[None], ix[None]), gcols)

    gx = gxp[:, :, ph : ph + h, pw : pw + w]
    gb = g.sum(axis=(0, 2, 3)) if bias is not None else None
    return gx, gw.reshape(weight.shape), gb


def maxpool2d_vjp(x, p: PoolParams, grad_out):
    x = np.asarray(x, dtype=np.float32)
    g = np.asarray(grad_out, dtype=np.float32)
    n, c, h, w = x.shape
    _, _, ho, wo = p.out_shape(x.shape)
    kh, kw = p.kernel
    sh, sw = p.stride
    ph, pw = p.padding
    xp = np.pad(x, ((0, 0), (0, 0), (ph, ph), (pw, pw)), constant_values=-np.inf)
    windows = sliding_window_view(xp, (kh, kw), axis=(2, 3))[:, :, ::sh, ::sw]
    flat = windows.reshape(n, c, ho, wo, kh * kw)
    arg = np.argmax(flat, axis=-1)  # first occurrence in row-major scan
    ay, ax = np.divmod(arg, kw)
    oy = np.arange(ho)[:, None] * sh
    ox = np.arange(wo)[None, :] * sw
    src_y = oy[None, None] + ay - ph  # back to unpadded coords
    src_x = ox[None, None] + ax - pw
    gx = np.zeros_like(x)
    bidx = np.arange(n)[:, None, None, None]
    cidxs = np.arange(c)[None, :, None, None]
    np.add.at(gx, (bidx, cidxs, src_y, src_x), g)
    return gx


def relu_vjp(x, grad_out):
    x = np.asarray(x, dtype=np.float32)
    return np.asarray(grad_out, dtype=np.float32) * (x > 0)


def add_vjp(grad_out):
    g = np.asarray(grad_out, dtype=np.float32)
    return g, g


def bn_affine_vjp(x, scale, grad_out):
    x = np.asarray(x, dtype=np.float32)
    g = np.asarray(grad_out, dtype=np.float32)
    scale = np.asarray(scale, dtype=np.float32).reshape(-1)
    gx = g * scale[None, :, None, None]
    gscale = (g * x).sum(axis=(0, 2, 3))
    gshift = g.sum(axis=(0, 2, 3))
    return gx, gscale, gshift


def upsample_bilinear_vjp(x, out_h: int, out_w: int, grad_out):
    from .ops import _resize_coords

    x = np.asarray(x, dtype=np.float32)
    g = np.asarray(grad_out, dtype=np.float32)
    n, c, h, w = x.shape
    if (out_h, out_w) == (h, w):
        return g.copy()
    y0, y1, fy = _resize_coords(out_h, h)
    x0, x1, fx = _resize_coords(out_w, w)
    gx = np.zeros((n * c, h, w), dtype=np.float32)
    g2 = g.reshape(n * c, out_h, out_w)
    nc = np.arange(n * c)[:, None, None]
    wy = fy[:, None]
    wx = fx[None, :]
    for ys, rowsw in ((y0, 1 - wy), (y1, wy)):
        for xs, colsw in ((x0, 1 - wx), (x1, wx)):
            contrib = g2 * (rowsw * colsw)[None]
            np.add.at(gx, (nc, ys[None, :, None], xs[None, None, :]), contrib)
    return gx.reshape(n, c, h, w)


def vjp(opkind: str, saved: tuple, grad_out):
    """Dispatch on op kind; saved holds the forward call's inputs."""
    if opkind == "conv":
        return conv2d_vjp(*saved, grad_out)
    if opkind == "maxpool":
        return (maxpool2d_vjp(*saved, grad_out),)
    if opkind == "relu":
        return (relu_vjp(*saved, grad_out),)
    if opkind == "add":
        return add_vjp(grad_out)
    if opkind == "bn":
        x, scale, _shift = saved
        return bn_affine_vjp(x, scale, grad_out)
    if opkind == "upsample":
        x, (out_h, out_w) = saved
        return (upsample_bilinear_vjp(x, out_h, out_w, grad_out),)
    raise CapabilityError(f"no vjp for op kind {opkind!r}")
