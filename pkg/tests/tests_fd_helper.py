"""Finite-difference checks shared by the acceptance suite (criterion 6)."""
import numpy as np

from rnlw import autograd
from rnlw.oracle import naive_conv2d, naive_maxpool2d, naive_upsample_bilinear
from rnlw.tensor import ConvParams, PoolParams

EPS = 1e-3


def _fd(f, x, cot):
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat, gf = x.reshape(-1), g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + EPS
        hi = float((f(x) * cot).sum())
        flat[i] = orig - EPS
        lo = float((f(x) * cot).sum())
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * EPS)
    return g


def _close(a, b, tol=1e-3):
    denom = max(np.abs(b).max(), 1e-6)
    assert np.abs(a - b).max() / denom <= tol


def fd_check_all():
    rng = np.random.default_rng(0)

    p = ConvParams(2, 3, (3, 3), padding=(1, 1))
    x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    w = rng.standard_normal(p.weight_shape).astype(np.float32)
    b = rng.standard_normal(3).astype(np.float32)
    g = rng.standard_normal((1, 3, 6, 6)).astype(np.float32)
    gx, gw, gb = autograd.conv2d_vjp(x, w, b, p, g)
    _close(gx, _fd(lambda v: naive_conv2d(v, w, b, p), x, g))
    _close(gw, _fd(lambda v: naive_conv2d(x, v, b, p), w, g))
    _close(gb, g.sum(axis=(0, 2, 3)), tol=1e-6)

    xr = (rng.uniform(0.1, 1.0, (1, 2, 5, 5)) *
          rng.choice([-1.0, 1.0], (1, 2, 5, 5))).astype(np.float32)
    gr = rng.standard_normal(xr.shape).astype(np.float32)
    _close(autograd.relu_vjp(xr, gr), _fd(lambda v: np.where(v > 0, v, 0.0), xr, gr))

    ga, gb2 = autograd.add_vjp(gr)
    assert (ga == gr).all() and (gb2 == gr).all()

    pp = PoolParams((3, 3), (1, 1), (1, 1))
    xp = rng.permutation(36).astype(np.float32).reshape(1, 1, 6, 6)  # no ties
    gp = rng.standard_normal((1, 1, 6, 6)).astype(np.float32)
    _close(autograd.maxpool2d_vjp(xp, pp, gp), _fd(lambda v: naive_maxpool2d(v, pp), xp, gp))

    xu = rng.standard_normal((1, 2, 3, 4)).astype(np.float32)
    gu = rng.standard_normal((1, 2, 7, 6)).astype(np.float32)
    _close(autograd.upsample_bilinear_vjp(xu, 7, 6, gu),
           _fd(lambda v: naive_upsample_bilinear(v, 7, 6), xu, gu))

    scale = rng.standard_normal(2).astype(np.float32)
    gn = rng.standard_normal(xu.shape).astype(np.float32)
    gxn, _, _ = autograd.bn_affine_vjp(xu, scale, gn)
    _close(gxn, _fd(lambda v: v * scale.astype(np.float64)[None, :, None, None], xu, gn))
