"""Vector-Jacobian products against central finite differences.

The finite-difference oracle perturbs one input entry at a time and runs the
float64 naive forward kernels, so it is independent of both the optimized
forward path and the analytic backward path.
"""
import numpy as np
import pytest

from rnlw import autograd, ops
from rnlw.errors import CapabilityError
from rnlw.oracle import naive_conv2d, naive_maxpool2d, naive_upsample_bilinear
from rnlw.tensor import ConvParams, PoolParams

EPS = 1e-3


def fd_grad(f, x, cotangent):
    """d<cotangent, f(x)>/dx by central differences, entry by entry."""
    x = np.asarray(x, dtype=np.float64)
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + EPS
        hi = float((f(x) * cotangent).sum())
        flat[i] = orig - EPS
        lo = float((f(x) * cotangent).sum())
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * EPS)
    return g


def rel_err(a, b):
    denom = max(np.abs(b).max(), 1e-6)
    return np.abs(a - b).max() / denom


class TestConvVjp:
    def test_matches_finite_differences(self, rng=np.random.default_rng(7)):
        p = ConvParams(2, 3, (3, 3), padding=(1, 1))
        x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
        w = rng.standard_normal(p.weight_shape).astype(np.float32)
        b = rng.standard_normal(3).astype(np.float32)
        g = rng.standard_normal((1, 3, 6, 6)).astype(np.float32)
        gx, gw, gb = autograd.conv2d_vjp(x, w, b, p, g)
        assert rel_err(gx, fd_grad(lambda v: naive_conv2d(v, w, b, p), x, g)) <= 1e-3
        assert rel_err(gw, fd_grad(lambda v: naive_conv2d(x, v, b, p), w, g)) <= 1e-3
        assert rel_err(gb, g.sum(axis=(0, 2, 3))) <= 1e-6

    @pytest.mark.parametrize("seed", range(5))
    def test_strided_padded_random(self, seed):
        rng = np.random.default_rng(100 + seed)
        p = ConvParams(2, 2, (int(rng.integers(1, 4)), int(rng.integers(1, 4))),
                       (int(rng.integers(1, 3)), int(rng.integers(1, 3))),
                       (int(rng.integers(0, 2)), int(rng.integers(0, 2))),
                       bias=False)
        x = rng.standard_normal((1, 2, 7, 7)).astype(np.float32)
        w = rng.standard_normal(p.weight_shape).astype(np.float32)
        out_shape = p.out_shape(x.shape)
        g = rng.standard_normal(out_shape).astype(np.float32)
        gx, gw, _ = autograd.conv2d_vjp(x, w, None, p, g)
        assert rel_err(gx, fd_grad(lambda v: naive_conv2d(v, w, None, p), x, g)) <= 1e-3
        assert rel_err(gw, fd_grad(lambda v: naive_conv2d(x, v, None, p), w, g)) <= 1e-3


class TestSimpleVjps:
    def test_relu_dead_unit(self):
        x = np.full((1, 1, 1, 1), -1.0, np.float32)
        g = np.ones_like(x)
        assert autograd.relu_vjp(x, g).item() == 0.0

    def test_relu_fd(self):
        rng = np.random.default_rng(3)
        # keep every entry farther than EPS from the kink at zero
        x = (rng.uniform(0.1, 1.0, (1, 2, 5, 5)) *
             rng.choice([-1.0, 1.0], (1, 2, 5, 5))).astype(np.float32)
        g = rng.standard_normal(x.shape).astype(np.float32)
        got = autograd.relu_vjp(x, g)
        want = fd_grad(lambda v: np.where(v > 0, v, 0.0), x, g)
        assert rel_err(got, want) <= 1e-3

    def test_add_passthrough(self):
        g = np.arange(8, dtype=np.float32).reshape(1, 2, 2, 2)
        ga, gb = autograd.add_vjp(g)
        np.testing.assert_array_equal(ga, g)
        np.testing.assert_array_equal(gb, g)

    def test_bn_fd(self):
        rng = np.random.default_rng(4)
        x = rng.standard_normal((1, 3, 4, 4)).astype(np.float32)
        scale = rng.standard_normal(3).astype(np.float32)
        g = rng.standard_normal(x.shape).astype(np.float32)
        gx, _, _ = autograd.bn_affine_vjp(x, scale, g)
        want = fd_grad(lambda v: v * scale.astype(np.float64)[None, :, None, None], x, g)
        assert rel_err(gx, want) <= 1e-3

    def test_upsample_fd(self):
        rng = np.random.default_rng(5)
        x = rng.standard_normal((1, 2, 3, 4)).astype(np.float32)
        g = rng.standard_normal((1, 2, 7, 6)).astype(np.float32)
        gx = autograd.upsample_bilinear_vjp(x, 7, 6, g)
        want = fd_grad(lambda v: naive_upsample_bilinear(v, 7, 6), x, g)
        assert rel_err(gx, want) <= 1e-3


class TestMaxPoolVjp:
    def test_routes_to_argmax(self):
        x = np.array([[1.0, 4.0], [4.0, 2.0]], np.float32).reshape(1, 1, 2, 2)
        g = np.ones((1, 1, 1, 1), np.float32)
        gx = autograd.maxpool2d_vjp(x, PoolParams((2, 2), (1, 1), (0, 0)), g)
        # two tied maxima; first in row-major scan order wins
        np.testing.assert_array_equal(gx[0, 0], [[0.0, 1.0], [0.0, 0.0]])

    def test_fd_no_ties(self):
        rng = np.random.default_rng(6)
        # well-separated values so the finite difference never crosses a tie
        x = (rng.permutation(36).astype(np.float32).reshape(1, 1, 6, 6)) * 1.0
        p = PoolParams((3, 3), (1, 1), (1, 1))
        g = rng.standard_normal((1, 1, 6, 6)).astype(np.float32)
        gx = autograd.maxpool2d_vjp(x, p, g)
        want = fd_grad(lambda v: naive_maxpool2d(v, p), x, g)
        assert rel_err(gx, want) <= 1e-3

    def test_overlapping_windows_accumulate(self):
        x = np.array([[0.0, 9.0, 0.0]], np.float32).reshape(1, 1, 1, 3)
        p = PoolParams((1, 2), (1, 1), (0, 0))
        g = np.ones((1, 1, 1, 2), np.float32)
        gx = autograd.maxpool2d_vjp(x, p, g)
        np.testing.assert_array_equal(gx[0, 0, 0], [0.0, 2.0, 0.0])


class TestDispatch:
    def test_dispatch_matches_direct(self):
        rng = np.random.default_rng(8)
        x = rng.standard_normal((1, 2, 4, 4)).astype(np.float32)
        g = rng.standard_normal(x.shape).astype(np.float32)
        (got,) = autograd.vjp("relu", (x,), g)
        np.testing.assert_array_equal(got, autograd.relu_vjp(x, g))

    def test_unknown_kind(self):
        with pytest.raises(CapabilityError, match="no vjp"):
            autograd.vjp("softmax", (), np.zeros((1, 1, 1, 1), np.float32))


def test_forward_vs_naive_supports_vjp_inputs():
    """The optimized forward and the float64 oracle stay within FD tolerance."""
    rng = np.random.default_rng(9)
    p = ConvParams(2, 2, (3, 3), padding=(1, 1))
    x = rng.standard_normal((1, 2, 6, 6)).astype(np.float32)
    w = rng.standard_normal(p.weight_shape).astype(np.float32)
    b = rng.standard_normal(2).astype(np.float32)
    assert np.abs(ops.conv2d(x, w, b, p) - naive_conv2d(x, w, b, p)).max() <= 1e-5
