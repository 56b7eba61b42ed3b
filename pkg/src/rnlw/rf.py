"""Receptive fields: analytic calculus over the graph and a gradient-based
empirical probe.

Analytic composition per spatial axis (size, jump, start = center of the
first unit, all in input-pixel units):
  sliding window (k, s, p): size += (k-1)*jump; start += ((k-1)/2 - p)*jump;
                            jump *= s
  elementwise merge (add):  union of the per-path intervals (upper bound)
  bilinear resize:          jump /= scale (scale = out/in); size unchanged
  pointwise ops:            unchanged (a 1x1 conv leaves the field as-is)

The empirical probe backpropagates a one-hot cotangent from a chosen unit to
the input and reports where the gradient is nonzero; that support is always
contained in the analytic box, and equals it on positive-weight conv chains.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autograd
from .errors import DimensionError, GraphError
from .graph import Graph, execute, infer_shapes
from .tensor import ConvParams, PoolParams, UpsampleParams


@dataclass(frozen=True)
class AxisRF:
    size: float
    jump: float
    start: float

    def interval(self, unit: int = 0) -> tuple[float, float]:
        center = self.start + unit * self.jump
        half = (self.size - 1) / 2.0
        return center - half, center + half


@dataclass(frozen=True)
class RFInfo:
    h: AxisRF
    w: AxisRF

    def box(self, unit_y: int, unit_x: int, bounds: tuple[int, int] | None = None):
        """Integer pixel box (y0, y1, x0, x1), inclusive, optionally clipped."""
        y0, y1 = self.h.interval(unit_y)
        x0, x1 = self.w.interval(unit_x)
        box = [int(np.ceil(y0 - 1e-9)), int(np.floor(y1 + 1e-9)),
               int(np.ceil(x0 - 1e-9)), int(np.floor(x1 + 1e-9))]
        if bounds is not None:
            hh, ww = bounds
            box = [max(box[0], 0), min(box[1], hh - 1), max(box[2], 0), min(box[3], ww - 1)]
        return tuple(box)


def _slide(rf: AxisRF, k: int, s: int, p: int) -> AxisRF:
    return AxisRF(rf.size + (k - 1) * rf.jump,
                  rf.jump * s,
                  rf.start + ((k - 1) / 2.0 - p) * rf.jump)


def _union(a: AxisRF, b: AxisRF) -> AxisRF:
    if abs(a.jump - b.jump) > 1e-6 * max(a.jump, b.jump):
        raise GraphError(f"cannot merge receptive fields with jumps {a.jump} vs {b.jump}")
    lo = min(a.interval()[0], b.interval()[0])
    hi = max(a.interval()[1], b.interval()[1])
    return AxisRF(hi - lo + 1, a.jump, (lo + hi) / 2.0)


def analytic_rf(graph: Graph, node_id: str,
                input_shape: tuple[int, int, int, int] | None = None) -> RFInfo:
    """Receptive-field descriptor of node_id relative to the graph input."""
    if node_id not in graph.nodes:
        raise GraphError(f"unknown node {node_id!r}")
    shapes = infer_shapes(graph, input_shape) if input_shape is not None else None
    rfs: dict[str, RFInfo] = {}
    for nid in graph.topo_order():
        n = graph.nodes[nid]
        if n.op == "input":
            rfs[nid] = RFInfo(AxisRF(1, 1, 0.0), AxisRF(1, 1, 0.0))
            continue
        srcs = [rfs[r] for r in n.inputs if r in rfs]
        if not srcs:
            continue  # not reachable from the input
        if n.op in ("relu", "bn", "output"):
            rfs[nid] = srcs[0]
        elif n.op == "conv":
            p: ConvParams = n.params
            rfs[nid] = RFInfo(_slide(srcs[0].h, p.kernel[0], p.stride[0], p.padding[0]),
                              _slide(srcs[0].w, p.kernel[1], p.stride[1], p.padding[1]))
        elif n.op == "maxpool":
            p: PoolParams = n.params
            rfs[nid] = RFInfo(_slide(srcs[0].h, p.kernel[0], p.stride[0], p.padding[0]),
                              _slide(srcs[0].w, p.kernel[1], p.stride[1], p.padding[1]))
        elif n.op == "add":
            if len(srcs) != 2:
                rfs[nid] = srcs[0]
            else:
                rfs[nid] = RFInfo(_union(srcs[0].h, srcs[1].h), _union(srcs[0].w, srcs[1].w))
        elif n.op == "upsample":
            p: UpsampleParams = n.params
            if shapes is None:
                raise GraphError(
                    "analytic_rf needs input_shape to resolve upsample scale factors")
            in_shape = shapes[n.inputs[0]]
            out_shape = shapes[nid]
            src = rfs[n.inputs[0]]
            rfs[nid] = RFInfo(
                AxisRF(src.h.size, src.h.jump * in_shape[2] / out_shape[2], src.h.start),
                AxisRF(src.w.size, src.w.jump * in_shape[3] / out_shape[3], src.w.start))
    if node_id not in rfs:
        raise GraphError(f"node {node_id!r} is not reachable from the graph input")
    return rfs[node_id]


@dataclass
class SupportResult:
    grad: np.ndarray          # |grad| maxed over batch and channel, (H, W)
    mask: np.ndarray          # grad above threshold_frac * max
    exact_mask: np.ndarray    # grad != 0
    bbox: tuple | None        # (y0, y1, x0, x1) of mask, inclusive; None if empty
    exact_bbox: tuple | None
    max_abs: float


def _bbox_of(mask: np.ndarray):
    ys, xs = np.nonzero(mask)
    if ys.size == 0:
        return None
    return (int(ys.min()), int(ys.max()), int(xs.min()), int(xs.max()))


def empirical_rf(graph: Graph, weights: dict, node_id: str, unit: tuple[int, int, int],
                 input_shape: tuple[int, int, int, int], input_tensor=None,
                 threshold_frac: float = 0.01) -> SupportResult:
    """Backpropagate a one-hot cotangent from (c, y, x) of node_id to the input.

    A dead path (all-zero gradient) yields an empty support, not an error.
    """
    if node_id not in graph.nodes:
        raise GraphError(f"unknown node {node_id!r}")
    rng = np.random.default_rng(0)
    x = (np.asarray(input_tensor, dtype=np.float32) if input_tensor is not None
         else rng.standard_normal(input_shape).astype(np.float32))
    values = execute(graph, weights, x, keep_all=True)
    if node_id not in values:
        raise GraphError(f"node {node_id!r} produced no value")
    c, y, xx = unit
    tgt = values[node_id]
    if not (0 <= c < tgt.shape[1] and 0 <= y < tgt.shape[2] and 0 <= xx < tgt.shape[3]):
        raise DimensionError(f"unit {unit} outside node shape {tgt.shape}")

    grads: dict[str, np.ndarray] = {node_id: np.zeros_like(tgt)}
    grads[node_id][0, c, y, xx] = 1.0
    order = graph.topo_order()
    input_id = graph.inputs[0]
    for nid in reversed(order):
        if nid not in grads:
            continue
        n = graph.nodes[nid]
        g = grads.pop(nid)
        if nid == input_id:
            grads[nid] = g  # keep the final input gradient
            break
        if n.op in ("output",):
            ingrads = (g,)
        elif n.op == "conv":
            p: ConvParams = n.params
            w = weights[n.weight_names[0]]
            b = weights[n.weight_names[1]] if p.bias else None
            gx, _, _ = autograd.conv2d_vjp(values[n.inputs[0]], w, b, p, g)
            ingrads = (gx,)
        elif n.op == "maxpool":
            ingrads = (autograd.maxpool2d_vjp(values[n.inputs[0]], n.params, g),)
        elif n.op == "relu":
            ingrads = (autograd.relu_vjp(values[n.inputs[0]], g),)
        elif n.op == "add":
            ingrads = autograd.add_vjp(g)
        elif n.op == "bn":
            gx, _, _ = autograd.bn_affine_vjp(values[n.inputs[0]],
                                              weights[n.weight_names[0]], g)
            ingrads = (gx,)
        elif n.op == "upsample":
            out_h, out_w = g.shape[2], g.shape[3]
            gx = autograd.upsample_bilinear_vjp(values[n.inputs[0]], out_h, out_w, g)
            ingrads = (gx, None) if len(n.inputs) == 2 else (gx,)
        else:
            continue
        for ref, gi in zip(n.inputs, ingrads):
            if gi is None:
                continue
            if ref in grads:
                grads[ref] = grads[ref] + gi
            else:
                grads[ref] = gi

    gin = grads.get(input_id)
    field = (np.abs(gin).max(axis=(0, 1)) if gin is not None
             else np.zeros(input_shape[2:], dtype=np.float32))
    max_abs = float(field.max())
    exact = field > 0
    mask = field > threshold_frac * max_abs if max_abs > 0 else np.zeros_like(exact)
    return SupportResult(field, mask, exact, _bbox_of(mask), _bbox_of(exact), max_abs)
