"""Computation-graph IR: nodes, shape inference, topological execution.

Graphs are immutable once built (builders only append). Execution is
single-threaded orchestration over a deterministic topological order (ready
nodes are processed in node-id order); parallelism lives inside the kernels.
Intermediate buffers are released as soon as their last consumer has run.
"""
from __future__ import annotations

import heapq
import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import ops
from .errors import DimensionError, GraphError, ResolutionError
from .tensor import ConvParams, PoolParams, Tensor, UpsampleParams

OP_KINDS = ("input", "output", "conv", "maxpool", "relu", "add", "upsample", "bn")


@dataclass(frozen=True)
class Node:
    id: str
    op: str
    inputs: tuple[str, ...] = ()
    params: object = None  # ConvParams | PoolParams | UpsampleParams | int (bn channels)
    weight_names: tuple[str, ...] = ()


class Graph:
    def __init__(self, metadata: dict | None = None):
        self.nodes: dict[str, Node] = {}
        self.inputs: list[str] = []
        self.outputs: list[str] = []
        self.metadata: dict = dict(metadata or {})

    # -- construction -----------------------------------------------------
    def _add(self, node: Node) -> str:
        if node.id in self.nodes:
            raise GraphError(f"duplicate node id {node.id!r}")
        if node.op not in OP_KINDS:
            raise GraphError(f"unknown op kind {node.op!r}")
        for ref in node.inputs:
            if ref not in self.nodes:
                raise GraphError(f"node {node.id!r} references unknown input {ref!r}")
        self.nodes[node.id] = node
        return node.id

    def add_input(self, nid: str = "input") -> str:
        self._add(Node(nid, "input"))
        self.inputs.append(nid)
        return nid

    def add_conv(self, nid: str, src: str, p: ConvParams) -> str:
        names = [f"{nid}.w"]
        if p.bias:
            names.append(f"{nid}.b")
        return self._add(Node(nid, "conv", (src,), p, tuple(names)))

    def add_maxpool(self, nid: str, src: str, p: PoolParams) -> str:
        return self._add(Node(nid, "maxpool", (src,), p))

    def add_relu(self, nid: str, src: str) -> str:
        return self._add(Node(nid, "relu", (src,)))

    def add_add(self, nid: str, a: str, b: str) -> str:
        return self._add(Node(nid, "add", (a, b)))

    def add_bn(self, nid: str, src: str, channels: int) -> str:
        return self._add(Node(nid, "bn", (src,), int(channels),
                              (f"{nid}.scale", f"{nid}.shift")))

    def add_upsample(self, nid: str, src: str, *, size: tuple[int, int] | None = None,
                     match: str | None = None) -> str:
        if (size is None) == (match is None):
            raise GraphError("upsample takes exactly one of size= or match=")
        if match is not None:
            return self._add(Node(nid, "upsample", (src, match),
                                  UpsampleParams(match_input=True)))
        return self._add(Node(nid, "upsample", (src,), UpsampleParams(size=size)))

    def add_output(self, src: str, nid: str = "output") -> str:
        self._add(Node(nid, "output", (src,)))
        self.outputs.append(nid)
        return nid

    # -- structure --------------------------------------------------------
    def topo_order(self) -> list[str]:
        """Kahn's algorithm; ready nodes are popped in node-id order."""
        indeg = {nid: len(n.inputs) for nid, n in self.nodes.items()}
        consumers: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for nid, n in self.nodes.items():
            for ref in n.inputs:
                consumers[ref].append(nid)
        ready = [nid for nid, d in indeg.items() if d == 0]
        heapq.heapify(ready)
        order = []
        while ready:
            nid = heapq.heappop(ready)
            order.append(nid)
            for c in consumers[nid]:
                indeg[c] -= 1
                if indeg[c] == 0:
                    heapq.heappush(ready, c)
        if len(order) != len(self.nodes):
            stuck = sorted(set(self.nodes) - set(order))
            raise GraphError(f"graph has a cycle involving {stuck[:5]}")
        return order

    def weight_specs(self) -> dict[str, tuple]:
        """Weight name -> shape for every parameterized node."""
        specs: dict[str, tuple] = {}
        for nid in sorted(self.nodes):
            n = self.nodes[nid]
            if n.op == "conv":
                p: ConvParams = n.params
                specs[n.weight_names[0]] = p.weight_shape
                if p.bias:
                    specs[n.weight_names[1]] = (p.out_channels,)
            elif n.op == "bn":
                specs[n.weight_names[0]] = (n.params,)
                specs[n.weight_names[1]] = (n.params,)
        return specs


def infer_shapes(graph: Graph, input_shape: tuple[int, int, int, int]) -> dict[str, tuple]:
    """Exact output shape per node id, using the kernel shape formulas."""
    if len(input_shape) != 4:
        raise DimensionError(f"input shape must be rank 4, got {input_shape}")
    shapes: dict[str, tuple] = {}
    for nid in graph.topo_order():
        n = graph.nodes[nid]
        src = [shapes[r] for r in n.inputs]
        if n.op == "input":
            shapes[nid] = tuple(int(v) for v in input_shape)
        elif n.op == "output":
            shapes[nid] = src[0]
        elif n.op == "conv":
            try:
                shapes[nid] = n.params.out_shape(src[0])
            except DimensionError as e:
                raise DimensionError(f"node {nid!r}: {e}") from None
        elif n.op == "maxpool":
            shapes[nid] = n.params.out_shape(src[0])
        elif n.op in ("relu", "bn"):
            if n.op == "bn" and src[0][1] != n.params:
                raise DimensionError(
                    f"node {nid!r}: axis C: bn expects {n.params} channels, got {src[0][1]}"
                )
            shapes[nid] = src[0]
        elif n.op == "add":
            if src[0] != src[1]:
                raise DimensionError(
                    f"add {nid!r}: inputs {n.inputs[0]!r} {src[0]} and "
                    f"{n.inputs[1]!r} {src[1]} differ"
                )
            shapes[nid] = src[0]
        elif n.op == "upsample":
            p: UpsampleParams = n.params
            if p.match_input:
                out_h, out_w = src[1][2], src[1][3]
            else:
                out_h, out_w = p.size
            shapes[nid] = (src[0][0], src[0][1], out_h, out_w)
    return shapes


@dataclass
class ExecStats:
    """Buffer accounting for one execution (intermediates only)."""
    allocated: int = 0
    peak_live: int = 0
    live: int = 0
    peak_bytes: int = 0
    live_bytes: int = 0

    def on_alloc(self, arr: np.ndarray) -> None:
        self.allocated += 1
        self.live += 1
        self.live_bytes += arr.nbytes
        self.peak_live = max(self.peak_live, self.live)
        self.peak_bytes = max(self.peak_bytes, self.live_bytes)

    def on_free(self, arr: np.ndarray) -> None:
        self.live -= 1
        self.live_bytes -= arr.nbytes


def _resolve(weights: dict, name: str):
    try:
        return weights[name]
    except KeyError:
        raise ResolutionError(f"weight {name!r} not found in store") from None


def _check_weight_shapes(graph: Graph, weights: dict) -> None:
    for name, shape in graph.weight_specs().items():
        arr = _resolve(weights, name)
        if tuple(arr.shape) != tuple(shape):
            raise DimensionError(
                f"weight {name!r} has shape {tuple(arr.shape)}, node expects {tuple(shape)}"
            )


def execute(graph: Graph, weights: dict[str, Tensor], input_tensor: Tensor,
            stats: ExecStats | None = None,
            keep_all: bool = False) -> list[Tensor]:
    """Run the graph; returns tensors aligned with graph.outputs.

    With keep_all=True every node's value is retained and the returned list is
    replaced by a dict id -> value (used by the empirical receptive field).
    """
    if len(graph.inputs) != 1:
        raise GraphError(f"execute expects exactly one graph input, got {graph.inputs}")
    x = np.ascontiguousarray(input_tensor, dtype=np.float32)
    infer_shapes(graph, x.shape)  # fail fast on shape problems, no partial output
    _check_weight_shapes(graph, weights)

    order = graph.topo_order()
    refcount = {nid: 0 for nid in graph.nodes}
    for n in graph.nodes.values():
        for ref in n.inputs:
            refcount[ref] += 1
    for nid in graph.outputs:
        refcount[nid] += 1  # outputs survive the whole run

    values: dict[str, np.ndarray] = {}
    for nid in order:
        n = graph.nodes[nid]
        src = [values[r] for r in n.inputs]
        if n.op == "input":
            out = x
        elif n.op == "output":
            out = src[0]
        elif n.op == "conv":
            p: ConvParams = n.params
            w = _resolve(weights, n.weight_names[0])
            b = _resolve(weights, n.weight_names[1]) if p.bias else None
            out = ops.conv2d(src[0], w, b, p)
        elif n.op == "maxpool":
            out = ops.maxpool2d(src[0], n.params)
        elif n.op == "relu":
            out = ops.relu(src[0])
        elif n.op == "add":
            out = ops.add(src[0], src[1])
        elif n.op == "bn":
            out = ops.bn_affine(src[0], _resolve(weights, n.weight_names[0]),
                                _resolve(weights, n.weight_names[1]))
        elif n.op == "upsample":
            p: UpsampleParams = n.params
            if p.match_input:
                out = ops.upsample_bilinear(src[0], src[1].shape[2], src[1].shape[3])
            else:
                out = ops.upsample_bilinear(src[0], *p.size)
        values[nid] = out
        if stats is not None and n.op not in ("input", "output"):
            stats.on_alloc(out)
        if keep_all:
            continue
        # release producers whose last consumer just ran
        for ref in n.inputs:
            refcount[ref] -= 1
            if refcount[ref] == 0:
                if stats is not None and graph.nodes[ref].op not in ("input", "output"):
                    stats.on_free(values[ref])
                del values[ref]

    if keep_all:
        return values
    return [values[nid] for nid in graph.outputs]


def random_weights(graph: Graph, seed: int) -> dict[str, np.ndarray]:
    """He-style fan-in-scaled uniform weights, deterministic in the seed.

    Conv weights are uniform in +-sqrt(6/fan_in); biases are zero; bn affine
    is the identity (scale 1, shift 0). Names are drawn in sorted order so the
    store is independent of graph construction order.
    """
    rng = np.random.default_rng(seed)
    store: dict[str, np.ndarray] = {}
    specs = graph.weight_specs()
    conv_fanin = {}
    for nid, n in graph.nodes.items():
        if n.op == "conv":
            p: ConvParams = n.params
            conv_fanin[n.weight_names[0]] = (p.in_channels // p.groups) * p.kernel[0] * p.kernel[1]
    for name in sorted(specs):
        shape = specs[name]
        if name in conv_fanin:
            bound = math.sqrt(6.0 / conv_fanin[name])
            store[name] = rng.uniform(-bound, bound, size=shape).astype(np.float32)
        elif name.endswith(".scale"):
            store[name] = np.ones(shape, dtype=np.float32)
        else:  # biases and bn shifts start at zero
            store[name] = np.zeros(shape, dtype=np.float32)
    return store


def _fmt_params(n: Node) -> str:
    if n.op == "conv":
        p: ConvParams = n.params
        s = (f"k{p.kernel[0]}x{p.kernel[1]} s{p.stride[0]}x{p.stride[1]} "
             f"p{p.padding[0]}x{p.padding[1]} c{p.in_channels}->{p.out_channels}")
        if p.groups != 1:
            s += f" g{p.groups}"
        if p.bias:
            s += " bias"
        return s
    if n.op == "maxpool":
        p: PoolParams = n.params
        return (f"k{p.kernel[0]}x{p.kernel[1]} s{p.stride[0]}x{p.stride[1]} "
                f"p{p.padding[0]}x{p.padding[1]}")
    if n.op == "bn":
        return f"c{n.params}"
    if n.op == "upsample":
        return "match" if n.params.match_input else f"size{n.params.size}"
    return "-"


def dump(graph: Graph, input_shape: tuple[int, int, int, int]) -> str:
    """Human-readable topological listing, one node per line (golden-file format)."""
    shapes = infer_shapes(graph, input_shape)
    buf = io.StringIO()
    for nid in graph.topo_order():
        n = graph.nodes[nid]
        ins = ",".join(n.inputs) if n.inputs else "-"
        shp = "x".join(str(v) for v in shapes[nid])
        buf.write(f"{nid}  {n.op}  {_fmt_params(n)}  <- {ins}  -> {shp}\n")
    return buf.getvalue()
