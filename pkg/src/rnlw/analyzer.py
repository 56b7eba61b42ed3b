"""Static parameter / MAC / FLOP accounting over a graph.

Conventions (recorded in every report so comparisons are auditable):
  * conv FLOPs = flops_per_mac * MACs + one add per output element when the
    conv carries bias. The default flops_per_mac is 1, i.e. a multiply-add
    counts as one floating point operation; that is the convention under
    which the published per-model totals (e.g. 263B for the original
    ResNet-101 model at 512x512) are reproduced.
  * Non-conv work (bn affine, relu, add, pooling compares, bilinear resize)
    is tallied separately as "aux" FLOPs and excluded from the headline
    total; it is below 2% for the ResNet models.
  * Batch-norm affine contributes 2*C parameters; running statistics are not
    counted.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ComparisonError
from .graph import Graph, infer_shapes
from .tensor import ConvParams, PoolParams

GROUPS = ("backbone", "decoder", "clf")


def node_group(node_id: str) -> str:
    if node_id.startswith("backbone."):
        return "backbone"
    if node_id == "decoder.clf":
        return "clf"
    return "decoder"


def default_conventions(flops_per_mac: int = 1) -> dict:
    return {
        "flops_per_mac": flops_per_mac,
        "headline_flops": "conv+bias",
        "bias_flops": 1,
        "bn_params": "2C_affine",
        "bn_flops_per_element": 2,
        "relu_flops_per_element": 1,
        "add_flops_per_element": 1,
        "maxpool_flops_per_element": "k*k-1",
        "upsample_flops_per_element": 11,
        "upsample_mode": "bilinear_half_pixel",
    }


@dataclass
class LayerReport:
    node_id: str
    op: str
    group: str
    params: int = 0
    macs: int = 0
    flops: int = 0      # conv (+bias) under the flops_per_mac convention
    flops_aux: int = 0  # everything that is not a convolution
    out_shape: tuple | None = None


@dataclass
class ModelReport:
    model: str
    backbone: str
    variant: str
    input_shape: tuple | None
    layers: list[LayerReport]
    conventions: dict
    totals: dict = field(default_factory=dict)

    def _total(self, attr: str, group: str | None = None) -> int:
        return sum(getattr(l, attr) for l in self.layers
                   if group is None or l.group == group)

    def finalize(self) -> "ModelReport":
        t: dict = {}
        for attr in ("params", "macs", "flops", "flops_aux"):
            t[attr] = {"total": self._total(attr)}
            for grp in GROUPS:
                t[attr][grp] = self._total(attr, grp)
        t["flops_all"] = {"total": t["flops"]["total"] + t["flops_aux"]["total"]}
        self.totals = t
        return self

    @property
    def params_total(self) -> int:
        return self.totals["params"]["total"]

    @property
    def flops_total(self) -> int:
        return self.totals["flops"]["total"]

    @property
    def macs_total(self) -> int:
        return self.totals["macs"]["total"]


def _elems(shape) -> int:
    return int(math.prod(shape))


def _layer_report(nid, node, shape, fpm) -> LayerReport:
    rep = LayerReport(nid, node.op, node_group(nid), out_shape=shape)
    if node.op == "conv":
        p: ConvParams = node.params
        w_elems = p.out_channels * (p.in_channels // p.groups) * p.kernel[0] * p.kernel[1]
        rep.params = w_elems + (p.out_channels if p.bias else 0)
        if shape is not None:
            n, _, ho, wo = shape
            rep.macs = w_elems * n * ho * wo
            rep.flops = fpm * rep.macs + (_elems(shape) if p.bias else 0)
    elif node.op == "bn":
        rep.params = 2 * node.params
        if shape is not None:
            rep.flops_aux = 2 * _elems(shape)
    elif shape is not None:
        if node.op == "relu":
            rep.flops_aux = _elems(shape)
        elif node.op == "add":
            rep.flops_aux = _elems(shape)
        elif node.op == "maxpool":
            p: PoolParams = node.params
            rep.flops_aux = (p.kernel[0] * p.kernel[1] - 1) * _elems(shape)
        elif node.op == "upsample":
            rep.flops_aux = 11 * _elems(shape)
    return rep


def _model_meta(graph: Graph) -> tuple[str, str, str]:
    md = graph.metadata
    return (md.get("model", "custom"), md.get("backbone", "?"), md.get("variant", "?"))


def count_params(graph: Graph) -> ModelReport:
    """Parameter accounting only; independent of any input size."""
    model, backbone, variant = _model_meta(graph)
    layers = [_layer_report(nid, graph.nodes[nid], None, 1) for nid in graph.topo_order()]
    return ModelReport(model, backbone, variant, None, layers,
                       default_conventions()).finalize()


def count_flops(graph: Graph, input_shape, flops_per_mac: int = 1) -> ModelReport:
    """Full accounting (params + MACs + FLOPs) at a concrete input size."""
    shapes = infer_shapes(graph, input_shape)
    model, backbone, variant = _model_meta(graph)
    layers = [_layer_report(nid, graph.nodes[nid], shapes[nid], flops_per_mac)
              for nid in graph.topo_order()]
    return ModelReport(model, backbone, variant, tuple(input_shape), layers,
                       default_conventions(flops_per_mac)).finalize()


@dataclass
class Comparison:
    a: str
    b: str
    param_ratio: dict
    flops_ratio: dict
    param_delta: dict
    flops_delta: dict
    dominant_params: str
    dominant_flops: str


def _ratio(x: int, y: int) -> float:
    return math.inf if y == 0 and x > 0 else (1.0 if x == y == 0 else x / y)


def compare_reports(a: ModelReport, b: ModelReport) -> Comparison:
    """Per-subsystem absolute deltas and a/b ratios; conventions must match."""
    if a.conventions != b.conventions:
        raise ComparisonError(
            f"conventions differ: {a.conventions} vs {b.conventions}")
    keys = ("total",) + GROUPS
    pr = {k: _ratio(a.totals["params"][k], b.totals["params"][k]) for k in keys}
    fr = {k: _ratio(a.totals["flops"][k], b.totals["flops"][k]) for k in keys}
    pd = {k: a.totals["params"][k] - b.totals["params"][k] for k in keys}
    fd = {k: a.totals["flops"][k] - b.totals["flops"][k] for k in keys}
    dom_p = max(GROUPS, key=lambda g: abs(pd[g]))
    dom_f = max(GROUPS, key=lambda g: abs(fd[g]))
    return Comparison(a.model, b.model, pr, fr, pd, fd, dom_p, dom_f)


# -- rendering -------------------------------------------------------------

def report_kv(rep: ModelReport) -> str:
    """Machine-readable key=value lines in a stable order (CI-diffable)."""
    lines = [f"model={rep.model}", f"backbone={rep.backbone}", f"variant={rep.variant}"]
    if rep.input_shape is not None:
        lines.append("input=" + "x".join(str(v) for v in rep.input_shape))
    for key in sorted(rep.conventions):
        lines.append(f"convention.{key}={rep.conventions[key]}")
    for attr in ("params", "macs", "flops", "flops_aux"):
        lines.append(f"{attr}.total={rep.totals[attr]['total']}")
        for grp in GROUPS:
            lines.append(f"{attr}.{grp}={rep.totals[attr][grp]}")
    lines.append(f"flops_all.total={rep.totals['flops_all']['total']}")
    return "\n".join(lines) + "\n"


def report_table(rep: ModelReport) -> str:
    head = f"{'Model':<34}{'Params,M':>10}{'MACs,B':>10}{'FLOPs,B':>10}{'Aux,B':>8}"
    row = (f"{rep.model:<34}{rep.params_total / 1e6:>10.2f}"
           f"{rep.macs_total / 1e9:>10.2f}{rep.flops_total / 1e9:>10.2f}"
           f"{rep.totals['flops_aux']['total'] / 1e9:>8.2f}")
    sub = []
    for grp in GROUPS:
        sub.append(f"  {grp:<32}{rep.totals['params'][grp] / 1e6:>10.2f}"
                   f"{rep.totals['macs'][grp] / 1e9:>10.2f}"
                   f"{rep.totals['flops'][grp] / 1e9:>10.2f}"
                   f"{rep.totals['flops_aux'][grp] / 1e9:>8.2f}")
    note = (f"(FLOPs = {rep.conventions['flops_per_mac']} x MACs + bias; "
            "aux = bn/relu/add/pool/resize, reported separately)")
    return "\n".join([head, row, *sub, note]) + "\n"


def comparison_table(cmp: Comparison) -> str:
    lines = [f"{'':<10}{'params a/b':>12}{'flops a/b':>12}",
             f"a = {cmp.a}", f"b = {cmp.b}"]
    for k in ("total",) + GROUPS:
        lines.append(f"{k:<10}{cmp.param_ratio[k]:>12.3f}{cmp.flops_ratio[k]:>12.3f}")
    lines.append(f"dominant reduction: params={cmp.dominant_params} flops={cmp.dominant_flops}")
    return "\n".join(lines) + "\n"
