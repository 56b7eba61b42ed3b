"""Decoder blocks (RCU, CRP, fusion, CLF) and the full model assembly.

Block geometry by variant:
  original     - 3x3 convolutions everywhere; RCU is two 3x3 convs with a
                 residual skip; two RCUs before and three after each CRP.
  lw_with_rcu  - 1x1 convolutions in adaptation/CRP/fusion; RCU becomes the
                 residual bottleneck (1x1 reduce, 3x3, 1x1 restore, halved
                 width), in the same positions.
  lw           - same 1x1 substitutions and no RCU blocks at all; the only
                 3x3 conv left is the final classifier.

Decoding runs deepest-first: the stride-32 features are adapted, refined
(RCUs/CRP), then fused with the next-finer adapted tap, and so on down to
stride 4, where the classifier and a final bilinear upsample to the input
size produce the score map. All decoder convolutions carry bias.
"""
from __future__ import annotations

from dataclasses import dataclass

from .archspec import ArchSpec
from .backbones import build_backbone
from .errors import BuildError
from .graph import Graph
from .tensor import ConvParams, PoolParams

# RCU multiplicity around each CRP block, per variant.
RCU_COUNTS = {"original": (2, 3), "lw_with_rcu": (2, 3), "lw": (0, 0)}
BOTTLENECK_REDUCTION = 2


@dataclass(frozen=True)
class BlockHandle:
    entry: str
    exit: str
    in_ch: int
    out_ch: int
    level: int  # 1..4, 4 = deepest
    stride: int


def _decoder_kernel(variant: str) -> tuple[tuple[int, int], tuple[int, int]]:
    """(kernel, padding) for adaptation/CRP/fusion convs of the variant."""
    if variant == "original":
        return (3, 3), (1, 1)
    return (1, 1), (0, 0)


def build_rcu(g: Graph, prefix: str, src: str, in_ch: int, variant: str,
              level: int = 0, stride: int = 0) -> BlockHandle:
    """Residual unit: relu/conv pairs plus identity skip; no batch norm."""
    if in_ch < 1:
        raise BuildError(f"rcu channel count must be positive, got {in_ch}")
    if variant == "original":
        g.add_relu(f"{prefix}.relu1", src)
        g.add_conv(f"{prefix}.conv1", f"{prefix}.relu1",
                   ConvParams(in_ch, in_ch, (3, 3), padding=(1, 1)))
        g.add_relu(f"{prefix}.relu2", f"{prefix}.conv1")
        g.add_conv(f"{prefix}.conv2", f"{prefix}.relu2",
                   ConvParams(in_ch, in_ch, (3, 3), padding=(1, 1)))
        branch = f"{prefix}.conv2"
    elif variant == "lw_with_rcu":
        if in_ch % 4:
            raise BuildError(f"bottleneck rcu needs channels divisible by 4, got {in_ch}")
        mid = in_ch // BOTTLENECK_REDUCTION
        g.add_relu(f"{prefix}.relu1", src)
        g.add_conv(f"{prefix}.conv1", f"{prefix}.relu1", ConvParams(in_ch, mid, (1, 1)))
        g.add_relu(f"{prefix}.relu2", f"{prefix}.conv1")
        g.add_conv(f"{prefix}.conv2", f"{prefix}.relu2",
                   ConvParams(mid, mid, (3, 3), padding=(1, 1)))
        g.add_relu(f"{prefix}.relu3", f"{prefix}.conv2")
        g.add_conv(f"{prefix}.conv3", f"{prefix}.relu3", ConvParams(mid, in_ch, (1, 1)))
        branch = f"{prefix}.conv3"
    else:
        raise BuildError(f"no rcu block in variant {variant!r}")
    g.add_add(f"{prefix}.sum", branch, src)
    return BlockHandle(src, f"{prefix}.sum", in_ch, in_ch, level, stride)


def build_crp(g: Graph, prefix: str, src: str, in_ch: int, stages: int, variant: str,
              level: int = 0, stride: int = 0) -> BlockHandle:
    """Chained residual pooling: relu, then a chain of 5x5 stride-1 max-pools,
    each followed by a conv whose output accumulates into the running sum."""
    if stages < 1:
        raise BuildError(f"crp needs at least one stage, got {stages}")
    kernel, pad = _decoder_kernel(variant)
    g.add_relu(f"{prefix}.relu", src)
    pooled = f"{prefix}.relu"
    acc = f"{prefix}.relu"
    for i in range(1, stages + 1):
        g.add_maxpool(f"{prefix}.pool{i}", pooled, PoolParams((5, 5), (1, 1), (2, 2)))
        pooled = f"{prefix}.pool{i}"
        g.add_conv(f"{prefix}.conv{i}", pooled,
                   ConvParams(in_ch, in_ch, kernel, padding=pad))
        g.add_add(f"{prefix}.sum{i}", acc, f"{prefix}.conv{i}")
        acc = f"{prefix}.sum{i}"
    return BlockHandle(src, acc, in_ch, in_ch, level, stride)


def build_fusion(g: Graph, prefix: str, coarse: BlockHandle, fine: BlockHandle,
                 out_ch: int, variant: str, allow_same_size: bool = False) -> BlockHandle:
    """Per-path conv, coarse path bilinearly upsampled to the finer path's
    spatial size, then elementwise sum."""
    if coarse.stride == fine.stride and not allow_same_size:
        raise BuildError(
            f"fusion inputs share stride {coarse.stride}; nothing to upsample")
    kernel, pad = _decoder_kernel(variant)
    g.add_conv(f"{prefix}.conv_coarse", coarse.exit,
               ConvParams(coarse.out_ch, out_ch, kernel, padding=pad))
    g.add_conv(f"{prefix}.conv_fine", fine.exit,
               ConvParams(fine.out_ch, out_ch, kernel, padding=pad))
    g.add_upsample(f"{prefix}.up", f"{prefix}.conv_coarse", match=f"{prefix}.conv_fine")
    g.add_add(f"{prefix}.sum", f"{prefix}.up", f"{prefix}.conv_fine")
    return BlockHandle(coarse.exit, f"{prefix}.sum", coarse.out_ch, out_ch,
                       fine.level, fine.stride)


def build_clf(g: Graph, prefix: str, src: str, in_ch: int, num_classes: int) -> BlockHandle:
    g.add_conv(f"{prefix}", src, ConvParams(in_ch, num_classes, (3, 3), padding=(1, 1)))
    return BlockHandle(src, prefix, in_ch, num_classes, 1, 4)


def assemble_refinenet(spec: ArchSpec) -> Graph:
    g = Graph(metadata={
        "backbone": spec.backbone,
        "variant": spec.variant,
        "num_classes": spec.num_classes,
        "model": spec.display_name(),
        "spec": spec,
    })
    inp = g.add_input()
    taps = build_backbone(g, inp, spec.backbone)
    pre_n, post_n = RCU_COUNTS[spec.variant]
    adapt_kernel, adapt_pad = _decoder_kernel(spec.variant)

    prev: BlockHandle | None = None
    for idx, level in enumerate((4, 3, 2, 1)):
        width = spec.channel_plan[idx]
        tap_id = taps.ids[level - 1]
        tap_ch = taps.channels[level - 1]
        stride = taps.strides[level - 1]
        lp = f"decoder.l{level}"
        g.add_conv(f"{lp}.adapt", tap_id,
                   ConvParams(tap_ch, width, adapt_kernel, padding=adapt_pad))
        adapted = BlockHandle(tap_id, f"{lp}.adapt", tap_ch, width, level, stride)
        if prev is None:
            cur = adapted
        else:
            cur = build_fusion(g, f"{lp}.fuse", prev, adapted, width, spec.variant)
        for r in range(1, pre_n + 1):
            cur = build_rcu(g, f"{lp}.rcu_pre{r}", cur.exit, width, spec.variant,
                            level, stride)
        cur = build_crp(g, f"{lp}.crp", cur.exit, width, spec.crp_stages, spec.variant,
                        level, stride)
        for r in range(1, post_n + 1):
            cur = build_rcu(g, f"{lp}.rcu_post{r}", cur.exit, width, spec.variant,
                            level, stride)
        prev = cur

    clf = build_clf(g, "decoder.clf", prev.exit, prev.out_ch, spec.num_classes)
    g.add_upsample("decoder.score_up", clf.exit, match=inp)
    g.add_output("decoder.score_up")
    return g
