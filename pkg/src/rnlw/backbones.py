"""Encoder backbones: ResNet-50/101/152, MobileNet-v2, and a toy net.

Each builder appends nodes under the "backbone." prefix and returns taps at
output strides 4, 8, 16 and 32. Batch norm appears as per-channel affine
nodes (inference-only). ResNet uses the common layout with the stride carried
by the 3x3 convolution of the first block in each downsampling stage.
"""
from __future__ import annotations

from dataclasses import dataclass

from .errors import BuildError
from .graph import Graph
from .tensor import ConvParams, PoolParams


@dataclass(frozen=True)
class BackboneTaps:
    """Node ids and channel counts at output strides 4, 8, 16, 32."""
    ids: tuple[str, str, str, str]
    channels: tuple[int, int, int, int]
    strides: tuple[int, int, int, int] = (4, 8, 16, 32)


def _conv_bn_relu(g: Graph, prefix: str, src: str, cin: int, cout: int,
                  kernel=(3, 3), stride=(1, 1), padding=(1, 1), groups=1,
                  relu=True) -> str:
    g.add_conv(f"{prefix}.conv", src, ConvParams(cin, cout, kernel, stride, padding,
                                                 groups=groups, bias=False))
    g.add_bn(f"{prefix}.bn", f"{prefix}.conv", cout)
    if not relu:
        return f"{prefix}.bn"
    g.add_relu(f"{prefix}.relu", f"{prefix}.bn")
    return f"{prefix}.relu"


RESNET_STAGE_BLOCKS = {50: (3, 4, 6, 3), 101: (3, 4, 23, 3), 152: (3, 8, 36, 3)}


def _resnet_bottleneck(g: Graph, prefix: str, src: str, cin: int, mid: int,
                       cout: int, stride: int) -> str:
    g.add_conv(f"{prefix}.conv1", src, ConvParams(cin, mid, (1, 1), (1, 1), (0, 0), bias=False))
    g.add_bn(f"{prefix}.bn1", f"{prefix}.conv1", mid)
    g.add_relu(f"{prefix}.relu1", f"{prefix}.bn1")
    g.add_conv(f"{prefix}.conv2", f"{prefix}.relu1",
               ConvParams(mid, mid, (3, 3), (stride, stride), (1, 1), bias=False))
    g.add_bn(f"{prefix}.bn2", f"{prefix}.conv2", mid)
    g.add_relu(f"{prefix}.relu2", f"{prefix}.bn2")
    g.add_conv(f"{prefix}.conv3", f"{prefix}.relu2",
               ConvParams(mid, cout, (1, 1), (1, 1), (0, 0), bias=False))
    g.add_bn(f"{prefix}.bn3", f"{prefix}.conv3", cout)
    identity = src
    if stride != 1 or cin != cout:
        g.add_conv(f"{prefix}.down.conv", src,
                   ConvParams(cin, cout, (1, 1), (stride, stride), (0, 0), bias=False))
        g.add_bn(f"{prefix}.down.bn", f"{prefix}.down.conv", cout)
        identity = f"{prefix}.down.bn"
    g.add_add(f"{prefix}.sum", f"{prefix}.bn3", identity)
    g.add_relu(f"{prefix}.out", f"{prefix}.sum")
    return f"{prefix}.out"


def build_resnet(g: Graph, src: str, depth: int) -> BackboneTaps:
    if depth not in RESNET_STAGE_BLOCKS:
        raise BuildError(f"unsupported resnet depth {depth}; valid: 50, 101, 152")
    blocks = RESNET_STAGE_BLOCKS[depth]
    g.add_conv("backbone.stem.conv", src, ConvParams(3, 64, (7, 7), (2, 2), (3, 3), bias=False))
    g.add_bn("backbone.stem.bn", "backbone.stem.conv", 64)
    g.add_relu("backbone.stem.relu", "backbone.stem.bn")
    g.add_maxpool("backbone.stem.pool", "backbone.stem.relu", PoolParams((3, 3), (2, 2), (1, 1)))
    cur = "backbone.stem.pool"
    cin = 64
    tap_ids = []
    for stage, nblocks in enumerate(blocks, start=1):
        mid = 64 * 2 ** (stage - 1)
        cout = mid * 4
        for i in range(nblocks):
            stride = 2 if (i == 0 and stage > 1) else 1
            cur = _resnet_bottleneck(g, f"backbone.layer{stage}.b{i}", cur, cin, mid, cout, stride)
            cin = cout
        tap_ids.append(cur)
    return BackboneTaps(tuple(tap_ids), (256, 512, 1024, 2048))


# t (expansion), c (output channels), n (repeats), s (first stride)
MOBILENET_V2_CONFIG = ((1, 16, 1, 1), (6, 24, 2, 2), (6, 32, 3, 2), (6, 64, 4, 2),
                       (6, 96, 3, 1), (6, 160, 3, 2), (6, 320, 1, 1))


def _inverted_residual(g: Graph, prefix: str, src: str, cin: int, cout: int,
                       stride: int, expand: int) -> str:
    hidden = cin * expand
    cur = src
    if expand != 1:
        cur = _conv_bn_relu(g, f"{prefix}.expand", cur, cin, hidden,
                            kernel=(1, 1), padding=(0, 0))
    cur = _conv_bn_relu(g, f"{prefix}.dw", cur, hidden, hidden,
                        stride=(stride, stride), groups=hidden)
    cur = _conv_bn_relu(g, f"{prefix}.project", cur, hidden, cout,
                        kernel=(1, 1), padding=(0, 0), relu=False)
    if stride == 1 and cin == cout:
        g.add_add(f"{prefix}.sum", cur, src)
        cur = f"{prefix}.sum"
    return cur


def build_mobilenet_v2(g: Graph, src: str) -> BackboneTaps:
    """Width-1.0 inverted-residual stack, ending at the 320-channel bottleneck.

    The classifier-side 1x1 expansion to 1280 channels is omitted; taps sit on
    the last bottleneck of each output-stride regime.
    """
    cur = _conv_bn_relu(g, "backbone.stem", src, 3, 32, stride=(2, 2))
    cin = 32
    stride_now = 2
    taps: dict[int, tuple[str, int]] = {}
    for seq, (t, c, n, s) in enumerate(MOBILENET_V2_CONFIG):
        for i in range(n):
            stride = s if i == 0 else 1
            stride_now *= stride
            cur = _inverted_residual(g, f"backbone.block{seq}.b{i}", cur, cin, c, stride, t)
            cin = c
        taps[stride_now] = (cur, cin)  # last bottleneck at this stride wins
    ids = tuple(taps[s][0] for s in (4, 8, 16, 32))
    chans = tuple(taps[s][1] for s in (4, 8, 16, 32))
    return BackboneTaps(ids, chans)


TOY_CHANNELS = (8, 16, 32, 64)


def build_toy(g: Graph, src: str) -> BackboneTaps:
    """Minimal four-stage encoder for fast tests: conv/2 + relu per stage."""
    g.add_conv("backbone.stem.conv", src, ConvParams(3, 8, (3, 3), (2, 2), (1, 1)))
    g.add_relu("backbone.stem.relu", "backbone.stem.conv")
    cur = "backbone.stem.relu"
    cin = 8
    tap_ids = []
    for i, cout in enumerate(TOY_CHANNELS, start=1):
        g.add_conv(f"backbone.stage{i}.conv", cur, ConvParams(cin, cout, (3, 3), (2, 2), (1, 1)))
        g.add_relu(f"backbone.stage{i}.relu", f"backbone.stage{i}.conv")
        cur = f"backbone.stage{i}.relu"
        cin = cout
        tap_ids.append(cur)
    return BackboneTaps(tuple(tap_ids), TOY_CHANNELS)


def build_backbone(g: Graph, src: str, name: str) -> BackboneTaps:
    if name == "resnet50":
        return build_resnet(g, src, 50)
    if name == "resnet101":
        return build_resnet(g, src, 101)
    if name == "resnet152":
        return build_resnet(g, src, 152)
    if name == "mobilenetv2":
        return build_mobilenet_v2(g, src)
    if name == "toy":
        return build_toy(g, src)
    raise BuildError(f"unknown backbone {name!r}")
