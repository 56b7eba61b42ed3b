"""CPU inference engine and static profiler for RefineNet-family segmentation
networks: original, light-weight (1x1 convolutions, no RCU), and the
intermediate light-weight-with-RCU variant, over ResNet-50/101/152,
MobileNet-v2, and a toy backbone."""

__version__ = "0.1.0"

from .archspec import ArchSpec, build_graph, load_spec, parse_spec, serialize_spec
from .graph import Graph, execute, infer_shapes, random_weights

__all__ = [
    "ArchSpec",
    "Graph",
    "build_graph",
    "execute",
    "infer_shapes",
    "load_spec",
    "parse_spec",
    "random_weights",
    "serialize_spec",
    "__version__",
]
