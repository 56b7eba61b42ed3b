"""Checkpoint-to-container converter for the RNLW inference engine.

Reads PyTorch state dicts (.pt/.pth) or numpy archives (.npz), renames
tensors through an explicit name-map file, folds batch-norm statistics into
per-channel affine pairs, and writes the portable RNLW weight container.
"""

__version__ = "0.1.0"

from .convert import ConvertError, convert
from .namemap import parse_name_map

__all__ = ["ConvertError", "convert", "parse_name_map", "__version__"]
