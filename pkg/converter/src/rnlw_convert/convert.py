"""Checkpoint loading, batch-norm folding, and container assembly."""
from __future__ import annotations

import os

import numpy as np

from .container import write_container
from .namemap import NameMap, parse_name_map


class ConvertError(RuntimeError):
    pass


BN_SUFFIXES = ("weight", "bias", "running_mean", "running_var")


def load_checkpoint(path) -> dict[str, np.ndarray]:
    """Load a .npz archive or a PyTorch state dict; values must be float32."""
    ext = os.path.splitext(str(path))[1].lower()
    if ext == ".npz":
        with np.load(path) as z:
            raw = {k: z[k] for k in z.files}
    elif ext in (".pt", ".pth"):
        try:
            import torch
        except ImportError:
            raise ConvertError(
                f"{path}: loading PyTorch checkpoints requires the torch package")
        obj = torch.load(path, map_location="cpu", weights_only=True)
        if hasattr(obj, "state_dict"):
            obj = obj.state_dict()
        if not isinstance(obj, dict):
            raise ConvertError(f"{path}: expected a state dict, got {type(obj).__name__}")
        if "state_dict" in obj and isinstance(obj["state_dict"], dict):
            obj = obj["state_dict"]
        raw = {k: v.detach().cpu().numpy() for k, v in obj.items()
               if hasattr(v, "detach")}
    else:
        raise ConvertError(f"{path}: unsupported checkpoint format {ext!r} "
                           "(expected .npz, .pt, or .pth)")
    out = {}
    for name, arr in raw.items():
        arr = np.asarray(arr)
        if arr.dtype != np.float32:
            if name.endswith("num_batches_tracked"):
                continue  # bookkeeping scalar, never mapped
            raise ConvertError(
                f"{path}: tensor {name!r} has dtype {arr.dtype}, only float32 is supported")
        out[name] = arr
    return out


def fold_bn(gamma, beta, mean, var, eps: float) -> tuple[np.ndarray, np.ndarray]:
    """scale = gamma / sqrt(var + eps); shift = beta - scale * mean."""
    g = np.asarray(gamma, dtype=np.float64)
    b = np.asarray(beta, dtype=np.float64)
    m = np.asarray(mean, dtype=np.float64)
    v = np.asarray(var, dtype=np.float64)
    scale = g / np.sqrt(v + eps)
    shift = b - scale * m
    return scale.astype(np.float32), shift.astype(np.float32)


def assemble(checkpoint: dict[str, np.ndarray], nm: NameMap
             ) -> tuple[dict[str, np.ndarray], list[str]]:
    """Apply the name map; returns (engine tensors, warnings for unmapped)."""
    out: dict[str, np.ndarray] = {}
    used: set[str] = set()
    missing: list[str] = []

    for rule in nm.copies:
        arr = checkpoint.get(rule.src)
        if arr is None:
            missing.append(rule.src)
            continue
        used.add(rule.src)
        if rule.shape is not None and tuple(arr.shape) != rule.shape:
            raise ConvertError(
                f"line {rule.line}: {rule.src!r} has shape {tuple(arr.shape)}, "
                f"map annotation says {rule.shape}")
        out[rule.dst] = arr

    for rule in nm.folds:
        parts = {}
        for suffix in BN_SUFFIXES:
            name = f"{rule.prefix}.{suffix}"
            if name not in checkpoint:
                missing.append(name)
            else:
                parts[suffix] = checkpoint[name]
                used.add(name)
        if len(parts) != 4:
            continue
        if rule.channels is not None and parts["weight"].shape != (rule.channels,):
            raise ConvertError(
                f"line {rule.line}: bn {rule.prefix!r} has {parts['weight'].shape[0]} "
                f"channels, map annotation says {rule.channels}")
        scale, shift = fold_bn(parts["weight"], parts["bias"],
                               parts["running_mean"], parts["running_var"], rule.eps)
        out[f"{rule.dst}.scale"] = scale
        out[f"{rule.dst}.shift"] = shift

    if missing:
        raise ConvertError(
            f"{len(missing)} mapped checkpoint tensor(s) missing: "
            + ", ".join(sorted(missing)))
    warnings = [f"unmapped checkpoint tensor: {n}"
                for n in sorted(set(checkpoint) - used)]
    return out, warnings


def convert(checkpoint_path, name_map_path, out_path) -> list[str]:
    """Convert a checkpoint into an RNLW container; returns warning lines."""
    with open(name_map_path, "r", encoding="utf-8") as fh:
        nm = parse_name_map(fh.read())
    checkpoint = load_checkpoint(checkpoint_path)
    tensors, warnings = assemble(checkpoint, nm)
    write_container(out_path, tensors)
    return warnings
