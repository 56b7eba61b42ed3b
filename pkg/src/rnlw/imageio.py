"""Binary PPM/PGM image I/O and the VOC label palette.

Only the binary variants (P6 / P5) with maxval 255 are supported; golden
files stay bit-exact and no external decoders are involved.
"""
from __future__ import annotations

import numpy as np

from .errors import DataError


def _read_header_tokens(data: bytes, count: int) -> tuple[list[bytes], int]:
    """First `count` whitespace-separated tokens after the magic, skipping
    `#` comments; returns tokens and the offset just past the final one."""
    tokens: list[bytes] = []
    i = 0
    while len(tokens) < count:
        if i >= len(data):
            raise DataError("truncated image header")
        ch = data[i : i + 1]
        if ch == b"#":
            while i < len(data) and data[i : i + 1] != b"\n":
                i += 1
        elif ch.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j : j + 1].isspace() and data[j : j + 1] != b"#":
                j += 1
            tokens.append(data[i:j])
            i = j
    return tokens, i + 1  # single whitespace byte terminates the header


def read_ppm(path) -> np.ndarray:
    """Binary PPM (P6) -> uint8 array (H, W, 3)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P6":
        raise DataError(f"{path}: not a binary PPM (P6), starts with {data[:2]!r}")
    tokens, off = _read_header_tokens(data[2:], 3)
    try:
        w, h, maxval = (int(t) for t in tokens)
    except ValueError:
        raise DataError(f"{path}: malformed PPM header {tokens}") from None
    if maxval != 255:
        raise DataError(f"{path}: PPM maxval {maxval} unsupported (need 255)")
    payload = data[2 + off :]
    if len(payload) < w * h * 3:
        raise DataError(f"{path}: truncated PPM payload")
    return np.frombuffer(payload[: w * h * 3], dtype=np.uint8).reshape(h, w, 3).copy()


def write_ppm(path, rgb: np.ndarray) -> None:
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise DataError(f"PPM wants (H, W, 3) uint8, got {rgb.shape}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(rgb.tobytes())


def write_pgm(path, gray: np.ndarray) -> None:
    """Binary PGM (P5); boolean masks are scaled to 0/255."""
    gray = np.asarray(gray)
    if gray.dtype == bool:
        gray = gray.astype(np.uint8) * 255
    gray = gray.astype(np.uint8)
    if gray.ndim != 2:
        raise DataError(f"PGM wants (H, W), got {gray.shape}")
    h, w = gray.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(gray.tobytes())


def read_pgm(path) -> np.ndarray:
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:2] != b"P5":
        raise DataError(f"{path}: not a binary PGM (P5)")
    tokens, off = _read_header_tokens(data[2:], 3)
    w, h, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise DataError(f"{path}: PGM maxval {maxval} unsupported")
    payload = data[2 + off :]
    if len(payload) < w * h:
        raise DataError(f"{path}: truncated PGM payload")
    return np.frombuffer(payload[: w * h], dtype=np.uint8).reshape(h, w).copy()


def class_palette(num_classes: int = 21) -> np.ndarray:
    """The standard VOC color table (bit-reversal construction), (K, 3) uint8."""
    pal = np.zeros((num_classes, 3), dtype=np.uint8)
    for i in range(num_classes):
        c = i
        r = g = b = 0
        for j in range(8):
            r |= ((c >> 0) & 1) << (7 - j)
            g |= ((c >> 1) & 1) << (7 - j)
            b |= ((c >> 2) & 1) << (7 - j)
            c >>= 3
        pal[i] = (r, g, b)
    return pal


def render_labels(labels: np.ndarray, num_classes: int) -> np.ndarray:
    """Label map (H, W) -> palette RGB (H, W, 3); ignore label 255 is black."""
    labels = np.asarray(labels)
    pal = class_palette(num_classes)
    out = np.zeros((*labels.shape, 3), dtype=np.uint8)
    valid = labels < num_classes
    out[valid] = pal[labels[valid]]
    return out
