"""Name-map file: explicit checkpoint-to-engine tensor renaming.

Line forms (``#`` comments and blank lines allowed):

  eps = 1e-5
      Batch-norm epsilon used by every following fold line (default 1e-5).

  conv1.weight -> backbone.stem.conv.w [64,3,7,7]
      Copy one checkpoint tensor verbatim; the optional [shape] annotation is
      validated against the checkpoint tensor.

  bnfold bn1 -> backbone.stem.bn [64] eps=1e-5
      Fold the four batch-norm tensors <prefix>.weight/.bias/.running_mean/
      .running_var into the engine affine pair <target>.scale/<target>.shift.
      [channels] and the per-line eps override are optional.

Renaming is never guessed from heuristics; every engine weight must be
covered by an explicit line.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class NameMapError(ValueError):
    pass


@dataclass(frozen=True)
class CopyRule:
    src: str
    dst: str
    shape: tuple[int, ...] | None
    line: int


@dataclass(frozen=True)
class BnFoldRule:
    prefix: str
    dst: str
    channels: int | None
    eps: float
    line: int


@dataclass
class NameMap:
    copies: list[CopyRule] = field(default_factory=list)
    folds: list[BnFoldRule] = field(default_factory=list)
    eps: float = 1e-5


def _parse_shape(tok: str, lineno: int) -> tuple[int, ...]:
    inner = tok.strip()[1:-1]
    try:
        return tuple(int(v) for v in inner.split(",") if v.strip())
    except ValueError:
        raise NameMapError(f"line {lineno}: bad shape annotation {tok!r}") from None


def parse_name_map(text: str) -> NameMap:
    nm = NameMap()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("eps"):
            parts = line.replace("=", " ").split()
            if len(parts) != 2:
                raise NameMapError(f"line {lineno}: expected `eps = <float>`")
            nm.eps = float(parts[1])
            continue
        if "->" not in line:
            raise NameMapError(f"line {lineno}: expected `src -> dst`, got {line!r}")
        left, right = (s.strip() for s in line.split("->", 1))
        fold = left.startswith("bnfold ")
        if fold:
            left = left[len("bnfold "):].strip()
        shape = None
        eps = None
        toks = right.split()
        dst = toks[0]
        for tok in toks[1:]:
            if tok.startswith("[") and tok.endswith("]"):
                shape = _parse_shape(tok, lineno)
            elif tok.startswith("eps="):
                eps = float(tok[4:])
            else:
                raise NameMapError(f"line {lineno}: unexpected token {tok!r}")
        if not left or not dst:
            raise NameMapError(f"line {lineno}: empty source or target name")
        if fold:
            channels = None
            if shape is not None:
                if len(shape) != 1:
                    raise NameMapError(
                        f"line {lineno}: bnfold annotation must be [channels]")
                channels = shape[0]
            nm.folds.append(BnFoldRule(left, dst, channels,
                                       nm.eps if eps is None else eps, lineno))
        else:
            if eps is not None:
                raise NameMapError(f"line {lineno}: eps= only applies to bnfold lines")
            nm.copies.append(CopyRule(left, dst, shape, lineno))
    dsts = [r.dst for r in nm.copies] + [r.dst for r in nm.folds]
    dupes = {d for d in dsts if dsts.count(d) > 1}
    if dupes:
        raise NameMapError(f"duplicate engine target name(s): {', '.join(sorted(dupes))}")
    return nm
