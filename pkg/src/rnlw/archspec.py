"""Declarative model specification: parse, serialize, compile to a graph.

Format is line-oriented `key = value` with `#` comments and no nesting; the
compact one-line form `backbone=resnet101 variant=lw num_classes=21` is also
accepted. serialize_spec emits the canonical normative form, and
parse(serialize(s)) == s.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

from .errors import SpecParseError

BACKBONES = ("resnet50", "resnet101", "resnet152", "mobilenetv2", "toy")
VARIANTS = ("original", "lw_with_rcu", "lw")

DEFAULT_CHANNEL_PLAN = (512, 256, 256, 256)  # deepest level first
DEFAULT_MEAN = (0.485, 0.456, 0.406)
DEFAULT_STD = (0.229, 0.224, 0.225)


@dataclass(frozen=True)
class ArchSpec:
    backbone: str
    variant: str
    num_classes: int
    channel_plan: tuple[int, int, int, int] = DEFAULT_CHANNEL_PLAN
    crp_stages: int = 4
    input_size: tuple[int, int] = (512, 512)
    mean: tuple[float, float, float] = DEFAULT_MEAN
    std: tuple[float, float, float] = DEFAULT_STD

    def __post_init__(self):
        if self.backbone not in BACKBONES:
            raise SpecParseError(
                f"backbone {self.backbone!r} not one of {{{', '.join(BACKBONES)}}}")
        if self.variant not in VARIANTS:
            raise SpecParseError(
                f"variant {self.variant!r} not one of {{{', '.join(VARIANTS)}}}")
        if self.num_classes < 1:
            raise SpecParseError(f"num_classes must be positive, got {self.num_classes}")
        if len(self.channel_plan) != 4 or any(c < 1 for c in self.channel_plan):
            raise SpecParseError(f"channel_plan needs 4 positive ints, got {self.channel_plan}")
        if self.crp_stages < 1:
            raise SpecParseError(f"crp_stages must be >= 1, got {self.crp_stages}")
        if len(self.input_size) != 2 or any(v < 1 for v in self.input_size):
            raise SpecParseError(f"input_size needs 2 positive ints, got {self.input_size}")

    def display_name(self) -> str:
        """Row name in the profiler tables, e.g. RefineNet-101-LW."""
        base = {"resnet50": "RefineNet-50", "resnet101": "RefineNet-101",
                "resnet152": "RefineNet-152", "mobilenetv2": "RefineNet-MobileNet-v2",
                "toy": "RefineNet-toy"}[self.backbone]
        suffix = {"original": "", "lw_with_rcu": "-LW-WITH-RCU", "lw": "-LW"}[self.variant]
        return base + suffix


_REQUIRED = ("backbone", "variant", "num_classes")
_KEY_ORDER = ("backbone", "variant", "num_classes", "channel_plan", "crp_stages",
              "input_size", "mean", "std")


def _parse_ints(value: str, key: str, lineno: int, count: int) -> tuple[int, ...]:
    try:
        vals = tuple(int(v) for v in value.split(","))
    except ValueError:
        raise SpecParseError(f"line {lineno}: {key} wants comma-separated ints, got {value!r}")
    if len(vals) != count:
        raise SpecParseError(f"line {lineno}: {key} wants {count} values, got {len(vals)}")
    return vals


def _parse_floats(value: str, key: str, lineno: int, count: int) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in value.split(","))
    except ValueError:
        raise SpecParseError(f"line {lineno}: {key} wants comma-separated floats, got {value!r}")
    if len(vals) != count:
        raise SpecParseError(f"line {lineno}: {key} wants {count} values, got {len(vals)}")
    return vals


def parse_spec(text: str) -> ArchSpec:
    fields: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        # canonical form is one `key = value`; also accept compact k=v tokens
        if " = " in line or line.count("=") == 1:
            pairs = [line.split("=", 1)]
        else:
            pairs = []
            for tok in line.split():
                if "=" not in tok:
                    raise SpecParseError(f"line {lineno}: expected key=value, got {tok!r}")
                pairs.append(tok.split("=", 1))
        for key, value in pairs:
            key = key.strip()
            value = value.strip()
            if key in fields:
                raise SpecParseError(f"line {lineno}: duplicate key {key!r}")
            if key == "backbone":
                if value not in BACKBONES:
                    raise SpecParseError(
                        f"line {lineno}: backbone {value!r} not one of "
                        f"{{{', '.join(BACKBONES)}}}")
                fields[key] = value
            elif key == "variant":
                if value not in VARIANTS:
                    raise SpecParseError(
                        f"line {lineno}: variant {value!r} not one of "
                        f"{{{', '.join(VARIANTS)}}}")
                fields[key] = value
            elif key == "num_classes":
                fields[key] = _parse_ints(value, key, lineno, 1)[0]
            elif key == "channel_plan":
                fields[key] = _parse_ints(value, key, lineno, 4)
            elif key == "crp_stages":
                fields[key] = _parse_ints(value, key, lineno, 1)[0]
            elif key == "input_size":
                parts = value.lower().split("x")
                if len(parts) != 2:
                    raise SpecParseError(f"line {lineno}: input_size wants HxW, got {value!r}")
                try:
                    fields[key] = (int(parts[0]), int(parts[1]))
                except ValueError:
                    raise SpecParseError(f"line {lineno}: input_size wants HxW ints, got {value!r}")
            elif key == "mean":
                fields[key] = _parse_floats(value, key, lineno, 3)
            elif key == "std":
                fields[key] = _parse_floats(value, key, lineno, 3)
            else:
                raise SpecParseError(f"line {lineno}: unknown key {key!r}")
    missing = [k for k in _REQUIRED if k not in fields]
    if missing:
        raise SpecParseError(f"missing required key(s): {', '.join(missing)}")
    try:
        return ArchSpec(**fields)
    except SpecParseError:
        raise
    except (TypeError, ValueError) as e:
        raise SpecParseError(str(e)) from None


def _fmt_float(v: float) -> str:
    return repr(float(v))


def serialize_spec(spec: ArchSpec) -> str:
    """Canonical text form; stable key order, one key per line."""
    lines = [
        f"backbone = {spec.backbone}",
        f"variant = {spec.variant}",
        f"num_classes = {spec.num_classes}",
        f"channel_plan = {','.join(str(c) for c in spec.channel_plan)}",
        f"crp_stages = {spec.crp_stages}",
        f"input_size = {spec.input_size[0]}x{spec.input_size[1]}",
        f"mean = {','.join(_fmt_float(v) for v in spec.mean)}",
        f"std = {','.join(_fmt_float(v) for v in spec.std)}",
    ]
    return "\n".join(lines) + "\n"


def load_spec(path) -> ArchSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_spec(fh.read())


def build_graph(spec: ArchSpec):
    """Compile the spec to an executable graph (see blocks module)."""
    from .blocks import assemble_refinenet

    return assemble_refinenet(spec)
