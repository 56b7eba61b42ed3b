"""Command-line surface: analyze, compare, bench, rf, infer.

Exit codes: 0 success, 1 runtime error, 2 usage or spec-parse error. All
commands are deterministic given their flags and seed; key=value output is
stable-ordered so runs are byte-diffable.
"""
from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import analyzer, bench, imageio, ops, rf
from .archspec import build_graph, load_spec
from .container import read_container
from .errors import EngineError, ResolutionError, SpecParseError
from .graph import execute, random_weights


def _parse_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise SpecParseError(f"--input-size wants HxW, got {text!r}")
    try:
        return int(parts[0]), int(parts[1])
    except ValueError:
        raise SpecParseError(f"--input-size wants HxW ints, got {text!r}") from None


def _input_shape(spec, override: str | None) -> tuple[int, int, int, int]:
    h, w = _parse_size(override) if override else spec.input_size
    return (1, 3, h, w)


def cmd_analyze(args) -> int:
    spec = load_spec(args.spec)
    graph = build_graph(spec)
    rep = analyzer.count_flops(graph, _input_shape(spec, args.input_size),
                               flops_per_mac=args.flops_per_mac)
    out = analyzer.report_kv(rep) if args.format == "kv" else analyzer.report_table(rep)
    sys.stdout.write(out)
    return 0


def cmd_compare(args) -> int:
    reps = []
    for path in (args.spec_a, args.spec_b):
        spec = load_spec(path)
        graph = build_graph(spec)
        reps.append(analyzer.count_flops(graph, _input_shape(spec, args.input_size),
                                         flops_per_mac=args.flops_per_mac))
    cmp = analyzer.compare_reports(reps[0], reps[1])
    sys.stdout.write(analyzer.comparison_table(cmp))
    return 0


def cmd_bench(args) -> int:
    spec = load_spec(args.spec)
    graph = build_graph(spec)
    weights = random_weights(graph, args.seed)
    res = bench.benchmark(graph, weights, _input_shape(spec, args.input_size),
                          iters=args.iters, warmup=args.warmup, seed=args.seed)
    sys.stdout.write(f"model={spec.display_name()}\n" + res.kv())
    return 0


def cmd_rf(args) -> int:
    spec = load_spec(args.spec)
    graph = build_graph(spec)
    shape = _input_shape(spec, args.input_size)
    if args.mode == "analytic":
        info = rf.analytic_rf(graph, args.node, shape)
        sys.stdout.write(f"node={args.node}\n")
        for axis, a in (("h", info.h), ("w", info.w)):
            sys.stdout.write(
                f"axis={axis} size={a.size:g} jump={a.jump:g} start={a.start:g}\n")
        return 0
    try:
        c, y, x = (int(v) for v in args.unit.split(","))
    except ValueError:
        raise SpecParseError(f"--unit wants c,y,x ints, got {args.unit!r}") from None
    if args.weights:
        weights = read_container(args.weights)
    else:
        weights = random_weights(graph, args.seed)
    res = rf.empirical_rf(graph, weights, args.node, (c, y, x), shape,
                          threshold_frac=args.threshold)
    sys.stdout.write(f"node={args.node}\nunit={c},{y},{x}\n"
                     f"support_pixels={int(res.mask.sum())}\n"
                     f"exact_support_pixels={int(res.exact_mask.sum())}\n"
                     f"bbox={res.bbox}\nexact_bbox={res.exact_bbox}\n")
    if args.out:
        imageio.write_pgm(args.out, res.mask)
        sys.stdout.write(f"mask={args.out}\n")
    return 0


def cmd_infer(args) -> int:
    spec = load_spec(args.spec)
    graph = build_graph(spec)
    store = read_container(args.weights)
    needed = sorted(graph.weight_specs())
    missing = [n for n in needed if n not in store]
    if missing:
        raise ResolutionError(
            f"{len(missing)} weight(s) unresolved: {', '.join(missing[:8])}"
            + (" ..." if len(missing) > 8 else ""))
    rgb = imageio.read_ppm(args.image)
    x = rgb.astype(np.float32) / 255.0
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    x = (x - mean) / std
    x = np.ascontiguousarray(x.transpose(2, 0, 1)[None])  # HWC -> NCHW
    scores = execute(graph, store, x)[0]
    labels = np.argmax(scores[0], axis=0).astype(np.uint8)
    imageio.write_ppm(args.out, imageio.render_labels(labels, spec.num_classes))
    sys.stdout.write(f"wrote {args.out} ({labels.shape[1]}x{labels.shape[0]})\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="rnlw",
        description="CPU inference engine and static profiler for RefineNet-family "
                    "segmentation networks")
    ap.add_argument("--workers", type=int,
                    default=int(os.environ.get("RNLW_WORKERS", "1")),
                    help="kernel worker threads (env RNLW_WORKERS)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="parameter/MAC/FLOP report for a model spec")
    p.add_argument("spec")
    p.add_argument("--input-size", default=None, metavar="HxW")
    p.add_argument("--format", choices=("table", "kv"), default="table")
    p.add_argument("--flops-per-mac", type=int, default=1)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("compare", help="compare two specs (ratios per subsystem)")
    p.add_argument("spec_a")
    p.add_argument("spec_b")
    p.add_argument("--input-size", default=None, metavar="HxW")
    p.add_argument("--flops-per-mac", type=int, default=1)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("bench", help="timed forward passes with random inputs")
    p.add_argument("spec")
    p.add_argument("--input-size", default=None, metavar="HxW")
    p.add_argument("--iters", type=int, default=100)
    p.add_argument("--warmup", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("rf", help="analytic or empirical receptive field of a node")
    p.add_argument("spec")
    p.add_argument("--node", required=True)
    p.add_argument("--mode", choices=("analytic", "empirical"), default="analytic")
    p.add_argument("--unit", default="0,0,0", metavar="c,y,x")
    p.add_argument("--input-size", default=None, metavar="HxW")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.01)
    p.add_argument("--weights", default=None, help="RNLW container (default: seeded random)")
    p.add_argument("--out", default=None, help="write support mask as binary PGM")
    p.set_defaults(func=cmd_rf)

    p = sub.add_parser("infer", help="segment a PPM image with container weights")
    p.add_argument("spec")
    p.add_argument("weights")
    p.add_argument("image")
    p.add_argument("out")
    p.set_defaults(func=cmd_infer)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        ops.set_workers(args.workers)
        return args.func(args)
    except SpecParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (EngineError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
