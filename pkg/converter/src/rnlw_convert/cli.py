"""rnlw-convert <checkpoint> <name-map> <out.rnlw>"""
from __future__ import annotations

import argparse
import sys

from .convert import ConvertError, convert
from .namemap import NameMapError


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="rnlw-convert",
        description="Convert a framework checkpoint (.pt/.pth/.npz) into the "
                    "portable RNLW weight container using an explicit name map")
    ap.add_argument("checkpoint")
    ap.add_argument("name_map")
    ap.add_argument("out")
    args = ap.parse_args(argv)
    try:
        warnings = convert(args.checkpoint, args.name_map, args.out)
    except NameMapError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (ConvertError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
