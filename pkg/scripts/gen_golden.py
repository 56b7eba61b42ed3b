"""Regenerate the golden node listings under tests/golden/.

Run from the repo root after an intentional architecture change:
    python scripts/gen_golden.py
"""
import pathlib
import sys

sys.path.insert(0, str(pathlib.Path(__file__).resolve().parents[1] / "src"))

from rnlw.archspec import ArchSpec  # noqa: E402
from rnlw.blocks import assemble_refinenet  # noqa: E402
from rnlw.graph import dump  # noqa: E402

CASES = [
    ("toy", "lw", (1, 3, 64, 64), (64, 32, 32, 32)),
    ("toy", "original", (1, 3, 64, 64), (64, 32, 32, 32)),
    ("resnet50", "lw", (1, 3, 512, 512), None),
    ("resnet101", "lw", (1, 3, 512, 512), None),
    ("resnet101", "lw_with_rcu", (1, 3, 512, 512), None),
    ("resnet101", "original", (1, 3, 512, 512), None),
    ("mobilenetv2", "lw", (1, 3, 512, 512), (256, 256, 256, 256)),
]


def main():
    out_dir = pathlib.Path(__file__).resolve().parents[1] / "tests" / "golden"
    out_dir.mkdir(parents=True, exist_ok=True)
    for backbone, variant, shape, plan in CASES:
        kwargs = {"channel_plan": plan} if plan else {}
        spec = ArchSpec(backbone, variant, 21, **kwargs)
        text = dump(assemble_refinenet(spec), shape)
        path = out_dir / f"{backbone}_{variant}.txt"
        path.write_text(text)
        print(f"wrote {path} ({len(text.splitlines())} nodes)")


if __name__ == "__main__":
    main()
