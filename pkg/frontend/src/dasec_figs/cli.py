"""`render --kind fig3 --in sweep.csv --out fig3.png`"""

from __future__ import annotations

import argparse
import sys

from .render import FigureJob, FigureKind, RenderError, render


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="render",
                                description="Render dasec CSV outputs to images")
    p.add_argument("--kind", required=True, choices=[k.value for k in FigureKind])
    p.add_argument("--in", dest="inputs", required=True, action="append",
                   help="input CSV (repeatable; the first is the primary table)")
    p.add_argument("--out", required=True, help="output image path")
    args = p.parse_args(argv)
    try:
        out = render(FigureJob(FigureKind(args.kind), args.inputs, args.out))
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
