#!/usr/bin/env python3
"""Run every corpus program through the pipeline and summarize the outcome.

For each program: the per-directive verdict/action under the chosen safety
mode, and whether the transformed output matches the original on seeded
random inputs (and all alias bindings).

    python3 scripts/run_corpus.py [--safety default|fallback|force] [--trials N]
"""

import argparse
import glob
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from xform import apply_pipeline, equivalent, name_loops, parse_program, plan_pipeline
from xform.lang import strip_pragmas

CORPUS = os.path.join(os.path.dirname(__file__), os.pardir, "tests", "corpus")


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--safety", choices=["default", "fallback", "force"], default=None)
    ap.add_argument("--trials", type=int, default=20)
    args = ap.parse_args()

    for path in sorted(glob.glob(os.path.join(CORPUS, "*.loop"))):
        name = os.path.basename(path)
        with open(path) as f:
            program = name_loops(parse_program(f.read()))
        res = apply_pipeline(program, plan_pipeline(program),
                             safety_override=args.safety)
        if res.error:
            print(f"{name:30s} HARD ERROR: {res.error}")
            continue
        rep = equivalent(strip_pragmas(program), res.program,
                         trials=args.trials, seed=0)
        outcome = "semantics preserved" if rep else f"DIVERGED ({rep.detail})"
        print(f"{name:30s} {outcome}")
        for r in res.reports:
            print(f"    {r.directive.describe():42s} {r.verdict.kind:15s} -> {r.action.kind}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
