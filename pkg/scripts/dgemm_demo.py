#!/usr/bin/env python3
"""Walk the matrix-multiplication optimization pipeline step by step:
tile -> interchange -> unroll-and-jam x2, printing the loop tree after each
directive and verifying the final program against the reference interpreter.

    python3 scripts/dgemm_demo.py [--size 16] [--trials 25]
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), os.pardir, "src"))

from xform import apply_pipeline, emit_program, equivalent, name_loops, parse_program, plan_pipeline
from xform.ir import dump_tree
from xform.lang import strip_pragmas
from xform.transforms import PlannedPipeline

SRC = """param M = {n};
array C[{n},{n}] init random;
array A[{n},{n}] init random;
array B[{n},{n}] init random;

#pragma xform loop(i2) unrollingandjam factor(2)
#pragma xform loop(j2) unrollingandjam factor(4)
#pragma xform loop(i1,j1,k1,i2,j2) interchange permutation(j1,k1,i1,j2,i2)
#pragma xform loop(i,j,k) tile sizes(4,4,4) floor_ids(i1,j1,k1) tile_ids(i2,j2,k2) peel(rectangular)
for (i = 0; i < M; i += 1)
  for (j = 0; j < M; j += 1)
    for (k = 0; k < M; k += 1)
      C[i,j] += A[i,k] * B[k,j];
"""


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=16)
    ap.add_argument("--trials", type=int, default=25)
    args = ap.parse_args()

    program = name_loops(parse_program(SRC.format(n=args.size)))
    plan = plan_pipeline(program)
    print("== original nest ==")
    print(dump_tree(program))

    for k in range(1, len(plan.steps) + 1):
        partial = PlannedPipeline(plan.steps[:k])
        res = apply_pipeline(program, partial)
        step = plan.steps[k - 1]
        print(f"\n== after {step.directive.describe()} "
              f"[{res.reports[-1].verdict.kind}] ==")
        print(dump_tree(res.program))

    res = apply_pipeline(program, plan)
    print("\n== final program ==")
    print(emit_program(res.program, annotate=True))
    rep = equivalent(strip_pragmas(program), res.program,
                     trials=args.trials, seed=0)
    print(f"verification over {args.trials} trials: "
          f"{'memory identical' if rep else rep.detail}")
    return 0 if rep else 2


if __name__ == "__main__":
    sys.exit(main())
