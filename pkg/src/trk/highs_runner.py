"""Minimal HiGHS command line: ``python -m trk.highs_runner MODEL.lp SOLUTION [options]``.

Writes the solution in the native HiGHS text format.
"""

from __future__ import annotations

import argparse
import sys


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="trk.highs_runner")
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=1800.0)
    ap.add_argument("--mip-gap", type=float, default=0.0)
    ap.add_argument("--threads", type=int, default=0)
    ap.add_argument("--verbose", action="store_true")
    args = ap.parse_args(argv)

    import highspy

    h = highspy.Highs()
    h.setOptionValue("output_flag", args.verbose)
    if h.readModel(args.model) != highspy.HighsStatus.kOk:
        print(f"cannot read {args.model}", file=sys.stderr)
        return 1
    h.setOptionValue("time_limit", args.time_limit)
    h.setOptionValue("mip_rel_gap", args.mip_gap)
    h.setOptionValue("mip_abs_gap", 0.0 if args.mip_gap == 0 else 1e-6)
    # Tight tolerances keep big-M rows from leaking: z = 1 - 1e-6 with M = 50 would hide a 5e-5 violation.
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    if args.threads:
        h.setOptionValue("threads", args.threads)
    h.run()
    h.writeSolution(args.solution, 0)
    print(h.modelStatusToString(h.getModelStatus()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
