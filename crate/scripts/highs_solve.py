#!/usr/bin/env python3
"""Solve an LP file with HiGHS and write a `name value` listing.

Usage: highs_solve.py MODEL.lp SOLUTION.txt

Set LIMID_RJT_SOLVER="python3 scripts/highs_solve.py {lp} {sol}" to use it.
"""

import sys

import highspy


def main(lp_path, sol_path):
    h = highspy.Highs()
    h.setOptionValue("output_flag", False)
    h.setOptionValue("mip_rel_gap", 0.0)
    h.setOptionValue("mip_abs_gap", 0.0)
    h.setOptionValue("primal_feasibility_tolerance", 1e-9)
    h.setOptionValue("mip_feasibility_tolerance", 1e-9)
    status = h.readModel(lp_path)
    if status != highspy.HighsStatus.kOk:
        print(f"cannot read {lp_path}", file=sys.stderr)
        return 2
    h.run()
    model_status = h.getModelStatus()
    with open(sol_path, "w") as out:
        if model_status == highspy.HighsModelStatus.kInfeasible:
            out.write("status infeasible\n")
            return 0
        if model_status != highspy.HighsModelStatus.kOptimal:
            out.write(f"status {h.modelStatusToString(model_status).replace(' ', '_')}\n")
            return 0
        out.write("status optimal\n")
        lp = h.getLp()
        values = h.getSolution().col_value
        for name, value in zip(lp.col_names_, values):
            out.write(f"{name} {value!r}\n")
    return 0


if __name__ == "__main__":
    if len(sys.argv) != 3:
        print(__doc__, file=sys.stderr)
        sys.exit(2)
    sys.exit(main(sys.argv[1], sys.argv[2]))
