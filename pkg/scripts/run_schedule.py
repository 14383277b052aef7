"""Level scaling and the hypothesis series over R = 10K, 20K, 40K (about half an hour on one core).

    python scripts/run_schedule.py [--multiples 10 20 40]
"""

import argparse
import logging
import time

import numpy as np

from parabolica import continuation as ct
from parabolica import potential as pot

XI_MINUS = np.array([1.0, 2.0, 2.0]) / 3
XI_PLUS = np.array([2.0, 1.0, -2.0]) / 3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--multiples", type=float, nargs="+", default=[10, 20, 40])
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")
    logging.getLogger("parabolica.solver").setLevel(logging.WARNING)

    config = pot.CentreConfiguration.from_centres(1.5, [([1.0, 0, 0], 1.0), ([-1.0, 0, 0], 1.0)])
    constants = pot.certify_constants(config)
    Rs = [m * constants.K for m in args.multiples]
    t0 = time.perf_counter()
    records, report = ct.run_schedule(config, XI_PLUS, XI_MINUS, Rs, constants=constants, raise_on_violation=False)
    print(f"total runtime {time.perf_counter() - t0:.0f} s")
    print("      R      action   index  min dist   t+ - t-   runtime")
    for r in records:
        print(f"{r.R:9.3f} {r.action:10.5f} {r.morse_index:5d} {min(r.min_centre_distances):9.5f} "
              f"{r.t_plus - r.t_minus:9.4f} {r.runtime:8.1f}")
    scaling = ct.level_scaling(records, config)
    print(f"slope {scaling['fitted_slope']:.5f}, theory {scaling['theory_slope']:.5f}, "
          f"relative error {scaling['relative_slope_error']:.3%}")
    print(f"offsets {np.round(scaling['offsets'], 5)}")
    for name, ok in report.checks.items():
        print(f"{name:32s} {'ok' if ok else 'violated'}")
    print(f"Cauchy sup-distances {np.round(report.cauchy, 5)}, ratios {np.round(report.cauchy_ratios, 3)}")
    for r in records:
        print(f"diagnostics at R = {r.R:.3f}: worst margin {ct.diagnostics(r, config, constants).worst:.3e}")


if __name__ == "__main__":
    main()
