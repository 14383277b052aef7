"""Index-at-most-one solution of the standard two-centre problem at R = 20.

    python scripts/solve_r20.py [--R 20] [--out out/r20]
"""

import argparse
import logging
from pathlib import Path

import numpy as np

from parabolica import config as cf
from parabolica import continuation as ct
from parabolica import potential as pot

XI_MINUS = np.array([1.0, 2.0, 2.0]) / 3
XI_PLUS = np.array([2.0, 1.0, -2.0]) / 3


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--R", type=float, default=20.0)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(name)s %(message)s")

    config = pot.CentreConfiguration.from_centres(1.5, [([1.0, 0, 0], 1.0), ([-1.0, 0, 0], 1.0)])
    constants = pot.certify_constants(config)
    rec = ct.solve_at_R(config, XI_PLUS, XI_MINUS, args.R, constants=constants)
    diag = ct.diagnostics(rec, config, constants)
    for k, v in rec.summary().items():
        print(f"{k:22s} {v}")
    print(f"{'worst diagnostic':22s} {diag.worst:.3e}")
    if args.out:
        args.out.mkdir(parents=True, exist_ok=True)
        cf.write_trajectory_csv(rec.trajectory, args.out / "trajectory.csv")
        cf.write_toml({"record": rec.summary()}, args.out / "solution.toml")


if __name__ == "__main__":
    main()
