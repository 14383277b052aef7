"""Homogeneous one-centre checks: span, rotation classes, action bound, index counters.

    python scripts/kepler_checks.py --alpha 1.5
"""

import argparse
import math

import numpy as np

from parabolica import kepler as kp


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--alpha", type=float, default=1.5)
    ap.add_argument("--mu", type=float, default=1.0)
    args = ap.parse_args()
    P = kp.HomogeneousProblem(args.mu, args.alpha)

    span = kp.entire_span(P)
    print(f"entire span      {span:.12f}   (2pi/(2-alpha) = {2 * math.pi / (2 - P.alpha):.12f})")
    i, i_star = kp.index_counters(P.alpha)
    print(f"index counters   i = {i}, i* = {i_star}")

    bound = kp.action_bound(P)
    print(f"action bound     {bound:.10f}")
    print("   target        c             action        closed form")
    for frac in (0.1, 0.5, 0.9, 0.99, 0.9999):
        arc = kp.shoot(P, 0.0, frac * span, 0)
        c = arc.angular_momentum
        print(f"  {frac * span:9.5f}  {c:12.6e}  {kp.action_of_arc(arc):.10f}  {kp.closed_form_action(P, c):.10f}")

    print("rotation classes for theta1 = 0.3, theta2 = 1.0:")
    for l in range(-3, 4):
        try:
            arc = kp.shoot(P, 0.3, 1.0, l)
            print(f"  l = {l:+d}: c = {arc.angular_momentum:+.8f}, pericentre {arc.rho_star_attained:.3e}")
        except kp.NoSolutionInClass:
            print(f"  l = {l:+d}: no solution")

    for L in (2.0, 20.0, 200.0):
        print(f"perpendicular index on (-{L:g}, {L:g}): {kp.perpendicular_index(P, L, 4096)}")


if __name__ == "__main__":
    np.set_printoptions(precision=6)
    main()
