"""Validate the explicit pressure solver against two exact solutions.

The source-type profile v = c0 T^(-1/2) - r^2/(8T), T = t + t0, solves the
n = 2, m = 2 pressure equation on its support; the 1D traveling wave
v = max(c(x1 + ct), 0) solves it for every m.  Both closed forms are
verified symbolically in the test suite before being used here.

Run:  python3 demos/demo_barenblatt.py [--fine] [--horizon T]
"""

import argparse
import math

import numpy as np

from pmeconcavity.solver import (
    barenblatt_initial,
    barenblatt_pressure,
    discretize,
    front_position,
    grid_axis,
    mass_proxy,
    stable_dt,
    step,
    tent_initial,
)


def interior_error(res, horizon):
    field = discretize(barenblatt_initial(), res, dtype=np.float64)
    steps = 0
    while field.t < horizon:
        field = step(field, 2.0,
                     dt=min(stable_dt(field, 2.0) * 0.999, horizon - field.t))
        steps += 1
    ax = grid_axis(1.0, res, dtype=np.float64)
    pts = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    exact = barenblatt_pressure(pts, field.t).reshape(field.values.shape)
    radius = math.sqrt(8 / 16) * (field.t + 1.0) ** 0.25
    rr = np.sqrt((pts ** 2).sum(axis=1)).reshape(field.values.shape)
    err = float(np.abs(np.asarray(field.values) - exact)[rr <= 0.6 * radius].max())
    return err, steps, field


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--horizon", type=float, default=0.125)
    ap.add_argument("--fine", action="store_true",
                    help="add a res = 257 level to the convergence table")
    args = ap.parse_args()

    print("source-type profile, n = 2, m = 2, horizon %.4g:" % args.horizon)
    resolutions = [65, 129] + ([257] if args.fine else [])
    errors = {}
    for res in resolutions:
        err, steps, field = interior_error(res, args.horizon)
        errors[res] = err
        drift = abs(mass_proxy(field, 2.0)
                    - mass_proxy(discretize(barenblatt_initial(), res,
                                            dtype=np.float64), 2.0))
        print("  res %4d: interior max error %.3e after %d steps, "
              "mass drift %.2e" % (res, err, steps, drift))
    for coarse, fine in zip(resolutions, resolutions[1:]):
        print("  error ratio %d -> %d: %.2f"
              % (coarse, fine, errors[coarse] / errors[fine]))

    print("traveling tent, n = 1, m = 2, res 257:")
    field = discretize(tent_initial(), 257, dtype=np.float64)
    l0, r0 = front_position(field, "left"), front_position(field, "right")
    horizon = 0.05
    while field.t < horizon:
        field = step(field, 2.0,
                     dt=min(stable_dt(field, 2.0) * 0.999, horizon - field.t))
    speed_l = (front_position(field, "left") - l0) / field.t
    speed_r = (front_position(field, "right") - r0) / field.t
    print("  measured front speeds %.4f / %.4f (exact -1 / +1)"
          % (speed_l, speed_r))


if __name__ == "__main__":
    main()
