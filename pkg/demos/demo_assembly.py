"""Glue a local family into globally concave initial pressure data.

The potential is cut off to the ball of radius rho, amplified and merged
with a radial profile so that v_0 = A(psi w-tilde + profile) is globally
defined, strictly concave off the origin in the w = v^alpha sense, and has
a strictly positive boundary gradient.  The transfer search re-solves the
steepness because the gluing shifts the potential's origin value.

Run:  python3 demos/demo_assembly.py [--alpha A] [--m M] [--n N]
"""

import argparse
from fractions import Fraction

from pmeconcavity.assembly import (
    TransferSearchError,
    assemble_with_transfer,
    validate_bundle,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", default="1")
    ap.add_argument("--m", default="2")
    ap.add_argument("--n", type=int, default=3)
    args = ap.parse_args()
    alpha, m = Fraction(args.alpha), Fraction(args.m)

    try:
        bundle = assemble_with_transfer(alpha, m, args.n)
    except TransferSearchError as err:
        print("transfer search failed: %s" % err)
        print()
        print("For the b-scaled family (alpha in (1/2, 1)) this is expected:")
        print("the gluing shift grows with the amplitude while the shifted")
        print("origin rate stays positive only on a bounded base range, so")
        print("no steepness survives the shift. The unit family transfers.")
        return 1

    p = bundle.params
    print("glued bundle for alpha = %s, m = %s, n = %d" % (alpha, m, args.n))
    print("  steepness         ~ %.4f" % float(p.steepness))
    print("  cutoff radius rho = %s" % p.rho)
    print("  amplitude A       = %d (2^%d)"
          % (bundle.amplitude, bundle.amplitude.bit_length() - 1))
    print("  shifted base      = %s" % bundle.shifted_base)
    print("  origin rate shift = %.6f" % float(bundle.origin_rate_shifted))
    print("  boundary floor    = %.6g" % bundle.boundary_gradient_floor)

    rep = validate_bundle(bundle)
    for key in ("shell_ok", "origin_ok", "boundary_ok", "rate_transfer_positive"):
        print("  %-22s %s" % (key, "pass" if rep[key] else "FAIL"))
    print("  shell max eigenvalue  %.3e" % rep["shell_max_eig"])
    print("  origin eigenvalues: %d zero, %d negative"
          % (rep["origin_zero_eigs"], rep["origin_negative_eigs"]))
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
