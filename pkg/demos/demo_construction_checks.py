"""Build one counterexample family and run its three admissibility checks.

Condition 1: the origin Hessian of the potential w is negative semidefinite
with a single flat direction.  Condition 2: the leading principal minors of
D^2 w alternate strictly on a sampled punctured ball (Sylvester pattern for
negative definiteness).  Condition 3: the origin rate of w11 under the
pressure flow is strictly positive.

Run:  python3 demos/demo_construction_checks.py [--alpha A] [--m M] [--n N]
"""

import argparse
from fractions import Fraction

from pmeconcavity.construction import (
    ConstructionParams,
    build_family,
    family_for_alpha,
    solve_steepness,
)
from pmeconcavity.verifier import (
    check_condition1,
    check_condition2,
    check_condition3,
    minor_leading_order,
    rho_search,
)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", default="1")
    ap.add_argument("--m", default="2")
    ap.add_argument("--n", type=int, default=3)
    ap.add_argument("--samples", type=int, default=2000,
                    help="condition-2 samples per coordinate pair")
    args = ap.parse_args()
    alpha, m = Fraction(args.alpha), Fraction(args.m)

    steep = solve_steepness(alpha, m, args.n)
    params = ConstructionParams(alpha=alpha, m=m, n=args.n,
                                family=family_for_alpha(alpha), steepness=steep)
    w = build_family(params)
    print("family %s, steepness ~ %.4f, %d monomials"
          % (params.family.value, float(steep), len(w.terms)))

    ok1, report = check_condition1(w)
    print("condition 1 (origin Hessian): %s" % ("pass" if ok1 else "FAIL"))
    for row in report.hessian:
        print("   [%s]" % "  ".join("%8s" % str(c) for c in row))

    rho = rho_search(w, samples_per_pair=500, start=params.rho)
    result = check_condition2(w, rho=rho, samples_per_pair=args.samples)
    print("condition 2 (Sylvester pattern on the ball of radius %s): %s"
          % (rho, "pass" if result.passed else "FAIL"))
    print("   %d exact samples, minor margin %.3e" % (result.checked, result.margin))

    ok3, breakdown = check_condition3(w, alpha, m)
    print("condition 3 (positive origin rate): %s, total %s"
          % ("pass" if ok3 else "FAIL", breakdown.total))

    print("leading quadratic forms of the principal minors:")
    for j in range(1, args.n + 1):
        print("   j=%d: %s" % (j, dict(minor_leading_order(w, j).terms)))


if __name__ == "__main__":
    main()
