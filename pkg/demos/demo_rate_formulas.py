"""Exact origin-rate algebra for the two counterexample families.

Prints the termwise origin rate d/dt w11(0) of w = v^alpha under the
pressure flow v_t = (m-1) v lap v + |grad v|^2, the closed-form steepness
roots where the rate changes sign, and the termwise audit of the reduced
log-family table.

Run:  python3 demos/demo_rate_formulas.py [--alpha A] [--m M] [--n N]
"""

import argparse
from fractions import Fraction

from pmeconcavity.construction import (
    ConstructionParams,
    build_family,
    c_quartic_constant,
    family_for_alpha,
    origin_rate,
    origin_rate_raw_scaled,
    solve_steepness,
)
from pmeconcavity.jets import jet_from_poly
from pmeconcavity.rates import audit_log_rate, log_rate_bracket_from_jets, rate_from_jets


def fmt(q):
    """Print small rationals exactly; abbreviate dyadic-refinement monsters."""
    text = str(q)
    if len(text) <= 40:
        return text
    return "~%.6f (exact rational, %d-digit numerator)" % (
        float(q), len(str(abs(q.numerator))))


def show_rate_breakdown(alpha, m, n, steepness):
    params = ConstructionParams(alpha=alpha, m=m, n=n,
                                family=family_for_alpha(alpha),
                                steepness=steepness)
    breakdown = origin_rate(params)
    print("alpha = %s, m = %s, n = %d, family = %s"
          % (alpha, m, n, params.family.value))
    for key in sorted(breakdown.terms):
        print("  %-12s %s" % (key, fmt(breakdown.terms[key])))
    print("  %-12s %s" % ("total", fmt(breakdown.total)))
    jet = jet_from_poly(build_family(params), (Fraction(0),) * n, 4)
    if alpha == 0:
        chain = log_rate_bracket_from_jets(jet, m)
    else:
        chain = rate_from_jets(jet, alpha, m)
    print("  termwise total equals the chain-rule rate exactly: %s"
          % (chain == breakdown.total))
    return params


def show_closed_form_roots():
    print("steepness roots where the origin rate vanishes exactly:")
    for alpha, m, n, a in [(Fraction(0), Fraction(2), 2, Fraction(2)),
                           (Fraction(1), Fraction(2), 2, Fraction(8)),
                           (Fraction(1), Fraction(2), 3, Fraction(5))]:
        params = ConstructionParams(alpha=alpha, m=m, n=n,
                                    family=family_for_alpha(alpha), steepness=a)
        print("  alpha=%s m=%s n=%d: rate(a=%s) = %s"
              % (alpha, m, n, a, origin_rate(params).total))


def show_scaled_display(alpha, m):
    print("scaled-family five-term table vs simplified display "
          "(C constant %s):" % c_quartic_constant(alpha, m))
    params = ConstructionParams(alpha=alpha, m=m, n=3,
                                family=family_for_alpha(alpha),
                                steepness=Fraction(2))
    raw = origin_rate_raw_scaled(params)
    for key in sorted(raw.terms):
        print("  %-14s %s" % (key, raw.terms[key]))
    print("  raw total      %s" % raw.total)
    print("  display total  %s" % origin_rate(params).total)


def show_log_audit(m):
    params = ConstructionParams(alpha=Fraction(0), m=m, n=3,
                                family=family_for_alpha(Fraction(0)),
                                steepness=Fraction(3))
    jet = jet_from_poly(build_family(params), (Fraction(0),) * 3, 4)
    audit = audit_log_rate(jet, m)
    print("log-family reduced-table audit at the family origin:")
    for key in ("slope_cross_delta", "curv_grad2_missing", "total_delta"):
        print("  %-20s %s" % (key, audit[key]))
    print("  both deviations vanish here: flags %s / %s"
          % (audit["slope_cross_flag"], audit["curv_grad2_flag"]))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--alpha", default="1")
    ap.add_argument("--m", default="2")
    ap.add_argument("--n", type=int, default=3)
    args = ap.parse_args()
    alpha, m = Fraction(args.alpha), Fraction(args.m)

    show_closed_form_roots()
    print()
    steep = solve_steepness(alpha, m, args.n)
    print("solved steepness for a positive rate: %s" % fmt(steep))
    show_rate_breakdown(alpha, m, args.n, steep)
    print()
    show_scaled_display(Fraction(3, 4), Fraction(2))
    print()
    show_log_audit(Fraction(2))


if __name__ == "__main__":
    main()
