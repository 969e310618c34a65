"""Machine checks for the three admissibility conditions of a potential.

Condition 1: the origin Hessian is diag(0, negative, ..., negative) exactly.
Condition 2: the Hessian is strictly negative definite on the punctured
closed ball of radius rho, certified by exact leading principal minors with
the alternating Sylvester sign pattern at every point of a deterministic
low-discrepancy sample set.
Condition 3: the origin rate is strictly positive, with the termwise display
and the chain-rule jet oracle agreeing to 1e-9 relative; a disagreement is an
internal inconsistency (transcription bug), not a plain failure.

minor_leading_order extracts the lowest homogeneous part of an exact minor
determinant polynomial for comparison against the closed-form quadratics.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .construction import ConstructionParams, RateBreakdown, build_family
from .eigen import max_eigenvalue_estimate
from .exact import is_exact, to_float
from .jets import jet_from_poly
from .poly import Poly
from .rates import (
    log_rate_bracket_from_jets,
    log_rate_terms,
    power_rate_terms,
    rate_from_jets,
    relative_gap,
    sum_terms,
)
from .sampling import ball_scan, ball_scan_size

RATE_AGREEMENT_TOL = 1e-9
EIGEN_DEAD_BAND = 1e-10


class Verdict(str, enum.Enum):
    NEGATIVE_DEFINITE = "negative_definite"
    NEGATIVE_SEMIDEFINITE = "negative_semidefinite"
    INDEFINITE = "indefinite"


class InternalInconsistencyError(RuntimeError):
    """Display table and chain-rule oracle disagree: a transcription bug."""


class ConstructionInvalidError(RuntimeError):
    """The construction cannot satisfy a condition within the search caps."""


@dataclass(frozen=True)
class HessianReport:
    point: Tuple
    hessian: Tuple
    minors: Tuple
    max_eigenvalue: float
    verdict: Verdict


@dataclass(frozen=True)
class Condition2Result:
    passed: bool
    margin: Optional[object]
    checked: int
    failing: Optional[HessianReport]


def _sign(x) -> int:
    if is_exact(x):
        from .exact import exact_sign

        return exact_sign(x if not isinstance(x, int) else Fraction(x))
    f = float(x)
    return 0 if f == 0.0 else (1 if f > 0 else -1)


def _abs(x):
    return -x if _sign(x) < 0 else x


def hessian_polys(w: Poly) -> List[List[Poly]]:
    """Symmetric matrix of second-partial polynomials."""
    n = w.n
    firsts = [w.derive(tuple(1 if k == i else 0 for k in range(n))) for i in range(n)]
    rows = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            ej = tuple(1 if k == j else 0 for k in range(n))
            rows[i][j] = firsts[i].derive(ej)
            rows[j][i] = rows[i][j]
    return rows


def hessian_values(hpolys, point) -> Tuple[Tuple, ...]:
    return tuple(tuple(p.eval(point) for p in row) for row in hpolys)


def exact_det(rows) -> object:
    """Cofactor determinant; exact for exact entries, fine at n <= 4."""
    k = len(rows)
    if k == 1:
        return rows[0][0]
    if k == 2:
        return rows[0][0] * rows[1][1] - rows[0][1] * rows[1][0]
    total = None
    for c in range(k):
        entry = rows[0][c]
        if _sign(entry) == 0 and not isinstance(entry, float):
            continue
        sub = [list(r[:c]) + list(r[c + 1:]) for r in rows[1:]]
        term = entry * exact_det(sub)
        if c % 2:
            term = -term
        total = term if total is None else total + term
    return Fraction(0) if total is None else total


def leading_minors(hvals) -> Tuple:
    n = len(hvals)
    return tuple(exact_det([row[:j] for row in hvals[:j]]) for j in range(1, n + 1))


def _is_arrowhead(hpolys) -> bool:
    n = len(hpolys)
    for i in range(1, n):
        for j in range(i + 1, n):
            if hpolys[i][j].terms:
                return False
    return True


def _arrowhead_minors(w11, diag: Sequence, arrow: Sequence) -> Tuple:
    """Leading minors of an arrowhead matrix via the P/Q recursion.

    P_j = prod of tail diagonal entries, Q_j = sum of arrow^2 cofactors:
    P_j = P_{j-1} d_j, Q_j = Q_{j-1} d_j + a_j^2 P_{j-1}, det_j = w11 P_j - Q_j.
    """
    minors = [w11]
    p = Fraction(1)
    q = Fraction(0)
    for d, a in zip(diag, arrow):
        if q:
            q = q * d
        if a:
            q = q + a * a * p
        p = p * d
        minors.append(w11 * p - q)
    return tuple(minors)


def sylvester_alternates(minors: Sequence) -> bool:
    """Strict alternation starting negative: sign(det_j) = (-1)^j."""
    for j, mj in enumerate(minors, start=1):
        if _sign(mj) != (-1) ** j:
            return False
    return True


def hessian_report(w: Poly, point) -> HessianReport:
    hvals = hessian_values(hessian_polys(w), point)
    minors = leading_minors(hvals)
    fmat = np.array([[to_float(v) for v in row] for row in hvals], dtype=float)
    max_eig = max_eigenvalue_estimate(fmat)
    if max_eig < -EIGEN_DEAD_BAND:
        verdict = Verdict.NEGATIVE_DEFINITE
    elif max_eig <= EIGEN_DEAD_BAND:
        verdict = Verdict.NEGATIVE_SEMIDEFINITE
    else:
        verdict = Verdict.INDEFINITE
    return HessianReport(point=tuple(point), hessian=hvals, minors=minors,
                         max_eigenvalue=max_eig, verdict=verdict)


def check_condition1(w: Poly, n: Optional[int] = None) -> Tuple[bool, HessianReport]:
    """Origin Hessian pattern: w11 = 0, tail diagonal < 0, off-diagonal 0."""
    if n is not None and n != w.n:
        raise ValueError("dimension mismatch: n=%d vs poly dimension %d" % (n, w.n))
    origin = (Fraction(0),) * w.n
    report = hessian_report(w, origin)
    h = report.hessian
    ok = _sign(h[0][0]) == 0
    for i in range(w.n):
        for j in range(w.n):
            if i == j:
                if i > 0:
                    ok = ok and _sign(h[i][i]) < 0
            else:
                ok = ok and _sign(h[i][j]) == 0
    return ok, report


def check_condition2(w: Poly, n: Optional[int] = None, rho=Fraction(1, 2),
                     samples_per_pair: int = 10000, seed: int = 0,
                     levels: int = 12) -> Condition2Result:
    """Exact Sylvester pattern over the sampled punctured closed ball.

    Scans >= samples_per_pair low-discrepancy points in every coordinate
    2-plane plus all axes and diagonals; at each point the leading principal
    minors are computed in exact arithmetic and must alternate strictly.
    margin is the minimum of |minor_j| / |x|^2 over all samples and j (the
    minors vanish quadratically at the origin), tracked in float since it is
    a reporting quantity, not a verdict; on failure the offending point is
    returned as a full HessianReport and the scan stops.
    """
    if n is not None and n != w.n:
        raise ValueError("dimension mismatch: n=%d vs poly dimension %d" % (n, w.n))
    if not w.is_exact():
        raise ValueError("condition 2 requires exact coefficients")
    rho = Fraction(rho)
    if not rho > 0:
        raise ValueError("rho must be positive")
    hpolys = hessian_polys(w)
    arrow = _is_arrowhead(hpolys)
    nn = w.n
    margin = None
    checked = 0
    for point in ball_scan(nn, rho, samples_per_pair, seed=seed, levels=levels):
        checked += 1
        if arrow:
            w11 = hpolys[0][0].eval(point)
            diag = [hpolys[i][i].eval(point) for i in range(1, nn)]
            arr = [hpolys[0][i].eval(point) for i in range(1, nn)]
            minors = _arrowhead_minors(w11, diag, arr)
        else:
            minors = leading_minors(hessian_values(hpolys, point))
        if not sylvester_alternates(minors):
            return Condition2Result(passed=False, margin=None, checked=checked,
                                    failing=hessian_report(w, point))
        r2 = 0.0
        for c in point:
            cf = float(c)
            r2 += cf * cf
        for mj in minors:
            ratio = abs(to_float(mj)) / r2
            if margin is None or ratio < margin:
                margin = ratio
    return Condition2Result(passed=True, margin=margin, checked=checked, failing=None)


def rho_search(w: Poly, n: Optional[int] = None, samples_per_pair: int = 2000,
               seed: int = 0, start=Fraction(1, 2), max_halvings: int = 30) -> Fraction:
    """First radius in the halving sequence start, start/2, ... that passes
    condition 2; raises ConstructionInvalidError when the cap is exhausted.

    Callers are expected to have checked condition 1; an input violating it
    (a convex potential, say) simply exhausts the cap and raises.
    """
    rho = Fraction(start)
    for _ in range(max_halvings + 1):
        result = check_condition2(w, n, rho, samples_per_pair=samples_per_pair, seed=seed)
        if result.passed:
            return rho
        rho = rho / 2
    raise ConstructionInvalidError(
        "no radius in %d halvings from %s passes condition 2" % (max_halvings, start))


def minor_leading_order(w: Poly, j: int) -> Poly:
    """Lowest homogeneous part of det of the top-left j x j Hessian block.

    The determinant is expanded exactly in polynomial arithmetic; for the
    construction families the result is the quadratic leading form.
    """
    if not 1 <= j <= w.n:
        raise ValueError("minor index %d out of range 1..%d" % (j, w.n))
    hpolys = hessian_polys(w)
    block = [row[:j] for row in hpolys[:j]]
    det = _poly_det(block)
    return det.lowest_homogeneous()


def _poly_det(rows: List[List[Poly]]) -> Poly:
    k = len(rows)
    if k == 1:
        return rows[0][0]
    total = None
    for c in range(k):
        entry = rows[0][c]
        if not entry.terms:
            continue
        sub = [r[:c] + r[c + 1:] for r in rows[1:]]
        term = entry * _poly_det(sub)
        if c % 2:
            term = -term
        total = term if total is None else total + term
    return total if total is not None else Poly.zero(rows[0][0].n)


def check_condition3(w: Poly, alpha, m) -> Tuple[bool, RateBreakdown]:
    """Positive origin rate, displayed table against the chain-rule oracle.

    The two routes are computed independently (termwise closed form vs jet
    push-through); disagreement beyond 1e-9 relative raises
    InternalInconsistencyError, which is distinct from a plain fail (a rate
    that both routes agree is nonpositive).
    """
    origin = (Fraction(0),) * w.n
    jet = jet_from_poly(w, origin, 4)
    alpha_zero = (is_exact(alpha) and alpha == 0) or float(alpha) == 0.0
    if alpha_zero:
        terms = log_rate_terms(jet, m)
        oracle = log_rate_bracket_from_jets(jet, m)
    else:
        terms = power_rate_terms(jet, alpha, m)
        oracle = rate_from_jets(jet, alpha, m)
    display = sum_terms(terms)
    gap = relative_gap(display, oracle)
    if gap >= RATE_AGREEMENT_TOL:
        raise InternalInconsistencyError(
            "rate display %s vs oracle %s: relative gap %.3e"
            % (display, oracle, gap))
    passed = _sign(display) > 0 and _sign(oracle) > 0
    return passed, RateBreakdown(total=display, terms=terms, c_quartic=None)


# -- orchestration -----------------------------------------------------------


def _scalar_text(x) -> str:
    from .exact import SqrtExt

    if isinstance(x, SqrtExt):
        if x.is_rational():
            return str(x.as_fraction())
        return str(x)
    if isinstance(x, Fraction):
        return str(x)
    return repr(float(x))


def verify_construction(params: ConstructionParams, samples_per_pair: int = 10000,
                        search_samples_per_pair: int = 2000, seed: int = 0,
                        levels: int = 12, w: Optional[Poly] = None) -> dict:
    """Run all three condition checks on a construction configuration.

    The radius comes from rho_search on a reduced trajectory budget; the
    final condition-2 verdict is recomputed at the found radius with the full
    budget. Returns a flat string-keyed summary suitable for the key-value
    report writer.

    When w is given it is checked as-is instead of being rebuilt from the
    parameters, so stored polynomials are validated against what is actually
    on disk rather than against what should have been written.
    """
    if w is None:
        w = build_family(params)
    out = {
        "alpha": str(Fraction(params.alpha)) if not isinstance(params.alpha, float) else repr(params.alpha),
        "m": str(Fraction(params.m)) if not isinstance(params.m, float) else repr(params.m),
        "n": str(params.n),
        "family": params.family.value,
        "steepness": _scalar_text(params.steepness),
        "seed": str(seed),
        "samples_per_pair": str(samples_per_pair),
    }
    ok1, _report1 = check_condition1(w)
    out["condition1"] = "pass" if ok1 else "fail"
    ok2 = False
    if ok1:
        try:
            rho = rho_search(w, samples_per_pair=search_samples_per_pair, seed=seed,
                             start=params.rho)
        except ConstructionInvalidError as err:
            out["condition2"] = "fail"
            out["condition2_error"] = str(err)
        else:
            final = check_condition2(w, rho=rho, samples_per_pair=samples_per_pair,
                                     seed=seed, levels=levels)
            ok2 = final.passed
            out["condition2"] = "pass" if ok2 else "fail"
            out["rho"] = str(rho)
            if final.margin is not None:
                out["condition2_margin"] = _scalar_text(final.margin)
            out["condition2_samples"] = str(final.checked)
            if final.failing is not None:
                out["condition2_failing_point"] = " ".join(
                    _scalar_text(c) for c in final.failing.point)
    else:
        out["condition2"] = "skipped"
    ok3, breakdown = check_condition3(w, params.alpha, params.m)
    out["condition3"] = "pass" if ok3 else "fail"
    out["rate_total"] = _scalar_text(breakdown.total)
    for key in sorted(breakdown.terms):
        out["rate_term_%s" % key] = _scalar_text(breakdown.terms[key])
    out["verified"] = "pass" if (ok1 and ok2 and ok3) else "fail"
    return out
