"""Time derivative of the second x1-derivative of w = v^alpha under the
pressure flow v_t = (m-1) v Lap(v) + |grad v|^2.

Two independent routes are implemented and cross-checked everywhere:

* rate_from_jets: the chain-rule route. Form v = w^(1/alpha) (or e^w when
  alpha = 0) as an order-4 jet, push it through the pressure equation, pull
  the result back to w, and read off the (2, 0, ..., 0) Taylor coefficient.
  No closed-form term table is consulted.

* the termwise displays below (power_rate_terms, log_rate_terms): straight
  evaluations of the expanded closed forms, term by term, reading individual
  derivative values from the jet. log_rate_terms_reduced is a deliberately
  kept variant whose two deviations from the chain rule (coefficient m
  instead of 4m on the w1*wk*wk1 sum, and a missing m*w11*|grad w|^2 term)
  are exposed by audit_log_rate.

Normalization convention for alpha = 0: the displayed term tables carry the
common positive factor e^w at the evaluation point REMOVED, so their totals
are rational for rational inputs. The chain-rule value relates by
rate = exp(w0) * bracket; comparisons must multiply the bracket back.
log_rate_bracket_from_jets provides the bracket via the chain-rule route in
exact arithmetic.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict

from .exact import is_exact
from .jets import Jet, jet_exp_normalized, jet_power


def _axis_index(n: int, axis: int, order: int) -> tuple:
    idx = [0] * n
    idx[axis] = order
    return tuple(idx)


def laplacian_jet(j: Jet) -> Jet:
    """Jet of Lap(f), valid two orders lower."""
    total = None
    for k in range(j.n):
        term = j.derive(k).derive(k)
        total = term if total is None else total + term
    return total


def grad_square_jet(j: Jet) -> Jet:
    """Jet of |grad f|^2, valid one order lower."""
    total = None
    for k in range(j.n):
        d = j.derive(k)
        term = d * d
        total = term if total is None else total + term
    return total


def pressure_time_derivative(vjet: Jet, m) -> Jet:
    """Jet of v_t = (m-1) v Lap(v) + |grad v|^2."""
    return (vjet * laplacian_jet(vjet)) * (m - Fraction(1)) + grad_square_jet(vjet)


def _second_x1_coeff(j: Jet):
    idx = _axis_index(j.n, 0, 2)
    if j.order < 2:
        raise ValueError("jet order too low to read the second x1 coefficient")
    return j.coeff.get(idx, Fraction(0)) * 2


def rate_from_jets(wjet: Jet, alpha, m):
    """Chain-rule value of d/dt (second x1-derivative of w) at the base point.

    Exact (Fraction or SqrtExt) whenever the jet is exact, alpha and m are
    rational, alpha > 0, and w(x0) = 1; float otherwise. For alpha = 0 the
    value carries the transcendental factor exp(w0) and is always float; use
    log_rate_bracket_from_jets for the exact normalized bracket.
    """
    if wjet.order < 4:
        raise ValueError("rate oracle needs a full order-4 jet")
    alpha = _canonical_number(alpha)
    m = _canonical_number(m)
    if isinstance(alpha, float) or isinstance(m, float):
        wjet = wjet.as_float()
    if _is_zero_number(alpha):
        return math.exp(float(wjet.value())) * _float_number(log_rate_bracket_from_jets(wjet, m))
    value = wjet.value()
    positive = value > 0 if is_exact(value) else float(value) > 0
    if not positive:
        raise ValueError("nonpositive w value %s at %r" % (value, wjet.base))
    inv_alpha = _reciprocal(alpha)
    vjet = jet_power(wjet, inv_alpha)
    vt = pressure_time_derivative(vjet, m)
    # w_t = alpha * v^(alpha-1) * v_t
    wt = (jet_power(vjet, alpha - 1) * vt) * alpha
    return _second_x1_coeff(wt)


def log_rate_bracket_from_jets(wjet: Jet, m):
    """Chain-rule alpha = 0 bracket: exp(-w0) * d/dt (second x1-derivative of log v).

    Uses v = e^w factored as exp(w0) * E with E = exp(w - w0), for which the
    scale exp(w0) cancels out of w_t / exp(w0) = (m-1) E Lap(E) + |grad E|^2 / E
    evaluated coefficientwise; exact for exact jets and rational m.
    """
    if wjet.order < 4:
        raise ValueError("rate oracle needs a full order-4 jet")
    m = _canonical_number(m)
    if isinstance(m, float):
        wjet = wjet.as_float()
    ejet = jet_exp_normalized(wjet)
    et = pressure_time_derivative(ejet, m)
    bracket = et * jet_power(ejet, -1)
    return _second_x1_coeff(bracket)


# -- termwise closed-form displays -------------------------------------------


def _canonical_number(x):
    if isinstance(x, int):
        return Fraction(x)
    return x


def _is_zero_number(x) -> bool:
    if isinstance(x, Fraction):
        return x == 0
    return float(x) == 0.0


def _float_number(x) -> float:
    return float(x)


def _reciprocal(x):
    if isinstance(x, Fraction):
        return Fraction(1) / x
    return 1.0 / float(x)


def _base_power(w0, e):
    """w0^e, exact when w0 == 1 or e is an integer with exact w0."""
    e = _canonical_number(e)
    if is_exact(w0) and w0 == 1:
        return Fraction(1)
    if isinstance(e, Fraction) and e.denominator == 1 and is_exact(w0):
        k = int(e)
        if k >= 0:
            return w0 ** k
        return (Fraction(1) if isinstance(w0, Fraction) else w0 ** 0) / (w0 ** (-k))
    return float(w0) ** float(e)


def _derivative_sums(wjet: Jet) -> Dict[str, object]:
    """Summed derivative combinations entering the displays.

    All sums run over the full index range k = 1..n, matching the summation
    convention of the closed forms.
    """
    n = wjet.n
    e1 = _axis_index(n, 0, 1)
    w1 = wjet.partial(e1)
    w11 = wjet.partial(_axis_index(n, 0, 2))
    lap = Fraction(0)
    lap1 = Fraction(0)
    lap11 = Fraction(0)
    grad2 = Fraction(0)
    cross = Fraction(0)
    mixed2 = Fraction(0)
    third = Fraction(0)
    for k in range(n):
        ekk = _axis_index(n, k, 2)
        ek = _axis_index(n, k, 1)
        idx_kk1 = tuple(a + b for a, b in zip(ekk, e1))
        idx_kk11 = tuple(a + b for a, b in zip(ekk, _axis_index(n, 0, 2)))
        idx_k1 = tuple(a + b for a, b in zip(ek, e1))
        idx_k11 = tuple(a + b for a, b in zip(ek, _axis_index(n, 0, 2)))
        wk = wjet.partial(ek)
        wk1 = wjet.partial(idx_k1)
        lap = lap + wjet.partial(ekk)
        lap1 = lap1 + wjet.partial(idx_kk1)
        lap11 = lap11 + wjet.partial(idx_kk11)
        grad2 = grad2 + wk * wk
        cross = cross + wk * wk1
        mixed2 = mixed2 + wk1 * wk1
        third = third + wk * wjet.partial(idx_k11)
    return {
        "w1": w1, "w11": w11, "lap": lap, "lap1": lap1, "lap11": lap11,
        "grad2": grad2, "cross": cross, "mixed2": mixed2, "third": third,
    }


def power_rate_terms(wjet: Jet, alpha, m) -> Dict[str, object]:
    """Termwise closed form of the rate for alpha > 0.

    With q = 1/alpha and beta = q*(1 + (m-1)(1-alpha)), the nine summands are

        (m-1) w^q lap11
        2(m-1) q w^(q-1) w1 lap1
        (m-1) q (q-1) w^(q-2) w1^2 lap
        (m-1) q w^(q-1) w11 lap
        beta (q-2)(q-1) w^(q-3) w1^2 grad2
        beta (q-1) w^(q-2) w11 grad2
        4 beta (q-1) w^(q-2) w1 cross
        2 beta w^(q-1) mixed2
        2 beta w^(q-1) third

    where lap, lap1, lap11, grad2, cross, mixed2, third are the k-summed
    derivative combinations of _derivative_sums.
    """
    alpha = _canonical_number(alpha)
    m = _canonical_number(m)
    if _is_zero_number(alpha):
        raise ValueError("alpha = 0 uses log_rate_terms")
    q = _reciprocal(alpha)
    beta = q * (1 + (m - 1) * (1 - alpha))
    s = _derivative_sums(wjet)
    w0 = wjet.value()

    def wp(shift):
        return _base_power(w0, q + shift)

    return {
        "lap11": (m - 1) * wp(0) * s["lap11"],
        "slope_lap1": 2 * (m - 1) * q * wp(-1) * s["w1"] * s["lap1"],
        "slope2_lap": (m - 1) * q * (q - 1) * wp(-2) * s["w1"] * s["w1"] * s["lap"],
        "curv_lap": (m - 1) * q * wp(-1) * s["w11"] * s["lap"],
        "slope2_grad2": beta * (q - 2) * (q - 1) * wp(-3) * s["w1"] * s["w1"] * s["grad2"],
        "curv_grad2": beta * (q - 1) * wp(-2) * s["w11"] * s["grad2"],
        "slope_cross": 4 * beta * (q - 1) * wp(-2) * s["w1"] * s["cross"],
        "mixed2": 2 * beta * wp(-1) * s["mixed2"],
        "grad_third": 2 * beta * wp(-1) * s["third"],
    }


def log_rate_terms(wjet: Jet, m) -> Dict[str, object]:
    """Termwise chain-rule closed form for alpha = 0, e^w factor removed.

    The bracket of exp(-w) * d/dt (second x1-derivative of log v):

        (m-1)(lap11 + 2 w1 lap1 + w1^2 lap + w11 lap)
        + m (w1^2 grad2 + w11 grad2 + 4 w1 cross + 2 mixed2 + 2 third).
    """
    m = _canonical_number(m)
    s = _derivative_sums(wjet)
    return {
        "lap11": (m - 1) * s["lap11"],
        "slope_lap1": 2 * (m - 1) * s["w1"] * s["lap1"],
        "slope2_lap": (m - 1) * s["w1"] * s["w1"] * s["lap"],
        "curv_lap": (m - 1) * s["w11"] * s["lap"],
        "slope2_grad2": m * s["w1"] * s["w1"] * s["grad2"],
        "curv_grad2": m * s["w11"] * s["grad2"],
        "slope_cross": 4 * m * s["w1"] * s["cross"],
        "mixed2": 2 * m * s["mixed2"],
        "grad_third": 2 * m * s["third"],
    }


def log_rate_terms_reduced(wjet: Jet, m) -> Dict[str, object]:
    """The reduced alpha = 0 term table kept for auditing.

    Differs from log_rate_terms in exactly two places: the slope_cross sum
    enters with coefficient m instead of 4m, and the curv_grad2 term is
    absent. Both differences vanish wherever w11 = 0 and the gradient points
    along x1, which holds at the origin of both construction families.
    """
    m = _canonical_number(m)
    s = _derivative_sums(wjet)
    return {
        "lap11": (m - 1) * s["lap11"],
        "slope_lap1": 2 * (m - 1) * s["w1"] * s["lap1"],
        "slope2_lap": (m - 1) * s["w1"] * s["w1"] * s["lap"],
        "curv_lap": (m - 1) * s["w11"] * s["lap"],
        "slope2_grad2": m * s["w1"] * s["w1"] * s["grad2"],
        "slope_cross": m * s["w1"] * s["cross"],
        "mixed2": 2 * m * s["mixed2"],
        "grad_third": 2 * m * s["third"],
    }


def audit_log_rate(wjet: Jet, m) -> Dict[str, object]:
    """Termwise difference between the chain-rule alpha = 0 table and the
    reduced variant.

    Returns the two deviation terms, the total difference, and flags that
    are True when the respective deviation is nonzero at this jet's point:

        slope_cross_delta = 3 m w1 cross      (4m vs m coefficient)
        curv_grad2_missing = m w11 grad2      (term absent from the variant)
    """
    m = _canonical_number(m)
    s = _derivative_sums(wjet)
    full = log_rate_terms(wjet, m)
    reduced = log_rate_terms_reduced(wjet, m)
    keys = set(full) | set(reduced)
    total = Fraction(0)
    for key in keys:
        total = total + full.get(key, Fraction(0)) - reduced.get(key, Fraction(0))
    slope_cross_delta = 3 * m * s["w1"] * s["cross"]
    curv_grad2_missing = m * s["w11"] * s["grad2"]
    return {
        "slope_cross_delta": slope_cross_delta,
        "curv_grad2_missing": curv_grad2_missing,
        "total_delta": total,
        "slope_cross_flag": not _is_zero_value(slope_cross_delta),
        "curv_grad2_flag": not _is_zero_value(curv_grad2_missing),
    }


def _is_zero_value(x) -> bool:
    if is_exact(x):
        from .exact import exact_sign

        return exact_sign(x if not isinstance(x, int) else Fraction(x)) == 0
    return x == 0.0


def sum_terms(terms: Dict[str, object]):
    total = None
    for v in terms.values():
        total = v if total is None else total + v
    return total


def relative_gap(a, b) -> float:
    """|a - b| / max(1, |a|, |b|) in float."""
    fa, fb = float(a), float(b)
    return abs(fa - fb) / max(1.0, abs(fa), abs(fb))
