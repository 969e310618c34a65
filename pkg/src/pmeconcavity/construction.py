"""Counterexample polynomial families and their closed-form origin rates.

Two quartic families of potentials w (one per exponent regime) are built so
that at the origin w = 1, the Hessian has a single zero eigenvalue in the x1
direction, and the time derivative of the second x1-derivative of w = v^alpha
under the pressure flow is strictly positive.

* UNIT family (alpha in [0, 1/2) or alpha = 1), steepness parameter a:

      w = 1 + a x1 - x1^4 + sum_{i>=2} (x1 x_i^2 - x_i^2 - 2 x1^2 x_i^2)

* SCALED family (alpha in (1/2, 1)), steepness parameter b, carrying the
  extension element s = sqrt(3/2 - alpha):

      w = 1 + (alpha s / (b (1 - alpha))) x1 - x1^4 / (12 b^2)
            + sum_{i>=2} (-b^2 x_i^2 + b s x1 x_i^2 - x1^2 x_i^2)

The origin rate closed forms evaluate the nine-term rate table on the origin
derivative values of each family; with q = 1/alpha, S4 = -(24 + 8(n-1)),
S3 = 2(n-1), S2 = -2(n-1) and a base value c0 (the potential's value at the
origin, 1 unless shifted by an assembly constant):

  UNIT, alpha > 0:
      (m-1) S4 c0^q + 2(m-1) q a S3 c0^(q-1) + (m-1) q (q-1) a^2 S2 c0^(q-2)
      + beta (q-1)(q-2) a^4 c0^(q-3),        beta = q (1 + (m-1)(1-alpha))
  UNIT, alpha = 0 (bracket, e^w factor removed; independent of c0):
      (m-1) S4 + 4(m-1)(n-1) a - 2(m-1)(n-1) a^2 + m a^4
  SCALED (raw substitution; g = (3/2 - alpha)/(1 - alpha)):
      (m-1)(-2/b^2 - 4(n-1)) c0^q + 4(m-1) g (n-1) c0^(q-1)
      - 2(m-1) g (n-1) c0^(q-2) - (C/b^4) c0^(q-3)
  which at c0 = 1 collapses to the three-term display
      -2(m-1)/b^2 - C/b^4 + (m-1)(n-1)(2 alpha - 1)/(1 - alpha)
  with the positive constant
      C = q (1 + (m-1)(1-alpha)) (2 - q)(q - 1) (alpha^2 (3/2-alpha)/(1-alpha)^2)^2.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Optional

from .exact import SqrtExt, is_exact
from .poly import Poly
from .rates import _base_power, relative_gap, sum_terms


class Family(str, enum.Enum):
    UNIT = "unit"
    SCALED = "scaled"


class SteepnessSearchError(RuntimeError):
    """Raised when the geometric steepness search exhausts its grid."""


def _check_alpha(alpha) -> None:
    a = float(alpha)
    if not 0 <= a <= 1:
        raise ValueError("alpha must lie in [0, 1], got %s" % alpha)
    if alpha == Fraction(1, 2):
        raise ValueError("alpha = 1/2 is excluded: half concavity is preserved")


def family_for_alpha(alpha) -> Family:
    """UNIT for alpha in [0, 1/2) or alpha = 1; SCALED for alpha in (1/2, 1)."""
    _check_alpha(alpha)
    if alpha == 1 or alpha < Fraction(1, 2):
        return Family.UNIT
    return Family.SCALED


@dataclass(frozen=True)
class ConstructionParams:
    """Parameters of one counterexample configuration."""

    alpha: Fraction
    m: Fraction
    n: int
    family: Family
    steepness: Fraction
    rho: Fraction = Fraction(1, 2)
    amplitude: Optional[Fraction] = None

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.family != family_for_alpha(self.alpha):
            raise ValueError(
                "family %s inconsistent with alpha = %s" % (self.family.value, self.alpha))
        if not self.m > 1:
            raise ValueError("m must exceed 1")
        if self.n < 2:
            raise ValueError("n must be at least 2")
        if not self.steepness > 0:
            raise ValueError("steepness must be positive")
        if not self.rho > 0:
            raise ValueError("rho must be positive")


@dataclass(frozen=True)
class RateBreakdown:
    """Origin rate split into the displayed summands."""

    total: object
    terms: Dict[str, object] = field(compare=False)
    c_quartic: Optional[object] = None

    def gap_to(self, other_value) -> float:
        return relative_gap(self.total, other_value)


def _make_breakdown(terms: Dict[str, object], c_quartic=None) -> RateBreakdown:
    return RateBreakdown(total=sum_terms(terms), terms=terms, c_quartic=c_quartic)


# -- family polynomials ------------------------------------------------------


def build_unit_family(alpha, n: int, a) -> Poly:
    """UNIT family potential; requires alpha in [0, 1/2) or alpha = 1."""
    if family_for_alpha(alpha) != Family.UNIT:
        raise ValueError("alpha = %s belongs to the scaled family" % alpha)
    if not a > 0:
        raise ValueError("steepness a must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    terms = {(0,) * n: Fraction(1)}
    e1 = lambda k: tuple(k if j == 0 else 0 for j in range(n))
    terms[e1(1)] = Fraction(a) if not isinstance(a, float) else a
    terms[e1(4)] = Fraction(-1)
    for i in range(1, n):
        sq = [0] * n
        sq[i] = 2
        terms[tuple([1] + sq[1:])] = Fraction(1)          # x1 x_i^2
        terms[tuple(sq)] = Fraction(-1)                    # -x_i^2
        terms[tuple([2] + sq[1:])] = Fraction(-2)          # -2 x1^2 x_i^2
    return Poly(n, terms)


def build_scaled_family(alpha, n: int, b) -> Poly:
    """SCALED family potential; requires alpha in (1/2, 1).

    For rational alpha the coefficient field is Q(s) with s^2 = 3/2 - alpha
    carried exactly; float alpha degrades every coefficient to float.
    """
    if family_for_alpha(alpha) != Family.SCALED:
        raise ValueError("alpha = %s belongs to the unit family" % alpha)
    if not b > 0:
        raise ValueError("steepness b must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    exact = isinstance(alpha, (int, Fraction)) and not isinstance(b, float)
    if exact:
        alpha = Fraction(alpha)
        b = Fraction(b)
        s = SqrtExt.sqrt(Fraction(3, 2) - alpha)
        slope = s * (alpha / (b * (1 - alpha)))
        cross = s * b
        quart = Fraction(-1, 12) / b ** 2
        diag = -b ** 2
        minus_one = Fraction(-1)
    else:
        af, bf = float(alpha), float(b)
        s = math.sqrt(1.5 - af)
        slope = af * s / (bf * (1.0 - af))
        cross = bf * s
        quart = -1.0 / (12.0 * bf * bf)
        diag = -bf * bf
        minus_one = -1.0
    terms = {(0,) * n: Fraction(1) if exact else 1.0}
    terms[tuple(1 if j == 0 else 0 for j in range(n))] = slope
    terms[tuple(4 if j == 0 else 0 for j in range(n))] = quart
    for i in range(1, n):
        sq = [0] * n
        sq[i] = 2
        terms[tuple(sq)] = diag                            # -b^2 x_i^2
        terms[tuple([1] + sq[1:])] = cross                 # b s x1 x_i^2
        terms[tuple([2] + sq[1:])] = minus_one             # -x1^2 x_i^2
    return Poly(n, terms)


def build_family(params: ConstructionParams) -> Poly:
    if params.family == Family.UNIT:
        return build_unit_family(params.alpha, params.n, params.steepness)
    return build_scaled_family(params.alpha, params.n, params.steepness)


# -- closed-form origin rates ------------------------------------------------


def _unit_shape_constants(n: int):
    s4 = Fraction(-(24 + 8 * (n - 1)))
    s3 = Fraction(2 * (n - 1))
    s2 = Fraction(-2 * (n - 1))
    return s4, s3, s2


def c_quartic_constant(alpha, m):
    """The positive quartic-term constant of the scaled family's display.

    C = q (1 + (m-1)(1-alpha)) (2 - q)(q - 1) * (alpha^2 (3/2-alpha)/(1-alpha)^2)^2
    with q = 1/alpha; rational for rational inputs, positive on (1/2, 1).
    """
    if family_for_alpha(alpha) != Family.SCALED:
        raise ValueError("c_quartic_constant is defined for the scaled family only")
    if isinstance(alpha, (int, Fraction)):
        alpha = Fraction(alpha)
        q = 1 / alpha
        core = alpha ** 2 * (Fraction(3, 2) - alpha) / (1 - alpha) ** 2
    else:
        q = 1.0 / alpha
        core = alpha ** 2 * (1.5 - alpha) / (1.0 - alpha) ** 2
    beta = q * (1 + (m - 1) * (1 - alpha))
    return beta * (2 - q) * (q - 1) * core ** 2


def origin_rate_shifted(params: ConstructionParams, base_value=Fraction(1)) -> RateBreakdown:
    """Closed-form origin rate when the potential's origin value is base_value.

    base_value = 1 reproduces the families as built; an assembly shift that
    adds a constant K moves the base value to 1 + K while leaving every other
    origin derivative unchanged. Exact when the powers c0^(q-k) are rational
    (c0 = 1, or integer q as at alpha = 1); float otherwise. The alpha = 0
    bracket does not depend on the base value at all.
    """
    alpha, m, n = params.alpha, params.m, params.n
    a = params.steepness
    c0 = base_value
    if params.family == Family.UNIT:
        s4, s3, s2 = _unit_shape_constants(n)
        if alpha == 0:
            terms = {
                "lap11": (m - 1) * s4,
                "slope_lap1": 2 * (m - 1) * a * s3,
                "slope2_lap": (m - 1) * a ** 2 * s2,
                "slope2_grad2": m * a ** 4,
            }
            return _make_breakdown(terms)
        q = 1 / Fraction(alpha) if isinstance(alpha, (int, Fraction)) else 1.0 / alpha
        beta = q * (1 + (m - 1) * (1 - alpha))
        terms = {
            "lap11": (m - 1) * s4 * _base_power(c0, q),
            "slope_lap1": 2 * (m - 1) * q * a * s3 * _base_power(c0, q - 1),
            "slope2_lap": (m - 1) * q * (q - 1) * a ** 2 * s2 * _base_power(c0, q - 2),
            "slope2_grad2": beta * (q - 1) * (q - 2) * a ** 4 * _base_power(c0, q - 3),
        }
        return _make_breakdown(terms)
    # scaled family: raw substitution values with base powers
    b = a
    exact = isinstance(alpha, (int, Fraction))
    if exact:
        alpha = Fraction(alpha)
        q = 1 / alpha
        g = (Fraction(3, 2) - alpha) / (1 - alpha)
    else:
        q = 1.0 / alpha
        g = (1.5 - alpha) / (1.0 - alpha)
    c = c_quartic_constant(alpha, m)
    terms = {
        "lap11": (m - 1) * (Fraction(-2) / b ** 2 - 4 * (n - 1)) * _base_power(c0, q),
        "slope_lap1": 4 * (m - 1) * g * (n - 1) * _base_power(c0, q - 1),
        "slope2_lap": -2 * (m - 1) * g * (n - 1) * _base_power(c0, q - 2),
        "slope2_grad2": -c / b ** 4 * _base_power(c0, q - 3),
    }
    return _make_breakdown(terms, c_quartic=c)


def origin_rate_raw_scaled(params: ConstructionParams) -> RateBreakdown:
    """Five-term raw substitution display for the scaled family at base 1.

    Splits the lap11 contribution into its quartic and cross parts; the sum
    equals both origin_rate_shifted(params, 1) and the simplified three-term
    display of origin_rate.
    """
    if params.family != Family.SCALED:
        raise ValueError("raw display exists for the scaled family only")
    shifted = origin_rate_shifted(params, Fraction(1))
    b, m, n = params.steepness, params.m, params.n
    terms = dict(shifted.terms)
    lap11 = terms.pop("lap11")
    quart = (m - 1) * Fraction(-2) / b ** 2
    terms["lap11_quartic"] = quart
    terms["lap11_cross"] = lap11 - quart
    return _make_breakdown(terms, c_quartic=shifted.c_quartic)


def origin_rate(params: ConstructionParams) -> RateBreakdown:
    """The origin rate in its displayed form at base value 1.

    UNIT uses the four-term displays of origin_rate_shifted directly; SCALED
    returns the simplified three-term display:
    -2(m-1)/b^2 - C/b^4 + (m-1)(n-1)(2 alpha - 1)/(1 - alpha).
    For alpha = 0 the total is the e^w-normalized bracket.
    """
    if params.family == Family.UNIT:
        return origin_rate_shifted(params, Fraction(1))
    alpha, m, n, b = params.alpha, params.m, params.n, params.steepness
    c = c_quartic_constant(alpha, m)
    if isinstance(alpha, (int, Fraction)):
        excess = (m - 1) * (n - 1) * (2 * Fraction(alpha) - 1) / (1 - Fraction(alpha))
    else:
        excess = (m - 1) * (n - 1) * (2.0 * alpha - 1.0) / (1.0 - alpha)
    terms = {
        "curvature": -2 * (m - 1) / b ** 2,
        "quartic": -c / b ** 4,
        "excess": excess,
    }
    return _make_breakdown(terms, c_quartic=c)


# -- steepness search --------------------------------------------------------

_GRID_START = Fraction(1, 10)
_GRID_FACTOR = Fraction(21, 20)
_GRID_STEPS = 500


def _leading_magnitude(params: ConstructionParams, base_value) -> object:
    """Magnitude of the display's first always-negative term.

    UNIT: the fourth-derivative term (24 + 8(n-1))(m-1) c0^q (no base power
    at alpha = 0). SCALED: the curvature term 2(m-1)/b^2 scaled by c0^q.
    """
    alpha, m, n = params.alpha, params.m, params.n
    if params.family == Family.UNIT:
        magnitude = (m - 1) * Fraction(24 + 8 * (n - 1))
        if alpha == 0:
            return magnitude
    else:
        magnitude = 2 * (m - 1) / params.steepness ** 2
    q = 1 / Fraction(alpha) if isinstance(alpha, (int, Fraction)) else 1.0 / alpha
    return magnitude * _base_power(base_value, q)


def solve_steepness(alpha, m, n: int, margin=Fraction(1, 2), base_value=Fraction(1)) -> Fraction:
    """Smallest grid steepness whose origin rate clears the margin.

    Walks the geometric grid 1/10 * (21/20)^k and returns the first value
    whose total rate is at least margin times the magnitude of the leading
    negative term; the doubled value must also give a positive rate. Raises
    SteepnessSearchError after 500 steps (a bug sentinel, not a valid
    outcome for admissible inputs).
    """
    family = family_for_alpha(alpha)
    if not 0 < float(margin) < 1:
        raise ValueError("margin must lie in (0, 1)")
    value = _GRID_START
    for _ in range(_GRID_STEPS):
        params = ConstructionParams(
            alpha=alpha, m=m, n=n, family=family, steepness=value)
        rate = origin_rate_shifted(params, base_value)
        threshold = margin * _leading_magnitude(params, base_value)
        ok = (rate.total >= threshold) if is_exact(rate.total) and is_exact(threshold) \
            else float(rate.total) >= float(threshold)
        if ok:
            doubled = ConstructionParams(
                alpha=alpha, m=m, n=n, family=family, steepness=2 * value)
            doubled_rate = origin_rate_shifted(doubled, base_value)
            positive = doubled_rate.total > 0 if is_exact(doubled_rate.total) \
                else float(doubled_rate.total) > 0
            if positive:
                return value
        value = value * _GRID_FACTOR
    raise SteepnessSearchError(
        "no admissible steepness for alpha=%s m=%s n=%d after %d steps"
        % (alpha, m, n, _GRID_STEPS))
