"""Order-4 truncated multivariate Taylor jets.

A jet stores Taylor COEFFICIENTS, not raw partial derivatives:

    coeff[beta] = (d^beta f)(x0) / beta!   for |beta| <= order,

so products are plain truncated convolutions and the derivative value is
recovered at the query boundary as coeff[beta] * beta!. The truncation order
is fixed at 4; differentiating a jet lowers the valid order by one, which the
jet tracks so downstream operations cannot silently under-truncate.

Powers and exponentials go through the nilpotent split J = c0 + N (N has no
constant term, so N^5 vanishes at order 4):

    J^e    = sum_k binom(e, k) c0^(e-k) N^k
    exp(J) = exp(c0) * sum_k N^k / k!

Coefficient arithmetic is duck typed: Fraction and SqrtExt inputs stay exact
through +, *, derivatives, and through powers whenever c0^(e-k) is itself
rational (integer e, or c0 == 1); otherwise coefficients degrade to float.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Sequence, Tuple

from .exact import SqrtExt, is_exact, to_float
from .poly import Poly

ORDER = 4

Expo = Tuple[int, ...]


def _zero_expo(n: int) -> Expo:
    return (0,) * n


def multifactorial(idx: Sequence[int]) -> int:
    out = 1
    for k in idx:
        out *= math.factorial(k)
    return out


class Jet:
    """Truncated Taylor table of a function at a base point."""

    __slots__ = ("n", "base", "order", "coeff")

    def __init__(self, n: int, base: Tuple, coeff: Dict[Expo, object], order: int = ORDER):
        if not 0 <= order <= ORDER:
            raise ValueError("jet order must lie in [0, %d]" % ORDER)
        if len(base) != n:
            raise ValueError("base point length != dimension")
        self.n = n
        self.base = tuple(base)
        self.order = order
        self.coeff = {e: c for e, c in coeff.items() if sum(e) <= order and not _is_zero(c)}

    @classmethod
    def constant(cls, n: int, base: Tuple, c, order: int = ORDER) -> "Jet":
        return cls(n, base, {_zero_expo(n): c}, order)

    def value(self):
        return self.coeff.get(_zero_expo(self.n), Fraction(0))

    def partial(self, idx: Sequence[int]):
        """Value of the partial derivative d^idx f at the base point."""
        idx = tuple(int(i) for i in idx)
        if sum(idx) > self.order:
            raise ValueError("partial %r exceeds jet order %d" % (idx, self.order))
        return self.coeff.get(idx, Fraction(0)) * multifactorial(idx)

    def _check_mate(self, other: "Jet") -> None:
        if self.n != other.n:
            raise ValueError("dimension mismatch")
        if self.base != other.base:
            raise ValueError("base point mismatch: %r vs %r" % (self.base, other.base))

    def __add__(self, other):
        if isinstance(other, Jet):
            self._check_mate(other)
            order = min(self.order, other.order)
            coeff = {e: c for e, c in self.coeff.items() if sum(e) <= order}
            for e, c in other.coeff.items():
                if sum(e) <= order:
                    coeff[e] = coeff.get(e, 0) + c
            return Jet(self.n, self.base, coeff, order)
        return self + Jet.constant(self.n, self.base, other, self.order)

    __radd__ = __add__

    def __neg__(self):
        return Jet(self.n, self.base, {e: -c for e, c in self.coeff.items()}, self.order)

    def __sub__(self, other):
        if isinstance(other, Jet):
            return self + (-other)
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Jet):
            self._check_mate(other)
            order = min(self.order, other.order)
            coeff: Dict[Expo, object] = {}
            for e1, c1 in self.coeff.items():
                if sum(e1) > order:
                    continue
                for e2, c2 in other.coeff.items():
                    s = sum(e1) + sum(e2)
                    if s > order:
                        continue
                    e = tuple(a + b for a, b in zip(e1, e2))
                    coeff[e] = coeff.get(e, 0) + c1 * c2
            return Jet(self.n, self.base, coeff, order)
        return Jet(self.n, self.base, {e: c * other for e, c in self.coeff.items()}, self.order)

    __rmul__ = __mul__

    def derive(self, axis: int) -> "Jet":
        """Jet of df/dx_axis; valid one order lower.

        Coefficient shift: coeff_out[beta] = coeff_in[beta + e_axis] * (beta_axis + 1).
        """
        if self.order == 0:
            raise ValueError("cannot differentiate an order-0 jet")
        coeff: Dict[Expo, object] = {}
        for e, c in self.coeff.items():
            if e[axis] == 0:
                continue
            ne = list(e)
            ne[axis] -= 1
            coeff[tuple(ne)] = c * e[axis]
        return Jet(self.n, self.base, coeff, self.order - 1)

    def is_exact(self) -> bool:
        return all(is_exact(c) for c in self.coeff.values())

    def as_float(self) -> "Jet":
        """Float-coefficient copy; the base point is kept as given."""
        return Jet(self.n, self.base,
                   {e: to_float(c) for e, c in self.coeff.items()}, self.order)

    def max_coeff_delta(self, other: "Jet") -> float:
        """Largest absolute coefficient difference over the common order."""
        self._check_mate(other)
        order = min(self.order, other.order)
        keys = {e for e in self.coeff if sum(e) <= order} | {e for e in other.coeff if sum(e) <= order}
        worst = 0.0
        for e in keys:
            delta = abs(float(self.coeff.get(e, 0)) - float(other.coeff.get(e, 0)))
            worst = max(worst, delta)
        return worst

    def __repr__(self):
        items = ", ".join("%r: %s" % (e, c) for e, c in sorted(self.coeff.items()))
        return "Jet(n=%d, order=%d, {%s})" % (self.n, self.order, items)


def _is_zero(c) -> bool:
    if isinstance(c, SqrtExt):
        return c.sign() == 0
    return c == 0


def jet_from_poly(p: Poly, x0: Sequence, order: int = ORDER) -> Jet:
    """Taylor table of a polynomial at x0; exact for exact x0.

    Expands each monomial through per-axis binomials
    (x0_a + y_a)^e = sum_k binom(e, k) x0_a^(e-k) y_a^k and truncates.
    """
    x0 = tuple(x0)
    if len(x0) != p.n:
        raise ValueError("base point length != dimension")
    coeff: Dict[Expo, object] = {}

    def descend(axes, k_partial, factor, budget):
        if not axes:
            key = tuple(k_partial)
            coeff[key] = coeff.get(key, 0) + factor
            return
        axis, e = axes[0]
        for k in range(0, min(e, budget) + 1):
            scale = math.comb(e, k)
            if e - k:
                scale = scale * (x0[axis] ** (e - k))
            descend(axes[1:], k_partial[:axis] + [k] + k_partial[axis + 1:], factor * scale, budget - k)

    for expo, c in p.terms.items():
        axes = [(i, e) for i, e in enumerate(expo) if e]
        descend(axes, [0] * p.n, c, order)
    return Jet(p.n, x0, coeff, order)


def _power_series(c0, e, order: int):
    """Coefficients g_k = binom(e, k) * c0^(e-k), exact when possible."""
    e_frac = Fraction(e) if isinstance(e, int) else e
    exact_exp = isinstance(e_frac, Fraction)
    exact_base = is_exact(c0)
    base_is_one = exact_base and c0 == 1
    if exact_exp and exact_base and (base_is_one or e_frac.denominator == 1):
        binom = Fraction(1)
        out = []
        for k in range(order + 1):
            if base_is_one:
                power = Fraction(1)
            else:
                exp_k = int(e_frac) - k
                power = _exact_int_power(c0, exp_k)
            out.append(binom * power)
            binom = binom * (e_frac - k) / (k + 1)
        return out
    ef = float(e_frac) if isinstance(e_frac, Fraction) else float(e)
    c0f = float(c0)
    binomf = 1.0
    out = []
    for k in range(order + 1):
        out.append(binomf * c0f ** (ef - k))
        binomf = binomf * (ef - k) / (k + 1)
    return out


def _exact_int_power(c0, k: int):
    if k >= 0:
        return c0 ** k
    if isinstance(c0, SqrtExt):
        return c0.inverse() ** (-k)
    return Fraction(1) / (Fraction(c0) ** (-k))


def _nilpotent_series(j: Jet, series) -> Jet:
    """sum_k series[k] * N^k for N = j - j.value()."""
    if not all(is_exact(c) for c in series):
        # float series coefficients cannot mix with extension elements
        j = j.as_float()
    n0 = j - j.value()
    acc = Jet.constant(j.n, j.base, series[0], j.order)
    nk = None
    for k in range(1, j.order + 1):
        nk = n0 if nk is None else nk * n0
        acc = acc + nk * series[k]
    return acc


def jet_power(j: Jet, e) -> Jet:
    """Jet of f^e; requires f(x0) > 0 for non-integer e."""
    c0 = j.value()
    integer_exp = isinstance(e, int) or (isinstance(e, Fraction) and e.denominator == 1)
    sign = None
    if is_exact(c0):
        sign = 1 if c0 > 0 else (-1 if c0 < 0 else 0)
    else:
        sign = 1 if float(c0) > 0 else (-1 if float(c0) < 0 else 0)
    if not integer_exp and sign <= 0:
        raise ValueError("fractional power of nonpositive base %s at point %r" % (c0, j.base))
    if integer_exp and sign == 0 and (int(e) < 0):
        raise ZeroDivisionError("negative power of zero base at %r" % (j.base,))
    return _nilpotent_series(j, _power_series(c0, e, j.order))


def jet_exp_normalized(j: Jet) -> Jet:
    """Jet of exp(f - f(x0)) = sum_k N^k / k!; exact for exact jets."""
    series = [Fraction(1, math.factorial(k)) for k in range(j.order + 1)]
    return _nilpotent_series(j, series)


def jet_exp(j: Jet) -> Jet:
    """Jet of exp(f); the constant factor exp(f(x0)) forces float coefficients."""
    scale = math.exp(float(j.value()))
    return jet_exp_normalized(j).as_float() * scale
