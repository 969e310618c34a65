"""Exact scalar arithmetic over Q and the quadratic extension Q(sqrt(d)).

The b-scaled polynomial family carries the irrational s = sqrt(3/2 - alpha)
in its coefficients. For rational alpha the square s^2 is rational, so every
coefficient of interest lives in the field Q(s) = {p + q*s : p, q rational}.
SqrtExt implements this field with exact arithmetic and exact sign decisions,
which is what lets Hessian minors and origin rates be certified without any
floating point.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Optional, Union

Rational = Union[int, Fraction]


def rational_sqrt(q: Rational) -> Optional[Fraction]:
    """Exact square root of a nonnegative rational, or None if irrational.

    q = p/r in lowest terms has a rational square root iff p and r are both
    perfect squares; integer square roots decide that exactly.
    """
    q = Fraction(q)
    if q < 0:
        raise ValueError("negative radicand %s" % q)
    pn, pd = q.numerator, q.denominator
    rn, rd = math.isqrt(pn), math.isqrt(pd)
    if rn * rn == pn and rd * rd == pd:
        return Fraction(rn, rd)
    return None


_ZERO = Fraction(0)
_ROOT_CACHE: dict = {}


def _cached_root(d: Fraction):
    key = (d.numerator, d.denominator)
    if key not in _ROOT_CACHE:
        _ROOT_CACHE[key] = rational_sqrt(d)
    return _ROOT_CACHE[key]


class SqrtExt:
    """Element a + b*sqrt(d) of Q(sqrt(d)) with exact rational a, b and d > 0.

    Construction folds perfect-square radicands into the rational part, so a
    stored b != 0 implies sqrt(d) is irrational. That makes the mixed-sign
    rule exact: when a and b have opposite signs,
        sign(a + b*sqrt(d)) = sign(a) * sign(a^2 - b^2*d),
    and a^2 - b^2*d cannot vanish.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a: Rational, b: Rational = 0, d: Rational = 0):
        a = a if type(a) is Fraction else Fraction(a)
        if b:
            b = b if type(b) is Fraction else Fraction(b)
            d = d if type(d) is Fraction else Fraction(d)
            if d <= 0:
                raise ValueError("radicand must be positive when b != 0")
            root = _cached_root(d)
            if root is not None:
                a = a + b * root
                b = _ZERO
                d = _ZERO
        else:
            b = _ZERO
            d = _ZERO
        self.a = a
        self.b = b
        self.d = d

    @classmethod
    def _make(cls, a: Fraction, b: Fraction, d: Fraction) -> "SqrtExt":
        """Internal constructor for results over an already-canonical d.

        Folding in __init__ guarantees a stored nonzero b rides an irrational
        sqrt(d); sums and products over that same d cannot create a foldable
        radicand, so re-checking per operation is pure overhead.
        """
        obj = object.__new__(cls)
        obj.a = a
        if b:
            obj.b = b
            obj.d = d
        else:
            obj.b = _ZERO
            obj.d = _ZERO
        return obj

    @classmethod
    def sqrt(cls, d: Rational) -> "SqrtExt":
        """Exact sqrt(d) for rational d >= 0."""
        d = Fraction(d)
        if d == 0:
            return cls(0)
        return cls(0, 1, d)

    # -- coercion -----------------------------------------------------------

    def _coerce(self, other) -> Optional["SqrtExt"]:
        if isinstance(other, SqrtExt):
            if self.b != 0 and other.b != 0 and self.d != other.d:
                raise ValueError("mixed extensions: sqrt(%s) vs sqrt(%s)" % (self.d, other.d))
            return other
        if isinstance(other, (int, Fraction)):
            return SqrtExt._make(
                other if type(other) is Fraction else Fraction(other), _ZERO, _ZERO)
        return None

    def _ext(self, other: "SqrtExt") -> Fraction:
        return self.d if self.b != 0 else other.d

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return SqrtExt._make(self.a + o.a, self.b + o.b, self._ext(o))

    __radd__ = __add__

    def __neg__(self):
        return SqrtExt._make(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return SqrtExt._make(self.a - o.a, self.b - o.b, self._ext(o))

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o - self

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        if not self.b and not o.b:
            return SqrtExt._make(self.a * o.a, _ZERO, _ZERO)
        d = self._ext(o)
        return SqrtExt._make(self.a * o.a + self.b * o.b * d,
                             self.a * o.b + self.b * o.a, d)

    __rmul__ = __mul__

    def inverse(self) -> "SqrtExt":
        if self.b == 0:
            if self.a == 0:
                raise ZeroDivisionError("inverse of zero")
            return SqrtExt._make(1 / self.a, _ZERO, _ZERO)
        # norm != 0 because sqrt(d) is irrational whenever b != 0
        norm = self.a * self.a - self.b * self.b * self.d
        return SqrtExt._make(self.a / norm, -self.b / norm, self.d)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, e: int):
        if not isinstance(e, int):
            return NotImplemented
        if e < 0:
            return self.inverse() ** (-e)
        result = SqrtExt(1)
        base = self
        k = e
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    # -- order and conversion -----------------------------------------------

    def sign(self) -> int:
        if self.b == 0:
            return (self.a > 0) - (self.a < 0)
        if self.a == 0:
            return 1 if self.b > 0 else -1
        sa = 1 if self.a > 0 else -1
        sb = 1 if self.b > 0 else -1
        if sa == sb:
            return sa
        t = self.a * self.a - self.b * self.b * self.d
        return sa * (1 if t > 0 else -1)

    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError("%s is irrational" % self)
        return self.a

    def __bool__(self) -> bool:
        return self.sign() != 0

    def __eq__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self.a == o.a and self.b == o.b and (self.b == 0 or self.d == o.d)

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def _cmp_sign(self, other) -> int:
        diff = self - other
        if diff is NotImplemented:
            raise TypeError("cannot compare %r with %r" % (self, other))
        return diff.sign()

    def __lt__(self, other):
        return self._cmp_sign(other) < 0

    def __le__(self, other):
        return self._cmp_sign(other) <= 0

    def __gt__(self, other):
        return self._cmp_sign(other) > 0

    def __ge__(self, other):
        return self._cmp_sign(other) >= 0

    def __float__(self) -> float:
        return float(self.a) + float(self.b) * math.sqrt(float(self.d))

    def __abs__(self) -> "SqrtExt":
        return self if self.sign() >= 0 else -self

    def __repr__(self):
        return "SqrtExt(%r, %r, %r)" % (self.a, self.b, self.d)

    def __str__(self):
        if self.b == 0:
            return str(self.a)
        return "%s + %s*sqrt(%s)" % (self.a, self.b, self.d)


Scalar = Union[int, Fraction, SqrtExt, float]


def exact_sign(x: Scalar) -> int:
    """Sign of an exact scalar; floats are rejected to avoid silent rounding."""
    if isinstance(x, SqrtExt):
        return x.sign()
    if isinstance(x, (int, Fraction)):
        return (x > 0) - (x < 0)
    raise TypeError("exact_sign needs an exact scalar, got %r" % type(x).__name__)


def is_exact(x) -> bool:
    return isinstance(x, (int, Fraction, SqrtExt))


def to_float(x: Scalar) -> float:
    return float(x)
