"""Sparse multivariate polynomials with exact coefficients.

Terms map an exponent tuple to a coefficient; zero coefficients are never
stored. Coefficients are Fraction or SqrtExt (all SqrtExt coefficients of one
polynomial must share the same radicand); float coefficients are tolerated
for degraded irrational-parameter runs, in which case exactness guarantees
and the text format are unavailable.

Text exchange format (one term per line, bit-exact round trip):

    dim=3 s2=3/4
    0 0 0 : 1
    1 0 0 : 0 + 3/10 * s
    4 0 0 : -1/12

The header records the dimension and s^2 for the extension element s, or
``s2=none`` for purely rational polynomials. Coefficients are written as
``p/q`` or ``p/q + p/q * s``.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Dict, Iterable, Sequence, Tuple

import numpy as np

from .exact import SqrtExt, is_exact

Expo = Tuple[int, ...]


def _normalize_coeff(c):
    if isinstance(c, int):
        return Fraction(c)
    return c


class Poly:
    """Immutable sparse polynomial in n variables."""

    __slots__ = ("n", "terms", "_float_cache")

    def __init__(self, n: int, terms: Dict[Expo, object] | None = None):
        if n < 1:
            raise ValueError("dimension must be >= 1")
        clean: Dict[Expo, object] = {}
        for expo, c in (terms or {}).items():
            expo = tuple(int(e) for e in expo)
            if len(expo) != n:
                raise ValueError("exponent %r has length != %d" % (expo, n))
            if any(e < 0 for e in expo):
                raise ValueError("negative exponent in %r" % (expo,))
            c = _normalize_coeff(c)
            if isinstance(c, float):
                if c != 0.0:
                    clean[expo] = clean.get(expo, 0) + c
            elif c != 0:
                clean[expo] = clean.get(expo, 0) + c
        self.n = n
        self.terms = {e: c for e, c in clean.items() if not _is_zero(c)}
        self._float_cache = None

    # -- constructors -------------------------------------------------------

    @classmethod
    def zero(cls, n: int) -> "Poly":
        return cls(n, {})

    @classmethod
    def constant(cls, n: int, c) -> "Poly":
        return cls(n, {(0,) * n: c})

    @classmethod
    def monomial(cls, n: int, expo: Sequence[int], c=1) -> "Poly":
        return cls(n, {tuple(expo): c})

    @classmethod
    def variable(cls, n: int, i: int) -> "Poly":
        expo = [0] * n
        expo[i] = 1
        return cls.monomial(n, expo)

    # -- ring operations ----------------------------------------------------

    def __add__(self, other):
        if isinstance(other, Poly):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            terms = dict(self.terms)
            for e, c in other.terms.items():
                terms[e] = terms.get(e, 0) + c
            return Poly(self.n, terms)
        if isinstance(other, (int, Fraction, SqrtExt, float)):
            return self + Poly.constant(self.n, other)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.n, {e: -c for e, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other if isinstance(other, Poly) else Poly.constant(self.n, -_normalize_coeff(other)))

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Poly):
            if other.n != self.n:
                raise ValueError("dimension mismatch")
            terms: Dict[Expo, object] = {}
            for e1, c1 in self.terms.items():
                for e2, c2 in other.terms.items():
                    e = tuple(a + b for a, b in zip(e1, e2))
                    terms[e] = terms.get(e, 0) + c1 * c2
            return Poly(self.n, terms)
        if isinstance(other, (int, Fraction, SqrtExt, float)):
            other = _normalize_coeff(other)
            return Poly(self.n, {e: c * other for e, c in self.terms.items()})
        return NotImplemented

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only nonnegative integer powers")
        result = Poly.constant(self.n, 1)
        for _ in range(k):
            result = result * self
        return result

    def __eq__(self, other):
        if not isinstance(other, Poly):
            return NotImplemented
        return self.n == other.n and self.terms == other.terms

    def __hash__(self):
        return hash((self.n, frozenset(self.terms.items())))

    # -- calculus and evaluation --------------------------------------------

    def derive(self, idx: Sequence[int]) -> "Poly":
        """Exact partial derivative d^idx p for a multi-index idx."""
        idx = tuple(int(i) for i in idx)
        if len(idx) != self.n:
            raise ValueError("multi-index length != dimension")
        p = self
        for axis, times in enumerate(idx):
            for _ in range(times):
                p = p._derive_axis(axis)
        return p

    def _derive_axis(self, axis: int) -> "Poly":
        terms: Dict[Expo, object] = {}
        for e, c in self.terms.items():
            k = e[axis]
            if k == 0:
                continue
            ne = list(e)
            ne[axis] = k - 1
            terms[tuple(ne)] = c * k
        return Poly(self.n, terms)

    def eval(self, point: Sequence) -> object:
        """Exact evaluation; coefficient and point types propagate."""
        if len(point) != self.n:
            raise ValueError("point length != dimension")
        zero = [not c for c in point]
        powers = [dict() for _ in range(self.n)]

        def pw(i, k):
            if k == 0:
                return 1
            if k not in powers[i]:
                powers[i][k] = point[i] ** k
            return powers[i][k]

        total = 0
        for e, c in self.terms.items():
            v = c
            dead = False
            for i, k in enumerate(e):
                if k:
                    if zero[i]:
                        dead = True
                        break
                    v = v * pw(i, k)
            if not dead:
                total = total + v
        return total

    def eval_float(self, pts: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation at an (N, n) array of points."""
        pts = np.asarray(pts)
        if pts.ndim == 1:
            pts = pts[None, :]
        if pts.shape[1] != self.n:
            raise ValueError("points have wrong dimension")
        if self._float_cache is None:
            self._float_cache = [(e, float(c)) for e, c in sorted(self.terms.items())]
        out = np.zeros(pts.shape[0], dtype=pts.dtype if pts.dtype in (np.float64, np.longdouble) else np.float64)
        for e, c in self._float_cache:
            term = np.full(pts.shape[0], c, dtype=out.dtype)
            for i, k in enumerate(e):
                if k:
                    term = term * pts[:, i] ** k
            out += term
        return out

    # -- structure ----------------------------------------------------------

    def degree(self) -> int:
        if not self.terms:
            return -1
        return max(sum(e) for e in self.terms)

    def lowest_homogeneous(self) -> "Poly":
        """Lowest-total-degree homogeneous part; the zero polynomial maps to itself."""
        if not self.terms:
            return self
        low = min(sum(e) for e in self.terms)
        return Poly(self.n, {e: c for e, c in self.terms.items() if sum(e) == low})

    def permute_vars(self, perm: Sequence[int]) -> "Poly":
        """Substitute x_i -> x_perm[i]."""
        if sorted(perm) != list(range(self.n)):
            raise ValueError("not a permutation")
        terms: Dict[Expo, object] = {}
        for e, c in self.terms.items():
            ne = [0] * self.n
            for i, k in enumerate(e):
                ne[perm[i]] += k
            key = tuple(ne)
            terms[key] = terms.get(key, 0) + c
        return Poly(self.n, terms)

    def flip_var(self, i: int) -> "Poly":
        """Substitute x_i -> -x_i."""
        return Poly(self.n, {e: (-c if e[i] % 2 else c) for e, c in self.terms.items()})

    def extension_square(self):
        """Shared radicand of SqrtExt coefficients, or None if all rational."""
        d = None
        for c in self.terms.values():
            if isinstance(c, SqrtExt) and c.b != 0:
                if d is None:
                    d = c.d
                elif d != c.d:
                    raise ValueError("mixed extension radicands in one polynomial")
        return d

    def is_exact(self) -> bool:
        return all(is_exact(c) for c in self.terms.values())

    def __repr__(self):
        items = ", ".join("%r: %s" % (e, c) for e, c in sorted(self.terms.items()))
        return "Poly(%d, {%s})" % (self.n, items)


def _is_zero(c) -> bool:
    if isinstance(c, SqrtExt):
        return c.sign() == 0
    return c == 0


# -- text exchange format ----------------------------------------------------


def _coeff_to_text(c) -> str:
    if isinstance(c, SqrtExt):
        if c.b == 0:
            return str(c.a)
        return "%s + %s * s" % (c.a, c.b)
    if isinstance(c, Fraction):
        return str(c)
    raise TypeError("text format requires exact coefficients, got %r" % type(c).__name__)


def _coeff_from_text(text: str, s2) -> object:
    text = text.strip()
    if " + " in text:
        if s2 is None:
            raise ValueError("extension coefficient with s2=none header")
        a_part, rest = text.split(" + ", 1)
        b_part = rest.rsplit(" * s", 1)[0]
        return SqrtExt(Fraction(a_part), Fraction(b_part), s2)
    return Fraction(text)


def poly_to_text(p: Poly) -> str:
    d = p.extension_square()
    header = "dim=%d s2=%s" % (p.n, "none" if d is None else str(d))
    lines = [header]
    for e in sorted(p.terms):
        lines.append("%s : %s" % (" ".join(str(k) for k in e), _coeff_to_text(p.terms[e])))
    return "\n".join(lines) + "\n"


def poly_from_text(text: str) -> Poly:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ValueError("empty polynomial text")
    header = lines[0].split()
    if len(header) != 2 or not header[0].startswith("dim=") or not header[1].startswith("s2="):
        raise ValueError("bad header %r" % lines[0])
    n = int(header[0][4:])
    s2_text = header[1][3:]
    s2 = None if s2_text == "none" else Fraction(s2_text)
    terms: Dict[Expo, object] = {}
    for ln in lines[1:]:
        left, right = ln.split(":", 1)
        expo = tuple(int(tok) for tok in left.split())
        terms[expo] = _coeff_from_text(right, s2)
    return Poly(n, terms)


def write_poly(path, p: Poly) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(poly_to_text(p))


def read_poly(path) -> Poly:
    with open(path, "r", encoding="utf-8") as fh:
        return poly_from_text(fh.read())
