"""Deterministic low-discrepancy sample sets with exact rational coordinates.

All generators emit Fraction coordinates so downstream minor computations can
run in exact arithmetic, and all randomness is a seeded digit rotation of
radical-inverse sequences: the same (seed, count) always reproduces the same
points bit for bit.

Point families over the closed ball of radius rho:

* pair_plane_points: scrambled (base 2, base 3) radical-inverse points in each
  coordinate 2-plane, rejection-filtered to 0 < |x| <= rho;
* volume_points: scrambled Halton points (bases 2, 3, 5, 7, 11, ...) in the
  full-dimensional ball;
* axis_points: both signs of every coordinate axis at dyadic radii down from
  rho itself (the boundary sphere is included);
* diagonal_points: all sign patterns of the full diagonal and of every
  2-plane diagonal at dyadic radii, kept strictly inside the ball.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Iterator, List, Sequence, Tuple

_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19)

Point = Tuple[Fraction, ...]


def _rotation_stream(seed: int, base: int, depth: int) -> List[int]:
    """Per-digit rotation offsets; Random(str) seeding is version-stable."""
    rng = random.Random("pmeconcavity:%d:%d" % (seed, base))
    return [rng.randrange(base) for _ in range(depth)]


class _RadicalInverse:
    """Scrambled radical inverse in a fixed prime base, exact in Fraction."""

    def __init__(self, base: int, seed: int, depth: int = 32):
        self.base = base
        self.depth = depth
        self.rot = _rotation_stream(seed, base, depth)

    def __call__(self, index: int) -> Fraction:
        if index < 0:
            raise ValueError("index must be nonnegative")
        num = 0
        scale = 1
        k = index
        for t in range(self.depth):
            digit = k % self.base
            k //= self.base
            num = num * self.base + ((digit + self.rot[t]) % self.base)
            scale *= self.base
            if k == 0 and t >= self.depth - 1:
                break
        return Fraction(num, scale)


def _norm2(point: Sequence[Fraction]) -> Fraction:
    total = Fraction(0)
    for c in point:
        total += c * c
    return total


def pair_indices(n: int) -> List[Tuple[int, int]]:
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def pair_plane_points(n: int, rho: Fraction, axis_a: int, axis_b: int,
                      count: int, seed: int = 0) -> Iterator[Point]:
    """count points with 0 < |x| <= rho supported on axes (axis_a, axis_b)."""
    if not 0 <= axis_a < axis_b < n:
        raise ValueError("invalid axis pair (%d, %d)" % (axis_a, axis_b))
    rho = Fraction(rho)
    # distinct seeds per plane keep the planes' patterns independent
    plane_seed = seed * 1013 + axis_a * 31 + axis_b
    gen_a = _RadicalInverse(2, plane_seed)
    gen_b = _RadicalInverse(3, plane_seed + 1)
    emitted = 0
    index = 1
    while emitted < count:
        u, v = gen_a(index), gen_b(index)
        index += 1
        xa = rho * (2 * u - 1)
        xb = rho * (2 * v - 1)
        r2 = xa * xa + xb * xb
        if r2 == 0 or r2 > rho * rho:
            continue
        point = [Fraction(0)] * n
        point[axis_a] = xa
        point[axis_b] = xb
        yield tuple(point)
        emitted += 1


def volume_points(n: int, rho: Fraction, count: int, seed: int = 0) -> Iterator[Point]:
    """count scrambled Halton points with 0 < |x| <= rho in full dimension."""
    if n > len(_PRIMES):
        raise ValueError("dimension %d beyond the prime table" % n)
    rho = Fraction(rho)
    gens = [_RadicalInverse(_PRIMES[k], seed * 7919 + k) for k in range(n)]
    emitted = 0
    index = 1
    while emitted < count:
        coords = tuple(rho * (2 * g(index) - 1) for g in gens)
        index += 1
        r2 = _norm2(coords)
        if r2 == 0 or r2 > rho * rho:
            continue
        yield coords
        emitted += 1


def axis_points(n: int, rho: Fraction, levels: int = 12) -> Iterator[Point]:
    """Both signs of each axis at radii rho * 2^-t, t = 0..levels-1."""
    rho = Fraction(rho)
    for axis in range(n):
        for t in range(levels):
            r = rho / 2 ** t
            for sign in (1, -1):
                point = [Fraction(0)] * n
                point[axis] = sign * r
                yield tuple(point)


def diagonal_points(n: int, rho: Fraction, levels: int = 12) -> Iterator[Point]:
    """Sign-pattern diagonals (full and per 2-plane) at dyadic radii."""
    rho = Fraction(rho)
    for t in range(levels):
        c = rho / (n * 2 ** t)  # |x|^2 = n c^2 <= rho^2
        for mask in range(2 ** (n - 1)):
            signs = [1] + [1 if (mask >> k) & 1 == 0 else -1 for k in range(n - 1)]
            yield tuple(s * c for s in signs)
    for a, b in pair_indices(n):
        for t in range(levels):
            c = rho / (2 * 2 ** t)
            for sa, sb in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
                point = [Fraction(0)] * n
                point[a] = sa * c
                point[b] = sb * c
                yield tuple(point)


def ball_scan(n: int, rho: Fraction, samples_per_pair: int,
              seed: int = 0, levels: int = 12) -> Iterator[Point]:
    """The condition-check scan: every pair plane, then axes, then diagonals."""
    for a, b in pair_indices(n):
        yield from pair_plane_points(n, rho, a, b, samples_per_pair, seed)
    yield from axis_points(n, rho, levels)
    yield from diagonal_points(n, rho, levels)


def ball_scan_size(n: int, samples_per_pair: int, levels: int = 12) -> int:
    npairs = len(pair_indices(n))
    return npairs * samples_per_pair + 2 * n * levels \
        + 2 ** (n - 1) * levels + 4 * npairs * levels
