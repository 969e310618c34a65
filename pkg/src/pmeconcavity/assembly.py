"""Gluing machinery for globally concave initial data.

Builds, from a verified local potential w, the glued potential

    w_tilde(x) = A * f(|x|) + psi(|x|) * w(x)

where f is a radial concave profile vanishing at |x| = rho, psi is a radial
cutoff equal to 1 on the half ball and 0 near the boundary, and the amplitude
A is doubled until the glued Hessian is strictly negative off the origin.
The initial pressure is recovered as

    v0 = w_tilde**(1/alpha)   (0 < alpha < 1)
    v0 = w_tilde              (alpha = 1)
    v0 = exp(w_tilde)         (alpha = 0; here A = 1 and psi == 1)

so that v0 is positive on the open ball, vanishes on the boundary sphere with
nonvanishing gradient, and v0**alpha (w_tilde itself) is concave.
"""

from __future__ import annotations

import dataclasses
import math
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .construction import (
    ConstructionParams,
    Family,
    RateBreakdown,
    SteepnessSearchError,
    build_family,
    family_for_alpha,
    origin_rate_shifted,
    solve_steepness,
)
from .eigen import jacobi_eigh
from .poly import Poly
from .sampling import ball_scan, volume_points
from .verifier import hessian_polys

# Sampled strict-concavity bound off the origin, and the boundary inset
# (fractions of rho) used when sampling second derivatives of the profile.
ANNULUS_EIG_BOUND = -1e-6
BOUNDARY_INSET = Fraction(1, 100)
ZERO_EIG_BAND = 1e-10

CASE_FRACTIONAL = "fractional"
CASE_ONE = "one"
CASE_ZERO = "zero"


class AssemblyError(RuntimeError):
    """A glued bundle could not be built or fails its sampled invariants."""


class ProfileConstructionError(AssemblyError):
    """The middle interpolant violates monotonicity or concavity sampling."""


class AmplitudeSearchError(AssemblyError):
    """Amplitude doubling exhausted its cap without certifying the annulus."""


class TransferSearchError(AssemblyError):
    """No steepness keeps the origin rate positive after the gluing shift."""

    def __init__(self, message: str, history=None):
        super().__init__(message)
        self.history = tuple(history or ())


class PositivityDomainError(AssemblyError):
    """The glued potential is nonpositive where a fractional power needs it."""

    def __init__(self, message: str, point=None):
        super().__init__(message)
        self.point = point


def alpha_case(alpha) -> str:
    """Classify the concavity exponent: fractional power, identity, or log."""
    a = Fraction(alpha)
    if a == 0:
        return CASE_ZERO
    if a == 1:
        return CASE_ONE
    return CASE_FRACTIONAL


# ---------------------------------------------------------------------------
# smooth transitions on [0, 1]  (value 0 at u=0, value 1 at u=1)
# ---------------------------------------------------------------------------

def _exp_halves(u):
    # h = exp(-1/u) vanishes to all orders at u=0; hb is its mirror at u=1.
    h = np.exp(-1.0 / u)
    hb = np.exp(-1.0 / (1.0 - u))
    return h, hb


def _smooth_value(u):
    h, hb = _exp_halves(u)
    return h / (h + hb)


def _smooth_d1(u):
    h, hb = _exp_halves(u)
    hp = h / u**2
    hbp = hb / (1.0 - u) ** 2
    den = (h + hb) ** 2
    return (hp * hb + h * hbp) / den


def _smooth_d2(u):
    # plain quotient rule on g = N/D with N = h(u), D = h(u) + h(1-u);
    # k(u) = h(1-u), k' = -h'(1-u), k'' = h''(1-u).
    h, hb = _exp_halves(u)
    om = 1.0 - u
    hp = h / u**2
    hpp = h * (1.0 - 2.0 * u) / u**4
    kp = -hb / om**2
    kpp = hb * (1.0 - 2.0 * om) / om**4
    d = h + hb
    dp = hp + kp
    dpp = hpp + kpp
    num1 = hp * d - h * dp
    return (hpp * d - h * dpp) / d**2 - 2.0 * dp * num1 / d**3


def _quintic_value(u):
    return u**3 * (10.0 - 15.0 * u + 6.0 * u**2)


def _quintic_d1(u):
    return 30.0 * u**2 * (1.0 - u) ** 2


def _quintic_d2(u):
    return 60.0 * u - 180.0 * u**2 + 120.0 * u**3


_TRANSITIONS = {
    "smooth": (_smooth_value, _smooth_d1, _smooth_d2),
    "polynomial": (_quintic_value, _quintic_d1, _quintic_d2),
}

# Below this distance from either endpoint the smooth transition and its
# first two derivatives are < exp(-1e6), far under every tolerance in use.
_EDGE_CLIP = 1e-6


# ---------------------------------------------------------------------------
# cutoff
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class Cutoff:
    """Radial cutoff: 1 on [0, rho/2], 0 on [3 rho/4, inf).

    kind "smooth" is infinitely differentiable (exponential transition),
    "polynomial" is the C^2 quintic smoothstep, "one" is the constant 1
    used by the log case.  c_psi records the sampled maximum of
    |D psi| + |D^2 psi| over the ball.
    """

    rho: float
    kind: str
    c_psi: float
    samples: int

    def _piece(self, r, which: int):
        r = np.atleast_1d(np.asarray(r))
        if r.dtype.kind != "f":
            r = r.astype(np.float64)
        out = np.zeros_like(r)
        if self.kind == "one":
            if which == 0:
                out += 1.0
            return out
        inner = r <= 0.5 * self.rho
        outer = r >= 0.75 * self.rho
        mid = ~(inner | outer)
        if which == 0:
            out[inner] = 1.0
        if mid.any():
            u = (0.75 * self.rho - r[mid]) / (0.25 * self.rho)
            u = np.clip(u, _EDGE_CLIP, 1.0 - _EDGE_CLIP)
            with np.errstate(under="ignore"):
                vals = _TRANSITIONS[self.kind][which](u)
            if which == 1:
                vals = vals * (-4.0 / self.rho)
            elif which == 2:
                vals = vals * (16.0 / self.rho**2)
            out[mid] = vals
        return out

    def value(self, r):
        return self._piece(r, 0)

    def d1(self, r):
        return self._piece(r, 1)

    def d2(self, r):
        return self._piece(r, 2)


def _scatter(mask):
    # helper so np.copyto can place a compressed vector back under a mask
    return mask


def build_cutoff(rho, kind: str = "smooth", samples: int = 10001) -> Cutoff:
    """Build the radial cutoff and sample its derivative bound constant.

    The reported c_psi is the maximum over a radial grid of
    |psi'| + max(|psi''|, |psi'|/r), the operator-norm bound for the
    gradient and Hessian of the radial extension psi(|x|).  The scale rule
    c_psi(rho) ~ c_psi(1) * max(1/rho, 1/rho^2) holds for rho <= 1 (for
    larger balls the curvature term keeps the 1/rho^2 scale).
    """
    if kind == "one":
        return Cutoff(rho=float(rho), kind="one", c_psi=0.0, samples=0)
    if kind not in _TRANSITIONS:
        raise ValueError("unknown cutoff kind: %r" % (kind,))
    rhof = float(rho)
    if rhof <= 0:
        raise ValueError("cutoff radius must be positive")
    cut = Cutoff(rho=rhof, kind=kind, c_psi=0.0, samples=samples)
    r = np.linspace(rhof * 1e-6, rhof * (1.0 - 1e-9), samples)
    d1 = cut.d1(r)
    d2 = cut.d2(r)
    c = float(np.max(np.abs(d1) + np.maximum(np.abs(d2), np.abs(d1) / r)))
    return dataclasses.replace(cut, c_psi=c)


# ---------------------------------------------------------------------------
# radial profile
# ---------------------------------------------------------------------------

OUTER_POWER = "power"
OUTER_PARABOLA = "parabola"
OUTER_LOG = "log"


@dataclasses.dataclass(frozen=True)
class RadialProfile:
    """Piecewise radial concave profile f on [0, rho].

    Constant plateau on [0, rho/4], quintic interpolant matched to second
    order at both knots on [rho/4, rho/2], closed-form outer piece on
    [rho/2, rho]:

        fractional:  f(r) = (rho - r)**alpha       plateau (1+alpha/4)(rho/2)**alpha
        one:         f(r) = rho**2 - r**2          plateau 7 rho**2 / 8
        zero:        f(r) = log(rho - r)           plateau log(rho/2) + 1/4

    The log plateau is raised by 1/4 above the outer value at rho/2 (the
    limit of (1/alpha) log(1 + alpha/4)) so the middle piece can decrease
    strictly; the power/parabola plateaus are the stated multiples.
    derivative_bound_C is the uniform C with f', f'' <= -1/C on the outer
    piece; the attained bounds at r = rho/2 are recorded separately.
    """

    alpha_case: str
    rho: float
    plateau_value: float
    outer_kind: str
    outer_exponent: float
    middle_sigma_coeffs: Tuple[float, ...]
    derivative_bound_C: float
    outer_slope_bound: float
    outer_curvature_bound: float

    # -- piecewise evaluation ----------------------------------------------

    def _masks(self, r):
        r = np.asarray(r)
        plateau = r < 0.25 * self.rho
        outer = r >= 0.5 * self.rho
        middle = ~(plateau | outer)
        return plateau, middle, outer

    def _middle(self, r, order: int):
        h = 0.25 * self.rho
        sigma = (r - 0.25 * self.rho) / h
        coeffs = self.middle_sigma_coeffs
        if order:
            coeffs = _poly_derive(coeffs, order)
        out = _horner(coeffs, sigma)
        return out / h**order

    def _outer(self, r, order: int):
        rho = self.rho
        if self.outer_kind == OUTER_PARABOLA:
            if order == 0:
                return rho**2 - r * r
            if order == 1:
                return -2.0 * r
            return -2.0 + 0.0 * r
        if self.outer_kind == OUTER_POWER:
            a = self.outer_exponent
            base = np.maximum(rho - r, 0.0)
            with np.errstate(divide="ignore"):
                if order == 0:
                    return base**a
                if order == 1:
                    return -a * base ** (a - 1.0)
                return a * (a - 1.0) * base ** (a - 2.0)
        # log outer
        base = np.maximum(rho - r, 0.0)
        with np.errstate(divide="ignore"):
            if order == 0:
                return np.log(base)
            if order == 1:
                return -1.0 / base
            return -1.0 / (base * base)

    def _piece(self, r, order: int):
        r = np.atleast_1d(np.asarray(r))
        if r.dtype.kind != "f":
            r = r.astype(np.float64)
        plateau, middle, outer = self._masks(r)
        out = np.zeros_like(r)
        if order == 0:
            out[plateau] = self.plateau_value
        if middle.any():
            np.copyto(out, self._middle(r, order), where=middle)
        if outer.any():
            np.copyto(out, self._outer(r, order), where=outer)
        return out

    def value(self, r):
        return self._piece(r, 0)

    def d1(self, r):
        return self._piece(r, 1)

    def d2(self, r):
        return self._piece(r, 2)


def _horner(coeffs: Sequence[float], x):
    out = np.zeros_like(x) + coeffs[-1]
    for c in reversed(coeffs[:-1]):
        out = out * x + c
    return out


def _poly_derive(coeffs: Sequence[float], order: int) -> Tuple[float, ...]:
    c = list(coeffs)
    for _ in range(order):
        c = [k * ck for k, ck in enumerate(c)][1:] or [0.0]
    return tuple(c)


def _outer_data(case: str, alpha: float, rho: float):
    r1 = 0.5 * rho
    if case == CASE_ZERO:
        plateau = math.log(0.5 * rho) + 0.25
        y1 = math.log(rho - r1)
        d1 = -1.0 / (rho - r1)
        s1 = -1.0 / (rho - r1) ** 2
        kind, expo = OUTER_LOG, 0.0
        slope_b, curv_b = 2.0 / rho, 4.0 / rho**2
    elif case == CASE_ONE:
        plateau = 7.0 * rho**2 / 8.0
        y1 = rho**2 - r1**2
        d1 = -2.0 * r1
        s1 = -2.0
        kind, expo = OUTER_PARABOLA, 0.0
        slope_b, curv_b = rho, 2.0
    else:
        plateau = (1.0 + alpha / 4.0) * (0.5 * rho) ** alpha
        y1 = (rho - r1) ** alpha
        d1 = -alpha * (rho - r1) ** (alpha - 1.0)
        s1 = alpha * (alpha - 1.0) * (rho - r1) ** (alpha - 2.0)
        kind, expo = OUTER_POWER, alpha
        slope_b = alpha * (0.5 * rho) ** (alpha - 1.0)
        curv_b = alpha * (1.0 - alpha) * (0.5 * rho) ** (alpha - 2.0)
    return plateau, y1, d1, s1, kind, expo, slope_b, curv_b


def build_profile(alpha, rho, samples: int = 10001) -> RadialProfile:
    """Build the radial concave profile for the given exponent and radius.

    The middle piece is the unique quintic matching (value, 0, 0) at
    rho/4 and the outer closed form's (value, f', f'') at rho/2; its
    monotonicity and concavity are certified on a dense sample and a
    violation raises ProfileConstructionError.
    """
    rhof = float(rho)
    if rhof <= 0:
        raise ValueError("profile radius must be positive")
    case = alpha_case(alpha)
    alphaf = float(alpha)
    plateau, y1, d1, s1, kind, expo, slope_b, curv_b = _outer_data(case, alphaf, rhof)
    h = 0.25 * rhof
    # p(sigma) on [0,1]: rows p(0), p'(0), p''(0), p(1), p'(1), p''(1)
    mat = np.zeros((6, 6))
    mat[0, 0] = 1.0
    mat[1, 1] = 1.0
    mat[2, 2] = 2.0
    mat[3] = 1.0
    mat[4] = [0, 1, 2, 3, 4, 5]
    mat[5] = [0, 0, 2, 6, 12, 20]
    rhs = np.array([plateau, 0.0, 0.0, y1, h * d1, h * h * s1])
    coeffs = tuple(float(c) for c in np.linalg.solve(mat, rhs))
    profile = RadialProfile(
        alpha_case=case,
        rho=rhof,
        plateau_value=plateau,
        outer_kind=kind,
        outer_exponent=expo,
        middle_sigma_coeffs=coeffs,
        derivative_bound_C=max(1.0 / slope_b, 1.0 / curv_b),
        outer_slope_bound=slope_b,
        outer_curvature_bound=curv_b,
    )
    _check_profile(profile, samples)
    return profile


def _check_profile(profile: RadialProfile, samples: int) -> None:
    rho = profile.rho
    scale = max(1.0, abs(profile.plateau_value))
    # knot continuity (the outer knot data is matched by construction; the
    # linear solve is re-checked here rather than trusted)
    r0 = 0.25 * rho
    r1 = 0.5 * rho
    eps = 1e-9
    for r_in, r_out in ((r0 * (1 - eps), r0 * (1 + eps)), (r1 * (1 - eps), r1 * (1 + eps))):
        lo = float(profile.value(np.array([r_in]))[0])
        hi = float(profile.value(np.array([r_out]))[0])
        if not math.isfinite(lo) or abs(lo - hi) > 1e-6 * scale:
            raise ProfileConstructionError(
                "profile discontinuous near r=%r (%r vs %r)" % (r_in, lo, hi)
            )
    # sampled monotonicity/concavity away from the boundary blow-up
    r = np.linspace(rho * 1e-6, rho * (1.0 - float(BOUNDARY_INSET)), samples)
    d1 = profile.d1(r)
    d2 = profile.d2(r)
    tol = 1e-9 * scale
    if d1.max() > tol:
        raise ProfileConstructionError(
            "profile not decreasing: f'(%g) = %g" % (r[int(d1.argmax())], d1.max())
        )
    if d2.max() > tol:
        raise ProfileConstructionError(
            "profile not concave: f''(%g) = %g" % (r[int(d2.argmax())], d2.max())
        )


# ---------------------------------------------------------------------------
# deterministic direction/point sets
# ---------------------------------------------------------------------------

def sphere_directions(n: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic unit directions: signed axes, pair diagonals, then a
    normalized low-discrepancy fill; shape (count, n) when count is large
    enough to hold the structured prefix, else the prefix is truncated."""
    dirs: List[np.ndarray] = []
    eye = np.eye(n)
    for i in range(n):
        dirs.append(eye[i])
        dirs.append(-eye[i])
    for i in range(n):
        for j in range(i + 1, n):
            for si in (1.0, -1.0):
                for sj in (1.0, -1.0):
                    d = np.zeros(n)
                    d[i] = si
                    d[j] = sj
                    dirs.append(d / math.sqrt(2.0))
    need = count - len(dirs)
    if need > 0:
        pts = volume_points(n, Fraction(1), need, seed=seed)
        arr = np.array([[float(c) for c in p] for p in pts])
        norms = np.linalg.norm(arr, axis=1)
        keep = norms > 1e-9
        dirs.extend(arr[keep] / norms[keep, None])
    out = np.array(dirs[:count])
    return out


def shell_points(
    n: int,
    r_lo: float,
    r_hi: float,
    directions: int,
    radii: int,
    seed: int = 0,
) -> np.ndarray:
    """Deterministic samples of the closed shell r_lo <= |x| <= r_hi."""
    dirs = sphere_directions(n, directions, seed=seed)
    rr = np.linspace(r_lo, r_hi, radii)
    pts = (dirs[None, :, :] * rr[:, None, None]).reshape(-1, n)
    return pts


# ---------------------------------------------------------------------------
# glued bundle
# ---------------------------------------------------------------------------

@dataclasses.dataclass(frozen=True)
class AssemblyBundle:
    """A glued potential with its certified constants.

    w_tilde = amplitude * f(|x|) + psi(|x|) * w(x) on the closed ball of
    radius profile.rho; v0 applies the case transform.  shifted_base is the
    constant term of w_tilde at the origin (1 + amplitude * plateau), exact
    (Fraction) when the plateau is rational; origin_rate_shifted is the
    origin rate display evaluated at that base, and rate_transfer_positive
    records its sign.
    """

    params: ConstructionParams
    w: Poly
    psi: Cutoff
    profile: RadialProfile
    amplitude: int
    shifted_base: object
    origin_rate_shifted: object
    rate_transfer_positive: bool
    boundary_gradient_floor: float
    boundary_max_rel_gap: float
    annulus_max_eig: float
    inner_max_eig: float

    # cached derivative polynomials (not part of equality/serialization)
    _grads: Tuple[Poly, ...] = dataclasses.field(
        default=(), compare=False, repr=False
    )
    _hess: Tuple[Tuple[Poly, ...], ...] = dataclasses.field(
        default=(), compare=False, repr=False
    )

    def __post_init__(self):
        if not self._grads:
            n = self.params.n
            grads = tuple(
                self.w.derive(tuple(1 if k == i else 0 for k in range(n)))
                for i in range(n)
            )
            hess = tuple(tuple(row) for row in hessian_polys(self.w))
            object.__setattr__(self, "_grads", grads)
            object.__setattr__(self, "_hess", hess)

    # -- field evaluation ---------------------------------------------------

    def w_tilde_values(self, pts, dtype=np.float64):
        pts = np.asarray(pts, dtype=dtype)
        if pts.ndim == 1:
            pts = pts[None, :]
        r = np.sqrt((pts * pts).sum(axis=1))
        f = self.profile.value(r)
        psi = self.psi.value(r)
        wv = self.w.eval_float(pts)
        return self.amplitude * f + psi * wv

    def v0_values(self, pts, dtype=np.float64):
        """Initial pressure on the closed ball (case transform of w_tilde)."""
        pts = np.asarray(pts, dtype=dtype)
        if pts.ndim == 1:
            pts = pts[None, :]
        wt = self.w_tilde_values(pts, dtype=dtype)
        case = self.profile.alpha_case
        if case == CASE_ONE:
            return wt
        if case == CASE_ZERO:
            with np.errstate(under="ignore"):
                return np.exp(wt)
        r = np.sqrt((pts * pts).sum(axis=1))
        on_boundary = np.isclose(r, self.profile.rho, rtol=0, atol=1e-12 * self.profile.rho)
        bad = (wt <= 0) & ~on_boundary
        if bad.any():
            idx = int(np.argmax(bad))
            raise PositivityDomainError(
                "glued potential nonpositive at an interior point %s (value %r)"
                % (tuple(float(c) for c in pts[idx]), float(wt[idx])),
                point=tuple(float(c) for c in pts[idx]),
            )
        q = 1.0 / float(self.params.alpha)
        return np.maximum(wt, 0.0) ** q

    def hessians(self, pts) -> np.ndarray:
        """D^2 w_tilde at each point, shape (N, n, n), float64."""
        pts = np.asarray(pts, dtype=np.float64)
        if pts.ndim == 1:
            pts = pts[None, :]
        n = self.params.n
        N = pts.shape[0]
        r = np.sqrt((pts * pts).sum(axis=1))
        safe_r = np.where(r > 0, r, 1.0)
        unit = pts / safe_r[:, None]
        fd1 = self.profile.d1(r)
        fd2 = self.profile.d2(r)
        pv = self.psi.value(r)
        pd1 = self.psi.d1(r)
        pd2 = self.psi.d2(r)
        wv = self.w.eval_float(pts)
        gw = np.stack([g.eval_float(pts) for g in self._grads], axis=1)
        hw = np.empty((N, n, n))
        for i in range(n):
            for j in range(i, n):
                vals = self._hess[i][j].eval_float(pts)
                hw[:, i, j] = vals
                hw[:, j, i] = vals
        outer = unit[:, :, None] * unit[:, None, :]
        eyes = np.eye(n)[None, :, :]
        tang = eyes - outer
        radial = np.where(r > 0, fd2, 0.0)
        tangential = np.where(r > 0, fd1 / safe_r, 0.0)
        d2f = radial[:, None, None] * outer + tangential[:, None, None] * tang
        p_rad = np.where(r > 0, pd2, 0.0)
        p_tan = np.where(r > 0, pd1 / safe_r, 0.0)
        d2p = p_rad[:, None, None] * outer + p_tan[:, None, None] * tang
        gpsi = pd1[:, None] * unit
        cross = gpsi[:, :, None] * gw[:, None, :]
        H = (
            self.amplitude * d2f
            + pv[:, None, None] * hw
            + wv[:, None, None] * d2p
            + cross
            + np.swapaxes(cross, 1, 2)
        )
        return H

    def max_eigenvalues(self, pts) -> np.ndarray:
        return max_eigenvalues(self.hessians(pts))

    def origin_hessian(self) -> np.ndarray:
        n = self.params.n
        origin = np.zeros((1, n))
        H = np.empty((n, n))
        for i in range(n):
            for j in range(n):
                H[i, j] = self._hess[i][j].eval_float(origin)[0]
        return H


def max_eigenvalues(mats: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Largest eigenvalue per symmetric matrix, Jacobi-based with a cheap
    certificate screen: matrices whose Gershgorin upper bound is already
    below the strict-concavity threshold skip the iteration."""
    N, n, _ = mats.shape
    diag = np.diagonal(mats, axis1=1, axis2=2)
    offsum = np.abs(mats).sum(axis=2) - np.abs(diag)
    gersh = (diag + offsum).max(axis=1)
    out = np.empty(N)
    need = gersh > ANNULUS_EIG_BOUND
    out[~need] = gersh[~need]
    for k in np.nonzero(need)[0]:
        vals, _, converged = jacobi_eigh(mats[k], tol=tol)
        out[k] = vals[-1] if converged else gersh[k]
    return out


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------

def _shifted_rate(params: ConstructionParams, base) -> RateBreakdown:
    return origin_rate_shifted(params, base_value=base)


def _rate_positive(breakdown: RateBreakdown) -> bool:
    total = breakdown.total
    try:
        return total > 0
    except TypeError:
        return float(total) > 0


def _exact_plateau(params: ConstructionParams):
    """Exact shifted base 1 + A*plateau when the plateau is rational."""
    if alpha_case(params.alpha) == CASE_ONE:
        return Fraction(7, 8) * Fraction(params.rho) ** 2
    return None


def assemble(
    params: ConstructionParams,
    w: Poly,
    psi: Optional[Cutoff] = None,
    profile: Optional[RadialProfile] = None,
    *,
    annulus_directions: int = 96,
    annulus_radii: int = 24,
    inner_samples_per_pair: int = 120,
    boundary_samples: int = 10000,
    seed: int = 0,
    max_doublings: int = 50,
) -> AssemblyBundle:
    """Glue a verified potential into globally concave initial data.

    Doubles the amplitude from 1 until the sampled largest eigenvalue of
    D^2 w_tilde on the annulus rho/2 <= |x| <= rho(1 - 1/100) is at most
    -1e-6 and (for the power cases) w_tilde is positive at every sampled
    interior point; then re-asserts strict negativity on 0 < |x| < rho/2,
    where D^2 w_tilde = A D^2 F + D^2 w needs no amplitude help.  The log
    case fixes amplitude 1 and the constant cutoff.  The caller is expected
    to have run the Hessian verification of w at radius rho beforehand.
    """
    n = params.n
    rho = float(params.rho)
    case = alpha_case(params.alpha)
    if profile is None:
        profile = build_profile(params.alpha, params.rho)
    if case == CASE_ZERO:
        if psi is not None and psi.kind != "one":
            raise ValueError("the log case fixes amplitude 1 and the constant cutoff")
        psi = build_cutoff(params.rho, kind="one")
    elif psi is None:
        psi = build_cutoff(params.rho, kind="smooth")
    if abs(psi.rho - rho) > 1e-12 * rho or abs(profile.rho - rho) > 1e-12 * rho:
        raise ValueError("cutoff/profile radius disagrees with params.rho")

    annulus = shell_points(
        n, 0.5 * rho, rho * (1.0 - float(BOUNDARY_INSET)),
        annulus_directions, annulus_radii, seed=seed,
    )
    outer_band = shell_points(
        n, 0.75 * rho, rho * (1.0 - 1e-3), max(annulus_directions // 2, 2 * n), 8,
        seed=seed + 1,
    )
    inner_frac = ball_scan(n, Fraction(params.rho) / 2, inner_samples_per_pair, seed=seed)
    inner = np.array([[float(c) for c in p] for p in inner_frac])
    inner = inner[np.linalg.norm(inner, axis=1) >= rho * 1e-4]

    def build_candidate(amplitude: int) -> AssemblyBundle:
        plateau_exact = _exact_plateau(params)
        if plateau_exact is not None:
            base = 1 + amplitude * plateau_exact
        else:
            base = 1.0 + amplitude * profile.plateau_value
        breakdown = _shifted_rate(params, base)
        return AssemblyBundle(
            params=params,
            w=w,
            psi=psi,
            profile=profile,
            amplitude=amplitude,
            shifted_base=base,
            origin_rate_shifted=breakdown.total,
            rate_transfer_positive=_rate_positive(breakdown),
            boundary_gradient_floor=0.0,
            boundary_max_rel_gap=0.0,
            annulus_max_eig=0.0,
            inner_max_eig=0.0,
        )

    if case == CASE_ZERO:
        amplitudes = [1]
    else:
        amplitudes = [1 << k for k in range(max_doublings + 1)]

    chosen = None
    annulus_max = math.inf
    for amplitude in amplitudes:
        candidate = build_candidate(amplitude)
        annulus_max = float(candidate.max_eigenvalues(annulus).max())
        if annulus_max > ANNULUS_EIG_BOUND:
            continue
        if case != CASE_ZERO:
            probe = np.concatenate([annulus, outer_band, inner])
            wt = candidate.w_tilde_values(probe)
            if wt.min() <= 0:
                continue
        chosen = candidate
        break
    if chosen is None:
        if case == CASE_ZERO:
            raise AmplitudeSearchError(
                "log-case bundle fails the annulus bound with amplitude 1 "
                "(max eig %g)" % annulus_max
            )
        raise AmplitudeSearchError(
            "amplitude doubling cap exhausted (last annulus max eig %g)" % annulus_max
        )

    inner_max = float(chosen.max_eigenvalues(inner).max())
    if inner_max >= 0:
        raise AssemblyError(
            "glued Hessian not strictly negative on the inner ball "
            "(max eig %g)" % inner_max
        )

    _, boundary = initial_pressure(
        dataclasses.replace(chosen, annulus_max_eig=annulus_max, inner_max_eig=inner_max),
        boundary_samples=boundary_samples,
        seed=seed,
    )
    return dataclasses.replace(
        chosen,
        annulus_max_eig=annulus_max,
        inner_max_eig=inner_max,
        boundary_gradient_floor=boundary["floor"],
        boundary_max_rel_gap=boundary["max_rel_gap"],
    )


def initial_pressure(
    bundle: AssemblyBundle,
    boundary_samples: int = 10000,
    seed: int = 0,
    delta_rel: float = 1e-8,
):
    """Initial pressure evaluator plus its boundary report.

    The report's floor is the minimum over deterministic boundary samples of
    the inward one-sided difference |v0(x - delta x_hat)| / delta, compared
    per sample against the closed-form boundary gradient:

        fractional:  A**(1/alpha)        (v0 = A**(1/alpha) (rho - r) there)
        one:         2 A rho
        zero:        exp(w(x))

    Where the cutoff vanishes, w_tilde = A f(|x|) identically, which is
    asserted exactly on the sampled outer band.
    """
    params = bundle.params
    n = params.n
    rho = bundle.profile.rho
    case = bundle.profile.alpha_case
    dirs = sphere_directions(n, boundary_samples, seed=seed)
    delta = rho * delta_rel
    inset_pts = dirs * (rho - delta)
    vals = bundle.v0_values(inset_pts)
    measured = vals / delta
    if case == CASE_FRACTIONAL:
        closed = np.full_like(measured, float(bundle.amplitude) ** (1.0 / float(params.alpha)))
    elif case == CASE_ONE:
        closed = np.full_like(measured, 2.0 * bundle.amplitude * rho)
    else:
        closed = np.exp(bundle.w.eval_float(dirs * rho))
    rel = np.abs(measured - closed) / closed
    floor = float(measured.min())
    if floor <= 0:
        raise AssemblyError("boundary gradient floor vanishes (%g)" % floor)
    # exact identity where the cutoff vanishes: w_tilde == A f(|x|)
    # (not applicable to the log case, whose cutoff is the constant 1)
    if bundle.psi.kind != "one":
        band = dirs[: max(2 * n, 16)] * (rho * (1.0 - 1e-3))
        wt = bundle.w_tilde_values(band)
        band_r = np.sqrt((band * band).sum(axis=1))
        pure = bundle.amplitude * bundle.profile.value(band_r)
        if not np.array_equal(wt, pure):
            raise AssemblyError(
                "glued potential differs from the pure profile where the cutoff vanishes"
            )
    report = {
        "floor": floor,
        "max_rel_gap": float(rel.max()),
        "closed_min": float(closed.min()),
        "samples": int(boundary_samples),
        "delta": float(delta),
    }

    def evaluator(pts, dtype=np.float64):
        return bundle.v0_values(pts, dtype=dtype)

    return evaluator, report


def validate_bundle(
    bundle: AssemblyBundle,
    *,
    shell_directions: int = 200,
    shell_radii: int = 50,
    seed: int = 0,
    shell_bound: Optional[float] = None,
) -> Dict[str, object]:
    """Sampled global invariants of a glued bundle.

    Checks strict concavity on the shell rho/100 <= |x| <= rho(1 - 1/100),
    the origin eigenvalue structure (exactly one zero within the dead band,
    the rest negative), and the boundary gradient floor against its closed
    form.  The shell bound defaults to -1e-6 * (2 rho)^2: the unamplified
    potential's curvature off the inner ball scales quadratically with the
    radius, so a fixed bound calibrated at rho = 1/2 would spuriously fail
    the dyadically shrunk radii produced by the transfer search.
    """
    rho = bundle.profile.rho
    n = bundle.params.n
    if shell_bound is None:
        shell_bound = ANNULUS_EIG_BOUND * (2.0 * rho) ** 2
    shell = shell_points(
        n, rho / 100.0, rho * (1.0 - float(BOUNDARY_INSET)),
        shell_directions, shell_radii, seed=seed,
    )
    shell_max = float(bundle.max_eigenvalues(shell).max())
    origin_vals, _, converged = jacobi_eigh(bundle.origin_hessian())
    zeros = int(np.sum(np.abs(origin_vals) <= ZERO_EIG_BAND))
    negatives = int(np.sum(origin_vals < -ZERO_EIG_BAND))
    return {
        "shell_max_eig": shell_max,
        "shell_ok": shell_max <= shell_bound,
        "origin_zero_eigs": zeros,
        "origin_negative_eigs": negatives,
        "origin_ok": bool(converged) and zeros == 1 and negatives == n - 1,
        "boundary_floor": bundle.boundary_gradient_floor,
        "boundary_max_rel_gap": bundle.boundary_max_rel_gap,
        "boundary_ok": bundle.boundary_gradient_floor > 0
        and bundle.boundary_max_rel_gap <= 1e-6,
        "rate_transfer_positive": bundle.rate_transfer_positive,
    }


# ---------------------------------------------------------------------------
# transfer search (construction parameters that survive the gluing shift)
# ---------------------------------------------------------------------------

def _dyadic_radius_for(steepness: Fraction, cap: Fraction = Fraction(4)) -> Fraction:
    """Largest power of two rho <= min(1/2, cap/steepness)."""
    rho = Fraction(1, 2)
    limit = cap / steepness
    while rho > limit:
        rho = rho / 2
    return rho


def assemble_with_transfer(
    alpha,
    m,
    n: int,
    *,
    margin: Fraction = Fraction(19, 20),
    cutoff_kind: str = "polynomial",
    seed: int = 0,
    max_rounds: int = 12,
    assemble_kwargs: Optional[dict] = None,
) -> AssemblyBundle:
    """Search construction parameters whose origin rate stays positive after
    the gluing shift.

    The gluing raises the potential's origin value from 1 to
    c0 = 1 + A * plateau, which changes the origin rate.  This loop re-runs
    the steepness search against the currently assumed base, assembles, and
    accepts once the rate at the actual shifted base is positive.  The
    default margin sits near the top of the search's (0, 1) range rather
    than at the bare search default of 1/2: the number of explicit steps a
    grid run needs before the origin curvature crosses the detection
    threshold scales inversely with the margin, independently of
    resolution, and 19/20 keeps that crossing inside the knot safety
    budget of the coarsest supported grids.  For the
    unit family the steepness grows sublinearly with the base and the loop
    converges; the radius shrinks dyadically to keep steepness * rho
    bounded.  For the b-scaled family the admissible shifted base is
    bounded (the large-b envelope of the shifted rate has a finite positive
    window) while the gluing shift is not, so the steepness search fails at
    the required base and the loop raises TransferSearchError with the
    history of attempted bases.
    """
    alpha = Fraction(alpha)
    family = family_for_alpha(alpha)
    kwargs = dict(assemble_kwargs or {})
    base = Fraction(1)
    history = []
    for _ in range(max_rounds):
        try:
            steep = solve_steepness(alpha, m, n, margin=margin, base_value=base)
        except SteepnessSearchError as exc:
            raise TransferSearchError(
                "no steepness gives a positive origin rate at shifted base %s; "
                "attempted bases and resulting shifts: %s"
                % (base, history),
                history=history,
            ) from exc
        if family is Family.UNIT and alpha != 0:
            rho = _dyadic_radius_for(steep)
        else:
            rho = Fraction(1, 2)
        params = ConstructionParams(
            alpha=alpha, m=Fraction(m), n=n, family=family,
            steepness=steep, rho=rho,
        )
        w = build_family(params)
        if alpha == 0:
            psi = build_cutoff(rho, kind="one")
        else:
            psi = build_cutoff(rho, kind=cutoff_kind)
        profile = build_profile(alpha, rho)
        bundle = assemble(params, w, psi, profile, seed=seed, **kwargs)
        history.append((base, bundle.shifted_base))
        if bundle.rate_transfer_positive:
            return bundle
        next_base = _ceil_base(bundle.shifted_base)
        if next_base <= base:
            next_base = base * 2
        base = next_base
    raise TransferSearchError(
        "transfer search did not stabilize; attempted bases: %s" % (history,),
        history=history,
    )


def _ceil_base(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    return Fraction(math.ceil(float(value) * 1024), 1024)


# ---------------------------------------------------------------------------
# manifest serialization
# ---------------------------------------------------------------------------

MANIFEST_FORMAT = "glued-bundle-1"


def _num_to_text(value) -> Tuple[str, str]:
    if isinstance(value, Fraction):
        return "fraction", str(value)
    if isinstance(value, int):
        return "fraction", str(Fraction(value))
    return "float", repr(float(value))


def _num_from_text(kind: str, text: str):
    if kind == "fraction":
        return Fraction(text)
    return float(text)


def write_bundle_manifest(bundle: AssemblyBundle, path) -> None:
    """Serialize a bundle to one flat key=value manifest (poly inline)."""
    from .poly import poly_to_text

    p = bundle.params
    lines = [
        ("format", MANIFEST_FORMAT),
        ("alpha", str(Fraction(p.alpha))),
        ("m", str(Fraction(p.m))),
        ("n", str(p.n)),
        ("family", p.family.value),
        ("steepness", str(Fraction(p.steepness))),
        ("rho", str(Fraction(p.rho))),
        ("amplitude", str(bundle.amplitude)),
        ("cutoff.kind", bundle.psi.kind),
        ("cutoff.c_psi", repr(bundle.psi.c_psi)),
        ("cutoff.samples", str(bundle.psi.samples)),
        ("profile.case", bundle.profile.alpha_case),
        ("profile.rho", repr(bundle.profile.rho)),
        ("profile.plateau", repr(bundle.profile.plateau_value)),
        ("profile.outer_kind", bundle.profile.outer_kind),
        ("profile.outer_exponent", repr(bundle.profile.outer_exponent)),
        ("profile.middle", ",".join(repr(c) for c in bundle.profile.middle_sigma_coeffs)),
        ("profile.bound_c", repr(bundle.profile.derivative_bound_C)),
        ("profile.slope_bound", repr(bundle.profile.outer_slope_bound)),
        ("profile.curvature_bound", repr(bundle.profile.outer_curvature_bound)),
    ]
    kind, text = _num_to_text(bundle.shifted_base)
    lines.append(("shifted_base.kind", kind))
    lines.append(("shifted_base", text))
    kind, text = _num_to_text(bundle.origin_rate_shifted)
    lines.append(("origin_rate_shifted.kind", kind))
    lines.append(("origin_rate_shifted", text))
    lines.append(("rate_transfer_positive", "1" if bundle.rate_transfer_positive else "0"))
    lines.append(("boundary_gradient_floor", repr(bundle.boundary_gradient_floor)))
    lines.append(("boundary_max_rel_gap", repr(bundle.boundary_max_rel_gap)))
    lines.append(("annulus_max_eig", repr(bundle.annulus_max_eig)))
    lines.append(("inner_max_eig", repr(bundle.inner_max_eig)))
    poly_lines = poly_to_text(bundle.w).splitlines()
    lines.append(("poly.lines", str(len(poly_lines))))
    for i, pl in enumerate(poly_lines):
        lines.append(("poly.%d" % i, pl))
    with open(path, "w", encoding="utf-8") as fh:
        for key, value in lines:
            fh.write("%s = %s\n" % (key, value))


def read_bundle_manifest(path) -> AssemblyBundle:
    """Reconstruct a bundle from its manifest; v0 is re-evaluated, never stored."""
    from .poly import poly_from_text

    kv: Dict[str, str] = {}
    poly_parts: Dict[int, str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            raw = raw.rstrip("\n")
            if not raw.strip():
                continue
            key, _, value = raw.partition(" = ")
            if key.startswith("poly.") and key != "poly.lines":
                poly_parts[int(key.split(".", 1)[1])] = value
            else:
                kv[key] = value
    if kv.get("format") != MANIFEST_FORMAT:
        raise ValueError("unrecognized bundle manifest format: %r" % kv.get("format"))
    params = ConstructionParams(
        alpha=Fraction(kv["alpha"]),
        m=Fraction(kv["m"]),
        n=int(kv["n"]),
        family=Family(kv["family"]),
        steepness=Fraction(kv["steepness"]),
        rho=Fraction(kv["rho"]),
    )
    w = poly_from_text("\n".join(poly_parts[i] for i in range(len(poly_parts))))
    psi = Cutoff(
        rho=float(kv["profile.rho"]),
        kind=kv["cutoff.kind"],
        c_psi=float(kv["cutoff.c_psi"]),
        samples=int(kv["cutoff.samples"]),
    )
    profile = RadialProfile(
        alpha_case=kv["profile.case"],
        rho=float(kv["profile.rho"]),
        plateau_value=float(kv["profile.plateau"]),
        outer_kind=kv["profile.outer_kind"],
        outer_exponent=float(kv["profile.outer_exponent"]),
        middle_sigma_coeffs=tuple(float(c) for c in kv["profile.middle"].split(",")),
        derivative_bound_C=float(kv["profile.bound_c"]),
        outer_slope_bound=float(kv["profile.slope_bound"]),
        outer_curvature_bound=float(kv["profile.curvature_bound"]),
    )
    return AssemblyBundle(
        params=params,
        w=w,
        psi=psi,
        profile=profile,
        amplitude=int(kv["amplitude"]),
        shifted_base=_num_from_text(kv["shifted_base.kind"], kv["shifted_base"]),
        origin_rate_shifted=_num_from_text(
            kv["origin_rate_shifted.kind"], kv["origin_rate_shifted"]
        ),
        rate_transfer_positive=kv["rate_transfer_positive"] == "1",
        boundary_gradient_floor=float(kv["boundary_gradient_floor"]),
        boundary_max_rel_gap=float(kv["boundary_max_rel_gap"]),
        annulus_max_eig=float(kv["annulus_max_eig"]),
        inner_max_eig=float(kv["inner_max_eig"]),
    )
