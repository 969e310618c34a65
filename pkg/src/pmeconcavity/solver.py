"""Explicit finite-difference evolution of the pressure equation.

Evolves v_t = (m-1) v lap v + |grad v|^2 (the pressure form of the porous
medium flow) on the box [-rho, rho]^n with Dirichlet zero boundary, and
probes the largest eigenvalue of the centered-difference Hessian of v^alpha
(log v for alpha = 0) at the origin to detect loss of concavity.

Scheme: centered second differences for the Laplacian; for the gradient
square, centered differences where the node and both axis neighbors are
positive, and a Godunov selection at the free boundary: with one-sided
slopes a = (v - v_minus)/h and b = (v_plus - v)/h the equation transports
along the steeper admissible slope, so the per-axis contribution is
max(a^2, b^2) when a <= b, the in-between minimum when a > b without a sign
change, and 0 across a concave kink (b < 0 < a).  This advances a linear
front at exactly its closed-form speed and keeps the discrete maximum
principle exact at interior maxima.
"""

from __future__ import annotations

import dataclasses
import math
import struct
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

import numpy as np

from .eigen import jacobi_eigh

SNAPSHOT_MAGIC = b"PMEFIELD"
PROBE_CSV_COLUMNS = ("t", "w11", "lambda1", "max_v", "mass_proxy", "clamp_norm")

# clamp magnitude allowed per step, relative to max v
CLAMP_TOL = 1e-12
# slack for the discrete maximum principle and the lambda1 >= w11 dominance
MAX_PRINCIPLE_SLACK = 1e-10


class SolverError(RuntimeError):
    """Base class for evolution failures."""


class ResolutionError(SolverError, ValueError):
    """Grid resolution unusable (must be odd and at least 33)."""


class StabilityError(SolverError):
    """Requested time step exceeds the explicit stability bound."""

    def __init__(self, requested: float, admissible: float):
        super().__init__(
            "dt %g exceeds the stability bound; admissible dt = %g"
            % (requested, admissible)
        )
        self.requested = requested
        self.admissible = admissible


class ProbeError(SolverError):
    """The origin left the positivity set, so the probe is undefined."""


class InvariantError(SolverError):
    """A sampled evolution invariant (clamp size, maximum principle,
    eigenvalue dominance) failed during a run."""


@dataclasses.dataclass
class GridField:
    """Pressure samples on the uniform grid of the box [-rho, rho]^n.

    res is odd so the origin is a node; h = 2 rho / (res - 1); values are
    nonnegative with Dirichlet zero on the box faces.  comp carries the
    rounding residue of the time accumulation (values + comp is the
    compensated state): per-step curvature increments at the origin sit
    near one ulp of v, and losing them would bury the measured rate.
    last_clamp_norm and last_dt record what the most recent step did.
    """

    n: int
    rho: float
    res: int
    t: float
    values: np.ndarray
    comp: Optional[np.ndarray] = None
    last_clamp_norm: float = 0.0
    last_dt: float = 0.0

    @property
    def h(self) -> float:
        return 2.0 * self.rho / (self.res - 1)

    @property
    def support_mask(self) -> np.ndarray:
        return self.values > 0

    @property
    def origin_index(self) -> Tuple[int, ...]:
        return tuple([(self.res - 1) // 2] * self.n)

    def origin_value(self) -> float:
        return float(self.values[self.origin_index])

    def max_value(self) -> float:
        return float(self.values.max())

    def copy(self) -> "GridField":
        return dataclasses.replace(
            self, values=self.values.copy(),
            comp=None if self.comp is None else self.comp.copy())


def grid_axis(rho: float, res: int, dtype=np.longdouble) -> np.ndarray:
    """Node coordinates, exactly symmetric about an exact-zero center node.

    Coordinates are signed integer multiples of the step, so the center
    node is 0.0 and x[c+k] == -x[c-k] bitwise.  A linspace-style
    start + k*step grid carries coordinate rounding that breaks this
    symmetry at the 1e-19 level; a steep linear term a*x1 turns that into
    a spurious a * asym / h^2 contribution to every centered second
    difference, which for glued bundles is the same order as the origin
    curvature being probed.
    """
    step = dtype(2) * dtype(rho) / dtype(res - 1)
    k = np.arange(res, dtype=dtype) - dtype((res - 1) // 2)
    return k * step


@dataclasses.dataclass(frozen=True)
class AnalyticInitialData:
    """Closed-form initial pressure usable wherever a glued bundle is.

    fn maps an (N, n) point array to N pressure values; rho is the box
    half-width; alpha and m tell the probe and the stepper what flow this
    data belongs to.
    """

    n: int
    rho: float
    m: float
    alpha: float
    fn: Callable[[np.ndarray], np.ndarray]

    def v0_values(self, pts, dtype=np.float64):
        pts = np.asarray(pts, dtype=dtype)
        if pts.ndim == 1:
            pts = pts[None, :]
        return np.asarray(self.fn(pts), dtype=dtype)


def _source_shape(source) -> Tuple[int, float, float, float]:
    """(n, box half-width, m, alpha) of a bundle or analytic initial data."""
    try:
        params = source.params
        return params.n, float(source.profile.rho), float(params.m), float(params.alpha)
    except AttributeError:
        return source.n, float(source.rho), float(source.m), float(source.alpha)


def discretize(source, res: int, dtype=np.longdouble) -> GridField:
    """Sample the initial pressure on the grid, zero outside the ball.

    The box circumscribes the support ball, so every node with |x| >= rho
    is set to 0 directly (boundary nodes exactly zero) and interior ball
    nodes are evaluated through the source's v0 evaluator.
    """
    if res % 2 == 0 or res < 33:
        raise ResolutionError("resolution must be odd and at least 33, got %d" % res)
    n, rho, _, _ = _source_shape(source)
    axis = grid_axis(rho, res, dtype=dtype)
    mesh = np.meshgrid(*([axis] * n), indexing="ij")
    pts = np.stack([mm.reshape(-1) for mm in mesh], axis=1)
    r2 = (pts * pts).sum(axis=1)
    inside = r2 < rho * rho
    values = np.zeros(pts.shape[0], dtype=dtype)
    if inside.any():
        values[inside] = source.v0_values(pts[inside], dtype=dtype)
    np.maximum(values, 0, out=values)
    shaped = values.reshape((res,) * n)
    return GridField(n=n, rho=rho, res=res, t=0.0,
                     values=shaped, comp=np.zeros_like(shaped))


def stable_dt(field: GridField, m) -> float:
    """Largest explicit step h^2 / (4 n (m-1) max v); inf for a zero field."""
    maxv = field.max_value()
    if maxv <= 0:
        return math.inf
    return field.h**2 / (4.0 * field.n * (float(m) - 1.0) * maxv)


def step(field: GridField, m, dt: Optional[float] = None) -> GridField:
    """One explicit update of the pressure equation; returns a new field.

    The accumulation v <- v + dt*(...) is compensated: the rounding residue
    of each addition is carried in GridField.comp, so curvature growth far
    below one ulp of v per step survives for the probe to read.
    """
    if not float(m) > 1:
        raise ValueError("m must exceed 1")
    admissible = stable_dt(field, m)
    if dt is None:
        dt = admissible if math.isfinite(admissible) else field.h**2
    elif dt > admissible * (1 + 1e-12):
        raise StabilityError(dt, admissible)
    if dt <= 0:
        raise ValueError("dt must be positive")

    v = field.values
    n, h = field.n, field.h
    core = (slice(1, -1),) * n
    vc = v[core]
    lap = np.zeros_like(vc)
    gradsq = np.zeros_like(vc)
    for ax in range(n):
        plus = tuple(slice(2, None) if k == ax else slice(1, -1) for k in range(n))
        minus = tuple(slice(0, -2) if k == ax else slice(1, -1) for k in range(n))
        vp = v[plus]
        vm = v[minus]
        lap += (vp - 2 * vc + vm) / h**2
        a = (vc - vm) / h
        b = (vp - vc) / h
        godunov = np.where(
            a <= b,
            np.maximum(a * a, b * b),
            np.where((b < 0) & (a > 0), 0.0, np.minimum(a * a, b * b)),
        )
        centered_ok = (vc > 0) & (vp > 0) & (vm > 0)
        centered = ((vp - vm) / (2 * h)) ** 2
        gradsq += np.where(centered_ok, centered, godunov)

    update = dt * ((float(m) - 1.0) * vc * lap + gradsq)
    if field.comp is not None:
        update = update + field.comp[core]
    # Knuth two-sum: s + err == vc + update exactly
    s = vc + update
    bb = s - vc
    err = (vc - (s - bb)) + (update - bb)

    clamp = float(-min(s.min(), 0.0))
    negative = s < 0
    np.maximum(s, 0, out=s)
    err[negative] = 0.0

    new_values = np.zeros_like(v)
    new_values[core] = s
    new_comp = np.zeros_like(v)
    new_comp[core] = err
    return GridField(
        n=n, rho=field.rho, res=field.res, t=field.t + dt,
        values=new_values, comp=new_comp,
        last_clamp_norm=clamp, last_dt=float(dt),
    )


def _block_hessian(w: np.ndarray, n: int, h: float) -> np.ndarray:
    """Centered-difference Hessian from a 5^n block of samples of w."""
    mid = (2,) * n
    H = np.empty((n, n), dtype=w.dtype)
    for i in range(n):
        up = tuple(3 if k == i else 2 for k in range(n))
        dn = tuple(1 if k == i else 2 for k in range(n))
        H[i, i] = (w[up] - 2 * w[mid] + w[dn]) / h**2
        for j in range(i + 1, n):
            pp = tuple(3 if k in (i, j) else 2 for k in range(n))
            mm = tuple(1 if k in (i, j) else 2 for k in range(n))
            pm = tuple(3 if k == i else (1 if k == j else 2) for k in range(n))
            mp = tuple(1 if k == i else (3 if k == j else 2) for k in range(n))
            H[i, j] = H[j, i] = (w[pp] - w[pm] - w[mp] + w[mm]) / (4 * h**2)
    return H


def probe(field: GridField, alpha) -> Tuple[float, np.ndarray]:
    """(largest eigenvalue, Hessian) of v^alpha (log v at alpha=0) at 0.

    The transform is evaluated on the 5^n block around the origin and the
    standard centered second differences of its inner 3^n points form the
    Hessian; eigenvalues come from cyclic Jacobi iteration at tolerance
    1e-12 in the grid dtype.  For alpha = 1 the compensation residue is
    differenced alongside the stored values, recovering curvature below one
    ulp of v; the power and log transforms re-round at the ulp of w, so
    the residue cannot help them and is ignored.
    """
    if field.origin_value() <= 0:
        raise ProbeError("origin pressure is %g; the probe needs v(0) > 0"
                         % field.origin_value())
    c = (field.res - 1) // 2
    if c < 2:
        raise ResolutionError("grid too small for the 5-point probe block")
    sly = tuple(slice(c - 2, c + 3) for _ in range(field.n))
    block = field.values[sly]
    af = float(alpha)
    with np.errstate(divide="ignore"):
        if af == 0.0:
            w = np.log(block)
        elif af == 1.0:
            w = block
        else:
            w = block ** af
    n, h = field.n, field.h
    H = _block_hessian(w, n, h)
    if af == 1.0 and field.comp is not None:
        H = H + _block_hessian(field.comp[sly], n, h)
    vals, _, converged = jacobi_eigh(H, tol=1e-12)
    if not converged:
        raise SolverError("Jacobi iteration failed to converge on the probe Hessian")
    return float(vals[-1]), H


@dataclasses.dataclass
class ProbeSeries:
    """Origin concavity probe history of one evolution run.

    theta = 10 h^2 is the detection threshold separating genuine positivity
    of lambda1 from centered-difference truncation noise; t_star is the
    first probed time with lambda1 > theta (None if never).  aborted marks a
    run stopped at the last step whose origin probe is still independent of
    boundary truncation and gluing-knot truncation (information moves one
    cell per step in an explicit stencil, so that step count is exact).
    measured_initial_rate is (w11(t1) - w11(0)) / t1 over the first probe
    interval.
    """

    times: List[float]
    lambda1: List[float]
    w11: List[float]
    max_v: List[float]
    mass_proxy: List[float]
    clamp_norm: List[float]
    res: int
    h: float
    dt: float
    theta: float
    t_star: Optional[float]
    aborted: bool
    measured_initial_rate: Optional[float]


def mass_proxy(field: GridField, m) -> float:
    """Discrete mass of u = ((m-1) v / m)^(1/(m-1)), a conserved quantity
    of the flow while the support avoids the box boundary."""
    mf = float(m)
    with np.errstate(under="ignore"):
        u = ((mf - 1.0) * field.values / mf) ** (1.0 / (mf - 1.0))
    return float(u.sum()) * field.h**field.n


# values below this fraction of max v are front toe deposits (see
# front_position), not physical support; a perturbation that small stays
# hundreds of orders of magnitude below what any probe can see
SUPPORT_DUST_RELATIVE = 1e-15


def physical_support_mask(field: GridField) -> np.ndarray:
    """Support mask with the super-exponentially small front toe removed."""
    maxv = field.max_value()
    if maxv <= 0:
        return np.zeros_like(field.values, dtype=bool)
    return field.values > SUPPORT_DUST_RELATIVE * maxv


def support_clearance(field: GridField) -> float:
    """Distance (in length units) from the physical support to the box
    faces; toe values below SUPPORT_DUST_RELATIVE * max v are ignored."""
    mask = physical_support_mask(field)
    if not mask.any():
        return field.rho
    idx = np.nonzero(mask)
    best = field.res
    for ax in range(field.n):
        i = idx[ax]
        best = min(best, int(i.min()), int(field.res - 1 - i.max()))
    return best * field.h


def _face_adjacent_mask(res: int, n: int) -> np.ndarray:
    """Nodes one cell inside a box face (the neighbors of Dirichlet nodes)."""
    mask = np.zeros((res,) * n, dtype=bool)
    for ax in range(n):
        for edge in (1, res - 2):
            sl = tuple(edge if k == ax else slice(None) for k in range(n))
            mask[sl] = True
    return mask


def face_safety_budget(res: int) -> int:
    """Steps after first boundary contact during which origin probes stay
    boundary-independent.

    An explicit stencil propagates information one cell per step.  A
    Dirichlet truncation is born at a box face (distance (res-1)/2 cells
    from the origin) on the step after the support first reaches a
    face-adjacent node, and the probe reads nodes one cell from the origin,
    so probes up to contact + (res-1)/2 - 1 steps are bitwise equal to a
    free-space run.
    """
    return (res - 1) // 2 - 1


def knot_safety_budget(res: int) -> int:
    """Steps during which origin probes of a glued bundle are unaffected by
    the radial profile's inner knot.

    The glued profile is constant inside radius rho/4 and only C^2 at that
    knot, so the discrete Laplacian there carries an O(h * f''') truncation
    error amplified by the gluing amplitude; nodes whose stencils straddle
    the knot sphere (radius (res-1)/8 cells, integral for the supported
    resolutions) emit it from the first step.  It reaches the probe's
    one-cell stencil after (res-1)/8 - 1 further steps, so earlier probes
    are bitwise knot-independent.
    """
    return (res - 1) // 8 - 1


def evolve_and_probe(
    source,
    res: int,
    T: float,
    probe_stride: int = 1,
    dtype=np.longdouble,
) -> ProbeSeries:
    """Run the flow to time T, probing the origin every probe_stride steps.

    Uses a fixed dt just under the initial stability bound (the discrete
    maximum principle keeps it admissible).  A glued ball touches the box
    faces, so its support meets the boundary immediately; the run is still
    valid near the origin because truncation effects travel one cell per
    step.  The series is aborted (tagged, partial) at the first step whose
    probe could no longer be trusted: past first-face-contact plus
    face_safety_budget(res), or, for glued bundles, past
    knot_safety_budget(res), whichever ends first.  Raises InvariantError
    if a sampled invariant fails: clamp size, maximum principle,
    lambda1 >= w11, or the mass proxy drifting 1% or more between probes
    while the support stays 3h clear of the box faces.  An identically
    zero field probes as the zero matrix (lambda1 = 0) rather than an
    error.
    """
    if probe_stride < 1:
        raise ValueError("probe_stride must be at least 1")
    _, _, m, alpha = _source_shape(source)
    field = discretize(source, res, dtype=dtype)
    h = field.h
    theta = 10.0 * h * h
    bound = stable_dt(field, m)
    dt = field.h**2 if not math.isfinite(bound) else bound * (1 - 1e-6)
    nsteps = max(1, int(math.ceil(T / dt)))

    near_face = _face_adjacent_mask(res, field.n)
    face_budget = face_safety_budget(res)
    knot_limit = knot_safety_budget(res) if hasattr(source, "profile") else None
    contact_step: Optional[int] = (
        0 if (near_face & physical_support_mask(field)).any() else None)

    series = ProbeSeries(
        times=[], lambda1=[], w11=[], max_v=[], mass_proxy=[], clamp_norm=[],
        res=res, h=h, dt=dt, theta=theta, t_star=None, aborted=False,
        measured_initial_rate=None,
    )
    # mass drift is only meaningful while the support clears the faces by 3h;
    # once it dips below, boundary flux is expected and the guard disarms
    mass_guard = {"active": True, "initial": None}

    def record(fld: GridField, clamp: float) -> None:
        if fld.max_value() == 0.0:
            lam, w11 = 0.0, 0.0
        else:
            lam, H = probe(fld, alpha)
            w11 = float(H[0, 0])
        scale = max(1.0, abs(w11))
        if lam < w11 - MAX_PRINCIPLE_SLACK * scale:
            raise InvariantError(
                "largest eigenvalue %r fell below the (1,1) entry %r" % (lam, w11))
        if series.times and not fld.t > series.times[-1]:
            raise InvariantError("probe times not strictly increasing")
        mass = mass_proxy(fld, m)
        if mass_guard["active"]:
            if support_clearance(fld) < 3.0 * h:
                mass_guard["active"] = False
            elif mass_guard["initial"] is None:
                mass_guard["initial"] = mass if mass > 0 else None
            elif mass_guard["initial"] is not None:
                drift = abs(mass - mass_guard["initial"]) / mass_guard["initial"]
                if drift >= 0.01:
                    raise InvariantError(
                        "mass proxy drifted %.3g%% at t=%g with the support "
                        "clear of the boundary" % (100 * drift, fld.t))
        series.times.append(float(fld.t))
        series.lambda1.append(lam)
        series.w11.append(w11)
        series.max_v.append(fld.max_value())
        series.mass_proxy.append(mass)
        series.clamp_norm.append(clamp)
        if series.t_star is None and lam > theta:
            series.t_star = float(fld.t)

    record(field, 0.0)
    prev_max = field.max_value()
    clamp_since_probe = 0.0
    for k in range(1, nsteps + 1):
        safe_limit = None
        if knot_limit is not None:
            safe_limit = knot_limit
        if contact_step is not None:
            face_limit = contact_step + face_budget
            safe_limit = face_limit if safe_limit is None else min(safe_limit, face_limit)
        if safe_limit is not None and k > safe_limit:
            series.aborted = True
            if series.times and series.times[-1] < field.t:
                record(field, clamp_since_probe)
            break
        field = step(field, m, dt)
        clamp_since_probe = max(clamp_since_probe, field.last_clamp_norm)
        maxv = field.max_value()
        if field.last_clamp_norm >= CLAMP_TOL * max(maxv, 1e-300):
            raise InvariantError(
                "clamp norm %g at t=%g exceeds %g * max v"
                % (field.last_clamp_norm, field.t, CLAMP_TOL))
        if maxv > prev_max + MAX_PRINCIPLE_SLACK * max(1.0, prev_max):
            raise InvariantError(
                "discrete maximum principle violated: %r -> %r" % (prev_max, maxv))
        prev_max = maxv
        if contact_step is None and (near_face & physical_support_mask(field)).any():
            contact_step = k
        if k % probe_stride == 0 or k == nsteps:
            record(field, clamp_since_probe)
            clamp_since_probe = 0.0
    if len(series.times) >= 2:
        t1 = series.times[1]
        series.measured_initial_rate = (series.w11[1] - series.w11[0]) / t1
    return series


# ---------------------------------------------------------------------------
# closed-form solutions (symbolically verified in the test suite)
# ---------------------------------------------------------------------------

def barenblatt_pressure(pts, t, c0=Fraction(1, 16), t0=1):
    """Source-type pressure for n = 2, m = 2:

        v(x, t) = c0 (t + t0)^(-1/2) - |x|^2 / (8 (t + t0)),  positive part.

    Exact solution of v_t = v lap v + |grad v|^2 (checked by symbolic
    substitution in the tests); support radius (8 c0)^(1/2) (t+t0)^(1/4);
    Hessian -Id / (4 (t+t0)) on the support, so every concavity probe of
    v (alpha = 1) sees lambda1 = -1 / (4 (t+t0)) < 0.
    """
    pts = np.asarray(pts)
    if pts.ndim == 1:
        pts = pts[None, :]
    if pts.shape[1] != 2:
        raise ValueError("the closed form is the n = 2 source solution")
    T = float(t) + float(t0)
    r2 = (pts * pts).sum(axis=1)
    vals = float(c0) / math.sqrt(T) - r2 / (8.0 * T)
    return np.maximum(vals, 0)


def barenblatt_initial(c0=Fraction(1, 16), t0=1, box_rho=1.0) -> AnalyticInitialData:
    """The n=2, m=2 source pressure at t=0 as analytic initial data."""
    return AnalyticInitialData(
        n=2, rho=float(box_rho), m=2.0, alpha=1.0,
        fn=lambda pts: barenblatt_pressure(pts, 0.0, c0=c0, t0=t0),
    )


def traveling_wave_pressure(pts, t, c=1.0):
    """Planar wave v(x, t) = max(c (x_1 + c t), 0), exact for every m
    (v_t = c^2 = |grad v|^2 and v is linear so v lap v = 0); the front
    x_1 = -c t moves left at speed c as the support expands."""
    pts = np.asarray(pts)
    if pts.ndim == 1:
        pts = pts[None, :]
    cf = float(c)
    return np.maximum(cf * (pts[:, 0] + cf * float(t)), 0)


def tent_initial(left=-0.6, right=0.6, c=1.0, box_rho=1.0, m=2.0) -> AnalyticInitialData:
    """Compactly supported 1-D tent c * min(x - left, right - x)_+.

    Near each foot this is the planar wave profile, so both fronts move
    outward at speed c until the rarefaction from the apex kink arrives;
    used to measure front speed inside a Dirichlet box.
    """

    def fn(pts):
        x = np.asarray(pts)[:, 0]
        return np.maximum(float(c) * np.minimum(x - left, right - x), 0)

    return AnalyticInitialData(n=1, rho=float(box_rho), m=float(m), alpha=1.0, fn=fn)


def polynomial_initial(params, w, box_rho=None) -> AnalyticInitialData:
    """Positive part of the bare construction polynomial as initial data.

    v0 = max(w, 0) keeps the polynomial's origin jet with its unshifted
    base value, so the measured w11 rate can be compared against the
    closed-form origin rate directly, without the gluing amplitude shift.
    discretize still zeroes nodes outside the inscribed ball; that cliff
    sits a full ball radius from the origin and cannot reach the probe
    within the face safety budget.
    """

    def fn(pts):
        vals = w.eval_float(np.asarray(pts))
        return np.maximum(vals, 0)

    rho = float(params.rho if box_rho is None else box_rho)
    return AnalyticInitialData(
        n=params.n, rho=rho, m=float(params.m), alpha=float(params.alpha), fn=fn)


FRONT_LEVEL_FRACTION = 0.05


def front_position(field: GridField, side: str = "left") -> float:
    """Subcell position of the 1-D support edge by secant extrapolation.

    The raw positivity set is unusable for front tracking: the monotone
    gradient update deposits a positive toe ahead of the moving edge whose
    values decay super-exponentially cell by cell, so the outermost
    positive node overshoots the physical front by a resolution-dependent
    sliver.  Instead the edge is read off the resolved ramp: find the two
    nodes bracketing the level FRONT_LEVEL_FRACTION * max(v) and place the
    front where their secant line crosses zero.  The level sits far above
    the toe, and the secant construction is exact for the linear profile
    of a traveling wave regardless of the level height.
    """
    if field.n != 1:
        raise ValueError("front tracking is 1-D only")
    v = field.values
    if not float(v.max()) > 0:
        raise ValueError("empty support")
    axis = grid_axis(field.rho, field.res, dtype=np.float64)
    level = FRONT_LEVEL_FRACTION * float(v.max())
    pos = np.nonzero(v >= level)[0]
    if side == "left":
        i = int(pos.min())
        if i == 0:
            return float(axis[0])
        # secant through (axis[i-1], v[i-1]) and (axis[i], v[i]), v[i-1] < level
        drop = float(v[i] - v[i - 1])
        if drop <= 0:
            return float(axis[i])
        return float(axis[i]) - field.h * float(v[i]) / drop
    i = int(pos.max())
    if i == field.res - 1:
        return float(axis[-1])
    drop = float(v[i] - v[i + 1])
    if drop <= 0:
        return float(axis[i])
    return float(axis[i]) + field.h * float(v[i]) / drop


# ---------------------------------------------------------------------------
# probe CSV and field snapshots
# ---------------------------------------------------------------------------

def write_probe_csv(series: ProbeSeries, path) -> None:
    """probe.csv: one row per probe with deterministic repr() floats."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(PROBE_CSV_COLUMNS) + "\n")
        rows = zip(series.times, series.w11, series.lambda1,
                   series.max_v, series.mass_proxy, series.clamp_norm)
        for t, w11, lam, maxv, mass, clamp in rows:
            fh.write(",".join(repr(float(x)) for x in (t, w11, lam, maxv, mass, clamp)))
            fh.write("\n")


def read_probe_csv(path) -> dict:
    """Columns of a probe.csv as float lists keyed by column name."""
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        if tuple(header) != PROBE_CSV_COLUMNS:
            raise ValueError("unrecognized probe csv header: %r" % header)
        cols = {name: [] for name in header}
        for line in fh:
            if not line.strip():
                continue
            for name, cell in zip(header, line.strip().split(",")):
                cols[name].append(float(cell))
    return cols


def write_snapshot(field: GridField, path) -> None:
    """Flat binary field snapshot.

    Layout: 8-byte magic "PMEFIELD", int32 n, int32 res, float64 t, then
    res^n row-major float64 pressure values (C order, axis 0 slowest).
    """
    with open(path, "wb") as fh:
        fh.write(SNAPSHOT_MAGIC)
        fh.write(struct.pack("<ii", field.n, field.res))
        fh.write(struct.pack("<d", float(field.t)))
        fh.write(np.ascontiguousarray(field.values, dtype=np.float64).tobytes())


def read_snapshot(path, rho: float) -> GridField:
    """Read a snapshot written by write_snapshot; rho is not stored in the
    header, so the caller supplies the box half-width."""
    with open(path, "rb") as fh:
        magic = fh.read(8)
        if magic != SNAPSHOT_MAGIC:
            raise ValueError("bad snapshot magic: %r" % magic)
        n, res = struct.unpack("<ii", fh.read(8))
        (t,) = struct.unpack("<d", fh.read(8))
        payload = fh.read(res**n * 8)
    values = np.frombuffer(payload, dtype=np.float64).reshape((res,) * n).copy()
    return GridField(n=n, rho=float(rho), res=res, t=t, values=values)
