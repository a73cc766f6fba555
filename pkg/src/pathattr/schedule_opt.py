"""Sample-schedule optimization for left Riemann sums.

Pipeline: probe the attribution integrand at equispaced points on a small
calibration set, turn finite differences of those probes into a piecewise
linear profile of the integrand's derivative magnitude, then place the
Riemann sample points so the first-order error surrogate

    0.5 * sum_j profile(alpha_j) * (alpha_{j+1} - alpha_j)^2

is as small as possible. The continuous search runs Powell's derivative-free
method over an increment parameterization that keeps points ordered by
construction; an exhaustive dynamic program over a fixed grid serves as an
independent oracle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError, NumericalError, ShapeError
from .models import DifferentiableModel
from .paths import Path
from .riemann import AlphaSchedule, integrand

_GOLD = 1.618033988749895
_CGOLD = 0.3819660112501051
_TINY = 1e-21


@dataclass(frozen=True)
class DerivativeProfile:
    """Piecewise-linear, non-negative magnitude estimate on [0, 1].

    Queries outside the knot span return the nearest end value (constant
    extension), so the profile is defined on all of [0, 1].
    """

    knots: np.ndarray
    magnitudes: np.ndarray

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=np.float64).reshape(-1).copy()
        mags = np.asarray(self.magnitudes, dtype=np.float64).reshape(-1).copy()
        if knots.size != mags.size or knots.size < 1:
            raise ShapeError("need matching non-empty knot and magnitude vectors")
        if np.any(np.diff(knots) <= 0.0):
            raise ShapeError("knots must be strictly increasing")
        if knots[0] < 0.0 or knots[-1] > 1.0:
            raise DomainError("knots must lie in [0, 1]")
        if not np.all(np.isfinite(mags)) or np.any(mags < 0.0):
            raise DomainError("magnitudes must be finite and non-negative")
        knots.setflags(write=False)
        mags.setflags(write=False)
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "magnitudes", mags)

    def __call__(self, t):
        return np.interp(t, self.knots, self.magnitudes)

    @staticmethod
    def constant(value: float) -> "DerivativeProfile":
        return DerivativeProfile(np.array([0.5]), np.array([float(value)]))


@dataclass(frozen=True)
class ProbeMatrix:
    """Integrand samples at equispaced probe points for one example path."""

    samples: np.ndarray
    probe_points: np.ndarray

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        pts = np.asarray(self.probe_points, dtype=np.float64).reshape(-1)
        if samples.ndim != 2 or samples.shape[0] != pts.size:
            raise ShapeError("samples must be (probes, d) matching probe_points")
        expected = np.linspace(0.0, 1.0, pts.size)
        if pts.size < 2 or not np.allclose(pts, expected, atol=1e-12):
            raise DomainError("probe points must be equispaced on [0, 1] incl. endpoints")
        samples = samples.copy()
        pts = pts.copy()
        samples.setflags(write=False)
        pts.setflags(write=False)
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "probe_points", pts)


def probe_matrix(model: DifferentiableModel, path: Path, probes: int) -> ProbeMatrix:
    if probes < 2:
        raise DomainError(f"need at least 2 probes, got {probes}")
    pts = np.linspace(0.0, 1.0, probes)
    samples = np.empty((probes, path.dimension), dtype=np.float64)
    for j, t in enumerate(pts):
        samples[j] = integrand(model, path, float(t))
    return ProbeMatrix(samples=samples, probe_points=pts)


def estimate_profile(
    model: DifferentiableModel, paths: Sequence[Path], probes: int
) -> DerivativeProfile:
    """Average integrand-derivative magnitude over the calibration paths.

    Per path: finite differences of the probe rows, absolute value, mean over
    features. The per-path curves are averaged with equal weight. Knots sit at
    probe-interval midpoints, where the centered difference is most accurate.
    """
    if len(paths) < 1:
        raise DomainError("need at least one calibration path")
    if probes < 2:
        raise DomainError(f"need at least 2 probes, got {probes}")
    step = 1.0 / (probes - 1)
    acc = np.zeros(probes - 1, dtype=np.float64)
    for idx, path in enumerate(paths):
        pm = probe_matrix(model, path, probes)
        if not np.all(np.isfinite(pm.samples)):
            bad = np.flatnonzero(~np.isfinite(pm.samples).all(axis=1))[0]
            raise NumericalError(
                f"non-finite probe for example {idx} at t = {pm.probe_points[bad]}"
            )
        diffs = np.diff(pm.samples, axis=0) / step
        acc += np.abs(diffs).mean(axis=1)
    acc /= len(paths)
    pts = np.linspace(0.0, 1.0, probes)
    knots = 0.5 * (pts[:-1] + pts[1:])
    return DerivativeProfile(knots=knots, magnitudes=acc)


def error_bound(profile: DerivativeProfile, schedule: AlphaSchedule) -> float:
    """First-order surrogate for the left-rule error on this schedule."""
    deltas = schedule.deltas()
    weights = profile(schedule.points)
    return 0.5 * float(np.dot(weights, deltas * deltas))


# ---------------------------------------------------------------------------
# Powell's method: bracketing, Brent line refinement, direction-set cycles.


def _bracket(f: Callable[[float], float], xa: float = 0.0, xb: float = 1.0,
             grow_limit: float = 110.0, max_iter: int = 120):
    """Expand downhill from (xa, xb) until a triple brackets a minimum."""
    fa, fb = f(xa), f(xb)
    if fb > fa:
        xa, xb = xb, xa
        fa, fb = fb, fa
    xc = xb + _GOLD * (xb - xa)
    fc = f(xc)
    it = 0
    while fc < fb:
        if it >= max_iter:
            raise NumericalError("line-search bracketing did not terminate")
        it += 1
        r = (xb - xa) * (fb - fc)
        q = (xb - xc) * (fb - fa)
        denom = q - r
        denom = 2.0 * math.copysign(max(abs(denom), _TINY), denom)
        u = xb - ((xb - xc) * q - (xb - xa) * r) / denom
        ulim = xb + grow_limit * (xc - xb)
        if (xb - u) * (u - xc) > 0.0:
            fu = f(u)
            if fu < fc:
                return xb, u, xc, fb, fu, fc
            if fu > fb:
                return xa, xb, u, fa, fb, fu
            u = xc + _GOLD * (xc - xb)
            fu = f(u)
        elif (xc - u) * (u - ulim) > 0.0:
            fu = f(u)
            if fu < fc:
                xb, xc = xc, u
                fb, fc = fc, fu
                u = xc + _GOLD * (xc - xb)
                fu = f(u)
        elif (u - ulim) * (ulim - xc) >= 0.0:
            u = ulim
            fu = f(u)
        else:
            u = xc + _GOLD * (xc - xb)
            fu = f(u)
        xa, xb, xc = xb, xc, u
        fa, fb, fc = fb, fc, fu
    return xa, xb, xc, fa, fb, fc


def _brent(f: Callable[[float], float], xa: float, xb: float, xc: float,
           fb: float | None = None, tol: float = 1e-10, max_iter: int = 120):
    """Minimum of f inside the bracket, parabolic steps with golden fallback."""
    a, b = (xa, xc) if xa < xc else (xc, xa)
    x = w = v = xb
    fx = fw = fv = f(xb) if fb is None else fb
    d = e = 0.0
    for _ in range(max_iter):
        xm = 0.5 * (a + b)
        tol1 = tol * abs(x) + 1e-12
        tol2 = 2.0 * tol1
        if abs(x - xm) <= tol2 - 0.5 * (b - a):
            break
        if abs(e) > tol1:
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            etemp = e
            e = d
            if abs(p) >= abs(0.5 * q * etemp) or p <= q * (a - x) or p >= q * (b - x):
                e = (a - x) if x >= xm else (b - x)
                d = _CGOLD * e
            else:
                d = p / q
                u = x + d
                if u - a < tol2 or b - u < tol2:
                    d = math.copysign(tol1, xm - x)
        else:
            e = (a - x) if x >= xm else (b - x)
            d = _CGOLD * e
        u = x + d if abs(d) >= tol1 else x + math.copysign(tol1, d)
        fu = f(u)
        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
    return x, fx


def _line_minimize(f: Callable[[float], float], tol: float):
    """1D minimum of f(step); returns step 0 when no strict improvement exists."""
    f0 = f(0.0)
    xa, xb, xc, _, fb, _ = _bracket(f, 0.0, 1.0)
    x, fx = _brent(f, xa, xb, xc, fb=fb, tol=tol)
    if fx >= f0:
        return 0.0, f0
    return x, fx


@dataclass(frozen=True)
class PowellResult:
    argmin: np.ndarray
    value: float
    converged: bool
    cycles: int


def powell_minimize(
    objective: Callable[[np.ndarray], float],
    start,
    tol: float = 1e-8,
    max_iter: int = 200,
    line_tol: float = 1e-10,
) -> PowellResult:
    """Derivative-free minimization by cycles of line searches.

    The direction set begins as the coordinate axes. After each cycle the
    direction of largest single-search decrease may be replaced by the net
    cycle displacement, following the standard replacement test, which keeps
    the set from collapsing into a degenerate subspace.
    """
    if tol <= 0:
        raise DomainError(f"tolerance must be positive, got {tol}")
    x = np.asarray(start, dtype=np.float64).reshape(-1).copy()
    n = x.size

    def checked(v: np.ndarray) -> float:
        val = float(objective(v))
        if not math.isfinite(val):
            raise NumericalError("objective returned a non-finite value")
        return val

    fx = checked(x)
    dirs = np.eye(n)
    converged = False
    cycles = 0
    for cycles in range(1, max_iter + 1):
        f_start = fx
        x_start = x.copy()
        biggest_drop = 0.0
        biggest_idx = 0
        for i in range(n):
            direction = dirs[i]
            before = fx
            step, fx = _line_minimize(
                lambda s, d=direction: checked(x + s * d), line_tol
            )
            x = x + step * direction
            if before - fx > biggest_drop:
                biggest_drop = before - fx
                biggest_idx = i
        if f_start - fx < tol:
            converged = True
            break
        new_dir = x - x_start
        extrapolated = x + new_dir
        f_extrap = checked(extrapolated)
        if f_extrap < f_start:
            t = (
                2.0 * (f_start - 2.0 * fx + f_extrap)
                * (f_start - fx - biggest_drop) ** 2
                - biggest_drop * (f_start - f_extrap) ** 2
            )
            if t < 0.0 and float(np.dot(new_dir, new_dir)) > _TINY:
                step, fx = _line_minimize(
                    lambda s, d=new_dir: checked(x + s * d), line_tol
                )
                x = x + step * new_dir
                dirs[biggest_idx] = dirs[n - 1]
                dirs[n - 1] = new_dir
    return PowellResult(argmin=x, value=fx, converged=converged, cycles=cycles)


# ---------------------------------------------------------------------------
# Schedule search.


def _theta_to_points(theta: np.ndarray) -> np.ndarray:
    """Map k unconstrained reals to k strictly increasing points starting at 0.

    Shifted-exponential increments: the clip floor keeps every increment large
    enough that the cumulative sum stays strictly increasing in float64.
    """
    z = np.clip(theta - np.max(theta), -20.0, 0.0)
    w = np.exp(z)
    increments = w / np.sum(w)
    points = np.concatenate(([0.0], np.cumsum(increments[:-1])))
    return points


def unconstrained_to_schedule(theta) -> AlphaSchedule:
    theta = np.asarray(theta, dtype=np.float64).reshape(-1)
    if theta.size < 1:
        raise ShapeError("need at least one parameter")
    if not np.all(np.isfinite(theta)):
        raise DomainError("parameters must be finite")
    return AlphaSchedule(_theta_to_points(theta))


@dataclass(frozen=True)
class OptimizedSchedule:
    schedule: AlphaSchedule
    bound: float
    converged: bool


def _points_to_theta(points: np.ndarray) -> np.ndarray:
    increments = np.append(np.diff(points), 1.0 - points[-1])
    return np.log(increments)


def optimize_schedule(
    profile: DerivativeProfile,
    k: int,
    tol: float = 1e-8,
    max_iter: int = 200,
) -> OptimizedSchedule:
    """Schedule minimizing the error surrogate via Powell's method.

    The surrogate charges each interval at its left endpoint, so dips in the
    profile open narrow valleys that a single search from uniform can miss.
    Powell therefore runs twice, from the uniform schedule and from a coarse
    grid-search placement, and the better result wins (uniform-start result
    on ties, so a flat profile still returns the uniform schedule).
    """
    if k < 1:
        raise DomainError(f"need k >= 1, got {k}")
    uniform = AlphaSchedule.uniform(k)
    uniform_bound = error_bound(profile, uniform)
    if k == 1:
        return OptimizedSchedule(schedule=uniform, bound=uniform_bound, converged=True)

    knots = profile.knots
    mags = profile.magnitudes

    def objective(theta: np.ndarray) -> float:
        points = _theta_to_points(theta)
        edges = np.append(points, 1.0)
        deltas = np.diff(edges)
        weights = np.interp(points, knots, mags)
        return 0.5 * float(np.dot(weights, deltas * deltas))

    starts = [np.zeros(k)]
    coarse_grid = min(512, max(64, 2 * k))
    if k <= coarse_grid:
        warm = grid_search_schedule(profile, k, coarse_grid)
        starts.append(_points_to_theta(warm.points))

    best: OptimizedSchedule | None = None
    for start in starts:
        result = powell_minimize(objective, start, tol=tol, max_iter=max_iter)
        schedule = unconstrained_to_schedule(result.argmin)
        bound = error_bound(profile, schedule)
        if best is None or bound < best.bound:
            best = OptimizedSchedule(schedule=schedule, bound=bound,
                                     converged=result.converged)
    # one start is uniform itself, so the result can never legitimately be worse
    if best.bound > uniform_bound:
        return OptimizedSchedule(schedule=uniform, bound=uniform_bound,
                                 converged=best.converged)
    return best


def grid_search_schedule(profile: DerivativeProfile, k: int, grid: int) -> AlphaSchedule:
    """Exact minimizer over schedules restricted to the uniform grid {j/grid}.

    Backward dynamic program over (point index, grid position); ties break
    toward the smaller grid position. Quadratic in grid size, so capped.
    """
    if grid > 512:
        raise DomainError(f"grid capped at 512, got {grid}")
    if k > grid:
        raise DomainError(f"need k <= grid, got k={k}, grid={grid}")
    if k < 1:
        raise DomainError(f"need k >= 1, got {k}")
    positions = np.arange(grid, dtype=np.float64) / grid
    half_p = 0.5 * profile(positions)

    # best[i] = minimal cost of covering [i/grid, 1] when point r sits at i
    best = half_p * ((grid - np.arange(grid)) / grid) ** 2
    choice = np.full((k, grid), -1, dtype=np.int64)
    for r in range(k - 2, -1, -1):
        new_best = np.full(grid, np.inf)
        remaining = k - 1 - r  # points still to place after this one
        for i in range(grid - remaining):
            js = np.arange(i + 1, grid - remaining + 1)
            costs = half_p[i] * ((js - i) / grid) ** 2 + best[js]
            pick = int(np.argmin(costs))
            new_best[i] = costs[pick]
            choice[r, i] = js[pick]
        best = new_best

    idx = np.empty(k, dtype=np.int64)
    idx[0] = 0
    for r in range(k - 1):
        idx[r + 1] = choice[r, idx[r]]
    return AlphaSchedule(positions[idx])
