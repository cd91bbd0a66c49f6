"""Learning-curve evaluation and piecewise-linear approximation.

Two approximation flavors are provided:

* ``band``: ``|f - g| / f <= eps`` for every ``t > 0``, built by the
  tangent / bridge / geometric-chord construction.
* ``upper``: ``f <= g <= f / (1 - eps)``. Concave curves get an envelope of
  tangent lines (a single concave block); anything else falls back to a
  rescaled band approximation clipped at 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple, Union

import numpy as np

from .core import CurveSpec

SLOPE_TOL = 1e-9
_VALUE_TOL = 1e-9


class CurveError(ValueError):
    pass


@dataclass(frozen=True)
class Segment:
    slope: float
    intercept: float
    start: float
    end: float  # math.inf for an unbounded final segment

    def __call__(self, t):
        return self.slope * t + self.intercept


@dataclass(frozen=True)
class PWLCurve:
    """Continuous, non-decreasing piecewise-linear curve through ``(0, 0)``.

    Beyond the last breakpoint the curve either continues the last segment
    (``final_segment_unbounded``) or holds its last value. Every curve this
    module produces ends in a flat unbounded segment.
    """

    breakpoints: Tuple[Tuple[float, float], ...]
    final_segment_unbounded: bool = True

    def __post_init__(self):
        bps = tuple((float(t), float(v)) for t, v in self.breakpoints)
        if len(bps) < 2:
            raise CurveError("a PWL curve needs at least two breakpoints")
        if bps[0] != (0.0, 0.0):
            raise CurveError("a PWL curve must start at (0, 0)")
        for (t0, v0), (t1, v1) in zip(bps, bps[1:]):
            if not t1 > t0:
                raise CurveError("breakpoint abscissae must be strictly increasing")
            if v1 < v0 - _VALUE_TOL:
                raise CurveError("PWL curve must be non-decreasing")
        if any(v < -_VALUE_TOL or v > 1 + _VALUE_TOL for _, v in bps):
            raise CurveError("PWL values must lie in [0, 1]")
        if self.final_segment_unbounded:
            (t0, v0), (t1, v1) = bps[-2], bps[-1]
            if v1 - v0 > _VALUE_TOL:
                raise CurveError("an unbounded final segment must be flat")
        object.__setattr__(self, "breakpoints", bps)

    @property
    def segments(self) -> List[Segment]:
        out = []
        bps = self.breakpoints
        for k, ((t0, v0), (t1, v1)) in enumerate(zip(bps, bps[1:])):
            a = (v1 - v0) / (t1 - t0)
            end = math.inf if (self.final_segment_unbounded and k == len(bps) - 2) else t1
            out.append(Segment(a, v0 - a * t0, t0, end))
        return out

    @property
    def slopes(self) -> List[float]:
        return [s.slope for s in self.segments]

    @property
    def max_value(self) -> float:
        return self.breakpoints[-1][1]

    @property
    def saturation_time(self) -> float:
        """Earliest time at which the curve reaches its final value."""
        bps = self.breakpoints
        vmax = bps[-1][1]
        for t, v in bps:
            if v >= vmax - 1e-15:
                return t
        return bps[-1][0]

    def __call__(self, t):
        ts = np.array([b[0] for b in self.breakpoints])
        vs = np.array([b[1] for b in self.breakpoints])
        return np.interp(t, ts, vs)

    def right_slope(self, t: float) -> float:
        for seg in self.segments:
            if seg.start <= t < seg.end:
                return seg.slope
        return 0.0


@dataclass(frozen=True)
class Block:
    """A maximal run of segments with strictly decreasing slopes."""

    start: float
    end: float
    segments: Tuple[Segment, ...]


@dataclass(frozen=True)
class ConcaveBlocks:
    blocks: Tuple[Block, ...]

    def __len__(self):
        return len(self.blocks)

    def __iter__(self):
        return iter(self.blocks)

    def flat_segments(self) -> List[Segment]:
        return [s for b in self.blocks for s in b.segments]


CurveLike = Union[CurveSpec, PWLCurve]


# ---------------------------------------------------------------------------
# evaluation


def eval_curve(spec: CurveLike, t: float) -> float:
    if t < 0:
        raise CurveError(f"negative time {t}")
    return float(_evaluate(spec, np.asarray(t, dtype=float)))


def _evaluate(spec: CurveLike, t: np.ndarray) -> np.ndarray:
    if isinstance(spec, PWLCurve):
        return spec(t)
    if spec.kind == "linear":
        return np.minimum(spec.rate * t, 1.0)
    if spec.kind == "exponential":
        return -np.expm1(-spec.rate * t)
    if spec.kind == "pwl":
        return spec.pwl(t)
    ts = np.array([p[0] for p in spec.points])
    vs = np.array([p[1] for p in spec.points])
    return np.interp(t, ts, vs)


def _derivative(spec: CurveLike, t: float) -> float:
    """Right derivative; one-sided finite differences for sampled curves."""
    if isinstance(spec, PWLCurve):
        return spec.right_slope(t)
    if spec.kind == "linear":
        return spec.rate if t < 1.0 / spec.rate else 0.0
    if spec.kind == "exponential":
        return spec.rate * math.exp(-spec.rate * t)
    if spec.kind == "pwl":
        return spec.pwl.right_slope(t)
    pts = spec.points
    for (t0, v0), (t1, v1) in zip(pts, pts[1:]):
        if t0 <= t < t1:
            return (v1 - v0) / (t1 - t0)
    return 0.0


def _sup(spec: CurveLike) -> Tuple[float, float]:
    """(supremum value, time it is first attained or inf if asymptotic)."""
    if isinstance(spec, PWLCurve):
        return spec.max_value, spec.saturation_time
    if spec.kind == "linear":
        return 1.0, 1.0 / spec.rate
    if spec.kind == "exponential":
        return 1.0, math.inf
    if spec.kind == "pwl":
        return spec.pwl.max_value, spec.pwl.saturation_time
    vs = [v for _, v in spec.points]
    vmax = max(vs)
    idx = vs.index(vmax)
    return vmax, spec.points[idx][0]


def time_scale(spec: CurveLike) -> float:
    """Characteristic time ``1 / f'(0)`` used to size validation grids."""
    d0 = _derivative(spec, 0.0)
    if d0 > 0:
        return 1.0 / d0
    vmax, tsat = _sup(spec)
    return tsat if math.isfinite(tsat) and tsat > 0 else 1.0


def is_nondecreasing(spec: CurveLike) -> bool:
    if isinstance(spec, PWLCurve):
        return True
    if spec.kind in ("linear", "exponential", "pwl"):
        return True
    vs = [v for _, v in spec.points]
    return all(b >= a for a, b in zip(vs, vs[1:]))


def is_concave(spec: CurveLike) -> bool:
    if isinstance(spec, PWLCurve):
        slopes = spec.slopes
    elif spec.kind in ("linear", "exponential"):
        return True
    elif spec.kind == "pwl":
        slopes = spec.pwl.slopes
    else:
        pts = spec.points
        slopes = [(v1 - v0) / (t1 - t0) for (t0, v0), (t1, v1) in zip(pts, pts[1:])]
        slopes.append(0.0)
    return all(b <= a + SLOPE_TOL for a, b in zip(slopes, slopes[1:]))


# ---------------------------------------------------------------------------
# monotonization


def monotonize(spec: CurveSpec) -> CurveSpec:
    """Running maximum of a sampled curve, taken over its sample values."""
    if spec.kind != "sampled":
        if is_nondecreasing(spec):
            return spec
        raise CurveError("only sampled curves can be monotonized")
    ts = [t for t, _ in spec.points]
    vs = np.maximum.accumulate([v for _, v in spec.points])
    return CurveSpec.sampled(list(zip(ts, vs.tolist())))


# ---------------------------------------------------------------------------
# approximation


def _first_time_reaching(spec: CurveLike, value: float, hi: float) -> float:
    """Smallest t with f(t) >= value (f non-decreasing), to machine precision."""
    lo = 0.0
    if float(_evaluate(spec, np.asarray(hi))) < value:
        raise CurveError("value not reached within search horizon")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if float(_evaluate(spec, np.asarray(mid))) >= value:
            hi = mid
        else:
            lo = mid
    return hi


def _horizon(spec: CurveLike, value: float) -> float:
    vmax, tsat = _sup(spec)
    if math.isfinite(tsat):
        return max(tsat, 1e-12)
    h = time_scale(spec)
    while float(_evaluate(spec, np.asarray(h))) < value:
        h *= 2.0
        if h > 1e12:
            raise CurveError("curve does not reach the requested value")
    return h


def _tangent_end(spec: CurveLike, tol: float) -> float:
    """Largest t such that the slope stays within ``tol * f'(0)`` of f'(0) on [0, t]."""
    d0 = _derivative(spec, 0.0)
    ok = lambda s: abs(_derivative(spec, s) - d0) <= tol * d0
    if isinstance(spec, CurveSpec) and spec.kind == "sampled":
        pts = spec.points
        end = pts[1][0]
        for (t0, v0), (t1, v1) in zip(pts[1:], pts[2:]):
            if ok(t0):
                end = t1
            else:
                break
        return end
    _, tsat = _sup(spec)
    hi = tsat if math.isfinite(tsat) else time_scale(spec)
    while ok(hi) and not math.isfinite(tsat):
        hi *= 2.0
    if ok(hi):
        return hi
    lo = 0.0
    for _ in range(100):
        mid = 0.5 * (lo + hi)
        if ok(mid):
            lo = mid
        else:
            hi = mid
    return lo


def _normalize(points: List[Tuple[float, float]]) -> PWLCurve:
    """Drop zero-length pieces and merge collinear neighbours, then add a flat tail."""
    pts: List[Tuple[float, float]] = []
    for t, v in points:
        if pts and t <= pts[-1][0] + 1e-15:
            pts[-1] = (pts[-1][0], max(pts[-1][1], v))
            continue
        pts.append((t, v))
    merged = [pts[0]]
    for p in pts[1:]:
        if len(merged) >= 2:
            (t0, v0), (t1, v1) = merged[-2], merged[-1]
            a = (v1 - v0) / (t1 - t0)
            b = (p[1] - v1) / (p[0] - t1)
            if abs(a - b) <= 1e-12 * max(1.0, abs(a)):
                merged[-1] = p
                continue
        merged.append(p)
    t_end, v_end = merged[-1]
    if len(merged) >= 2:
        (t0, v0) = merged[-2]
        if abs(v_end - v0) <= 1e-15:
            # already ends flat
            return PWLCurve(tuple(merged), final_segment_unbounded=True)
    merged.append((2.0 * t_end + 1.0, v_end))
    return PWLCurve(tuple(merged), final_segment_unbounded=True)


def _band(spec: CurveLike, eps: float) -> PWLCurve:
    d0 = _derivative(spec, 0.0)
    if not d0 > 0:
        raise CurveError("band approximation needs f'(0) > 0")
    if abs(float(_evaluate(spec, np.asarray(0.0)))) > 1e-12:
        raise CurveError("band approximation needs f(0) = 0")
    vmax, tsat = _sup(spec)
    inner = eps / (2.0 + eps)
    tau1 = _tangent_end(spec, inner)
    f1 = float(_evaluate(spec, np.asarray(tau1)))
    h = d0 * tau1
    pts = [(0.0, 0.0)]
    if h >= f1 and h < vmax:
        # tangent, then a horizontal bridge back to the curve
        pts.append((tau1, h))
        tau2 = _first_time_reaching(spec, h, _horizon(spec, h))
        pts.append((tau2, h))
        v = h
    else:
        # secant in place of the vertical bridge (or the tangent already saturates)
        pts.append((tau1, f1))
        tau2, v = tau1, f1
    asymptotic = not math.isfinite(tsat)
    step = 1.0 + eps * (1.0 - 1e-6)
    last = vmax / step if asymptotic else vmax
    t = tau2
    while v < last - 1e-15:
        target = min(step * v, last)
        t = _first_time_reaching(spec, target, _horizon(spec, target))
        v = target
        pts.append((t, v))
    if asymptotic:
        pts[-1] = (pts[-1][0], vmax)
    return _normalize(pts)


def _tangent_envelope(spec: CurveLike, eps: float) -> PWLCurve:
    """Minimum of tangent lines capped at the curve's supremum (concave curves)."""
    rho = 1.0 / (1.0 - eps)
    vmax, _ = _sup(spec)
    f = lambda s: float(_evaluate(spec, np.asarray(s)))
    line = lambda p: (_derivative(spec, p), f(p) - _derivative(spec, p) * p)

    p = 0.0
    a, b = line(p)
    pts = [(0.0, 0.0)]
    for _ in range(10_000):
        if a <= 0:
            break
        x_cap = (vmax - b) / a
        if vmax <= rho * f(x_cap) + 1e-15:
            pts.append((x_cap, vmax))
            return _normalize(pts)

        def intersect_ok(q):
            a2, b2 = line(q)
            if a - a2 <= 1e-15:
                return True, None
            x = (b2 - b) / (a - a2)
            return (a * x + b) <= rho * f(x) + 1e-15, x

        lo, hi = p, max(x_cap, p + time_scale(spec))
        while intersect_ok(hi)[0] and f(hi) < vmax * (1 - 1e-15) and hi < 1e12:
            lo, hi = hi, 2 * hi
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            if intersect_ok(mid)[0]:
                lo = mid
            else:
                hi = mid
        q = lo
        ok, x = intersect_ok(q)
        if x is None or q <= p:
            break
        a, b = line(q)
        pts.append((x, a * x + b))
        p = q
    raise CurveError("tangent envelope did not converge")


def approximate(
    spec: CurveLike, eps: float, flavor: str = "band", method: str = "construct"
) -> PWLCurve:
    """Piecewise-linear approximation of ``spec`` with relative accuracy ``eps``.

    ``method="construct"`` builds the band curve from a tangent segment at
    the origin, a bridge back to the curve and chords whose end values grow
    geometrically by ``1 + eps``. The segment count is bounded but can be
    large (about 90 pieces for an exponential at ``eps = 0.05``).
    ``method="greedy"`` instead extends each chord as far as the error bound
    allows; on concave curves the result is concave and has a handful of
    pieces. Both satisfy the same error bound.

    Linear and PWL inputs are returned exactly. Sampled inputs must be
    non-decreasing already (see :func:`monotonize`).
    """
    if not 0.0 < eps < 1.0:
        raise CurveError(f"eps must lie in (0, 1), got {eps}")
    if flavor not in ("band", "upper"):
        raise CurveError(f"unknown flavor {flavor!r}")
    if method not in ("construct", "greedy"):
        raise CurveError(f"unknown method {method!r}")
    if isinstance(spec, PWLCurve):
        return spec
    if spec.kind == "linear":
        t1 = 1.0 / spec.rate
        return PWLCurve(((0.0, 0.0), (t1, 1.0), (2.0 * t1, 1.0)))
    if spec.kind == "pwl":
        return spec.pwl
    if not is_nondecreasing(spec):
        raise CurveError("curve is not monotone; monotonize it first")
    if spec.kind == "sampled" and spec.points[0][1] == 0.0:
        # already piecewise linear: keep it, dropping repeated plateau points
        pts = [spec.points[0]]
        for p in spec.points[1:]:
            if len(pts) >= 2 and pts[-1][1] == pts[-2][1] == p[1]:
                pts[-1] = p
            else:
                pts.append(p)
        pts.append((2.0 * pts[-1][0] + 1.0, pts[-1][1]))
        return PWLCurve(tuple(pts))

    grid = validation_grid(spec, 10_000)
    inner = eps
    for _ in range(30):
        if flavor == "band":
            g = _band(spec, inner) if method == "construct" else _greedy_band(spec, inner, grid)
            err = _band_error(spec, g, grid)
            if err <= eps:
                return g
        else:
            if is_concave(spec):
                g = _tangent_envelope(spec, inner)
            else:
                eta = inner / (2.0 - inner)
                g = _scaled_band(spec, eta, method, grid)
            lo, hi = _upper_error(spec, g, grid)
            if lo <= 1e-12 and hi <= 1.0 / (1.0 - eps) + 1e-12:
                return g
        inner *= 0.9
    raise CurveError("could not meet the requested accuracy")


def _greedy_band(spec: CurveLike, eps: float, grid: np.ndarray) -> PWLCurve:
    """Longest admissible chords between points of ``(1 + 0.95 eps) f`` capped at sup f."""
    vmax, tsat = _sup(spec)
    lift = 1.0 + 0.95 * eps
    level = vmax / (1.0 + 0.99 * eps)
    t_flat = _first_time_reaching(spec, level, _horizon(spec, level))
    if math.isfinite(tsat):
        t_flat = min(t_flat, tsat)
    f = lambda s: _evaluate(spec, np.asarray(s, dtype=float))

    def point(t):
        return (t, vmax) if t >= t_flat else (t, min(lift * float(f(t)), vmax))

    def chord_ok(p0, t1):
        p1 = point(t1)
        local = grid[(grid > p0[0]) & (grid < t1)]
        ts = np.concatenate([np.linspace(p0[0], t1, 257)[1:], local])
        fv = f(ts)
        keep = fv >= 1e-12
        ts, fv = ts[keep], fv[keep]
        if ts.size == 0:
            return True
        g = p0[1] + (p1[1] - p0[1]) * (ts - p0[0]) / (t1 - p0[0])
        return bool(np.all(np.abs(g - fv) <= 0.998 * eps * fv))

    pts = [(0.0, 0.0)]
    while pts[-1][0] < t_flat:
        p0 = pts[-1]
        if chord_ok(p0, t_flat):
            pts.append(point(t_flat))
            break
        lo, hi = p0[0], t_flat
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            if chord_ok(p0, mid):
                lo = mid
            else:
                hi = mid
        if lo <= p0[0]:
            raise CurveError("greedy chord search stalled")
        pts.append(point(lo))
        if len(pts) > 10_000:
            raise CurveError("greedy approximation did not terminate")
    return _normalize(pts)


def _scaled_band(spec: CurveLike, eta: float, method: str, grid: np.ndarray) -> PWLCurve:
    g = _band(spec, eta) if method == "construct" else _greedy_band(spec, eta, grid)
    vmax, _ = _sup(spec)
    pts: List[Tuple[float, float]] = []
    bps = g.breakpoints
    scale = 1.0 / (1.0 - eta)
    for (t0, v0), (t1, v1) in zip(bps, bps[1:]):
        s0, s1 = v0 * scale, v1 * scale
        if not pts:
            pts.append((t0, min(s0, vmax)))
        if s0 < vmax < s1:
            tc = t0 + (vmax - s0) / (s1 - s0) * (t1 - t0)
            pts.append((tc, vmax))
        pts.append((t1, min(s1, vmax)))
    return _normalize(pts)


# ---------------------------------------------------------------------------
# validation


def validation_grid(spec: CurveLike, grid_points: int) -> np.ndarray:
    """Log-spaced plus uniform grid over [1e-4, 30] characteristic times."""
    scale = time_scale(spec)
    half = grid_points // 2
    g = np.concatenate(
        [
            np.logspace(math.log10(1e-4 * scale), math.log10(30 * scale), half),
            np.linspace(1e-4 * scale, 30 * scale, grid_points - half),
        ]
    )
    return np.unique(g)


def _band_error(spec: CurveLike, pwl: PWLCurve, grid: np.ndarray) -> float:
    pts = np.array([t for t, _ in pwl.breakpoints if t > 0])
    g = np.unique(np.concatenate([grid, pts]))
    f = _evaluate(spec, g)
    keep = f >= 1e-12
    return float(np.max(np.abs(f[keep] - pwl(g[keep])) / f[keep])) if keep.any() else 0.0


def _upper_error(spec: CurveLike, pwl: PWLCurve, grid: np.ndarray) -> Tuple[float, float]:
    """(max shortfall f - g, max ratio g / f) over the grid."""
    pts = np.array([t for t, _ in pwl.breakpoints if t > 0])
    g = np.unique(np.concatenate([grid, pts]))
    f = _evaluate(spec, g)
    approx = pwl(g)
    keep = f >= 1e-12
    shortfall = float(np.max(f - approx))
    ratio = float(np.max(approx[keep] / f[keep])) if keep.any() else 1.0
    return shortfall, ratio


def validate_pwl_error(spec: CurveLike, pwl: PWLCurve, grid_points: int = 10_000) -> float:
    """Maximum relative error ``|f - g| / f`` on a dense grid (skips f < 1e-12)."""
    if grid_points < 100:
        raise CurveError("grid_points must be at least 100")
    return _band_error(spec, pwl, validation_grid(spec, grid_points))


# ---------------------------------------------------------------------------
# block decomposition


def concave_blocks(pwl: PWLCurve) -> ConcaveBlocks:
    blocks: List[List[Segment]] = []
    for seg in pwl.segments:
        if blocks and seg.slope < blocks[-1][-1].slope - SLOPE_TOL:
            blocks[-1].append(seg)
        else:
            blocks.append([seg])
    return ConcaveBlocks(tuple(Block(b[0].start, b[-1].end, tuple(b)) for b in blocks))


def block_decomposition_from_slopes(slopes: Sequence[float]) -> List[List[float]]:
    """Group a slope sequence the way :func:`concave_blocks` groups segments."""
    out: List[List[float]] = []
    for s in slopes:
        if out and s < out[-1][-1] - SLOPE_TOL:
            out[-1].append(s)
        else:
            out.append([s])
    return out


# ---------------------------------------------------------------------------
# numeric breakpoint search


def fit_breakpoints(spec: CurveLike, n_segments: int, seed: int = 0, maxiter: int = 400):
    """Search for an ``n_segments`` PWL curve (last piece flat) minimizing the
    maximum relative error against ``spec``.

    Returns ``(PWLCurve, max_relative_error)``. The error is measured on the
    same grid as :func:`validate_pwl_error`.
    """
    from scipy.optimize import differential_evolution

    if n_segments < 2:
        raise CurveError("need at least two segments (one rising, one flat)")
    k = n_segments - 1
    grid = validation_grid(spec, 4000)
    f = _evaluate(spec, grid)
    keep = f >= 1e-12
    grid, f = grid[keep], f[keep]
    scale = time_scale(spec)
    vmax, _ = _sup(spec)

    def unpack(p):
        ts = np.concatenate([[0.0], np.cumsum(p[:k])])
        vs = np.concatenate([[0.0], np.minimum(np.cumsum(p[k:]), vmax)])
        return ts, vs

    def objective(p):
        ts, vs = unpack(p)
        return float(np.max(np.abs(np.interp(grid, ts, vs) - f) / f))

    bounds = [(1e-3 * scale, 6.0 * scale)] * k + [(0.0, vmax)] * k
    res = differential_evolution(
        objective, bounds, seed=seed, maxiter=maxiter, tol=1e-10, polish=True
    )
    ts, vs = unpack(res.x)
    pts = [(float(t), float(v)) for t, v in zip(ts, vs)]
    pts = [pts[0]] + [p for a, p in zip(pts, pts[1:]) if p[0] > a[0]]
    for idx in range(1, len(pts)):
        pts[idx] = (pts[idx][0], max(pts[idx][1], pts[idx - 1][1]))
    pts.append((pts[-1][0] * 2 + 1.0, pts[-1][1]))
    curve = PWLCurve(tuple(pts), final_segment_unbounded=True)
    return curve, validate_pwl_error(spec, curve, 10_000)


def as_spec(curve: CurveLike) -> CurveSpec:
    return curve if isinstance(curve, CurveSpec) else CurveSpec.from_pwl(curve)


__all__ = [
    "PWLCurve",
    "Segment",
    "Block",
    "ConcaveBlocks",
    "CurveError",
    "eval_curve",
    "monotonize",
    "approximate",
    "concave_blocks",
    "validate_pwl_error",
    "validation_grid",
    "fit_breakpoints",
    "is_concave",
    "is_nondecreasing",
    "time_scale",
]
