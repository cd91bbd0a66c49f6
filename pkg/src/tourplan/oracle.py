"""Brute-force reference solutions for small instances.

Tours are enumerated depth-first over shortest-path distances; for every set
of visited POIs only the shortest closing sequence matters, and stay times
for that set are allocated exactly (concave curves) or on a time grid.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .core import CurveSpec, Instance, Itinerary, eval_total_reward, eval_total_time
from .curves import CurveError, CurveLike, PWLCurve, SLOPE_TOL, eval_curve
from .graph import ClosedGraph, reconstruct_path, transitive_closure

MAX_ORACLE_N = 10


class OracleError(ValueError):
    pass


class OracleInfeasible(OracleError):
    """No tour satisfies the problem."""


@dataclass(frozen=True)
class OracleResult:
    value: float  # total reward (rmt) or total time (bmt)
    itinerary: Optional[Itinerary]
    sequences: int  # closed sequences examined
    durations: Tuple[float, ...] = ()  # stay time per POI id - 1


# ---------------------------------------------------------------------------
# curve pieces


def _breakpoints(curve: CurveLike) -> Optional[Tuple[Tuple[float, float], ...]]:
    """Breakpoints of a piecewise-linear curve, or None for a smooth one."""
    if isinstance(curve, PWLCurve):
        return curve.breakpoints
    if curve.kind == "linear":
        return ((0.0, 0.0), (1.0 / curve.rate, 1.0))
    if curve.kind == "pwl":
        return curve.pwl.breakpoints
    if curve.kind == "sampled":
        return curve.points
    return None


def _pieces(curve: CurveLike, reward: float) -> Optional[List[Tuple[float, float]]]:
    """(reward rate, duration) of each rising piece, or None for a smooth curve."""
    bps = _breakpoints(curve)
    if bps is None:
        return None
    out = []
    for (t0, v0), (t1, v1) in zip(bps, bps[1:]):
        slope = (v1 - v0) / (t1 - t0)
        if slope > 0 and reward > 0:
            out.append((reward * slope, t1 - t0))
    slopes = [(v1 - v0) / (t1 - t0) for (t0, v0), (t1, v1) in zip(bps, bps[1:])]
    if any(b > a + SLOPE_TOL for a, b in zip(slopes, slopes[1:])):
        raise CurveError("curve is not concave; use oracle_allocate_dp")
    return out


def _saturation(curve: CurveLike) -> float:
    bps = _breakpoints(curve)
    if bps is None:
        return math.inf
    vmax = max(v for _, v in bps)
    return next(t for t, v in bps if v >= vmax - 1e-15)


def _check_concave(curve: CurveLike) -> None:
    if isinstance(curve, CurveSpec) and curve.kind == "exponential":
        return
    _pieces(curve, 1.0)


def _exp_time(rate: float, reward: float, level: float) -> float:
    """Stay time after which r * f'(t) of an exponential curve drops to ``level``."""
    top = reward * rate
    if top <= level:
        return 0.0
    return math.log(top / level) / rate


# ---------------------------------------------------------------------------
# allocation


def oracle_allocate(sequence: Sequence[int], available_time: float, curves: Mapping[int, CurveLike],
                    rewards: Mapping[int, float]) -> Dict[int, float]:
    """Reward-maximizing stay times for the POIs in ``sequence`` within ``available_time``.

    Exact for concave curves. Piecewise-linear pieces are filled steepest
    first (ties go to the lower POI id); exponential curves are handled by
    equalizing marginal rates.
    """
    ids = sorted(set(sequence))
    out = {i: 0.0 for i in ids}
    if available_time <= 0 or not ids:
        return out
    for i in ids:
        _check_concave(curves[i])
    smooth = [i for i in ids if _pieces(curves[i], rewards[i]) is None]
    if not smooth:
        items = []
        for i in ids:
            for k, (rate, length) in enumerate(_pieces(curves[i], rewards[i])):
                items.append((-rate, i, k, length))
        items.sort()
        left = available_time
        for _, i, _, length in items:
            if left <= 0:
                break
            step = min(length, left)
            out[i] += step
            left -= step
        return out
    return _water_fill(ids, curves, rewards, time_budget=available_time)


def _time_at_level(curve: CurveLike, reward: float, level: float) -> float:
    pieces = _pieces(curve, reward)
    if pieces is None:
        return _exp_time(curve.rate, reward, level)
    return sum(length for rate, length in pieces if rate > level)


def _water_fill(ids, curves, rewards, time_budget=None, reward_target=None) -> Dict[int, float]:
    """Marginal-rate equalization for concave curves, by bisection on the common rate."""
    def times(level):
        return {i: _time_at_level(curves[i], rewards[i], level) for i in ids}

    def reward_of(ts):
        return sum(rewards[i] * eval_curve(curves[i], ts[i]) for i in ids)

    hi = max(rewards[i] * _initial_rate(curves[i]) for i in ids) + 1.0
    lo = 0.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        ts = times(mid)
        enough = sum(ts.values()) >= time_budget if time_budget is not None else reward_of(ts) >= reward_target
        if enough:
            lo = mid
        else:
            hi = mid
    ts = times(hi)
    # pieces whose rate sits exactly at the final level fill the remainder, lower id first
    for i in ids:
        pieces = _pieces(curves[i], rewards[i])
        if pieces is None:
            continue
        extra = sum(length for rate, length in pieces if lo < rate <= hi or abs(rate - hi) <= 1e-12 * hi)
        if extra <= 0:
            continue
        if time_budget is not None:
            room = time_budget - sum(ts.values())
            ts[i] += max(0.0, min(extra, room))
        else:
            need = reward_target - reward_of(ts)
            if need <= 0:
                break
            rate = max(rate for rate, _ in pieces if rate <= hi + 1e-12 * hi and rate > lo - 1e-12 * hi)
            ts[i] += min(extra, need / rate)
    if time_budget is not None:
        room = time_budget - sum(ts.values())
        if room > 0:
            for i in ids:
                if _pieces(curves[i], rewards[i]) is None:
                    ts[i] += room
                    break
    return ts


def _initial_rate(curve: CurveLike) -> float:
    pieces = _pieces(curve, 1.0)
    if pieces is None:
        return curve.rate
    return max((rate for rate, _ in pieces), default=0.0)


def oracle_min_stay(sequence: Sequence[int], target: float, curves: Mapping[int, CurveLike],
                    rewards: Mapping[int, float]) -> Optional[Dict[int, float]]:
    """Least total stay reaching ``target`` reward on concave curves; None if unreachable."""
    ids = sorted(set(sequence))
    out = {i: 0.0 for i in ids}
    if target <= 0:
        return out
    for i in ids:
        _check_concave(curves[i])
    total = sum(rewards[i] for i in ids)
    if total < target - 1e-12:
        return None
    smooth = [i for i in ids if _pieces(curves[i], rewards[i]) is None]
    if smooth:
        if total <= target + 1e-12:
            return None  # exponential curves only approach their maximum
        return _water_fill(ids, curves, rewards, reward_target=target)
    items = []
    for i in ids:
        for k, (rate, length) in enumerate(_pieces(curves[i], rewards[i])):
            items.append((-rate, i, k, length))
    items.sort()
    need = target
    for neg_rate, i, _, length in items:
        if need <= 1e-15:
            break
        rate = -neg_rate
        step = min(length, need / rate)
        out[i] += step
        need -= rate * step
    if need > 1e-9 * max(1.0, target):
        return None
    return out


def _dp_tables(ids, curves, rewards, grid_step, horizon):
    k_max = int(math.floor(horizon / grid_step + 1e-9))
    grid = np.arange(k_max + 1) * grid_step
    best = np.zeros(k_max + 1)
    choices = []
    for i in ids:
        gain = rewards[i] * np.array([eval_curve(curves[i], float(t)) for t in grid])
        sat = _saturation(curves[i])
        limit = k_max if not math.isfinite(sat) else min(k_max, int(math.ceil(sat / grid_step - 1e-9)))
        new = best.copy()
        pick = np.zeros(k_max + 1, dtype=np.int64)
        for k in range(1, limit + 1):
            cand = best[:-k] + gain[k] if k else best
            better = cand > new[k:] + 1e-15
            if better.any():
                new[k:][better] = cand[better]
                pick[k:][better] = k
        choices.append(pick)
        best = new
    return best, choices


def _dp_backtrack(ids, choices, k) -> Dict[int, int]:
    steps = {}
    for i, pick in zip(reversed(ids), reversed(choices)):
        steps[i] = int(pick[k])
        k -= steps[i]
    return steps


def oracle_allocate_dp(sequence: Sequence[int], available_time: float, curves: Mapping[int, CurveLike],
                       rewards: Mapping[int, float], grid_step: float = 1e-3) -> Dict[int, float]:
    """Best stay times restricted to multiples of ``grid_step``; works for any curve shape."""
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")
    ids = sorted(set(sequence))
    if available_time < grid_step or not ids:
        return {i: 0.0 for i in ids}
    best, choices = _dp_tables(ids, curves, rewards, grid_step, available_time)
    k = int(np.argmax(best))  # first maximum, i.e. the shortest total stay
    steps = _dp_backtrack(ids, choices, k)
    return {i: steps[i] * grid_step for i in ids}


def _min_stay_dp(ids, target, curves, rewards, grid_step):
    if target <= 0:
        return {i: 0.0 for i in ids}
    horizon = 0.0
    for i in ids:
        sat = _saturation(curves[i])
        if not math.isfinite(sat):
            raise CurveError("grid search needs curves that saturate")
        horizon += sat + grid_step
    best, choices = _dp_tables(ids, curves, rewards, grid_step, horizon)
    ok = np.flatnonzero(best >= target - 1e-9 * max(1.0, target))
    if len(ok) == 0:
        return None
    steps = _dp_backtrack(ids, choices, int(ok[0]))
    return {i: steps[i] * grid_step for i in ids}


# ---------------------------------------------------------------------------
# enumeration


def _all_concave(instance: Instance) -> bool:
    try:
        for p in instance.pois:
            _check_concave(p.curve)
    except CurveError:
        return False
    return True


def _enumerate(instance: Instance, closed: ClosedGraph, cyclic: bool, limit: Optional[float]):
    """Shortest closing sequence for every (start, end, visited set); prunes on travel beyond ``limit``."""
    n = instance.n
    bases = instance.bases
    best: Dict[Tuple[int, int, FrozenSet[int]], Tuple[float, Tuple[int, ...]]] = {}
    count = 0
    slack = 1e-9 * max(1.0, limit or 0.0)

    def close(start, path, travel, visited):
        nonlocal count
        last = path[-1]
        for e in ([start] if cyclic else bases):
            if len(path) == 1 and e == start:
                seq, total = (start,), 0.0
            elif e == last:
                seq, total = tuple(path), travel
            elif e in visited and e != start:
                continue
            elif closed.reachable(last, e):
                seq, total = tuple(path) + (e,), travel + closed.d(last, e)
            else:
                continue
            if limit is not None and total > limit + slack:
                continue
            count += 1
            key = (start, e, frozenset(visited) | {e})
            old = best.get(key)
            if old is None or total < old[0] - 1e-12:
                best[key] = (total, seq)

    def dfs(start, path, travel, visited):
        close(start, path, travel, visited)
        last = path[-1]
        for j in range(1, n + 1):
            if j in visited or not closed.reachable(last, j):
                continue
            step = travel + closed.d(last, j)
            if limit is not None:
                home = min((closed.d(j, e) for e in ([start] if cyclic else bases) if closed.reachable(j, e)),
                           default=math.inf)
                if step + home > limit + slack:
                    continue
            visited.add(j)
            path.append(j)
            dfs(start, path, step, visited)
            path.pop()
            visited.discard(j)

    for s in bases:
        dfs(s, [s], 0.0, {s})
    return best, count


def _itinerary(instance, closed, start, end, seq, durations) -> Itinerary:
    walk = [seq[0]]
    for a, b in zip(seq, seq[1:]):
        walk.extend(reconstruct_path(closed, a, b)[1:])
    bases = set(instance.bases)
    stays = []
    seen = set()
    stop = seq[:-1] if len(seq) > 1 and seq[-1] == start else seq
    for i in stop:
        if i in seen:
            continue
        seen.add(i)
        t = durations.get(i, 0.0)
        if i in bases and t <= 1e-12:
            continue
        stays.append((i, float(t)))
    draft = Itinerary(tuple(stays), tuple(walk), start, 0.0, 0.0, 0.0, end)
    total = eval_total_time(instance, draft)
    reward = eval_total_reward(instance, draft)
    return Itinerary(tuple(stays), tuple(walk), start, total, reward, reward, end)


def _guard(instance: Instance, max_n: int) -> None:
    if instance.n > max_n:
        raise OracleError(f"oracle enumeration is limited to n <= {max_n}, got {instance.n}")


def _pick_allocator(instance: Instance, allocator: str) -> str:
    if allocator not in ("auto", "greedy", "dp"):
        raise ValueError(f"unknown allocator {allocator!r}")
    if allocator == "auto":
        return "greedy" if _all_concave(instance) else "dp"
    return allocator


def oracle_rmt(instance: Instance, budget: Optional[float] = None, allocator: str = "auto",
               grid_step: float = 1e-3, cyclic: bool = True, max_n: int = MAX_ORACLE_N) -> OracleResult:
    """Largest total reward of any tour whose travel plus stays fit in ``budget``."""
    _guard(instance, max_n)
    if budget is None:
        if instance.problem.mode != "rmt":
            raise OracleError("instance carries no time budget")
        budget = instance.problem.budget
    if budget < 0:
        raise OracleError("budget must be >= 0")
    allocator = _pick_allocator(instance, allocator)
    closed = transitive_closure(instance)
    curves = {p.id: p.curve for p in instance.pois}
    rewards = {p.id: p.max_reward for p in instance.pois}
    table, count = _enumerate(instance, closed, cyclic, budget)
    best = None
    for (start, end, visited), (travel, seq) in sorted(table.items(), key=lambda kv: (kv[0][0], kv[0][1],
                                                                                      sorted(kv[0][2]))):
        left = max(0.0, budget - travel)
        if allocator == "greedy":
            dur = oracle_allocate(sorted(visited), left, curves, rewards)
        else:
            dur = oracle_allocate_dp(sorted(visited), left, curves, rewards, grid_step)
        value = sum(rewards[i] * eval_curve(curves[i], dur[i]) for i in visited)
        if best is None or value > best[0] + 1e-12:
            best = (value, start, end, seq, dur)
    if best is None:
        raise OracleInfeasible("no base can host a tour")
    value, start, end, seq, dur = best
    it = _itinerary(instance, closed, start, end, seq, dur)
    full = tuple(dur.get(i, 0.0) for i in range(1, instance.n + 1))
    return OracleResult(value, it, count, full)


def oracle_bmt(instance: Instance, requirement: Optional[float] = None, allocator: str = "auto",
               grid_step: float = 1e-3, cyclic: bool = True, max_n: int = MAX_ORACLE_N) -> OracleResult:
    """Shortest total time of any tour that collects at least ``requirement`` reward."""
    _guard(instance, max_n)
    if requirement is None:
        if instance.problem.mode != "bmt":
            raise OracleError("instance carries no reward requirement")
        requirement = instance.problem.requirement
    if requirement > sum(p.max_reward for p in instance.pois) + 1e-12:
        raise OracleInfeasible("requirement exceeds the total available reward")
    allocator = _pick_allocator(instance, allocator)
    closed = transitive_closure(instance)
    curves = {p.id: p.curve for p in instance.pois}
    rewards = {p.id: p.max_reward for p in instance.pois}
    table, count = _enumerate(instance, closed, cyclic, None)
    cache: Dict[FrozenSet[int], Optional[Dict[int, float]]] = {}
    best = None
    for (start, end, visited), (travel, seq) in sorted(table.items(), key=lambda kv: (kv[1][0], kv[0][0], kv[0][1],
                                                                                      sorted(kv[0][2]))):
        if best is not None and travel >= best[0]:
            continue
        if visited not in cache:
            if allocator == "greedy":
                cache[visited] = oracle_min_stay(sorted(visited), requirement, curves, rewards)
            else:
                cache[visited] = _min_stay_dp(sorted(visited), requirement, curves, rewards, grid_step)
        dur = cache[visited]
        if dur is None:
            continue
        value = travel + sum(dur.values())
        if best is None or value < best[0] - 1e-12:
            best = (value, start, end, seq, dur)
    if best is None:
        raise OracleInfeasible("requirement cannot be met by any tour")
    value, start, end, seq, dur = best
    it = _itinerary(instance, closed, start, end, seq, dur)
    full = tuple(dur.get(i, 0.0) for i in range(1, instance.n + 1))
    return OracleResult(value, it, count, full)


def allocate_for(instance: Instance, sequence: Sequence[int], available_time: float) -> Dict[int, float]:
    """:func:`oracle_allocate` with curves and rewards taken from ``instance``."""
    curves = {p.id: p.curve for p in instance.pois}
    rewards = {p.id: p.max_reward for p in instance.pois}
    return oracle_allocate(sequence, available_time, curves, rewards)


__all__ = [
    "MAX_ORACLE_N",
    "OracleError",
    "OracleResult",
    "allocate_for",
    "oracle_allocate",
    "oracle_allocate_dp",
    "oracle_bmt",
    "oracle_min_stay",
    "oracle_rmt",
]
