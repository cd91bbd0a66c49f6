"""Greedy tour construction used to seed the branch-and-bound with an incumbent.

Tours grow by cheapest insertion of the POI that most improves the
objective, with stay times filled steepest-piece-first over the model's PWL
curves; 2-opt moves then shorten the travel. The result is turned into a
partial assignment of the routing binaries of a model.
"""

from __future__ import annotations

import math
from typing import Dict, List, Optional, Sequence, Tuple

from .core import Instance
from .curves import PWLCurve
from .graph import ClosedGraph
from .solver.problem import MIPModel

Pieces = List[Tuple[float, float, int]]  # (reward rate, duration, poi)


def _pieces(instance: Instance, curves: Sequence[PWLCurve]) -> Dict[int, Pieces]:
    out = {}
    for poi, pwl in zip(instance.pois, curves):
        items = []
        for seg in pwl.segments:
            if seg.slope > 0 and math.isfinite(seg.end) and poi.max_reward > 0:
                items.append((poi.max_reward * seg.slope, seg.end - seg.start, poi.id))
        out[poi.id] = items
    return out


class _Evaluator:
    def __init__(self, instance: Instance, closed: ClosedGraph, curves: Sequence[PWLCurve], mode: str):
        self.inst = instance
        self.closed = closed
        self.mode = mode
        self.pieces = _pieces(instance, curves)
        self.total = {p.id: sum(r * l for r, l, _ in self.pieces[p.id]) for p in instance.pois}
        prob = instance.problem
        self.budget = prob.budget if mode == "rmt" else None
        self.requirement = prob.requirement if mode == "bmt" else None

    def travel(self, tour: Sequence[int]) -> float:
        if len(tour) == 1:
            return 0.0
        cyc = list(tour) + [tour[0]]
        return sum(self.closed.d(a, b) for a, b in zip(cyc, cyc[1:]))

    def _sorted(self, visited) -> Pieces:
        items = [p for i in visited for p in self.pieces[i]]
        items.sort(key=lambda x: (-x[0], x[2]))
        return items

    def reward(self, visited, time_left: float) -> float:
        if time_left <= 0:
            return 0.0
        got = 0.0
        for rate, length, _ in self._sorted(visited):
            step = min(length, time_left)
            got += rate * step
            time_left -= step
            if time_left <= 0:
                break
        return got

    def min_stay(self, visited) -> float:
        need = self.requirement
        if need <= 0:
            return 0.0
        spent = 0.0
        for rate, length, _ in self._sorted(visited):
            step = min(length, need / rate)
            spent += step
            need -= rate * step
            if need <= 1e-12:
                return spent
        return math.inf

    def score(self, tour: Sequence[int]) -> float:
        """Larger is better: reward for rmt, minus total time for bmt."""
        travel = self.travel(tour)
        if self.mode == "rmt":
            if travel > self.budget + 1e-9:
                return -math.inf
            return self.reward(tour, self.budget - travel)
        stay = self.min_stay(tour)
        if math.isinf(stay):
            # prefer tours that get closer to the requirement
            missing = self.requirement - sum(self.total[i] for i in tour)
            return -1e9 * missing - travel
        return -(travel + stay)


def _best_insertion(ev: _Evaluator, tour: List[int], j: int) -> Tuple[float, int]:
    best = (math.inf, -1)
    d = ev.closed.d
    for k in range(len(tour)):
        a, b = tour[k], tour[(k + 1) % len(tour)]
        if len(tour) == 1:
            delta = d(a, j) + d(j, a)
        else:
            delta = d(a, j) + d(j, b) - d(a, b)
        if delta < best[0] - 1e-12:
            best = (delta, k + 1)
    return best


def _two_opt(ev: _Evaluator, tour: List[int]) -> List[int]:
    improved = True
    while improved and len(tour) > 3:
        improved = False
        cur = ev.travel(tour)
        for a in range(1, len(tour) - 1):
            for b in range(a + 1, len(tour)):
                cand = tour[:a] + tour[a:b + 1][::-1] + tour[b + 1:]
                t = ev.travel(cand)
                if t < cur - 1e-9:
                    tour, cur, improved = cand, t, True
    return tour


def _grow(ev: _Evaluator, start: int, candidates: Sequence[int]) -> Tuple[float, List[int]]:
    tour = [start]
    score = ev.score(tour)
    while True:
        best = (score, None)
        for j in candidates:
            if j in tour or not (ev.closed.reachable(tour[-1], j) and ev.closed.reachable(j, start)):
                continue
            delta, pos = _best_insertion(ev, tour, j)
            if not math.isfinite(delta):
                continue
            cand = tour[:pos] + [j] + tour[pos:]
            s = ev.score(cand)
            if s > best[0] + 1e-9:
                best = (s, cand)
        if best[1] is None:
            break
        tour = _two_opt(ev, best[1])
        score = ev.score(tour)
    return score, tour


def _insert(ev: _Evaluator, tour: List[int], j: int) -> Optional[List[int]]:
    delta, pos = _best_insertion(ev, tour, j)
    if not math.isfinite(delta):
        return None
    return tour[:pos] + [j] + tour[pos:]


def _local_search(ev: _Evaluator, tour: List[int], candidates: Sequence[int], max_rounds: int = 50):
    """Best-improvement drop / add / swap moves, each followed by 2-opt."""
    score = ev.score(tour)
    for _ in range(max_rounds):
        best = (score, None)
        outside = [j for j in candidates if j not in tour]
        moves = []
        for i in tour[1:]:
            moves.append([v for v in tour if v != i])
        for j in outside:
            moves.append(_insert(ev, tour, j))
            for i in tour[1:]:
                rest = [v for v in tour if v != i]
                moves.append(_insert(ev, rest, j))
        for cand in moves:
            if cand is None:
                continue
            s = ev.score(cand)
            if s > best[0] + 1e-9:
                best = (s, cand)
        if best[1] is None:
            break
        tour = _two_opt(ev, best[1])
        score = ev.score(tour)
    return score, tour


def greedy_tour(instance: Instance, closed: ClosedGraph, curves: Sequence[PWLCurve],
                mode: Optional[str] = None) -> Optional[List[int]]:
    """Best greedy tour over all bases, as a POI sequence starting at its base."""
    mode = mode or instance.problem.mode
    ev = _Evaluator(instance, closed, curves, mode)
    others = [p.id for p in instance.pois]
    best = None
    for b in instance.bases:
        cands = [j for j in others if j != b]
        score, tour = _grow(ev, b, cands)
        score, tour = _local_search(ev, tour, cands)
        if math.isfinite(score) and (best is None or score > best[0] + 1e-9):
            best = (score, tour)
    if best is None or (mode == "bmt" and best[0] < -1e8):
        return None
    return best[1]


def tour_hint(model: MIPModel, tour: Sequence[int], bases: Sequence[int]) -> Optional[Dict[str, float]]:
    """Values of the routing binaries (edges, visits, base gadgets) that encode ``tour``.

    Returns None for model shapes this encoder does not cover.
    """
    if model.names_with_role("edge_tour"):
        return None
    hint = {name: 0.0 for name in model.names_with_role("edge")}
    hint.update({name: 0.0 for name in model.names_with_role("visit")})
    start = tour[0]
    on = set(tour)
    for i in on:
        hint[f"x_{i}"] = 1.0
    if len(tour) > 1:
        cyc = list(tour) + [start]
        for a, b in zip(cyc, cyc[1:]):
            name = f"x_{a}_{b}"
            if name not in hint:
                return None
            hint[name] = 1.0
    if model.has_var(f"x_{start}_{start}"):
        hint[f"x_{start}_{start}"] = 1.0 if len(tour) == 1 else 0.0
    if model.names_with_role("gadget_oout"):
        for b in bases:
            first = b == start
            hint[f"g_oout_{b}"] = 1.0 if first else 0.0
            hint[f"g_ino_{b}"] = 1.0 if first else 0.0
            hint[f"g_outin_{b}"] = 1.0 if first and len(tour) == 1 else 0.0
            hint[f"g_inout_{b}"] = 1.0 if (b in on and not first) else 0.0
    return hint
