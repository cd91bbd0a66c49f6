"""Anytime branch-and-bound over :class:`BoundedSimplex` relaxations.

Nodes are kept in a best-bound heap; after popping a node the search dives
depth-first (up branch first) and pushes the siblings it passes, so early
incumbents appear while the global bound still comes from the heap.
Internally everything is in minimization form.
"""

from __future__ import annotations

import heapq
import math
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .lp import Basis, BoundedSimplex, NumericalFailure
from .problem import MatrixForm, MIPModel

DEFAULT_THRESHOLDS = (1.0, 0.5, 0.2, 0.1, 0.05, 0.01, 0.0)


def gap(incumbent: Optional[float], bound: Optional[float], sense: str = "max") -> float:
    """Relative distance between the best bound and the incumbent.

    Without an incumbent the gap is 1.0 by convention.
    """
    if incumbent is None:
        return 1.0
    if bound is None:
        raise ValueError("a bound is required when an incumbent exists")
    slack = 1e-6 * max(1.0, abs(incumbent))
    if sense == "max" and bound < incumbent - slack or sense == "min" and bound > incumbent + slack:
        raise ValueError(f"bound {bound} does not dominate incumbent {incumbent} ({sense})")
    return abs(bound - incumbent) / max(abs(incumbent), 1e-10)


@dataclass
class SolveConfig:
    time_limit: float = 600.0
    gap_thresholds: Sequence[float] = DEFAULT_THRESHOLDS
    target_gap: float = 0.0
    integrality_tol: float = 1e-6
    deterministic: bool = True
    threads: int = 1
    node_limit: Optional[int] = None
    bound_event_every: int = 50  # nodes between throttled bound events
    pricing: str = "dantzig"

    def __post_init__(self):
        th = [float(p) for p in self.gap_thresholds]
        if any(b > a for a, b in zip(th, th[1:])):
            raise ValueError("gap thresholds must be sorted in descending order")
        self.gap_thresholds = tuple(th)
        if self.threads < 1:
            raise ValueError("threads must be >= 1")
        if self.deterministic:
            self.threads = 1


@dataclass(frozen=True)
class SolveEvent:
    kind: str  # new_incumbent | bound_improved | threshold_crossed | done
    elapsed: float
    incumbent: Optional[float]
    bound: Optional[float]
    gap: float
    threshold: Optional[float] = None
    nodes: int = 0
    # incumbent solution vector, set on new_incumbent events only
    x: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "elapsed": self.elapsed,
            "incumbent": self.incumbent,
            "bound": self.bound,
            "gap": self.gap,
            "threshold": self.threshold,
            "nodes": self.nodes,
        }

    def values(self) -> tuple:
        """Event content without the timestamp."""
        return (self.kind, self.incumbent, self.bound, self.gap, self.threshold, self.nodes)


@dataclass
class MIPResult:
    status: str  # optimal | feasible | infeasible | unbounded | no_solution
    objective: Optional[float]
    bound: Optional[float]
    gap: float
    x: Optional[np.ndarray]
    assignment: Optional[Dict[str, float]]
    events: List[SolveEvent]
    nodes: int
    elapsed: float
    stop_reason: str  # exhausted | gap | time_limit | node_limit | infeasible | unbounded

    @property
    def time_limited(self) -> bool:
        return self.stop_reason == "time_limit"

    @property
    def final_event(self) -> SolveEvent:
        return self.events[-1]


@dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = field(compare=False)
    changes: Tuple[Tuple[int, float, float], ...] = field(compare=False)
    basis: Optional[Basis] = field(compare=False, default=None)


class _Search:
    def __init__(self, mf: MatrixForm, config: SolveConfig, sink: Optional[Callable[[SolveEvent], None]],
                 sense: str, start: Optional[Dict[int, float]] = None):
        self.mf = mf
        self.start_values = start or {}
        self.cfg = config
        self.sink = sink
        self.sense = sense
        self.integral = np.flatnonzero(mf.integral)
        self.binary = np.array([j for j in self.integral if mf.lo[j] >= 0 and mf.hi[j] <= 1], dtype=int)
        self.general = np.array([j for j in self.integral if j not in set(self.binary.tolist())], dtype=int)
        self.lock = threading.RLock()
        self.heap: List[_Node] = []
        self.seq = 0
        self.inc_z: Optional[float] = None
        self.inc_x: Optional[np.ndarray] = None
        self.best_bound_z = -math.inf
        self.events: List[SolveEvent] = []
        self.crossed = set()
        self.last_gap = 1.0
        self.nodes = 0
        self.nodes_at_bound_event = 0
        self.active: Dict[int, float] = {}  # worker id -> bound of the node being processed
        self.start = time.perf_counter()
        self.stop_reason: Optional[str] = None

    # reporting helpers

    def _user(self, z: Optional[float]) -> Optional[float]:
        if z is None or not math.isfinite(z):
            return None if z is None else self.mf.sign * z
        return self.mf.sign * (z + self.mf.offset) + 0.0  # no -0.0

    def _prune_tol(self) -> float:
        return 1e-9 * max(1.0, abs(self.inc_z + self.mf.offset)) if self.inc_z is not None else 0.0

    def _global_bound(self) -> float:
        cands = [n.bound for n in self.heap[:1]] + list(self.active.values())
        lb = min(cands) if cands else (self.inc_z if self.inc_z is not None else math.inf)
        if self.inc_z is not None:
            lb = min(lb, self.inc_z)
            if lb >= self.inc_z - self._prune_tol():
                lb = self.inc_z
        return lb

    def _raw_gap(self, bound_z: float) -> float:
        if self.inc_z is None:
            return 1.0
        inc = self._user(self.inc_z)
        bnd = self._user(bound_z)
        if bnd is None or not math.isfinite(bnd):
            return 1.0
        return min(1.0, abs(bnd - inc) / max(abs(inc), 1e-10))

    def _emit(self, kind: str, threshold: Optional[float] = None) -> None:
        ev = SolveEvent(kind, time.perf_counter() - self.start, self._user(self.inc_z),
                        self._user(self.best_bound_z) if math.isfinite(self.best_bound_z) else None,
                        self.last_gap, threshold, self.nodes,
                        self.inc_x.copy() if kind == "new_incumbent" and self.inc_x is not None else None)
        self.events.append(ev)
        if self.sink is not None:
            self.sink(ev)

    def _refresh(self, new_incumbent: bool = False, force_bound: bool = False) -> None:
        """Recompute bound and gap, then emit whatever events became due."""
        lb = self._global_bound()
        bound_moved = lb > self.best_bound_z + 1e-12 * max(1.0, abs(lb))
        if bound_moved or (self.inc_z is not None and lb == self.inc_z):
            self.best_bound_z = max(self.best_bound_z, lb)
        self.last_gap = min(self.last_gap, self._raw_gap(self.best_bound_z))
        if new_incumbent:
            self._emit("new_incumbent")
            self.nodes_at_bound_event = self.nodes
        elif bound_moved and (force_bound or self.nodes - self.nodes_at_bound_event >= self.cfg.bound_event_every
                              or any(self.last_gap <= p and p not in self.crossed for p in self.cfg.gap_thresholds)):
            self._emit("bound_improved")
            self.nodes_at_bound_event = self.nodes
        if self.inc_z is not None:
            for p in self.cfg.gap_thresholds:
                if p not in self.crossed and self.last_gap <= p:
                    self.crossed.add(p)
                    self._emit("threshold_crossed", p)

    def _done(self) -> bool:
        if self.stop_reason is not None:
            return True
        if self.inc_z is not None and self.last_gap <= self.cfg.target_gap:
            self.stop_reason = "exhausted" if self.last_gap == 0.0 else "gap"
            return True
        if time.perf_counter() - self.start > self.cfg.time_limit:
            self.stop_reason = "time_limit"
            return True
        if self.cfg.node_limit is not None and self.nodes >= self.cfg.node_limit:
            self.stop_reason = "node_limit"
            return True
        return False

    # incumbent handling

    def _try_incumbent(self, engine: BoundedSimplex, x: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                       basis: Optional[Basis] = None) -> bool:
        """Round x; if that is infeasible, fix the rounded binaries, re-solve, and keep the result if it improves."""
        xi = x.copy()
        xi[self.integral] = np.round(xi[self.integral])
        if np.any(xi[self.integral] < lo[self.integral] - 1e-9) or np.any(xi[self.integral] > hi[self.integral] + 1e-9):
            return False
        if not self._feasible(xi):
            flo, fhi = lo.copy(), hi.copy()
            for group in (self.binary, self.general):
                if len(group) == 0:
                    continue
                flo[group] = xi[group]
                fhi[group] = xi[group]
                try:
                    res = engine.solve(flo, fhi, basis)
                except NumericalFailure:
                    return False
                if not res.optimal:
                    return False
                basis = res.basis
                xi = res.x.copy()
                xi[self.integral] = np.round(xi[self.integral])
                if self._feasible(xi):
                    break
            else:
                return False
        z = float(self.mf.c @ xi)
        with self.lock:
            if self.inc_z is None or z < self.inc_z - self._prune_tol():
                self.inc_z = z
                self.inc_x = xi
                self._refresh(new_incumbent=True)
                return True
        return False

    def _try_start(self, engine: BoundedSimplex) -> None:
        """Fix the hinted variables, solve for the rest and offer the result as an incumbent."""
        lo, hi = self.mf.lo.copy(), self.mf.hi.copy()
        for j, v in self.start_values.items():
            if v < lo[j] - 1e-9 or v > hi[j] + 1e-9:
                return
            lo[j] = hi[j] = v
        try:
            res = engine.solve(lo, hi)
        except NumericalFailure:
            return
        if res.optimal:
            self._try_incumbent(engine, res.x, lo, hi, res.basis)

    def _feasible(self, x: np.ndarray, tol: float = 1e-6) -> bool:
        act = self.mf.A @ x
        scale = 1.0 + np.abs(self.mf.A) @ np.abs(x)
        ok_rows = np.all(act >= self.mf.row_lo - tol * scale) and np.all(act <= self.mf.row_hi + tol * scale)
        ok_cols = np.all(x >= self.mf.lo - tol) and np.all(x <= self.mf.hi + tol)
        return bool(ok_rows and ok_cols)

    # branching

    def _pick_branch(self, x: np.ndarray) -> Optional[int]:
        tol = self.cfg.integrality_tol
        for group in (self.binary, self.general):
            if len(group) == 0:
                continue
            v = x[group]
            frac = np.abs(v - np.round(v))
            k = int(np.argmax(frac))  # argmax returns the first, i.e. lowest index, on ties
            if frac[k] > tol:
                return int(group[k])
        return None

    def _rounding(self, engine, x, lo, hi, basis) -> None:
        self._try_incumbent(engine, x, lo, hi, basis)

    def _reduced_cost_fixing(self, res, z: float, lo: np.ndarray, hi: np.ndarray) -> List[Tuple[int, float, float]]:
        if self.inc_z is None or res.reduced_costs is None:
            return []
        room = self.inc_z - self._prune_tol() - z
        if room < 0:
            return []
        d = res.reduced_costs
        x = res.x
        out = []
        for j in self.integral:
            if lo[j] == hi[j]:
                continue
            if d[j] > 1e-9 and x[j] <= lo[j] + 1e-9:
                span = math.floor(room / d[j] + 1e-9)
                if lo[j] + span < hi[j]:
                    out.append((int(j), lo[j], lo[j] + span))
            elif d[j] < -1e-9 and x[j] >= hi[j] - 1e-9:
                span = math.floor(room / -d[j] + 1e-9)
                if hi[j] - span > lo[j]:
                    out.append((int(j), hi[j] - span, hi[j]))
        return out

    # main loop

    def _bounds_for(self, changes) -> Tuple[np.ndarray, np.ndarray]:
        lo = self.mf.lo.copy()
        hi = self.mf.hi.copy()
        for j, a, b in changes:
            lo[j] = max(lo[j], a)
            hi[j] = min(hi[j], b)
        return lo, hi

    def _push(self, bound: float, depth: int, changes, basis) -> None:
        self.seq += 1
        heapq.heappush(self.heap, _Node(bound, self.seq, depth, changes, basis))

    def _pop(self) -> Optional[_Node]:
        while self.heap:
            node = heapq.heappop(self.heap)
            if self.inc_z is not None and node.bound >= self.inc_z - self._prune_tol():
                continue
            return node
        return None

    def dive(self, engine: BoundedSimplex, node: _Node, wid: int) -> None:
        """Process ``node`` and keep following its up child until the dive dies."""
        last_frac = None
        while node is not None:
            with self.lock:
                if self._done():
                    self._push(node.bound, node.depth, node.changes, node.basis)
                    return
                self.active[wid] = node.bound
                self.nodes += 1
            lo, hi = self._bounds_for(node.changes)
            try:
                res = engine.solve(lo, hi, node.basis)
            except NumericalFailure:
                res = engine.solve(lo, hi, None)
            nxt = None
            if res.status == "unbounded":
                with self.lock:
                    self.stop_reason = "unbounded"
                    self.active.pop(wid, None)
                return
            if res.optimal:
                z = max(res.objective, node.bound)
                prune = self.inc_z is not None and z >= self.inc_z - self._prune_tol()
                if not prune:
                    j = self._pick_branch(res.x)
                    if j is None:
                        self._try_incumbent(engine, res.x, lo, hi)
                    else:
                        last_frac = (res.x, lo, hi, res.basis)
                        fixes = tuple(self._reduced_cost_fixing(res, res.objective, lo, hi))
                        v = res.x[j]
                        base = node.changes + fixes
                        down = base + ((j, lo[j], math.floor(v)),)
                        up = base + ((j, math.ceil(v), hi[j]),)
                        with self.lock:
                            self._push(z, node.depth + 1, down, res.basis)
                        nxt = _Node(z, 0, node.depth + 1, up, res.basis)
            with self.lock:
                self.active.pop(wid, None)
                if nxt is not None:
                    self.active[wid] = nxt.bound
                self._refresh()
            node = nxt
        if last_frac is not None:
            self._rounding(engine, *last_frac)

    def run(self) -> None:
        engine = BoundedSimplex.from_matrix(self.mf, pricing=self.cfg.pricing)
        res = engine.solve()
        if res.status == "infeasible":
            self.stop_reason = "infeasible"
            return
        if res.status == "unbounded":
            self.stop_reason = "unbounded"
            return
        self.best_bound_z = res.objective
        self.last_gap = 1.0
        self._emit("bound_improved")
        self._push(res.objective, 0, (), res.basis)
        if self.start_values:
            self._try_start(engine)
        if self._pick_branch(res.x) is not None:
            self._try_incumbent(engine, res.x, self.mf.lo, self.mf.hi, res.basis)
        if self.cfg.threads == 1:
            self._worker(engine, 0)
        else:
            engines = [engine] + [BoundedSimplex.from_matrix(self.mf, pricing=self.cfg.pricing)
                                  for _ in range(self.cfg.threads - 1)]
            threads = [threading.Thread(target=self._worker, args=(engines[k], k), daemon=True)
                       for k in range(self.cfg.threads)]
            for t in threads:
                t.start()
            for t in threads:
                t.join()
        with self.lock:
            if self.stop_reason is None:
                self.stop_reason = "exhausted"
            if self.stop_reason == "exhausted":
                if self.inc_z is not None:
                    self.best_bound_z = self.inc_z
                    self.last_gap = 0.0
                    for p in self.cfg.gap_thresholds:
                        if p not in self.crossed:
                            self.crossed.add(p)
                            self._emit("threshold_crossed", p)

    def _worker(self, engine: BoundedSimplex, wid: int) -> None:
        while True:
            with self.lock:
                if self._done():
                    return
                node = self._pop()
                if node is None:
                    if not self.active:
                        return
                else:
                    self.active[wid] = node.bound
            if node is None:
                time.sleep(0.001)
                continue
            self.dive(engine, node, wid)


def solve_mip(model, config: Optional[SolveConfig] = None,
              event_sink: Optional[Callable[[SolveEvent], None]] = None,
              start: Optional[Mapping[str, float]] = None) -> MIPResult:
    """Branch-and-bound on a :class:`MIPModel` (or a ``MatrixForm`` in min form).

    ``start`` optionally fixes some variables by name; the LP over the rest
    is solved once before the search and kept if it yields a feasible point.
    """
    config = config or SolveConfig()
    fixed = None
    if isinstance(model, MIPModel):
        mf = model.matrix()
        sense = model.sense
        if start:
            fixed = {model.index(name): float(v) for name, v in start.items()}
    else:
        mf = model
        sense = "min" if mf.sign > 0 else "max"
        if start:
            raise ValueError("start values need a MIPModel to resolve names")
    search = _Search(mf, config, event_sink, sense, fixed)
    search.run()
    reason = search.stop_reason
    if reason == "infeasible" or (reason == "exhausted" and search.inc_z is None):
        search.last_gap = 1.0
        search._emit("done")
        return MIPResult("infeasible", None, None, 1.0, None, None, search.events, search.nodes,
                         time.perf_counter() - search.start, "infeasible")
    if reason == "unbounded":
        search._emit("done")
        return MIPResult("unbounded", None, None, 1.0, None, None, search.events, search.nodes,
                         time.perf_counter() - search.start, "unbounded")
    with search.lock:
        if reason != "exhausted":
            search._refresh(force_bound=True)
        search._emit("done")
    if search.inc_z is None:
        status = "no_solution"
    elif search.last_gap == 0.0:
        status = "optimal"
    else:
        status = "feasible"
    x = search.inc_x
    assignment = model.assignment(x) if (x is not None and isinstance(model, MIPModel)) else None
    bound = search._user(search.best_bound_z) if math.isfinite(search.best_bound_z) else None
    return MIPResult(status, search._user(search.inc_z), bound, search.last_gap, x, assignment,
                     search.events, search.nodes, time.perf_counter() - search.start, reason)
