"""Mixed-integer models for reward-maximizing (rmt) and budget-minimizing (bmt) tours.

Variable names (POI ids are 1-based):

* ``x_i_j`` meta-edge use, ``x_b_b`` the base self-loop (single base)
* ``x_i`` visit indicator, ``u_i`` tour order
* ``t_i`` / ``w_i`` stay time and reward, with per-block ``tb_i_k`` / ``wb_i_k``
  and activation binaries ``ab_i_k`` when a curve has several concave blocks
* ``g_oout_b``, ``g_ino_b``, ``g_outin_b``, ``g_inout_b`` base gadget edges
* multi-tour copies ``xk_i_j_k``, ``yk_i_k``, ``sk_b_k``, ``uk_i_k``, ``tk_i_k``
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from .core import Instance, InstanceError, Itinerary, eval_total_reward, eval_total_time
from .curves import PWLCurve, approximate, concave_blocks
from .graph import ClosedGraph, SplitGraph, reconstruct_path, transitive_closure
from .solver.problem import MIPModel, ModelError, Role

__all__ = [
    "BuildOptions",
    "ExtractionError",
    "MIPModel",
    "ModelError",
    "Role",
    "build",
    "decode_cycles",
    "default_curves",
    "extract_itinerary",
    "extract_tours",
    "validate_assignment",
]

TOUR_KINDS = ("single", "shared", "disjoint")


class ExtractionError(ValueError):
    """An assignment cannot be read back as a tour."""


@dataclass(frozen=True)
class BuildOptions:
    """Knobs for :func:`build`.

    ``epsilon`` only matters when :func:`build` approximates curves itself.
    ``tours`` is ``single``, ``shared`` (``m`` tours from one base) or
    ``disjoint`` (``m`` tours from distinct bases) with ``tour_limit`` as the
    per-tour time cap. ``subtour_elimination=False`` drops the order rows and
    exists for negative-control experiments only.
    """

    epsilon: float = 0.05
    delta: float = 1e-6
    mode: Optional[str] = None
    tours: str = "single"
    m: int = 1
    tour_limit: Optional[float] = None
    cyclic: bool = True
    subtour_elimination: bool = True

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ModelError("epsilon must lie in (0, 1)")
        if not self.delta > 0:
            raise ModelError("delta must be positive")
        if self.mode not in (None, "rmt", "bmt"):
            raise ModelError(f"unknown mode {self.mode!r}")
        if self.tours not in TOUR_KINDS:
            raise ModelError(f"unknown tour kind {self.tours!r}")
        if self.m < 1:
            raise ModelError("m must be >= 1")
        if self.tours == "single" and self.m != 1:
            raise ModelError("single-tour models have m = 1")
        if self.tours != "single" and not self.cyclic:
            raise ModelError("non-cyclic trips cannot be combined with multiple tours in this builder")
        if self.tour_limit is not None and self.tour_limit < 0:
            raise ModelError("tour_limit must be >= 0")

    @property
    def multi(self) -> bool:
        return self.tours != "single"


def default_curves(instance: Instance, mode: str, epsilon: float) -> List[PWLCurve]:
    """Band approximation at epsilon/2 for rmt, upper approximation at epsilon for bmt."""
    if mode == "rmt":
        return [approximate(p.curve, epsilon / 2, flavor="band", method="greedy") for p in instance.pois]
    return [approximate(p.curve, epsilon, flavor="upper") for p in instance.pois]


def _edge(i: int, j: int) -> str:
    return f"x_{i}_{j}"


class _Builder:
    def __init__(self, instance: Instance, closed: ClosedGraph, curves: Sequence[PWLCurve], opts: BuildOptions):
        self.inst = instance
        self.closed = closed
        self.curves = list(curves)
        self.opts = opts
        self.mode = opts.mode or instance.problem.mode
        self.n = instance.n
        self.bases = tuple(instance.bases)
        self.model = MIPModel(f"{self.mode}_{'single' if len(self.bases) == 1 else 'multi'}")
        self.pairs = [(i, j) for i in range(1, self.n + 1) for j in range(1, self.n + 1)
                      if i != j and closed.reachable(i, j)]
        self.travel: List[Tuple[str, float]] = []
        self.stay_terms: List[Tuple[str, float]] = []

    def var(self, name, kind, lo, hi, role_kind, key):
        return self.model.add_var(name, kind, lo, hi, Role(role_kind, key))

    def check_structure(self) -> None:
        if self.n == 1:
            return
        base_set = set(self.bases)
        for b in self.bases:
            for j in range(1, self.n + 1):
                if j != b and self.closed.reachable(b, j) and any(
                        self.closed.reachable(j, c) for c in base_set):
                    return
        raise ModelError("no base can reach any POI and return to a base")

    # curves

    def saturation(self, i: int) -> float:
        pwl = self.curves[i - 1]
        blocks = concave_blocks(pwl)
        last = blocks.blocks[-1]
        end = last.end if math.isfinite(last.end) else pwl.saturation_time
        return max(end, last.start)

    def reward_rows(self, i: int, visit: str) -> None:
        """Stay/reward variables of POI ``i`` and the concave-block rows tying them together."""
        r = self.inst.poi(i).max_reward
        pwl = self.curves[i - 1]
        blocks = list(concave_blocks(pwl))
        tsat = self.saturation(i)
        t, w = f"t_{i}", f"w_{i}"
        self.var(t, "continuous", 0.0, tsat, "stay", (i,))
        self.var(w, "continuous", 0.0, r, "reward", (i,))
        ends = []
        for blk in blocks:
            end = blk.end if math.isfinite(blk.end) else tsat
            ends.append(max(end, blk.start))
        m = self.model
        if len(blocks) == 1:
            for s, seg in enumerate(blocks[0].segments):
                m.add_con(f"seg_{i}_1_{s + 1}", [(w, 1.0), (t, -r * seg.slope)], "<=", r * seg.intercept)
            m.add_con(f"gate_{i}", [(t, 1.0), (visit, -ends[0])], "<=", 0.0)
        else:
            tsum = [(t, 1.0)]
            wsum = [(w, 1.0)]
            offset = 0.0
            for k, blk in enumerate(blocks, start=1):
                tk, wk = f"tb_{i}_{k}", f"wb_{i}_{k}"
                start = 0.0 if k == 1 else blk.start
                self.var(tk, "continuous", start, ends[k - 1], "stay_block", (i, k))
                self.var(wk, "continuous", 0.0, r, "reward_block", (i, k))
                base_val = float(pwl(start)) if k > 1 else 0.0
                for s, seg in enumerate(blk.segments):
                    m.add_con(f"seg_{i}_{k}_{s + 1}", [(wk, 1.0), (tk, -r * seg.slope)], "<=",
                              r * (seg.intercept - base_val))
                if k > 1:
                    ak = f"ab_{i}_{k}"
                    self.var(ak, "binary", 0, 1, "activation", (i, k))
                    prev_t, prev_end = f"tb_{i}_{k - 1}", ends[k - 2]
                    m.add_con(f"act_{i}_{k}", [(ak, prev_end), (prev_t, -1.0)], "<=", self.opts.delta)
                    m.add_con(f"span_{i}_{k}", [(tk, 1.0), (ak, -(ends[k - 1] - start))], "<=", start)
                    offset += start
                tsum.append((tk, -1.0))
                wsum.append((wk, -1.0))
            m.add_con(f"tsum_{i}", tsum, "=", -offset)
            m.add_con(f"wsum_{i}", wsum, "=", 0.0)
            m.add_con(f"gate_{i}", [(f"tb_{i}_1", 1.0), (visit, -ends[0])], "<=", 0.0)
        m.add_con(f"cap_{i}", [(w, 1.0), (visit, -r)], "<=", 0.0)
        self.stay_terms.append((t, 1.0))

    # problem rows

    def objective(self) -> None:
        m = self.model
        rewards = [(f"w_{i}", 1.0) for i in range(1, self.n + 1)]
        time_terms = self.travel + self.stay_terms
        prob = self.inst.problem
        if self.mode == "rmt":
            budget = prob.budget if prob.mode == "rmt" else None
            if budget is None:
                raise ModelError("rmt model needs a time budget")
            if not self.opts.multi:
                m.add_con("time", time_terms, "<=", budget)
            m.set_objective("max", rewards)
        else:
            req = prob.requirement if prob.mode == "bmt" else None
            if req is None:
                raise ModelError("bmt model needs a reward requirement")
            m.add_con("reward_req", rewards, ">=", req)
            m.set_objective("min", time_terms)

    # single tour

    def single_base(self) -> None:
        (b,) = self.bases
        n, m = self.n, self.model
        for i, j in self.pairs:
            self.var(_edge(i, j), "binary", 0, 1, "edge", (i, j))
            self.travel.append((_edge(i, j), self.closed.d(i, j)))
        self.var(_edge(b, b), "binary", 0, 1, "self_loop", (b,))
        for i in range(1, n + 1):
            self.var(f"x_{i}", "binary", 0, 1, "visit", (i,))
        for i in range(1, n + 1):
            if i != b:
                self.var(f"u_{i}", "integer", 2, max(2, n), "order", (i,))
        out_of = defaultdict(list)
        into = defaultdict(list)
        for i, j in self.pairs:
            out_of[i].append(_edge(i, j))
            into[j].append(_edge(i, j))
        for i in range(1, n + 1):
            extra = [(_edge(b, b), 1.0)] if i == b else []
            m.add_con(f"out_{i}", [(e, 1.0) for e in out_of[i]] + extra + [(f"x_{i}", -1.0)], "=", 0.0)
            m.add_con(f"in_{i}", [(e, 1.0) for e in into[i]] + extra + [(f"x_{i}", -1.0)], "=", 0.0)
        m.add_con("base_fix", [(f"x_{b}", 1.0)], "=", 1.0)
        if self.opts.subtour_elimination:
            for i, j in self.pairs:
                if i != b and j != b:
                    m.add_con(f"mtz_{i}_{j}", [(f"u_{i}", 1.0), (f"u_{j}", -1.0), (_edge(i, j), n - 1.0)],
                              "<=", n - 2.0)
        for i in range(1, n + 1):
            self.reward_rows(i, f"x_{i}")

    def multi_base(self) -> None:
        n, m = self.n, self.model
        base_set = set(self.bases)
        for i, j in self.pairs:
            self.var(_edge(i, j), "binary", 0, 1, "edge", (i, j))
            self.travel.append((_edge(i, j), self.closed.d(i, j)))
        for b in self.bases:
            for tag in ("oout", "ino", "outin", "inout"):
                self.var(f"g_{tag}_{b}", "binary", 0, 1, f"gadget_{tag}", (b,))
        for i in range(1, n + 1):
            self.var(f"x_{i}", "binary", 0, 1, "visit", (i,))
        for i in range(1, n + 1):
            self.var(f"u_{i}", "integer", 1, n, "order", (i,))
        out_of = defaultdict(list)
        into = defaultdict(list)
        for i, j in self.pairs:
            out_of[i].append(_edge(i, j))
            into[j].append(_edge(i, j))
        m.add_con("origin", [(f"g_oout_{b}", 1.0) for b in self.bases], "=", 1.0)
        if not self.opts.cyclic:
            m.add_con("origin_return", [(f"g_ino_{b}", 1.0) for b in self.bases], "=", 1.0)
        for i in range(1, n + 1):
            if i in base_set:
                gad = [(f"g_outin_{i}", 1.0), (f"g_inout_{i}", -1.0)]
                m.add_con(f"out_{i}", [(e, 1.0) for e in out_of[i]] + gad + [(f"g_oout_{i}", -1.0)], "=", 0.0)
                m.add_con(f"in_{i}", [(e, 1.0) for e in into[i]] + gad + [(f"g_ino_{i}", -1.0)], "=", 0.0)
                if self.opts.cyclic:
                    m.add_con(f"pair_{i}", [(f"g_oout_{i}", 1.0), (f"g_ino_{i}", -1.0)], "=", 0.0)
                m.add_con(f"bvisit_{i}", [(f"x_{i}", 1.0), (f"g_oout_{i}", -1.0)] + [(e, -1.0) for e in into[i]],
                          "<=", 0.0)
            else:
                m.add_con(f"out_{i}", [(e, 1.0) for e in out_of[i]] + [(f"x_{i}", -1.0)], "=", 0.0)
                m.add_con(f"in_{i}", [(e, 1.0) for e in into[i]] + [(f"x_{i}", -1.0)], "=", 0.0)
        if self.opts.subtour_elimination:
            for i, j in self.pairs:
                terms = [(f"u_{i}", 1.0), (f"u_{j}", -1.0), (_edge(i, j), float(n))]
                if i in base_set:
                    # u_i - u_j + 1 <= (2 - x_ij - x_i^{in,out}) n
                    m.add_con(f"mtz_{i}_{j}", terms + [(f"g_inout_{i}", float(n))], "<=", 2.0 * n - 1.0)
                else:
                    m.add_con(f"mtz_{i}_{j}", terms, "<=", n - 1.0)
        for i in range(1, n + 1):
            self.reward_rows(i, f"x_{i}")

    # multiple tours

    def multi_tour(self) -> None:
        n, m, k_tours = self.n, self.model, self.opts.m
        base_set = set(self.bases)
        shared = self.opts.tours == "shared"
        if not shared and len(self.bases) < k_tours:
            raise ModelError(f"disjoint tours need at least m = {k_tours} bases, got {len(self.bases)}")
        pairs = [(i, j) for i, j in self.pairs if not (i in base_set and j in base_set)]
        tours = range(1, k_tours + 1)
        for i, j in pairs:
            self.var(_edge(i, j), "binary", 0, 1, "edge", (i, j))
        for k in tours:
            for i, j in pairs:
                self.var(f"xk_{i}_{j}_{k}", "binary", 0, 1, "edge_tour", (i, j, k))
        for b in self.bases:
            if shared:
                self.var(f"s_{b}", "binary", 0, 1, "anchor_shared", (b,))
            for k in tours:
                self.var(f"sk_{b}_{k}", "binary", 0, 1, "anchor", (b, k))
                self.var(f"ek_{b}_{k}", "binary", 0, 1, "self_loop_tour", (b, k))
        for i in range(1, n + 1):
            self.var(f"x_{i}", "binary", 0, 1, "visit", (i,))
            if i not in base_set:
                for k in tours:
                    self.var(f"yk_{i}_{k}", "binary", 0, 1, "visit_tour", (i, k))
                    self.var(f"uk_{i}_{k}", "integer", 1, n, "order_tour", (i, k))
        for i, j in pairs:
            m.add_con(f"agg_{i}_{j}", [(_edge(i, j), 1.0)] + [(f"xk_{i}_{j}_{k}", -1.0) for k in tours], "=", 0.0)
        out_of = defaultdict(list)
        into = defaultdict(list)
        for i, j in pairs:
            out_of[i].append((i, j))
            into[j].append((i, j))
        for k in tours:
            m.add_con(f"anchor_{k}", [(f"sk_{b}_{k}", 1.0) for b in self.bases], "=", 1.0)
            for i in range(1, n + 1):
                outs = [(f"xk_{a}_{c}_{k}", 1.0) for a, c in out_of[i]]
                ins = [(f"xk_{a}_{c}_{k}", 1.0) for a, c in into[i]]
                if i in base_set:
                    loop = [(f"ek_{i}_{k}", 1.0), (f"sk_{i}_{k}", -1.0)]
                    m.add_con(f"out_{i}_{k}", outs + loop, "=", 0.0)
                    m.add_con(f"in_{i}_{k}", ins + loop, "=", 0.0)
                else:
                    m.add_con(f"out_{i}_{k}", outs + [(f"yk_{i}_{k}", -1.0)], "=", 0.0)
                    m.add_con(f"in_{i}_{k}", ins + [(f"yk_{i}_{k}", -1.0)], "=", 0.0)
        for b in self.bases:
            if shared:
                for k in tours:
                    m.add_con(f"share_{b}_{k}", [(f"sk_{b}_{k}", 1.0), (f"s_{b}", -1.0)], "=", 0.0)
                # a base has either 0 or m incoming edges in use
                m.add_con(f"indeg_{b}", [(f"xk_{a}_{c}_{k}", 1.0) for k in tours for a, c in into[b]]
                          + [(f"ek_{b}_{k}", 1.0) for k in tours] + [(f"s_{b}", -float(k_tours))], "=", 0.0)
            else:
                m.add_con(f"host_{b}", [(f"sk_{b}_{k}", 1.0) for k in tours], "<=", 1.0)
                m.add_con(f"indeg_{b}", [(f"xk_{a}_{c}_{k}", 1.0) for k in tours for a, c in into[b]]
                          + [(f"ek_{b}_{k}", 1.0) for k in tours], "<=", 1.0)
            m.add_con(f"bvisit_{b}", [(f"x_{b}", 1.0)] + [(f"sk_{b}_{k}", -1.0) for k in tours], "<=", 0.0)
        for i in range(1, n + 1):
            if i not in base_set:
                m.add_con(f"visit_{i}", [(f"x_{i}", 1.0)] + [(f"yk_{i}_{k}", -1.0) for k in tours], "=", 0.0)
        if self.opts.subtour_elimination:
            for k in tours:
                for i, j in pairs:
                    if i in base_set or j in base_set:
                        continue
                    m.add_con(f"mtz_{i}_{j}_{k}", [(f"uk_{i}_{k}", 1.0), (f"uk_{j}_{k}", -1.0),
                                                   (f"xk_{i}_{j}_{k}", float(n))], "<=", n - 1.0)
        for i in range(1, n + 1):
            self.reward_rows(i, f"x_{i}")
            tsat = self.saturation(i)
            for k in tours:
                self.var(f"tk_{i}_{k}", "continuous", 0.0, tsat, "stay_tour", (i, k))
                owner = f"sk_{i}_{k}" if i in base_set else f"yk_{i}_{k}"
                m.add_con(f"tgate_{i}_{k}", [(f"tk_{i}_{k}", 1.0), (owner, -tsat)], "<=", 0.0)
            m.add_con(f"tsplit_{i}", [(f"t_{i}", 1.0)] + [(f"tk_{i}_{k}", -1.0) for k in tours], "=", 0.0)
        limit = self.opts.tour_limit
        if limit is None and self.mode == "rmt":
            limit = self.inst.problem.budget
        for k in tours:
            terms = [(f"xk_{i}_{j}_{k}", self.closed.d(i, j)) for i, j in pairs]
            terms += [(f"tk_{i}_{k}", 1.0) for i in range(1, n + 1)]
            self.travel.extend((f"xk_{i}_{j}_{k}", self.closed.d(i, j)) for i, j in pairs)
            if limit is not None:
                m.add_con(f"time_{k}", terms, "<=", limit)

    def run(self) -> MIPModel:
        self.check_structure()
        if self.opts.multi:
            self.multi_tour()
        elif len(self.bases) == 1:
            self.single_base()
        else:
            self.multi_base()
        self.objective()
        return self.model


def build(instance: Instance, graph: Union[ClosedGraph, SplitGraph, None] = None,
          pwl_curves: Optional[Sequence[PWLCurve]] = None, options: Optional[BuildOptions] = None) -> MIPModel:
    """Build the rmt or bmt model of ``instance``.

    ``graph`` defaults to the shortest-path closure of the instance and
    ``pwl_curves`` to :func:`default_curves`.
    """
    options = options or BuildOptions()
    if graph is None:
        closed = transitive_closure(instance)
    elif isinstance(graph, SplitGraph):
        closed = graph.closed
    else:
        closed = graph
    if closed.n != instance.n:
        raise ModelError("graph and instance disagree on the number of POIs")
    mode = options.mode or instance.problem.mode
    if pwl_curves is None:
        pwl_curves = default_curves(instance, mode, options.epsilon)
    if len(pwl_curves) != instance.n:
        raise ModelError("one PWL curve per POI is required")
    for c in pwl_curves:
        if not isinstance(c, PWLCurve):
            raise ModelError("pwl_curves must be PWLCurve objects")
    if mode != instance.problem.mode:
        raise ModelError(f"options ask for {mode} but the instance carries a {instance.problem.mode} problem")
    return _Builder(instance, closed, pwl_curves, options).run()


# ---------------------------------------------------------------------------
# reading solutions back


def _is_one(values: Mapping[str, float], name: str) -> bool:
    return name in values and values[name] > 0.5


def _check_binaries(model: MIPModel, values: Mapping[str, float], tol: float = 1e-6) -> None:
    for v in model.variables:
        if v.is_integral:
            x = values[v.name]
            if abs(x - round(x)) > tol:
                raise ExtractionError(f"variable {v.name} is fractional ({x})")


def _edges_on(model: MIPModel, values: Mapping[str, float], role: str = "edge") -> List[Tuple]:
    return [model.registry[name].key for name in model.names_with_role(role) if values[name] > 0.5]


def _expand(closed: ClosedGraph, seq: Sequence[int]) -> Tuple[int, ...]:
    walk = [seq[0]]
    for a, b in zip(seq, seq[1:]):
        walk.extend(reconstruct_path(closed, a, b)[1:])
    return tuple(walk)


def _stays(instance: Instance, seq: Sequence[int], values: Mapping[str, float], key: str = "t_{i}"):
    bases = set(instance.bases)
    out = []
    seen = set()
    for i in seq:
        if i in seen:
            continue
        seen.add(i)
        t = max(0.0, values.get(key.format(i=i), 0.0))
        if t < 1e-9:
            t = 0.0
        if i in bases and t == 0.0:
            continue
        out.append((i, t))
    return tuple(out)


def _finish(instance: Instance, closed: ClosedGraph, seq: List[int], stays, values, start: int, end: int,
            reward_names: Sequence[str]) -> Itinerary:
    walk = _expand(closed, seq)
    draft = Itinerary(stays, walk, start, 0.0, 0.0, 0.0, end)
    total = eval_total_time(instance, draft)
    model_reward = float(sum(values[w] for w in reward_names))
    return Itinerary(stays, walk, start, total, model_reward, eval_total_reward(instance, draft), end)


def extract_itinerary(instance: Instance, closed: Optional[ClosedGraph], model: MIPModel,
                      assignment: Mapping[str, float]) -> Itinerary:
    """Follow the chosen meta-edges from the selected base and expand them to a walk."""
    closed = closed or transitive_closure(instance)
    values = dict(assignment)
    _check_binaries(model, values)
    if model.names_with_role("edge_tour"):
        raise ExtractionError("multi-tour model: use extract_tours")
    edges = _edges_on(model, values)
    succ: Dict[int, List[int]] = defaultdict(list)
    for i, j in edges:
        succ[i].append(j)
    if any(len(v) > 1 for v in succ.values()):
        raise ExtractionError("a vertex has more than one outgoing edge")
    bases = instance.bases
    multi = len(bases) > 1
    if multi:
        starts = [b for b in bases if _is_one(values, f"g_oout_{b}")]
        if len(starts) != 1:
            raise ExtractionError(f"expected exactly one selected base, found {starts}")
        start = starts[0]
    else:
        start = bases[0]
    seq = [start]
    used = 0
    cur = start
    end = start
    while True:
        nxt = succ.get(cur, [])
        if not nxt:
            break
        cur = nxt[0]
        used += 1
        seq.append(cur)
        if used > len(edges):
            raise ExtractionError("edge successors do not form a simple cycle")
        if cur == start:
            break
        if multi and cur in bases and not _is_one(values, f"g_inout_{cur}"):
            end = cur
            break
    if used != len(edges):
        raise ExtractionError(f"assignment encodes more than one cycle ({len(edges) - used} edges off the tour)")
    if len(seq) > 1 and seq[-1] == start:
        seq_stays = seq[:-1]
    else:
        seq_stays = seq
    stays = _stays(instance, seq_stays, values)
    reward_names = [f"w_{i}" for i in range(1, instance.n + 1)]
    return _finish(instance, closed, seq, stays, values, start, end, reward_names)


def extract_tours(instance: Instance, closed: Optional[ClosedGraph], model: MIPModel,
                  assignment: Mapping[str, float]) -> List[Itinerary]:
    """One itinerary per tour of a multi-tour model (a single-tour model yields one)."""
    if not model.names_with_role("edge_tour"):
        return [extract_itinerary(instance, closed, model, assignment)]
    closed = closed or transitive_closure(instance)
    values = dict(assignment)
    _check_binaries(model, values)
    edges = _edges_on(model, values, "edge_tour")
    tours = sorted({model.registry[n].key[1] for n in model.names_with_role("anchor")})
    out = []
    for k in tours:
        anchors = [b for b in instance.bases if _is_one(values, f"sk_{b}_{k}")]
        if len(anchors) != 1:
            raise ExtractionError(f"tour {k} has anchors {anchors}")
        start = anchors[0]
        succ = {i: j for i, j, kk in edges if kk == k}
        count = sum(1 for e in edges if e[2] == k)
        seq = [start]
        cur = start
        while cur in succ and len(seq) <= count + 1:
            cur = succ[cur]
            seq.append(cur)
            if cur == start:
                break
        if len(seq) - 1 != count:
            raise ExtractionError(f"tour {k} contains a sub-tour")
        stays = _stays(instance, seq[:-1] if len(seq) > 1 else seq, values, key="tk_{i}_" + str(k))
        visited = {i for i, _ in stays}
        # reward of a POI is booked to the tour that stays there
        reward = [f"w_{i}" for i in sorted(visited)]
        out.append(_finish(instance, closed, seq, stays, values, start, start, reward))
    return out


def decode_cycles(model: MIPModel, assignment: Mapping[str, float]) -> List[List[int]]:
    """Cycles formed by the selected meta-edges and self-loops, each as a vertex list."""
    succ: Dict[int, int] = {}
    cycles: List[List[int]] = []
    for name in model.names_with_role("self_loop"):
        if assignment[name] > 0.5:
            cycles.append([model.registry[name].key[0]])
    for name in model.names_with_role("edge"):
        if assignment[name] > 0.5:
            i, j = model.registry[name].key
            succ[i] = j
    multi_base = bool(model.names_with_role("gadget_oout"))
    if multi_base:
        # a pass-through base joins its in and out copies; the origin closes the tour
        for name in model.names_with_role("gadget_outin"):
            b = model.registry[name].key[0]
            if assignment[name] > 0.5 and assignment[f"g_inout_{b}"] < 0.5 and b not in succ:
                cycles.append([b])
    seen = set()
    for s in sorted(succ):
        if s in seen:
            continue
        path = []
        cur = s
        while cur not in seen and cur in succ:
            seen.add(cur)
            path.append(cur)
            cur = succ[cur]
        if cur in path:
            cycles.append(path[path.index(cur):])
    return cycles


def validate_assignment(instance: Instance, model: MIPModel, assignment: Mapping[str, float],
                        tol: float = 1e-6) -> List[str]:
    """Every problem found with ``assignment``; an empty list means it is a valid plan."""
    problems: List[str] = []
    values = dict(assignment)
    missing = [v.name for v in model.variables if v.name not in values]
    if missing:
        return [f"missing values for {len(missing)} variables, e.g. {missing[0]}"]
    for con in model.constraints:
        viol = con.violation(values)
        scale = 1.0 + sum(abs(c * values[v]) for v, c in con.terms)
        if viol > tol * scale:
            problems.append(f"row {con.name} violated by {viol:.3g}")
    for v in model.variables:
        x = values[v.name]
        if x < v.lo - tol or x > v.hi + tol:
            problems.append(f"variable {v.name}={x:.6g} outside [{v.lo}, {v.hi}]")
        if v.is_integral and abs(x - round(x)) > tol:
            problems.append(f"variable {v.name}={x:.6g} is not integral")
    if not any("not integral" in p for p in problems):
        try:
            its = extract_tours(instance, None, model, values)
        except (ExtractionError, InstanceError) as exc:
            problems.append(f"not a single tour: {exc}")
        else:
            prob = instance.problem
            total = sum(it.total_time for it in its)
            reward = sum(values[f"w_{i}"] for i in range(1, instance.n + 1))
            if prob.mode == "rmt" and not model.names_with_role("edge_tour") and \
                    total > prob.budget + tol * max(1.0, prob.budget):
                problems.append(f"total time {total:.6g} exceeds budget {prob.budget}")
            if prob.mode == "bmt" and reward < prob.requirement - tol * max(1.0, prob.requirement):
                problems.append(f"reward {reward:.6g} below requirement {prob.requirement}")
    return problems
