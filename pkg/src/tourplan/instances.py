"""Instance generators, POI-table ingestion and the JSON instance document."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .core import CurveSpec, Instance, InstanceError, Poi, Problem
from .curves import PWLCurve

FORMAT_VERSION = 1


class SchemaError(InstanceError):
    """The instance document does not follow the schema."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class GridSpec:
    rows: int
    cols: int
    seed: int = 0

    def __post_init__(self):
        if self.rows < 2 or self.cols < 2:
            raise InstanceError("grid needs rows, cols >= 2")


@dataclass(frozen=True)
class PoiRecord:
    name: str
    rank: int
    n_review: int

    def __post_init__(self):
        if self.rank < 1:
            raise InstanceError(f"{self.name}: rank must be a positive integer")
        if self.n_review < 1:
            raise InstanceError(f"{self.name}: n_review must be a positive integer")


def _curves(kind: str, rates: np.ndarray) -> List[CurveSpec]:
    if kind == "linear":
        return [CurveSpec.linear(float(l)) for l in rates]
    if kind == "exponential":
        return [CurveSpec.exponential(float(l)) for l in rates]
    raise InstanceError(f"unsupported generated curve kind {kind!r}")


def default_bases(n: int) -> Tuple[int, ...]:
    """1-based ids floor(n/3) and floor(2n/3), kept inside 1..n."""
    return tuple(sorted({min(max(n // 3, 1), n), min(max(2 * n // 3, 1), n)}))


def gen_grid(spec: GridSpec, curve: str = "linear", mode: str = "rmt") -> Instance:
    """POIs on a rows x cols unit lattice with 4-neighbour edges.

    Rewards and rates are uniform in [1, 2). The time budget is 1.5 times the
    lattice perimeter and the reward requirement 0.6 times it, where the
    perimeter is ``2 ((rows - 1) + (cols - 1))``.
    """
    rng = np.random.default_rng(spec.seed)
    n = spec.rows * spec.cols
    rewards = rng.uniform(1.0, 2.0, n)
    rates = rng.uniform(1.0, 2.0, n)
    curves = _curves(curve, rates)
    pois = tuple(Poi(i + 1, float(rewards[i]), curves[i]) for i in range(n))

    def pid(r, c):
        return r * spec.cols + c + 1

    edges = []
    for r in range(spec.rows):
        for c in range(spec.cols):
            for dr, dc in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                rr, cc = r + dr, c + dc
                if 0 <= rr < spec.rows and 0 <= cc < spec.cols:
                    edges.append((pid(r, c), pid(rr, cc), 1.0))
    perimeter = 2.0 * ((spec.rows - 1) + (spec.cols - 1))
    problem = Problem.rmt(1.5 * perimeter) if mode == "rmt" else Problem.bmt(0.6 * perimeter)
    meta = {"generator": "grid", "rows": spec.rows, "cols": spec.cols, "seed": spec.seed, "curve": curve,
            "coords": [[float(c), float(r)] for r in range(spec.rows) for c in range(spec.cols)]}
    return Instance(pois, default_bases(n), tuple(edges), problem, meta)


def gen_random(n: int, seed: int = 0, curve: str = "linear", mode: str = "rmt",
               width: Optional[float] = None, height: Optional[float] = None,
               threshold: Optional[float] = None, bases: Optional[Sequence[int]] = None,
               budget: Optional[float] = None, requirement: Optional[float] = None,
               max_retries: int = 100) -> Instance:
    """POIs uniform in an ``n x 1.2 n`` rectangle, joined when closer than ``threshold``.

    Defaults: threshold ``n / 3``, bases ``floor(n/3), floor(2n/3)``, budget
    ``4 sqrt(n)`` and requirement ``2 sqrt(n)``. If no POI can be reached from
    a base and back, the seed is bumped and the draw repeated.
    """
    if n < 2:
        raise InstanceError("gen_random needs n >= 2")
    width = float(n) if width is None else float(width)
    height = 1.2 * n if height is None else float(height)
    threshold = n / 3.0 if threshold is None else float(threshold)
    base_ids = tuple(bases) if bases is not None else default_bases(n)
    budget = 4.0 * math.sqrt(n) if budget is None else float(budget)
    requirement = 2.0 * math.sqrt(n) if requirement is None else float(requirement)
    for attempt in range(max_retries):
        s = seed + attempt
        rng = np.random.default_rng(s)
        xy = np.column_stack([rng.uniform(0, width, n), rng.uniform(0, height, n)])
        rewards = rng.uniform(1.0, 2.0, n)
        rates = rng.uniform(1.0, 2.0, n)
        diff = xy[:, None, :] - xy[None, :, :]
        dist = np.sqrt((diff ** 2).sum(-1))
        edges = [(i + 1, j + 1, float(dist[i, j])) for i in range(n) for j in range(n)
                 if i != j and dist[i, j] <= threshold and dist[i, j] > 0]
        if not _base_reaches_something(n, base_ids, edges):
            continue
        curves = _curves(curve, rates)
        pois = tuple(Poi(i + 1, float(rewards[i]), curves[i]) for i in range(n))
        problem = Problem.rmt(budget) if mode == "rmt" else Problem.bmt(requirement)
        meta = {"generator": "random", "n": n, "seed": seed, "effective_seed": s, "curve": curve,
                "threshold": threshold, "width": width, "height": height,
                "coords": xy.round(12).tolist()}
        return Instance(pois, base_ids, tuple(edges), problem, meta)
    raise InstanceError(f"no connected draw within {max_retries} seeds starting at {seed}")


def _base_reaches_something(n: int, bases: Sequence[int], edges) -> bool:
    adj = {i: set() for i in range(1, n + 1)}
    for i, j, _ in edges:
        adj[i].add(j)
    for b in bases:
        if adj[b] & set(j for j in adj if b in adj[j]):
            return True
    return False


def poi_reward(record: PoiRecord) -> float:
    return float(np.cbrt(record.n_review)) + 10.0 - record.rank / 5.0


def ingest_poi_table(records: Sequence[PoiRecord], distances, base_ranks: Sequence[int] = (1, 6, 11, 16),
                     mode: str = "rmt", budget: float = 480.0, requirement: Optional[float] = None) -> Instance:
    """Instance from ranked, reviewed POIs and a travel-time matrix.

    ``distances[a][b]`` is the travel time from the a-th to the b-th record
    after sorting by rank; non-positive or infinite entries mean no edge.
    Rewards follow ``cbrt(n_review) + 10 - rank / 5`` and exponential
    rates ``1 - 0.01 r``.
    """
    recs = sorted(records, key=lambda r: r.rank)
    ranks = [r.rank for r in recs]
    if len(set(ranks)) != len(ranks):
        raise InstanceError("duplicate ranks in POI table")
    d = np.asarray(distances, dtype=float)
    if d.shape != (len(recs), len(recs)):
        raise InstanceError(f"distance matrix must be {len(recs)}x{len(recs)}")
    pois = []
    for k, rec in enumerate(recs):
        r = poi_reward(rec)
        lam = 1.0 - 0.01 * r
        if not lam > 0:
            raise InstanceError(f"{rec.name}: reward {r:.4g} gives a non-positive learning rate")
        pois.append(Poi(k + 1, r, CurveSpec.exponential(lam)))
    rank_to_id = {rec.rank: k + 1 for k, rec in enumerate(recs)}
    missing = [b for b in base_ranks if b not in rank_to_id]
    if missing:
        raise InstanceError(f"base ranks {missing} are not in the table")
    edges = []
    for a in range(len(recs)):
        for b in range(len(recs)):
            if a != b and math.isfinite(d[a, b]) and d[a, b] > 0:
                edges.append((a + 1, b + 1, float(d[a, b])))
    if mode == "rmt":
        problem = Problem.rmt(budget)
    else:
        problem = Problem.bmt(requirement if requirement is not None else 0.0)
    meta = {"generator": "ingest", "names": [rec.name for rec in recs],
            "ranks": ranks, "n_review": [rec.n_review for rec in recs]}
    return Instance(tuple(pois), tuple(rank_to_id[b] for b in base_ranks), tuple(edges), problem, meta)


def t1(problem: Optional[Problem] = None, second_base: bool = False) -> Instance:
    """Three-POI fixture: base 1 (reward 0), POI 2 (reward 10, rate 0.5), POI 3 (reward 6, rate 1).

    Distances are d(1,2) = d(2,3) = 1 and d(1,3) = 2. With ``second_base`` a
    zero-reward base 4 is attached to POI 3 at distance 0.5.
    """
    pois = [Poi(1, 0.0, CurveSpec.linear(1.0)), Poi(2, 10.0, CurveSpec.linear(0.5)),
            Poi(3, 6.0, CurveSpec.linear(1.0))]
    edges = [(1, 2, 1.0), (2, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0), (1, 3, 2.0), (3, 1, 2.0)]
    bases = [1]
    if second_base:
        pois.append(Poi(4, 0.0, CurveSpec.linear(1.0)))
        edges += [(3, 4, 0.5), (4, 3, 0.5)]
        bases.append(4)
    return Instance(tuple(pois), tuple(bases), tuple(edges), problem or Problem.rmt(6.0),
                    {"generator": "t1"})


# ---------------------------------------------------------------------------
# JSON document


def curve_to_dict(curve: CurveSpec) -> Dict[str, Any]:
    if curve.kind in ("linear", "exponential"):
        return {"kind": curve.kind, "rate": curve.rate}
    if curve.kind == "pwl":
        return {"kind": "pwl", "breakpoints": [list(p) for p in curve.pwl.breakpoints],
                "unbounded": curve.pwl.final_segment_unbounded}
    return {"kind": "sampled", "points": [list(p) for p in curve.points]}


def instance_to_dict(instance: Instance) -> Dict[str, Any]:
    prob = instance.problem
    problem = {"mode": prob.mode}
    if prob.mode == "rmt":
        problem["budget"] = prob.budget
    else:
        problem["requirement"] = prob.requirement
    doc = {
        "format": FORMAT_VERSION,
        "pois": [{"id": p.id, "reward": p.max_reward, "curve": curve_to_dict(p.curve)} for p in instance.pois],
        "bases": list(instance.bases),
        "edges": [{"from": i, "to": j, "length": d} for i, j, d in instance.edges],
        "problem": problem,
    }
    if instance.meta:
        doc["meta"] = dict(instance.meta)
    return doc


def write_instance(instance: Instance, indent: Optional[int] = 1) -> str:
    return json.dumps(instance_to_dict(instance), indent=indent, sort_keys=False)


def _need(obj: Dict[str, Any], key: str, path: str):
    if not isinstance(obj, dict):
        raise SchemaError(path, "expected an object")
    if key not in obj:
        raise SchemaError(f"{path}.{key}", "missing required field")
    return obj[key]


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise SchemaError(path, f"expected a number, got {type(value).__name__}")
    return float(value)


def _integer(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise SchemaError(path, f"expected an integer, got {value!r}")
    return value


def curve_from_dict(obj: Dict[str, Any], path: str) -> CurveSpec:
    kind = _need(obj, "kind", path)
    try:
        if kind in ("linear", "exponential"):
            rate = _number(_need(obj, "rate", path), f"{path}.rate")
            return CurveSpec(kind, rate=rate)
        if kind == "pwl":
            bps = _need(obj, "breakpoints", path)
            pts = [(_number(p[0], f"{path}.breakpoints[{k}][0]"), _number(p[1], f"{path}.breakpoints[{k}][1]"))
                   for k, p in enumerate(bps)]
            return CurveSpec.from_pwl(PWLCurve(tuple(pts), bool(obj.get("unbounded", True))))
        if kind == "sampled":
            pts = _need(obj, "points", path)
            return CurveSpec.sampled([(_number(p[0], f"{path}.points[{k}][0]"),
                                       _number(p[1], f"{path}.points[{k}][1]")) for k, p in enumerate(pts)])
    except SchemaError:
        raise
    except (ValueError, TypeError, IndexError) as exc:
        raise SchemaError(path, str(exc)) from None
    raise SchemaError(f"{path}.kind", f"unknown curve kind {kind!r}")


def instance_from_dict(doc: Dict[str, Any]) -> Instance:
    if not isinstance(doc, dict):
        raise SchemaError("$", "document must be an object")
    pois_raw = _need(doc, "pois", "$")
    if not isinstance(pois_raw, list):
        raise SchemaError("$.pois", "expected a list")
    pois = []
    for k, p in enumerate(pois_raw):
        path = f"$.pois[{k}]"
        pid = _integer(_need(p, "id", path), f"{path}.id")
        reward = _number(_need(p, "reward", path), f"{path}.reward")
        curve = curve_from_dict(_need(p, "curve", path), f"{path}.curve")
        try:
            pois.append(Poi(pid, reward, curve))
        except InstanceError as exc:
            raise SchemaError(path, str(exc)) from None
    bases_raw = _need(doc, "bases", "$")
    if not isinstance(bases_raw, list):
        raise SchemaError("$.bases", "expected a list")
    bases = [_integer(b, f"$.bases[{k}]") for k, b in enumerate(bases_raw)]
    edges_raw = _need(doc, "edges", "$")
    if not isinstance(edges_raw, list):
        raise SchemaError("$.edges", "expected a list")
    edges = []
    for k, e in enumerate(edges_raw):
        path = f"$.edges[{k}]"
        edges.append((_integer(_need(e, "from", path), f"{path}.from"),
                      _integer(_need(e, "to", path), f"{path}.to"),
                      _number(_need(e, "length", path), f"{path}.length")))
    prob_raw = _need(doc, "problem", "$")
    mode = _need(prob_raw, "mode", "$.problem")
    try:
        if mode == "rmt":
            problem = Problem.rmt(_number(_need(prob_raw, "budget", "$.problem"), "$.problem.budget"))
        elif mode == "bmt":
            problem = Problem.bmt(_number(_need(prob_raw, "requirement", "$.problem"), "$.problem.requirement"))
        else:
            raise SchemaError("$.problem.mode", f"unknown mode {mode!r}")
    except InstanceError as exc:
        if isinstance(exc, SchemaError):
            raise
        raise SchemaError("$.problem", str(exc)) from None
    meta = doc.get("meta", {})
    if not isinstance(meta, dict):
        raise SchemaError("$.meta", "expected an object")
    try:
        return Instance(tuple(pois), tuple(bases), tuple(edges), problem, meta)
    except SchemaError:
        raise
    except InstanceError as exc:
        raise SchemaError("$", str(exc)) from None


def read_instance(text: str) -> Instance:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None
    return instance_from_dict(doc)


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return read_instance(fh.read())


def save_instance(instance: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_instance(instance))
        fh.write("\n")
