"""Domain types for tour planning with time-dependent rewards.

POIs are identified by 1-based integer ids. Distances, stay durations and
budgets share one time unit; rewards share one reward unit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Mapping, Optional, Sequence, Tuple

import numpy as np


class InstanceError(ValueError):
    """Raised for structurally invalid instances or plans."""


class MissingEdgeError(InstanceError):
    """A walk uses a vertex pair that is not an edge of the instance."""

    def __init__(self, pair: Tuple[int, int]):
        super().__init__(f"walk uses ({pair[0]}, {pair[1]}), which is not an edge")
        self.pair = pair


CURVE_KINDS = ("linear", "exponential", "pwl", "sampled")


@dataclass(frozen=True)
class CurveSpec:
    """A learning curve mapping stay duration to a reward fraction in [0, 1].

    ``linear`` is ``min(rate * t, 1)``, ``exponential`` is ``1 - exp(-rate * t)``,
    ``pwl`` wraps a :class:`tourplan.curves.PWLCurve`, and ``sampled`` is a
    grid of ``(t, value)`` pairs interpolated linearly and held constant after
    the last abscissa.
    """

    kind: str
    rate: Optional[float] = None
    pwl: Any = None
    points: Optional[Tuple[Tuple[float, float], ...]] = None

    def __post_init__(self):
        if self.kind not in CURVE_KINDS:
            raise InstanceError(f"unknown curve kind {self.kind!r}")
        if self.kind in ("linear", "exponential"):
            if self.rate is None or not self.rate > 0 or not math.isfinite(self.rate):
                raise InstanceError(f"{self.kind} curve needs a positive finite rate")
        elif self.kind == "pwl":
            if self.pwl is None:
                raise InstanceError("pwl curve needs a PWLCurve")
        else:
            if not self.points or len(self.points) < 2:
                raise InstanceError("sampled curve needs at least two points")
            pts = tuple((float(t), float(v)) for t, v in self.points)
            ts = [t for t, _ in pts]
            if ts[0] != 0.0:
                raise InstanceError("sampled curve must start at t = 0")
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise InstanceError("sampled abscissae must be strictly increasing")
            if any(v < -1e-12 or v > 1 + 1e-9 for _, v in pts):
                raise InstanceError("sampled values must lie in [0, 1]")
            object.__setattr__(self, "points", pts)

    @classmethod
    def linear(cls, rate: float) -> "CurveSpec":
        return cls("linear", rate=float(rate))

    @classmethod
    def exponential(cls, rate: float) -> "CurveSpec":
        return cls("exponential", rate=float(rate))

    @classmethod
    def from_pwl(cls, pwl) -> "CurveSpec":
        return cls("pwl", pwl=pwl)

    @classmethod
    def sampled(cls, points: Sequence[Tuple[float, float]]) -> "CurveSpec":
        return cls("sampled", points=tuple(points))

    def __call__(self, t: float) -> float:
        from .curves import eval_curve

        return eval_curve(self, t)


@dataclass(frozen=True)
class Poi:
    id: int
    max_reward: float
    curve: CurveSpec

    def __post_init__(self):
        if self.id < 1:
            raise InstanceError(f"POI ids are 1-based, got {self.id}")
        if not self.max_reward >= 0 or not math.isfinite(self.max_reward):
            raise InstanceError(f"POI {self.id}: max_reward must be finite and >= 0")


@dataclass(frozen=True)
class Problem:
    """Either ``rmt`` with a time ``budget`` or ``bmt`` with a reward ``requirement``."""

    mode: str
    budget: Optional[float] = None
    requirement: Optional[float] = None

    def __post_init__(self):
        if self.mode == "rmt":
            if self.budget is None or self.budget < 0:
                raise InstanceError("rmt problem needs a budget >= 0")
        elif self.mode == "bmt":
            if self.requirement is None or self.requirement < 0:
                raise InstanceError("bmt problem needs a requirement >= 0")
        else:
            raise InstanceError(f"unknown problem mode {self.mode!r}")

    @classmethod
    def rmt(cls, budget: float) -> "Problem":
        return cls("rmt", budget=float(budget))

    @classmethod
    def bmt(cls, requirement: float) -> "Problem":
        return cls("bmt", requirement=float(requirement))


@dataclass(frozen=True)
class Instance:
    pois: Tuple[Poi, ...]
    bases: Tuple[int, ...]
    edges: Tuple[Tuple[int, int, float], ...]
    problem: Problem
    meta: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pois = tuple(sorted(self.pois, key=lambda p: p.id))
        ids = [p.id for p in pois]
        if not ids:
            raise InstanceError("instance has no POIs")
        if ids != list(range(1, len(ids) + 1)):
            raise InstanceError("POI ids must be exactly 1..n")
        bases = tuple(sorted(set(int(b) for b in self.bases)))
        if not bases:
            raise InstanceError("instance needs at least one base")
        for b in bases:
            if not 1 <= b <= len(ids):
                raise InstanceError(f"base {b} is not a POI id")
        seen = set()
        edges = []
        for e in self.edges:
            i, j, d = int(e[0]), int(e[1]), float(e[2])
            if not (1 <= i <= len(ids) and 1 <= j <= len(ids)):
                raise InstanceError(f"edge ({i}, {j}) references an unknown POI")
            if i == j:
                raise InstanceError(f"self-loop edge at {i}")
            if not d > 0 or not math.isfinite(d):
                raise InstanceError(f"edge ({i}, {j}) must have positive finite length")
            if (i, j) in seen:
                raise InstanceError(f"duplicate edge ({i}, {j})")
            seen.add((i, j))
            edges.append((i, j, d))
        object.__setattr__(self, "pois", pois)
        object.__setattr__(self, "bases", bases)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n(self) -> int:
        return len(self.pois)

    def poi(self, i: int) -> Poi:
        return self.pois[i - 1]

    def edge_lengths(self) -> Dict[Tuple[int, int], float]:
        return {(i, j): d for i, j, d in self.edges}

    def with_problem(self, problem: Problem) -> "Instance":
        return Instance(self.pois, self.bases, self.edges, problem, self.meta)

    def with_bases(self, bases: Sequence[int]) -> "Instance":
        return Instance(self.pois, tuple(bases), self.edges, self.problem, self.meta)

    def with_curves(self, curves: Sequence[CurveSpec]) -> "Instance":
        pois = tuple(Poi(p.id, p.max_reward, c) for p, c in zip(self.pois, curves))
        return Instance(pois, self.bases, self.edges, self.problem, self.meta)


@dataclass(frozen=True)
class Itinerary:
    """A decoded plan.

    ``stays`` lists ``(poi, duration)`` in visiting order, ``walk`` is the full
    vertex sequence over original edges (pass-through POIs included).
    """

    stays: Tuple[Tuple[int, float], ...]
    walk: Tuple[int, ...]
    start_base: int
    total_time: float
    model_reward: float
    true_reward: float
    end_base: Optional[int] = None

    def durations(self, n: int) -> np.ndarray:
        out = np.zeros(n)
        for i, t in self.stays:
            out[i - 1] += t
        return out

    def to_dict(self) -> dict:
        return {
            "start_base": self.start_base,
            "end_base": self.end_base if self.end_base is not None else self.start_base,
            "stays": [{"poi": i, "duration": t} for i, t in self.stays],
            "walk": list(self.walk),
            "total_time": self.total_time,
            "model_reward": self.model_reward,
            "true_reward": self.true_reward,
        }


def eval_total_time(instance: Instance, itinerary: Itinerary) -> float:
    lengths = instance.edge_lengths()
    total = 0.0
    walk = itinerary.walk
    for a, b in zip(walk, walk[1:]):
        try:
            total += lengths[(a, b)]
        except KeyError:
            raise MissingEdgeError((a, b)) from None
    for _, t in itinerary.stays:
        if t < 0:
            raise InstanceError("negative stay duration")
        total += t
    return total


def eval_total_reward(instance: Instance, itinerary: Itinerary) -> float:
    return eval_reward_durations(instance, itinerary.durations(instance.n))


def eval_reward_durations(instance: Instance, durations: Sequence[float]) -> float:
    """Sum of ``r_i f_i(t_i)`` over a full duration vector indexed by id - 1."""
    from .curves import eval_curve

    total = 0.0
    for poi, t in zip(instance.pois, durations):
        if t < 0:
            raise InstanceError(f"negative duration at POI {poi.id}")
        if t > 0 and poi.max_reward > 0:
            total += poi.max_reward * eval_curve(poi.curve, float(t))
    return total
