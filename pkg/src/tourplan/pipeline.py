"""End-to-end planning: closure, curve approximation, model, solve, itinerary."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

from .core import Instance, Itinerary
from .curves import PWLCurve, approximate, is_nondecreasing, monotonize
from .graph import ClosedGraph, transitive_closure
from .heuristic import greedy_tour, tour_hint
from .model import BuildOptions, build, extract_tours
from .solver import DEFAULT_THRESHOLDS, MIPModel, MIPResult, SolveConfig, SolveEvent, solve_mip


@dataclass(frozen=True)
class PlanConfig:
    """Solve settings.

    ``flavor`` overrides the approximation flavor; by default rmt uses a band
    curve at ``epsilon / 2`` and bmt an upper curve at ``epsilon``. A band
    curve is always built at ``epsilon / 2``.
    """

    epsilon: float = 0.05
    flavor: Optional[str] = None
    gap: float = 0.0
    time_limit: float = 600.0
    threads: int = 1
    deterministic: bool = True
    tours: str = "single"
    m: int = 1
    tour_limit: Optional[float] = None
    cyclic: bool = True
    heuristic: bool = True
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS
    node_limit: Optional[int] = None

    def solve_config(self) -> SolveConfig:
        return SolveConfig(time_limit=self.time_limit, gap_thresholds=self.thresholds, target_gap=self.gap,
                           deterministic=self.deterministic, threads=self.threads, node_limit=self.node_limit)


@dataclass
class PlanResult:
    status: str
    model: MIPModel
    closed: ClosedGraph
    curves: List[PWLCurve]
    mip: Optional[MIPResult] = None
    itineraries: List[Itinerary] = field(default_factory=list)

    @property
    def itinerary(self) -> Optional[Itinerary]:
        return self.itineraries[0] if self.itineraries else None

    @property
    def objective(self) -> Optional[float]:
        return self.mip.objective if self.mip else None


def pwl_curves(instance: Instance, epsilon: float, flavor: Optional[str] = None) -> List[PWLCurve]:
    flavor = flavor or ("band" if instance.problem.mode == "rmt" else "upper")
    out = []
    for poi in instance.pois:
        spec = poi.curve
        if not is_nondecreasing(spec):
            spec = monotonize(spec)
        if flavor == "band":
            out.append(approximate(spec, epsilon / 2, flavor="band", method="greedy"))
        else:
            out.append(approximate(spec, epsilon, flavor="upper"))
    return out


def prepare(instance: Instance, config: Optional[PlanConfig] = None):
    """Closure, PWL curves and model for ``instance``."""
    config = config or PlanConfig()
    closed = transitive_closure(instance)
    curves = pwl_curves(instance, config.epsilon, config.flavor)
    opts = BuildOptions(epsilon=config.epsilon, tours=config.tours, m=config.m,
                        tour_limit=config.tour_limit, cyclic=config.cyclic)
    model = build(instance, closed, curves, opts)
    return closed, curves, model


def plan(instance: Instance, config: Optional[PlanConfig] = None,
         event_sink: Optional[Callable[[SolveEvent], None]] = None) -> PlanResult:
    config = config or PlanConfig()
    closed, curves, model = prepare(instance, config)
    hint = None
    if config.heuristic and config.tours == "single":
        tour = greedy_tour(instance, closed, curves)
        if tour is not None:
            hint = tour_hint(model, tour, instance.bases)
    mip = solve_mip(model, config.solve_config(), event_sink, start=hint)
    result = PlanResult(mip.status, model, closed, curves, mip)
    if mip.assignment is not None:
        result.itineraries = extract_tours(instance, closed, model, mip.assignment)
    return result

