import pytest

from tourplan.core import Problem
from tourplan.graph import transitive_closure
from tourplan.heuristic import greedy_tour, tour_hint
from tourplan.instances import GridSpec, gen_grid, gen_random, t1
from tourplan.model import BuildOptions, build, default_curves
from tourplan.oracle import oracle_rmt
from tourplan.solver import SolveConfig, solve_mip


def _setup(inst):
    cl = transitive_closure(inst)
    curves = default_curves(inst, inst.problem.mode, 0.05)
    return cl, curves, build(inst, cl, curves)


def test_t1_tour_is_optimal():
    inst = t1()
    cl, curves, m = _setup(inst)
    tour = greedy_tour(inst, cl, curves)
    assert tour[0] == 1 and sorted(tour) == [1, 2, 3]
    hint = tour_hint(m, tour, inst.bases)
    assert hint["x_1"] == hint["x_2"] == hint["x_3"] == 1.0
    assert hint["x_1_1"] == 0.0
    assert sum(hint[n] for n in m.names_with_role("edge")) == 3


def test_home_only_tour_sets_self_loop():
    inst = t1(Problem.rmt(0.5))
    cl, curves, m = _setup(inst)
    tour = greedy_tour(inst, cl, curves)
    assert tour == [1]
    hint = tour_hint(m, tour, inst.bases)
    assert hint["x_1_1"] == 1.0


def test_multi_base_hint_is_feasible():
    inst = t1(Problem.rmt(6.0), second_base=True)
    cl, curves, m = _setup(inst)
    tour = greedy_tour(inst, cl, curves)
    hint = tour_hint(m, tour, inst.bases)
    start = tour[0]
    assert hint[f"g_oout_{start}"] == 1.0
    res = solve_mip(m, SolveConfig(), start=hint)
    first = next(e for e in res.events if e.kind == "new_incumbent")
    assert first.nodes == 0  # the hint produced the first incumbent
    assert res.objective == pytest.approx(oracle_rmt(inst).value)


def test_multi_tour_models_get_no_hint():
    inst = t1(Problem.rmt(8.0), second_base=True)
    m = build(inst, options=BuildOptions(tours="shared", m=2, tour_limit=4))
    assert tour_hint(m, [1, 2], inst.bases) is None


@pytest.mark.parametrize("seed", range(6))
def test_rmt_tour_within_budget(seed):
    inst = gen_random(6, seed=seed)
    cl, curves, _ = _setup(inst)
    tour = greedy_tour(inst, cl, curves)
    assert tour is not None and tour[0] in inst.bases
    travel = sum(cl.d(a, b) for a, b in zip(tour, tour[1:] + tour[:1])) if len(tour) > 1 else 0.0
    assert travel <= inst.problem.budget + 1e-9


def test_bmt_unreachable_requirement_gives_none():
    inst = t1(Problem.bmt(16.0))
    cl, curves, _ = _setup(inst)
    assert greedy_tour(inst, cl, curves) is not None
    inst2 = t1(Problem.bmt(16.5))
    cl2, curves2 = transitive_closure(inst2), default_curves(inst2, "bmt", 0.05)
    assert greedy_tour(inst2, cl2, curves2) is None


def test_grid_hint_feasible():
    inst = gen_grid(GridSpec(3, 4, 1))
    cl, curves, m = _setup(inst)
    hint = tour_hint(m, greedy_tour(inst, cl, curves), inst.bases)
    res = solve_mip(m, SolveConfig(node_limit=1), start=hint)
    assert res.assignment is not None
