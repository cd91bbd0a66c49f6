import numpy as np
import pytest

from tourplan.core import CurveSpec, Problem
from tourplan.instances import GridSpec, gen_grid, gen_random, t1
from tourplan.model import validate_assignment
from tourplan.oracle import oracle_bmt, oracle_rmt
from tourplan.pipeline import PlanConfig, plan, prepare, pwl_curves


def test_t1_plan():
    res = plan(t1())
    assert res.status == "optimal" and res.objective == pytest.approx(11.0)
    assert res.itinerary.true_reward == pytest.approx(11.0)


def test_bmt_plan():
    inst = t1(Problem.bmt(11.0))
    res = plan(inst)
    assert res.objective == pytest.approx(oracle_bmt(inst).value)


def test_heuristic_off_same_answer():
    inst = gen_random(6, seed=4)
    a = plan(inst, PlanConfig(heuristic=False))
    b = plan(inst)
    assert a.objective == pytest.approx(b.objective, abs=1e-7)
    assert a.objective == pytest.approx(oracle_rmt(inst).value, rel=1e-6)


def test_monotonize_inside_pipeline():
    wobbly = CurveSpec.sampled([(0, 0), (1, 0.6), (2, 0.5), (3, 1.0)])
    inst = t1().with_curves([wobbly] * 3)
    curves = pwl_curves(inst, 0.05)
    assert all(c(2.0) >= 0.6 - 1e-12 for c in curves)
    res = plan(inst)
    assert res.status == "optimal"
    assert validate_assignment(inst, res.model, res.mip.assignment) == []


def test_flavor_override():
    inst = t1().with_curves([CurveSpec.exponential(1.0)] * 3)
    band = pwl_curves(inst, 0.1)
    upper = pwl_curves(inst, 0.1, flavor="upper")
    ts = np.linspace(0.01, 8, 800)
    f = 1 - np.exp(-ts)
    # band runs at half the target accuracy; upper dominates the curve
    assert np.max(np.abs(band[0](ts) - f) / f) <= 0.05 + 1e-9
    assert np.all(upper[0](ts) >= f - 1e-12)
    assert np.max(upper[0](ts) / f) <= 1 / 0.9 + 1e-9


def test_prepare_multi_tour():
    inst = t1(Problem.rmt(8.0), second_base=True)
    _, _, m = prepare(inst, PlanConfig(tours="shared", m=2, tour_limit=4.0))
    assert m.names_with_role("edge_tour")
    res = plan(inst, PlanConfig(tours="shared", m=2, tour_limit=4.0))
    assert len(res.itineraries) == 2


def test_gap_stop_reports_gap():
    res = plan(gen_grid(GridSpec(3, 4, 2)), PlanConfig(gap=0.2))
    assert res.mip.gap <= 0.2
    assert res.itinerary is not None
