import numpy as np
import pytest

from tourplan.core import CurveSpec, Instance, Poi, Problem
from tourplan.graph import split_bases, transitive_closure
from tourplan.instances import gen_random, t1
from tourplan.model import (BuildOptions, ExtractionError, build, decode_cycles, default_curves,
                            extract_itinerary, extract_tours, validate_assignment)
from tourplan.oracle import oracle_rmt
from tourplan.solver import ModelError, SolveConfig, solve_lp, solve_mip


def _solve(model):
    res = solve_mip(model, SolveConfig(time_limit=60))
    assert res.status == "optimal"
    return res


def test_t1_variable_and_row_counts(t1_rmt):
    m = build(t1_rmt)
    assert m.count(kind="binary", role="edge") + m.count(role="self_loop") == 7
    assert m.count(role="visit") == 3
    assert m.count(kind="integer", role="order") == 2
    assert m.count(role="stay") == 3 and m.count(role="reward") == 3
    assert len(m.rows_named("mtz")) == 2
    assert m.has_var("x_1_1") and not m.has_var("u_1")


def test_t1_rmt_optimum_and_extraction(t1_rmt):
    m = build(t1_rmt)
    res = _solve(m)
    assert res.objective == pytest.approx(11.0)
    it = extract_itinerary(t1_rmt, None, m, res.assignment)
    assert sorted(it.stays) == [(2, pytest.approx(1.0)), (3, pytest.approx(1.0))]
    assert it.walk in ((1, 2, 3, 1), (1, 3, 2, 1))
    assert it.total_time == pytest.approx(6.0)
    assert it.true_reward == pytest.approx(11.0) and it.model_reward == pytest.approx(11.0)
    assert validate_assignment(t1_rmt, m, res.assignment) == []


def test_t1_bmt(t1_bmt):
    m = build(t1_bmt)
    res = _solve(m)
    assert res.objective == pytest.approx(6.0)
    assert validate_assignment(t1_bmt, m, res.assignment) == []


def test_lp_relaxation_dominates(t1_rmt):
    lp = solve_lp(build(t1_rmt))
    assert lp.status == "optimal" and lp.objective >= 11.0 - 1e-9


def test_validate_reports_problems(t1_rmt):
    m = build(t1_rmt)
    res = _solve(m)
    bad = dict(res.assignment)
    bad["t_2"] += 5.0
    assert any("time" in p or "violated" in p for p in validate_assignment(t1_rmt, m, bad))
    frac = dict(res.assignment)
    frac["x_2"] = 0.5
    assert any("not integral" in p for p in validate_assignment(t1_rmt, m, frac))
    assert validate_assignment(t1_rmt, m, {})[0].startswith("missing")


def test_zero_budget_stays_home(t1_rmt):
    inst = t1_rmt.with_problem(Problem.rmt(0.0))
    m = build(inst)
    res = _solve(m)
    assert res.objective == pytest.approx(0.0)
    it = extract_itinerary(inst, None, m, res.assignment)
    assert it.walk == (1,) and it.stays == ()
    assert decode_cycles(m, res.assignment) == [[1]]


def test_options_validation():
    with pytest.raises(ModelError):
        BuildOptions(epsilon=0)
    with pytest.raises(ModelError):
        BuildOptions(tours="single", m=2)
    with pytest.raises(ModelError):
        BuildOptions(tours="shared", m=2, cyclic=False)
    with pytest.raises(ModelError):
        BuildOptions(mode="foo")
    with pytest.raises(ModelError):
        build(t1(), options=BuildOptions(mode="bmt"))
    with pytest.raises(ModelError):
        build(t1(), pwl_curves=[])


def test_accepts_split_graph():
    inst = t1(second_base=True)
    sp = split_bases(transitive_closure(inst), inst.bases)
    assert build(inst, sp).num_vars == build(inst).num_vars


def test_multi_base_picks_cheaper_base():
    inst = t1(Problem.rmt(6.0), second_base=True)
    m = build(inst)
    res = _solve(m)
    ref = oracle_rmt(inst)
    assert res.objective == pytest.approx(ref.value)
    it = extract_itinerary(inst, None, m, res.assignment)
    assert it.start_base == ref.itinerary.start_base == 4
    assert sum(res.assignment[f"g_oout_{b}"] for b in inst.bases) == pytest.approx(1.0)


def test_non_cyclic_can_end_elsewhere():
    # two bases far apart; a one-way trip between them is cheaper than any round trip
    pois = (Poi(1, 0.0, CurveSpec.linear(1)), Poi(2, 5.0, CurveSpec.linear(1)), Poi(3, 0.0, CurveSpec.linear(1)))
    edges = ((1, 2, 1.0), (2, 1, 1.0), (2, 3, 1.0), (3, 2, 1.0))
    inst = Instance(pois, (1, 3), edges, Problem.rmt(3.0))
    cyc = _solve(build(inst))
    one_way = build(inst, options=BuildOptions(cyclic=False))
    res = _solve(one_way)
    assert cyc.objective == pytest.approx(oracle_rmt(inst).value) == pytest.approx(5.0)
    assert res.objective == pytest.approx(oracle_rmt(inst, cyclic=False).value)
    assert res.objective >= cyc.objective - 1e-9


def test_nonconcave_curve_uses_activation_and_matches_dp_oracle():
    curve = CurveSpec.sampled([(0, 0), (1, 0.1), (2, 0.7), (3, 1.0)])
    inst = t1(Problem.rmt(6.0)).with_curves([curve, curve, curve])
    m = build(inst)
    assert m.count(role="activation") == 3
    res = _solve(m)
    ref = oracle_rmt(inst, allocator="dp", grid_step=1e-3)
    assert res.objective == pytest.approx(ref.value, abs=1e-2)
    assert res.objective >= ref.value - 1e-9


@pytest.mark.parametrize("tours", ["shared", "disjoint"])
def test_two_tours(tours):
    inst = t1(Problem.rmt(8.0), second_base=True)
    m = build(inst, options=BuildOptions(tours=tours, m=2, tour_limit=4.0))
    res = _solve(m)
    its = extract_tours(inst, None, m, res.assignment)
    assert len(its) == 2
    for it in its:
        assert it.total_time <= 4.0 + 1e-6
    assert sum(it.model_reward for it in its) == pytest.approx(res.objective)
    if tours == "disjoint":
        assert its[0].start_base != its[1].start_base
    with pytest.raises(ExtractionError):
        extract_itinerary(inst, None, m, res.assignment)


def test_feasible_assignments_decode_to_one_tour():
    """Random objectives over the routing binaries still produce single tours."""
    rng = np.random.default_rng(3)
    checked = 0
    for seed in range(6):
        inst = gen_random(6, seed=seed, mode="rmt")
        m = build(inst)
        for _ in range(3):
            terms = list(m.objective) + [(v, float(rng.uniform(-1, 1))) for v in m.names_with_role("edge")]
            m.set_objective(m.sense, terms, m.objective_constant)
            res = solve_mip(m, SolveConfig(time_limit=60))
            assert res.status == "optimal"
            assert validate_assignment(inst, m, res.assignment) == []
            extract_itinerary(inst, None, m, res.assignment)
            checked += 1
    assert checked == 18


def test_default_curves_flavors():
    inst = t1().with_curves([CurveSpec.exponential(1.0)] * 3)
    band = default_curves(inst, "rmt", 0.1)
    upper = default_curves(inst, "bmt", 0.1)
    t = np.linspace(0, 10, 1001)
    f = 1 - np.exp(-t)
    assert np.all(upper[0](t) >= f - 1e-12)
    assert np.max(np.abs(band[0](t[1:]) - f[1:]) / f[1:]) <= 0.05 + 1e-9
