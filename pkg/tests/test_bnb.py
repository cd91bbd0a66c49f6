import math

import numpy as np
import pytest
from scipy.optimize import Bounds, LinearConstraint, milp

from tourplan.model import build
from tourplan.instances import gen_grid, GridSpec, t1
from tourplan.solver import DEFAULT_THRESHOLDS, MIPModel, SolveConfig, gap, solve_mip


def _random_mip(seed):
    rng = np.random.default_rng(seed)
    n, m = int(rng.integers(3, 9)), int(rng.integers(2, 7))
    A = rng.integers(-3, 6, size=(m, n)).astype(float)
    b = rng.uniform(3, 15, m)
    c = rng.uniform(-5, 5, n)
    kinds = rng.choice(["binary", "integer", "continuous"], n)
    model = MIPModel(f"r{seed}")
    for j in range(n):
        model.add_var(f"v{j}", str(kinds[j]), 0.0, 1.0 if kinds[j] == "binary" else 4.0)
    for i in range(m):
        model.add_con(f"r{i}", [(f"v{j}", A[i, j]) for j in range(n)], "<=", b[i])
    model.set_objective("max", [(f"v{j}", c[j]) for j in range(n)])
    ref = milp(-c, constraints=LinearConstraint(A, -np.inf, b), integrality=(kinds != "continuous").astype(int),
               bounds=Bounds(0, np.where(kinds == "binary", 1.0, 4.0)))
    return model, -ref.fun


@pytest.mark.parametrize("seed", range(25))
def test_random_mips_against_highs(seed):
    model, ref = _random_mip(seed)
    res = solve_mip(model, SolveConfig(time_limit=30))
    assert res.status == "optimal"
    assert res.objective == pytest.approx(ref, rel=1e-7, abs=1e-7)
    x = res.assignment
    for con in model.constraints:
        assert con.violation(x) <= 1e-6
    for v in model.variables:
        if v.is_integral:
            assert x[v.name] == round(x[v.name])


def test_gap_function():
    assert gap(None, 5.0) == 1.0
    assert gap(10.0, 12.0) == pytest.approx(0.2)
    assert gap(10.0, 8.0, "min") == pytest.approx(0.2)
    assert gap(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        gap(10.0, 5.0, "max")
    with pytest.raises(ValueError):
        gap(1.0, None)


def test_config_validation():
    with pytest.raises(ValueError):
        SolveConfig(gap_thresholds=(0.1, 0.5))
    with pytest.raises(ValueError):
        SolveConfig(threads=0)
    assert SolveConfig(threads=4).threads == 1  # deterministic forces one thread


def _check_event_stream(events, thresholds=DEFAULT_THRESHOLDS):
    gaps = [e.gap for e in events]
    assert all(b <= a + 1e-12 for a, b in zip(gaps, gaps[1:]))
    crossed = [e.threshold for e in events if e.kind == "threshold_crossed"]
    assert crossed == sorted(crossed, reverse=True)
    assert len(set(crossed)) == len(crossed)
    for e in events:
        if e.kind == "threshold_crossed":
            assert e.gap <= e.threshold
    incs = [e.incumbent for e in events if e.kind == "new_incumbent"]
    assert all(b >= a - 1e-9 for a, b in zip(incs, incs[1:]))
    assert events[-1].kind == "done"
    return crossed


def test_event_stream_on_t1():
    res = solve_mip(build(t1()), SolveConfig())
    crossed = _check_event_stream(res.events)
    assert crossed == list(DEFAULT_THRESHOLDS)
    assert res.final_event.gap == 0.0


def test_gap_stop_and_node_limit():
    m = build(gen_grid(GridSpec(3, 3, 1)))
    loose = solve_mip(m, SolveConfig(target_gap=0.5))
    assert loose.stop_reason in ("gap", "exhausted") and loose.gap <= 0.5
    _check_event_stream(loose.events)
    capped = solve_mip(m, SolveConfig(node_limit=3))
    assert capped.nodes <= 3 + 1
    assert capped.stop_reason in ("node_limit", "exhausted")


def test_time_limit_without_incumbent_is_reported():
    m = build(gen_grid(GridSpec(4, 5, 7)))
    res = solve_mip(m, SolveConfig(time_limit=0.0))
    assert res.stop_reason == "time_limit"
    assert res.status == "no_solution" and res.assignment is None


def test_infeasible_mip():
    m = MIPModel()
    m.add_var("x", "integer", 0, 10)
    m.add_con("a", [("x", 2)], "=", 3)
    m.set_objective("max", [("x", 1)])
    res = solve_mip(m)
    assert res.status == "infeasible" and res.assignment is None
    assert res.events[-1].kind == "done"


def test_unbounded_mip():
    m = MIPModel()
    m.add_var("x", "integer", 0, math.inf)
    m.set_objective("max", [("x", 1)])
    assert solve_mip(m).status == "unbounded"


def test_deterministic_reruns_identical():
    m = build(gen_grid(GridSpec(2, 3, 2), curve="exponential"))
    a = solve_mip(m, SolveConfig())
    b = solve_mip(m, SolveConfig())
    assert [e.values() for e in a.events] == [e.values() for e in b.events]
    assert a.assignment == b.assignment


def test_threads_give_same_optimum():
    m = build(gen_grid(GridSpec(2, 3, 4)))
    one = solve_mip(m, SolveConfig())
    many = solve_mip(m, SolveConfig(threads=3, deterministic=False))
    assert many.status == "optimal"
    assert many.objective == pytest.approx(one.objective, abs=1e-7)
    _check_event_stream(many.events)


def test_start_values():
    inst = t1()
    m = build(inst)
    hint = {name: 0.0 for name in m.names_with_role("edge")}
    hint.update({"x_1_2": 1, "x_2_3": 1, "x_3_1": 1, "x_1_1": 0})
    res = solve_mip(m, SolveConfig(), start=hint)
    assert res.objective == pytest.approx(11.0)
    first = next(e for e in res.events if e.kind == "new_incumbent")
    assert first.incumbent == pytest.approx(11.0)
    with pytest.raises(ValueError):
        solve_mip(m.matrix(), start=hint)
    # an infeasible hint is simply ignored
    bad = {"x_1_2": 1, "x_2_1": 1, "x_2_3": 1}
    assert solve_mip(m, start=bad).objective == pytest.approx(11.0)
