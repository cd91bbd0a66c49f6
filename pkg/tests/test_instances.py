import json
import math
import os

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tourplan.core import CurveSpec, InstanceError, Problem
from tourplan.curves import PWLCurve
from tourplan.graph import transitive_closure
from tourplan.instances import (GridSpec, PoiRecord, SchemaError, default_bases, gen_grid, gen_random,
                                ingest_poi_table, instance_from_dict, instance_to_dict, load_instance,
                                poi_reward, read_instance, save_instance, t1, write_instance)

GOLDEN = os.path.join(os.path.dirname(__file__), "..", "docs", "golden")


def test_grid_shape():
    inst = gen_grid(GridSpec(4, 5, 7))
    assert inst.n == 20
    # 4-neighbour lattice, both directions
    assert len(inst.edges) == 2 * (4 * 4 + 3 * 5)
    assert all(d == 1.0 for _, _, d in inst.edges)
    assert inst.bases == default_bases(20) == (6, 13)
    assert inst.problem.budget == pytest.approx(1.5 * 2 * (3 + 4))
    for p in inst.pois:
        assert 1 <= p.max_reward < 2 and 1 <= p.curve.rate < 2
    assert gen_grid(GridSpec(4, 5, 7), mode="bmt").problem.requirement == pytest.approx(0.6 * 14)


def test_grid_deterministic():
    assert write_instance(gen_grid(GridSpec(3, 3, 5))) == write_instance(gen_grid(GridSpec(3, 3, 5)))
    assert write_instance(gen_grid(GridSpec(3, 3, 5))) != write_instance(gen_grid(GridSpec(3, 3, 6)))
    with pytest.raises(InstanceError):
        GridSpec(1, 5)


@pytest.mark.parametrize("n", [4, 6, 9])
def test_random_protocol(n):
    inst = gen_random(n, seed=n)
    assert inst.n == n
    assert inst.problem.budget == pytest.approx(4 * math.sqrt(n))
    assert inst.bases == default_bases(n)
    xy = np.array(inst.meta["coords"])
    assert np.all(xy[:, 0] <= n) and np.all(xy[:, 1] <= 1.2 * n)
    for i, j, d in inst.edges:
        assert d == pytest.approx(np.linalg.norm(xy[i - 1] - xy[j - 1]), abs=1e-9)
        assert d <= n / 3 + 1e-12
    cl = transitive_closure(inst)
    assert any(cl.reachable(b, j) and cl.reachable(j, b) for b in inst.bases for j in range(1, n + 1) if j != b)
    assert gen_random(n, seed=n, mode="bmt").problem.requirement == pytest.approx(2 * math.sqrt(n))


def test_random_exponential_and_errors():
    assert gen_random(5, seed=1, curve="exponential").poi(1).curve.kind == "exponential"
    with pytest.raises(InstanceError):
        gen_random(5, curve="cubic")
    with pytest.raises(InstanceError):
        gen_random(1)


def test_ingest_formula():
    recs = [PoiRecord("a", 2, 1000), PoiRecord("b", 1, 8), PoiRecord("c", 3, 27)]
    d = [[0, 5, np.inf], [5, 0, 7], [np.inf, 7, 0]]
    inst = ingest_poi_table(recs, d, base_ranks=(1,), budget=60)
    # sorted by rank: b, a, c
    assert inst.poi(1).max_reward == pytest.approx(2 + 10 - 1 / 5)
    assert inst.poi(2).max_reward == pytest.approx(10 + 10 - 2 / 5)
    assert inst.poi(1).curve.rate == pytest.approx(1 - 0.01 * inst.poi(1).max_reward)
    assert inst.bases == (1,)
    assert sorted((i, j) for i, j, _ in inst.edges) == [(1, 2), (2, 1), (2, 3), (3, 2)]
    assert poi_reward(PoiRecord("x", 5, 125)) == pytest.approx(5 + 10 - 1)


def test_ingest_errors():
    recs = [PoiRecord("a", 1, 10), PoiRecord("b", 1, 10)]
    with pytest.raises(InstanceError):
        ingest_poi_table(recs, np.zeros((2, 2)), base_ranks=(1,))
    with pytest.raises(InstanceError):
        ingest_poi_table([PoiRecord("a", 1, 10)], np.zeros((2, 2)), base_ranks=(1,))
    with pytest.raises(InstanceError):
        ingest_poi_table([PoiRecord("a", 1, 10)], np.zeros((1, 1)), base_ranks=(4,))
    with pytest.raises(InstanceError):
        PoiRecord("z", 0, 10)
    with pytest.raises(InstanceError):
        # reward above 100 gives a non-positive rate
        ingest_poi_table([PoiRecord("a", 1, 10 ** 8)], np.zeros((1, 1)), base_ranks=(1,))


def test_round_trip_all_curve_kinds(tmp_path):
    curves = [CurveSpec.linear(1.0), CurveSpec.exponential(0.7),
              CurveSpec.from_pwl(PWLCurve(((0, 0), (1, 0.5), (2, 1.0), (3, 1.0))))]
    inst = t1(Problem.bmt(4.0)).with_curves(curves)
    path = tmp_path / "i.json"
    save_instance(inst, str(path))
    back = load_instance(str(path))
    assert back == inst
    assert instance_to_dict(back) == instance_to_dict(inst)
    sampled = t1().with_curves([CurveSpec.sampled([(0, 0), (1, 1)])] * 3)
    assert read_instance(write_instance(sampled)) == sampled


@settings(max_examples=20, deadline=None)
@given(st.integers(2, 8), st.integers(0, 1000), st.sampled_from(["rmt", "bmt"]))
def test_round_trip_property(n, seed, mode):
    inst = gen_random(n, seed=seed, mode=mode)
    back = read_instance(write_instance(inst))
    assert back == inst and back.meta == json.loads(json.dumps(inst.meta))


@pytest.mark.parametrize("mutate, where", [
    (lambda d: d.pop("pois"), "$.pois"),
    (lambda d: d["pois"][0].update(id="one"), "$.pois[0].id"),
    (lambda d: d["pois"][1]["curve"].update(kind="cubic"), "$.pois[1].curve"),
    (lambda d: d["pois"][1]["curve"].pop("rate"), "$.pois[1].curve.rate"),
    (lambda d: d["edges"][0].pop("length"), "$.edges[0].length"),
    (lambda d: d["edges"][0].update(length="far"), "$.edges[0].length"),
    (lambda d: d["problem"].update(mode="xyz"), "$.problem.mode"),
    (lambda d: d["problem"].pop("budget"), "$.problem.budget"),
    (lambda d: d.update(bases="1"), "$.bases"),
    (lambda d: d.update(meta=[]), "$.meta"),
    (lambda d: d["edges"].append({"from": 1, "to": 9, "length": 1}), "$"),
])
def test_schema_errors_name_the_field(mutate, where):
    doc = instance_to_dict(t1())
    mutate(doc)
    with pytest.raises(SchemaError) as err:
        instance_from_dict(doc)
    assert err.value.path.startswith(where)


def test_bad_json():
    with pytest.raises(SchemaError) as err:
        read_instance("{not json")
    assert "line 1" in err.value.path


@pytest.mark.parametrize("name, n, bases", [("t1.json", 3, (1,)), ("grid_4x5.json", 20, (6, 13)),
                                            ("istanbul20.json", 20, (1, 6, 11, 16))])
def test_golden_files(name, n, bases):
    inst = load_instance(os.path.join(GOLDEN, name))
    assert inst.n == n and inst.bases == bases


def test_golden_match_generators():
    assert load_instance(os.path.join(GOLDEN, "t1.json")) == t1(Problem.rmt(6.0))
    assert load_instance(os.path.join(GOLDEN, "grid_4x5.json")) == gen_grid(GridSpec(4, 5, 7))


def test_t1_fixture():
    inst = t1()
    assert inst.n == 3 and inst.bases == (1,) and inst.problem.budget == 6.0
    two = t1(second_base=True)
    assert two.bases == (1, 4) and (3, 4, 0.5) in two.edges
