import math

import pytest
from hypothesis import given, settings, strategies as st

from tourplan.instances import gen_random, t1
from tourplan.model import build
from tourplan.solver import MIPModel, SolveConfig, solve_mip
from tourplan.solver.export import ExportError, export_model, fmt, import_model, read_lp, read_mps


def canon(m):
    return (m.sense, fmt(m.objective_constant), sorted((v, fmt(c)) for v, c in m.objective),
            [(v.name, v.kind, fmt(v.lo), fmt(v.hi)) for v in m.variables],
            [(c.name, c.sense, fmt(c.rhs), tuple(sorted((v, fmt(x)) for v, x in c.terms))) for c in m.constraints])


@pytest.mark.parametrize("fmt_name", ["mps_free", "lp_text"])
def test_t1_round_trip(fmt_name):
    m = build(t1())
    text = export_model(m, fmt_name)
    back = import_model(text, fmt_name)
    assert canon(back) == canon(m)
    assert export_model(back, fmt_name) == text


def test_mps_layout():
    m = build(t1())
    text = export_model(m, "mps_free")
    heads = [line.split()[0] for line in text.splitlines() if not line.startswith(" ")]
    assert heads == ["NAME", "OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS", "ENDATA"]
    assert "'INTORG'" in text and "'INTEND'" in text
    # order variables u_i carry both bounds [2, n]
    assert " LO BND u_2 2" in text and " UP BND u_2 3" in text
    assert export_model(m, "mps_free") == text


def test_twelve_significant_digits():
    m = MIPModel("p")
    m.add_var("x", hi=math.pi)
    m.add_con("c", [("x", 1 / 3)], "<=", 2 / 3)
    m.set_objective("max", [("x", math.e)])
    for f in ("mps_free", "lp_text"):
        text = export_model(m, f)
        assert "0.333333333333" in text and "2.71828182846" in text and "3.14159265359" in text
        back = import_model(text, f)
        assert back.constraints[0].terms[0][1] == float("0.333333333333")


def test_empty_model():
    for f in ("mps_free", "lp_text"):
        back = import_model(export_model(MIPModel("e"), f), f)
        assert back.num_vars == 0 and back.num_rows == 0


def test_name_errors():
    m = MIPModel()
    m.add_var("obj")
    with pytest.raises(ExportError):
        export_model(m, "mps_free")
    m2 = MIPModel()
    m2.add_var("has space")
    with pytest.raises(ExportError):
        export_model(m2, "lp_text")
    m3 = MIPModel()
    m3.add_var("x")
    m3.add_con("x", [("x", 1)], "<=", 1)
    with pytest.raises(ExportError):
        export_model(m3, "lp_text")
    m4 = MIPModel()
    m4.add_var("2bad")
    with pytest.raises(ExportError):
        export_model(m4, "lp_text")
    with pytest.raises(ExportError):
        export_model(MIPModel(), "xml")


def test_parse_errors():
    with pytest.raises(ExportError):
        read_mps("NAME x\nROWS\n N obj\nCOLUMNS\n    x nope 1\nENDATA\n")
    with pytest.raises(ExportError):
        read_mps("BOGUS\n")
    with pytest.raises(ExportError):
        read_lp("Minimize\n obj: x\nSubject To\n x + y\nEnd\n")


def test_lp_reader_handles_free_and_general():
    text = "Maximize\n obj: 2 x - y + 1\nSubject To\n c1: x + y <= 4\n c2: x - y >= -1\n c3: x + y >= 0\nBounds\n y free\n x <= 3\nGeneral\n x\nEnd\n"
    m = read_lp(text)
    assert m.var("y").lo == -math.inf and m.var("x").hi == 3 and m.var("x").kind == "integer"
    assert m.objective_constant == 1.0
    res = solve_mip(m)
    # optimum at x = 3, y = -3
    assert res.objective == pytest.approx(10.0)


@pytest.mark.parametrize("seed", range(5))
def test_random_models_same_optimum(seed):
    m = build(gen_random(5, seed=seed, mode="rmt" if seed % 2 else "bmt"))
    for f in ("mps_free", "lp_text"):
        back = import_model(export_model(m, f), f)
        assert canon(back) == canon(m)
        a = solve_mip(m, SolveConfig(target_gap=0.0))
        b = solve_mip(back, SolveConfig(target_gap=0.0))
        assert b.objective == pytest.approx(a.objective, abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False).filter(lambda v: v != 0), min_size=1, max_size=6),
       st.sampled_from(["<=", ">=", "="]), st.sampled_from(["mps_free", "lp_text"]))
def test_round_trip_property(coefs, sense, f):
    m = MIPModel("h")
    for k in range(len(coefs)):
        m.add_var(f"x{k}", ["continuous", "integer", "binary"][k % 3], -1.0 if k % 3 == 1 else 0.0,
                  5.0 if k % 3 == 1 else (1.0 if k % 3 == 2 else math.inf))
    m.add_con("r", [(f"x{k}", c) for k, c in enumerate(coefs)], sense, float(sum(coefs)))
    m.set_objective("min", [(f"x{k}", c) for k, c in enumerate(coefs)], 0.5)
    text = export_model(m, f)
    back = import_model(text, f)
    assert canon(back) == canon(m)
    assert export_model(back, f) == text
