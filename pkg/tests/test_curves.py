import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from tourplan.core import CurveSpec
from tourplan.curves import (CurveError, PWLCurve, approximate, block_decomposition_from_slopes,
                             concave_blocks, eval_curve, fit_breakpoints, is_concave, is_nondecreasing,
                             monotonize, validate_pwl_error, validation_grid)


def _true(spec, t):
    if spec.kind == "linear":
        return np.minimum(spec.rate * t, 1.0)
    return 1.0 - np.exp(-spec.rate * t)


def test_pwl_validation():
    with pytest.raises(CurveError):
        PWLCurve(((0, 0),))
    with pytest.raises(CurveError):
        PWLCurve(((0, 0.1), (1, 1)))
    with pytest.raises(CurveError):
        PWLCurve(((0, 0), (1, 0.5), (1, 0.6)))
    with pytest.raises(CurveError):
        PWLCurve(((0, 0), (1, 0.5), (2, 0.4)))
    with pytest.raises(CurveError):
        PWLCurve(((0, 0), (1, 1.5)), final_segment_unbounded=False)
    with pytest.raises(CurveError):
        PWLCurve(((0, 0), (1, 0.5)))  # rising unbounded tail


def test_pwl_segments_and_eval():
    c = PWLCurve(((0, 0), (1, 0.5), (3, 1.0), (4, 1.0)))
    segs = c.segments
    assert [s.slope for s in segs] == [0.5, 0.25, 0.0]
    assert segs[-1].end == math.inf
    assert c(2.0) == pytest.approx(0.75)
    assert c(10.0) == 1.0
    assert c.saturation_time == 3.0
    assert c.right_slope(1.0) == 0.25


def test_eval_curve_rejects_negative_time():
    with pytest.raises(CurveError):
        eval_curve(CurveSpec.linear(1), -1.0)


def test_linear_is_exact():
    spec = CurveSpec.linear(0.5)
    pwl = approximate(spec, 0.05)
    assert pwl.breakpoints[:2] == ((0.0, 0.0), (2.0, 1.0))
    assert validate_pwl_error(spec, pwl) < 1e-12


@pytest.mark.parametrize("method", ["greedy", "construct"])
@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05, 0.01])
def test_band_error_bound(method, eps):
    spec = CurveSpec.exponential(1.3)
    pwl = approximate(spec, eps, flavor="band", method=method)
    assert validate_pwl_error(spec, pwl) <= eps + 1e-9
    # independent check on a different grid
    t = np.linspace(1e-3, 40, 20001)
    f = _true(spec, t)
    assert np.max(np.abs(f - pwl(t)) / f) <= eps + 1e-9


def test_greedy_is_concave_and_small():
    spec = CurveSpec.exponential(1.0)
    pwl = approximate(spec, 0.05, method="greedy")
    assert is_concave(pwl)
    assert len(concave_blocks(pwl)) == 1
    assert len(pwl.segments) <= 8


@pytest.mark.parametrize("eps", [0.2, 0.1, 0.05])
def test_upper_flavor(eps):
    spec = CurveSpec.exponential(1.7)
    pwl = approximate(spec, eps, flavor="upper")
    t = np.linspace(0, 40, 40001)
    f = _true(spec, t)
    g = pwl(t)
    assert np.all(g >= f - 1e-12)
    pos = f > 1e-9
    assert np.max(g[pos] / f[pos]) <= 1.0 / (1.0 - eps) + 1e-9
    assert np.max(g) <= 1.0 + 1e-12


def test_bad_eps_and_flavor():
    with pytest.raises(CurveError):
        approximate(CurveSpec.exponential(1), 0.0)
    with pytest.raises(CurveError):
        approximate(CurveSpec.exponential(1), 1.0)
    with pytest.raises(CurveError):
        approximate(CurveSpec.exponential(1), 0.1, flavor="lower")


@settings(max_examples=30, deadline=None)
@given(st.floats(0.2, 5.0), st.floats(0.01, 0.3))
def test_band_property(rate, eps):
    spec = CurveSpec.exponential(rate)
    pwl = approximate(spec, eps, method="greedy")
    assert validate_pwl_error(spec, pwl, 2000) <= eps + 1e-9
    assert pwl.max_value <= 1.0 + 1e-12


def test_sampled_nonconcave_gets_blocks():
    spec = CurveSpec.sampled([(0, 0), (1, 0.1), (2, 0.6), (3, 0.7), (4, 1.0)])
    assert not is_concave(spec)
    pwl = approximate(spec, 0.05)
    assert validate_pwl_error(spec, pwl) < 1e-9
    blocks = concave_blocks(pwl)
    assert len(blocks) == 3
    assert blocks.flat_segments() == pwl.segments


def test_block_decomposition_from_slopes():
    assert block_decomposition_from_slopes([3, 2, 1]) == [[3, 2, 1]]
    assert block_decomposition_from_slopes([1, 2, 0.5, 3, 0]) == [[1], [2, 0.5], [3, 0]]


def test_monotonize():
    spec = CurveSpec.sampled([(0, 0), (1, 0.6), (2, 0.4), (3, 0.9)])
    assert not is_nondecreasing(spec)
    m = monotonize(spec)
    assert [v for _, v in m.points] == [0, 0.6, 0.6, 0.9]
    assert is_nondecreasing(m)
    assert monotonize(CurveSpec.exponential(1)).kind == "exponential"
    with pytest.raises(CurveError):
        approximate(spec, 0.1)


def test_validation_grid_spans_scale():
    g = validation_grid(CurveSpec.exponential(2.0), 10_000)
    assert g[0] == pytest.approx(0.5e-4) and g[-1] == pytest.approx(15.0)
    assert np.all(np.diff(g) > 0)


def test_fit_four_segments_under_five_percent():
    spec = CurveSpec.exponential(1.0)
    curve, err = fit_breakpoints(spec, 4, seed=0)
    assert len(curve.segments) <= 4
    assert err < 0.05
