import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstab.core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, ParameterError, ProbeReport,
                        compensated_cumsum, cumulative_times, finite_union,
                        make_constant_schedule, make_power_schedule, make_random_schedule,
                        parametric_curve, point_set, sample_ball, sublevel_intersection)

# sum_{k=1}^{64} 0.1 / k^(1/6), evaluated with mpmath at 30 digits
T64_POW_C01_P6 = 3.79633099122241657939363698644


def test_power_schedule_values():
    s = make_power_schedule(1.0, 2.0, 0.6)
    # 1/sqrt(2) exceeds the cap, 1/sqrt(3) does not
    np.testing.assert_allclose(s.alphas(4), [0.6, 0.6, 1 / np.sqrt(3), 0.5])


def test_power_schedule_cap_applies():
    s = make_power_schedule(1.0, 6.0, 0.3)
    a = s.alphas(1000)
    assert a.max() <= 0.3
    assert a[0] == 0.3


def test_cumulative_time_oracle():
    t = cumulative_times(make_power_schedule(0.1, 6.0, 0.1), 64)
    assert t[0] == 0.0
    assert abs(t[64] - T64_POW_C01_P6) <= 1e-14 * T64_POW_C01_P6


def test_compensated_cumsum_beats_naive():
    vals = np.full(10**5, 0.1)
    exact = mpmath.mpf(0.1) * 10**5
    err = abs(float(compensated_cumsum(vals)[-1] - exact))
    assert err <= 1e-10


@given(st.lists(st.floats(1e-6, 1.0), min_size=1, max_size=200))
def test_compensated_cumsum_matches_fsum(vals):
    out = compensated_cumsum(np.array(vals))
    assert out[0] == 0.0
    exact = np.array([math.fsum(vals[:i]) for i in range(1, len(vals) + 1)])
    np.testing.assert_allclose(out[1:], exact, rtol=1e-15, atol=0)


def test_random_schedule_reproducible_and_bounded():
    a = make_random_schedule(0.2, 7).alphas(1000)
    b = make_random_schedule(0.2, 7).alphas(1000)
    assert np.array_equal(a, b)
    assert np.all(a > 0) and np.all(a <= 0.2)


def test_constant_schedule_describe():
    assert make_constant_schedule(0.1).describe() == "const:c=0.1"
    assert make_power_schedule(1, 6, 1).describe() == "pow:c=1,p=6,cap=1"


@pytest.mark.parametrize("kw", [dict(c=0.0, p=2, cap=1), dict(c=1, p=0.5, cap=1),
                                dict(c=1, p=2, cap=-1)])
def test_power_schedule_rejects_bad_parameters(kw):
    with pytest.raises(ParameterError):
        make_power_schedule(**kw)


def test_point_set_distance_and_projection():
    X = point_set([[0.0, 1.0], [0.0, -1.0]])
    assert X.dist(np.array([0.0, 0.5])) == pytest.approx(0.5)
    y, T = X.project(np.array([0.1, -2.0]))
    np.testing.assert_array_equal(y, [0.0, -1.0])
    assert T.shape[0] == 0


def test_parametric_curve_circle_distance(rng):
    circle = parametric_curve(lambda t: np.column_stack([np.cos(t), np.sin(t)]), 0.0,
                              2 * np.pi, 2, periodic=True)
    P = rng.uniform(-2, 2, (200, 2))
    np.testing.assert_allclose(circle.dist_many(P), np.abs(np.linalg.norm(P, axis=1) - 1),
                               atol=1e-9)


def test_parametric_curve_tangent_projection():
    line = parametric_curve(lambda t: np.column_stack([t, 0 * t]), -1.0, 1.0, 2)
    y, T = line.project(np.array([0.3, 0.4]))
    np.testing.assert_allclose(y, [0.3, 0.0], atol=1e-10)
    np.testing.assert_allclose(np.abs(T), [[1.0, 0.0]], atol=1e-8)


def test_finite_union_takes_minimum():
    U = finite_union([point_set([[0.0, 0.0]]), point_set([[3.0, 0.0]])])
    assert U.dist(np.array([2.5, 0.0])) == pytest.approx(0.5)


def test_sublevel_intersection_restricts_arc():
    line = parametric_curve(lambda t: np.column_stack([t, 0 * t]), -2.0, 2.0, 2)
    X = sublevel_intersection(lambda z: z[0] ** 2, 1.0, line)
    assert X.dist(np.array([1.5, 0.0])) == pytest.approx(0.5, abs=1e-3)
    assert X.dist(np.array([0.5, 0.0])) == pytest.approx(0.0, abs=1e-9)


@settings(max_examples=30)
@given(st.floats(0.01, 5.0), st.integers(1, 5))
def test_sample_ball_inside(radius, n):
    rng = np.random.default_rng(0)
    c = np.arange(n, dtype=float)
    P = sample_ball(rng, c, radius, 50)
    assert np.all(np.linalg.norm(P - c, axis=1) <= radius * (1 + 1e-12))


def test_probe_report_witness_contract():
    assert ProbeReport(NO_VIOLATION_FOUND, -1.0, None, {}).passed
    assert not ProbeReport(COUNTEREXAMPLE, 1.0, {"x": 0}, {}).passed
    with pytest.raises(Exception):
        ProbeReport(COUNTEREXAMPLE, 1.0, None, {})
    with pytest.raises(Exception):
        ProbeReport(NO_VIOLATION_FOUND, 1.0, {"x": 0}, {})
