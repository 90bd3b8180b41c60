import numpy as np
import pytest

from dstab.catalog import get_problem, make_problem
from dstab.core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, ParameterError, parametric_curve,
                        sublevel_intersection)
from dstab.fields import Field, FieldSample, constant_field
from dstab.stability import (PROBE_CSV_HEADER, StabilityProbeConfig, check_distance_lower_bound,
                             check_verdier, estimate_subregularity, hitting_times,
                             probe_asymptotic, probe_attractor, probe_csv_row,
                             probe_point_stability, probe_set_stability)

X_AXIS = parametric_curve(lambda t: np.column_stack([t, 0 * t]), -5.0, 5.0, 2, label="x-axis")


def small_cfg(eps=0.05, K=3000, **kw):
    return StabilityProbeConfig(eps, (eps / 5, 2 * eps / 5), (eps / 10, eps / 5), N_init=2,
                                K=K, **kw)


@pytest.mark.parametrize("kw", [dict(epsilon=0.0), dict(deltas=()), dict(deltas=(0.2,)),
                                dict(alpha_bars=(-1.0,)), dict(K=0)])
def test_config_validation(kw):
    base = dict(epsilon=0.1, deltas=(0.01,), alpha_bars=(0.01,))
    base.update(kw)
    with pytest.raises(ParameterError):
        StabilityProbeConfig(**base)


def test_config_pairs_sorted():
    cfg = StabilityProbeConfig(0.1, (0.02, 0.01), (0.005, 0.001))
    assert cfg.pairs() == sorted(cfg.pairs())
    assert len(cfg.pairs()) == 4


def test_monomial_flat_minimum_stable():
    p = get_problem("monomial:u=1,1")
    rep = probe_point_stability(p, p.descent(), np.array([1.0, 1.0]), small_cfg(K=5000))
    assert rep.verdict == NO_VIOLATION_FOUND


def test_monomial_sharp_minimum_escapes():
    p = get_problem("monomial:u=1,1")
    rep = probe_point_stability(p, p.descent(), np.array([2.0, 0.5]), small_cfg(K=20000))
    assert rep.verdict == COUNTEREXAMPLE
    assert rep.worst_margin > 0
    assert np.linalg.norm(rep.witness["points"][-1] - [2.0, 0.5]) > 0.05


def test_bilinear_flat_minimum_stable():
    p = get_problem("bilinear")
    xbar = p.attractor.sample(np.random.default_rng(0), 1)[0]
    assert p.f(xbar) <= 1e-12
    rep = probe_point_stability(p, p.descent(), xbar, small_cfg(eps=0.1, K=3000))
    assert rep.passed


def test_zero_field_trivially_stable(parabola):
    zero = constant_field([0.0, 0.0])
    rep = probe_point_stability(parabola, zero, np.array([0.3, 0.4]), small_cfg(K=200))
    assert rep.passed
    assert rep.worst_margin <= -0.05 + 2 * 0.05 / 5 + 1e-12


def test_ellipse_sublevel_arcs_stable(ellipse):
    X = sublevel_intersection(ellipse.g, 0.2, ellipse.minima, label="arcs")
    rep = probe_set_stability(ellipse, ellipse.descent(), X, small_cfg(K=1000, watch_every=10))
    assert rep.passed


def test_parabola_window_stable_and_ascent_escapes(parabola):
    W = parametric_curve(lambda t: np.column_stack([t, t * t]), -1.0, 1.0, 2, label="window")
    cfg = small_cfg(K=1000, watch_every=10)
    assert probe_set_stability(parabola, parabola.descent(), W, cfg).passed
    up = probe_set_stability(parabola, parabola.descent().negated(), W, cfg)
    assert up.verdict == COUNTEREXAMPLE


def test_probe_is_deterministic():
    p = get_problem("monomial:u=1,1")
    a = probe_point_stability(p, p.descent(), np.array([1.0, 1.0]), small_cfg(K=500))
    b = probe_point_stability(p, p.descent(), np.array([1.0, 1.0]), small_cfg(K=500))
    assert a.worst_margin == b.worst_margin


@pytest.mark.parametrize("pid,x0,c,cap", [
    ("flat4", (2.5, 0.01), 1.0, 1.0),
    ("parabola", (0.9, 0.7), 0.1, 0.1),
])
def test_asymptotic_figure_starts(pid, x0, c, cap):
    p = get_problem(pid)
    rep = probe_asymptotic(p, p.descent(), p.attractor, 6.0, c, 1, 100000, 0.2,
                           starts=np.array([x0]), cap=cap)
    assert rep.passed
    d = rep.stats["distances"][0]
    assert d[2] <= d[1] <= d[0]


def test_asymptotic_start_on_set_with_vanishing_field():
    p = get_problem("power:m=2")
    rep = probe_asymptotic(p, p.descent("bouligand"), p.minima, 2.0, 0.1, 1, 100, 1e-12,
                           starts=np.zeros((1, 1)))
    assert rep.passed
    np.testing.assert_array_equal(rep.stats["distances"], 0.0)


def test_hitting_times():
    d = np.array([[0.5, 0.1, 0.05, 0.01],
                  [0.01, 0.3, 0.01, 0.01],
                  [0.5, 0.5, 0.5, 0.5],
                  [0.0, 0.0, 0.0, 0.0]])
    np.testing.assert_array_equal(hitting_times(d, 0.2), [1, 2, 4, 0])


def test_attractor_flat4():
    p = get_problem("flat4")
    n = p.notes["attractor_probe"]
    rep = probe_attractor(p, p.descent(), p.attractor, 4.0,
                          lambda rng, m: p.sample("basin", rng, m), 0.2, 10, n["K"],
                          c=n["c"], cap=n["cap"])
    assert rep.passed
    assert rep.stats["hit_rate"] == 1.0


def test_attractor_ellipse(ellipse):
    n = ellipse.notes["attractor_probe"]
    rep = probe_attractor(ellipse, ellipse.descent(), ellipse.attractor, 2.0,
                          lambda rng, m: ellipse.sample("basin", rng, m), 0.2, 20, n["K"],
                          c=n["c"], cap=n["cap"])
    assert rep.passed


@pytest.mark.parametrize("m", [1, 2, 3])
def test_subregularity_power_law(m):
    p = get_problem(f"power:m={m}")
    fit = estimate_subregularity(p, p.minima, np.zeros(1), np.geomspace(1e-3, 1e-1, 5), 40)
    assert fit.tau == pytest.approx(1 / (2 * m - 1), rel=0.05)


def test_subregularity_parabola(parabola):
    tau, res = estimate_subregularity(parabola, parabola.minima, np.zeros(2),
                                      np.geomspace(1e-3, 1e-1, 5), 40)
    assert 0.9 <= tau <= 1.1


def test_subregularity_squared_distance():
    sq = make_problem("sq", 2, lambda z: z[1] ** 2, lambda z: np.array([0.0, 2 * z[1]]))
    fit = estimate_subregularity(sq, X_AXIS, np.zeros(2), np.geomspace(1e-3, 1e-1, 5), 40)
    assert fit.tau == pytest.approx(1.0, abs=1e-12)


def test_verdier_flat4_bounded(flat4):
    assert check_verdier(flat4, flat4.minima, np.zeros(2), 300).passed


def test_verdier_normal_gradient():
    absy = make_problem("absy", 2, lambda z: abs(z[1]),
                        lambda z: None if z[1] == 0 else np.array([0.0, np.sign(z[1])]))
    rep = check_verdier(absy, X_AXIS, np.zeros(2), 100)
    assert rep.passed and rep.worst_margin == 0.0


def test_verdier_abs_x_along_x_axis_fails():
    # M need not be the zero set of f: here the gradient (+-1, 0) is tangent to M
    absx = make_problem("absx", 2, lambda z: abs(z[0]),
                        lambda z: None if z[0] == 0 else np.array([np.sign(z[0]), 0.0]))
    rep = check_verdier(absx, X_AXIS, np.zeros(2), 100)
    assert rep.verdict == COUNTEREXAMPLE
    assert rep.stats["slope"] == pytest.approx(-1.0, abs=1e-6)


def test_verdier_tangential_gradient_fails():
    tang = make_problem("tangent", 2, lambda z: z[0] + z[1] ** 2 / 2,
                        lambda z: np.array([1.0, z[1]]))
    rep = check_verdier(tang, X_AXIS, np.zeros(2), 100)
    assert rep.verdict == COUNTEREXAMPLE
    assert rep.witness["slope"] < -0.5


def test_distance_lower_bound_flat4(flat4):
    rep = check_distance_lower_bound(flat4, flat4.minima, np.zeros(2), 0.05, 0.1, 200, 8)
    assert rep.worst_margin >= -1e-10


def test_distance_lower_bound_on_set_component():
    # on M the step leaves with normal component 1/sqrt(2) > 1/2
    diag = make_problem("diag", 2, lambda z: abs(z[1]) + 0 * z[0],
                        lambda z: None if z[1] == 0 else np.array([np.sign(z[1]), np.sign(z[1])]))
    slanted = Field(2, lambda x: FieldSample(np.array([[1.0, 1.0]]) / np.sqrt(2)))
    rep = check_distance_lower_bound(diag, X_AXIS, np.zeros(2), 0.05, 0.1, 40, 4,
                                     field=slanted, on_set_fraction=1.0)
    assert rep.passed
    assert rep.worst_margin >= 0.05e-3 * (1 / np.sqrt(2) - 0.5) - 1e-15


def test_probe_csv_row(flat4):
    rep = check_distance_lower_bound(flat4, flat4.minima, np.zeros(2), 0.05, 0.1, 10, 2)
    rep.stats["target"] = "x-axis"
    row = probe_csv_row("distbound", rep).split(",")
    assert len(row) == len(PROBE_CSV_HEADER.split(","))
    assert row[0] == "distbound" and row[-1] == NO_VIOLATION_FOUND
