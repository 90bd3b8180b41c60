import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dstab.catalog import get_problem, make_problem
from dstab.core import (ParameterError, make_constant_schedule, make_power_schedule,
                        make_random_schedule)
from dstab.euler import (FIRST, Selector, Trajectory, adversarial_selector, gaps_monotone,
                         random_selector, simulate, simulate_batch, tracking_gap)


def _start(problem, rng):
    region = "basin" if "basin" in problem.regions else "box"
    return problem.sample(region, rng, 1)[0] + 0.05


def test_reconstruction_residual_small(any_problem, rng):
    x0 = _start(any_problem, rng)
    sel = random_selector(3)
    t = simulate(any_problem, any_problem.descent(), make_power_schedule(0.1, 2.0, 0.1),
                 x0, 500, sel)
    assert not t.truncated
    assert t.reconstruction_residual() <= 1e-13


def test_times_are_cumulative_steps(parabola):
    t = simulate(parabola, parabola.descent(), make_power_schedule(0.1, 6.0, 0.1),
                 [0.9, 0.7], 64)
    np.testing.assert_allclose(t.times[1:], np.cumsum(t.alphas), rtol=1e-15)
    assert t.times[64] == pytest.approx(3.79633099122241657939363698644, rel=1e-14)


def test_csv_round_trip_is_byte_identical(ellipse):
    t = simulate(ellipse, ellipse.descent(), make_power_schedule(1.0, 6.0, 1.0), [0.8, 0.2], 300)
    text = t.to_csv()
    assert Trajectory.from_csv(text).to_csv() == text
    buf = io.StringIO(text)
    assert Trajectory.from_csv(buf).to_csv() == text


def test_csv_file_round_trip(tmp_path, parabola):
    t = simulate(parabola, parabola.descent(), make_constant_schedule(0.01), [0.9, 0.7], 50)
    path = tmp_path / "traj.csv"
    t.to_csv(path)
    assert Trajectory.from_csv(path).to_csv() == path.read_text()


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=4, max_size=4))
def test_csv_round_trip_arbitrary_points(vals):
    P = np.array(vals).reshape(2, 2)
    t = Trajectory(np.arange(2), P, np.array([0.0, 0.1]), np.array(vals[:2]),
                   np.array(vals[2:]), np.array([0.1]))
    text = t.to_csv()
    back = Trajectory.from_csv(text)
    np.testing.assert_array_equal(back.points, P)
    assert back.to_csv() == text


def test_csv_header_layout(parabola):
    t = simulate(parabola, parabola.descent(), make_constant_schedule(0.01), [0.9, 0.7], 3)
    lines = t.to_csv().splitlines()
    assert lines[0] == "k,t,alpha,x1,x2,f,g"
    assert lines[-1].split(",")[2] == ""


def test_bad_csv_header():
    with pytest.raises(ParameterError):
        Trajectory.from_csv("a,b,c\n1,2,3\n")


def test_simulation_is_reproducible(flat4):
    sel = random_selector(5)
    a = simulate(flat4, flat4.descent(), make_random_schedule(0.1, 2), [0.5, 0.0], 400, sel, 9)
    b = simulate(flat4, flat4.descent(), make_random_schedule(0.1, 2), [0.5, 0.0], 400, sel, 9)
    assert a.to_csv() == b.to_csv()


def test_first_selector_on_locus(flat4):
    t = simulate(flat4, flat4.descent(), make_constant_schedule(0.1), [0.5, 0.0], 1, FIRST)
    assert t.choices[0] == 0
    assert t.sample_sizes[0] == 2


def test_adversarial_selector_maximises_objective(flat4):
    sel = adversarial_selector(lambda z: z[1])
    t = simulate(flat4, flat4.descent(), make_constant_schedule(0.1), [0.5, 0.0], 1, sel)
    np.testing.assert_allclose(t.points[1], [0.5, 0.1])


def test_overflow_truncates():
    p = make_problem("blow", 1, lambda x: float(np.exp(min(x[0] ** 2, 700.0))),
                     lambda x: np.array([2 * x[0] * np.exp(x[0] ** 2)]))
    with np.errstate(over="ignore"):
        t = simulate(p, p.descent("bouligand").negated(), make_constant_schedule(1.0), [1.0], 50)
    assert t.truncated
    assert len(t) < 51
    assert "overflow" in t.error[1]


def test_thinning_keeps_last_row(parabola):
    full = simulate(parabola, parabola.descent(), make_constant_schedule(0.01), [0.9, 0.7], 1000)
    thin = simulate(parabola, parabola.descent(), make_constant_schedule(0.01), [0.9, 0.7], 1000,
                    thin=50)
    assert thin.k[-1] == 1000
    assert len(thin) < len(full)
    np.testing.assert_array_equal(thin.last, full.last)


@pytest.mark.parametrize("K,thin", [(0, 1), (10, 0)])
def test_simulate_rejects_bad_arguments(parabola, K, thin):
    with pytest.raises(ParameterError):
        simulate(parabola, parabola.descent(), make_constant_schedule(0.1), [0.1, 0.1], K,
                 thin=thin)


def test_tracking_gaps_shrink_on_ellipse(ellipse):
    pairs = tracking_gap(ellipse, [0.8, 0.2], (0.1, 0.05, 0.025), 1.0)
    gaps = [g for _, g in pairs]
    assert gaps_monotone(pairs, slack=1.0)
    assert gaps[-1] < gaps[0]


def test_gaps_monotone_slack():
    assert gaps_monotone([(0.1, 1.0), (0.05, 1.05)], slack=1.1)
    assert not gaps_monotone([(0.1, 1.0), (0.05, 1.2)], slack=1.1)


def test_batch_matches_scalar_for_smooth_start(parabola):
    x0 = np.array([[0.9, 0.7], [-0.4, 1.0]])
    alphas = np.tile(make_power_schedule(0.1, 6.0, 0.1).alphas(200), (2, 1))
    run = simulate_batch(parabola, parabola.descent(), alphas, x0, [FIRST, FIRST], record=True)
    for i in range(2):
        t = simulate(parabola, parabola.descent(), make_power_schedule(0.1, 6.0, 0.1), x0[i], 200)
        np.testing.assert_allclose(run.points[i][:50], t.points[:50], atol=1e-12)
    assert np.all(run.steps == 200)


def test_batch_watch_threshold(flat4):
    x0 = np.array([[0.5, 0.0]])
    alphas = np.full((1, 100), 0.1)
    sel = [Selector("adversarial", objective=lambda z: abs(z[1]))]
    run = simulate_batch(flat4, flat4.descent(), alphas, x0, sel,
                         watch=lambda X: np.abs(X[:, 1]), threshold=0.05)
    assert run.first_exceed[0] >= 0
    assert run.sup_watch[0] > 0.05


@pytest.mark.parametrize("pid,x0,c,cap", [
    ("flat4", (2.5, 0.01), 1.0, 1.0),
    ("parabola", (0.9, 0.7), 0.1, 0.1),
])
def test_figure_runs_decrease_g(pid, x0, c, cap):
    p = get_problem(pid)
    t = simulate(p, p.descent("normalized"), make_power_schedule(c, 6.0, cap), x0, 10000)
    assert t.g_values[-1] <= 0.1 * t.g_values[0]
