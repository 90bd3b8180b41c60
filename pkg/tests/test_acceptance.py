"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines inline; they
are also written to the terminal when output capture is on.
"""

import time

import numpy as np
import pytest

from dstab.catalog import get_problem, orthogonal_conjugate, rotation
from dstab.cli import EXIT_PASS, main
from dstab.core import make_power_schedule
from dstab.euler import Trajectory, gaps_monotone, random_selector, simulate, tracking_gap
from dstab.fields import fd_gradient, normalized_field
from dstab.flatness import screen_flat_minima
from dstab.lyapunov import calibrate_p_dL, calibrate_pq_dL, check_conserved_many, verify_p_dL, verify_pq_dL
from dstab.stability import (StabilityProbeConfig, check_distance_lower_bound,
                             estimate_subregularity, probe_attractor, probe_point_stability)

from conftest import CATALOG_IDS, CONSERVED_IDS

RADII = np.geomspace(1e-3, 1e-1, 5)


@pytest.fixture
def report(capsys):
    """Print one line per criterion, then assert the outcome and the runtime budget."""
    def emit(name, ok, elapsed, budget, detail):
        ok_time = elapsed <= budget
        verdict = "PASS" if ok and ok_time else "FAIL"
        with capsys.disabled():
            print(f"\n[{verdict}] {name}: {detail}; {elapsed:.1f}s (budget {budget}s)")
        assert ok, detail
        assert ok_time, f"{elapsed:.1f}s exceeds {budget}s"
    return emit


@pytest.mark.parametrize("fig", ["fig1", "fig2", "fig3"])
def test_1_figure_reproduction(fig, tmp_path, report):
    t0 = time.perf_counter()
    code = main(["reproduce", fig, "--outdir", str(tmp_path)])
    elapsed = time.perf_counter() - t0
    traj = Trajectory.from_csv(tmp_path / f"{fig}.csv")
    assert len(traj) == 100001
    if fig == "fig3":
        d = float(min(np.linalg.norm(traj.last - [0.0, 1.0]), np.linalg.norm(traj.last + [0.0, 1.0])))
        ok, detail = d <= 0.15, f"{fig} d(x_K, {{(0,+-1)}}) = {d:.3e} <= 0.15"
    else:
        ratio = traj.g_values[-1] / traj.g_values[0]
        ok, detail = ratio <= 0.1, f"{fig} g(x_K)/g(x_0) = {ratio:.3e} <= 0.1"
    report(f"1 figure reproduction {fig}", ok and code == EXIT_PASS, elapsed, 60, detail)


def test_2_conserved_quantities(report):
    t0 = time.perf_counter()
    worst, ok = {}, True
    for pid in CONSERVED_IDS:
        p = get_problem(pid)
        reps = check_conserved_many(p.conserved, p.descent(),
                                    lambda rng, m, p=p: p.sample("box", rng, m), 10000, 0)
        for C, rep in zip(p.conserved, reps):
            worst[f"{pid}/{C.name}"] = rep.worst_margin
            ok &= rep.passed and rep.worst_margin <= 1e-8
    elapsed = time.perf_counter() - t0
    detail = f"max normalized |<grad C, u>| = {max(worst.values()):.2e} <= 1e-8 over {len(worst)} quantities"
    report("2 conserved-quantity orthogonality", ok, elapsed, 5, detail)


@pytest.mark.parametrize("pid", ["ellipse:a=2,b=1", "parabola"])
def test_3_p_dl_certificates(pid, report):
    t0 = time.perf_counter()
    p = get_problem(pid)
    F = p.descent()
    region = lambda rng, m: p.sample("lyapunov", rng, m)
    cal = calibrate_p_dL(p.g, F, region, 2.0, 0.1, 200, 12)
    cert = verify_p_dL(p.g, F, region, 2.0, cal.omega, cal.alpha_bar, 200, 12)
    elapsed = time.perf_counter() - t0
    report(f"3 p-d-Lyapunov p=2 {pid}", cert.passed, elapsed, 30,
           f"omega = {cal.omega:.3e}, alpha_bar = {cal.alpha_bar:.3g}, {cert.report.verdict}")


def test_3_pq_dl_certificate(report):
    t0 = time.perf_counter()
    p = get_problem("flat4")
    F = p.descent()
    region = lambda rng, m: p.sample("lyapunov", rng, m)
    cal = calibrate_pq_dL(p.g, F, region, 4.0, 2, 0.1, 100)
    cert = verify_pq_dL(p.g, F, region, 4.0, 2, cal.omega, cal.alpha_bar, 100)
    elapsed = time.perf_counter() - t0
    report("3 (p,q)-d-Lyapunov (4,2) flat4 g=|x|", cert.passed, elapsed, 30,
           f"omega = {cal.omega:.3e}, alpha_bar = {cal.alpha_bar:.3g}, {cert.report.verdict}")


def test_4_monomial_stability_dichotomy(report):
    t0 = time.perf_counter()
    p = get_problem("monomial:u=1,1")
    cfg = StabilityProbeConfig(0.05, (0.01, 0.02), (0.005, 0.01), N_init=2, K=20000)
    flat = probe_point_stability(p, p.descent(), np.array([1.0, 1.0]), cfg)
    sharp = probe_point_stability(p, p.descent(), np.array([2.0, 0.5]), cfg)
    elapsed = time.perf_counter() - t0
    ok = flat.passed and not sharp.passed
    report("4 monomial stability dichotomy", ok, elapsed, 60,
           f"(1,1) {flat.verdict} margin {flat.worst_margin:.3g}; "
           f"(2,0.5) {sharp.verdict} margin {sharp.worst_margin:.3g}")


@pytest.mark.parametrize("pid,p_exp", [("flat4", 4.0), ("ellipse:a=2,b=1", 2.0)])
def test_5_attractor_probes(pid, p_exp, report):
    t0 = time.perf_counter()
    p = get_problem(pid)
    n = p.notes["attractor_probe"]
    rep = probe_attractor(p, p.descent(), p.attractor, p_exp,
                          lambda rng, m: p.sample("basin", rng, m), 0.2, 100, n["K"],
                          c=n["c"], cap=n["cap"])
    elapsed = time.perf_counter() - t0
    hit = rep.stats["hit_rate"]
    report(f"5 attractor probe {pid} p={p_exp:g}", rep.passed and hit == 1.0, elapsed, 120,
           f"hit rate {hit:.0%} over 100 basin starts")


def test_6_geometry_estimators(report):
    t0 = time.perf_counter()
    par = get_problem("parabola")
    tau = estimate_subregularity(par, par.minima, np.zeros(2), RADII, 40).tau
    ok = 0.9 <= tau <= 1.1
    parts = [f"parabola tau = {tau:.4f}"]
    for m in (1, 2, 3):
        pm = get_problem(f"power:m={m}")
        tm = estimate_subregularity(pm, pm.minima, np.zeros(1), RADII, 40).tau
        target = 1 / (2 * m - 1)
        ok &= abs(tm - target) <= 0.05 * target
        parts.append(f"m={m} tau = {tm:.4f} vs {target:.4f}")
    flat4 = get_problem("flat4")
    db = check_distance_lower_bound(flat4, flat4.minima, np.zeros(2), 0.05, 0.1, 200, 8)
    ok &= db.worst_margin >= -1e-10
    parts.append(f"distance bound margin {db.worst_margin:.3g}")
    elapsed = time.perf_counter() - t0
    report("6 geometry estimators", ok, elapsed, 30, ", ".join(parts))


def test_7_flatness_screening(report):
    t0 = time.perf_counter()
    par = get_problem("parabola")
    t = np.linspace(-1, 1, 41)
    grid = np.column_stack([t, t * t])
    ranked = screen_flat_minima(par, grid, 0, RADII)
    ok_par = np.allclose(ranked[0].point, 0.0, atol=1e-12)

    l1 = get_problem("l1-3d")
    xbar = np.array([0.0, 2 ** 0.25, 2 ** -0.25])
    s = np.geomspace(0.5, 2, 19)
    g3 = np.vstack([np.column_stack([0 * s, s, 1 / s]), np.column_stack([0 * s, -s, -1 / s]),
                    xbar, -xbar])
    top = screen_flat_minima(l1, g3, 0, RADII)[:2]
    ok_l1 = sorted(tuple(np.round(r.point, 12)) for r in top) == \
        sorted([tuple(np.round(xbar, 12)), tuple(np.round(-xbar, 12))])

    U = rotation(np.pi / 6)
    rot = screen_flat_minima(orthogonal_conjugate(par, U), grid @ U, 0, RADII)
    back = [abs(round(float((U @ r.point)[0]), 9)) for r in rot]
    ok_rot = back == [abs(round(float(r.point[0]), 9)) for r in ranked]
    elapsed = time.perf_counter() - t0
    report("7 flatness screening", ok_par and ok_l1 and ok_rot, elapsed, 60,
           f"parabola origin first {ok_par}, l1-3d +-xbar first {ok_l1}, "
           f"30 deg rotation invariant {ok_rot}")


def test_8_engine_invariants(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(8)
    worst_norm = worst_res = worst_fd = 0.0
    for pid in CATALOG_IDS:
        p = get_problem(pid)
        lo, hi = p.box
        F = normalized_field(p)
        for x in rng.uniform(lo, hi, (100, p.dim)) * 0.9:
            D = F(x).directions
            worst_norm = max(worst_norm, float(np.abs(np.linalg.norm(D, axis=1) - 1).max()))
            g = p.grad(x)
            if g is not None:
                fd = fd_gradient(p.f, x, h=1e-6 * (1 + np.abs(x).max()))
                worst_fd = max(worst_fd, float(np.linalg.norm(g - fd) / max(1.0, np.linalg.norm(g))))
        region = "basin" if "basin" in p.regions else "box"
        x0 = p.sample(region, rng, 1)[0] + 0.05
        traj = simulate(p, p.descent(), make_power_schedule(0.1, 2.0, 0.1), x0, 500,
                        random_selector(3))
        worst_res = max(worst_res, traj.reconstruction_residual())
    pairs = tracking_gap(get_problem("ellipse:a=2,b=1"), [0.8, 0.2], (0.1, 0.05, 0.025), 1.0)
    mono = gaps_monotone(pairs, slack=1.0)
    elapsed = time.perf_counter() - t0
    ok = worst_norm <= 1e-12 and worst_res <= 1e-13 and worst_fd <= 1e-5 and mono
    gaps = ", ".join(f"{g:.3g}" for _, g in pairs)
    report("8 engine invariants", ok, elapsed, 30,
           f"unit norm err {worst_norm:.1e}, residual {worst_res:.1e}, fd rel err "
           f"{worst_fd:.1e}, ellipse gaps [{gaps}] non-increasing {mono}")
