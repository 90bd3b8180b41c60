"""Falsification probes for d-stability and attractors, and geometric estimators.

The stability definitions quantify over all ``epsilon`` and some
``(delta, alpha_bar)``; a probe tests a finite grid of pairs, several step
schedules and selection policies, and reports what it saw.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, ParameterError, ProbeReport,
                   SetDescriptor, make_constant_schedule, make_power_schedule,
                   make_random_schedule, sample_ball)
from .euler import Selector, simulate_batch
from .fields import Field
from .lyapunov import alpha_grid

VERDIER_CAP = 1e3
VERDIER_SLOPE_MIN = -0.1
DISTANCE_BOUND_TOL = 1e-10


@dataclass(frozen=True)
class StabilityProbeConfig:
    """Grid of ``(delta, alpha_bar)`` pairs and trial budget for stability probes.

    Per ``alpha_bar`` the schedules are constant ``alpha_bar``, power
    ``alpha_bar/(k+1)^{1/power_p}`` and i.i.d. uniform on ``(0, alpha_bar]``;
    each runs with a random and an adversarial (distance-maximising)
    selector from ``N_init`` nested starts ``x̄ + delta w_i``.
    """

    epsilon: float
    deltas: tuple
    alpha_bars: tuple
    N_init: int = 4
    K: int = 2000
    seed: int = 0
    power_p: float = 2.0
    schedules: tuple = ("constant", "power", "random")
    selectors: tuple = ("random", "adversarial")
    watch_every: int = 1

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ParameterError("epsilon must be positive")
        if not self.deltas or not self.alpha_bars:
            raise ParameterError("delta and alpha_bar grids must be nonempty")
        if any(not d > 0 for d in self.deltas) or any(not a > 0 for a in self.alpha_bars):
            raise ParameterError("grid values must be positive")
        if any(d > self.epsilon for d in self.deltas):
            raise ParameterError("every delta must be <= epsilon")
        if self.N_init < 1 or self.K < 1:
            raise ParameterError("N_init and K must be positive")

    def pairs(self) -> list:
        return sorted((float(d), float(a)) for d in self.deltas for a in self.alpha_bars)


def _schedule(kind, alpha_bar, cfg, i):
    if kind == "constant":
        return make_constant_schedule(alpha_bar)
    if kind == "power":
        return make_power_schedule(alpha_bar, cfg.power_p, alpha_bar)
    if kind == "random":
        return make_random_schedule(alpha_bar, cfg.seed * 7919 + i)
    raise ParameterError(f"unknown schedule kind {kind!r}")


def _selector(kind, objective, seed):
    if kind == "adversarial":
        return Selector("adversarial", objective=objective)
    return Selector(kind, seed=seed)


def _probe_pairs(problem, F: Field, dist_many: Callable, starts_unit: Callable,
                 cfg: StabilityProbeConfig, target: str) -> ProbeReport:
    def dist1(x):
        return float(dist_many(x[None, :])[0])

    results = []
    witness = None
    for delta, ab in cfg.pairs():
        X0 = starts_unit(delta)
        rows, alphas, sels = [], [], []
        for i, x0 in enumerate(X0):
            for s_kind in cfg.schedules:
                sch = _schedule(s_kind, ab, cfg, i)
                for sel_kind in cfg.selectors:
                    rows.append((x0, sch.describe(), sel_kind))
                    alphas.append(sch.alphas(cfg.K))
                    sels.append(_selector(sel_kind, dist1, cfg.seed * 104729 + i))
        run = simulate_batch(problem, F, np.array(alphas), np.array([r[0] for r in rows]),
                             sels, seed=cfg.seed, watch=dist_many, threshold=cfg.epsilon,
                             stop_on_exceed=True, record=True, watch_every=cfg.watch_every)
        escaped = np.flatnonzero(run.first_exceed >= 0)
        worst = float(run.sup_watch.max())
        results.append({"delta": delta, "alpha_bar": ab, "n_trials": len(rows),
                        "escaped": int(escaped.size), "worst_excursion": worst})
        if escaped.size and witness is None:
            r = int(escaped[np.argmax(run.sup_watch[escaped])])
            k = int(run.first_exceed[r])
            witness = {"delta": delta, "alpha_bar": ab, "x0": rows[r][0].copy(),
                       "schedule": rows[r][1], "selector": rows[r][2], "k_escape": k,
                       "excursion": float(run.sup_watch[r]),
                       "points": run.points[r, : k + 1].copy()}
    passing = [r for r in results if r["escaped"] == 0]
    stats = {"target": target, "epsilon": cfg.epsilon, "pairs": results,
             "n_trials": sum(r["n_trials"] for r in results), "K": cfg.K}
    if passing:
        best = max(passing, key=lambda r: (r["delta"], r["alpha_bar"]))
        stats.update(delta=best["delta"], alpha_bar=best["alpha_bar"])
        return ProbeReport(NO_VIOLATION_FOUND, best["worst_excursion"] - cfg.epsilon, None,
                           stats)
    stats.update(delta=results[0]["delta"], alpha_bar=results[0]["alpha_bar"])
    margin = min(r["worst_excursion"] for r in results) - cfg.epsilon
    return ProbeReport(COUNTEREXAMPLE, margin, witness, stats)


def _unit_ball(cfg, n):
    """Fixed unit-ball offsets so that trial sets are nested across delta."""
    rng = np.random.default_rng(cfg.seed)
    return sample_ball(rng, np.zeros(n), 1.0, cfg.N_init)


def probe_point_stability(problem, F: Field, x_bar, cfg: StabilityProbeConfig) -> ProbeReport:
    """Search for iterates leaving ``B_eps(x̄)`` from starts in ``B_delta(x̄)``.

    Passes when at least one grid pair shows no escape; ``stats`` records the
    largest such pair and per-pair excursions.  ``worst_margin`` is the sup
    excursion minus ``epsilon`` for the reported pair.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    W = _unit_ball(cfg, x_bar.size)

    def dist_many(X):
        D = X - x_bar
        return np.sqrt(np.einsum("ij,ij->i", D, D))

    return _probe_pairs(problem, F, dist_many, lambda d: x_bar + d * W, cfg,
                        target="(" + " ".join(format(float(v), ".6g") for v in x_bar) + ")")


def probe_set_stability(problem, F: Field, X: SetDescriptor,
                        cfg: StabilityProbeConfig) -> ProbeReport:
    """As :func:`probe_point_stability` with ``d(·, X)``; starts are ``x_i + delta w_i``, ``x_i ∈ X``."""
    rng = np.random.default_rng(cfg.seed + 1)
    anchors = X.sample(rng, cfg.N_init)
    W = _unit_ball(cfg, X.dim)
    return _probe_pairs(problem, F, X.dist_many, lambda d: anchors + d * W, cfg,
                        target=X.label or X.kind)


# ---------------------------------------------------------------------------
# convergence and attraction


def _starts(problem, starts, N_init, seed, accept=None):
    if starts is not None:
        S = np.atleast_2d(np.asarray(starts, dtype=float))
        return S
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < N_init:
        batch = problem.sample("basin", rng, N_init)
        out.extend(x for x in batch if accept is None or accept(x))
    return np.array(out[:N_init])


def probe_asymptotic(problem, F: Field, X: SetDescriptor, p: float, c: float, N_init: int,
                     K: int, eps_final: float, starts=None, cap: Optional[float] = None,
                     seed: int = 0, window: Optional[int] = None) -> ProbeReport:
    """Check ``d(x_k, X)`` shrinks along ``alpha_k = min(cap, c/(k+1)^{1/p})``.

    Distances are measured at checkpoints ``K/4, K/2, K`` as the maximum
    over the preceding ``window`` steps (default ``K/50``), which absorbs
    the step-size-scale chatter around the set.  A start passes when the
    three values are non-increasing and the last is at most ``eps_final``.
    """
    S = _starts(problem, starts, N_init, seed)
    sch = make_power_schedule(c, p, c if cap is None else cap)
    sels = [Selector("random", seed=seed + i) for i in range(len(S))]
    run = simulate_batch(problem, F, np.tile(sch.alphas(K), (len(S), 1)), S, sels,
                         seed=seed, record=True)
    w = max(1, K // 50) if window is None else int(window)
    checkpoints = [max(1, K // 4), max(1, K // 2), K]
    table = np.empty((len(S), 3))
    for j, kc in enumerate(checkpoints):
        seg = run.points[:, max(0, kc - w): kc + 1]
        d = X.dist_many(seg.reshape(-1, seg.shape[2])).reshape(seg.shape[:2])
        table[:, j] = d.max(axis=1)
    mono = np.all(np.diff(table, axis=1) <= 1e-12, axis=1)
    final_ok = table[:, 2] <= eps_final
    ok = mono & final_ok & np.array([i not in run.errors for i in range(len(S))])
    margin = float(np.max(table[:, 2] - eps_final))
    stats = {"checkpoints": checkpoints, "window": w, "distances": table,
             "schedule": sch.describe(), "n_trials": len(S), "p": p,
             "hit_rate": float(ok.mean()), "errors": run.errors,
             "target": X.label or X.kind, "epsilon": eps_final}
    if ok.all():
        return ProbeReport(NO_VIOLATION_FOUND, margin, None, stats)
    i = int(np.flatnonzero(~ok)[0])
    return ProbeReport(COUNTEREXAMPLE, margin,
                       {"x0": S[i].copy(), "distances": table[i].copy(),
                        "monotone": bool(mono[i]), "points": run.points[i].copy()}, stats)


def hitting_times(dist: np.ndarray, eps: float) -> np.ndarray:
    """First ``k`` after which every entry of each row stays ``<= eps``.

    Rows that end outside get ``len(row)``, i.e. no finite hitting time.
    """
    dist = np.atleast_2d(dist)
    out = dist > eps
    K1 = dist.shape[1]
    last = np.where(out.any(axis=1), K1 - 1 - np.argmax(out[:, ::-1], axis=1), -1)
    return last + 1


def probe_attractor(problem, F: Field, A: SetDescriptor, p: float, basin, eps: float,
                    N_init: int, K: int, c: float = 1.0, cap: Optional[float] = None,
                    seed: int = 0, f_bar: Optional[float] = None) -> ProbeReport:
    """Hitting times into ``B_eps(A)`` from starts drawn by ``basin(rng, m)``.

    Starts are rejected unless ``f(x0) <= sup_A f`` (estimated from samples
    of ``A`` when ``f_bar`` is not given) and ``g(x0)`` is finite.  Steps
    follow ``min(cap, c/(k+1)^{1/p})`` with a random selector per start.
    The probe passes when every start has a hitting time ``k0 <= K``.
    """
    rng = np.random.default_rng(seed)
    if f_bar is None:
        f_bar = max(problem.f(a) for a in A.sample(np.random.default_rng(seed + 1), 256))
    tol = 1e-12 * (1 + abs(f_bar))

    def accept(x):
        if problem.f(x) > f_bar + tol:
            return False
        g = problem.g
        if g is not None:
            with np.errstate(all="ignore"):
                return bool(np.isfinite(g(x)))
        return True

    S = []
    draws = 0
    while len(S) < N_init:
        if draws > 1000 * N_init:
            raise ParameterError("basin sampler does not produce admissible starts")
        for x in np.atleast_2d(basin(rng, N_init)):
            draws += 1
            if accept(x) and len(S) < N_init:
                S.append(x)
    S = np.array(S)
    sch = make_power_schedule(c, p, c if cap is None else cap)
    sels = [Selector("random", seed=seed + i) for i in range(len(S))]
    run = simulate_batch(problem, F, np.tile(sch.alphas(K), (len(S), 1)), S, sels,
                         seed=seed, watch=A.dist_many, threshold=eps)
    k0 = np.where(run.last_exceed < 0, 0, run.last_exceed + 1)
    hit = (k0 <= K) & (run.last_exceed < K)
    for i in run.errors:
        hit[i] = False
    stats = {"k0": k0, "k0_min": int(k0.min()), "k0_median": float(np.median(k0)),
             "k0_max": int(k0.max()), "hit_rate": float(hit.mean()), "n_trials": len(S),
             "schedule": sch.describe(), "p": p, "epsilon": eps, "f_bar": f_bar,
             "target": A.label or A.kind, "basin": "user sampler (one bounded subset)"}
    margin = float(np.max(A.dist_many(run.final)) - eps)
    if hit.all():
        return ProbeReport(NO_VIOLATION_FOUND, margin, None, stats)
    i = int(np.flatnonzero(~hit)[0])
    return ProbeReport(COUNTEREXAMPLE, margin,
                       {"x0": S[i].copy(), "final": run.final[i].copy(),
                        "error": run.errors.get(i)}, stats)


# ---------------------------------------------------------------------------
# geometric estimators


@dataclass(frozen=True)
class SubregularityFit:
    tau: float
    max_residual: float
    n_used: int
    n_excluded: int

    def __iter__(self):
        return iter((self.tau, self.max_residual))


def estimate_subregularity(problem, M: SetDescriptor, x_bar, radii, N_per_radius: int,
                           seed: int = 0) -> SubregularityFit:
    """Log-log slope of ``d(x, M)`` against ``d(0, ∂f(x))`` on shells around ``x̄``.

    Shell ``r`` holds ``N_per_radius`` uniform points with ``r/2 <= |x - x̄| <= r``.
    Points on ``M`` and points off ``M`` with a zero subgradient are excluded.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    n = x_bar.size
    rng = np.random.default_rng(seed)
    pts = []
    for r in radii:
        z = rng.standard_normal((N_per_radius, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        rad = r * (0.5 + 0.5 * rng.random(N_per_radius) ** (1 / n)) if n > 1 else \
            r * (0.5 + 0.5 * rng.random(N_per_radius))
        pts.append(x_bar + z * rad[:, None])
    P = np.vstack(pts)
    d = M.dist_many(P)
    s = np.array([problem.subgradient_norm(x) for x in P])
    use = (d > 0) & (s > 0)
    excluded = int(np.sum((d > 0) & (s == 0)))
    if use.sum() < 2:
        raise ParameterError("fewer than two usable samples")
    lx, ly = np.log(s[use]), np.log(d[use])
    slope, icpt = np.polyfit(lx, ly, 1)
    res = float(np.max(np.abs(ly - (slope * lx + icpt))))
    return SubregularityFit(float(slope), res, int(use.sum()), excluded)


def check_verdier(problem, M: SetDescriptor, x_bar, N: int, r: float = 0.1,
                  decades: float = 3.0, seed: int = 0, cap: float = VERDIER_CAP,
                  slope_min: float = VERDIER_SLOPE_MIN) -> ProbeReport:
    """Ratios ``|P_{T_y M} v| / (|x - y| |v|)`` with ``y`` the projection of ``x`` on ``M``.

    Samples sit at log-uniform distances ``r 10^{-decades}..r`` from ``x̄``.
    Bounded means the largest ratio is at most ``cap`` and the log-log slope
    of the ratio against ``|x - y|`` is at least ``slope_min`` (no growth as
    ``x`` approaches ``M``).  ``worst_margin`` is the largest ratio.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    n = x_bar.size
    rng = np.random.default_rng(seed)
    z = rng.standard_normal((N, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    P = x_bar + z * (r * 10.0 ** (-decades * rng.random(N)))[:, None]
    D = problem.field_bouligand
    ratios, dists = [], []
    skipped = 0
    witness_x = None
    for x in P:
        try:
            y, T = M.project(x)
        except Exception:
            skipped += 1
            continue
        dxy = float(np.linalg.norm(x - y))
        if dxy == 0.0:
            skipped += 1
            continue
        for v in D(x).directions:
            nv = np.linalg.norm(v)
            if nv == 0.0:
                continue
            ratio = float(np.linalg.norm(T @ v)) / (dxy * nv)
            ratios.append(ratio)
            dists.append(dxy)
            if ratio >= max(ratios):
                witness_x = x
    if len(ratios) < 2:
        raise ParameterError("too few usable samples")
    ratios, dists = np.array(ratios), np.array(dists)
    pos = ratios > 0
    slope = float(np.polyfit(np.log(dists[pos]), np.log(ratios[pos]), 1)[0]) \
        if pos.sum() >= 2 else 0.0
    worst = float(ratios.max())
    stats = {"slope": slope, "n_samples": len(ratios), "skipped": skipped, "cap": cap}
    if worst <= cap and slope >= slope_min:
        return ProbeReport(NO_VIOLATION_FOUND, worst, None, stats)
    return ProbeReport(COUNTEREXAMPLE, worst, {"x": witness_x, "ratio": worst,
                                               "slope": slope}, stats)


def check_distance_lower_bound(problem, M: SetDescriptor, x_bar, alpha_bar: float,
                               rho: float, N: int, A: int, seed: int = 0,
                               field: Optional[Field] = None,
                               on_set_fraction: float = 0.25) -> ProbeReport:
    """Check ``d(x + alpha u, M) + d(x, M) >= alpha/2`` for ``u ∈ -∇̂f(x)``.

    Points are uniform in ``B_rho(x̄)``; a fraction is projected onto ``M``
    so that the on-set case is exercised.  ``worst_margin`` is the smallest
    value of the left side minus ``alpha/2``.
    """
    x_bar = np.asarray(x_bar, dtype=float)
    F = field if field is not None else problem.descent("normalized")
    rng = np.random.default_rng(seed)
    P = sample_ball(rng, x_bar, rho, N)
    n_on = int(round(on_set_fraction * N))
    for i in range(n_on):
        P[i] = M.project(P[i])[0]
    alphas = alpha_grid(alpha_bar, A, 3.0)
    base = M.dist_many(P)
    Y, B, AL, src = [], [], [], []
    for i, x in enumerate(P):
        for u in F(x).directions:
            for a in alphas:
                Y.append(x + a * u)
                B.append(base[i])
                AL.append(a)
                src.append(i)
    Y = np.array(Y)
    margins = M.dist_many(Y) + np.array(B) - np.array(AL) / 2
    j = int(np.argmin(margins))
    worst = float(margins[j])
    stats = {"n_trials": len(Y), "n_on_set": n_on, "rho": rho, "alpha_bar": alpha_bar}
    if worst >= -DISTANCE_BOUND_TOL:
        return ProbeReport(NO_VIOLATION_FOUND, worst, None, stats)
    return ProbeReport(COUNTEREXAMPLE, worst,
                       {"x": P[src[j]].copy(), "x_next": Y[j].copy(), "alpha": AL[j]}, stats)


# ---------------------------------------------------------------------------
# CSV

PROBE_CSV_HEADER = ("probe,target,epsilon,delta,alpha_bar,p,n_trials,worst_excursion,"
                    "hit_rate,verdict")


def probe_csv_row(probe: str, report: ProbeReport) -> str:
    st = report.stats

    def fmt(key):
        v = st.get(key)
        return "" if v is None else format(float(v), ".17g")

    return ",".join([probe, str(st.get("target", "")), fmt("epsilon"), fmt("delta"),
                     fmt("alpha_bar"), fmt("p"), str(st.get("n_trials", "")),
                     format(float(report.worst_margin), ".17g"), fmt("hit_rate"),
                     report.verdict])
