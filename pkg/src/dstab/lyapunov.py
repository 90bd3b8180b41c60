"""Sampling-based falsifiers for discrete Lyapunov decrease inequalities.

All verifiers sweep region points ``x``, every direction of the field
sample ``F(x)`` and log-spaced steps ``alpha ∈ (0, alpha_bar]``.  A
``NO_VIOLATION_FOUND`` verdict means no tested triple broke the inequality;
it is not a proof.

Non-strict inequalities use the tolerance ``1e-12 (1 + |g(x)|)``.  Points
where ``g(x) = +inf`` pass vacuously.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, HorizonError, ParameterError,
                   ProbeReport, RegionError, sample_ball)
from .fields import Field, _region_points, min_norm_element

G_TOL = 1e-12
STRICT_TOL = 1e-12
CONSERVED_TOL = 1e-8
FIRST_ORDER_TOL = 1e-10
ZETA_FLAG_ABS = 1e-8
ZETA_FLAG_REL = 1e-3


class EvaluationError(ArithmeticError):
    """``g`` returned NaN."""

    def __init__(self, point, what="g"):
        super().__init__(f"{what} is NaN at x={np.array2string(np.asarray(point), precision=17)}")
        self.point = np.asarray(point)


class UnsupportedPointError(ValueError):
    """The closed-form derivatives of ``g`` do not apply at the requested point."""


@dataclass(frozen=True)
class DecreaseCertificate:
    kind: str
    omega: float
    alpha_bar: float
    report: ProbeReport
    p: Optional[float] = None
    q: Optional[int] = None
    region: str = ""
    notes: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.report.passed

    CSV_HEADER = "check,region,p,q,omega,alpha_bar,n_trials,worst_margin,verdict"

    def csv_row(self) -> str:
        def fmt(v):
            return "" if v is None else format(float(v), ".17g")

        return ",".join([self.kind, self.region, fmt(self.p),
                         "" if self.q is None else str(self.q), fmt(self.omega),
                         fmt(self.alpha_bar), str(self.report.stats.get("n_trials", 0)),
                         fmt(self.report.worst_margin), self.report.verdict])


def alpha_grid(alpha_bar: float, A: int, decades: float = 3.0) -> np.ndarray:
    """``A`` log-spaced steps in ``[alpha_bar 10^-decades, alpha_bar]``."""
    if not alpha_bar > 0:
        raise ParameterError("alpha_bar must be positive")
    if A < 1:
        raise ParameterError("A must be at least 1")
    if A == 1:
        return np.array([alpha_bar])
    return np.geomspace(alpha_bar * 10.0 ** (-decades), alpha_bar, A)


def _gval(g, x) -> float:
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        v = float(g(x))
    if math.isnan(v):
        raise EvaluationError(x)
    return v


def _sweep(g, F: Field, pts, alphas):
    """Yield ``(x, gx, u, alpha, gy)`` over all finite-g points, directions and steps."""
    for x in pts:
        gx = _gval(g, x)
        if gx == math.inf:
            continue
        for u in F(x).directions:
            for a in alphas:
                yield x, gx, u, a, _gval(g, x + a * u)


def _decrease_report(g, F, pts, alphas, p, omega):
    worst = -math.inf
    witness = None
    n = 0
    n_inf = 0
    for x, gx, u, a, gy in _sweep(g, F, pts, alphas):
        n += 1
        margin = gy - gx + omega * a ** p
        tol = G_TOL * (1 + abs(gx))
        if margin > worst:
            worst = margin
        if margin > tol and (witness is None or margin > witness["margin"]):
            witness = {"x": x.copy(), "u": u.copy(), "alpha": float(a), "margin": margin,
                       "g_x": gx, "g_next": gy}
    for x in pts:
        if _gval(g, x) == math.inf:
            n_inf += 1
    stats = {"n_trials": n, "n_points": len(pts), "vacuous_points": n_inf,
             "alpha_min": float(alphas.min()), "alpha_max": float(alphas.max())}
    verdict = COUNTEREXAMPLE if witness is not None else NO_VIOLATION_FOUND
    return ProbeReport(verdict, float(worst), witness, stats)


def verify_dL(g, F: Field, region, alpha_bar: float, N: int, A: int, seed: int = 0,
              decades: float = 3.0, label: str = "") -> DecreaseCertificate:
    """Falsify ``g(x + alpha u) <= g(x)``."""
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    rep = _decrease_report(g, F, pts, alpha_grid(alpha_bar, A, decades), 1.0, 0.0)
    return DecreaseCertificate("dL", 0.0, alpha_bar, rep, region=label)


def verify_p_dL(g, F: Field, region, p: float, omega: float, alpha_bar: float, N: int,
                A: int, seed: int = 0, decades: float = 3.0,
                label: str = "") -> DecreaseCertificate:
    """Falsify ``g(x + alpha u) - g(x) <= -omega alpha^p``.

    ``worst_margin`` is the largest ``g(x + alpha u) - g(x) + omega alpha^p``.
    """
    if p < 1:
        raise ParameterError("p must be >= 1")
    if not omega > 0:
        raise ParameterError("omega must be positive")
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    rep = _decrease_report(g, F, pts, alpha_grid(alpha_bar, A, decades), p, omega)
    return DecreaseCertificate("pdL", omega, alpha_bar, rep, p=p, region=label)


# ---------------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class Calibration:
    omega_raw: float
    alpha_bar: float
    halvings: int

    @property
    def omega(self) -> float:
        """The value actually certified: half the raw grid minimum."""
        return self.omega_raw / 2


def calibrate_p_dL(g, F: Field, region, p: float, alpha_bar: float, N: int, A: int,
                   seed: int = 0, decades: float = 1.0, max_halvings: int = 30) -> Calibration:
    """Grid minimum of ``(g(x) - g(x + alpha u)) / alpha^p``, halving ``alpha_bar`` until positive.

    The calibration grid spans only ``decades`` decades below ``alpha_bar``:
    for large ``p`` the decrease at tiny steps sits below round-off and the
    ratio there is noise.
    """
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    ab = alpha_bar
    for h in range(max_halvings + 1):
        alphas = alpha_grid(ab, A, decades)
        ratio = min(((gx - gy) / a ** p for _, gx, _, a, gy in _sweep(g, F, pts, alphas)),
                    default=math.inf)
        if ratio > 0:
            return Calibration(float(ratio), ab, h)
        ab /= 2
    raise RegionError(f"no positive decrease ratio after {max_halvings} halvings")


def certify_p_dL(g, F, region, p, alpha_bar, N, A, seed=0, label="") -> DecreaseCertificate:
    """Calibrate ``omega`` then verify at ``omega/2`` over the full step grid."""
    cal = calibrate_p_dL(g, F, region, p, alpha_bar, N, A, seed)
    cert = verify_p_dL(g, F, region, p, cal.omega, cal.alpha_bar, N, A, seed, label=label)
    cert.notes.update(omega_raw=cal.omega_raw, halvings=cal.halvings)
    return cert


# ---------------------------------------------------------------------------
# q-step decrease


def schedule_family(alpha_bar: float, q: int, A: int = 6, n_random: int = 4,
                    seed: int = 0) -> list:
    """``q``-step sequences in ``(0, alpha_bar]``: constant, power-law tails, random."""
    seqs = []
    j = np.arange(q)
    for a in alpha_grid(alpha_bar, A, 2.0):
        seqs.append(np.full(q, a))
        for k0, pp in ((0, 2.0), (10, 1.0), (100, 6.0)):
            seqs.append(a * ((k0 + 1) / (k0 + 1 + j)) ** (1 / pp))
    rng = np.random.default_rng(seed)
    for _ in range(n_random):
        seqs.append(alpha_bar * (1.0 - rng.random(q)))
    return seqs


def verify_pq_dL(g, F: Field, region, p: float, q: int, omega: float, alpha_bar: float,
                 N: int, schedules: Optional[Sequence] = None, seed: int = 0,
                 branch_cap: Optional[int] = None, label: str = "") -> DecreaseCertificate:
    """Falsify ``g(x_q) - g(x_0) <= -omega min(alpha_0..alpha_{q-1})^p``.

    Every selection branch of the ``q``-step tree is followed up to
    ``branch_cap`` (default ``4**q``) leaves per start and schedule; when the
    cap bites, the report's stats say so.
    """
    if q < 1:
        raise ParameterError("q must be >= 1")
    if p < 1 or not omega > 0:
        raise ParameterError("need p >= 1 and omega > 0")
    cap = 4 ** q if branch_cap is None else int(branch_cap)
    seqs = [np.asarray(s, float) for s in
            (schedules if schedules is not None else schedule_family(alpha_bar, q, seed=seed))]
    if any(len(s) != q or np.any(s <= 0) or np.any(s > alpha_bar * (1 + 1e-15)) for s in seqs):
        raise ParameterError(f"schedules must be {q} steps in (0, alpha_bar]")
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    worst = -math.inf
    witness = None
    n = 0
    capped = 0
    for x0 in pts:
        g0 = _gval(g, x0)
        if g0 == math.inf:
            continue
        tol = G_TOL * (1 + abs(g0))
        for seq in seqs:
            leaves = [x0]
            for a in seq:
                nxt = []
                for x in leaves:
                    for u in F(x).directions:
                        if len(nxt) >= cap:
                            capped += 1
                            break
                        nxt.append(x + a * u)
                leaves = nxt
            decrease = omega * float(seq.min()) ** p
            for xq in leaves:
                n += 1
                margin = _gval(g, xq) - g0 + decrease
                worst = max(worst, margin)
                if margin > tol and (witness is None or margin > witness["margin"]):
                    witness = {"x": x0.copy(), "x_q": xq.copy(), "alphas": seq.copy(),
                               "margin": margin}
    stats = {"n_trials": n, "n_points": len(pts), "n_schedules": len(seqs),
             "branch_cap": cap, "cap_hits": capped}
    if capped:
        stats["notice"] = f"branch cap {cap} reached {capped} times; tree truncated"
    rep = ProbeReport(COUNTEREXAMPLE if witness is not None else NO_VIOLATION_FOUND,
                      float(worst), witness, stats)
    return DecreaseCertificate("pqdL", omega, alpha_bar, rep, p=p, q=q, region=label)


def calibrate_pq_dL(g, F, region, p, q, alpha_bar, N, schedules=None, seed=0) -> Calibration:
    """Smallest ``(g(x_0) - g(x_q)) / min(alpha)^p`` over the same sweep as :func:`verify_pq_dL`."""
    tiny = 1e-300
    cert = verify_pq_dL(g, F, region, p, q, tiny, alpha_bar, N, schedules, seed)
    # rerun collecting ratios; the verifier above already validated the inputs
    seqs = [np.asarray(s, float) for s in
            (schedules if schedules is not None else schedule_family(alpha_bar, q, seed=seed))]
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    ratio = math.inf
    for x0 in pts:
        g0 = _gval(g, x0)
        if g0 == math.inf:
            continue
        for seq in seqs:
            leaves = [x0]
            for a in seq:
                leaves = [x + a * u for x in leaves for u in F(x).directions][: 4 ** q]
            for xq in leaves:
                ratio = min(ratio, (g0 - _gval(g, xq)) / float(seq.min()) ** p)
    if not ratio > 0:
        raise RegionError(f"no positive q-step decrease ratio (worst {cert.report.worst_margin})")
    return Calibration(float(ratio), alpha_bar, 0)


# ---------------------------------------------------------------------------
# first and second order certificates


def _need_diff(g, x, what="gradient"):
    if getattr(g, "grad", None) is None:
        raise UnsupportedPointError(f"g has no closed-form {what}")
    if not g.differentiable(x):
        raise UnsupportedPointError(f"g is not differentiable at {x}")


def check_first_order(g, F: Field, x_bar) -> tuple:
    """``s = max_{u ∈ F(x̄)} <∇g(x̄), u>``; certificate iff ``s < -1e-12``."""
    x = np.asarray(x_bar, dtype=float)
    _need_diff(g, x)
    s = float(np.max(F(x).directions @ g.grad(x)))
    return s, s < -STRICT_TOL


def check_second_order(g, F: Field, x_bar, r: float, N: int, seed: int = 0) -> tuple:
    """``s2 = max_u <∇²g(x̄)u, u>``; certificate iff ``<∇g, u> <= 1e-10`` near ``x̄`` and ``s2 < -1e-12``.

    The first-order condition is sampled at ``x̄`` and ``N`` uniform points of
    ``B_r(x̄)`` where ``g`` is differentiable.
    """
    x = np.asarray(x_bar, dtype=float)
    _need_diff(g, x)
    if g.hess is None:
        raise UnsupportedPointError("g has no closed-form Hessian")
    rng = np.random.default_rng(seed)
    first = -math.inf
    for y in np.vstack([x[None, :], sample_ball(rng, x, r, N)]):
        if not g.differentiable(y):
            continue
        first = max(first, float(np.max(F(y).directions @ g.grad(y))))
    H = g.hess(x)
    D = F(x).directions
    s2 = float(np.max(np.einsum("ij,jk,ik->i", D, H, D)))
    return s2, bool(first <= FIRST_ORDER_TOL and s2 < -STRICT_TOL)


# ---------------------------------------------------------------------------
# conserved quantities


def check_conserved(C, F: Field, region, N: int, seed: int = 0) -> ProbeReport:
    """Largest ``|<∇C(x), u>| / (1 + |∇C(x)|)``; passes iff ``<= 1e-8``."""
    return check_conserved_many([C], F, region, N, seed)[0]


def check_conserved_many(Cs, F: Field, region, N: int, seed: int = 0) -> list:
    """:func:`check_conserved` for several quantities on shared points, one field
    evaluation per point."""
    pts = _region_points(region, np.random.default_rng(seed), N, F.dim)
    worst = [0.0] * len(Cs)
    witness = [None] * len(Cs)
    skipped = [0] * len(Cs)
    for x in pts:
        D = None
        for k, C in enumerate(Cs):
            if not C.differentiable(x):
                skipped[k] += 1
                continue
            gC = C.grad(x)
            if not np.all(np.isfinite(gC)):
                skipped[k] += 1
                continue
            if D is None:
                D = F(x).directions
            m = np.abs(D @ gC) / (1 + np.linalg.norm(gC))
            i = int(np.argmax(m))
            if m[i] > worst[k]:
                worst[k] = float(m[i])
                if worst[k] > CONSERVED_TOL:
                    witness[k] = {"x": x.copy(), "u": D[i].copy(), "margin": worst[k]}
    return [ProbeReport(COUNTEREXAMPLE if w is not None else NO_VIOLATION_FOUND, v, w,
                        {"n_points": len(pts), "skipped": sk})
            for v, w, sk in zip(worst, witness, skipped)]


# ---------------------------------------------------------------------------
# descent window


def estimate_zeta(problem, ell: float, X, r: float, N: int, seed: int = 0,
                  field: Optional[Field] = None, budget: int = 10**6) -> float:
    """``min d(0, co D(x))`` over ``N`` samples of ``B_r(X) ∩ [ell/2 <= f <= ell]``.

    ``D`` defaults to the problem's Bouligand field (a conservative field
    for the catalog's locally Lipschitz objectives).  Draws come from balls
    of radius ``r`` around points of ``X``.  A warning flags ``ζ̂ < 1e-8`` or
    ``ζ̂`` below ``1e-3`` times the median sampled value.
    """
    D = field if field is not None else problem.field_bouligand
    rng = np.random.default_rng(seed)
    accepted = []
    drawn = 0
    while len(accepted) < N:
        if drawn >= budget:
            raise RegionError(f"annulus sampling accepted {len(accepted)} of {N} "
                              f"within {budget} draws")
        m = min(4096, budget - drawn)
        centers = X.sample(rng, m)
        z = rng.standard_normal(centers.shape)
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        Y = centers + z * (r * rng.random(m) ** (1 / problem.dim))[:, None]
        drawn += m
        fv = np.array([problem.f(y) for y in Y])
        ok = (fv >= ell / 2) & (fv <= ell)
        if ok.any():
            Y = Y[ok]
            Y = Y[X.dist_many(Y) <= r]
            accepted.extend(Y[: N - len(accepted)])
    norms = np.array([np.linalg.norm(min_norm_element(D(y).directions)) for y in accepted])
    zeta = float(norms.min())
    # sampling almost never lands on a critical point, so also flag a minimum
    # that is tiny relative to the typical value
    if zeta < ZETA_FLAG_ABS or zeta < ZETA_FLAG_REL * float(np.median(norms)):
        warnings.warn(f"ζ̂ = {zeta:.3e}: the annulus appears to contain a critical point",
                      RuntimeWarning, stacklevel=2)
    return zeta


def check_descent_window(traj, ell: float, kappa: float, zeta: float, T: float) -> ProbeReport:
    """Check ``f(x_k) <= ell - min(ell, kappa zeta^2 T)/6`` for ``T/2 <= t_k <= T``
    and ``f(x_k) <= 3 ell/2`` for ``t_k <= T``.

    ``worst_margin`` is the larger of the two maximal excesses.
    """
    if traj.f_values[0] > ell:
        raise ParameterError(f"trajectory starts above ell: f(x0) = {traj.f_values[0]}")
    if traj.times[-1] < T:
        raise HorizonError(f"trajectory ends at t = {traj.times[-1]} < T = {T}")
    t, fv = traj.times, traj.f_values
    bound = ell - min(ell, kappa * zeta ** 2 * T) / 6
    window = (t >= T / 2) & (t <= T)
    upto = t <= T
    m1 = float(np.max(fv[window] - bound)) if window.any() else -math.inf
    m2 = float(np.max(fv[upto] - 1.5 * ell))
    tol = G_TOL * (1 + ell)
    stats = {"bound": bound, "window_size": int(window.sum()),
             "margin_window": m1, "margin_sublevel": m2, "vacuous": not window.any()}
    worst = max(m1, m2)
    if worst > tol:
        which = "window" if m1 > tol else "sublevel"
        mask = window if which == "window" else upto
        lim = bound if which == "window" else 1.5 * ell
        k = int(np.flatnonzero(mask)[np.argmax(fv[mask] - lim)])
        return ProbeReport(COUNTEREXAMPLE, worst,
                           {"k": int(traj.k[k]), "t": float(t[k]), "f": float(fv[k]),
                            "bound": lim, "which": which}, stats)
    return ProbeReport(NO_VIOLATION_FOUND, worst, None, stats)
