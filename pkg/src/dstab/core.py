"""Shared value types: step schedules, set descriptors and probe reports.

Everything here is immutable after construction.  Points are plain 1-D
``numpy`` float arrays; collections of points are ``(m, n)`` arrays.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

TOL_SET = 1e-10

GOLDEN_ITERATIONS = 24
NEWTON_ITERATIONS = 3
_INV_PHI = (np.sqrt(5.0) - 1.0) / 2.0


class ParameterError(ValueError):
    """Invalid parameter passed to a constructor or operation."""


class DimensionError(ValueError):
    """Point and set (or field) dimensions disagree."""


class RegionError(RuntimeError):
    """A sampler could not produce points in the requested region."""


class HorizonError(RuntimeError):
    """A trajectory is too short or leaves its admissible box."""


def as_point(x, n: Optional[int] = None) -> np.ndarray:
    """Return ``x`` as a finite float64 vector, checking its dimension."""
    p = np.array(x, dtype=float).reshape(-1)
    if not np.all(np.isfinite(p)):
        raise ParameterError(f"point has non-finite entries: {p}")
    if n is not None and p.size != n:
        raise DimensionError(f"expected dimension {n}, got {p.size}")
    return p


# ---------------------------------------------------------------------------
# step schedules


@dataclass(frozen=True)
class StepSchedule:
    """Step-size rule ``alpha_k``.

    ``constant``: ``min(cap, c)``.  ``power``: ``min(cap, c / (k+1)**(1/p))``.
    ``random``: i.i.d. uniform on ``(0, cap]`` drawn from ``seed``; used by the
    stability probes.
    """

    kind: str
    c: float
    cap: float
    p: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("constant", "power", "random"):
            raise ParameterError(f"unknown schedule kind {self.kind!r}")
        if not self.c > 0:
            raise ParameterError(f"c must be positive, got {self.c}")
        if not self.cap > 0:
            raise ParameterError(f"cap must be positive, got {self.cap}")
        if self.kind == "power" and not self.p >= 1:
            raise ParameterError(f"p must be >= 1, got {self.p}")

    def alpha(self, k: int) -> float:
        return float(self.alphas(k + 1)[k])

    def alphas(self, K: int) -> np.ndarray:
        """The first ``K`` steps ``alpha_0 .. alpha_{K-1}``."""
        if self.kind == "constant":
            return np.full(K, min(self.cap, self.c))
        if self.kind == "power":
            k = np.arange(1, K + 1, dtype=float)
            return np.minimum(self.cap, self.c / k ** (1.0 / self.p))
        rng = np.random.default_rng(self.seed)
        # 1 - U lies in (0, 1]
        return self.cap * (1.0 - rng.random(K))

    def describe(self) -> str:
        if self.kind == "power":
            return f"pow:c={self.c:g},p={self.p:g},cap={self.cap:g}"
        if self.kind == "constant":
            return f"const:c={self.c:g}"
        return f"rand:cap={self.cap:g},seed={self.seed}"


def make_power_schedule(c: float, p: float, cap: float) -> StepSchedule:
    return StepSchedule("power", c=float(c), p=float(p), cap=float(cap))


def make_constant_schedule(c: float, cap: Optional[float] = None) -> StepSchedule:
    return StepSchedule("constant", c=float(c), cap=float(c if cap is None else cap))


def make_random_schedule(cap: float, seed: int) -> StepSchedule:
    return StepSchedule("random", c=float(cap), cap=float(cap), seed=int(seed))


def compensated_cumsum(values: np.ndarray) -> np.ndarray:
    """Prefix sums with a leading zero, using Neumaier compensation."""
    out = np.empty(len(values) + 1)
    out[0] = 0.0
    s = 0.0
    comp = 0.0
    for i, v in enumerate(values.tolist()):
        t = s + v
        if abs(s) >= abs(v):
            comp += (s - t) + v
        else:
            comp += (v - t) + s
        s = t
        out[i + 1] = s + comp
    return out


def cumulative_times(schedule: StepSchedule, K: int) -> np.ndarray:
    """Times ``t_0 = 0, t_k = alpha_0 + ... + alpha_{k-1}`` for ``k <= K``."""
    if K < 0:
        raise ParameterError("K must be nonnegative")
    return compensated_cumsum(schedule.alphas(K))


# ---------------------------------------------------------------------------
# set descriptors


def _curve_derivative(curve, t, h=1e-6):
    return (curve(np.atleast_1d(t + h)) - curve(np.atleast_1d(t - h))) / (2 * h)


@dataclass(frozen=True)
class SetDescriptor:
    """A closed set ``X`` known through its distance function and a sampler.

    Use the constructors :func:`point_set`, :func:`parametric_curve`,
    :func:`finite_union` and :func:`sublevel_intersection` rather than
    building instances by hand.
    """

    kind: str
    dim: int
    _dist_many: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    _sample: Callable[[np.random.Generator, int], np.ndarray] = field(repr=False)
    _project: Optional[Callable[[np.ndarray], tuple]] = field(default=None, repr=False)
    label: str = ""
    meta: dict = field(default_factory=dict, repr=False)

    def dist(self, x) -> float:
        return float(self.dist_many(np.atleast_2d(as_point(x)))[0])

    def dist_many(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != self.dim:
            raise DimensionError(f"set lives in R^{self.dim}, points in R^{X.shape[1]}")
        return self._dist_many(X)

    def sample(self, rng: np.random.Generator, m: int) -> np.ndarray:
        return np.atleast_2d(self._sample(rng, m))

    def project(self, x) -> tuple:
        """Nearest point ``y`` and an orthonormal tangent basis ``T`` (rows) at ``y``."""
        if self._project is None:
            raise NotImplementedError(f"{self.kind} set has no projection")
        return self._project(as_point(x, self.dim))


def set_distance(x, X: SetDescriptor) -> float:
    return X.dist(x)


def point_set(points, label: str = "") -> SetDescriptor:
    """Finite set of points (a single point is the ``point`` kind)."""
    P = np.atleast_2d(np.asarray(points, dtype=float))
    kind = "point" if len(P) == 1 else "finite-union"

    def dist_many(X):
        d = np.linalg.norm(X[:, None, :] - P[None, :, :], axis=2)
        return d.min(axis=1)

    def sample(rng, m):
        return P[rng.integers(0, len(P), size=m)]

    def project(x):
        i = int(np.argmin(np.linalg.norm(P - x, axis=1)))
        return P[i].copy(), np.zeros((0, P.shape[1]))

    return SetDescriptor(kind, P.shape[1], dist_many, sample, project,
                         label=label, meta={"points": P})


def parametric_curve(curve: Callable[[np.ndarray], np.ndarray], t0: float, t1: float,
                     dim: int, periodic: bool = False, grid: int = 2048,
                     label: str = "", dcurve=None) -> SetDescriptor:
    """Image of ``[t0, t1]`` under a vectorised ``curve(t) -> (len(t), dim)``.

    Distances come from a dense parameter grid, then golden-section search
    and a few safeguarded Newton steps around the three best grid nodes;
    relative accuracy is far below 1e-8 for the smooth curves of the catalog.
    """
    tg = np.linspace(t0, t1, grid, endpoint=not periodic)
    Cg = curve(tg)
    h = tg[1] - tg[0]
    hd = 1e-5 * max(1.0, abs(t0), abs(t1))

    def _clip(t, lo, hi):
        return np.minimum(np.maximum(t, lo), hi)

    def _refine(X, lo, hi):
        # coarse golden section, then safeguarded Newton on |c(t) - x|^2
        a, b = lo.copy(), hi.copy()
        for _ in range(GOLDEN_ITERATIONS):
            c = b - _INV_PHI * (b - a)
            d = a + _INV_PHI * (b - a)
            fc = np.sum((curve(c) - X) ** 2, axis=1)
            fd = np.sum((curve(d) - X) ** 2, axis=1)
            left = fc < fd
            b = np.where(left, d, b)
            a = np.where(left, a, c)
        t = 0.5 * (a + b)
        r = curve(t) - X
        phi = np.sum(r * r, axis=1)
        for _ in range(NEWTON_ITERATIONS):
            cp, cm, c0 = curve(t + hd), curve(t - hd), curve(t)
            d1 = (cp - cm) / (2 * hd)
            d2 = (cp - 2 * c0 + cm) / (hd * hd)
            r = c0 - X
            g1 = np.sum(r * d1, axis=1)
            g2 = np.sum(d1 * d1, axis=1) + np.sum(r * d2, axis=1)
            with np.errstate(divide="ignore", invalid="ignore"):
                step = np.where(g2 > 0, g1 / g2, 0.0)
            tn = _clip(t - step, lo, hi)
            rn = curve(tn) - X
            phin = np.sum(rn * rn, axis=1)
            better = phin <= phi
            t = np.where(better, tn, t)
            phi = np.where(better, phin, phi)
        if not periodic:
            t = np.clip(t, t0, t1)
        return t, np.sqrt(np.sum((curve(t) - X) ** 2, axis=1))

    def nearest(X):
        best_t = np.empty(len(X))
        best_d = np.full(len(X), np.inf)
        chunk = max(1, 2_000_000 // (grid * dim))
        for s in range(0, len(X), chunk):
            Xs = X[s:s + chunk]
            m = len(Xs)
            D = np.sum((Xs[:, None, :] - Cg[None, :, :]) ** 2, axis=2)
            idx = np.argpartition(D, 2, axis=1)[:, :3] if grid > 3 else \
                np.argsort(D, axis=1)[:, :3]
            tc = tg[idx.T.ravel()]
            lo, hi = tc - h, tc + h
            if not periodic:
                lo, hi = np.maximum(lo, t0), np.minimum(hi, t1)
            t, d = _refine(np.tile(Xs, (idx.shape[1], 1)), lo, hi)
            t, d = t.reshape(-1, m), d.reshape(-1, m)
            j = np.argmin(d, axis=0)
            cols = np.arange(m)
            best_t[s:s + m], best_d[s:s + m] = t[j, cols], d[j, cols]
        return best_t, best_d

    def dist_many(X):
        return nearest(X)[1]

    def sample(rng, m):
        return curve(rng.uniform(t0, t1, size=m))

    def project(x):
        t, _ = nearest(x[None, :])
        y = curve(t)[0]
        dc = (dcurve(t) if dcurve is not None else _curve_derivative(curve, t[0]))
        tan = np.atleast_2d(dc)[0]
        return y, (tan / np.linalg.norm(tan))[None, :]

    return SetDescriptor("parametric-curve", dim, dist_many, sample, project,
                         label=label, meta={"curve": curve, "t0": t0, "t1": t1,
                                            "periodic": periodic})


def finite_union(parts: Sequence[SetDescriptor], label: str = "") -> SetDescriptor:
    parts = list(parts)
    dim = parts[0].dim
    if any(p.dim != dim for p in parts):
        raise DimensionError("all parts of a union must share the dimension")

    def dist_many(X):
        return np.min([p.dist_many(X) for p in parts], axis=0)

    def sample(rng, m):
        which = rng.integers(0, len(parts), size=m)
        out = np.empty((m, dim))
        for i, p in enumerate(parts):
            sel = which == i
            if sel.any():
                out[sel] = p.sample(rng, int(sel.sum()))
        return out

    def project(x):
        best = min(parts, key=lambda p: p.dist(x))
        return best.project(x)

    return SetDescriptor("finite-union", dim, dist_many, sample, project,
                         label=label, meta={"parts": parts})


def _param_intervals(mask: np.ndarray, tg: np.ndarray):
    """Maximal runs of True in ``mask`` as (start, stop) parameter pairs."""
    runs = []
    start = None
    for i, m in enumerate(mask):
        if m and start is None:
            start = i
        if not m and start is not None:
            runs.append((tg[start], tg[i - 1]))
            start = None
    if start is not None:
        runs.append((tg[start], tg[-1]))
    return runs


def sublevel_intersection(g: Callable, g_bar: float, base: SetDescriptor,
                          label: str = "", grid: int = 20001) -> SetDescriptor:
    """``[f <= fbar] ∩ [g <= gbar]`` where ``base`` describes ``[f <= fbar]``.

    ``base`` must be a parametric curve or a finite union of them; the
    constraint ``g <= gbar`` is resolved on a fine parameter grid and the
    result is the union of the admissible parameter arcs.
    """
    curves = base.meta["parts"] if base.kind == "finite-union" else [base]
    arcs = []
    for cdesc in curves:
        if cdesc.kind != "parametric-curve":
            raise ParameterError("sublevel_intersection needs parametric pieces")
        m = cdesc.meta
        tg = np.linspace(m["t0"], m["t1"], grid)
        with np.errstate(all="ignore"):
            gv = np.array([g(p) for p in m["curve"](tg)])
        for lo, hi in _param_intervals(gv <= g_bar, tg):
            if hi > lo:
                arcs.append(parametric_curve(m["curve"], lo, hi, base.dim))
            else:
                arcs.append(point_set(m["curve"](np.array([lo]))))
    if not arcs:
        raise RegionError("sublevel intersection is empty on the sampled grid")
    u = finite_union(arcs) if len(arcs) > 1 else arcs[0]
    return SetDescriptor("sublevel-intersection", base.dim, u._dist_many, u._sample,
                         u._project, label=label, meta={"arcs": arcs, "g_bar": g_bar})


def constraint_set(equalities: Sequence[Callable], dim: int,
                   sampler: Callable[[np.random.Generator, int], np.ndarray],
                   label: str = "", n_starts: int = 8) -> SetDescriptor:
    """Zero set of smooth functions, distances by SLSQP from several starts.

    Used for minimum sets that are not curves (e.g. the bilinear quadric).
    Starts are the query point and the nearest points of a fixed member cloud.
    """
    from scipy.optimize import minimize

    cloud = sampler(np.random.default_rng(12345), 4000)
    cons = [{"type": "eq", "fun": h} for h in equalities]

    def nearest(x):
        d0 = np.linalg.norm(cloud - x, axis=1)
        starts = [x] + [cloud[i] for i in np.argsort(d0)[:n_starts - 1]]
        best_y, best_d = cloud[int(np.argmin(d0))], float(d0.min())
        for z0 in starts:
            res = minimize(lambda z: 0.5 * np.sum((z - x) ** 2), z0,
                           jac=lambda z: z - x, constraints=cons, method="SLSQP",
                           options={"ftol": 1e-15, "maxiter": 200})
            feas = max(abs(h(res.x)) for h in equalities)
            if feas < 1e-10:
                d = float(np.linalg.norm(res.x - x))
                if d < best_d:
                    best_y, best_d = res.x, d
        return best_y, best_d

    def dist_many(X):
        return np.array([nearest(x)[1] for x in X])

    def project(x):
        y, _ = nearest(x)
        J = np.array([_num_grad(h, y) for h in equalities])
        # tangent space = null space of the constraint Jacobian
        _, s, vt = np.linalg.svd(J)
        rank = int(np.sum(s > 1e-12))
        return y, vt[rank:]

    return SetDescriptor("sublevel-intersection", dim, dist_many, sampler, project,
                         label=label, meta={"equalities": list(equalities)})


def _num_grad(h, x, eps=1e-7):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = eps
        g[i] = (h(x + e) - h(x - e)) / (2 * eps)
    return g


def sample_ball(rng: np.random.Generator, center, radius: float, m: int) -> np.ndarray:
    """Uniform draws from the closed Euclidean ball."""
    center = np.asarray(center, dtype=float)
    n = center.size
    z = rng.standard_normal((m, n))
    z /= np.linalg.norm(z, axis=1, keepdims=True)
    r = radius * rng.random(m) ** (1.0 / n)
    return center + z * r[:, None]


# ---------------------------------------------------------------------------
# reports

NO_VIOLATION_FOUND = "NO_VIOLATION_FOUND"
COUNTEREXAMPLE = "COUNTEREXAMPLE"


@dataclass(frozen=True)
class ProbeReport:
    """Outcome of a falsification probe.

    ``worst_margin`` is the extremal value of the tested inequality over all
    trials (its sign convention is documented by each probe).
    """

    verdict: str
    worst_margin: float
    witness: Any = None
    stats: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.verdict not in (NO_VIOLATION_FOUND, COUNTEREXAMPLE):
            raise ParameterError(f"bad verdict {self.verdict!r}")
        if (self.verdict == COUNTEREXAMPLE) != (self.witness is not None):
            raise ParameterError("a witness is present exactly for counterexamples")

    @property
    def passed(self) -> bool:
        return self.verdict == NO_VIOLATION_FOUND
