"""Set-valued maps evaluated as finite samples of directions."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (COUNTEREXAMPLE, NO_VIOLATION_FOUND, DimensionError, ProbeReport,
                   as_point)

FALLBACK_POINTS = 32
FALLBACK_RADIUS = 1e-7
DEDUP_TOL = 1e-6


class FieldOverflowError(ArithmeticError):
    """A closed-form gradient produced a non-finite value."""

    def __init__(self, point, message="gradient overflow"):
        super().__init__(f"{message} at x={np.array2string(np.asarray(point), precision=17)}")
        self.point = np.asarray(point)


class FieldContractError(RuntimeError):
    """A field returned an empty sample."""


@dataclass(frozen=True)
class FieldSample:
    """Finite list of directions; ``exact`` when it is the whole value ``F(x)``."""

    directions: np.ndarray
    exact: bool = True

    def __post_init__(self):
        d = np.atleast_2d(np.asarray(self.directions, dtype=float))
        if d.shape[0] == 0 or d.size == 0:
            raise FieldContractError("field sample is empty")
        object.__setattr__(self, "directions", d)

    def __len__(self):
        return self.directions.shape[0]


@dataclass(frozen=True)
class Field:
    """A set-valued map ``R^n ⇉ R^n`` given by its evaluator."""

    dim: int
    evaluator: Callable[[np.ndarray], FieldSample] = field(repr=False)
    kind: str = "custom"
    name: str = ""
    sign: float = 1.0

    def __call__(self, x) -> FieldSample:
        return self.evaluator(np.asarray(x, dtype=float))

    def negated(self) -> "Field":
        ev = self.evaluator

        def neg(x):
            s = ev(x)
            return FieldSample(-s.directions, s.exact)

        name = self.name[1:] if self.name.startswith("-") else "-" + self.name
        return Field(self.dim, neg, self.kind, name, -self.sign)


def constant_field(v) -> Field:
    v = np.asarray(v, dtype=float)
    sample = FieldSample(v[None, :], True)
    return Field(v.size, lambda x: sample, "constant", f"const{tuple(v)}")


def unique_rows(V: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    keep = []
    for v in V:
        if all(np.linalg.norm(v - w) > tol for w in keep):
            keep.append(v)
    return np.array(keep)


def _point_seed(x: np.ndarray) -> int:
    return zlib.crc32(np.ascontiguousarray(x, dtype=float).tobytes())


def _fallback(problem, x, normalize: bool) -> FieldSample:
    """Directions at ``FALLBACK_POINTS`` random points within ``rho`` of ``x``."""
    rng = np.random.default_rng(_point_seed(x))
    n = x.size
    rho = FALLBACK_RADIUS
    while rho <= 1e-3:
        xi = rng.standard_normal((FALLBACK_POINTS, n))
        xi /= np.linalg.norm(xi, axis=1, keepdims=True)
        found = []
        for y in x + rho * xi:
            gy = problem.grad(y)
            if gy is None or not np.all(np.isfinite(gy)):
                continue
            ng = np.linalg.norm(gy)
            if normalize:
                if ng == 0.0:
                    continue
                found.append(gy / ng)
            else:
                found.append(gy)
        if found:
            return FieldSample(unique_rows(np.array(found)), exact=False)
        rho *= 10.0
    return FieldSample(np.zeros((1, n)), exact=False)


def normalized_field(problem) -> Field:
    """The normalized subdifferential: limits of ``∇f/|∇f|``.

    Closed form at differentiable points with nonzero gradient; the
    catalog's declared limit set on exceptional loci; perturbation sampling
    elsewhere (``exact=False``).
    """
    n = problem.dim

    def evaluate(x):
        locus = problem.normalized_locus(x)
        if locus is not None:
            return FieldSample(locus, True)
        gx = problem.grad(x)
        if gx is not None:
            if not np.all(np.isfinite(gx)):
                raise FieldOverflowError(x)
            ng = np.sqrt(gx @ gx)
            if ng > 0.0:
                if not np.isfinite(ng):
                    raise FieldOverflowError(x)
                return FieldSample((gx / ng)[None, :], True)
        return _fallback(problem, x, normalize=True)

    return Field(n, evaluate, "normalized", "nabla_hat f")


def bouligand_field(problem) -> Field:
    """The Bouligand subdifferential: limits of ``∇f`` at differentiable points."""
    n = problem.dim

    def evaluate(x):
        locus = problem.bouligand_locus(x)
        if locus is not None:
            dirs, exact = locus
            return FieldSample(dirs, exact)
        gx = problem.grad(x)
        if gx is not None:
            if not np.all(np.isfinite(gx)):
                raise FieldOverflowError(x)
            return FieldSample(gx[None, :], True)
        return _fallback(problem, x, normalize=False)

    return Field(n, evaluate, "bouligand", "nabla_bar f")


def descent_field(problem, kind: str = "normalized") -> Field:
    """``-∇̂f`` or ``-∇̄f``, the right-hand sides used for descent."""
    if kind == "normalized":
        return normalized_field(problem).negated()
    if kind == "bouligand":
        return bouligand_field(problem).negated()
    raise ValueError(f"unknown field kind {kind!r}")


def sign_b(t: float) -> FieldSample:
    """Bouligand sign: ``{t/|t|}`` off zero and ``{1, -1}`` at exactly zero."""
    if t != 0.0:
        return FieldSample(np.array([[1.0 if t > 0 else -1.0]]), True)
    return FieldSample(np.array([[1.0], [-1.0]]), True)


def sign_b_values(t: float) -> tuple:
    return (1.0 if t > 0 else -1.0,) if t != 0.0 else (1.0, -1.0)


def _region_points(region, rng, N, n):
    if callable(region):
        pts = np.atleast_2d(region(rng, N))
    else:
        pts = np.atleast_2d(np.asarray(region, dtype=float))
    if pts.shape[1] != n:
        raise DimensionError(f"region points live in R^{pts.shape[1]}, field in R^{n}")
    return pts


def _convex_combos(V, rng, G):
    if len(V) == 1:
        return V
    w = rng.dirichlet(np.ones(len(V)), size=G)
    return np.vstack([V, w @ V])


def check_angle_condition(F: Field, D: Field, region, kappa: float, N: int,
                          G: int = 16, seed: int = 0, tol: float = 1e-12) -> ProbeReport:
    """Falsify ``∀u ∈ co F(x) ∃v ∈ D(x): <u,v> <= -kappa |v|^2``.

    ``u`` ranges over the vertices of ``F(x)`` plus ``G`` random convex
    combinations; ``v`` over the vertices of ``D(x)`` plus ``G`` random convex
    combinations (``D`` is treated as convex-valued).  The margin of a pair
    is ``min_v <u,v> + kappa|v|^2``; ``worst_margin`` is its maximum.
    """
    if F.dim != D.dim:
        raise DimensionError("F and D must share the dimension")
    rng = np.random.default_rng(seed)
    pts = _region_points(region, rng, N, F.dim)
    worst = -np.inf
    witness = None
    for x in pts:
        U = _convex_combos(F(x).directions, rng, G)
        V = _convex_combos(D(x).directions, rng, G)
        m = (U @ V.T + kappa * np.sum(V * V, axis=1)[None, :]).min(axis=1)
        i = int(np.argmax(m))
        if m[i] > worst:
            worst = float(m[i])
            if worst > tol:
                witness = {"x": x.copy(), "u": U[i].copy(), "margin": worst}
    stats = {"n_points": len(pts), "kappa": kappa, "G": G, "seed": seed}
    if worst > tol:
        return ProbeReport(COUNTEREXAMPLE, worst, witness, stats)
    return ProbeReport(NO_VIOLATION_FOUND, worst, None, stats)


def fd_gradient(f, x, h: float = 1e-6) -> np.ndarray:
    """Central finite differences of a scalar function."""
    x = as_point(x)
    g = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def min_norm_element(V: np.ndarray) -> np.ndarray:
    """Least-norm point of the convex hull of the rows of ``V``.

    If ``z`` is that point and ``z != 0`` then ``x = z / |z|^2`` is the
    least-norm solution of ``V x >= 1``; this least-distance program is
    solved as a nonnegative least-squares problem (Lawson-Hanson) with the
    bounded-variable solver, since ``scipy.optimize.nnls`` in scipy 1.15 can
    stop short of optimality.  An infeasible program means the hull
    contains the origin.
    """
    V = np.atleast_2d(np.asarray(V, dtype=float))
    if len(V) == 1:
        return V[0].copy()
    from scipy.optimize import lsq_linear

    n = V.shape[1]
    scale = np.abs(V).max()
    if scale == 0.0:
        return np.zeros(n)
    W = V / scale
    E = np.vstack([W.T, np.ones((1, len(W)))])
    f = np.zeros(n + 1)
    f[n] = 1.0
    u = lsq_linear(E, f, bounds=(0.0, np.inf), method="bvls", tol=1e-15).x
    r = E @ u - f
    if np.linalg.norm(r) <= 1e-13 or r[n] >= 0.0:
        return np.zeros(n)
    x = -r[:n] / r[n]
    return scale * x / (x @ x)
