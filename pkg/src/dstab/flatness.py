"""Flatness profiles ``f̊(x, r) = sup_{B_r(x)} |f - f(x)|`` and the flatness preorder."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import DimensionError, ParameterError, RegionError, as_point

TOL_REL = 1e-3
MAX_GRID_DIM = 3
MAX_DIM = 6

X_FLATTER = "x_flatter"
Y_FLATTER = "y_flatter"
EQUIVALENT = "equivalent"
INCOMPARABLE = "incomparable"


@dataclass(frozen=True)
class FlatnessProfile:
    """Lower estimates of ``f̊(center, r)``, non-decreasing in ``r`` by construction."""

    center: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        n = self.center.size
        head = ",".join([f"center_x{i + 1}" for i in range(n)] + ["r", "f_ring"])
        c = ",".join(format(float(v), ".17g") for v in self.center)
        rows = [f"{c},{r:.17g},{v:.17g}" for r, v in zip(self.radii, self.values)]
        return "\n".join([head] + rows) + "\n"


def _unit_samples(n: int, G: int, R: int, rng, random_only: bool) -> np.ndarray:
    """Fixed sample of the closed unit ball: cube grid, its sphere projections, random draws."""
    parts = []
    if not random_only:
        axis = np.linspace(-1.0, 1.0, G)
        grid = np.array(list(itertools.product(axis, repeat=n)))
        norms = np.linalg.norm(grid, axis=1)
        parts.append(grid[norms <= 1.0])
        nz = norms > 0
        parts.append(grid[nz] / norms[nz, None])
    if R > 0:
        z = rng.standard_normal((R, n))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        parts.append(z * rng.random(R)[:, None] ** (1.0 / n))
    return np.vstack(parts)


def _ascend(h: Callable, x: np.ndarray, y: np.ndarray, r: float, best: float,
            steps: int = 20) -> float:
    """Projected finite-difference ascent of ``h`` inside ``B_r(x)`` from ``y``."""
    step = r / 100.0
    eps = r * 1e-4
    n = x.size
    for _ in range(steps):
        g = np.empty(n)
        for i in range(n):
            e = np.zeros(n)
            e[i] = eps
            g[i] = (h(y + e) - h(y - e)) / (2 * eps)
        ng = np.linalg.norm(g)
        if ng == 0 or not np.isfinite(ng):
            break
        z = y + step * g / ng
        d = np.linalg.norm(z - x)
        if d > r:
            z = x + (z - x) * (r / d)
        val = h(z)
        if not val > best:
            break
        y, best = z, val
    return best


def flatness_profile(f, x, radii, G: int = 11, R: int = 256, seed: int = 0,
                     random_only: bool = False) -> FlatnessProfile:
    """Estimate ``f̊(x, r)`` for each radius.

    Per radius: ``|f(y) - f(x)|`` over a ``G^n`` cube grid clipped to the ball,
    its projection on the sphere and ``R`` uniform ball draws (the same unit
    sample for every radius, seeded), then 20 ascent steps of length
    ``r/100`` from the best point.  A running maximum over ascending radii
    makes the profile monotone, which is exact because smaller balls are
    contained in larger ones.

    ``f`` may be a plain function or an object with an ``f`` attribute.
    The grid is used up to dimension 3; dimensions 4-6 need ``random_only``
    and larger ones are refused.
    """
    fun = getattr(f, "f", f)
    x = as_point(x)
    n = x.size
    radii = np.asarray(radii, dtype=float)
    if radii.ndim != 1 or radii.size == 0 or np.any(radii <= 0):
        raise ParameterError("radii must be a nonempty list of positive values")
    if np.any(np.diff(radii) <= 0):
        raise ParameterError("radii must be strictly ascending")
    if n > MAX_DIM:
        raise DimensionError(f"flatness profiles are limited to dimension {MAX_DIM}")
    if n > MAX_GRID_DIM and not random_only:
        raise DimensionError(f"grid sampling is infeasible in dimension {n}; "
                             "pass random_only=True")
    rng = np.random.default_rng(seed)
    S = _unit_samples(n, G, R, rng, random_only)
    fx = float(fun(x))

    def h(y):
        return abs(float(fun(y)) - fx)

    values = np.empty(radii.size)
    running = 0.0
    for j, r in enumerate(radii):
        Y = x + r * S
        vals = np.array([h(y) for y in Y])
        i = int(np.argmax(vals))
        best = _ascend(h, x, Y[i], r, float(vals[i]))
        running = max(running, best)
        values[j] = running
    meta = {"G": G, "R": R, "seed": seed, "n_samples": len(S), "random_only": random_only}
    return FlatnessProfile(x, radii, values, meta)


def _smallest_decade(radii):
    radii = np.asarray(radii, dtype=float)
    return radii[radii <= 10.0 * radii.min() * (1 + 1e-12)]


def compare_profiles(px: FlatnessProfile, py: FlatnessProfile, tol_rel: float = TOL_REL) -> str:
    """Preorder verdict from two profiles on the same radii (smallest decade only)."""
    if px.radii.shape != py.radii.shape or np.any(px.radii != py.radii):
        raise ParameterError("profiles must share the radius grid")
    keep = px.radii <= 10.0 * px.radii.min() * (1 + 1e-12)
    a, b = px.values[keep], py.values[keep]
    x_le = np.all(a <= b * (1 + tol_rel))
    y_le = np.all(b <= a * (1 + tol_rel))
    if x_le and y_le:
        return EQUIVALENT
    if x_le:
        return X_FLATTER
    if y_le:
        return Y_FLATTER
    return INCOMPARABLE


def compare_flatness(f, x, y, radii, tol_rel: float = TOL_REL, **kw) -> str:
    """``x ⪯_f y`` tested on the smallest decade of ``radii``.

    Returns ``x_flatter`` when ``f̊(x, r) <= f̊(y, r)(1 + tol_rel)`` for every
    tested ``r`` and the reverse fails somewhere, ``equivalent`` when both
    hold, and ``incomparable`` when the profiles cross.
    """
    r = _smallest_decade(radii)
    return compare_profiles(flatness_profile(f, x, r, **kw), flatness_profile(f, y, r, **kw),
                            tol_rel)


@dataclass(frozen=True)
class RankedMinimum:
    rank: int
    point: np.ndarray
    profile: np.ndarray
    flat_candidate: bool


def screen_flat_minima(problem, minima, M_samples: int, radii, seed: int = 0,
                       tol_rel: float = TOL_REL, **kw) -> list:
    """Rank sampled minima by their flatness profiles.

    ``minima`` is an ``(m, n)`` array of points, a ``SetDescriptor`` or a
    sampler ``(rng, m) -> points``.  Points are sorted by the profile at the
    smallest radius, ties (within ``tol_rel``) broken at the next radius.
    The minimal layer at the smallest radius is marked ``flat_candidate``.
    Only the sampled minima are compared, so flatness relative to a
    neighbourhood in the level set is meaningful only on sampled components
    that are connected.
    """
    if isinstance(minima, np.ndarray) or isinstance(minima, (list, tuple)):
        P = np.atleast_2d(np.asarray(minima, dtype=float))
    else:
        rng = np.random.default_rng(seed)
        sampler = minima.sample if hasattr(minima, "sample") else minima
        try:
            P = np.atleast_2d(sampler(rng, M_samples))
        except Exception as exc:
            raise RegionError(f"minimum sampler failed: {exc}") from exc
    radii = np.asarray(radii, dtype=float)
    profs = [flatness_profile(problem, p, radii, seed=seed, **kw).values for p in P]

    def key(i):
        return tuple(profs[i])

    order = sorted(range(len(P)), key=key)
    # tolerance-aware tie breaking at successive radii
    order = _tie_sort(order, profs, tol_rel)
    v0 = min(p[0] for p in profs)
    return [RankedMinimum(r + 1, P[i].copy(), profs[i].copy(),
                          bool(profs[i][0] <= v0 * (1 + tol_rel)))
            for r, i in enumerate(order)]


def _tie_sort(order, profs, tol_rel, level=0):
    """Group entries equal within ``tol_rel`` at ``level`` and sort each group at ``level+1``."""
    if level >= len(profs[order[0]]) or len(order) <= 1:
        return order
    order = sorted(order, key=lambda i: profs[i][level])
    out, group = [], [order[0]]
    for i in order[1:]:
        ref = profs[group[0]][level]
        if profs[i][level] <= ref * (1 + tol_rel):
            group.append(i)
        else:
            out.extend(_tie_sort(group, profs, tol_rel, level + 1))
            group = [i]
    out.extend(_tie_sort(group, profs, tol_rel, level + 1))
    return out


def ranking_csv(ranked: list) -> str:
    rows = ["rank,center,profile_at_rmin"]
    for r in ranked:
        c = " ".join(format(float(v), ".17g") for v in r.point)
        rows.append(f"{r.rank},{c},{r.profile[0]:.17g}")
    return "\n".join(rows) + "\n"
