"""Closed-form example problems.

Each :class:`ProblemSpec` bundles the objective, its gradient on the
differentiable locus, the exact limit sets of normalized/Bouligand
gradients on the exceptional loci the dynamics can hit, auxiliary
(d-Lyapunov) functions, conserved quantities, and descriptors for the
minimum set and the attractor.

Problems are addressed by ``name(:key=value(,key=value)*)?`` strings, e.g.
``ellipse:a=2,b=1`` or ``monomial:u=1,1``; a comma-separated token without
``=`` continues the previous value, so vectors read naturally.  Matrix rows
are separated by ``;`` (``bilinear:A=2,0;0,1``).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .core import (ParameterError, SetDescriptor, constraint_set, finite_union,
                   parametric_curve, point_set, sample_ball)
from .fields import bouligand_field, descent_field, normalized_field, unique_rows

ORTHO_TOL = 1e-12
MAX_SIGN_ENTRIES = 12


@dataclass(frozen=True)
class AuxFunction:
    """Scalar function with optional closed-form gradient and Hessian.

    ``differentiable(x)`` reports whether the closed forms apply at ``x``.
    Values may be ``+inf`` (extended-real functions such as ``|x|/y^2``).
    """

    name: str
    value: Callable[[np.ndarray], float]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    hess: Optional[Callable[[np.ndarray], np.ndarray]] = None
    differentiable: Callable[[np.ndarray], bool] = lambda x: True

    def __call__(self, x) -> float:
        return self.value(np.asarray(x, dtype=float))


def _never(x):
    return None


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    f: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], Optional[np.ndarray]]
    normalized_locus: Callable = _never
    bouligand_locus: Callable = _never
    smooth: bool = True
    default_field: str = "normalized"
    g_list: tuple = ()
    conserved: tuple = ()
    minima: Optional[SetDescriptor] = None
    attractor: Optional[SetDescriptor] = None
    attractor_order: Optional[float] = None
    box: tuple = (None, None)
    params: dict = field(default_factory=dict)
    regions: dict = field(default_factory=dict, repr=False)
    notes: dict = field(default_factory=dict, repr=False)
    grad_rows: Optional[Callable] = field(default=None, repr=False)

    def grad_many(self, X: np.ndarray) -> np.ndarray:
        """Row-wise gradients; NaN rows where ``f`` is not differentiable."""
        X = np.atleast_2d(X)
        if self.grad_rows is not None:
            with np.errstate(all="ignore"):
                return self.grad_rows(X)
        out = np.full(X.shape, np.nan)
        for i, x in enumerate(X):
            gx = self.grad(x)
            if gx is not None:
                out[i] = gx
        return out

    @property
    def g(self) -> Optional[AuxFunction]:
        return self.g_list[0] if self.g_list else None

    @property
    def field_normalized(self):
        return normalized_field(self)

    @property
    def field_bouligand(self):
        return bouligand_field(self)

    def descent(self, kind: Optional[str] = None):
        return descent_field(self, kind or self.default_field)

    def in_box(self, x) -> bool:
        lo, hi = self.box
        if lo is None:
            return True
        return bool(np.all(x >= lo) and np.all(x <= hi))

    def subgradient_norm(self, x) -> float:
        """``d(0, co ∇̄f(x))``: distance from the origin to the Clarke subdifferential."""
        from .fields import min_norm_element

        s = bouligand_field(self)(x)
        return float(np.linalg.norm(min_norm_element(s.directions)))

    def sample(self, region: str, rng: np.random.Generator, m: int) -> np.ndarray:
        try:
            sampler = self.regions[region]
        except KeyError:
            raise ParameterError(f"{self.name} has no region {region!r}; "
                                 f"known: {sorted(self.regions)}") from None
        return np.atleast_2d(sampler(rng, m))


def make_problem(name: str, dim: int, f: Callable, grad: Callable, **kw) -> ProblemSpec:
    """Ad-hoc problem with closed-form ``f`` and ``grad`` (tests, demos)."""
    return ProblemSpec(name=name, dim=dim, f=f, grad=grad, **kw)


# ---------------------------------------------------------------------------
# helpers


def _box(lo, hi, n):
    return (np.full(n, float(lo)), np.full(n, float(hi)))


def _box_sampler(box):
    lo, hi = box

    def sample(rng, m):
        return rng.uniform(lo, hi, size=(m, lo.size))

    return sample


def _rejecting(sampler, accept, max_draws=10**6):
    """Wrap ``sampler`` so only points with ``accept(x)`` survive."""

    def sample(rng, m):
        out = []
        drawn = 0
        while len(out) < m:
            batch = sampler(rng, max(2 * (m - len(out)), 16))
            drawn += len(batch)
            out.extend(x for x in batch if accept(x))
            if drawn > max_draws:
                from .core import RegionError
                raise RegionError("rejection sampler exhausted its draw budget")
        return np.array(out[:m])

    return sample


def _near(sampler, radius):
    def sample(rng, m):
        base = sampler(rng, m)
        return np.array([sample_ball(rng, b, radius, 1)[0] for b in base])

    return sample


def _pm_pair(v):
    return np.array([v, -v])


def _sign(t):
    return 1.0 if t > 0 else -1.0


# ---------------------------------------------------------------------------
# f(x, y) = y^2 + x^2 y^4


def _flat4(params) -> ProblemSpec:
    def f(z):
        x, y = z
        return y * y + x * x * y ** 4

    def grad(z):
        x, y = z
        return np.array([2 * x * y ** 4, 2 * y + 4 * x * x * y ** 3])

    up = np.array([[0.0, 1.0], [0.0, -1.0]])

    def nlocus(z):
        # limits of grad/|grad| as y -> 0+ and y -> 0-
        return up if z[1] == 0.0 else None

    g = AuxFunction(
        "|x|", lambda z: abs(z[0]),
        grad=lambda z: np.array([_sign(z[0]), 0.0]),
        hess=lambda z: np.zeros((2, 2)),
        differentiable=lambda z: z[0] != 0.0)

    box = _box(-5, 5, 2)
    axis = parametric_curve(lambda t: np.column_stack([t, np.zeros_like(t)]),
                            -5.0, 5.0, 2, label="[f=0] (x-axis)",
                            dcurve=lambda t: np.array([[1.0, 0.0]]))

    def lyap(rng, m):
        x = rng.uniform(0.2, 0.6, m) * rng.choice([-1.0, 1.0], m)
        y = rng.uniform(-0.05, 0.05, m)
        y[: m // 8] = 0.0
        return np.column_stack([x, y])

    def basin(rng, m):
        return np.column_stack([rng.uniform(-2.5, 2.5, m), np.zeros(m)])

    def grad_rows(Z):
        x, y = Z[:, 0], Z[:, 1]
        y3 = y * y * y
        out = np.empty_like(Z)
        out[:, 0] = 2 * x * y3 * y
        out[:, 1] = 2 * y + 4 * x * x * y3
        return out

    return ProblemSpec(
        "flat4", 2, f, grad, normalized_locus=nlocus, g_list=(g,), grad_rows=grad_rows,
        minima=axis, attractor=point_set([[0.0, 0.0]], label="{(0,0)}"),
        attractor_order=4.0, box=box,
        notes={"attractor_probe": {"c": 1.3, "cap": 0.5, "K": 50000}},
        regions={"box": _box_sampler(_box(-2, 2, 2)), "lyapunov": lyap,
                 "basin": basin, "near_minima": _near(axis.sample, 0.1)})


# ---------------------------------------------------------------------------
# parabola f(x, y) = (x^2 - y)^2


def _parabola(params) -> ProblemSpec:
    def f(z):
        x, y = z
        r = x * x - y
        return r * r

    def grad(z):
        x, y = z
        r = x * x - y
        return np.array([4 * r * x, -2 * r])

    def nlocus(z):
        x, y = z
        if x * x - y != 0.0:
            return None
        v = np.array([2 * x, -1.0]) / np.sqrt(4 * x * x + 1)
        return _pm_pair(v)

    def gval(z):
        x, y = z
        return x * x * np.exp(4 * y)

    def ggrad(z):
        x, y = z
        e = np.exp(4 * y)
        return 2 * np.array([x * e, 2 * x * x * e])

    def ghess(z):
        x, y = z
        e = np.exp(4 * y)
        return 2 * np.array([[e, 4 * x * e], [4 * x * e, 8 * x * x * e]])

    g = AuxFunction("x^2 exp(4y)", gval, ggrad, ghess)
    box = _box(-3, 3, 2)
    curve = parametric_curve(lambda t: np.column_stack([t, t * t]), -2.0, 2.0, 2,
                             label="[f=0] (y=x^2)",
                             dcurve=lambda t: np.column_stack([np.ones_like(t), 2 * t]))

    def lyap(rng, m):
        t = rng.uniform(0.3, 1.0, m) * rng.choice([-1.0, 1.0], m)
        base = np.column_stack([t, t * t])
        nrm = np.column_stack([2 * t, -np.ones_like(t)]) / np.sqrt(4 * t * t + 1)[:, None]
        off = rng.uniform(-0.02, 0.02, m)
        off[: m // 8] = 0.0
        return base + off[:, None] * nrm

    def basin(rng, m):
        t = rng.uniform(-1.0, 1.0, m)
        return np.column_stack([t, t * t])

    def grad_rows(Z):
        x, y = Z[:, 0], Z[:, 1]
        r = x * x - y
        return np.column_stack([4 * r * x, -2 * r])

    return ProblemSpec(
        "parabola", 2, f, grad, normalized_locus=nlocus, g_list=(g,), conserved=(g,),
        grad_rows=grad_rows,
        minima=curve, attractor=point_set([[0.0, 0.0]], label="{(0,0)}"),
        attractor_order=2.0, box=box,
        regions={"box": _box_sampler(_box(-1.5, 1.5, 2)), "lyapunov": lyap,
                 "basin": basin, "near_minima": _near(curve.sample, 0.1)})


# ---------------------------------------------------------------------------
# ellipse / hyperbola f(x, y) = (a x^2 + b y^2 - 1)^2


def _ellipse(params) -> ProblemSpec:
    a = float(params.get("a", 2.0))
    b = float(params.get("b", 1.0))
    if not ((a > b > 0) or (a < 0 < b)):
        raise ParameterError(f"ellipse needs a > b > 0 or a < 0 < b, got a={a}, b={b}")

    def f(z):
        x, y = z
        r = a * x * x + b * y * y - 1
        return r * r

    def grad(z):
        x, y = z
        r = a * x * x + b * y * y - 1
        return 4 * r * np.array([a * x, b * y])

    def nlocus(z):
        x, y = z
        if a * x * x + b * y * y - 1 != 0.0:
            return None
        v = np.array([a * x, b * y])
        nv = np.linalg.norm(v)
        return _pm_pair(v / nv) if nv > 0 else None

    def gval(z):
        x, y = z
        ax, ay = abs(x), abs(y)
        if ay == 0.0:
            return 0.0 if (a < 0) else (np.inf if ax > 0 or b <= 0 else np.inf)
        return ax ** b / ay ** a

    def ggrad(z):
        x, y = z
        ax, ay = abs(x), abs(y)
        gx = b * _sign(x) * ax ** (b - 1) / ay ** a
        gy = -a * _sign(y) * ax ** b / ay ** (a + 1)
        return np.array([gx, gy])

    def ghess(z):
        x, y = z
        ax, ay = abs(x), abs(y)
        hxx = 0.0 if b == 1 else b * (b - 1) * ax ** (b - 2) / ay ** a
        hxy = -a * b * _sign(x) * _sign(y) * ax ** (b - 1) / ay ** (a + 1)
        hyy = a * (a + 1) * ax ** b / ay ** (a + 2)
        return np.array([[hxx, hxy], [hxy, hyy]])

    g = AuxFunction(f"|x|^{b:g}/|y|^{a:g}", gval, ggrad, ghess,
                    differentiable=lambda z: z[1] != 0.0 and (z[0] != 0.0 or b > 1))

    if a > 0:
        curve = parametric_curve(
            lambda t: np.column_stack([np.cos(t) / np.sqrt(a), np.sin(t) / np.sqrt(b)]),
            0.0, 2 * np.pi, 2, periodic=True, label="[f=0] (ellipse)",
            dcurve=lambda t: np.column_stack([-np.sin(t) / np.sqrt(a), np.cos(t) / np.sqrt(b)]))
        minima = curve
        R = 1.5 / np.sqrt(b) + 1.5 / np.sqrt(a)
    else:
        branches = []
        for s in (1.0, -1.0):
            branches.append(parametric_curve(
                lambda t, s=s: np.column_stack([np.sinh(t) / np.sqrt(-a),
                                                s * np.cosh(t) / np.sqrt(b)]),
                -3.0, 3.0, 2))
        minima = finite_union(branches, label="[f=0] (hyperbola)")
        R = 12.0
    flat = point_set([[0.0, 1 / np.sqrt(b)], [0.0, -1 / np.sqrt(b)]], label="±(0,1/√b)")
    box = _box(-R, R, 2)

    def on_curve(rng, m):
        if a > 0:
            t = rng.uniform(0, 2 * np.pi, m)
            return np.column_stack([np.cos(t) / np.sqrt(a), np.sin(t) / np.sqrt(b)])
        return minima.sample(rng, m)

    def lyap(rng, m):
        if a > 0:
            t = rng.uniform(0.3, 1.2, m) + (np.pi / 2) * rng.integers(0, 4, m)
            # keep away from the axes: fold angles into the four open quadrants
            t = np.where((t % (np.pi / 2)) < 0.3, t + 0.3, t)
            s = rng.uniform(0.97, 1.03, m)
            s[: m // 8] = 1.0
            return np.column_stack([s * np.cos(t) / np.sqrt(a), s * np.sin(t) / np.sqrt(b)])
        return _near(minima.sample, 0.02)(rng, m)

    regions = {
        "box": _rejecting(_box_sampler(_box(-1.5, 1.5, 2)), lambda z: abs(z[1]) > 1e-3
                          and abs(z[0]) > 1e-3),
        "lyapunov": lyap,
        "basin": _rejecting(on_curve, lambda z: z[1] != 0.0),
        "near_minima": _near(on_curve, 0.1),
    }
    def grad_rows(Z):
        x, y = Z[:, 0], Z[:, 1]
        r = a * x * x + b * y * y - 1
        return 4 * r[:, None] * np.column_stack([a * x, b * y])

    return ProblemSpec(
        "ellipse", 2, f, grad, normalized_locus=nlocus, g_list=(g,), conserved=(g,),
        grad_rows=grad_rows,
        minima=minima, attractor=flat, attractor_order=2.0, box=box,
        params={"a": a, "b": b}, regions=regions,
        notes={"attractor_probe": {"c": 4.0, "cap": 0.5, "K": 10000}})


# ---------------------------------------------------------------------------
# multivariate quadric f(x) = (sum a_i x_i^2 - 1)^2 / 2 and its conserved family


def bilinear_conserved(a, I) -> list:
    """Conserved family ``C_i = |x_i| / |x_I|^{e_i}`` with ``e_i = 1`` on ``I``.

    ``a`` must be normalised so that its smallest positive entry is 1 and
    ``I`` is the (0-based) index set where it is attained.  Outside ``I`` the
    exponent is ``a_i``.  ``|x_I|`` is the Euclidean norm of the subvector.
    Values are ``+inf`` where ``x_I = 0``.
    """
    a = np.asarray(a, dtype=float)
    I = sorted(int(i) for i in I)
    pos = a[a > 0]
    if pos.size == 0:
        raise ParameterError("need at least one positive coefficient")
    if abs(pos.min() - 1.0) > 1e-12:
        raise ParameterError(f"smallest positive coefficient must be 1, got {pos.min()}")
    expected = sorted(np.flatnonzero(np.isclose(a, 1.0, rtol=0, atol=1e-12)).tolist())
    if I != expected:
        raise ParameterError(f"I must be argmin of positive a_i = {expected}, got {I}")
    inI = np.zeros(a.size, bool)
    inI[I] = True
    out = []
    for i in range(a.size):
        e = 1.0 if inI[i] else a[i]

        def value(x, i=i, e=e):
            nI = np.linalg.norm(x[inI])
            if nI == 0.0:
                return np.inf
            return abs(x[i]) / nI ** e

        def grad(x, i=i, e=e):
            nI = np.linalg.norm(x[inI])
            gr = np.zeros_like(x)
            gr[inI] -= e * abs(x[i]) * nI ** (-e - 2) * x[inI]
            gr[i] += _sign(x[i]) * nI ** (-e)
            return gr

        out.append(AuxFunction(f"C_{i + 1}", value, grad,
                               differentiable=lambda x, i=i: x[i] != 0.0
                               and np.any(x[inI] != 0.0)))
    return out


def _quadric(params) -> ProblemSpec:
    a = np.asarray(params.get("a", [1.0, 2.0]), dtype=float).ravel()
    if np.any(a == 0):
        raise ParameterError("quadric coefficients must be nonzero")
    pos = a[a > 0]
    if pos.size == 0:
        raise ParameterError("quadric needs a positive coefficient")
    amin = pos.min()
    ahat = a / amin
    I = np.flatnonzero(np.isclose(ahat, 1.0, rtol=0, atol=1e-12))
    n = a.size

    def f(x):
        r = a @ (x * x) - 1
        return 0.5 * r * r

    def grad(x):
        r = a @ (x * x) - 1
        return 2 * r * a * x

    def nlocus(x):
        if a @ (x * x) - 1 != 0.0:
            return None
        v = a * x
        nv = np.linalg.norm(v)
        return _pm_pair(v / nv) if nv > 0 else None

    C = bilinear_conserved(ahat, I)
    Ic = [i for i in range(n) if i not in set(I)]

    def gval(x):
        return float(sum(C[i](x) for i in Ic)) if Ic else 0.0

    g = AuxFunction("||C_{I^c}||_1", gval)

    def on_min(rng, m):
        out = []
        while len(out) < m:
            z = rng.standard_normal(n)
            s = a @ (z * z)
            if s > 1e-6:
                out.append(z / np.sqrt(s))
        return np.array(out)

    minima = constraint_set([lambda x: a @ (x * x) - 1], n, on_min, label="[f=0]")
    attractor = None
    if len(I) == 1:
        e = np.zeros(n)
        e[I[0]] = 1 / np.sqrt(amin)
        attractor = point_set([e, -e], label="flat minima")
    box = _box(-4, 4, n)
    def grad_rows(X):
        r = (X * X) @ a - 1
        return 2 * r[:, None] * a[None, :] * X

    return ProblemSpec(
        "quadric", n, f, grad, normalized_locus=nlocus, g_list=(g,), conserved=tuple(C),
        grad_rows=grad_rows,
        minima=minima, attractor=attractor, attractor_order=2.0 if attractor else None,
        box=box, params={"a": a.tolist(), "I": I.tolist()},
        regions={"box": _rejecting(_box_sampler(_box(-1.5, 1.5, n)),
                                   lambda x: np.all(np.abs(x) > 1e-3)),
                 "basin": _rejecting(on_min, lambda x: np.all(x != 0.0)),
                 "near_minima": _near(on_min, 0.05)})


# ---------------------------------------------------------------------------
# bilinear f(x, y) = (<A x, y> - 1)^2


def bilinear_reduction(A) -> tuple:
    """Orthogonal ``Q`` and coefficients ``a`` with ``f_bilinear(z) = 2 f_quadric(Q z)``.

    ``Q`` composes the SVD rotation ``(V^T x, U^T y)`` with
    ``(p, q) = ((x'+y')/√2, (x'-y')/√2)``; the reduced quadric has
    ``a = (σ/2, -σ/2)``.  Requires a square nonsingular ``A``.
    """
    A = np.asarray(A, dtype=float)
    if A.shape[0] != A.shape[1]:
        raise ParameterError("reduction implemented for square A only")
    U, s, Vt = np.linalg.svd(A)
    if s.min() <= 1e-12 * s.max():
        raise ParameterError("reduction needs a nonsingular A")
    n = A.shape[0]
    rot = np.zeros((2 * n, 2 * n))
    rot[:n, :n] = Vt
    rot[n:, n:] = U.T
    I_ = np.eye(n)
    mix = np.block([[I_, I_], [I_, -I_]]) / np.sqrt(2)
    return mix @ rot, np.concatenate([s / 2, -s / 2])


def _bilinear(params) -> ProblemSpec:
    A = np.atleast_2d(np.asarray(params.get("A", [[2.0, 0.0], [0.0, 1.0]]), dtype=float))
    rows, cols = A.shape
    n = rows + cols

    def split(z):
        return z[:cols], z[cols:]

    def f(z):
        x, y = split(z)
        r = y @ A @ x - 1
        return r * r

    def direction(z):
        x, y = split(z)
        return np.concatenate([A.T @ y, A @ x])

    def grad(z):
        x, y = split(z)
        return 2 * (y @ A @ x - 1) * direction(z)

    def nlocus(z):
        x, y = split(z)
        if y @ A @ x - 1 != 0.0:
            return None
        v = direction(z)
        nv = np.linalg.norm(v)
        return _pm_pair(v / nv) if nv > 0 else None

    def on_min(rng, m):
        out = []
        while len(out) < m:
            z = rng.standard_normal(n)
            x, y = split(z)
            s = y @ A @ x
            if abs(s) > 1e-6:
                if s < 0:
                    z[cols:] *= -1
                out.append(z / np.sqrt(abs(s)))
        return np.array(out)

    minima = constraint_set([lambda z: split(z)[1] @ A @ split(z)[0] - 1], n, on_min,
                            label="[<Ax,y>=1]")
    conserved: tuple = ()
    attractor = None
    notes = {}
    if rows == cols:
        try:
            Q, a_red = bilinear_reduction(A)
        except ParameterError:
            Q = None
        if Q is not None:
            red = _quadric({"a": a_red})
            conserved = tuple(_compose_aux(c, Q) for c in red.conserved)
            if red.attractor is not None:
                pts = red.attractor.meta["points"] @ Q  # rows are Q^T w
                attractor = point_set(pts, label="flat minima")
            notes = {"Q": Q, "reduced_a": a_red}
    def grad_rows(Z):
        Xc, Yr = Z[:, :cols], Z[:, cols:]
        r = np.einsum("ij,jk,ik->i", Yr, A, Xc) - 1
        return 2 * r[:, None] * np.column_stack([Yr @ A, Xc @ A.T])

    return ProblemSpec(
        "bilinear", n, f, grad, normalized_locus=nlocus, conserved=conserved,
        grad_rows=grad_rows,
        minima=minima, attractor=attractor, attractor_order=2.0 if attractor else None,
        box=_box(-4, 4, n), params={"A": A.tolist()}, notes=notes,
        regions={"box": _box_sampler(_box(-1.5, 1.5, n)),
                 "basin": on_min, "near_minima": _near(on_min, 0.05)})


# ---------------------------------------------------------------------------
# monomial f(x) = (x^u - 1)^2


def _monomial(params) -> ProblemSpec:
    u = np.asarray(params.get("u", [1, 1]), dtype=float).ravel()
    if np.any(u < 1) or np.any(u != np.round(u)):
        raise ParameterError(f"monomial exponents must be positive integers, got {u}")
    ui = u.astype(int)
    n = u.size

    def mono(x):
        return float(np.prod(x ** ui))

    diag = np.eye(n, dtype=bool)

    def dmono(x):
        # row i holds x_j^u_j for j != i and the derivative factor at j = i
        M = np.where(diag, ui * x ** (ui - 1), x ** ui)
        return M.prod(axis=1)

    def f(x):
        r = mono(x) - 1
        return r * r

    def grad(x):
        return 2 * (mono(x) - 1) * dmono(x)

    def nlocus(x):
        if mono(x) - 1 != 0.0:
            return None
        v = dmono(x)
        nv = np.linalg.norm(v)
        return _pm_pair(v / nv) if nv > 0 else None

    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    conserved = []
    for i, j in pairs:
        conserved.append(AuxFunction(
            f"x{i + 1}^2/{ui[i]} - x{j + 1}^2/{ui[j]}",
            lambda x, i=i, j=j: x[i] ** 2 / u[i] - x[j] ** 2 / u[j],
            lambda x, i=i, j=j: _unit(n, i, 2 * x[i] / u[i]) - _unit(n, j, 2 * x[j] / u[j]),
            lambda x, i=i, j=j: np.diag(_unit(n, i, 2 / u[i]) - _unit(n, j, 2 / u[j]))))
    # every C_ij vanishes at the flat minima
    C0 = [c for c, (i, j) in zip(conserved, pairs) if i == 0]

    def gval(x):
        return sum(c(x) ** 2 for c in C0) / 4

    def ggrad(x):
        return sum(c(x) * c.grad(x) for c in C0) / 2

    def ghess(x):
        return sum(np.outer(c.grad(x), c.grad(x)) + c(x) * c.hess(x) for c in C0) / 2

    g = AuxFunction("sum_j C_1j^2/4", gval, ggrad, ghess)

    # flat minima: x_i^2 = s u_i with prod x^u = 1
    s = np.exp(-np.sum(u * np.log(u)) / u.sum())
    mags = np.sqrt(s * u)
    signs = [np.array(sg) for sg in itertools.product([1.0, -1.0], repeat=n)
             if np.prod(np.array(sg) ** ui) > 0]
    flat = point_set([sg * mags for sg in signs], label="flat minima")

    def on_min(rng, m):
        logs = rng.normal(0.0, 0.5, size=(m, n))
        logs[:, -1] = -(logs[:, :-1] @ u[:-1]) / u[-1]
        sg = np.array([signs[k] for k in rng.integers(0, len(signs), m)])
        return sg * np.exp(logs)

    if n == 2:
        branches = []
        for sg in signs:
            branches.append(parametric_curve(
                lambda t, sg=sg: np.column_stack([sg[0] * np.exp(t),
                                                  sg[1] * np.exp(-u[0] * t / u[1])]),
                -1.6, 1.6, 2))
        minima = finite_union(branches, label="[x^u=1]")
    else:
        minima = constraint_set([lambda x: mono(x) - 1], n, on_min, label="[x^u=1]")

    def grad_rows(X):
        P = X ** ui[None, :]
        m_ = np.prod(P, axis=1)
        dm = np.empty_like(X)
        for i in range(n):
            others = np.prod(np.delete(P, i, axis=1), axis=1)
            dm[:, i] = ui[i] * X[:, i] ** (ui[i] - 1) * others
        return 2 * (m_ - 1)[:, None] * dm

    return ProblemSpec(
        "monomial", n, f, grad, normalized_locus=nlocus, g_list=(g,), grad_rows=grad_rows,
        conserved=tuple(conserved), minima=minima, attractor=flat, attractor_order=2.0,
        box=_box(-5, 5, n), params={"u": ui.tolist()},
        regions={"box": _box_sampler(_box(-2, 2, n)), "basin": on_min,
                 "near_minima": _near(on_min, 0.05)})


def _unit(n, i, val):
    e = np.zeros(n)
    e[i] = val
    return e


# ---------------------------------------------------------------------------
# f(x) = |x1 x3| + |x2 x3 - 1|


def _l1_3d(params) -> ProblemSpec:
    def f(x):
        return abs(x[0] * x[2]) + abs(x[1] * x[2] - 1)

    def grad(x):
        h1 = x[0] * x[2]
        h2 = x[1] * x[2] - 1
        if h1 == 0.0 or h2 == 0.0:
            return None
        s1, s2 = _sign(h1), _sign(h2)
        return np.array([s1 * x[2], s2 * x[2], s1 * x[0] + s2 * x[1]])

    def _vectors(x):
        h1 = x[0] * x[2]
        h2 = x[1] * x[2] - 1
        if h1 != 0.0 and h2 != 0.0:
            return None
        l1s = (_sign(h1),) if h1 != 0.0 else (1.0, -1.0)
        l2s = (_sign(h2),) if h2 != 0.0 else (1.0, -1.0)
        V = np.array([[l1 * x[2], l2 * x[2], l1 * x[0] + l2 * x[1]]
                      for l1 in l1s for l2 in l2s])
        return unique_rows(V, tol=0.0)

    def blocus(x):
        V = _vectors(x)
        return None if V is None else (V, True)

    def nlocus(x):
        V = _vectors(x)
        if V is None:
            return None
        nv = np.linalg.norm(V, axis=1)
        if np.any(nv == 0):
            return None
        return unique_rows(V / nv[:, None], tol=0.0)

    cbar = np.sqrt(2) / 2

    def Cval(x):
        return x[0] ** 2 + x[1] ** 2 - x[2] ** 2

    Cfun = AuxFunction("x1^2+x2^2-x3^2", Cval,
                       lambda x: 2 * np.array([x[0], x[1], -x[2]]),
                       lambda x: 2 * np.diag([1.0, 1.0, -1.0]))
    g = AuxFunction(
        "(C - √2/2)^2/4", lambda x: (Cval(x) - cbar) ** 2 / 4,
        lambda x: (Cval(x) - cbar) * np.array([x[0], x[1], -x[2]]),
        lambda x: (np.outer(Cfun.grad(x), Cfun.grad(x)) / 2
                   + (Cval(x) - cbar) * np.diag([1.0, 1.0, -1.0])))

    branches = [parametric_curve(
        lambda t, s=s: np.column_stack([np.zeros_like(t), s * np.exp(t), s * np.exp(-t)]),
        -1.5, 1.5, 3) for s in (1.0, -1.0)]
    minima = finite_union(branches, label="{(0,t,1/t)}")
    xbar = np.array([0.0, 2 ** 0.25, 2 ** -0.25])
    flat = point_set([xbar, -xbar], label="±(0,2^{1/4},2^{-1/4})")

    def on_min(rng, m):
        t = np.exp(rng.uniform(-1.0, 1.0, m)) * rng.choice([-1.0, 1.0], m)
        return np.column_stack([np.zeros(m), t, 1 / t])

    def grad_rows(X):
        h1 = X[:, 0] * X[:, 2]
        h2 = X[:, 1] * X[:, 2] - 1
        s1, s2 = np.sign(h1), np.sign(h2)
        G = np.column_stack([s1 * X[:, 2], s2 * X[:, 2], s1 * X[:, 0] + s2 * X[:, 1]])
        G[(h1 == 0) | (h2 == 0)] = np.nan
        return G

    return ProblemSpec(
        "l1-3d", 3, f, grad, normalized_locus=nlocus, bouligand_locus=blocus,
        grad_rows=grad_rows,
        smooth=False, default_field="bouligand", g_list=(g,), conserved=(Cfun,),
        minima=minima, attractor=flat, attractor_order=2.0, box=_box(-4, 4, 3),
        regions={"box": _box_sampler(_box(-2, 2, 3)), "basin": on_min,
                 "minima": on_min, "near_minima": _near(on_min, 0.05)})


# ---------------------------------------------------------------------------
# rank-1 f(x, y) = ||x y^T - u v^T||_1


def rank1_interval(u, v) -> tuple:
    """``(t_lo, t_hi)`` bracketing where ``C · C(∇̄f) >= 0`` on ``{(ut, v/t)}``.

    For a sign matrix ``Λ`` the product
    ``(|u|²t² - |v|²/t²)(|Λv|²/t² - |Λᵀu|²t²)`` is negative outside the
    interval between ``(|v|²/|u|²)^{1/4}`` and ``(|Λv|²/|Λᵀu|²)^{1/4}``; the
    attractor's radial range is the hull of these intervals over all ``Λ``.
    """
    u = np.asarray(u, float)
    v = np.asarray(v, float)
    m, n = u.size, v.size
    t1 = (v @ v / (u @ u)) ** 0.25
    lo = hi = t1
    for bits in itertools.product([1.0, -1.0], repeat=m * n):
        L = np.array(bits).reshape(m, n)
        t2 = (np.sum((L @ v) ** 2) / np.sum((L.T @ u) ** 2)) ** 0.25
        lo, hi = min(lo, t2), max(hi, t2)
    return float(lo), float(hi)


def _rank1(params) -> ProblemSpec:
    u = np.asarray(params.get("u", [1.0, 2.0]), dtype=float).ravel()
    v = np.asarray(params.get("v", [1.0, 3.0]), dtype=float).ravel()
    m, k = u.size, v.size
    if m * k > MAX_SIGN_ENTRIES:
        raise ParameterError(f"rank1 needs m*n <= {MAX_SIGN_ENTRIES}, got {m * k}")
    for a in itertools.product([1.0, -1.0], repeat=m):
        if np.array(a) @ u == 0:
            raise ParameterError(f"a^T u v^T b vanishes for a={a}")
    for b in itertools.product([1.0, -1.0], repeat=k):
        if np.array(b) @ v == 0:
            raise ParameterError(f"a^T u v^T b vanishes for b={b}")
    n = m + k
    uv = np.outer(u, v)

    def split(z):
        return z[:m], z[m:]

    def f(z):
        x, y = split(z)
        return float(np.abs(np.outer(x, y) - uv).sum())

    def _dir(L, z):
        x, y = split(z)
        return np.concatenate([L @ y, L.T @ x])

    def grad(z):
        x, y = split(z)
        R = np.outer(x, y) - uv
        if np.any(R == 0.0):
            return None
        return _dir(np.sign(R), z)

    def _patterns(z):
        """Sign matrices attained near ``z``, found from first-order expansions."""
        x, y = split(z)
        R = np.outer(x, y) - uv
        zero = R == 0.0
        if not zero.any():
            return None
        rng = np.random.default_rng(zlib_seed(z))
        H = rng.standard_normal((4096, n))
        hx, hy = H[:, :m], H[:, m:]
        # first-order change of each residual along direction h
        T = hx[:, :, None] * y[None, None, :] + x[None, :, None] * hy[:, None, :]
        S = np.where(zero[None], np.sign(T), np.sign(R)[None])
        S = S[np.all(S != 0, axis=(1, 2))]
        pats = np.unique(S.reshape(len(S), -1), axis=0).reshape(-1, m, k)
        return pats

    def blocus(z):
        pats = _patterns(z)
        if pats is None:
            return None
        V = unique_rows(np.array([_dir(L, z) for L in pats]), tol=0.0)
        return V, False

    def nlocus(z):
        pats = _patterns(z)
        if pats is None:
            return None
        V = np.array([_dir(L, z) for L in pats])
        nv = np.linalg.norm(V, axis=1)
        if np.any(nv == 0):
            return None
        return unique_rows(V / nv[:, None], tol=0.0)

    def Cval(z):
        x, y = split(z)
        return x @ x - y @ y

    Cfun = AuxFunction("|x|^2-|y|^2", Cval,
                       lambda z: 2 * np.concatenate([split(z)[0], -split(z)[1]]),
                       lambda z: 2 * np.diag(np.concatenate([np.ones(m), -np.ones(k)])))
    g = AuxFunction("C^2/4", lambda z: Cval(z) ** 2 / 4,
                    lambda z: Cval(z) * Cfun.grad(z) / 2,
                    lambda z: (np.outer(Cfun.grad(z), Cfun.grad(z)) / 2
                               + Cval(z) * Cfun.hess(z) / 2))

    def branch(s, lo, hi):
        return parametric_curve(
            lambda t: s * np.column_stack([np.exp(t)[:, None] * u[None, :],
                                           np.exp(-t)[:, None] * v[None, :]]),
            lo, hi, n)

    minima = finite_union([branch(1.0, -2.0, 2.0), branch(-1.0, -2.0, 2.0)],
                          label="{(ut, v/t)}")
    t_lo, t_hi = rank1_interval(u, v)
    attractor = finite_union([branch(1.0, np.log(t_lo), np.log(t_hi)),
                              branch(-1.0, np.log(t_lo), np.log(t_hi))],
                             label=f"{{(ut,v/t): {t_lo:.6g} <= |t| <= {t_hi:.6g}}}")

    def on_min(rng, mm):
        t = np.exp(rng.uniform(-1.0, 1.0, mm)) * rng.choice([-1.0, 1.0], mm)
        return np.column_stack([t[:, None] * u[None, :], v[None, :] / t[:, None]])

    return ProblemSpec(
        "rank1", n, f, grad, normalized_locus=nlocus, bouligand_locus=blocus,
        smooth=False, default_field="bouligand", g_list=(g,), conserved=(Cfun,),
        minima=minima, attractor=attractor, attractor_order=2.0, box=_box(-8, 8, n),
        params={"u": u.tolist(), "v": v.tolist()},
        notes={"t_interval": (t_lo, t_hi),
               "t_interval_derivation": "hull over all sign matrices of the roots "
                                        "of both factors of C(ut,v/t)C(grad)"},
        regions={"box": _box_sampler(_box(-2, 2, n)), "basin": on_min,
                 "minima": on_min, "near_minima": _near(on_min, 0.05)})


def zlib_seed(z) -> int:
    import zlib
    return zlib.crc32(np.ascontiguousarray(z, dtype=float).tobytes())


# ---------------------------------------------------------------------------
# synthetic 1-D power law f(x) = x^(2m)


def _power(params) -> ProblemSpec:
    m = int(params.get("m", 2))
    if m < 1:
        raise ParameterError("power needs m >= 1")

    def f(x):
        return float(x[0] ** (2 * m))

    def grad(x):
        return np.array([2 * m * x[0] ** (2 * m - 1)])

    def nlocus(x):
        return np.array([[1.0], [-1.0]]) if x[0] == 0.0 else None

    return ProblemSpec("power", 1, f, grad, normalized_locus=nlocus,
                       grad_rows=lambda X: 2 * m * X ** (2 * m - 1),
                       minima=point_set([[0.0]], label="{0}"), box=_box(-2, 2, 1),
                       params={"m": m}, regions={"box": _box_sampler(_box(-1, 1, 1))})


# ---------------------------------------------------------------------------
# registry

_REGISTRY = {
    "flat4": _flat4,
    "parabola": _parabola,
    "ellipse": _ellipse,
    "hyperbola": _ellipse,
    "quadric": _quadric,
    "bilinear": _bilinear,
    "monomial": _monomial,
    "l1-3d": _l1_3d,
    "l1_3d": _l1_3d,
    "rank1": _rank1,
    "rank-1": _rank1,
    "power": _power,
}

PROBLEM_NAMES = ("flat4", "parabola", "ellipse", "bilinear", "quadric", "monomial",
                 "l1-3d", "rank1")


def parse_problem_id(text: str) -> tuple:
    """Split ``name:key=value,...`` into the name and a dict of raw strings."""
    text = text.strip()
    if not text:
        raise ParameterError("empty problem id")
    name, _, rest = text.partition(":")
    params: dict = {}
    last = None
    if rest:
        for tok in rest.split(","):
            tok = tok.strip()
            if "=" in tok:
                key, _, val = tok.partition("=")
                key = key.strip()
                if not key:
                    raise ParameterError(f"missing key in {text!r}")
                params[key] = val.strip()
                last = key
            elif last is not None and tok:
                params[last] += "," + tok
            else:
                raise ParameterError(f"cannot parse {tok!r} in {text!r}")
    return name.strip().lower(), params


def _convert(val):
    if not isinstance(val, str):
        return val
    try:
        if ";" in val:
            return [[float(c) for c in row.split(",")] for row in val.split(";")]
        if "," in val:
            return [float(c) for c in val.split(",")]
        return float(val)
    except ValueError:
        raise ParameterError(f"not a number or vector: {val!r}") from None


def get_problem(name: str, params: Optional[dict] = None) -> ProblemSpec:
    """Build a catalog problem from ``name`` (optionally ``name:key=value,...``)."""
    base, parsed = parse_problem_id(name)
    parsed.update(params or {})
    try:
        builder = _REGISTRY[base]
    except KeyError:
        raise ParameterError(f"unknown problem {base!r}; known: {PROBLEM_NAMES}") from None
    conv = {k: _convert(v) for k, v in parsed.items()}
    if base == "hyperbola":
        conv.setdefault("a", -1.0)
    return builder(conv)


# ---------------------------------------------------------------------------
# orthogonal change of variables


def _compose_aux(aux: AuxFunction, U: np.ndarray) -> AuxFunction:
    """``x -> aux(U x)`` with chain-rule gradient and Hessian."""
    grad = None if aux.grad is None else (lambda x: U.T @ aux.grad(U @ x))
    hess = None if aux.hess is None else (lambda x: U.T @ aux.hess(U @ x) @ U)
    return AuxFunction(aux.name, lambda x: aux.value(U @ x), grad, hess,
                       differentiable=lambda x: aux.differentiable(U @ x))


def _map_set(desc: Optional[SetDescriptor], U: np.ndarray) -> Optional[SetDescriptor]:
    """Image ``U^T X`` of a set descriptor."""
    if desc is None:
        return None
    proj = None
    if desc._project is not None:
        def proj(x):
            y, T = desc.project(U @ x)
            return U.T @ y, T @ U
    meta = dict(desc.meta)
    if "points" in meta:
        meta["points"] = meta["points"] @ U
    return SetDescriptor(desc.kind, desc.dim, lambda X: desc._dist_many(X @ U.T),
                         lambda rng, m: desc.sample(rng, m) @ U, proj,
                         label=desc.label, meta=meta)


def orthogonal_conjugate(problem: ProblemSpec, U) -> ProblemSpec:
    """The problem ``x -> f(U x)`` for orthogonal ``U``.

    Gradients become ``U^T ∇f(U x)``, loci and directions are mapped by
    ``U^T``, and set descriptors by ``x -> U^T x``.
    """
    U = np.asarray(U, dtype=float)
    if U.shape != (problem.dim, problem.dim):
        raise ParameterError(f"U must be {problem.dim}x{problem.dim}")
    err = float(np.linalg.norm(U.T @ U - np.eye(problem.dim)))
    if err > ORTHO_TOL:
        raise ParameterError(f"U is not orthogonal: ||U^T U - I|| = {err:.3e}")

    def grad(x):
        gx = problem.grad(U @ x)
        return None if gx is None else U.T @ gx

    def nlocus(x):
        V = problem.normalized_locus(U @ x)
        return None if V is None else V @ U

    def blocus(x):
        r = problem.bouligand_locus(U @ x)
        return None if r is None else (r[0] @ U, r[1])

    grad_rows = None
    if problem.grad_rows is not None:
        def grad_rows(X):
            return problem.grad_rows(X @ U.T) @ U

    R = max(float(np.max(np.abs(problem.box[0]))), float(np.max(np.abs(problem.box[1]))))
    regions = {k: (lambda rng, m, s=s: s(rng, m) @ U) for k, s in problem.regions.items()}
    return replace(
        problem, name=problem.name + "∘U", f=lambda x: problem.f(U @ x), grad=grad,
        normalized_locus=nlocus, bouligand_locus=blocus, grad_rows=grad_rows,
        g_list=tuple(_compose_aux(g, U) for g in problem.g_list),
        conserved=tuple(_compose_aux(c, U) for c in problem.conserved),
        minima=_map_set(problem.minima, U), attractor=_map_set(problem.attractor, U),
        box=_box(-R, R, problem.dim), regions=regions,
        notes={**problem.notes, "U": U})


def rotation(theta: float) -> np.ndarray:
    c, s = np.cos(theta), np.sin(theta)
    return np.array([[c, -s], [s, c]])
