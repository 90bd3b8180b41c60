"""Euler discretization ``x_{k+1} = x_k + alpha_k u_k`` with ``u_k ∈ F(x_k)``."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .core import (HorizonError, ParameterError, StepSchedule, as_point,
                   compensated_cumsum, make_constant_schedule)
from .fields import Field, FieldOverflowError

RECONSTRUCTION_TOL = 1e-13


@dataclass(frozen=True)
class Selector:
    """How to pick ``u_k`` from a finite sample of ``F(x_k)``.

    ``first`` and ``index`` are deterministic, ``random`` draws uniformly,
    ``adversarial`` maximises ``objective(x + alpha u)`` (typically ``g``).
    """

    kind: str = "first"
    seed: int = 0
    index: int = 0
    objective: Optional[Callable] = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in ("first", "random", "index", "adversarial"):
            raise ParameterError(f"unknown selector {self.kind!r}")
        if self.kind == "adversarial" and self.objective is None:
            raise ParameterError("adversarial selector needs an objective")

    def choose(self, x, alpha, D, rng) -> int:
        m = len(D)
        if m == 1 or self.kind == "first":
            return 0
        if self.kind == "index":
            return min(self.index, m - 1)
        if self.kind == "random":
            return int(rng.integers(0, m))
        vals = [self.objective(x + alpha * u) for u in D]
        vals = [-np.inf if np.isnan(v) else v for v in vals]
        return int(np.argmax(vals))

    def describe(self) -> str:
        if self.kind == "random":
            return f"random(seed={self.seed})"
        if self.kind == "index":
            return f"index({self.index})"
        return self.kind


FIRST = Selector("first")


def random_selector(seed: int = 0) -> Selector:
    return Selector("random", seed=seed)


def adversarial_selector(objective: Callable) -> Selector:
    return Selector("adversarial", objective=objective)


@dataclass
class Trajectory:
    """Stored Euler iterates.

    ``k`` are the iteration indices of the stored rows (all of ``0..K`` unless
    thinned).  ``alphas``, ``directions`` and ``choices`` describe the step
    taken *from* each stored row but the last.  ``error`` is ``(k, message)``
    when the run was truncated.
    """

    k: np.ndarray
    points: np.ndarray
    times: np.ndarray
    f_values: np.ndarray
    g_values: np.ndarray
    alphas: np.ndarray
    directions: Optional[np.ndarray] = None
    choices: Optional[np.ndarray] = None
    sample_sizes: Optional[np.ndarray] = None
    error: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.k)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @property
    def last(self) -> np.ndarray:
        return self.points[-1]

    @property
    def truncated(self) -> bool:
        return self.error is not None

    def reconstruction_residual(self) -> float:
        """Largest ``|x_{k+1} - x_k - alpha_k u_k| / (1 + |x_k|)`` over consecutive rows."""
        if self.directions is None or len(self) < 2:
            return 0.0
        consecutive = np.diff(self.k) == 1
        X0, X1 = self.points[:-1], self.points[1:]
        r = np.linalg.norm(X1 - X0 - self.alphas[:, None] * self.directions, axis=1)
        r = r / (1.0 + np.linalg.norm(X0, axis=1))
        return float(np.max(r[consecutive], initial=0.0))

    # -- CSV ---------------------------------------------------------------

    def to_csv(self, dest=None) -> str:
        """Write ``k,t,alpha,x1..xn,f,g`` rows with 17 significant digits.

        The final row's ``alpha`` is empty.  Returns the text; also writes it
        to ``dest`` (a path or text stream) when given.
        """
        n = self.dim
        cols = ["k", "t", "alpha"] + [f"x{i + 1}" for i in range(n)] + ["f", "g"]
        out = io.StringIO()
        out.write(",".join(cols) + "\n")
        for i in range(len(self)):
            a = _fmt(self.alphas[i]) if i < len(self.alphas) else ""
            row = [str(int(self.k[i])), _fmt(self.times[i]), a]
            row += [_fmt(v) for v in self.points[i]]
            row += [_fmt(self.f_values[i]), _fmt(self.g_values[i])]
            out.write(",".join(row) + "\n")
        text = out.getvalue()
        if isinstance(dest, (str, bytes)) or hasattr(dest, "__fspath__"):
            with open(dest, "w", newline="") as fh:
                fh.write(text)
        elif dest is not None:
            dest.write(text)
        return text

    @classmethod
    def from_csv(cls, source) -> "Trajectory":
        if hasattr(source, "read"):
            text = source.read()
        elif isinstance(source, str) and "\n" in source:
            text = source
        else:
            with open(source) as fh:
                text = fh.read()
        lines = text.strip("\n").split("\n")
        header = lines[0].split(",")
        if header[:3] != ["k", "t", "alpha"] or header[-2:] != ["f", "g"]:
            raise ParameterError(f"not a trajectory CSV header: {lines[0]!r}")
        n = len(header) - 5
        rows = [ln.split(",") for ln in lines[1:]]
        k = np.array([int(r[0]) for r in rows])
        t = np.array([float(r[1]) for r in rows])
        alphas = np.array([float(r[2]) for r in rows if r[2] != ""])
        pts = np.array([[float(v) for v in r[3:3 + n]] for r in rows]).reshape(len(rows), n)
        fv = np.array([float(r[3 + n]) for r in rows])
        gv = np.array([float(r[4 + n]) for r in rows])
        return cls(k, pts, t, fv, gv, alphas)


def _fmt(v) -> str:
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def _g_value(g, x) -> float:
    if g is None:
        return math.nan
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        return float(g(x))


def simulate(problem, field: Field, schedule: StepSchedule, x0, K: int,
             selector: Selector = FIRST, seed: int = 0, thin: int = 1,
             g: Optional[Callable] = None, stop: Optional[Callable] = None) -> Trajectory:
    """Run ``K`` steps of the Euler inclusion.

    Each step evaluates ``F(x_k)``, selects ``u_k`` and moves by
    ``alpha_k u_k``.  Random choices come from a generator seeded by
    ``(selector.seed, seed)`` so runs are bit-reproducible.  A field
    overflow or a NaN objective truncates the run and records ``error``.

    ``g`` defaults to the problem's first auxiliary function.  With
    ``thin > 1`` only every ``thin``-th row, the final row and rows where
    ``g`` exceeds its running maximum by more than round-off are stored.  ``stop(k, x)`` may end the run
    early (used by the probes).
    """
    if K < 1:
        raise ParameterError("K must be at least 1")
    if thin < 1:
        raise ParameterError("thin must be at least 1")
    x = as_point(x0, field.dim)
    if problem is not None and problem.dim != field.dim:
        raise ParameterError("problem and field dimensions disagree")
    if g is None and problem is not None and problem.g is not None:
        g = problem.g
    f = problem.f if problem is not None else (lambda z: math.nan)
    rng = np.random.default_rng([int(selector.seed), int(seed)])
    alphas = schedule.alphas(K)
    times = compensated_cumsum(alphas)

    ks, pts, fs, gs = [0], [x], [float(f(x))], [_g_value(g, x)]
    steps_a, steps_u, steps_c, steps_m = [], [], [], []
    gmax = gs[0]
    error = None
    for k in range(K):
        alpha = float(alphas[k])
        try:
            D = field(x).directions
        except FieldOverflowError as exc:
            error = (k, str(exc))
            break
        i = selector.choose(x, alpha, D, rng)
        u = D[i]
        x_new = x + alpha * u
        fv = float(f(x_new))
        if math.isnan(fv) or not np.all(np.isfinite(x_new)):
            error = (k, "NaN objective" if math.isnan(fv) else "non-finite iterate")
            break
        gv = _g_value(g, x_new)
        # the step from row k is stored whenever row k is stored
        if ks[-1] == k:
            steps_a.append(alpha)
            steps_u.append(u)
            steps_c.append(i)
            steps_m.append(len(D))
        x = x_new
        k1 = k + 1
        keep = thin == 1 or k1 % thin == 0 or k1 == K
        if not math.isnan(gv) and gv > gmax:
            if gv > gmax + 1e-12 * (1.0 + abs(gmax)):
                keep = True
            gmax = gv
        if stop is not None and stop(k1, x):
            keep = True
        if keep:
            if ks[-1] != k:
                # non-consecutive row: no step is recorded for the previous row
                steps_a.append(math.nan)
                steps_u.append(np.full(x.size, math.nan))
                steps_c.append(-1)
                steps_m.append(0)
            ks.append(k1)
            pts.append(x)
            fs.append(fv)
            gs.append(gv)
        if stop is not None and stop(k1, x):
            break
    if error is not None and ks[-1] != error[0]:
        # make sure the failing iterate is the last stored row
        steps_a.append(math.nan)
        steps_u.append(np.full(x.size, math.nan))
        steps_c.append(-1)
        steps_m.append(0)
        ks.append(error[0])
        pts.append(x)
        fs.append(float(f(x)))
        gs.append(_g_value(g, x))
    n_rows = len(ks)
    steps_a, steps_u = steps_a[: n_rows - 1], steps_u[: n_rows - 1]
    steps_c, steps_m = steps_c[: n_rows - 1], steps_m[: n_rows - 1]
    karr = np.array(ks)
    return Trajectory(
        k=karr, points=np.array(pts), times=times[karr], f_values=np.array(fs),
        g_values=np.array(gs), alphas=np.array(steps_a),
        directions=np.array(steps_u).reshape(len(steps_u), x.size),
        choices=np.array(steps_c, dtype=int), sample_sizes=np.array(steps_m, dtype=int),
        error=error,
        meta={"schedule": schedule.describe(), "selector": selector.describe(),
              "seed": seed, "field": field.name, "K": K, "thin": thin})


# ---------------------------------------------------------------------------
# tracking gap


def tracking_gap(problem, x0, caps, T: float, selector: Selector = FIRST, seed: int = 0,
                 field: Optional[Field] = None) -> list:
    """Distance between constant-step Euler runs and a fine-step reference.

    The reference uses ``min(caps)/100``; for each cap the gap is
    ``max_{t_k <= T} |x_k - x_ref(t_k)|`` with the reference interpolated
    linearly in time.  Returns ``[(cap, gap), ...]`` in the order of ``caps``.
    """
    caps = [float(c) for c in caps]
    if not caps:
        raise ParameterError("caps must be nonempty")
    if any(b >= a for a, b in zip(caps, caps[1:])):
        raise ParameterError("caps must be strictly decreasing")
    if not T > 0:
        raise ParameterError("T must be positive")
    F = field if field is not None else problem.descent()
    a_ref = min(caps) / 100.0
    K_ref = int(math.ceil(T / a_ref - 1e-9))
    ref = simulate(problem, F, make_constant_schedule(a_ref), x0, K_ref, selector, seed)
    if ref.truncated or len(ref) < K_ref + 1:
        raise HorizonError(f"reference trajectory failed: {ref.error}")
    lo, hi = problem.box
    if lo is not None and (np.any(ref.points < lo) or np.any(ref.points > hi)):
        raise HorizonError("reference trajectory leaves the problem box")
    out = []
    for cap in caps:
        K = max(1, int(math.floor(T / cap + 1e-9)))
        tr = simulate(problem, F, make_constant_schedule(cap), x0, K, selector, seed)
        mask = tr.times <= T * (1 + 1e-12)
        xr = np.column_stack([np.interp(tr.times[mask], ref.times, ref.points[:, j])
                              for j in range(ref.dim)])
        gap = float(np.max(np.linalg.norm(tr.points[mask] - xr, axis=1)))
        out.append((cap, gap))
    return out


def gaps_monotone(pairs, slack: float = 1.1) -> bool:
    """True when each gap is at most ``slack`` times the gap of the previous (larger) cap."""
    gaps = [g for _, g in pairs]
    return all(b <= slack * a for a, b in zip(gaps, gaps[1:]))


# ---------------------------------------------------------------------------
# batched stepping


@dataclass
class BatchRun:
    """Result of :func:`simulate_batch`.

    ``sup_watch`` is the running maximum of the watched quantity, and
    ``first_exceed``/``last_exceed`` are the first and last iteration indices
    where it exceeded the threshold (``-1`` if never).  ``steps`` counts the
    steps each row actually took.
    """

    final: np.ndarray
    steps: np.ndarray
    sup_watch: np.ndarray
    first_exceed: np.ndarray
    last_exceed: np.ndarray
    points: Optional[np.ndarray] = None
    errors: dict = field(default_factory=dict)
    stopped_early: bool = False


def simulate_batch(problem, field: Field, alphas: np.ndarray, X0: np.ndarray,
                   selectors: Sequence, seed: int = 0, watch: Optional[Callable] = None,
                   threshold: float = math.inf, stop_on_exceed: bool = False,
                   record: bool = False, watch_every: int = 1) -> BatchRun:
    """Step ``m`` independent Euler runs together.

    Row ``i`` starts at ``X0[i]`` with steps ``alphas[i]`` and selector
    ``selectors[i]``.  For normalized or Bouligand fields the single-valued
    case is computed for all rows at once from ``problem.grad_many``; rows
    whose gradient is zero or undefined go through the exact set-valued
    field and their selector, exactly as :func:`simulate` does.

    ``watch(X) -> (m,)`` is evaluated after every step (e.g. the distance to
    a target), or only every ``watch_every`` steps and at the last step when
    it is expensive.  With ``stop_on_exceed`` the whole batch stops at the
    first observed exceedance of ``threshold``.

    The vectorized arithmetic can differ from :func:`simulate` in the last
    bit, so long chattering runs are statistically, not bitwise, equivalent.
    """
    X = np.array(X0, dtype=float)
    alphas = np.asarray(alphas, dtype=float)
    m, n = X.shape
    K = alphas.shape[1]
    if alphas.shape[0] != m or len(selectors) != m:
        raise ParameterError("alphas, X0 and selectors must have one row per run")
    vectorized = field.kind in ("normalized", "bouligand") and problem is not None
    rngs = [np.random.default_rng([int(s.seed), int(seed)]) for s in selectors]
    alive = np.ones(m, bool)
    steps = np.zeros(m, int)
    errors = {}
    pts = np.empty((m, K + 1, n)) if record else None
    if record:
        pts[:, 0] = X
    w0 = watch(X) if watch is not None else np.zeros(m)
    sup = w0.copy()
    over = w0 > threshold
    first = np.where(over, 0, -1)
    last = first.copy()
    stopped = False
    all_alive = True
    idx = np.arange(m)
    for k in range(K):
        if not all_alive:
            idx = np.flatnonzero(alive)
            if idx.size == 0:
                break
        Xa = X if all_alive else X[idx]
        a_k = alphas[:, k] if all_alive else alphas[idx, k]
        if vectorized:
            G = problem.grad_many(Xa)
            if field.kind == "normalized":
                nrm = np.sqrt(np.einsum("ij,ij->i", G, G))
                ok = np.isfinite(nrm) & (nrm > 0)
                with np.errstate(divide="ignore", invalid="ignore"):
                    U = (field.sign / nrm)[:, None] * G
            else:
                ok = np.isfinite(G).all(axis=1)
                U = field.sign * G
            slow = () if ok.all() else np.flatnonzero(~ok)
        else:
            U = np.empty_like(Xa)
            slow = range(len(idx))
        for j in slow:
            i = idx[j]
            try:
                D = field(Xa[j]).directions
            except FieldOverflowError as exc:
                errors[int(i)] = (k, str(exc))
                U[j] = np.nan
                continue
            U[j] = D[selectors[i].choose(Xa[j], a_k[j], D, rngs[i])]
        Xn = Xa + a_k[:, None] * U
        good = np.isfinite(Xn).all(axis=1)
        if good.all():
            if all_alive:
                X = Xn
                steps += 1
            else:
                X[idx] = Xn
                steps[idx] += 1
        else:
            for j in np.flatnonzero(~good):
                errors.setdefault(int(idx[j]), (k, "non-finite iterate"))
            X = X.copy()
            X[idx[good]] = Xn[good]
            steps[idx[good]] += 1
            alive[idx[~good]] = False
            all_alive = False
        if record:
            pts[:, k + 1] = X
        if watch is not None and ((k + 1) % watch_every == 0 or k + 1 == K):
            w = watch(X)
            np.maximum(sup, w, out=sup)
            ex = w > threshold
            if not all_alive:
                ex &= alive
            if ex.any():
                first[(first < 0) & ex] = k + 1
                last[ex] = k + 1
                if stop_on_exceed:
                    stopped = True
                    break
    if record and stopped:
        pts = pts[:, : k + 2]
    return BatchRun(X, steps, sup, first, last, pts, errors, stopped)
