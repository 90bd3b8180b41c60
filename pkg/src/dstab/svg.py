"""Minimal SVG 1.1 output: marching-squares contours and a trajectory polyline."""

from __future__ import annotations

import numpy as np

# edges of a cell: 0 bottom, 1 right, 2 top, 3 left (corners: 0=(i,j) 1=(i,j+1) 2=(i+1,j+1) 3=(i+1,j))
_CASES = {
    1: [(3, 0)], 2: [(0, 1)], 3: [(3, 1)], 4: [(1, 2)], 5: [(3, 2), (0, 1)],
    6: [(0, 2)], 7: [(3, 2)], 8: [(2, 3)], 9: [(2, 0)], 10: [(2, 1), (3, 0)],
    11: [(2, 1)], 12: [(1, 3)], 13: [(1, 0)], 14: [(0, 3)],
}


def marching_squares(Z: np.ndarray, xs: np.ndarray, ys: np.ndarray, level: float) -> list:
    """Line segments ``((x0, y0), (x1, y1))`` of the ``level`` set of ``Z[iy, ix]``."""
    Z = np.asarray(Z, dtype=float)
    above = Z > level
    c0, c1 = above[:-1, :-1], above[:-1, 1:]
    c2, c3 = above[1:, 1:], above[1:, :-1]
    idx = c0 * 1 + c1 * 2 + c2 * 4 + c3 * 8
    segs = []
    iy, ix = np.nonzero((idx > 0) & (idx < 15))
    for i, j in zip(iy, ix):
        case = int(idx[i, j])
        z = (Z[i, j], Z[i, j + 1], Z[i + 1, j + 1], Z[i + 1, j])
        if not np.all(np.isfinite(z)):
            continue
        if case in (5, 10):
            # saddle: decide by the cell-centre average
            centre = sum(z) / 4 > level
            if (case == 5) != centre:
                case = 10 if case == 5 else 5
        corners = ((xs[j], ys[i]), (xs[j + 1], ys[i]), (xs[j + 1], ys[i + 1]), (xs[j], ys[i + 1]))

        def point(edge):
            a, b = edge, (edge + 1) % 4
            za, zb = z[a], z[b]
            t = 0.5 if zb == za else (level - za) / (zb - za)
            (xa, ya), (xb, yb) = corners[a], corners[b]
            return (xa + t * (xb - xa), ya + t * (yb - ya))

        for e0, e1 in _CASES[case]:
            segs.append((point(e0), point(e1)))
    return segs


def grid_values(fun, lo, hi, N: int = 512):
    xs = np.linspace(lo[0], hi[0], N)
    ys = np.linspace(lo[1], hi[1], N)
    Z = np.empty((N, N))
    with np.errstate(all="ignore"):
        for i, y in enumerate(ys):
            for j, x in enumerate(xs):
                Z[i, j] = fun(np.array([x, y]))
    return xs, ys, Z


def contour_levels(Z: np.ndarray, count: int = 8, log: bool = True) -> np.ndarray:
    v = Z[np.isfinite(Z)]
    if log:
        v = v[v > 0]
        if v.size == 0:
            return np.array([])
        hi = float(v.max())
        lo = max(float(v.min()), hi * 1e-8)
        return np.geomspace(lo, hi, count + 2)[1:-1]
    if v.size == 0:
        return np.array([])
    return np.linspace(float(v.min()), float(v.max()), count + 2)[1:-1]


def render(lo, hi, layers, polyline=None, markers=(), width: int = 640,
           title: str = "") -> str:
    """SVG text.  ``layers`` is a list of ``(segments, colour)`` or
    ``(segments, colour, label)``; labelled layers get a legend entry."""
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    span = hi - lo
    height = int(round(width * span[1] / span[0])) if span[0] > 0 else width

    def sx(x):
        return (x - lo[0]) / span[0] * width

    def sy(y):
        return height - (y - lo[1]) / span[1] * height

    out = ['<?xml version="1.0" encoding="UTF-8"?>',
           f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>']
    if title:
        out.append(f"<title>{title}</title>")
    for i, (segs, colour, *label) in enumerate(layers):
        if label:
            out.append(f'<text x="8" y="{16 + 14 * i}" font-size="12" '
                       f'fill="{colour}">{label[0]}</text>')
        if not segs:
            continue
        d = " ".join(f"M{sx(a[0]):.2f} {sy(a[1]):.2f}L{sx(b[0]):.2f} {sy(b[1]):.2f}"
                     for a, b in segs)
        out.append(f'<path d="{d}" fill="none" stroke="{colour}" stroke-width="0.8"/>')
    if polyline is not None and len(polyline):
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in polyline)
        out.append(f'<polyline points="{pts}" fill="none" stroke="black" stroke-width="1"/>')
        x0, y0 = polyline[0]
        out.append(f'<circle cx="{sx(x0):.2f}" cy="{sy(y0):.2f}" r="3" fill="red"/>')
    for x, y in markers:
        out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="blue"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def thin_polyline(P: np.ndarray, max_points: int = 5000) -> np.ndarray:
    if len(P) <= max_points:
        return P
    step = int(np.ceil(len(P) / max_points))
    keep = np.arange(0, len(P), step)
    if keep[-1] != len(P) - 1:
        keep = np.append(keep, len(P) - 1)
    return P[keep]


def trajectory_svg(problem, points: np.ndarray, g_log: str = "auto", N: int = 512,
                   pad: float = 0.15, title: str = "") -> str:
    """Contours of ``f`` (and of ``g`` or ``log g``) with the iterate polyline."""
    P = np.asarray(points, dtype=float)
    extra = [P]
    if problem.attractor is not None and problem.attractor.meta.get("points") is not None:
        extra.append(problem.attractor.meta["points"])
    allp = np.vstack(extra)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    w = np.maximum(hi - lo, 1e-3)
    lo, hi = lo - pad * w, hi + pad * w
    blo, bhi = problem.box
    if blo is not None:
        lo, hi = np.maximum(lo, blo), np.minimum(hi, bhi)
    xs, ys, Zf = grid_values(problem.f, lo, hi, N)
    layers = [(sum((marching_squares(Zf, xs, ys, L) for L in contour_levels(Zf, 8, True)),
                   []), "#1f77b4", "f")]
    if problem.g is not None:
        _, _, Zg = grid_values(problem.g, lo, hi, N)
        fin = Zg[np.isfinite(Zg) & (Zg > 0)]
        use_log = (g_log == "on") or (g_log == "auto" and fin.size > 0
                                      and fin.max() / fin.min() > 1e3)
        if use_log:
            with np.errstate(divide="ignore", invalid="ignore"):
                Zl = np.where(Zg > 0, np.log10(Zg), np.nan)
            Zl[~np.isfinite(Zl)] = np.nan
            levels = contour_levels(Zl, 8, False)
            Zg = Zl
        else:
            levels = contour_levels(Zg, 8, False)
        layers.append((sum((marching_squares(Zg, xs, ys, L) for L in levels), []), "#d62728",
                       "log10 g" if use_log else "g"))
    markers = []
    if problem.attractor is not None and problem.attractor.meta.get("points") is not None:
        markers = [tuple(p) for p in problem.attractor.meta["points"]]
    return render(lo, hi, layers, thin_polyline(P), markers, title=title)
