"""Stair-step removal by incremental total-least-squares line fitting."""

import math

import numpy as np

from .geom import point_polyline_distance
from .validation import check_polyline, check_positive

#: Below this angle (degrees) consecutive fitted lines are treated as parallel.
PARALLEL_DEG = 5.0


def tls_line(points):
    """Total-least-squares line through ``points``.

    Returns ``(centroid, unit direction)``.
    """
    c = points.mean(axis=0)
    d = points - c
    cov = d.T @ d
    w, v = np.linalg.eigh(cov)
    return c, v[:, 1]


def orthogonal_residuals(points, centroid, direction):
    normal = np.array([-direction[1], direction[0]])
    return (points - centroid) @ normal


def window_residuals(points):
    """Orthogonal residuals of ``points`` to their total-least-squares line."""
    if len(points) <= 2:
        return np.zeros(len(points))
    c, d = tls_line(points)
    return orthogonal_residuals(points, c, d)


def window_fits(points, epsilon):
    """Window acceptance: RMS residual and every single residual within ``epsilon``.

    The per-point cap keeps the vertex count monotone in ``epsilon``; an
    RMS-only test lets long windows swallow corners.
    """
    r = window_residuals(points)
    return math.sqrt(float(np.mean(r * r))) <= epsilon and float(np.abs(r).max()) <= epsilon


def greedy_breakpoints(pts, epsilon):
    """Indices where the greedy window growth restarts (first and last included)."""
    n = len(pts)
    breaks = [0]
    i = 0
    while i < n - 1:
        j = i + 1
        while j + 1 < n and window_fits(pts[i:j + 2], epsilon):
            j += 1
        breaks.append(j)
        i = j
    return breaks


def _project(p, line):
    c, d = line
    return c + np.dot(p - c, d) * d


def _intersect(l1, l2):
    (c1, d1), (c2, d2) = l1, l2
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    t = ((c2[0] - c1[0]) * d2[1] - (c2[1] - c1[1]) * d2[0]) / cross
    return c1 + t * d1


def _vertices(pts, breaks, epsilon):
    lines = [tls_line(pts[a:b + 1]) for a, b in zip(breaks[:-1], breaks[1:])]
    out = [pts[0]]
    for k in range(1, len(lines)):
        p = pts[breaks[k]]
        l1, l2 = lines[k - 1], lines[k]
        cosang = abs(float(np.dot(l1[1], l2[1])))
        vertex = None
        if cosang < math.cos(math.radians(PARALLEL_DEG)):
            x = _intersect(l1, l2)
            if np.hypot(*(x - p)) <= epsilon:
                vertex = x
        if vertex is None:
            vertex = 0.5 * (_project(p, l1) + _project(p, l2))
            if np.hypot(*(vertex - p)) > epsilon:
                vertex = p.copy()
        out.append(vertex)
    out.append(pts[-1])
    return np.array(out)


def fit_polyline(points, epsilon):
    """Replace a stair-stepped chain by a few straight segments.

    A window of consecutive points grows while its orthogonal residuals to
    the total-least-squares line stay within ``epsilon`` (RMS and maximum);
    on violation a breakpoint is emitted and the next window starts there. Output
    vertices are the first point, the intersections of consecutive fitted
    lines (or, for near-parallel lines or intersections farther than
    ``epsilon`` from the breakpoint, the mean of the breakpoint's two
    projections) and the last point.

    Windows whose points end up farther than ``2 * epsilon`` from the output
    are split at their worst point, so every input vertex lies within
    ``2 * epsilon`` of the result.
    """
    epsilon = check_positive(epsilon, "epsilon")
    pts = check_polyline(points, "points")
    closed = len(pts) > 2 and np.array_equal(pts[0], pts[-1])
    if len(pts) == 2:
        return pts.copy()
    breaks = greedy_breakpoints(pts, epsilon)
    while True:
        out = _vertices(pts, breaks, epsilon)
        split = []
        for a, b in zip(breaks[:-1], breaks[1:]):
            if b - a < 2:
                continue
            d = point_polyline_distance(pts[a + 1:b], out)
            k = int(np.argmax(d))
            if d[k] > 2.0 * epsilon:
                split.append(a + 1 + k)
        if not split:
            break
        breaks = sorted(set(breaks) | set(split))
    if closed and len(out) < 4:
        # a closed edge needs at least a triangle to stay a ring
        idx = np.linspace(0, len(pts) - 1, 4).round().astype(int)
        breaks = sorted(set(breaks) | set(idx.tolist()))
        out = _vertices(pts, breaks, epsilon)
    return out


def simplify_graph(g, epsilon=0.75):
    """Apply :func:`fit_polyline` to every edge; nodes and incidence are untouched."""
    g = g.copy()
    for e in g.edges.values():
        e.geometry = fit_polyline(e.geometry, epsilon)
    return g
