"""Planar geometry primitives: polylines, buffers, polygon overlap, Hausdorff, offsets.

Polylines are ``(n, 2)`` float arrays of projected (metric) coordinates.
Polygons are :class:`shapely.geometry.Polygon` objects oriented with a
counter-clockwise exterior and clockwise holes.
"""

import math

import numpy as np
import shapely
from shapely.geometry import LineString, Polygon
from shapely.geometry.polygon import orient
from shapely.validation import explain_validity

from .exceptions import GeometryError, ParameterError
from .validation import check_points, check_polyline, check_positive

#: Arc discretisation for round caps and joins, in degrees per step.
ARC_STEP_DEG = 8.0
#: Default densification step for Hausdorff sampling, in metres.
HAUSDORFF_STEP = 0.5

# shapely counts segments per quarter circle
_QUAD_SEGS = int(math.ceil(90.0 / ARC_STEP_DEG))


def polyline_length(line):
    """Total length of a polyline."""
    line = np.asarray(line, dtype=float)
    if len(line) < 2:
        return 0.0
    return float(np.hypot(*np.diff(line, axis=0).T).sum())


def cumulative_length(line):
    line = np.asarray(line, dtype=float)
    seg = np.hypot(*np.diff(line, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(seg)])


def interpolate(line, distance):
    """Point at arc-length ``distance`` along ``line`` (clamped to the ends)."""
    line = np.asarray(line, dtype=float)
    cum = cumulative_length(line)
    d = min(max(distance, 0.0), cum[-1])
    i = int(np.searchsorted(cum, d, side="right") - 1)
    i = min(i, len(line) - 2)
    seg = cum[i + 1] - cum[i]
    t = 0.0 if seg == 0 else (d - cum[i]) / seg
    return line[i] + t * (line[i + 1] - line[i])


def signed_ring_area(ring):
    """Shoelace area of a ring; positive when counter-clockwise.

    The ring may be given open or closed.
    """
    ring = np.asarray(ring, dtype=float)
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def ring_centroid(ring):
    """Area centroid of a simple ring (falls back to the vertex mean when degenerate)."""
    ring = np.asarray(ring, dtype=float)
    if np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-12:
        return ring.mean(axis=0)
    cx = ((x + xn) * cross).sum() / (6.0 * a)
    cy = ((y + yn) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def densify(line, step):
    """Resample ``line`` so consecutive samples are at most ``step`` apart.

    All original vertices are kept.
    """
    line = np.asarray(line, dtype=float)
    out = []
    for p, q in zip(line[:-1], line[1:]):
        n = max(1, int(math.ceil(math.hypot(*(q - p)) / step)))
        t = np.arange(n)[:, None] / n
        out.append(p + t * (q - p))
    out.append(line[-1:])
    return np.vstack(out)


def point_segment_distances(points, seg_a, seg_b):
    """Distance matrix between ``points`` (m, 2) and segments ``seg_a -> seg_b`` (k, 2)."""
    d = seg_b - seg_a
    dd = np.einsum("ij,ij->i", d, d)
    dd = np.where(dd == 0.0, 1.0, dd)
    rel = points[:, None, :] - seg_a[None, :, :]
    t = np.clip(np.einsum("mkj,kj->mk", rel, d) / dd, 0.0, 1.0)
    proj = seg_a[None, :, :] + t[..., None] * d[None, :, :]
    return np.hypot(*(points[:, None, :] - proj).transpose(2, 0, 1))


def point_polyline_distance(points, line, chunk=4_000_000):
    """Exact distance from each point to the nearest point of ``line``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    line = np.asarray(line, dtype=float)
    if len(line) == 1:
        return np.hypot(*(points - line[0]).T)
    a, b = line[:-1], line[1:]
    rows = max(1, chunk // len(a))
    out = np.empty(len(points))
    for s in range(0, len(points), rows):
        out[s:s + rows] = point_segment_distances(points[s:s + rows], a, b).min(axis=1)
    return out


def buffer_polyline(line, radius):
    """Polygon of all points within ``radius`` of ``line`` (round caps and joins).

    Arcs are discretised at no more than :data:`ARC_STEP_DEG` degrees per step.
    """
    radius = check_positive(radius, "radius")
    pts = check_points(line, "line", min_points=1)
    if len(pts) == 1 or polyline_length(pts) == 0.0:
        geom = shapely.Point(pts[0]).buffer(radius, quad_segs=_QUAD_SEGS)
    else:
        geom = LineString(pts).buffer(radius, quad_segs=_QUAD_SEGS, cap_style="round",
                                      join_style="round")
    if geom.geom_type != "Polygon":
        # self-overlapping lines can produce multipart output only through numerical noise
        geom = max(geom.geoms, key=lambda g: g.area)
    return orient(geom, 1.0)


def _as_geometry(polys, name):
    if isinstance(polys, shapely.Geometry):
        polys = [polys]
    polys = list(polys)
    for i, p in enumerate(polys):
        if not p.is_valid:
            raise GeometryError(f"{name}[{i}] is invalid: {explain_validity(p)}")
    if not polys:
        return Polygon()
    return shapely.union_all(polys)


def polygon_intersection_area(a, b):
    """Area of the intersection of two polygon sets.

    Each argument is a polygon or an iterable of polygons; members of one set
    are unioned first so overlaps inside a set are not double counted.
    """
    ga = _as_geometry(a, "a")
    gb = _as_geometry(b, "b")
    if ga.is_empty or gb.is_empty:
        return 0.0
    area = ga.intersection(gb).area
    return float(min(max(area, 0.0), ga.area, gb.area))


def directed_hausdorff(a, b, step=HAUSDORFF_STEP):
    """max over samples of ``a`` (every ``step`` metres) of the distance to polyline ``b``."""
    return float(point_polyline_distance(densify(a, step), b).max())


def hausdorff_distance(a, b, step=HAUSDORFF_STEP):
    """Symmetric Hausdorff distance between two polylines, sampled every ``step`` metres."""
    step = check_positive(step, "step")
    a = check_points(a, "a", min_points=1)
    b = check_points(b, "b", min_points=1)
    # resampled points sit a few ulps off their own segment; identical lines are exactly 0
    if a.shape == b.shape and (np.array_equal(a, b) or np.array_equal(a, b[::-1])):
        return 0.0
    return max(directed_hausdorff(a, b, step), directed_hausdorff(b, a, step))


def _unit(v):
    n = np.hypot(v[..., 0], v[..., 1])
    return v / n[..., None]


def _left_normal(u):
    return np.stack([-u[..., 1], u[..., 0]], axis=-1)


def offset_polyline(line, offset, miter_limit=2.0):
    """Translate ``line`` sideways by ``offset`` metres (positive to the left).

    Outer corners use miter joins while the miter length stays within
    ``miter_limit * |offset|`` and are bevelled beyond that. Inner corners
    always use the miter (intersection) point.

    Raises
    ------
    GeometryError
        If an offset segment reverses direction, i.e. the offset collapses
        on a curve tighter than ``|offset|``.
    """
    if not np.isfinite(offset) or offset == 0:
        raise ParameterError(f"offset must be non-zero and finite, got {offset!r}")
    pts = check_polyline(line, "line")
    if polyline_length(pts) <= abs(offset):
        raise GeometryError(f"line length {polyline_length(pts):.3f} m does not exceed |offset| {abs(offset)}")
    u = _unit(np.diff(pts, axis=0))
    n = _left_normal(u)
    shift = offset * n
    out = [pts[0] + shift[0]]
    # start/end point of each offset segment after joins, to detect reversal
    seg_start = [out[0]]
    seg_end = []
    for i in range(1, len(pts) - 1):
        u0, u1 = u[i - 1], u[i]
        cross = u0[0] * u1[1] - u0[1] * u1[0]
        dot = float(np.dot(u0, u1))
        a = pts[i] + shift[i - 1]
        b = pts[i] + shift[i]
        if abs(cross) < 1e-12 and dot > 0:
            out.append(a)
            seg_end.append(a)
            seg_start.append(a)
            continue
        # positive offset: a right turn (cross < 0) is an outer corner
        outer = cross * offset < 0
        half = math.acos(max(-1.0, min(1.0, dot))) / 2.0
        cos_half = math.cos(half)
        miter_len = abs(offset) / cos_half if cos_half > 1e-12 else math.inf
        if outer and miter_len > miter_limit * abs(offset):
            out.extend([a, b])
            seg_end.append(a)
            seg_start.append(b)
            continue
        bis = _unit(n[i - 1] + n[i]) if np.linalg.norm(n[i - 1] + n[i]) > 1e-12 else n[i]
        m = pts[i] + np.sign(offset) * miter_len * bis
        out.append(m)
        seg_end.append(m)
        seg_start.append(m)
    out.append(pts[-1] + shift[-1])
    seg_end.append(out[-1])
    for i, (s, e) in enumerate(zip(seg_start, seg_end)):
        if np.dot(e - s, u[i]) < -1e-9:
            raise GeometryError(f"offset {offset} collapses near vertex {i} at {tuple(pts[i])}")
    return check_polyline(np.array(out), "offset line")
