"""Loop denoising, traffic-circle detection and reconstruction, double-lane duplication."""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import shapely
from scipy import ndimage
from scipy.signal import fftconvolve
from shapely.geometry import Polygon

from .exceptions import GeometryError
from .geom import densify, offset_polyline, ring_centroid
from .netgraph import EdgeAttrs, LoopKind, Provenance, enumerate_faces, merge_nodes
from .raster import INTERIOR
from .validation import check_points, check_positive

logger = logging.getLogger(__name__)


@dataclass
class Circle:
    center: np.ndarray
    radius: float
    support: float
    center_px: tuple = None
    radius_px: float = None


# -- circle fitting --------------------------------------------------------

def fit_circle(points, max_iter=20):
    """Least-squares circle through ``points``.

    An algebraic fit (minimising the sum of ``(x^2 + y^2 + Dx + Ey + F)^2``)
    seeds up to ``max_iter`` Gauss-Newton steps on the geometric distances.

    Returns
    -------
    center : ndarray of shape (2,)
    radius : float
    rmse : float
        Root-mean-square radial residual of the final fit.
    """
    pts = check_points(points, "points", min_points=3)
    shift = pts.mean(axis=0)
    p = pts - shift
    scale = np.abs(p).max()
    if scale == 0:
        raise GeometryError("degenerate circle fit: all points coincide")
    s = np.linalg.svd(p / scale, compute_uv=False)
    if s[1] < 1e-10 * s[0]:
        raise GeometryError("degenerate circle fit: points are collinear")
    A = np.column_stack([p[:, 0], p[:, 1], np.ones(len(p))])
    b = -(p ** 2).sum(axis=1)
    (D, E, F), *_ = np.linalg.lstsq(A, b, rcond=None)
    c = np.array([-D / 2.0, -E / 2.0])
    r2 = c @ c - F
    if not np.isfinite(r2) or r2 <= 0:
        raise GeometryError("degenerate circle fit: algebraic solution has no real radius")
    r = math.sqrt(r2)
    for _ in range(max_iter):
        d = p - c
        dist = np.hypot(d[:, 0], d[:, 1])
        if np.any(dist == 0):
            break
        res = dist - r
        J = np.column_stack([-d[:, 0] / dist, -d[:, 1] / dist, -np.ones(len(p))])
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        c = c + step[:2]
        r = r + step[2]
        if np.abs(step).max() <= 1e-15 * max(1.0, r):
            break
    dist = np.hypot(*(p - c).T)
    rmse = float(np.sqrt(np.mean((dist - r) ** 2)))
    return c + shift, float(abs(r)), rmse


# -- Hough detection -------------------------------------------------------

@lru_cache(maxsize=256)
def ring_kernel(r):
    """Digital circle of radius ``r``: offsets whose rounded distance equals ``r``."""
    yy, xx = np.mgrid[-r - 1:r + 2, -r - 1:r + 2]
    k = (np.rint(np.hypot(yy, xx)) == r).astype(float)
    return k


def hough_support(binary, r_min, r_max):
    """Fraction of each digital circle (centre = any pixel, radius in range) that is on.

    Returns an array ``(n_radii, h, w)``; entries are exact ratios of integer counts.
    """
    img = binary.astype(float)
    out = np.empty((r_max - r_min + 1,) + binary.shape)
    for i, r in enumerate(range(r_min, r_max + 1)):
        k = ring_kernel(r)
        counts = np.rint(fftconvolve(img, k, mode="same"))
        out[i] = counts / k.sum()
    return out


def detect_circle(mask, window, r_min=4, r_max=60, support_min=0.6):
    """Circular Hough transform over interior pixels of a mask window.

    Every pixel of the window is a candidate centre and every integer radius
    in ``[r_min, r_max]`` a candidate radius. The support of a candidate is
    the fraction of its digital circle lying on interior pixels. Centres are
    ranked by their summed support excess over ``support_min``; the radius
    is the support-weighted mean over the contiguous band of radii around
    the best one. A circle is only reported when its peak support reaches
    ``support_min`` and its island (the disk inside the band) is mostly not
    road, which rejects filled blobs.

    ``window`` is ``(row0, col0, row1, col1)`` with exclusive upper bounds.
    """
    r0, c0, r1, c1 = (int(v) for v in window)
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, mask.height), min(c1, mask.width)
    if r1 <= r0 or c1 <= c0:
        return None
    sub = mask.labels[r0:r1, c0:c1] == INTERIOR
    if not sub.any():
        return None
    r_max = int(min(r_max, max(sub.shape)))
    if r_max < r_min:
        return None
    sup = hough_support(sub, r_min, r_max)
    score = np.clip(sup - support_min, 0.0, None).sum(axis=0)
    best = int(np.argmax(score))
    if score.flat[best] <= 0.0:
        return None
    cy, cx = np.unravel_index(best, score.shape)
    profile = sup[:, cy, cx]
    k = int(np.argmax(profile))
    lo = k
    while lo > 0 and profile[lo - 1] >= support_min:
        lo -= 1
    hi = k
    while hi + 1 < len(profile) and profile[hi + 1] >= support_min:
        hi += 1
    radii = np.arange(r_min, r_max + 1)[lo:hi + 1]
    weights = profile[lo:hi + 1]
    radius_px = float((radii * weights).sum() / weights.sum())
    island_r = radii[0] - 1
    if island_r < 1:
        return None
    yy, xx = np.mgrid[:sub.shape[0], :sub.shape[1]]
    island = np.rint(np.hypot(yy - cy, xx - cx)) <= island_r
    if sub[island].mean() > 1.0 - support_min:
        return None
    t = mask.transform
    row, col = r0 + cy, c0 + cx
    x, y = t.centers(row, col)
    return Circle(center=np.array([float(x), float(y)]), radius=radius_px * t.pixel_size,
                  support=float(profile[k]), center_px=(int(row), int(col)), radius_px=radius_px)


def loop_window(mask, ring, pad=0.2):
    """Pixel window ``(row0, col0, row1, col1)`` around a ring, padded by ``pad`` per side."""
    cols, rows = mask.transform.world_to_pixel(ring[:, 0], ring[:, 1])
    h = rows.max() - rows.min()
    w = cols.max() - cols.min()
    r0 = int(math.floor(rows.min() - pad * h))
    r1 = int(math.ceil(rows.max() + pad * h)) + 1
    c0 = int(math.floor(cols.min() - pad * w))
    c1 = int(math.ceil(cols.max() + pad * w)) + 1
    return max(r0, 0), max(c0, 0), min(r1, mask.height), min(c1, mask.width)


# -- loop classification and collapse ---------------------------------------

def classify_loops(g, mask, area_threshold=300.0, r_min=4, r_max=60, support_min=0.6, loops=None):
    """Enumerate faces and label them noise, circle or undetermined.

    Faces below ``area_threshold`` are noise unless the Hough check on their
    padded bounding window finds a circle centred inside the face, in which
    case they are circles and carry the detected :class:`Circle`.
    """
    area_threshold = check_positive(area_threshold, "area_threshold")
    loops = enumerate_faces(g) if loops is None else loops
    for lp in loops:
        if lp.area >= area_threshold:
            lp.kind = LoopKind.UNDETERMINED
            continue
        lp.kind = LoopKind.NOISE
        if mask is None:
            continue
        circle = detect_circle(mask, loop_window(mask, lp.ring), r_min, r_max, support_min)
        if circle is not None and Polygon(lp.ring).contains(shapely.Point(circle.center)):
            lp.kind = LoopKind.CIRCLE
            lp.circle = circle
    return loops


def _group_by_shared_edges(loops):
    groups = []
    for lp in loops:
        ids = set(lp.edge_ids)
        merged = [grp for grp in groups if grp[0] & ids]
        for grp in merged:
            groups.remove(grp)
            ids |= grp[0]
        members = [lp] + [m for grp in merged for m in grp[1]]
        groups.append((ids, members))
    return groups


def collapse_noise_loops(g, loops):
    """Replace every noise loop by straight segments between its attachment nodes.

    Attachments are loop nodes with edges leaving the loop. With at most one
    attachment the loop is deleted, with two it becomes a single straight
    edge and with more a star of edges to the loop's area centroid. Noise
    loops sharing edges are collapsed together as one region.
    """
    g = g.copy()
    noise = [lp for lp in loops if lp.kind == LoopKind.NOISE]
    for edge_ids, members in _group_by_shared_edges(noise):
        edge_ids = {e for e in edge_ids if e in g.edges}
        if not edge_ids:
            continue
        nodes = {g.edges[e].u for e in edge_ids} | {g.edges[e].v for e in edge_ids}
        attach = sorted(n for n in nodes if g.incident(n) - edge_ids)
        weights = np.array([m.area for m in members])
        cents = np.array([ring_centroid(m.ring) for m in members])
        centroid = (weights[:, None] * cents).sum(axis=0) / weights.sum()
        for e in edge_ids:
            g.remove_edge(e)
        for n in nodes:
            if n not in attach and not g.incident(n):
                g.remove_node(n)
        attrs = EdgeAttrs(provenance=Provenance.COLLAPSED)
        if len(attach) == 2:
            a, b = attach
            if not np.array_equal(g.nodes[a], g.nodes[b]):
                g.add_edge(a, b, [g.nodes[a], g.nodes[b]], attrs)
        elif len(attach) >= 3:
            hub = g.add_node(centroid)
            for a in attach:
                if not np.array_equal(g.nodes[a], centroid):
                    g.add_edge(hub, a, [centroid, g.nodes[a]], attrs)
            if not g.incident(hub):
                g.remove_node(hub)
    g.remove_orphans()
    return g


# -- traffic circles -------------------------------------------------------

def _face_for_circle(g, center):
    best = None
    pt = shapely.Point(center)
    for lp in enumerate_faces(g):
        if Polygon(lp.ring).contains(pt) and (best is None or lp.area < best.area):
            best = lp
    return best


def _arc(center, radius, a0, a1, max_step_deg=5.0):
    n = max(1, int(math.ceil(math.degrees(a1 - a0) / max_step_deg)))
    t = np.linspace(a0, a1, n + 1)
    return np.column_stack([center[0] + radius * np.cos(t), center[1] + radius * np.sin(t)])


def replace_loop_with_circle(g, loop, center, radius, merge_tol=1.0, max_step_deg=5.0):
    """Swap the edges of ``loop`` for arcs of the given circle, in place.

    Attachment nodes are projected radially onto the circle (dragging the
    terminal vertex of their external edges along); attachments landing
    within ``merge_tol`` metres of arc length of each other are merged.
    """
    edge_ids = {e for e in loop.edge_ids if e in g.edges}
    nodes = {g.edges[e].u for e in edge_ids} | {g.edges[e].v for e in edge_ids}
    attach = sorted(n for n in nodes if g.incident(n) - edge_ids)
    for e in edge_ids:
        g.remove_edge(e)
    for n in nodes:
        if n not in attach and n in g.nodes and not g.incident(n):
            g.remove_node(n)
    center = np.asarray(center, dtype=float)
    placed = []
    for n in attach:
        d = g.nodes[n] - center
        norm = math.hypot(*d)
        ang = math.atan2(d[1], d[0]) if norm > 0 else 0.0
        g.move_node(n, center + radius * np.array([math.cos(ang), math.sin(ang)]))
        placed.append((ang % (2 * math.pi), n))
    placed.sort()
    merged = []
    for ang, n in placed:
        if merged and (ang - merged[-1][0]) * radius < merge_tol:
            merge_nodes(g, keep=merged[-1][1], drop=n)
            continue
        merged.append((ang, n))
    if len(merged) > 1 and (merged[0][0] + 2 * math.pi - merged[-1][0]) * radius < merge_tol:
        merge_nodes(g, keep=merged[0][1], drop=merged[-1][1])
        merged.pop()
    attrs = EdgeAttrs(provenance=Provenance.CIRCLE)
    if not merged:
        anchor = g.add_node(center + np.array([radius, 0.0]))
        merged = [(0.0, anchor)]
    arcs = []
    for i, (ang, n) in enumerate(merged):
        nxt_ang, nxt = merged[(i + 1) % len(merged)]
        if nxt_ang <= ang:
            nxt_ang += 2 * math.pi
        geom = _arc(center, radius, ang, nxt_ang, max_step_deg)
        geom[0] = g.nodes[n]
        geom[-1] = g.nodes[nxt]
        arcs.append(g.add_edge(n, nxt, geom, attrs))
    return arcs


def replace_circle_loops(g, loops, merge_tol=1.0, sample_step=0.5):
    """Replace every circle loop by its least-squares circle.

    Edge ids change through the intermediate stages, so each circle is
    re-associated with the smallest current face containing its detected
    centre. The circle is fitted to that face's boundary sampled every
    ``sample_step`` metres.
    """
    g = g.copy()
    for lp in loops:
        if lp.kind != LoopKind.CIRCLE or lp.circle is None:
            continue
        face = _face_for_circle(g, lp.circle.center)
        if face is None:
            logger.warning("circle at %s has no enclosing face any more; skipped", lp.circle.center)
            continue
        try:
            center, radius, _ = fit_circle(densify(face.ring, sample_step)[:-1])
        except GeometryError as exc:
            logger.warning("circle fit failed: %s", exc)
            continue
        replace_loop_with_circle(g, face, center, radius, merge_tol)
    return g


# -- double lanes ----------------------------------------------------------

def width_sampler(mask, step=1.0):
    """Return ``f(line) -> width``: twice the mean distance from samples of
    ``line`` to the nearest non-interior pixel, or None off the raster."""
    dist = ndimage.distance_transform_edt(mask.labels == INTERIOR) * mask.transform.pixel_size

    def width(line):
        pts = densify(line, step)
        cols, rows = mask.transform.world_to_pixel(pts[:, 0], pts[:, 1])
        r = np.floor(rows).astype(int)
        c = np.floor(cols).astype(int)
        ok = (r >= 0) & (r < mask.height) & (c >= 0) & (c < mask.width)
        return 2.0 * float(dist[r[ok], c[ok]].mean()) if ok.any() else None

    return width


def measure_widths(g, mask, step=1.0):
    """Mean road width per edge: twice the mean distance from centreline samples
    to the nearest non-interior pixel."""
    width = width_sampler(mask, step)
    widths = {}
    for eid, e in g.edges.items():
        w = width(e.geometry)
        if w is not None:
            widths[eid] = w
    return widths


def flag_double_lanes(g, mask, width_min=12.0):
    """Record ``mean_width`` on every edge and flag edges wider than ``width_min``."""
    g = g.copy()
    for eid, w in measure_widths(g, mask).items():
        e = g.edges[eid]
        e.attrs.mean_width = w
        if e.attrs.provenance != Provenance.LANE_DUPLICATE:
            e.attrs.double_lane = w > width_min
    return g


def duplicate_double_lanes(g, lane_offset=None):
    """Replace each double-lane centreline by two carriageways offset to either side.

    ``lane_offset=None`` uses a quarter of the edge's measured mean width.
    Each carriageway ends at new nodes placed at the offset ends, joined to
    the original nodes by short connector edges.
    """
    g = g.copy()
    for eid in sorted(g.edges):
        e = g.edges.get(eid)
        if e is None or not e.attrs.double_lane or e.attrs.provenance == Provenance.LANE_DUPLICATE:
            continue
        off = lane_offset if lane_offset is not None else (
            e.attrs.mean_width / 4.0 if e.attrs.mean_width else None)
        if not off or e.is_loop:
            logger.warning("edge %d flagged double lane but has no usable offset; left as is", eid)
            continue
        try:
            lanes = [offset_polyline(e.geometry, s * off) for s in (1.0, -1.0)]
        except GeometryError as exc:
            logger.warning("edge %d not duplicated: %s", eid, exc)
            continue
        g.remove_edge(eid)
        attrs = EdgeAttrs(double_lane=True, material=e.attrs.material,
                          mean_width=e.attrs.mean_width, provenance=Provenance.LANE_DUPLICATE)
        for lane in lanes:
            a = g.add_node(lane[0])
            b = g.add_node(lane[-1])
            g.add_edge(a, b, lane, attrs)
            g.add_edge(e.u, a, [g.nodes[e.u], lane[0]], attrs)
            g.add_edge(b, e.v, [lane[-1], g.nodes[e.v]], attrs)
    return g
