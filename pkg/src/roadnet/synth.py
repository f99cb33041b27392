"""Synthetic scenes: a random grid road network, its 3-class mask, imagery and land cover.

This stands in for a segmentation network when testing the reconstruction
pipeline end to end. Everything is a deterministic function of the seed.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .geom import interpolate, polyline_length
from .netgraph import EdgeAttrs, Material, Provenance, RoadGraph, merge_degree_two
from .raster import (GeoTransform, ImageRaster, LulcRaster, RasterMask, centerline_distance,
                     classify_road_region)

LULC_LEGEND = {0: "urban", 1: "cropland", 2: "barren", 3: "water"}

# mean RGB(-NIR) per surface; std applies to every band
SURFACE_COLORS = {
    "background": (95, 110, 70, 140),
    Material.PROCESSED: (118, 118, 124, 70),
    Material.GRAVEL: (150, 128, 100, 95),
    Material.SAND: (206, 186, 142, 120),
}
COLOR_STD = 9.0


@dataclass
class SynthParams:
    size_px: int = 768
    pixel_size: float = 0.5
    road_width: float = 6.0
    spacing: tuple = (70.0, 110.0)
    jitter: float = 4.0
    margin: float = 20.0
    drop_fraction: float = 0.15
    circle_count: int = 0
    circle_radius: float = 9.0
    double_lane: bool = False
    double_lane_width: float = 16.0
    noise: float = 0.0
    contour_thickness: int = 1
    bands: int = 3
    processed_fraction: float = 0.6
    origin: tuple = (500000.0, 4000000.0)
    extra: dict = field(default_factory=dict)


@dataclass
class Surface:
    """A painted road strip; ``edge`` is the GT edge whose material it shows."""
    edge: int
    line: np.ndarray
    width: float


@dataclass
class Scene:
    mask: RasterMask
    image: ImageRaster
    gt: RoadGraph
    lulc: LulcRaster
    surfaces: list


def _grid(rng, p, extent):
    """Straight, slightly tilted grid lines; nodes sit on line intersections.

    Each line is shifted by up to ``jitter`` and tilted so that its ends move
    by at most ``jitter`` more, keeping every through road straight.
    """
    spacing = rng.uniform(*p.spacing)
    n = max(int((extent - 2 * p.margin - 2 * p.jitter) // spacing) + 1, 2)
    start = (extent - (n - 1) * spacing) / 2.0
    base = start + spacing * np.arange(n)
    mid = extent / 2.0
    slope_max = p.jitter / max(mid, 1e-9)
    vx = base + rng.uniform(-p.jitter, p.jitter, n) / 2.0
    vs = rng.uniform(-slope_max, slope_max, n) / 2.0
    hy = base + rng.uniform(-p.jitter, p.jitter, n) / 2.0
    hs = rng.uniform(-slope_max, slope_max, n) / 2.0
    pos = {}
    for i in range(n):
        for j in range(n):
            # x = vx + vs (y - mid),  y = hy + hs (x - mid)
            a = np.array([[1.0, -vs[i]], [-hs[j], 1.0]])
            b = np.array([vx[i] - vs[i] * mid, hy[j] - hs[j] * mid])
            pos[i, j] = np.linalg.solve(a, b)
    edges = set()
    for i in range(n):
        for j in range(n):
            if i + 1 < n:
                edges.add(((i, j), (i + 1, j)))
            if j + 1 < n:
                edges.add(((i, j), (i, j + 1)))
    return n, pos, sorted(edges)


def make_network(rng, p, extent):
    """Random jittered grid (with optional traffic circle and double lane) in local metres.

    Returns ``(graph, surfaces)``: the GT graph and the road strips to paint.
    A double-lane road is painted as one wide strip along its centreline
    while the GT holds its two carriageways.
    """
    n, pos, edges = _grid(rng, p, extent)
    interior = [(i, j) for i in range(1, n - 1) for j in range(1, n - 1)]
    circle_nodes = []
    if p.circle_count and interior:
        order = rng.permutation(len(interior))
        for k in order:
            cand = interior[k]
            if all(max(abs(cand[0] - c[0]), abs(cand[1] - c[1])) > 1 for c in circle_nodes):
                circle_nodes.append(cand)
            if len(circle_nodes) >= p.circle_count:
                break
    # drop some edges between interior nodes; each node loses at most one
    touched = set(circle_nodes)
    for c in circle_nodes:
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            touched.add((c[0] + di, c[1] + dj))
    inner_edges = [e for e in edges if e[0] in interior and e[1] in interior]
    dropped = set()
    for k in rng.permutation(len(inner_edges)):
        if len(dropped) >= int(round(p.drop_fraction * len(inner_edges))):
            break
        a, b = inner_edges[k]
        if a in touched or b in touched:
            continue
        dropped.add(inner_edges[k])
        touched |= {a, b}
    edges = [e for e in edges if e not in dropped]

    g = RoadGraph()
    ids = {}

    def node(key, xy):
        if key not in ids:
            ids[key] = g.add_node(xy)
        return ids[key]

    attach = {}
    for c in circle_nodes:
        centre = pos[c]
        for e in edges:
            if c in e:
                other = e[1] if e[0] == c else e[0]
                d = pos[other] - centre
                attach[(c, other)] = centre + p.circle_radius * d / np.hypot(*d)

    for a, b in edges:
        pa = attach.get((a, b), pos[a]) if a in circle_nodes else pos[a]
        pb = attach.get((b, a), pos[b]) if b in circle_nodes else pos[b]
        ka = ("att", a, b) if a in circle_nodes else a
        kb = ("att", b, a) if b in circle_nodes else b
        u, v = node(ka, pa), node(kb, pb)
        g.add_edge(u, v, [pa, pb], EdgeAttrs())
    for c in circle_nodes:
        centre = pos[c]
        atts = sorted(((math.atan2(*(xy - centre)[::-1]) % (2 * math.pi), ids[("att", c, o)])
                       for (cc, o), xy in attach.items() if cc == c))
        for k, (ang, nid) in enumerate(atts):
            ang2, nid2 = atts[(k + 1) % len(atts)]
            if ang2 <= ang:
                ang2 += 2 * math.pi
            m = max(2, int(math.ceil(math.degrees(ang2 - ang) / 2.0)))
            t = np.linspace(ang, ang2, m + 1)
            arc = np.column_stack([centre[0] + p.circle_radius * np.cos(t),
                                   centre[1] + p.circle_radius * np.sin(t)])
            arc[0], arc[-1] = g.nodes[nid], g.nodes[nid2]
            g.add_edge(nid, nid2, arc, EdgeAttrs(provenance=Provenance.CIRCLE))
    merge_degree_two(g)

    wide = None
    if p.double_lane:
        cands = [eid for eid, e in g.edges.items()
                 if e.attrs.provenance != Provenance.CIRCLE and len(e.geometry) == 2]
        if cands:
            wide = cands[int(rng.integers(len(cands)))]
    surfaces = [Surface(eid, g.edges[eid].geometry.copy(), p.road_width)
                for eid in sorted(g.edges) if eid != wide]
    if wide is not None:
        centre = g.edges[wide].geometry.copy()
        lane = _split_lanes(g, wide, p.double_lane_width / 4.0)
        surfaces.append(Surface(lane, centre, p.double_lane_width))
    return g, surfaces


def _split_lanes(g, eid, offset):
    """Replace straight edge ``eid`` by two carriageways at +-``offset`` plus connectors."""
    e = g.remove_edge(eid)
    a, b = g.nodes[e.u], g.nodes[e.v]
    d = (b - a) / np.hypot(*(b - a))
    nrm = np.array([-d[1], d[0]])
    attrs = EdgeAttrs(double_lane=True, provenance=Provenance.LANE_DUPLICATE)
    lanes = []
    for side in (1.0, -1.0):
        pa, pb = a + side * offset * nrm, b + side * offset * nrm
        na, nb = g.add_node(pa), g.add_node(pb)
        lanes.append(g.add_edge(na, nb, [pa, pb], attrs))
        g.add_edge(e.u, na, [a, pa], attrs)
        g.add_edge(nb, e.v, [pb, b], attrs)
    return lanes[0]


def _smooth_noise(rng, shape, sigma):
    f = ndimage.gaussian_filter(rng.standard_normal(shape), sigma)
    return f / (f.std() + 1e-12)


def render_mask(surfaces, transform, shape, noise=0.0, contour_thickness=1, rng=None):
    """Rasterise road strips, with optional boundary wobble of about ``noise`` metres."""
    excess = np.full(shape, np.inf)
    for w in sorted({sf.width for sf in surfaces}):
        lines = [sf.line for sf in surfaces if sf.width == w]
        d = centerline_distance(lines, transform, shape, w / 2.0 + 3.0 * abs(noise) + 1.0)
        np.minimum(excess, d - w / 2.0, out=excess)
    if noise:
        excess = excess - noise * _smooth_noise(rng, shape, 3.0)
    return RasterMask(classify_road_region(excess <= 0.0, contour_thickness), transform)


def _assign_materials(rng, g, lulc, transform, p):
    barren_like = {k for k, v in LULC_LEGEND.items() if v in ("barren", "water")}
    for eid in sorted(g.edges):
        e = g.edges[eid]
        if rng.random() < p.processed_fraction:
            e.attrs.material = Material.PROCESSED
            continue
        mid = interpolate(e.geometry, polyline_length(e.geometry) / 2.0)
        col, row = transform.world_to_pixel(mid[0], mid[1])
        r = int(np.clip(row, 0, lulc.shape[0] - 1))
        c = int(np.clip(col, 0, lulc.shape[1] - 1))
        win = lulc[max(r - 40, 0):r + 41, max(c - 40, 0):c + 41]
        frac = np.isin(win, list(barren_like)).mean()
        e.attrs.material = Material.SAND if frac >= 0.5 else Material.GRAVEL
    # one surface: carriageways and connectors share a material
    lanes = sorted(eid for eid, e in g.edges.items() if e.attrs.provenance == Provenance.LANE_DUPLICATE)
    for eid in lanes[1:]:
        g.edges[eid].attrs.material = g.edges[lanes[0]].attrs.material


def render_image(rng, g, surfaces, transform, shape, bands=3):
    base = np.array(SURFACE_COLORS["background"][:bands], float)
    img = base + COLOR_STD * rng.standard_normal((*shape, bands))
    for sf in surfaces:
        on = centerline_distance([sf.line], transform, shape, sf.width / 2.0) <= sf.width / 2.0
        mat = g.edges[sf.edge].attrs.material
        col = np.array(SURFACE_COLORS[mat if mat != Material.UNKNOWN else Material.PROCESSED][:bands],
                       float)
        img[on] = col + COLOR_STD * rng.standard_normal((int(on.sum()), bands))
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def make_lulc(rng, shape):
    f = _smooth_noise(rng, shape, 40.0)
    labels = np.digitize(f, [-0.8, 0.3, 1.4]).astype(np.uint8)
    # 0 urban, 1 cropland, 2 barren, 3 water
    return labels


def run_synth(seed=42, params=None, **overrides):
    """Generate a :class:`Scene` deterministically from ``seed``.

    ``params`` is a :class:`SynthParams` (or dict of its fields); keyword
    overrides are applied on top.
    """
    if params is None:
        params = SynthParams()
    elif isinstance(params, dict):
        params = SynthParams(**params)
    if overrides:
        params = SynthParams(**{**params.__dict__, **overrides})
    rng = np.random.default_rng(seed)
    shape = (params.size_px, params.size_px)
    extent = params.size_px * params.pixel_size
    ox, oy = params.origin
    transform = GeoTransform.north_up(ox, oy + extent, params.pixel_size)
    g, surfaces = make_network(rng, params, extent)
    # local metres -> projected coordinates
    shift = np.array([ox, oy])
    for n in list(g.nodes):
        g.nodes[n] = g.nodes[n] + shift
    for e in g.edges.values():
        e.geometry = e.geometry + shift
    for sf in surfaces:
        sf.line = sf.line + shift
    mask = render_mask(surfaces, transform, shape, params.noise, params.contour_thickness, rng)
    lulc_labels = make_lulc(rng, shape)
    _assign_materials(rng, g, lulc_labels, transform, params)
    image = ImageRaster(render_image(rng, g, surfaces, transform, shape, params.bands), transform)
    lulc = LulcRaster(lulc_labels, transform, LULC_LEGEND)
    return Scene(mask=mask, image=image, gt=g, lulc=lulc, surfaces=surfaces)
