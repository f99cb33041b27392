"""Thinning of the road-interior class and tracing of the skeleton into a graph."""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .netgraph import EdgeAttrs, Provenance, RoadGraph
from .raster import GeoTransform, RasterMask

# 8-neighbour offsets (drow, dcol) numbered counter-clockwise from east:
# x1=E, x2=NE, x3=N, x4=NW, x5=W, x6=SW, x7=S, x8=SE
_OFFSETS = [(0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1)]
_EIGHT = np.ones((3, 3), dtype=bool)


def _build_luts():
    """Deletion tables for the two sub-iterations of Guo-Hall thinning."""
    first = np.zeros(256, dtype=bool)
    second = np.zeros(256, dtype=bool)
    for code in range(256):
        x = [bool(code >> i & 1) for i in range(8)]
        x9 = x + [x[0]]
        # crossing number: count of 4-transitions around the pixel
        xh = sum(1 for i in (0, 2, 4, 6) if not x9[i] and (x9[i + 1] or x9[i + 2]))
        n1 = sum(1 for k in (0, 2, 4, 6) if x9[k] or x9[k + 1])
        n2 = sum(1 for k in (1, 3, 5, 7) if x9[k] or x9[(k + 1) % 8])
        g12 = xh == 1 and 2 <= min(n1, n2) <= 3
        # x1..x8 -> indices 0..7
        g3 = not ((x[1] or x[2] or not x[7]) and x[0])
        g3p = not ((x[5] or x[6] or not x[3]) and x[4])
        first[code] = g12 and g3
        second[code] = g12 and g3p
    return first, second


_LUT_FIRST, _LUT_SECOND = _build_luts()


def neighbour_codes(img):
    """8-bit neighbourhood code of every pixel (bit i set when neighbour x_{i+1} is on)."""
    p = np.pad(img.astype(np.uint8), 1)
    h, w = img.shape
    code = np.zeros((h, w), dtype=np.uint8)
    for bit, (dr, dc) in enumerate(_OFFSETS):
        code |= p[1 + dr:1 + dr + h, 1 + dc:1 + dc + w] << bit
    return code


def neighbour_count(img):
    img = img.astype(np.uint8)
    return ndimage.convolve(img, np.array([[1, 1, 1], [1, 0, 1], [1, 1, 1]], np.uint8),
                            mode="constant") * img


@dataclass
class SkeletonRaster:
    on: np.ndarray
    transform: GeoTransform

    @property
    def height(self):
        return self.on.shape[0]

    @property
    def width(self):
        return self.on.shape[1]

    def to_mask(self):
        """Debug view as a mask: skeleton pixels labelled interior."""
        return RasterMask(self.on.astype(np.uint8), self.transform)


def is_simple(patch):
    """True when deleting the centre of a 3x3 boolean patch preserves topology.

    Uses 8-connectivity for the foreground and 4-connectivity for the
    background.
    """
    nb = patch.copy()
    nb[1, 1] = False
    _, n_fg = ndimage.label(nb, structure=_EIGHT)
    if n_fg != 1:
        return False
    bg = ~patch
    bg[1, 1] = False
    lab, _ = ndimage.label(bg)
    touching = {lab[r, c] for r, c in ((0, 1), (1, 0), (1, 2), (2, 1)) if lab[r, c]}
    return len(touching) == 1


def _break_blocks(img):
    """Delete one simple pixel from every fully-on 2x2 block. Returns True if any changed."""
    changed = False
    blocks = img[:-1, :-1] & img[1:, :-1] & img[:-1, 1:] & img[1:, 1:]
    p = np.pad(img, 1)
    for r, c in np.argwhere(blocks):
        if not (img[r, c] and img[r + 1, c] and img[r, c + 1] and img[r + 1, c + 1]):
            continue
        for rr, cc in ((r, c), (r, c + 1), (r + 1, c), (r + 1, c + 1)):
            patch = p[rr:rr + 3, cc:cc + 3]
            if is_simple(patch):
                img[rr, cc] = False
                p[rr + 1, cc + 1] = False
                changed = True
                break
    return changed


def thin_binary(img, max_iter=None):
    """Two-subiteration parallel thinning of a boolean image, run to a fixpoint.

    Residual 2x2 blocks, which the parallel rule cannot reduce, are broken
    afterwards by sequential removal of simple pixels.
    """
    img = np.asarray(img, dtype=bool).copy()
    it = 0
    while max_iter is None or it < max_iter:
        changed = False
        for lut in (_LUT_FIRST, _LUT_SECOND):
            delete = img & lut[neighbour_codes(img)]
            if delete.any():
                img[delete] = False
                changed = True
        it += 1
        if not changed:
            if not _break_blocks(img):
                break
    return img


def thin(mask):
    """Skeleton of the interior class of ``mask`` (contour and other are background)."""
    fg = mask.labels == 1 if isinstance(mask, RasterMask) else np.asarray(mask, bool)
    transform = mask.transform if isinstance(mask, RasterMask) else None
    return SkeletonRaster(thin_binary(fg), transform)


def _clusters(node_px):
    labels, n = ndimage.label(node_px, structure=_EIGHT)
    return labels, n


def trace(skel):
    """Vectorise a skeleton into a :class:`RoadGraph`.

    Pixels whose 8-neighbour count differs from 2 are node pixels; touching
    node pixels are merged into one node placed at the member pixel closest
    to the cluster mean. Edges follow the maximal chains of degree-2 pixels
    between nodes. A closed chain without any node pixel gets an anchor node
    at its first pixel in raster order and becomes a self-loop.
    """
    on = np.asarray(skel.on, dtype=bool)
    t = skel.transform or GeoTransform.north_up(0.0, float(on.shape[0]), 1.0)
    h, w = on.shape
    deg = neighbour_count(on)
    node_px = on & (deg != 2)
    cl_labels, n_cl = _clusters(node_px)

    g = RoadGraph()

    def world(rc):
        x, y = t.centers(rc[0], rc[1])
        return (float(x), float(y))

    cluster_node = {}
    if n_cl:
        idx = np.argwhere(node_px)
        labs = cl_labels[node_px]
        for lab in range(1, n_cl + 1):
            members = idx[labs == lab]
            centre = members.mean(axis=0)
            rep = members[np.argmin(((members - centre) ** 2).sum(axis=1))]
            cluster_node[lab] = (g.add_node(world(rep)), tuple(rep))

    def neighbours(r, c):
        for dr, dc in _OFFSETS:
            rr, cc = r + dr, c + dc
            if 0 <= rr < h and 0 <= cc < w and on[rr, cc]:
                yield rr, cc

    visited = np.zeros_like(on)
    attrs = EdgeAttrs(provenance=Provenance.TRACED)

    def walk(start_lab, first):
        """Follow degree-2 pixels from ``first`` until a node pixel is reached."""
        path = [first]
        visited[first] = True
        prev = None
        cur = first
        while True:
            nxt = None
            for nb in neighbours(*cur):
                if nb == prev or (prev is None and cl_labels[nb] == start_lab):
                    continue
                if node_px[nb]:
                    if cl_labels[nb] == start_lab and len(path) == 1:
                        continue
                    return path, nb
                if not visited[nb]:
                    nxt = nb
                    break
            if nxt is None:
                return path, None
            visited[nxt] = True
            path.append(nxt)
            prev, cur = cur, nxt

    def pixel_chain(node_rep, path, end_rep):
        pts = [node_rep] + path + ([end_rep] if end_rep is not None else [])
        return np.array([world(p) for p in pts])

    for lab in sorted(cluster_node):
        node_id, rep = cluster_node[lab]
        members = np.argwhere(cl_labels == lab)
        for m in members:
            for nb in neighbours(*m):
                if node_px[nb] or visited[nb]:
                    continue
                path, end = walk(lab, nb)
                if end is None:
                    # dead end inside a chain cannot occur for valid skeletons
                    continue
                end_lab = cl_labels[end]
                end_node, end_rep = cluster_node[end_lab]
                chain = [tuple(m)] if tuple(m) != rep else []
                tail = [end] if end != end_rep else []
                geom = pixel_chain(rep, chain + path + tail, end_rep)
                _add_chain_edge(g, node_id, end_node, geom, attrs)

    # closed chains of degree-2 pixels with no node pixel
    remaining = on & ~visited & ~node_px
    while remaining.any():
        start = tuple(np.argwhere(remaining)[0])
        anchor = g.add_node(world(start))
        path = [start]
        visited[start] = True
        prev, cur = None, start
        while True:
            nxt = None
            for nb in neighbours(*cur):
                if nb != prev and not visited[nb]:
                    nxt = nb
                    break
            if nxt is None:
                break
            visited[nxt] = True
            path.append(nxt)
            prev, cur = cur, nxt
        geom = np.array([world(p) for p in path + [start]])
        if len(path) >= 3:
            g.add_edge(anchor, anchor, geom, attrs)
        else:
            g.remove_node(anchor)
        remaining = on & ~visited & ~node_px

    # skeleton components too small for an edge (isolated pixels, single
    # node clusters) stay as edge-less nodes so components map one to one
    return g


def _add_chain_edge(g, u, v, geom, attrs):
    keep = np.ones(len(geom), bool)
    keep[1:] = np.any(np.diff(geom, axis=0) != 0, axis=1)
    geom = geom[keep]
    if u == v and len(geom) < 4:
        return
    if len(geom) < 2:
        return
    g.add_edge(u, v, geom, attrs)
