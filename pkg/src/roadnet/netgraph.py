"""Road graph data model and structural queries.

A :class:`RoadGraph` is an undirected multigraph whose edges carry polyline
geometry. Self-loops and parallel edges are allowed; a self-loop counts 2
toward its node's degree.
"""

import copy
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import EmbeddingError, ParameterError
from .geom import polyline_length, signed_ring_area
from .validation import check_positive

NODE_TOL = 1e-6


class Material(str, Enum):
    UNKNOWN = "unknown"
    PROCESSED = "processed"
    GRAVEL = "gravel"
    SAND = "sand"


class Provenance(str, Enum):
    TRACED = "traced"
    COLLAPSED = "collapsed"
    CIRCLE = "circle"
    LANE_DUPLICATE = "lane_duplicate"


class LoopKind(str, Enum):
    UNDETERMINED = "undetermined"
    NOISE = "noise"
    CIRCLE = "circle"


@dataclass
class EdgeAttrs:
    double_lane: bool = False
    material: Material = Material.UNKNOWN
    mean_width: Optional[float] = None
    provenance: Provenance = Provenance.TRACED

    def __post_init__(self):
        self.material = Material(self.material)
        self.provenance = Provenance(self.provenance)


@dataclass
class Edge:
    u: int
    v: int
    geometry: np.ndarray
    attrs: EdgeAttrs = field(default_factory=EdgeAttrs)

    @property
    def length(self):
        return polyline_length(self.geometry)

    @property
    def is_loop(self):
        return self.u == self.v

    def other(self, node):
        return self.v if node == self.u else self.u

    def oriented_from(self, node):
        """Geometry starting at ``node`` (reversed if needed)."""
        return self.geometry if node == self.u else self.geometry[::-1]


@dataclass
class Loop:
    """A bounded face: a closed walk of ``(edge_id, forward)`` pairs."""

    edges: list
    nodes: list
    ring: np.ndarray
    area: float
    kind: LoopKind = LoopKind.UNDETERMINED
    circle: object = None

    @property
    def edge_ids(self):
        return {e for e, _ in self.edges}


class RoadGraph:
    """Nodes (id -> ``(x, y)``) and polyline edges (id -> :class:`Edge`)."""

    def __init__(self):
        self.nodes = {}
        self.edges = {}
        self.no_through = set()
        self._incident = {}
        self._next_node = 0
        self._next_edge = 0

    # construction ---------------------------------------------------------
    def add_node(self, xy, node_id=None):
        if node_id is None:
            node_id = self._next_node
        if node_id in self.nodes:
            raise ParameterError(f"node {node_id} already exists")
        self.nodes[node_id] = np.asarray(xy, dtype=float).copy()
        self._incident[node_id] = set()
        self._next_node = max(self._next_node, node_id + 1)
        return node_id

    def add_edge(self, u, v, geometry, attrs=None, edge_id=None):
        """Add an edge; geometry endpoints are snapped onto the node positions."""
        if u not in self.nodes or v not in self.nodes:
            raise ParameterError(f"edge endpoints {u}, {v} must be existing nodes")
        geom = np.array(geometry, dtype=float)
        if geom.ndim != 2 or geom.shape[0] < 2 or geom.shape[1] != 2:
            raise ParameterError(f"edge geometry must be (n>=2, 2), got {geom.shape}")
        for end, node in ((0, u), (-1, v)):
            if np.hypot(*(geom[end] - self.nodes[node])) > NODE_TOL:
                raise ParameterError(f"edge end {tuple(geom[end])} does not touch node {node}")
            geom[end] = self.nodes[node]
        keep = np.ones(len(geom), bool)
        keep[1:] = np.any(np.diff(geom, axis=0) != 0, axis=1)
        if u == v:
            keep[-1] = True
        geom = geom[keep]
        if len(geom) < 2 or polyline_length(geom) == 0:
            raise ParameterError("zero-length edge")
        if edge_id is None:
            edge_id = self._next_edge
        if edge_id in self.edges:
            raise ParameterError(f"edge {edge_id} already exists")
        self.edges[edge_id] = Edge(u, v, geom, copy.copy(attrs) if attrs else EdgeAttrs())
        self._incident[u].add(edge_id)
        self._incident[v].add(edge_id)
        self._next_edge = max(self._next_edge, edge_id + 1)
        return edge_id

    def remove_edge(self, edge_id):
        e = self.edges.pop(edge_id)
        self._incident[e.u].discard(edge_id)
        self._incident[e.v].discard(edge_id)
        return e

    def remove_node(self, node):
        for eid in list(self._incident[node]):
            self.remove_edge(eid)
        del self.nodes[node]
        del self._incident[node]
        self.no_through.discard(node)

    def remove_orphans(self):
        for n in [n for n, inc in self._incident.items() if not inc]:
            self.remove_node(n)

    def move_node(self, node, xy):
        """Move a node and drag the terminal vertex of every incident edge along."""
        xy = np.asarray(xy, dtype=float)
        self.nodes[node] = xy.copy()
        for eid in self._incident[node]:
            e = self.edges[eid]
            if e.u == node:
                e.geometry[0] = xy
            if e.v == node:
                e.geometry[-1] = xy

    def copy(self):
        g = RoadGraph()
        g.nodes = {k: v.copy() for k, v in self.nodes.items()}
        g.edges = {k: Edge(e.u, e.v, e.geometry.copy(), copy.copy(e.attrs)) for k, e in self.edges.items()}
        g.no_through = set(self.no_through)
        g._incident = {k: set(v) for k, v in self._incident.items()}
        g._next_node = self._next_node
        g._next_edge = self._next_edge
        return g

    # queries --------------------------------------------------------------
    def incident(self, node):
        return set(self._incident[node])

    def degree(self, node):
        return sum(2 if self.edges[e].is_loop else 1 for e in self._incident[node])

    def edge_ends(self, node):
        """``(edge_id, at_start)`` for every edge end at ``node``; self-loops appear twice."""
        ends = []
        for eid in sorted(self._incident[node]):
            e = self.edges[eid]
            if e.u == node:
                ends.append((eid, True))
            if e.v == node:
                ends.append((eid, False))
        return ends

    def total_length(self):
        return sum(e.length for e in self.edges.values())

    def components(self):
        """Connected components as lists of node ids."""
        seen, comps = set(), []
        for start in self.nodes:
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                n = stack.pop()
                comp.append(n)
                for eid in self._incident[n]:
                    m = self.edges[eid].other(n)
                    if m not in seen:
                        seen.add(m)
                        stack.append(m)
            comps.append(comp)
        return comps

    def __len__(self):
        return len(self.edges)

    def __repr__(self):
        return f"RoadGraph(nodes={len(self.nodes)}, edges={len(self.edges)})"


def junctions(g):
    """Ids of nodes where three or more roads meet (degree >= 3)."""
    return sorted(n for n in g.nodes if g.degree(n) >= 3)


def merge_degree_two(g):
    """Fuse edge chains through nodes of degree exactly 2, in place.

    The merged edge keeps the attributes of the longer of the two parts.
    Pure cycles keep one anchor node and become a single self-loop.
    """
    changed = True
    while changed:
        changed = False
        for n in list(g.nodes):
            if n not in g.nodes:
                continue
            inc = g.incident(n)
            if len(inc) != 2:
                continue
            e1, e2 = (g.edges[i] for i in sorted(inc))
            if e1.is_loop or e2.is_loop:
                continue
            a, b = e1.other(n), e2.other(n)
            if a == n or b == n:
                continue
            g1 = e1.oriented_from(a)
            g2 = e2.oriented_from(n)
            geom = np.vstack([g1, g2[1:]])
            attrs = e1.attrs if e1.length >= e2.length else e2.attrs
            for i in inc:
                g.remove_edge(i)
            del g.nodes[n]
            del g._incident[n]
            g.no_through.discard(n)
            if a == b and len(geom) < 3:
                continue
            g.add_edge(a, b, geom, attrs)
            changed = True
    return g


def merge_nodes(g, keep, drop):
    """Re-attach every edge of ``drop`` to ``keep`` and delete ``drop``, in place.

    Self-loops created by the merge that would be degenerate are dropped.
    """
    pos = g.nodes[keep]
    for eid in list(g.incident(drop)):
        e = g.remove_edge(eid)
        u = keep if e.u == drop else e.u
        v = keep if e.v == drop else e.v
        geom = e.geometry.copy()
        geom[0], geom[-1] = g.nodes[u] if u != keep else pos, g.nodes[v] if v != keep else pos
        if u == v and len(geom) < 4:
            continue
        g.add_edge(u, v, geom, e.attrs)
    g.remove_node(drop)


def contract_short_edges(g, max_length, keep=()):
    """Collapse junction-to-junction edges shorter than ``max_length``.

    Boundary noise splits one crossing into two nearby junctions; both are
    replaced by a node at their midpoint. ``max_length`` is a number or a
    function of the edge geometry (e.g. the local road width). Nodes in
    ``keep`` are never moved. Returns a new graph.
    """
    if callable(max_length):
        limit = max_length
    else:
        fixed = check_positive(max_length, "max_length", allow_zero=True)

        def limit(_):
            return fixed
    g = g.copy()
    keep = set(keep)
    while True:
        short = sorted((e.length, eid) for eid, e in g.edges.items()
                       if not e.is_loop and e.length < (limit(e.geometry) or 0.0)
                       and g.degree(e.u) >= 3 and g.degree(e.v) >= 3
                       and e.u not in keep and e.v not in keep)
        if not short:
            break
        e = g.remove_edge(short[0][1])
        g.move_node(e.u, (g.nodes[e.u] + g.nodes[e.v]) / 2.0)
        merge_nodes(g, e.u, e.v)
        g.no_through.discard(e.v)
    return g


def prune_dangles(g, min_length=15.0, merge=True):
    """Remove short dangling edges and small isolated components.

    Repeatedly deletes edges shorter than ``min_length`` that have a degree-1
    endpoint, re-merging degree-2 chains after every pass so "edge" keeps
    meaning junction-to-junction. Connected components whose total length is
    below ``min_length`` are dropped as well. Returns a new graph.
    """
    min_length = check_positive(min_length, "min_length", allow_zero=True)
    g = g.copy()
    if merge:
        merge_degree_two(g)
    while True:
        doomed = [eid for eid, e in g.edges.items()
                  if e.length < min_length and not e.is_loop
                  and (g.degree(e.u) == 1 or g.degree(e.v) == 1)]
        for comp in g.components():
            comp_edges = {eid for n in comp for eid in g.incident(n)}
            if sum(g.edges[eid].length for eid in comp_edges) < min_length:
                doomed.extend(comp_edges)
        if not doomed:
            break
        for eid in set(doomed):
            g.remove_edge(eid)
        g.remove_orphans()
        if merge:
            merge_degree_two(g)
    g.remove_orphans()
    return g


def dedupe_parallel_edges(g, tol=1e-9):
    """Drop edges whose geometry coincides with another edge between the same nodes."""
    g = g.copy()
    seen = {}
    for eid in sorted(g.edges):
        e = g.edges[eid]
        key = (min(e.u, e.v), max(e.u, e.v))
        geom = e.geometry if e.u <= e.v else e.geometry[::-1]
        dup = False
        for other in seen.get(key, []):
            if len(other) == len(geom) and np.allclose(other, geom, atol=tol, rtol=0):
                dup = True
                break
        if dup:
            g.remove_edge(eid)
        else:
            seen.setdefault(key, []).append(geom)
    return g


def departure_angle(g, eid, at_start):
    """Bearing (radians, CCW from +x) in which an edge leaves its node."""
    geom = g.edges[eid].geometry
    if not at_start:
        geom = geom[::-1]
    d = geom[1] - geom[0]
    return math.atan2(d[1], d[0])


def _rotation(g, node):
    """Outgoing half-edges at ``node`` sorted counter-clockwise by departure angle."""
    ends = [(departure_angle(g, eid, s), eid, s) for eid, s in g.edge_ends(node)]
    ends.sort()
    for (a1, e1, s1), (a2, e2, s2) in zip(ends, ends[1:]):
        if abs(a2 - a1) < 1e-12:
            raise EmbeddingError(f"edges {e1} and {e2} leave node {node} in the same direction")
    return [(eid, s) for _, eid, s in ends]


def enumerate_faces(g, min_area=1e-9):
    """Bounded faces of the planar embedding induced by edge geometry.

    Faces are walked by turning, at each node, to the next outgoing edge
    clockwise from the reversed arrival direction; bounded faces then come
    out counter-clockwise (positive signed area) and the outer face of each
    component comes out clockwise and is dropped.
    """
    rot = {n: _rotation(g, n) for n in g.nodes}
    pos = {n: {he: i for i, he in enumerate(r)} for n, r in rot.items()}
    visited = set()
    loops = []
    for eid in sorted(g.edges):
        for fwd in (True, False):
            if (eid, fwd) in visited:
                continue
            walk = []
            cur = (eid, fwd)
            while cur not in visited:
                visited.add(cur)
                walk.append(cur)
                e = g.edges[cur[0]]
                head = e.v if cur[1] else e.u
                # the twin half-edge departs head along this edge reversed
                twin = (cur[0], not cur[1])
                r = rot[head]
                i = pos[head][twin]
                cur = r[(i - 1) % len(r)]
            ring = [g.edges[e].geometry if f else g.edges[e].geometry[::-1] for e, f in walk]
            ring = np.vstack([ring[0]] + [p[1:] for p in ring[1:]])
            area = signed_ring_area(ring)
            if area > min_area:
                nodes = [g.edges[e].u if f else g.edges[e].v for e, f in walk]
                loops.append(Loop(edges=walk, nodes=nodes, ring=ring, area=area))
    return loops
