"""T-junction reconstruction: make the straightest pair of arms at a junction collinear."""

import itertools
import math

import numpy as np

from .netgraph import junctions
from .simplify import tls_line

# arm vertices past a turn sharper than this belong to another road
ARM_TURN_MAX_DEG = 20.0
# a second arm pair this close to straight is a crossing road
CROSS_TOL_DEG = 20.0


def _arm_direction(geom):
    d = geom[1] - geom[0]
    return d / math.hypot(*d)


def pair_angle(d1, d2):
    """Angle in degrees between two departure directions (180 = anti-parallel)."""
    return math.degrees(math.acos(max(-1.0, min(1.0, float(np.dot(d1, d2))))))


def _departures(g, node):
    ends = g.edge_ends(node)
    return ends, {end: _arm_direction(g.edges[end[0]].geometry if end[1]
                                      else g.edges[end[0]].geometry[::-1]) for end in ends}


def _best_pair(ends, dirs):
    best, best_angle = None, -1.0
    for a, b in itertools.combinations(ends, 2):
        if a[0] == b[0]:
            continue
        ang = pair_angle(dirs[a], dirs[b])
        if ang > best_angle + 1e-12:
            best, best_angle = (a, b), ang
    return best, best_angle


def through_pair(g, node):
    """Incident edge-end pair whose first segments depart closest to anti-parallel.

    Returns ``((end_a, end_b), angle_deg)`` where each end is ``(edge_id, at_start)``.
    """
    return _best_pair(*_departures(g, node))


def _arm(geom, at_start, reach):
    """Vertices of one arm usable for the through line.

    Returns ``(indices, points, fixed)``: movable vertex indices, their
    coordinates and the far node if the arm ends within ``reach``. Walking
    stops before a vertex whose incoming segment turns more than
    ``ARM_TURN_MAX_DEG`` away from the chord from the junction to it.
    """
    n = len(geom)
    arm = geom if at_start else geom[::-1]
    idx, pts, fixed = [], [], None
    for k in range(1, reach + 1):
        if k > 1:
            chord = arm[k] - arm[0]
            if pair_angle(chord / math.hypot(*chord), _arm_direction(arm[k - 1:k + 1])) \
                    > ARM_TURN_MAX_DEG:
                break
        if k >= n - 1:
            fixed = arm[-1]
            break
        idx.append(k if at_start else n - 1 - k)
        pts.append(arm[k])
    return idx, pts, fixed


def _arm_chords(g, node, reach):
    ends, arms, dirs = [], {}, {}
    for end in g.edge_ends(node):
        idx, pts, fixed = _arm(g.edges[end[0]].geometry, end[1], reach)
        far = fixed if fixed is not None else pts[-1]
        d = far - g.nodes[node]
        norm = math.hypot(*d)
        if norm < 1e-12:  # short self-loop
            continue
        ends.append(end)
        arms[end] = (idx, pts, fixed)
        dirs[end] = d / norm
    return ends, arms, dirs


def _line_through(points, fixed):
    """Total-least-squares line, constrained through ``fixed`` points when given."""
    if len(fixed) >= 2:
        c = fixed[0]
        d = fixed[1] - fixed[0]
        return c, d / math.hypot(*d)
    if len(fixed) == 1:
        c = fixed[0]
        rel = np.vstack([points - c, [[0.0, 0.0]]])
        w, v = np.linalg.eigh(rel.T @ rel)
        return c, v[:, 1]
    return tls_line(points)


def smooth_junction(g, node, angle_tol=2.0, reach=2, max_step=None, min_through_angle=90.0):
    """Align the through-road at one junction, in place.

    The pair of arms closest to anti-parallel is selected, each arm's
    direction being the chord from the junction to its farthest usable
    vertex. First-segment bearings are unreliable here because skeleton
    junctions leave short kinks. The junction and up to ``reach`` vertices
    of each selected arm are projected onto one total-least-squares line
    through them. Vertices that are other nodes stay fixed and constrain the
    line instead. Collection along an arm stops at a turn (see :func:`_arm`).
    Other arms follow the junction with their terminal vertex only. When
    they form a near-straight pair (a crossing) or a single stem (a T), the
    junction slides along the through line to where their line meets it.
    ``max_step`` caps how far the junction may move; every projected vertex
    then moves proportionally.

    Returns the junction displacement in metres. Junctions without a pair
    at least ``min_through_angle`` apart are flagged in ``g.no_through``.
    """
    if g.degree(node) < 3:
        return 0.0
    ends, arms, dirs = _arm_chords(g, node, reach)
    pair, ang = _best_pair(ends, dirs)
    if pair is None or ang < min_through_angle:
        g.no_through.add(node)
        return 0.0
    g.no_through.discard(node)
    movable = [(None, 0)]
    points = [g.nodes[node]]
    fixed = []
    for eid, at_start in pair:
        idx, pts, far = arms[(eid, at_start)]
        movable.extend((eid, i) for i in idx)
        points.extend(pts)
        if far is not None:
            fixed.append(far)
    points = np.array(points)
    c, d = _line_through(points, fixed)
    target = c + ((points - c) @ d)[:, None] * d
    cross = _crossing(g, node, [e for e in ends if e not in pair], arms, dirs, c, d)
    if cross is not None:
        first = {}
        k = 1
        for end in pair:
            idx = arms[end][0]
            if idx:
                first[end] = target[k]
            k += len(idx)
        if _keeps_order(g, node, ends, arms, cross, first):
            target[0] = cross
    shift = target - points
    t = 1.0
    move = math.hypot(*shift[0])
    if max_step is not None and move > max_step:
        t = max_step / move
    for (eid, idx), s in zip(movable[1:], shift[1:]):
        g.edges[eid].geometry[idx] = g.edges[eid].geometry[idx] + t * s
    new_pos = g.nodes[node] + t * shift[0]
    g.move_node(node, new_pos)
    return t * move


def _stem_line(g, node, end, arm):
    """Line of a T stem: its longest usable segment, away from the junction kink."""
    _, pts, far = arm
    chain = [g.nodes[node]] + list(pts) + ([far] if far is not None else [])
    seg = max(range(len(chain) - 1), key=lambda i: math.hypot(*(chain[i + 1] - chain[i])))
    a, b = chain[seg], chain[seg + 1]
    return a, (b - a) / math.hypot(*(b - a))


def _crossing(g, node, rest, arms, dirs, c, d):
    """Where the other road meets the through line, if it can be told.

    The other road is a second near-straight arm pair (a crossing) or the
    single remaining arm (a T stem). Returns None when neither gives a line
    at least 30 degrees off the through line.
    """
    if len(rest) == 1:
        c2, d2 = _stem_line(g, node, rest[0], arms[rest[0]])
    else:
        pair, ang = _best_pair(rest, dirs)
        if pair is None or 180.0 - ang > CROSS_TOL_DEG:
            return None
        pts, fixed = [], []
        for end in pair:
            _, p, far = arms[end]
            pts.extend(p)
            if far is not None:
                fixed.append(far)
        if len(pts) + len(fixed) < 2:
            return None
        c2, d2 = _line_through(np.array(pts + fixed), fixed)
    den = d[0] * d2[1] - d[1] * d2[0]
    if abs(den) < math.sin(math.radians(30.0)):
        return None
    r = c2 - c
    t = (r[0] * d2[1] - r[1] * d2[0]) / den
    return c + t * d


def _keeps_order(g, node, ends, arms, target, moved):
    """True if moving the junction to ``target`` keeps every first segment pointing the
    same way and at least half as long (``moved`` maps arm ends to their new first vertex)."""
    here = g.nodes[node]
    for end in ends:
        geom = g.edges[end[0]].geometry
        nxt = geom[1] if end[1] else geom[-2]
        new_nxt = moved.get(end, nxt)
        old = nxt - here
        new = new_nxt - target
        if old @ new <= 0.5 * (old @ old):
            return False
    return True


def satisfies_through(g, node, angle_tol=2.0):
    pair, ang = through_pair(g, node)
    return pair is not None and 180.0 - ang <= angle_tol


def smooth_all(g, angle_tol=2.0, reach=2, max_rounds=5, max_step=None, tol=1e-3, skip=()):
    """Smooth every junction, lowest degree first, in repeated passes.

    Passes stop once no junction moves more than ``tol`` metres or after
    ``max_rounds``. Nodes in ``skip`` (junctions on traffic circles, whose
    arms are curved) are left alone. Returns a new graph; ``g.rounds`` holds
    the per-round maximum displacement.
    """
    g = g.copy()
    skip = set(skip)
    order = sorted((n for n in junctions(g) if n not in skip), key=lambda n: (g.degree(n), n))
    history = []
    for _ in range(max_rounds):
        moved = [smooth_junction(g, n, angle_tol, reach, max_step) for n in order]
        history.append(max(moved, default=0.0))
        if history[-1] <= tol:
            break
    g.rounds = history
    return g
