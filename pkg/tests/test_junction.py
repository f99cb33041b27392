import math

import numpy as np
import pytest

from roadnet.junction import pair_angle, satisfies_through, smooth_all, smooth_junction, through_pair
from roadnet.netgraph import RoadGraph

from _scenes import distorted_t, graph_from_lines, random_graph


def star(bearings_deg, arm=30.0, centre=(0.0, 0.0), n_vertices=3):
    """Junction with straight arms; each arm carries ``n_vertices`` evenly spaced vertices."""
    g = RoadGraph()
    c = np.asarray(centre, float)
    node = g.add_node(c)
    for b in bearings_deg:
        u = np.array([math.cos(math.radians(b)), math.sin(math.radians(b))])
        pts = [c + u * arm * k / n_vertices for k in range(n_vertices + 1)]
        g.add_edge(node, g.add_node(pts[-1]), pts)
    return g, node


def departure_angles(g, node):
    """All pairwise first-segment angles at a node, by direct enumeration."""
    dirs = []
    for eid, at_start in g.edge_ends(node):
        geom = g.edges[eid].geometry
        d = geom[1] - geom[0] if at_start else geom[-2] - geom[-1]
        dirs.append(d / np.hypot(*d))
    return [math.degrees(math.acos(np.clip(a @ b, -1, 1)))
            for i, a in enumerate(dirs) for b in dirs[i + 1:]]


def scan_tls_direction(points):
    """Total-least-squares direction by a fine angle scan (independent of eigh)."""
    c = points.mean(axis=0)
    best, best_cost = None, np.inf
    for a in np.linspace(0, math.pi, 180001):
        n = np.array([-math.sin(a), math.cos(a)])
        cost = float((((points - c) @ n) ** 2).sum())
        if cost < best_cost:
            best, best_cost = a, cost
    return c, np.array([math.cos(best), math.sin(best)])


def incidence(g):
    return sorted((eid, e.u, e.v) for eid, e in g.edges.items())


def test_pair_angle():
    assert pair_angle(np.array([1.0, 0.0]), np.array([-1.0, 0.0])) == pytest.approx(180.0)
    assert pair_angle(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == pytest.approx(90.0)


def test_perfect_t_unchanged():
    g, node = star([0, 180, 90])
    before = {eid: e.geometry.copy() for eid, e in g.edges.items()}
    moved = smooth_junction(g, node)
    assert moved <= 1e-9
    for eid, geom in before.items():
        assert np.abs(g.edges[eid].geometry - geom).max() <= 1e-9
    assert node not in g.no_through


def test_distorted_t_aligned():
    g, node = star([0, 172, 90])
    start = g.nodes[node].copy()
    (a, b), _ = through_pair(g, node)
    involved = [g.nodes[node]]
    for eid, at_start in (a, b):
        geom = g.edges[eid].geometry
        involved += list(geom[1:3] if at_start else geom[-3:-1])
    c, d = scan_tls_direction(np.array(involved))
    smooth_junction(g, node)
    assert satisfies_through(g, node, 2.0)
    assert math.hypot(*(g.nodes[node] - start)) <= 1.5
    # the node and the collected vertices end on the least-squares line
    n = np.array([-d[1], d[0]])
    for eid, at_start in (a, b):
        geom = g.edges[eid].geometry
        for p in [g.nodes[node]] + list(geom[1:3] if at_start else geom[-3:-1]):
            assert abs((p - c) @ n) <= 1e-3


def test_degree_four_cross_picks_straighter_pair():
    g, node = star([0, 178, 85, 268])
    angles = {}
    ends = g.edge_ends(node)
    for i in range(4):
        for j in range(i + 1, 4):
            angles[(ends[i], ends[j])] = max(departure_angles(_pair_graph(g, node, ends[i], ends[j]), node))
    expected = max(angles, key=angles.get)
    (a, b), _ = through_pair(g, node)
    assert {a, b} == set(expected)
    others = [e for e in ends if e not in (a, b)]
    far = {e[0]: g.edges[e[0]].geometry[1:].copy() for e in others}
    smooth_junction(g, node)
    d = [g.edges[eid].geometry[1] - g.edges[eid].geometry[0] for eid, _ in (a, b)]
    assert 180.0 - pair_angle(d[0] / np.hypot(*d[0]), d[1] / np.hypot(*d[1])) <= 2.0
    for eid, _ in others:
        geom = g.edges[eid].geometry
        assert np.array_equal(geom[0], g.nodes[node])
        assert np.array_equal(geom[1:], far[eid])


def _pair_graph(g, node, e1, e2):
    h = g.copy()
    for eid in list(h.edges):
        if eid not in (e1[0], e2[0]):
            h.remove_edge(eid)
    return h


def test_no_through_road_flagged():
    g, node = star([0, 40, 80])
    before = {eid: e.geometry.copy() for eid, e in g.edges.items()}
    assert smooth_junction(g, node) == 0.0
    assert node in g.no_through
    for eid, geom in before.items():
        assert np.array_equal(g.edges[eid].geometry, geom)


def test_degree_two_node_untouched():
    g = graph_from_lines([[(0, 0), (10, 1), (20, 0)]])
    node = next(iter(g.nodes))
    assert smooth_junction(g, node) == 0.0


def test_max_step_caps_node_motion():
    g, node = star([0, 165, 95])
    start = g.nodes[node].copy()
    smooth_junction(g, node, max_step=0.05)
    assert math.hypot(*(g.nodes[node] - start)) <= 0.05 + 1e-12


# -- whole-graph smoothing ---------------------------------------------------

def test_smooth_all_single_t_equals_one_call():
    g, node = star([0, 172, 90])
    one = g.copy()
    smooth_junction(one, node)
    out = smooth_all(g)
    for eid, e in one.edges.items():
        assert np.allclose(out.edges[eid].geometry, e.geometry, atol=1e-3)
    # input is not mutated
    assert np.array_equal(g.nodes[node], (0.0, 0.0))


def test_smooth_all_two_adjacent_ts():
    # two Ts 6 m apart on one bent through road, stems on opposite sides
    lines = [[(-30, 0), (-20, 0.6), (-10, 1.2), (0, 0)],
             [(0, 0), (3, 0.2), (6, 0)],
             [(6, 0), (16, -1.3), (26, -0.5), (36, -2.5)],
             [(0, 0), (1, 10), (2, 20), (3, 30)],
             [(6, 0), (5, -10), (4, -20), (3, -30)]]
    g = graph_from_lines(lines)
    out = smooth_all(g, max_rounds=5)
    assert len(out.rounds) <= 5
    for n in [n for n in out.nodes if out.degree(n) == 3]:
        assert satisfies_through(out, n, 2.0) or n in out.no_through
    assert incidence(out) == incidence(g)


def test_smooth_all_junction_free_graph_unchanged():
    g = graph_from_lines([[(0, 0), (5, 3), (10, 0)], [(20, 0), (30, 0)]])
    out = smooth_all(g)
    for eid, e in g.edges.items():
        assert np.array_equal(out.edges[eid].geometry, e.geometry)
    assert out.rounds == [0.0]


def test_smooth_all_skip():
    g, node = star([0, 172, 90])
    out = smooth_all(g, skip=[node])
    assert np.array_equal(out.nodes[node], g.nodes[node])


@pytest.mark.parametrize("seed", range(20))
def test_distorted_t_post_condition_and_topology(seed):
    g, node = distorted_t(np.random.default_rng(seed))
    out = smooth_all(g, max_step=1.0)
    assert satisfies_through(out, node, 2.0) or node in out.no_through
    assert incidence(out) == incidence(g)
    assert max(out.rounds) <= 1.0 + 1e-12
    for n in out.nodes:
        for eid, at_start in out.edge_ends(n):
            assert np.array_equal(out.edges[eid].geometry[0 if at_start else -1], out.nodes[n])


@pytest.mark.parametrize("seed", range(10))
def test_topology_invariance_on_random_graphs(seed):
    g = random_graph(np.random.default_rng(seed))
    out = smooth_all(g)
    assert incidence(out) == incidence(g)
    assert set(out.nodes) == set(g.nodes)


@pytest.mark.parametrize("seed", range(20))
def test_displacement_non_increasing_over_rounds(seed):
    g, _ = distorted_t(np.random.default_rng(seed))
    rounds = smooth_all(g, max_step=0.2, max_rounds=10).rounds
    assert all(b <= a + 1e-9 for a, b in zip(rounds, rounds[1:]))
