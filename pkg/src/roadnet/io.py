"""GeoJSON serialisation of road graphs.

Each edge is one ``LineString`` feature. Properties carry the edge id,
its attributes and the ids of its end nodes (``from`` / ``to``) so graphs
round-trip exactly; files without node ids are stitched by coordinates.
"""

import json

import numpy as np

from .exceptions import NetworkFormatError
from .netgraph import NODE_TOL, EdgeAttrs, RoadGraph


def network_to_geojson(g):
    features = []
    for eid in sorted(g.edges):
        e = g.edges[eid]
        a = e.attrs
        features.append({
            "type": "Feature",
            "id": eid,
            "geometry": {"type": "LineString",
                         "coordinates": [[float(x), float(y)] for x, y in e.geometry]},
            "properties": {
                "edge_id": eid,
                "from": e.u,
                "to": e.v,
                "material": a.material.value,
                "double_lane": bool(a.double_lane),
                "provenance": a.provenance.value,
                "mean_width": None if a.mean_width is None else float(a.mean_width),
            },
        })
    return {"type": "FeatureCollection", "features": features}


def write_network(g, path):
    """Write ``g`` as GeoJSON. Nodes without incident edges have no feature and are not written."""
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_geojson(g), fh, indent=1)
        fh.write("\n")


def _fail(msg, index=None):
    where = f"feature {index}: " if index is not None else ""
    raise NetworkFormatError(where + msg)


def network_from_geojson(doc):
    if not isinstance(doc, dict) or doc.get("type") != "FeatureCollection":
        _fail("top level must be a FeatureCollection")
    feats = doc.get("features")
    if not isinstance(feats, list):
        _fail("'features' must be a list")
    g = RoadGraph()
    by_coord = {}

    def node_for(xy, node_id):
        if node_id is not None:
            if node_id in g.nodes:
                if np.hypot(*(g.nodes[node_id] - xy)) > NODE_TOL:
                    raise NetworkFormatError(f"node {node_id} has inconsistent coordinates")
                return node_id
            return g.add_node(xy, node_id)
        key = (round(xy[0] / NODE_TOL), round(xy[1] / NODE_TOL))
        if key not in by_coord:
            by_coord[key] = g.add_node(xy, max(g.nodes, default=-1) + 1)
        return by_coord[key]

    pending = []
    for i, f in enumerate(feats):
        if not isinstance(f, dict) or f.get("type") != "Feature":
            _fail("not a GeoJSON Feature", i)
        geom = f.get("geometry") or {}
        if geom.get("type") != "LineString":
            _fail(f"geometry type {geom.get('type')!r} is not LineString", i)
        try:
            # positions may carry an altitude; only x, y are used
            coords = np.array([pos[:2] for pos in geom["coordinates"]], dtype=float)
        except (KeyError, TypeError, ValueError):
            _fail("coordinates are not numeric", i)
        if coords.ndim != 2 or coords.shape[1] != 2 or len(coords) < 2:
            _fail("LineString needs at least 2 positions of 2 or more numbers", i)
        props = f.get("properties") or {}
        pending.append((i, coords, props, f.get("id")))

    # nodes with explicit ids first, so coordinate-stitched nodes never collide with them
    for i, coords, props, _ in pending:
        for end, key in ((0, "from"), (-1, "to")):
            if props.get(key) is not None:
                node_for(coords[end], int(props[key]))
    for i, coords, props, fid in pending:
        u = node_for(coords[0], props.get("from"))
        v = node_for(coords[-1], props.get("to"))
        try:
            attrs = EdgeAttrs(double_lane=bool(props.get("double_lane", False)),
                              material=props.get("material", "unknown"),
                              mean_width=props.get("mean_width"),
                              provenance=props.get("provenance", "traced"))
        except ValueError as exc:
            _fail(str(exc), i)
        eid = props.get("edge_id", fid)
        try:
            g.add_edge(u, v, coords, attrs, edge_id=None if eid is None else int(eid))
        except Exception as exc:  # ParameterError from inconsistent geometry
            _fail(str(exc), i)
    return g


def read_network(path):
    """Parse a GeoJSON FeatureCollection of LineStrings into a :class:`RoadGraph`."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise NetworkFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno} "
                                 f"(offset {exc.pos}): {exc.msg}") from None
    except OSError as exc:
        raise NetworkFormatError(f"cannot read {path}: {exc}") from None
    return network_from_geojson(doc)


def graphs_equal(a, b, tol=1e-9):
    """Same node ids/positions, edge ids, incidence, geometry (within ``tol``) and attributes."""
    if set(a.nodes) != set(b.nodes) or set(a.edges) != set(b.edges):
        return False
    for n in a.nodes:
        if not np.allclose(a.nodes[n], b.nodes[n], atol=tol, rtol=0):
            return False
    for eid, ea in a.edges.items():
        eb = b.edges[eid]
        if (ea.u, ea.v) != (eb.u, eb.v) or ea.geometry.shape != eb.geometry.shape:
            return False
        if not np.allclose(ea.geometry, eb.geometry, atol=tol, rtol=0):
            return False
        if ea.attrs != eb.attrs:
            return False
    return True
