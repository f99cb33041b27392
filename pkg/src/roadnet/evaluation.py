"""Object-wise evaluation of a road network against ground truth using buffered overlap."""

import json
from dataclasses import asdict, dataclass, field

import numpy as np
import shapely
from shapely.strtree import STRtree

from .geom import HAUSDORFF_STEP, buffer_polyline, hausdorff_distance
from .validation import check_positive

COVERAGE_MIN = 0.5


@dataclass
class MatchResult:
    buffer_radius: float
    pred_status: dict = field(default_factory=dict)      # edge id -> "TP" | "FP"
    pred_coverage: dict = field(default_factory=dict)    # edge id -> covered fraction
    gt_status: dict = field(default_factory=dict)        # edge id -> "matched" | "FN"
    gt_coverage: dict = field(default_factory=dict)
    matches: dict = field(default_factory=dict)          # TP edge id -> GT edge id
    hausdorff: dict = field(default_factory=dict)        # TP edge id -> metres
    gt_length_km: float = 0.0

    @property
    def tp(self):
        return sum(1 for s in self.pred_status.values() if s == "TP")

    @property
    def fp(self):
        return sum(1 for s in self.pred_status.values() if s == "FP")

    @property
    def fn(self):
        return sum(1 for s in self.gt_status.values() if s == "FN")


@dataclass
class EvalReport:
    """Table-1 style summary; undefined ratios are ``None``."""

    gt_length: float
    precision: float
    recall: float
    f1: float
    avg_hausdorff: float
    buffer_radius: float
    tp: int = 0
    fp: int = 0
    fn: int = 0
    detail: list = field(default_factory=list)

    def to_json(self):
        return json.dumps(asdict(self), indent=2)

    def to_text(self):
        def fmt(v, unit=""):
            return "undef" if v is None else f"{v:.2f}{unit}"
        head = f"{'GT Length':>10} {'Precision':>10} {'Recall':>8} {'F1score':>8} {'Hausdorff distance':>19}"
        row = (f"{self.gt_length:>10.1f} {fmt(self.precision):>10} {fmt(self.recall):>8} "
               f"{fmt(self.f1):>8} {fmt(self.avg_hausdorff, 'm'):>19}")
        counts = f"TP={self.tp} FP={self.fp} FN={self.fn} buffer={self.buffer_radius:g} m"
        return "\n".join([head, row, counts]) + "\n"


def _buffers(g, radius):
    ids = sorted(g.edges)
    return ids, [buffer_polyline(g.edges[i].geometry, radius) for i in ids]


def _coverage(polys, others):
    """Covered fraction of each polygon by the union of ``others``."""
    if not others:
        return [0.0] * len(polys)
    tree = STRtree(others)
    out = []
    for p in polys:
        near = [others[i] for i in tree.query(p)]
        if not near:
            out.append(0.0)
            continue
        inter = p.intersection(shapely.union_all(near)).area
        out.append(min(1.0, inter / p.area))
    return out


def match_roads(pred, gt, buffer_radius=2.0, hausdorff_step=HAUSDORFF_STEP):
    """Buffer both networks and classify every predicted and reference edge.

    A predicted edge is a true positive when at least half of its buffer is
    covered by the union of reference buffers; otherwise a false positive.
    A reference edge is missed (false negative) when less than half of its
    buffer is covered by the union of predicted buffers. Each true positive
    is matched to the reference edge with the largest pairwise overlap
    (ties go to the lower id).
    """
    buffer_radius = check_positive(buffer_radius, "buffer_radius")
    m = MatchResult(buffer_radius=buffer_radius,
                    gt_length_km=sum(e.length for e in gt.edges.values()) / 1000.0)
    pred_ids, pred_buf = _buffers(pred, buffer_radius)
    gt_ids, gt_buf = _buffers(gt, buffer_radius)
    gt_tree = STRtree(gt_buf) if gt_buf else None
    for eid, cov in zip(pred_ids, _coverage(pred_buf, gt_buf)):
        m.pred_coverage[eid] = cov
        m.pred_status[eid] = "TP" if cov >= COVERAGE_MIN else "FP"
    for eid, cov in zip(gt_ids, _coverage(gt_buf, pred_buf)):
        m.gt_coverage[eid] = cov
        m.gt_status[eid] = "matched" if cov >= COVERAGE_MIN else "FN"
    for eid, poly in zip(pred_ids, pred_buf):
        if m.pred_status[eid] != "TP":
            continue
        best, best_area = None, -1.0
        for i in sorted(gt_tree.query(poly), key=lambda i: gt_ids[i]):
            area = poly.intersection(gt_buf[i]).area
            if area > best_area:
                best, best_area = gt_ids[i], area
        m.matches[eid] = best
        m.hausdorff[eid] = hausdorff_distance(pred.edges[eid].geometry, gt.edges[best].geometry,
                                              hausdorff_step)
    return m


def _ratio(a, b):
    return a / b if b > 0 else None


def compute_metrics(m):
    """Precision, recall, F1 and mean Hausdorff distance of the true positives."""
    tp, fp, fn = m.tp, m.fp, m.fn
    p = _ratio(tp, tp + fp)
    r = _ratio(tp, tp + fn)
    f1 = 2 * p * r / (p + r) if p is not None and r is not None and p + r > 0 else None
    hd = float(np.mean(list(m.hausdorff.values()))) if m.hausdorff else None
    detail = [{"edge": e, "status": s, "coverage": round(m.pred_coverage[e], 6),
               "match": m.matches.get(e), "hausdorff": m.hausdorff.get(e)}
              for e, s in sorted(m.pred_status.items())]
    return EvalReport(gt_length=m.gt_length_km, precision=p, recall=r, f1=f1, avg_hausdorff=hd,
                      buffer_radius=m.buffer_radius, tp=tp, fp=fp, fn=fn, detail=detail)


def evaluate(pred, gt, buffer_radius=2.0, hausdorff_step=HAUSDORFF_STEP):
    return compute_metrics(match_roads(pred, gt, buffer_radius, hausdorff_step))


def weighted_average(rows):
    """Length-weighted mean of ``(gt_length, precision, recall, f1, hausdorff)`` rows.

    Returns ``(precision, recall, f1, hausdorff)``.
    """
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 5 or len(arr) == 0:
        raise ValueError("rows must be a non-empty sequence of 5-tuples")
    w = arr[:, 0]
    if np.any(w <= 0) or not np.all(np.isfinite(arr)):
        raise ValueError("GT lengths must be positive and all values finite")
    avg = (w[:, None] * arr[:, 1:]).sum(axis=0) / w.sum()
    return tuple(float(v) for v in avg)
