"""End-to-end reconstruction from a 3-class mask to a clean road graph."""

import logging

from sklearn.base import BaseEstimator, TransformerMixin

from . import denoise, junction, netgraph, simplify, skeleton
from .config import DEFAULTS, make_config
from .exceptions import RoadNetError, StageError
from .netgraph import LoopKind
from .raster import RasterMask

logger = logging.getLogger(__name__)

_RECON_KEYS = [k for k in DEFAULTS if k.split(".")[0] in
               ("simplify", "dangle", "loop", "hough", "junction", "lane")]


class RoadNetworkReconstructor(TransformerMixin, BaseEstimator):
    """Turn a road segmentation mask into a vector road graph.

    Stages: thinning, tracing, least-squares simplification, small-loop
    classification (noise vs. traffic circle) and collapse, dangle pruning,
    junction smoothing, circle reconstruction and double-lane duplication.
    The estimator is stateless; ``fit`` only validates parameters.

    Parameters mirror the dotted configuration keys with ``.`` replaced by
    ``_`` (``simplify.epsilon`` -> ``simplify_epsilon``).
    """

    def __init__(self, simplify_epsilon=0.75, dangle_min_length=15.0, loop_area_threshold=300.0,
                 hough_r_min_px=4, hough_r_max_px=60, hough_support_min=0.6,
                 junction_angle_tol_deg=2.0, junction_reach=2, junction_max_rounds=5,
                 lane_width_min=12.0, lane_offset="auto"):
        self.simplify_epsilon = simplify_epsilon
        self.dangle_min_length = dangle_min_length
        self.loop_area_threshold = loop_area_threshold
        self.hough_r_min_px = hough_r_min_px
        self.hough_r_max_px = hough_r_max_px
        self.hough_support_min = hough_support_min
        self.junction_angle_tol_deg = junction_angle_tol_deg
        self.junction_reach = junction_reach
        self.junction_max_rounds = junction_max_rounds
        self.lane_width_min = lane_width_min
        self.lane_offset = lane_offset

    @classmethod
    def from_config(cls, cfg):
        return cls(**{k.replace(".", "_"): cfg[k] for k in _RECON_KEYS})

    def _config(self):
        return make_config({k: getattr(self, k.replace(".", "_")) for k in _RECON_KEYS})

    def fit(self, X=None, y=None):
        self._config()
        return self

    def transform(self, mask):
        """Reconstruct the road graph of ``mask`` (a :class:`RasterMask`)."""
        if not isinstance(mask, RasterMask):
            raise TypeError(f"expected RasterMask, got {type(mask).__name__}")
        cfg = self._config()
        px = mask.transform.pixel_size

        def stage(name, fn, *args, **kw):
            try:
                return fn(*args, **kw)
            except RoadNetError as exc:
                raise StageError(name, exc) from exc

        skel = stage("thin", skeleton.thin, mask)
        g = stage("trace", skeleton.trace, skel)
        g = stage("simplify", simplify.simplify_graph, g, cfg["simplify.epsilon"])
        g = netgraph.dedupe_parallel_edges(g)
        loops = stage("classify_loops", denoise.classify_loops, g, mask, cfg["loop.area_threshold"],
                      cfg["hough.r_min_px"], cfg["hough.r_max_px"], cfg["hough.support_min"])
        g = stage("collapse_noise_loops", denoise.collapse_noise_loops, g, loops)
        g = stage("prune_dangles", netgraph.prune_dangles, g, cfg["dangle.min_length"])
        on_circles = {n for lp in loops if lp.kind == LoopKind.CIRCLE for n in lp.nodes}
        g = stage("contract", netgraph.contract_short_edges, g, denoise.width_sampler(mask),
                  keep=on_circles)
        g = stage("smooth", junction.smooth_all, g, cfg["junction.angle_tol_deg"],
                  cfg["junction.reach"], cfg["junction.max_rounds"], max_step=2.0 * px,
                  skip=on_circles)
        g = stage("replace_circles", denoise.replace_circle_loops, g, loops)
        g = stage("flag_double_lanes", denoise.flag_double_lanes, g, mask, cfg["lane.width_min"])
        offset = None if cfg["lane.offset"] == "auto" else cfg["lane.offset"]
        g = stage("duplicate_double_lanes", denoise.duplicate_double_lanes, g, offset)
        self.loops_ = loops
        return g


def run_reconstruct(mask, config=None):
    """Reconstruct ``mask`` with a dotted or nested configuration dict."""
    cfg = make_config(config)
    return RoadNetworkReconstructor.from_config(cfg).transform(mask)
