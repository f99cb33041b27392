"""Road network reconstruction from segmentation masks, surface material
classification and object-wise evaluation."""

from .config import DEFAULTS, load_config, make_config
from .evaluation import EvalReport, MatchResult, evaluate, match_roads, weighted_average
from .exceptions import (ConfigError, DimensionError, EmbeddingError, GeometryError,
                         NetworkFormatError, NoDataError, ParameterError, RasterFormatError,
                         RoadNetError, StageError)
from .io import graphs_equal, read_network, write_network
from .material import LinearSVM, MaterialClassifier, SvmModel, train_svm
from .netgraph import Material, Provenance, RoadGraph
from .pipeline import RoadNetworkReconstructor, run_reconstruct
from .raster import GeoTransform, ImageRaster, LulcRaster, RasterMask
from .synth import run_synth

__version__ = "0.1.0"

__all__ = [
    "DEFAULTS", "load_config", "make_config",
    "EvalReport", "MatchResult", "evaluate", "match_roads", "weighted_average",
    "ConfigError", "DimensionError", "EmbeddingError", "GeometryError", "NetworkFormatError",
    "NoDataError", "ParameterError", "RasterFormatError", "RoadNetError", "StageError",
    "graphs_equal", "read_network", "write_network",
    "LinearSVM", "MaterialClassifier", "SvmModel", "train_svm",
    "Material", "Provenance", "RoadGraph",
    "RoadNetworkReconstructor", "run_reconstruct",
    "GeoTransform", "ImageRaster", "LulcRaster", "RasterMask",
    "run_synth",
]
