"""Exception hierarchy shared by all pipeline stages."""


class RoadNetError(Exception):
    """Base class for every error raised by :mod:`roadnet`."""


class ParameterError(RoadNetError, ValueError):
    """A numeric or structural parameter is outside its allowed range."""


class GeometryError(RoadNetError):
    """Invalid or degenerate geometry (bad rings, offset collapse, collinear fits)."""


class EmbeddingError(GeometryError):
    """Two distinct edges leave a node along the same direction."""


class RasterFormatError(RoadNetError):
    """Malformed pixel file, world file or legend."""


class NoDataError(RoadNetError):
    """A sampling window contains no pixels."""


class DimensionError(RoadNetError, ValueError):
    """Feature vector and model dimensions disagree."""


class NetworkFormatError(RoadNetError):
    """A GeoJSON network file cannot be parsed."""


class ConfigError(RoadNetError):
    """Unknown key or invalid value in a pipeline configuration."""


class StageError(RoadNetError):
    """Failure inside one reconstruction stage.

    The ``stage`` attribute names the step that failed.
    """

    def __init__(self, stage, cause):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
