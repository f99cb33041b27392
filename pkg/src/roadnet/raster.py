"""Georeferenced rasters: masks, imagery and land cover, plus world-file I/O.

Pixel ``(row, col)`` covers the world-space parallelogram spanned from
``transform.pixel_to_world(col, row)``; pixel centres sit at ``+0.5``.
"""

import json
import os
from dataclasses import astuple, dataclass, field

import cv2
import numpy as np
import shapely
from PIL import Image
from scipy import ndimage

from .exceptions import ParameterError, RasterFormatError
from .geom import point_segment_distances
from .validation import check_label_array, check_positive

OTHER, INTERIOR, CONTOUR = 0, 1, 2
MASK_LABELS = (OTHER, INTERIOR, CONTOUR)


@dataclass(frozen=True)
class GeoTransform:
    """Affine pixel-to-world mapping anchored at the upper-left pixel corner."""

    origin_x: float
    origin_y: float
    pixel_width: float
    pixel_height: float
    row_rotation: float = 0.0
    col_rotation: float = 0.0

    def __post_init__(self):
        if self.pixel_width == 0 or self.pixel_height == 0:
            raise ParameterError("pixel_width and pixel_height must be non-zero")
        if abs(self.determinant) < 1e-15:
            raise ParameterError("degenerate geotransform (zero determinant)")

    @classmethod
    def north_up(cls, origin_x, origin_y, pixel_size):
        return cls(origin_x, origin_y, pixel_size, -pixel_size)

    @property
    def determinant(self):
        return self.pixel_width * self.pixel_height - self.row_rotation * self.col_rotation

    @property
    def pixel_size(self):
        """Mean ground sampling distance in metres."""
        return float(np.sqrt(abs(self.determinant)))

    def pixel_to_world(self, col, row):
        col = np.asarray(col, dtype=float)
        row = np.asarray(row, dtype=float)
        x = self.origin_x + col * self.pixel_width + row * self.row_rotation
        y = self.origin_y + col * self.col_rotation + row * self.pixel_height
        return x, y

    def world_to_pixel(self, x, y):
        """Continuous ``(col, row)`` coordinates of world points."""
        dx = np.asarray(x, dtype=float) - self.origin_x
        dy = np.asarray(y, dtype=float) - self.origin_y
        det = self.determinant
        col = (self.pixel_height * dx - self.row_rotation * dy) / det
        row = (-self.col_rotation * dx + self.pixel_width * dy) / det
        return col, row

    def centers(self, rows, cols):
        """World coordinates of the centres of pixels ``(rows, cols)``."""
        return self.pixel_to_world(np.asarray(cols) + 0.5, np.asarray(rows) + 0.5)

    def isclose(self, other, rel=1e-12):
        """Parameter-wise equality up to ``rel`` (world files store pixel centres,
        so a corner -> centre -> corner round trip can differ in the last bit)."""
        a = np.array(astuple(self))
        b = np.array(astuple(other))
        scale = np.maximum(np.abs(a), np.abs(b)).max()
        return bool(np.all(np.abs(a - b) <= rel * max(scale, 1.0)))

    def to_worldfile(self):
        cx, cy = self.pixel_to_world(0.5, 0.5)
        vals = [self.pixel_width, self.col_rotation, self.row_rotation, self.pixel_height,
                float(cx), float(cy)]
        return "".join(f"{v!r}\n" for v in vals)

    @classmethod
    def from_worldfile(cls, text):
        lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
        if len(lines) != 6:
            raise RasterFormatError(f"world file must have 6 lines, found {len(lines)}")
        try:
            a, d, b, e, c, f = (float(v) for v in lines)
        except ValueError as exc:
            raise RasterFormatError(f"world file value is not a number: {exc}") from None
        # world files reference the centre of the upper-left pixel
        try:
            return cls(c - 0.5 * a - 0.5 * b, f - 0.5 * d - 0.5 * e, a, e, b, d)
        except ParameterError as exc:
            raise RasterFormatError(str(exc)) from None


@dataclass
class RasterMask:
    """Three-class road mask: 0 = other, 1 = road interior, 2 = road contour."""

    labels: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        self.labels = check_label_array(self.labels, MASK_LABELS)

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    @property
    def interior(self):
        return self.labels == INTERIOR

    def __eq__(self, other):
        return (isinstance(other, RasterMask) and self.transform.isclose(other.transform)
                and np.array_equal(self.labels, other.labels))


@dataclass
class ImageRaster:
    """Multispectral image with 3 (RGB) or 4 (RGB-NIR) bands, shape ``(h, w, bands)``."""

    bands: np.ndarray
    transform: GeoTransform

    def __post_init__(self):
        arr = np.asarray(self.bands)
        if arr.ndim != 3 or arr.shape[2] not in (3, 4):
            raise ParameterError(f"image must have shape (h, w, 3|4), got {arr.shape}")
        self.bands = arr

    @property
    def height(self):
        return self.bands.shape[0]

    @property
    def width(self):
        return self.bands.shape[1]

    @property
    def band_count(self):
        return self.bands.shape[2]


@dataclass
class LulcRaster:
    """Land-use/land-cover label raster with its legend (id -> class name)."""

    labels: np.ndarray
    transform: GeoTransform
    legend: dict = field(default_factory=dict)

    def __post_init__(self):
        self.labels = np.asarray(self.labels)
        if self.labels.ndim != 2 or self.labels.size == 0:
            raise ParameterError("LULC labels must be a non-empty 2-D array")
        self.legend = {int(k): str(v) for k, v in self.legend.items()}
        if self.legend:
            unknown = set(np.unique(self.labels).tolist()) - set(self.legend)
            if unknown:
                raise ParameterError(f"LULC labels {sorted(unknown)} missing from legend")

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def ids_named(self, name):
        return [k for k, v in self.legend.items() if v == name]


def read_worldfile(path):
    if not os.path.exists(path):
        raise RasterFormatError(f"world file not found: {path}")
    with open(path, encoding="ascii") as fh:
        return GeoTransform.from_worldfile(fh.read())


def write_worldfile(transform, path):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(transform.to_worldfile())


def sidecar_worldfile(pixel_path):
    """Conventional world-file path for a pixel file (``.png`` -> ``.pgw`` etc.), or None."""
    root, ext = os.path.splitext(pixel_path)
    ext = ext.lstrip(".").lower()
    candidates = []
    if len(ext) >= 2:
        candidates.append(f"{root}.{ext[0]}{ext[-1]}w")
    candidates += [f"{root}.{ext}w", f"{root}.wld"]
    for c in candidates:
        if os.path.exists(c):
            return c
    return None


def _read_single_band(pixel_path):
    if not os.path.exists(pixel_path):
        raise RasterFormatError(f"pixel file not found: {pixel_path}")
    try:
        with Image.open(pixel_path) as im:
            if im.mode not in ("L", "P"):
                raise RasterFormatError(f"{pixel_path}: expected single-band 8-bit, got mode {im.mode}")
            return np.array(im, dtype=np.uint8)
    except OSError as exc:
        raise RasterFormatError(f"cannot read {pixel_path}: {exc}") from None


def load_mask(pixel_path, worldfile_path=None):
    """Read a 3-class mask from an 8-bit single-band PNG/PGM and its world file."""
    worldfile_path = worldfile_path or sidecar_worldfile(pixel_path)
    if worldfile_path is None:
        raise RasterFormatError(f"no world file given or found next to {pixel_path}")
    labels = _read_single_band(pixel_path)
    transform = read_worldfile(worldfile_path)
    bad = ~np.isin(labels, MASK_LABELS)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise RasterFormatError(f"{pixel_path}: label {labels[r, c]} at row {r}, col {c} is not 0, 1 or 2")
    return RasterMask(labels, transform)


def write_mask(mask, pixel_path, worldfile_path=None):
    Image.fromarray(mask.labels.astype(np.uint8), mode="L").save(pixel_path)
    write_worldfile(mask.transform, worldfile_path or _default_worldfile(pixel_path))


def _default_worldfile(pixel_path):
    root, ext = os.path.splitext(pixel_path)
    ext = ext.lstrip(".").lower() or "x"
    return f"{root}.{ext[0]}{ext[-1]}w"


def load_image(pixel_path, worldfile_path=None):
    """Read a 3- or 4-band 8/16-bit image (band order R, G, B[, NIR])."""
    worldfile_path = worldfile_path or sidecar_worldfile(pixel_path)
    if worldfile_path is None:
        raise RasterFormatError(f"no world file given or found next to {pixel_path}")
    if not os.path.exists(pixel_path):
        raise RasterFormatError(f"pixel file not found: {pixel_path}")
    arr = cv2.imread(pixel_path, cv2.IMREAD_UNCHANGED)
    if arr is None:
        raise RasterFormatError(f"cannot decode image {pixel_path}")
    if arr.ndim != 3 or arr.shape[2] not in (3, 4):
        raise RasterFormatError(f"{pixel_path}: expected 3 or 4 bands, got shape {arr.shape}")
    # OpenCV stores BGR(A); the fourth channel carries NIR
    arr = arr[..., [2, 1, 0] + ([3] if arr.shape[2] == 4 else [])]
    return ImageRaster(arr, read_worldfile(worldfile_path))


def write_image(image, pixel_path, worldfile_path=None):
    arr = image.bands
    if arr.dtype not in (np.uint8, np.uint16):
        raise ParameterError(f"image dtype must be uint8 or uint16, got {arr.dtype}")
    arr = arr[..., [2, 1, 0] + ([3] if arr.shape[2] == 4 else [])]
    if not cv2.imwrite(pixel_path, np.ascontiguousarray(arr)):
        raise RasterFormatError(f"cannot write image {pixel_path}")
    write_worldfile(image.transform, worldfile_path or _default_worldfile(pixel_path))


def load_legend(path):
    """Read a LULC legend JSON (``{"id": "name"}``); ``barren`` and ``water`` are required."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise RasterFormatError(f"cannot read legend {path}: {exc}") from None
    try:
        legend = {int(k): str(v) for k, v in raw.items()}
    except (AttributeError, ValueError):
        raise RasterFormatError(f"{path}: legend must map integer ids to names") from None
    missing = {"barren", "water"} - set(legend.values())
    if missing:
        raise RasterFormatError(f"{path}: legend lacks required classes {sorted(missing)}")
    return legend


def load_lulc(pixel_path, worldfile_path=None, legend_path=None):
    worldfile_path = worldfile_path or sidecar_worldfile(pixel_path)
    if worldfile_path is None:
        raise RasterFormatError(f"no world file given or found next to {pixel_path}")
    labels = _read_single_band(pixel_path)
    legend = load_legend(legend_path) if legend_path else {}
    try:
        return LulcRaster(labels, read_worldfile(worldfile_path), legend)
    except ParameterError as exc:
        raise RasterFormatError(str(exc)) from None


def write_lulc(lulc, pixel_path, worldfile_path=None, legend_path=None):
    Image.fromarray(lulc.labels.astype(np.uint8), mode="L").save(pixel_path)
    write_worldfile(lulc.transform, worldfile_path or _default_worldfile(pixel_path))
    if legend_path:
        with open(legend_path, "w", encoding="utf-8") as fh:
            json.dump({str(k): v for k, v in sorted(lulc.legend.items())}, fh, indent=2)


def centerline_distance(lines, transform, shape, max_distance):
    """Distance from every pixel centre to the nearest of ``lines``.

    Only pixels within ``max_distance`` are evaluated exactly; all others
    are reported as ``inf``.
    """
    h, w = shape
    dist = np.full(shape, np.inf)
    pad = max_distance + transform.pixel_size
    for line in lines:
        line = np.asarray(line, dtype=float)
        for a, b in zip(line[:-1], line[1:]):
            x0, x1 = min(a[0], b[0]) - pad, max(a[0], b[0]) + pad
            y0, y1 = min(a[1], b[1]) - pad, max(a[1], b[1]) + pad
            cols, rows = transform.world_to_pixel([x0, x0, x1, x1], [y0, y1, y0, y1])
            c0 = max(int(np.floor(cols.min())) - 1, 0)
            c1 = min(int(np.ceil(cols.max())) + 1, w)
            r0 = max(int(np.floor(rows.min())) - 1, 0)
            r1 = min(int(np.ceil(rows.max())) + 1, h)
            if c0 >= c1 or r0 >= r1:
                continue
            rr, cc = np.mgrid[r0:r1, c0:c1]
            x, y = transform.centers(rr.ravel(), cc.ravel())
            d = point_segment_distances(np.column_stack([x, y]), a[None, :], b[None, :])[:, 0]
            win = dist[r0:r1, c0:c1]
            np.minimum(win, d.reshape(win.shape), out=win)
    return dist


def rasterize_network(network, transform, shape, road_width, contour_thickness=1):
    """Render a road network into a 3-class mask.

    Pixels whose centres lie within ``road_width / 2`` of any centreline are
    road; the outermost ``contour_thickness`` pixels of the road region (by
    8-neighbour erosion) are contour and the rest interior. The raster border
    is treated as road continuing outward, so roads leaving the extent get no
    contour along the cut.

    ``network`` is a :class:`~roadnet.netgraph.RoadGraph` or an iterable of
    polylines.
    """
    road_width = check_positive(road_width, "road_width")
    if contour_thickness < 0:
        raise ParameterError("contour_thickness must be >= 0")
    lines = [e.geometry for e in network.edges.values()] if hasattr(network, "edges") else list(network)
    h, w = shape
    if h <= 0 or w <= 0:
        raise ParameterError(f"raster shape must be positive, got {shape}")
    dist = centerline_distance(lines, transform, shape, road_width / 2.0)
    return RasterMask(classify_road_region(dist <= road_width / 2.0, contour_thickness), transform)


def classify_road_region(road, contour_thickness=1):
    """Label a boolean road region: its ``contour_thickness``-pixel rim is contour."""
    labels = np.zeros(road.shape, dtype=np.uint8)
    if contour_thickness == 0:
        labels[road] = INTERIOR
        return labels
    core = ndimage.binary_erosion(road, structure=np.ones((3, 3), bool),
                                  iterations=contour_thickness, border_value=1)
    labels[road] = CONTOUR
    labels[core] = INTERIOR
    return labels


def _pixel_window(raster):
    arr = getattr(raster, "labels", None)
    if arr is None:
        arr = raster.bands
    return arr


def sample_window(raster, polygon):
    """Values of all pixels whose centres fall inside ``polygon``.

    Returns an array of shape ``(n,)`` for label rasters or ``(n, bands)``
    for imagery; ``n == 0`` signals an empty sample.
    """
    arr = _pixel_window(raster)
    h, w = arr.shape[:2]
    t = raster.transform
    minx, miny, maxx, maxy = polygon.bounds
    cols, rows = t.world_to_pixel([minx, minx, maxx, maxx], [miny, maxy, miny, maxy])
    c0 = max(int(np.floor(cols.min() - 0.5)), 0)
    c1 = min(int(np.ceil(cols.max() + 0.5)), w)
    r0 = max(int(np.floor(rows.min() - 0.5)), 0)
    r1 = min(int(np.ceil(rows.max() + 0.5)), h)
    if c0 >= c1 or r0 >= r1:
        return arr[:0].reshape((0,) + arr.shape[2:])
    rr, cc = np.mgrid[r0:r1, c0:c1]
    rr, cc = rr.ravel(), cc.ravel()
    x, y = t.centers(rr, cc)
    inside = shapely.contains_xy(polygon, x, y)
    return arr[rr[inside], cc[inside]]
