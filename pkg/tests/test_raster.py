import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from PIL import Image
from shapely.geometry import Polygon, box

from roadnet.exceptions import ParameterError, RasterFormatError
from roadnet.raster import (CONTOUR, INTERIOR, OTHER, GeoTransform, ImageRaster, LulcRaster,
                            RasterMask, load_image, load_legend, load_lulc, load_mask,
                            rasterize_network, sample_window, write_image, write_lulc, write_mask)

from _scenes import point_in_polygon, polyline_distance

IDENTITY_WF = "1\n0\n0\n1\n0\n0\n"


def brute_force_mask(lines, t, shape, width, contour=1):
    """Per-pixel distance test; contour = road pixels with an 8-neighbour that is not road."""
    h, w = shape
    road = np.zeros(shape, bool)
    for r in range(h):
        for c in range(w):
            x, y = t.centers(r, c)
            road[r, c] = min(polyline_distance((x, y), np.asarray(ln, float)) for ln in lines) <= width / 2
    labels = np.zeros(shape, np.uint8)
    for r in range(h):
        for c in range(w):
            if not road[r, c]:
                continue
            edge = False
            for dr in (-1, 0, 1):
                for dc in (-1, 0, 1):
                    rr, cc = r + dr, c + dc
                    if 0 <= rr < h and 0 <= cc < w and not road[rr, cc]:
                        edge = True
            labels[r, c] = CONTOUR if (edge and contour) else INTERIOR
    return labels


# -- GeoTransform ------------------------------------------------------------

def test_worldfile_references_pixel_centre():
    t = GeoTransform.north_up(100.0, 200.0, 0.5)
    text = t.to_worldfile().split()
    assert float(text[4]) == 100.25 and float(text[5]) == 199.75
    assert GeoTransform.from_worldfile(t.to_worldfile()).isclose(t)


def test_world_pixel_round_trip():
    t = GeoTransform(10.0, 20.0, 0.5, -0.5, 0.01, -0.02)
    col, row = t.world_to_pixel(*t.pixel_to_world(np.array([3.5, 7.0]), np.array([1.25, 9.0])))
    assert np.allclose(col, [3.5, 7.0]) and np.allclose(row, [1.25, 9.0])


def test_degenerate_transform_rejected():
    with pytest.raises(ParameterError):
        GeoTransform(0, 0, 0.0, -1.0)


# -- file formats ------------------------------------------------------------

def test_load_mask_example(tmp_path):
    Image.fromarray(np.array([[0, 1], [2, 0]], np.uint8), mode="L").save(tmp_path / "m.png")
    (tmp_path / "m.pgw").write_text(IDENTITY_WF)
    m = load_mask(str(tmp_path / "m.png"))
    assert m.labels.tolist() == [[0, 1], [2, 0]]
    assert m.transform.pixel_width == 1.0


def test_load_mask_out_of_range(tmp_path):
    Image.fromarray(np.array([[0, 7]], np.uint8), mode="L").save(tmp_path / "m.png")
    (tmp_path / "m.pgw").write_text(IDENTITY_WF)
    with pytest.raises(RasterFormatError, match="7"):
        load_mask(str(tmp_path / "m.png"))


def test_load_mask_malformed_worldfile(tmp_path):
    Image.fromarray(np.zeros((2, 2), np.uint8), mode="L").save(tmp_path / "m.png")
    (tmp_path / "m.wld").write_text("1\n0\n0\n1\n0\n")
    with pytest.raises(RasterFormatError, match="6 lines"):
        load_mask(str(tmp_path / "m.png"), str(tmp_path / "m.wld"))


def test_load_mask_missing_worldfile(tmp_path):
    Image.fromarray(np.zeros((2, 2), np.uint8), mode="L").save(tmp_path / "m.png")
    with pytest.raises(RasterFormatError, match="world file"):
        load_mask(str(tmp_path / "m.png"))


def test_load_mask_pgm(tmp_path):
    Image.fromarray(np.array([[1, 2, 0]], np.uint8), mode="L").save(tmp_path / "m.pgm")
    (tmp_path / "m.pmw").write_text(IDENTITY_WF)
    assert load_mask(str(tmp_path / "m.pgm")).labels.tolist() == [[1, 2, 0]]


@given(arrays(np.uint8, st.tuples(st.integers(1, 12), st.integers(1, 12)), elements=st.integers(0, 2)),
       st.floats(0.1, 10), st.floats(-1e6, 1e6), st.floats(-1e6, 1e6))
def test_mask_round_trip(tmp_path_factory, labels, px, ox, oy):
    path = str(tmp_path_factory.mktemp("m") / "m.png")
    m = RasterMask(labels, GeoTransform.north_up(ox, oy, px))
    write_mask(m, path)
    assert load_mask(path) == m


@pytest.mark.parametrize("bands,dtype", [(3, np.uint8), (4, np.uint8), (3, np.uint16)])
def test_image_round_trip(tmp_path, bands, dtype):
    rng = np.random.default_rng(0)
    arr = rng.integers(0, np.iinfo(dtype).max, size=(5, 7, bands)).astype(dtype)
    img = ImageRaster(arr, GeoTransform.north_up(3.0, 9.0, 0.5))
    write_image(img, str(tmp_path / "i.png"))
    back = load_image(str(tmp_path / "i.png"))
    assert np.array_equal(back.bands, arr) and back.transform.isclose(img.transform)


def test_lulc_round_trip_and_legend(tmp_path):
    legend = {0: "urban", 1: "cropland", 2: "barren", 3: "water"}
    lulc = LulcRaster(np.array([[0, 1], [2, 3]]), GeoTransform.north_up(0, 2, 1), legend)
    write_lulc(lulc, str(tmp_path / "l.png"), legend_path=str(tmp_path / "legend.json"))
    back = load_lulc(str(tmp_path / "l.png"), legend_path=str(tmp_path / "legend.json"))
    assert back.legend == legend and np.array_equal(back.labels, lulc.labels)
    (tmp_path / "bad.json").write_text('{"0": "urban"}')
    with pytest.raises(RasterFormatError, match="barren"):
        load_legend(str(tmp_path / "bad.json"))


def test_lulc_unknown_label_rejected():
    with pytest.raises(ParameterError):
        LulcRaster(np.array([[0, 9]]), GeoTransform.north_up(0, 1, 1), {0: "barren", 1: "water"})


# -- rasterisation -----------------------------------------------------------

def test_rasterize_single_road_matches_pixel_oracle():
    t = GeoTransform.north_up(-5.0, 10.0, 0.5)
    shape = (40, 60)
    line = [(0.0, 0.0), (20.0, 0.0)]
    m = rasterize_network([line], t, shape, road_width=6.0, contour_thickness=1)
    ref = brute_force_mask([line], t, shape, 6.0)
    assert np.array_equal(m.labels, ref)
    # interior is the 40 x 12 px strip plus caps, minus the 1 px rim
    assert (m.labels == INTERIOR).sum() > 38 * 10


def test_rasterize_outside_extent_is_empty():
    t = GeoTransform.north_up(0.0, 10.0, 0.5)
    m = rasterize_network([[(500, 500), (600, 500)]], t, (20, 20), 6.0)
    assert np.all(m.labels == OTHER)


def test_rasterize_crossing_roads_union():
    t = GeoTransform.north_up(-15.0, 15.0, 0.5)
    shape = (60, 60)
    lines = [[(-12, 0), (12, 0)], [(0, -12), (0, 12)]]
    m = rasterize_network(lines, t, shape, 6.0)
    assert np.array_equal(m.labels, brute_force_mask(lines, t, shape, 6.0))
    # no contour strictly inside the union: every contour pixel touches non-road
    road = m.labels != OTHER
    padded = np.pad(road, 1, constant_values=True)
    for r, c in np.argwhere(m.labels == CONTOUR):
        assert not padded[r:r + 3, c:c + 3].all()


def test_rasterize_partition_and_contour_adjacency():
    rng = np.random.default_rng(5)
    t = GeoTransform.north_up(0.0, 40.0, 0.5)
    lines = [rng.uniform(0, 40, size=(3, 2)) for _ in range(4)]
    m = rasterize_network(lines, t, (80, 80), 5.0, contour_thickness=2)
    assert set(np.unique(m.labels)) <= {OTHER, INTERIOR, CONTOUR}
    interior = m.labels == INTERIOR
    padded = np.pad(~interior, 1, constant_values=False)
    for r, c in np.argwhere(m.labels == CONTOUR):
        assert padded[r:r + 3, c:c + 3].any()


def test_rasterize_bad_arguments():
    t = GeoTransform.north_up(0, 1, 1)
    with pytest.raises(ParameterError):
        rasterize_network([[(0, 0), (1, 0)]], t, (4, 4), 0.0)
    with pytest.raises(ParameterError):
        rasterize_network([[(0, 0), (1, 0)]], t, (4, 4), 2.0, contour_thickness=-1)


# -- sampling ----------------------------------------------------------------

def test_sample_window_single_pixel():
    t = GeoTransform.north_up(0.0, 10.0, 1.0)
    lab = np.arange(100, dtype=np.uint8).reshape(10, 10) % 3
    m = RasterMask(lab, t)
    # pixel (row 2, col 3) has centre (3.5, 7.5)
    got = sample_window(m, box(3.4, 7.4, 3.6, 7.6))
    assert got.tolist() == [lab[2, 3]]


def test_sample_window_outside_and_block():
    t = GeoTransform.north_up(0.0, 20.0, 1.0)
    img = ImageRaster(np.zeros((20, 20, 3), np.uint8), t)
    assert sample_window(img, box(100, 100, 110, 110)).shape == (0, 3)
    assert len(sample_window(img, box(5, 5, 15, 15))) == 100


def test_sample_window_matches_point_in_polygon():
    rng = np.random.default_rng(11)
    t = GeoTransform.north_up(0.0, 30.0, 0.75)
    lab = rng.integers(0, 3, size=(40, 40)).astype(np.uint8)
    m = RasterMask(lab, t)
    for _ in range(10):
        ring = rng.uniform(0, 30, size=(6, 2))
        centre = ring.mean(axis=0)
        ring = ring[np.argsort(np.arctan2(*(ring - centre).T[::-1]))]
        poly = Polygon(ring)
        got = sample_window(m, poly)
        ref = [lab[r, c] for r in range(40) for c in range(40)
               if point_in_polygon(*t.centers(r, c), ring)]
        assert sorted(got.tolist()) == sorted(ref)
