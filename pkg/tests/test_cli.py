import json

import pytest

from roadnet.cli import EXIT_CONFIG, EXIT_INPUT, EXIT_OK, EXIT_STAGE, main
from roadnet.exceptions import GeometryError
from roadnet.io import read_network
from roadnet.material import SvmModel


@pytest.fixture(scope="module")
def scene(tmp_path_factory):
    d = tmp_path_factory.mktemp("scene")
    assert main(["synth", "--seed", "4", "--noise", "0.3", "--circles", "1", "--out", str(d)]) == EXIT_OK
    return d


def test_synth_writes_all_products(scene):
    for name in ("mask.png", "mask.pgw", "image.png", "lulc.png", "legend.json", "gt.geojson",
                 "samples.csv"):
        assert (scene / name).exists(), name


def test_reconstruct_then_eval(scene, tmp_path, capsys):
    net = tmp_path / "net.geojson"
    assert main(["reconstruct", "--mask", str(scene / "mask.png"), "--out", str(net)]) == EXIT_OK
    assert len(read_network(str(net)).edges) > 0
    report = tmp_path / "report.json"
    assert main(["eval", "--network", str(net), "--gt", str(scene / "gt.geojson"),
                 "--out", str(report)]) == EXIT_OK
    text = capsys.readouterr().out
    assert "Precision" in text and "Hausdorff" in text
    doc = json.loads(report.read_text())
    assert doc["precision"] >= 0.9 and doc["recall"] >= 0.85 and doc["buffer_radius"] == 2.0
    assert main(["eval", "--network", str(net), "--gt", str(scene / "gt.geojson"),
                 "--buffer", "3", "--out", str(report)]) == EXIT_OK
    assert json.loads(report.read_text())["buffer_radius"] == 3.0


def test_train_and_classify(scene, tmp_path):
    model = tmp_path / "model.json"
    assert main(["train-material", "--samples", str(scene / "samples.csv"), "--out", str(model)]) == EXIT_OK
    assert SvmModel.load(str(model)).band_config == "RGB"
    out = tmp_path / "labelled.geojson"
    assert main(["classify", "--network", str(scene / "gt.geojson"), "--image", str(scene / "image.png"),
                 "--lulc", str(scene / "lulc.png"), "--legend", str(scene / "legend.json"),
                 "--model", str(model), "--out", str(out)]) == EXIT_OK
    mats = {e.attrs.material.value for e in read_network(str(out)).edges.values()}
    assert mats <= {"processed", "gravel", "sand", "unknown"} and "processed" in mats
    model2 = tmp_path / "model2.json"
    assert main(["train-material", "--network", str(scene / "gt.geojson"), "--image",
                 str(scene / "image.png"), "--out", str(model2)]) == EXIT_OK


def test_input_errors(tmp_path, scene):
    assert main(["reconstruct", "--mask", str(tmp_path / "none.png"), "--out", str(tmp_path / "o")]) == EXIT_INPUT
    assert main(["reconstruct", "--out", str(tmp_path / "o")]) == EXIT_INPUT
    (tmp_path / "bad.geojson").write_text("{")
    assert main(["eval", "--network", str(tmp_path / "bad.geojson"),
                 "--gt", str(scene / "gt.geojson")]) == EXIT_INPUT


def test_config_errors(tmp_path, scene):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"simplify": {"epsilon": -1}}))
    assert main(["reconstruct", "--mask", str(scene / "mask.png"), "--config", str(cfg),
                 "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert main(["eval", "--network", str(scene / "gt.geojson"), "--gt", str(scene / "gt.geojson"),
                 "--buffer", "0"]) == EXIT_CONFIG


def test_stage_failure_exit_code(tmp_path, scene, monkeypatch):
    from roadnet import junction

    def boom(*a, **k):
        raise GeometryError("synthetic failure")
    monkeypatch.setattr(junction, "smooth_all", boom)
    assert main(["reconstruct", "--mask", str(scene / "mask.png"), "--out", str(tmp_path / "o")]) == EXIT_STAGE
