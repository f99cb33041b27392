"""Command-line interface: ``roadnet {synth,reconstruct,classify,train-material,eval}``.

Exit codes: 0 success, 1 input error, 2 stage failure, 3 configuration error.
"""

import argparse
import logging
import os
import sys

from .config import load_config
from .evaluation import evaluate
from .exceptions import ConfigError, RoadNetError, StageError
from .io import read_network, write_network
from .material import (SvmModel, classify_network, read_samples, samples_from_graph, train_svm,
                       write_samples)
from .pipeline import run_reconstruct
from .raster import load_image, load_lulc, load_mask, write_image, write_lulc, write_mask
from .synth import run_synth

EXIT_OK, EXIT_INPUT, EXIT_STAGE, EXIT_CONFIG = 0, 1, 2, 3

logger = logging.getLogger("roadnet")


def _require(args, *names):
    missing = [f"--{n.replace('_', '-')}" for n in names if getattr(args, n) is None]
    if missing:
        raise FileNotFoundError(f"missing required option(s): {', '.join(missing)}")


def _config(args):
    overrides = {}
    if getattr(args, "buffer", None) is not None:
        overrides["eval.buffer"] = args.buffer
    return load_config(args.config, overrides)


def cmd_synth(args):
    _require(args, "out")
    os.makedirs(args.out, exist_ok=True)
    scene = run_synth(args.seed, size_px=args.size, circle_count=args.circles,
                      double_lane=args.double_lane, noise=args.noise, bands=args.bands)
    write_mask(scene.mask, os.path.join(args.out, "mask.png"))
    write_image(scene.image, os.path.join(args.out, "image.png"))
    write_lulc(scene.lulc, os.path.join(args.out, "lulc.png"),
               legend_path=os.path.join(args.out, "legend.json"))
    write_network(scene.gt, os.path.join(args.out, "gt.geojson"))
    write_samples(os.path.join(args.out, "samples.csv"),
                  samples_from_graph(scene.gt, scene.image))
    logger.info("scene %d written to %s (%d GT edges)", args.seed, args.out, len(scene.gt.edges))


def cmd_reconstruct(args):
    _require(args, "mask", "out")
    cfg = _config(args)
    mask = load_mask(args.mask, args.worldfile)
    g = run_reconstruct(mask, cfg)
    write_network(g, args.out)
    logger.info("%d nodes, %d edges -> %s", len(g.nodes), len(g.edges), args.out)


def cmd_classify(args):
    _require(args, "network", "image", "model", "out")
    cfg = _config(args)
    g = read_network(args.network)
    image = load_image(args.image, args.worldfile)
    lulc = load_lulc(args.lulc, legend_path=args.legend) if args.lulc else None
    model = SvmModel.load(args.model)
    out, labels = classify_network(g, image, model, lulc, cfg["material.buffer"],
                                   cfg["material.lulc_radius"], cfg["material.barren_water_min"])
    write_network(out, args.out)
    counts = {}
    for lab in labels.values():
        counts[lab.material.value] = counts.get(lab.material.value, 0) + 1
    logger.info("materials: %s", counts)


def cmd_train(args):
    _require(args, "out")
    if args.samples:
        rows = read_samples(args.samples)
    else:
        _require(args, "network", "image")
        cfg = _config(args)
        rows = samples_from_graph(read_network(args.network), load_image(args.image, args.worldfile),
                                  cfg["material.buffer"])
    model = train_svm([(f, lab) for _, lab, f in rows], C=args.C, iterations=1, seed=args.seed)
    model.save(args.out)
    logger.info("trained on %d samples (%s) -> %s", len(rows), model.band_config, args.out)


def cmd_eval(args):
    _require(args, "network", "gt")
    cfg = _config(args)
    report = evaluate(read_network(args.network), read_network(args.gt), cfg["eval.buffer"],
                      cfg["eval.hausdorff_step"])
    print(report.to_text())
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report.to_json() + "\n")


def build_parser():
    p = argparse.ArgumentParser(prog="roadnet", description="Vector road networks from segmentation masks.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="JSON configuration file")
        sp.add_argument("--out", help="output path")
        sp.add_argument("--verbose", "-v", action="store_true")
        return sp

    s = common(sub.add_parser("synth", help="generate a synthetic scene into a directory"))
    s.add_argument("--seed", type=int, default=42)
    s.add_argument("--size", type=int, default=768, help="raster side in pixels")
    s.add_argument("--circles", type=int, default=0, help="traffic circles")
    s.add_argument("--double-lane", action="store_true")
    s.add_argument("--noise", type=float, default=0.0, help="mask boundary noise, metres")
    s.add_argument("--bands", type=int, choices=(3, 4), default=3)
    s.set_defaults(func=cmd_synth)

    s = common(sub.add_parser("reconstruct", help="mask -> GeoJSON road network"))
    s.add_argument("--mask")
    s.add_argument("--worldfile")
    s.set_defaults(func=cmd_reconstruct)

    s = common(sub.add_parser("classify", help="label edge materials"))
    for name in ("--network", "--image", "--worldfile", "--lulc", "--legend", "--model"):
        s.add_argument(name)
    s.set_defaults(func=cmd_classify)

    s = common(sub.add_parser("train-material", help="train the processed/unprocessed SVM"))
    for name in ("--samples", "--network", "--image", "--worldfile"):
        s.add_argument(name)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--C", type=float, default=1.0)
    s.set_defaults(func=cmd_train)

    s = common(sub.add_parser("eval", help="compare a network with ground truth"))
    s.add_argument("--network", help="predicted network (GeoJSON)")
    s.add_argument("--gt", help="ground-truth network (GeoJSON)")
    s.add_argument("--buffer", type=float, help="matching buffer radius in metres (default 2.0)")
    s.set_defaults(func=cmd_eval)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_STAGE
    except (RoadNetError, OSError, ValueError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
