"""Pipeline configuration: defaults, JSON loading and validation.

Keys are dotted (``"simplify.epsilon"``); JSON files may use either dotted
keys or nested objects.
"""

import json

from .exceptions import ConfigError

DEFAULTS = {
    "simplify.epsilon": 0.75,
    "dangle.min_length": 15.0,
    "loop.area_threshold": 300.0,
    "hough.r_min_px": 4,
    "hough.r_max_px": 60,
    "hough.support_min": 0.6,
    "junction.angle_tol_deg": 2.0,
    "junction.reach": 2,
    "junction.max_rounds": 5,
    "lane.width_min": 12.0,
    "lane.offset": "auto",
    "material.buffer": 2.0,
    "material.lulc_radius": 564.0,
    "material.barren_water_min": 0.5,
    "eval.buffer": 2.0,
    "eval.hausdorff_step": 0.5,
}

_INTS = {"hough.r_min_px", "hough.r_max_px", "junction.reach", "junction.max_rounds"}
_FRACTIONS = {"hough.support_min", "material.barren_water_min"}


def flatten(doc, prefix=""):
    out = {}
    for k, v in doc.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _check(key, value):
    if key == "lane.offset":
        if value == "auto":
            return value
        if isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0:
            return float(value)
        raise ConfigError(f"{key} must be 'auto' or a positive number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key} must be a number, got {value!r}")
    if key in _INTS:
        if int(value) != value or value < 1:
            raise ConfigError(f"{key} must be a positive integer, got {value!r}")
        return int(value)
    if key in _FRACTIONS and not 0.0 <= value <= 1.0:
        raise ConfigError(f"{key} must lie in [0, 1], got {value!r}")
    if key != "dangle.min_length" and value <= 0:
        raise ConfigError(f"{key} must be positive, got {value!r}")
    if value < 0:
        raise ConfigError(f"{key} must be >= 0, got {value!r}")
    return float(value)


def make_config(overrides=None):
    """Defaults updated with ``overrides`` (nested or dotted); unknown keys are errors."""
    cfg = dict(DEFAULTS)
    for key, value in flatten(overrides or {}).items():
        if key not in DEFAULTS:
            raise ConfigError(f"unknown configuration key {key!r}")
        cfg[key] = _check(key, value)
    if cfg["hough.r_min_px"] > cfg["hough.r_max_px"]:
        raise ConfigError("hough.r_min_px must not exceed hough.r_max_px")
    return cfg


def load_config(path=None, overrides=None):
    doc = {}
    if path:
        try:
            with open(path, encoding="utf-8") as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None
        if not isinstance(doc, dict):
            raise ConfigError(f"{path}: top level must be an object")
    doc = flatten(doc)
    doc.update(flatten(overrides or {}))
    return make_config(doc)


def estimator_params(cfg):
    """Map dotted config keys to estimator keyword names (``a.b`` -> ``a_b``)."""
    return {k.replace(".", "_"): v for k, v in cfg.items()}
