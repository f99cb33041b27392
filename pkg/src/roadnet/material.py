"""Road surface material: processed vs. unprocessed with a linear SVM, then
gravel vs. sand from the surrounding land cover."""

import csv
import json
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import DimensionError, NetworkFormatError, NoDataError, ParameterError
from .geom import buffer_polyline, interpolate, polyline_length
from .netgraph import Material
from .raster import sample_window
from .validation import check_polyline, check_positive

logger = logging.getLogger(__name__)

PROCESSED, UNPROCESSED = "processed", "unprocessed"
BAND_CONFIGS = {3: "RGB", 4: "RGB-NIR"}
STATS = ("mean", "std", "p25", "p75")


def feature_dim(bands):
    """Feature length for a band count: 4 statistics per band, plus NDVI with NIR."""
    if bands not in BAND_CONFIGS:
        raise DimensionError(f"imagery must have 3 or 4 bands, got {bands}")
    return 4 * bands + (1 if bands == 4 else 0)


def feature_names(bands):
    names = [f"b{b}_{s}" for b in range(bands) for s in STATS]
    return names + (["ndvi_mean"] if bands == 4 else [])


def pixel_features(pixels):
    """Statistics of an ``(n, bands)`` pixel sample (independent of pixel order)."""
    px = np.asarray(pixels, dtype=float)
    if px.ndim != 2 or px.shape[0] == 0:
        raise NoDataError("empty pixel sample")
    bands = px.shape[1]
    feature_dim(bands)
    # sorted rows make the float sums independent of sampling order
    px = px[np.lexsort(px.T[::-1])]
    p25, p75 = np.percentile(px, [25, 75], axis=0)
    per_band = np.stack([px.mean(axis=0), px.std(axis=0), p25, p75], axis=1).ravel()
    if bands == 4:
        red, nir = px[:, 0], px[:, 3]
        den = nir + red
        ndvi = np.divide(nir - red, den, out=np.zeros_like(den), where=den != 0)
        per_band = np.append(per_band, ndvi.mean())
    return per_band


def extract_features(image, segment, buffer=2.0):
    """Radiometric features of the pixels within ``buffer`` metres of ``segment``.

    Raises
    ------
    NoDataError
        If no pixel centre falls inside the buffer.
    """
    line = check_polyline(segment, "segment")
    check_positive(buffer, "buffer")
    pixels = sample_window(image, buffer_polyline(line, buffer))
    if len(pixels) == 0:
        raise NoDataError("segment buffer covers no image pixels")
    return pixel_features(pixels)


def _labels_to_sign(y):
    y = np.asarray(y)
    if y.dtype.kind in "US":
        bad = set(np.unique(y)) - {PROCESSED, UNPROCESSED}
        if bad:
            raise ParameterError(f"unknown labels {sorted(bad)}")
        return np.where(y == PROCESSED, 1.0, -1.0)
    vals = set(np.unique(y).tolist())
    if not vals <= {-1, 1}:
        raise ParameterError(f"numeric labels must be +1/-1, got {sorted(vals)}")
    return y.astype(float)


def hinge_objective(w, b, X, y, C):
    """``0.5 |w|^2 + C * sum(max(0, 1 - y (w.x + b)))``."""
    margins = y * (X @ w + b)
    return 0.5 * float(w @ w) + C * float(np.maximum(0.0, 1.0 - margins).sum())


class LinearSVM(ClassifierMixin, BaseEstimator):
    """Soft-margin linear SVM trained by projected stochastic subgradient descent.

    Minimises ``0.5 |w|^2 + C sum hinge`` on z-scored features. Steps follow
    ``1 / (lambda t)`` with ``lambda = 1 / (C n)``; samples are visited in a
    seeded order and the returned solution is the running average of the
    iterates, which makes training bit-reproducible for a given seed.

    Parameters
    ----------
    C : float
        Hinge loss weight.
    epochs : int
        Passes over the training set.
    seed : int
        Seed of the sample order.

    Attributes
    ----------
    coef_, intercept_ : weights and bias in normalised feature space.
    mean_, scale_ : z-score statistics of the training features.
    objective_ : objective of the averaged iterate after every epoch.
    """

    def __init__(self, C=1.0, epochs=200, seed=0):
        self.C = C
        self.epochs = epochs
        self.seed = seed

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        if X.ndim != 2 or len(X) < 2:
            raise ParameterError("need at least 2 samples as a 2-D array")
        if not np.all(np.isfinite(X)):
            raise ParameterError("features must be finite")
        ys = _labels_to_sign(y)
        numeric = np.asarray(y).dtype.kind not in "US"
        if len(ys) != len(X):
            raise DimensionError(f"{len(X)} samples but {len(ys)} labels")
        if len(np.unique(ys)) < 2:
            raise ParameterError("training needs both classes")
        C = check_positive(self.C, "C")
        self.mean_ = X.mean(axis=0)
        scale = X.std(axis=0)
        self.scale_ = np.where(scale > 0, scale, 1.0)
        Z = (X - self.mean_) / self.scale_
        n, d = Z.shape
        lam = 1.0 / (C * n)
        # the optimum lies inside these bounds: |w|^2 / 2 <= f(0, 0) = C n
        w_max = np.sqrt(2.0 * C * n)
        b_max = w_max * np.sqrt((Z ** 2).sum(axis=1).max()) + 1.0
        rng = np.random.default_rng(self.seed)
        w, b = np.zeros(d), 0.0
        w_avg, b_avg = np.zeros(d), 0.0
        t = 0
        self.objective_ = []
        for _ in range(int(self.epochs)):
            for i in rng.permutation(n):
                t += 1
                eta = 1.0 / (lam * t)
                violated = ys[i] * (Z[i] @ w + b) < 1.0
                w *= 1.0 - eta * lam
                if violated:
                    w += eta * ys[i] * Z[i]
                    b += eta * ys[i]
                norm = np.sqrt(w @ w)
                if norm > w_max:
                    w *= w_max / norm
                b = float(np.clip(b, -b_max, b_max))
                w_avg += (w - w_avg) / t
                b_avg += (b - b_avg) / t
            self.objective_.append(hinge_objective(w_avg, b_avg, Z, ys, C))
        self.coef_ = w_avg
        self.intercept_ = float(b_avg)
        self.classes_ = np.array([-1, 1]) if numeric else np.array([UNPROCESSED, PROCESSED])
        self.n_iter_ = t
        return self

    def _check_dim(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if X.shape[1] != len(self.coef_):
            raise DimensionError(f"model expects {len(self.coef_)} features, got {X.shape[1]}")
        return X

    def decision_function(self, X):
        check_is_fitted(self, "coef_")
        X = self._check_dim(X)
        return ((X - self.mean_) / self.scale_) @ self.coef_ + self.intercept_

    def predict(self, X):
        # a zero margin counts as unprocessed (-1)
        return self.classes_[(self.decision_function(X) > 0).astype(int)]


@dataclass
class SvmModel:
    """A trained processed/unprocessed classifier in serialisable form."""

    weights: np.ndarray
    bias: float
    mean: np.ndarray
    scale: np.ndarray
    band_config: str
    C: float
    iterations: int
    seed: int
    epochs: int = 200

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        self.mean = np.asarray(self.mean, dtype=float)
        self.scale = np.asarray(self.scale, dtype=float)
        bands = {v: k for k, v in BAND_CONFIGS.items()}.get(self.band_config)
        if bands is None:
            raise ParameterError(f"unknown band_config {self.band_config!r}")
        dim = feature_dim(bands)
        for name in ("weights", "mean", "scale"):
            if getattr(self, name).shape != (dim,):
                raise DimensionError(f"{name} must have length {dim} for {self.band_config}")
        if np.any(self.scale <= 0):
            raise ParameterError("normalisation scale entries must be > 0")

    @classmethod
    def from_estimator(cls, est, iterations=1):
        return cls(est.coef_.copy(), est.intercept_, est.mean_.copy(), est.scale_.copy(),
                   _band_config(len(est.coef_)), est.C, iterations, est.seed, est.epochs)

    def margin(self, features):
        x = np.asarray(features, dtype=float)
        if x.shape != self.weights.shape:
            raise DimensionError(f"model ({self.band_config}) expects {len(self.weights)} "
                                 f"features, got {x.shape[-1] if x.ndim else 0}")
        return float(((x - self.mean) / self.scale) @ self.weights + self.bias)

    def to_dict(self):
        return {"weights": self.weights.tolist(), "bias": self.bias, "mean": self.mean.tolist(),
                "scale": self.scale.tolist(), "band_config": self.band_config, "C": self.C,
                "iterations": self.iterations, "seed": self.seed, "epochs": self.epochs}

    @classmethod
    def from_dict(cls, doc):
        try:
            return cls(**{k: doc[k] for k in ("weights", "bias", "mean", "scale", "band_config",
                                              "C", "iterations", "seed")},
                       epochs=doc.get("epochs", 200))
        except KeyError as exc:
            raise ParameterError(f"model file lacks field {exc}") from None

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        try:
            with open(path, encoding="utf-8") as fh:
                return cls.from_dict(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ParameterError(f"cannot read model {path}: {exc}") from None


def _band_config(dim):
    for bands, name in BAND_CONFIGS.items():
        if feature_dim(bands) == dim:
            return name
    raise DimensionError(f"no band configuration has {dim} features")


def train_svm(samples, C=1.0, iterations=1, seed=0, unlabeled=None, epochs=200):
    """Train the processed/unprocessed classifier.

    Parameters
    ----------
    samples : sequence of (features, label)
        Labels are ``"processed"``/``"unprocessed"`` or +1/-1.
    iterations : {1, 2}
        With 2, a second pass retrains on the labelled samples plus the
        ``unlabeled`` feature vectors the first model classifies with
        ``|margin| > 1``.

    Returns
    -------
    SvmModel
    """
    if iterations not in (1, 2):
        raise ParameterError(f"iterations must be 1 or 2, got {iterations}")
    if len(samples) < 2:
        raise ParameterError("need at least 2 samples")
    X = np.array([np.asarray(f, dtype=float) for f, _ in samples])
    y = _labels_to_sign([lab for _, lab in samples])
    _band_config(X.shape[1])
    est = LinearSVM(C=C, epochs=epochs, seed=seed).fit(X, y)
    if iterations == 2 and unlabeled is not None and len(unlabeled):
        U = est._check_dim(unlabeled)
        m = est.decision_function(U)
        sure = np.abs(m) > 1.0
        if sure.any():
            X2 = np.vstack([X, U[sure]])
            y2 = np.concatenate([y, np.sign(m[sure])])
            est = LinearSVM(C=C, epochs=epochs, seed=seed).fit(X2, y2)
    return SvmModel.from_estimator(est, iterations)


def classify_surface(model, features):
    """``("processed" | "unprocessed", margin)``; a zero margin is unprocessed."""
    m = model.margin(features)
    return (PROCESSED if m > 0 else UNPROCESSED), m


@dataclass
class MaterialLabel:
    material: Material
    margin: Optional[float] = None
    context_fraction: Optional[float] = None
    zero_confidence: bool = False


def refine_unprocessed(segment, lulc, radius=564.0, barren_water_min=0.5):
    """Gravel or sand from the barren + water share of LULC pixels near the segment.

    Pixels whose centres lie within ``radius`` of the segment midpoint are
    counted. Without any such pixel the result is gravel with
    ``zero_confidence`` set.
    """
    line = check_polyline(segment, "segment")
    check_positive(radius, "radius")
    ids = lulc.ids_named("barren") + lulc.ids_named("water")
    if not lulc.ids_named("barren") or not lulc.ids_named("water"):
        raise ParameterError("LULC legend must name both 'barren' and 'water'")
    mid = interpolate(line, polyline_length(line) / 2.0)
    t = lulc.transform
    col, row = t.world_to_pixel(mid[0], mid[1])
    reach = radius / t.pixel_size + 1
    r0, r1 = max(int(row - reach), 0), min(int(row + reach) + 1, lulc.height)
    c0, c1 = max(int(col - reach), 0), min(int(col + reach) + 1, lulc.width)
    if r0 >= r1 or c0 >= c1:
        return MaterialLabel(Material.GRAVEL, context_fraction=0.0, zero_confidence=True)
    rr, cc = np.mgrid[r0:r1, c0:c1]
    x, y = t.centers(rr, cc)
    inside = np.hypot(x - mid[0], y - mid[1]) <= radius
    window = lulc.labels[r0:r1, c0:c1][inside]
    if window.size == 0:
        return MaterialLabel(Material.GRAVEL, context_fraction=0.0, zero_confidence=True)
    frac = float(np.isin(window, ids).mean())
    material = Material.SAND if frac >= barren_water_min else Material.GRAVEL
    return MaterialLabel(material, context_fraction=frac)


def classify_network(g, image, model, lulc=None, buffer=2.0, radius=564.0, barren_water_min=0.5):
    """Label every edge of ``g``; returns ``(new_graph, {edge_id: MaterialLabel})``.

    Edges whose buffer covers no imagery keep ``unknown``. Only edges the
    SVM calls unprocessed are refined with LULC; without LULC they are
    reported as gravel with ``zero_confidence``.
    """
    out = g.copy()
    labels = {}
    for eid in sorted(out.edges):
        e = out.edges[eid]
        try:
            feats = extract_features(image, e.geometry, buffer)
        except NoDataError:
            logger.warning("edge %d: no imagery under its buffer; material left unknown", eid)
            continue
        surface, margin = classify_surface(model, feats)
        if surface == PROCESSED:
            lab = MaterialLabel(Material.PROCESSED, margin=margin)
        elif lulc is None:
            lab = MaterialLabel(Material.GRAVEL, margin=margin, zero_confidence=True)
        else:
            lab = refine_unprocessed(e.geometry, lulc, radius, barren_water_min)
            lab.margin = margin
        e.attrs.material = lab.material
        labels[eid] = lab
    return out, labels


def write_samples(path, rows):
    """Write ``(segment_id, label, features)`` rows as CSV."""
    rows = list(rows)
    dim = len(rows[0][2]) if rows else 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["segment_id", "label"] + [f"f{i}" for i in range(dim)])
        for sid, label, feats in rows:
            w.writerow([sid, label] + [repr(float(v)) for v in feats])


def read_samples(path):
    """Read a training CSV; returns a list of ``(segment_id, label, features)``."""
    rows = []
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            if not header or header[:2] != ["segment_id", "label"]:
                raise NetworkFormatError(f"{path}: header must start with segment_id,label")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != len(header):
                    raise NetworkFormatError(f"{path}:{lineno}: expected {len(header)} fields")
                if rec[1] not in (PROCESSED, UNPROCESSED):
                    raise NetworkFormatError(f"{path}:{lineno}: bad label {rec[1]!r}")
                try:
                    feats = np.array([float(v) for v in rec[2:]])
                except ValueError:
                    raise NetworkFormatError(f"{path}:{lineno}: non-numeric feature") from None
                rows.append((rec[0], rec[1], feats))
    except OSError as exc:
        raise NetworkFormatError(f"cannot read {path}: {exc}") from None
    return rows


def samples_from_graph(g, image, buffer=2.0):
    """Training rows from a graph whose edges carry known materials (gravel/sand -> unprocessed)."""
    rows = []
    for eid in sorted(g.edges):
        mat = g.edges[eid].attrs.material
        if mat == Material.UNKNOWN:
            continue
        try:
            feats = extract_features(image, g.edges[eid].geometry, buffer)
        except NoDataError:
            continue
        rows.append((eid, PROCESSED if mat == Material.PROCESSED else UNPROCESSED, feats))
    return rows


class MaterialClassifier(BaseEstimator):
    """Estimator front-end for the two-stage material labelling.

    ``fit(X, y)`` trains the SVM on feature rows; ``transform`` labels a
    graph given its imagery and optional LULC raster.
    """

    def __init__(self, C=1.0, iterations=1, seed=0, epochs=200, buffer=2.0,
                 lulc_radius=564.0, barren_water_min=0.5):
        self.C = C
        self.iterations = iterations
        self.seed = seed
        self.epochs = epochs
        self.buffer = buffer
        self.lulc_radius = lulc_radius
        self.barren_water_min = barren_water_min

    def fit(self, X, y, X_unlabeled=None):
        self.model_ = train_svm(list(zip(X, y)), self.C, self.iterations, self.seed,
                                X_unlabeled, self.epochs)
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        return np.array([classify_surface(self.model_, x)[0] for x in np.atleast_2d(X)])

    def transform(self, g, image, lulc=None):
        check_is_fitted(self, "model_")
        out, self.labels_ = classify_network(g, image, self.model_, lulc, self.buffer,
                                             self.lulc_radius, self.barren_water_min)
        return out
