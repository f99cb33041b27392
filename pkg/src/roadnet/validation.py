"""Input validation helpers used at public entry points."""

import numbers

import numpy as np

from .exceptions import ParameterError


def check_positive(value, name, allow_zero=False):
    """Return ``value`` as float, raising :class:`ParameterError` unless it is > 0 (or >= 0)."""
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ParameterError(f"{name} must be a finite number, got {value!r}")
    if value < 0 or (value == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise ParameterError(f"{name} must be {bound}, got {value!r}")
    return float(value)


def check_points(points, name="points", min_points=1):
    """Coerce to a finite ``(n, 2)`` float array with at least ``min_points`` rows."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ParameterError(f"{name} must have shape (n, 2), got {arr.shape}")
    if arr.shape[0] < min_points:
        raise ParameterError(f"{name} needs at least {min_points} points, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite coordinates")
    return arr


def check_polyline(points, name="polyline"):
    """Validate a polyline: >= 2 vertices, finite, with positive length.

    Consecutive duplicate vertices are dropped rather than rejected, since
    traced and merged geometries routinely produce them.
    """
    arr = check_points(points, name, min_points=2)
    keep = np.ones(len(arr), dtype=bool)
    keep[1:] = np.any(np.diff(arr, axis=0) != 0.0, axis=1)
    arr = arr[keep]
    if len(arr) < 2:
        raise ParameterError(f"{name} has zero length")
    return arr


def check_label_array(labels, allowed, name="labels"):
    """Raise if ``labels`` holds any value outside ``allowed``; return it as uint8."""
    arr = np.asarray(labels)
    if arr.ndim != 2 or arr.size == 0:
        raise ParameterError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    bad = ~np.isin(arr, list(allowed))
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ParameterError(f"{name} value {arr[r, c]} at row {r}, col {c} not in {sorted(allowed)}")
    return arr.astype(np.uint8, copy=False)
