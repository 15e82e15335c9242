import math

import numpy as np

from .exceptions import InvalidParameterError, ScaleWindowError


def check_points(points, dim=None, name="points"):
    """Return ``points`` as a C-contiguous float64 array of shape (n, dim)."""
    arr = np.ascontiguousarray(np.asarray(points, dtype=np.float64))
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise InvalidParameterError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if dim is not None and arr.shape[1] != dim:
        raise InvalidParameterError(
            f"{name} must have {dim} coordinates per row, got {arr.shape[1]}"
        )
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_vector(x, dim, name="x"):
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape[0] != dim:
        raise InvalidParameterError(f"{name} must have {dim} coordinates, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_positive(value, name, allow_zero=False):
    try:
        v = float(value)
    except (TypeError, ValueError):
        raise InvalidParameterError(f"{name} must be a real number, got {value!r}") from None
    if not math.isfinite(v) or v < 0 or (v == 0 and not allow_zero):
        bound = ">= 0" if allow_zero else "> 0"
        raise InvalidParameterError(f"{name} must be {bound}, got {value!r}")
    return v


def check_int(value, name, minimum=None):
    if isinstance(value, bool) or int(value) != value:
        raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise InvalidParameterError(f"{name} must be >= {minimum}, got {value}")
    return value


def check_scale_window(scale, mesh, diameter, name="scale"):
    """Reject scales outside ``4*mesh <= scale <= diameter/4``."""
    if scale < 4.0 * mesh * (1 - 1e-12):
        raise ScaleWindowError(
            f"{name}={scale:.6g} is below 4*mesh={4 * mesh:.6g}; discretization dominates"
        )
    if diameter > 0 and scale > diameter / 4.0 * (1 + 1e-12):
        raise ScaleWindowError(
            f"{name}={scale:.6g} exceeds diameter/4={diameter / 4:.6g}; boundary effects dominate"
        )
    return scale
