"""Input validation helpers shared by the public API."""

from __future__ import annotations

import numpy as np

from .errors import InvalidParameterError


def check_scalar(value, name: str, *, positive: bool = False, minimum=None, maximum=None) -> float:
    """Validate a finite numeric scalar and return it as float."""
    try:
        out = float(value)
    except (TypeError, ValueError) as exc:
        raise InvalidParameterError(f"{name} must be a number, got {value!r}") from exc
    if not np.isfinite(out):
        raise InvalidParameterError(f"{name} must be finite, got {out}")
    if positive and out <= 0:
        raise InvalidParameterError(f"{name} must be > 0, got {out}")
    if minimum is not None and out < minimum:
        raise InvalidParameterError(f"{name} must be >= {minimum}, got {out}")
    if maximum is not None and out > maximum:
        raise InvalidParameterError(f"{name} must be <= {maximum}, got {out}")
    return out


def check_int(value, name: str, *, minimum=None, maximum=None) -> int:
    """Validate an integer-valued argument and return it as int."""
    if isinstance(value, bool) or (not isinstance(value, (int, np.integer))):
        raise InvalidParameterError(f"{name} must be an integer, got {value!r}")
    out = int(value)
    if minimum is not None and out < minimum:
        raise InvalidParameterError(f"{name} must be >= {minimum}, got {out}")
    if maximum is not None and out > maximum:
        raise InvalidParameterError(f"{name} must be <= {maximum}, got {out}")
    return out


def check_vector(values, name: str, *, length: int | None = None) -> np.ndarray:
    """Coerce to a finite 1-D float array, optionally of fixed length."""
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise InvalidParameterError(f"{name} must be 1-D, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise InvalidParameterError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_points(points, name: str = "points") -> np.ndarray:
    """Coerce to a finite (m, 3) float array of 3-D positions."""
    arr = np.asarray(points, dtype=float)
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise InvalidParameterError(f"{name} must have shape (m, 3), got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidParameterError(f"{name} contains non-finite values")
    return arr


def check_choice(value, name: str, options) -> str:
    if value not in options:
        raise InvalidParameterError(f"{name} must be one of {sorted(options)}, got {value!r}")
    return value


def check_seed(value, name: str = "seed") -> int:
    """Seeds feed numpy SeedSequence and must be non-negative integers."""
    return check_int(value, name, minimum=0)


def check_same_geometry(ref_a: str, ref_b: str, context: str) -> None:
    if ref_a != ref_b:
        raise InvalidParameterError(
            f"{context}: geometry mismatch ({ref_a!r} vs {ref_b!r})"
        )


def readonly(arr: np.ndarray) -> np.ndarray:
    """Return a C-contiguous, write-protected view-owning copy of ``arr``."""
    out = np.ascontiguousarray(arr)
    if out is arr:
        out = arr.copy()
    out.setflags(write=False)
    return out
