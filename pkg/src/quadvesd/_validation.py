"""Input checks used by every public entry point."""

from __future__ import annotations

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.utils import check_array

from .exceptions import InvalidInputError

UNIT_TOL = 1e-10


def check_data_matrix(X: ArrayLike, *, min_rows: int = 2) -> NDArray[np.float64]:
    """Return ``X`` as a finite float64 (n, p) array with at least ``min_rows`` rows."""
    try:
        arr = check_array(X, dtype=np.float64, ensure_all_finite=True, ensure_min_samples=1)
    except ValueError as exc:
        raise InvalidInputError(str(exc)) from exc
    if arr.shape[0] < min_rows:
        raise InvalidInputError(f"need at least {min_rows} observations, got {arr.shape[0]}")
    return arr


def check_vector(a: ArrayLike, dim: int | None = None, *, name: str = "vector") -> NDArray[np.float64]:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError(f"{name} has non-finite entries")
    if dim is not None and arr.shape[0] != dim:
        raise InvalidInputError(f"{name} has length {arr.shape[0]}, expected {dim}")
    return arr


def check_unit_vector(a: ArrayLike, dim: int | None = None) -> NDArray[np.float64]:
    arr = check_vector(a, dim, name="reference vector")
    norm = float(np.linalg.norm(arr))
    if abs(norm - 1.0) > UNIT_TOL:
        raise InvalidInputError(f"reference vector must have unit norm, got {norm!r}")
    return arr


def check_symmetric(S: ArrayLike, *, tol: float = 1e-10) -> NDArray[np.float64]:
    arr = np.asarray(S, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidInputError("matrix must be square")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("matrix has non-finite entries")
    scale = max(1.0, float(np.max(np.abs(arr))) if arr.size else 1.0)
    if arr.size and float(np.max(np.abs(arr - arr.T))) > tol * scale:
        raise InvalidInputError("matrix is not symmetric")
    return 0.5 * (arr + arr.T)
