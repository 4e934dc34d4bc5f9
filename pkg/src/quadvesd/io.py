"""Data ingestion and export.

Two on-disk layouts for an ``n x p`` data matrix:

* CSV, one observation per row, optional header line;
* binary: two little-endian ``int64`` values ``(n, p)`` followed by ``n * p``
  little-endian ``float64`` values in column-major order.

Both round-trip bit-exactly (CSV uses the shortest repr of each double).
"""

from __future__ import annotations

import csv
import os
import struct
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._validation import check_data_matrix
from .exceptions import InvalidInputError

__all__ = ["read_csv", "write_csv", "read_binary", "write_binary", "read_matrix", "write_matrix"]

_HEADER = struct.Struct("<qq")


def read_csv(path: str | os.PathLike, header: bool = False) -> tuple[NDArray[np.float64], list[str] | None]:
    """Parse a numeric CSV file; returns ``(X, column_names or None)``."""
    try:
        with open(path, newline="") as fh:
            rows = [r for r in csv.reader(fh) if r and any(cell.strip() for cell in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    names = None
    if header:
        if not rows:
            raise InvalidInputError(f"{path}: missing header line")
        names = [c.strip() for c in rows[0]]
        rows = rows[1:]
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    width = len(rows[0])
    out = np.empty((len(rows), width))
    for i, row in enumerate(rows):
        if len(row) != width:
            raise InvalidInputError(f"{path}: row {i + 1} has {len(row)} fields, expected {width}")
        try:
            out[i] = [float(cell) for cell in row]
        except ValueError as exc:
            raise InvalidInputError(f"{path}: row {i + 1}: {exc}") from exc
    if names is not None and len(names) != width:
        raise InvalidInputError(f"{path}: header has {len(names)} names for {width} columns")
    return out, names


def write_csv(path: str | os.PathLike, X: ArrayLike, names: list[str] | None = None) -> None:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        if names is not None:
            writer.writerow(names)
        for row in X:
            writer.writerow([repr(float(v)) for v in row])


def read_binary(path: str | os.PathLike) -> NDArray[np.float64]:
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc}") from exc
    if len(raw) < _HEADER.size:
        raise InvalidInputError(f"{path}: truncated header")
    n, p = _HEADER.unpack_from(raw)
    if n < 0 or p < 0:
        raise InvalidInputError(f"{path}: negative dimensions ({n}, {p})")
    body = raw[_HEADER.size:]
    if len(body) != 8 * n * p:
        raise InvalidInputError(f"{path}: expected {8 * n * p} data bytes for ({n}, {p}), found {len(body)}")
    flat = np.frombuffer(body, dtype="<f8")
    return np.ascontiguousarray(flat.reshape((n, p), order="F"), dtype=np.float64)


def write_binary(path: str | os.PathLike, X: ArrayLike) -> None:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise InvalidInputError("binary layout stores a two-dimensional matrix")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(*X.shape))
        fh.write(np.asarray(X, dtype="<f8").tobytes(order="F"))


def read_matrix(path: str | os.PathLike, header: bool = False) -> tuple[NDArray[np.float64], list[str] | None]:
    """Dispatch on extension (``.bin``/``.dat`` binary, anything else CSV) and validate."""
    if Path(path).suffix.lower() in (".bin", ".dat"):
        X, names = read_binary(path), None
    else:
        X, names = read_csv(path, header=header)
    return check_data_matrix(X), names


def write_matrix(path: str | os.PathLike, X: ArrayLike, names: list[str] | None = None) -> None:
    if Path(path).suffix.lower() in (".bin", ".dat"):
        write_binary(path, X)
    else:
        write_csv(path, X, names)
