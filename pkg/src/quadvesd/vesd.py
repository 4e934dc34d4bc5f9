"""Recovery of the vector spectral distribution by l1 moment matching.

A discrete measure with weights ``q`` on the grid ``d_i = a0 + (i-1) h`` is
fitted to estimated moments by the linear program

    min_q  sum_j |(M q)_j - alpha_j|        (naive)
    min_q  sum_j |(M q)_j / alpha_j - 1|    (stabilised, truncated alpha)

subject to ``q >= 0`` and ``sum q = 1``, where ``M[j, i] = d_i^j``.  The
ratio form only needs ``alpha_j != 0``: a truncated moment can be negative
when ``alpha_1`` is clamped at a small ``a0`` (``a0^j - delta < 0``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .exceptions import InvalidInputError
from .residues import MomentVector
from .simplex import revised_simplex

__all__ = [
    "VesdGrid",
    "VesdEstimate",
    "moment_matrix",
    "solve_moment_lp",
    "plugin_functional",
    "wasserstein1",
]


@dataclass(frozen=True)
class VesdGrid:
    a0: float
    b0: float
    h: float

    def __post_init__(self) -> None:
        if not (0.0 < self.a0 < self.b0 and np.isfinite(self.b0)):
            raise InvalidInputError(f"support interval must satisfy 0 < a0 < b0, got ({self.a0}, {self.b0})")
        if not self.h > 0.0:
            raise InvalidInputError("grid step must be positive")

    @classmethod
    def for_problem(cls, a0: float, b0: float, n: int, p: int, h: float | None = None) -> "VesdGrid":
        """Grid with step ``1/p`` by default, never coarser than ``1/max(n, p)``."""
        cap = 1.0 / max(n, p)
        step = 1.0 / p if h is None else float(h)
        return cls(float(a0), float(b0), min(step, cap))

    @property
    def size(self) -> int:
        return int(math.floor((self.b0 - self.a0) / self.h + 1e-9)) + 1

    @cached_property
    def points(self) -> NDArray[np.float64]:
        return self.a0 + self.h * np.arange(self.size)


def moment_matrix(grid: VesdGrid | ArrayLike, k: int) -> NDArray[np.float64]:
    """``k x t`` matrix of powers ``d_i^j`` for j = 1..k."""
    d = grid.points if isinstance(grid, VesdGrid) else np.asarray(grid, dtype=np.float64)
    if k < 1:
        raise InvalidInputError("k must be at least 1")
    return d[None, :] ** np.arange(1, k + 1)[:, None]


@dataclass(frozen=True, eq=False)
class VesdEstimate:
    """Discrete estimate ``F(x) = sum_i q_i 1{d_i <= x}``."""

    grid: VesdGrid
    q: NDArray[np.float64]
    residual: float
    stabilized: bool = False
    iterations: int = 0

    @property
    def atoms(self) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        keep = self.q > 0.0
        return self.grid.points[keep], self.q[keep]

    def cdf(self, x: ArrayLike) -> NDArray[np.float64]:
        d, q = self.atoms
        cum = np.cumsum(q)
        idx = np.searchsorted(d, np.asarray(x, dtype=np.float64), side="right")
        return np.where(idx > 0, cum[np.maximum(idx - 1, 0)], 0.0)

    def to_dict(self) -> dict:
        d, q = self.atoms
        return {
            "a0": self.grid.a0,
            "b0": self.grid.b0,
            "h": self.grid.h,
            "grid_size": self.grid.size,
            "residual": float(self.residual),
            "stabilized": bool(self.stabilized),
            "iterations": int(self.iterations),
            "atoms": [float(v) for v in d],
            "weights": [float(v) for v in q],
        }

    def to_csv(self, cdf: bool = True) -> str:
        d, q = self.atoms
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["d", "q", "cdf"] if cdf else ["d", "q"])
        cum = np.cumsum(q)
        for i in range(d.shape[0]):
            row = [repr(float(d[i])), repr(float(q[i]))]
            if cdf:
                row.append(repr(float(cum[i])))
            writer.writerow(row)
        return buf.getvalue()


def _initial_basis(D: NDArray[np.float64], target: NDArray[np.float64], t: int, k: int) -> list[int]:
    dev = D - target[:, None]
    i0 = int(np.argmin(np.abs(dev).sum(axis=0)))
    basis = [i0] + [t + j for j in range(k)]
    for j in range(k):
        # with q = e_i0 the side that is not tight keeps a positive slack
        basis.append(t + 2 * k + j if dev[j, i0] >= 0.0 else t + k + j)
    return basis


def solve_moment_lp(
    grid: VesdGrid,
    moments: MomentVector | ArrayLike,
    weighted: bool = False,
    *,
    rule: str = "dantzig",
    max_iter: int = 50_000,
) -> VesdEstimate:
    """Fit grid weights to moments by l1 matching (weighted when ``weighted``).

    The default pivot rule is Dantzig's with a Bland fallback on degenerate
    runs; pure Bland is available but needs hundreds of times more pivots on
    fine grids.  Both are deterministic.
    """
    alpha = np.asarray(moments.values if isinstance(moments, MomentVector) else moments, dtype=np.float64)
    if alpha.ndim != 1 or alpha.size == 0 or not np.all(np.isfinite(alpha)):
        raise InvalidInputError("moments must be a finite, non-empty vector")
    if weighted and np.any(alpha == 0.0):
        raise InvalidInputError("weighted matching divides by the moments; none may be zero")
    k = alpha.shape[0]
    t = grid.size
    M = moment_matrix(grid, k)
    scale = 1.0 / alpha if weighted else np.ones(k)
    D = M * scale[:, None]
    target = alpha * scale

    # columns: q (t) | r (k) | upper slacks (k) | lower slacks (k)
    I = np.eye(k)
    Z = np.zeros((k, k))
    A = np.vstack(
        [
            np.r_[np.ones(t), np.zeros(3 * k)][None, :],
            np.hstack([D, -I, I, Z]),
            np.hstack([-D, -I, Z, I]),
        ]
    )
    b = np.r_[1.0, target, -target]
    c = np.r_[np.zeros(t), np.ones(k), np.zeros(2 * k)]
    res = revised_simplex(c, A, b, _initial_basis(D, target, t, k), rule=rule, max_iter=max_iter)
    q = np.maximum(res.x[:t], 0.0)
    q = q / q.sum()
    residual = float(np.sum(np.abs(D @ q - target)))
    uniform = float(np.sum(np.abs(D.mean(axis=1) - target)))
    assert residual <= uniform + 1e-9 * max(1.0, uniform), "LP optimum worse than the uniform witness"
    return VesdEstimate(grid, q, residual, bool(weighted), res.iterations)


def plugin_functional(est: VesdEstimate, g="inverse") -> float:
    """``sum_i q_i g(d_i)`` for ``g`` in {"inverse", "identity", "power-j"} or a callable."""
    d = est.grid.points
    if callable(g):
        vals = g(d)
    elif g == "inverse":
        vals = 1.0 / d
    elif g == "identity":
        vals = d
    elif isinstance(g, str) and g.startswith("power-"):
        vals = d ** int(g.split("-", 1)[1])
    else:
        raise InvalidInputError(f"unknown integrand {g!r}")
    return float(np.dot(est.q, vals))


def _as_discrete(dist) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    if isinstance(dist, VesdEstimate):
        return dist.grid.points, dist.q
    atoms, weights = dist
    atoms = np.asarray(atoms, dtype=np.float64)
    weights = np.asarray(weights, dtype=np.float64)
    if atoms.shape != weights.shape or atoms.ndim != 1:
        raise InvalidInputError("a discrete distribution needs matching atom and weight vectors")
    return atoms, weights


def wasserstein1(A, B) -> float:
    """Exact ``int |F_A - F_B| dx`` for two discrete distributions.

    Each argument is a :class:`VesdEstimate` or an ``(atoms, weights)`` pair.
    """
    xa, wa = _as_discrete(A)
    xb, wb = _as_discrete(B)
    for w in (wa, wb):
        if np.any(w < -1e-12) or abs(float(w.sum()) - 1.0) > 1e-9:
            raise InvalidInputError("distributions must be normalised with nonnegative weights")
    x = np.r_[xa, xb]
    signed = np.r_[wa, -wb]
    order = np.argsort(x, kind="stable")
    x = x[order]
    diff = np.cumsum(signed[order])
    return float(np.sum(np.abs(diff[:-1]) * np.diff(x)))
