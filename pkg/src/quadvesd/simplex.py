"""Dense revised simplex for small-row linear programs.

Solves ``min c^T x  s.t.  A x = b, x >= 0`` from a supplied feasible basis.
The moment-matching programs have at most ``2k + 1 <= 17`` rows and a few
thousand columns, so the basis matrix is refactorised from scratch every
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .exceptions import NumericalDegeneracyError, SolverStallError

__all__ = ["SimplexResult", "revised_simplex"]


@dataclass(frozen=True)
class SimplexResult:
    x: NDArray[np.float64]
    objective: float
    basis: NDArray[np.int64]
    iterations: int


def revised_simplex(
    c: NDArray[np.float64],
    A: NDArray[np.float64],
    b: NDArray[np.float64],
    basis,
    *,
    rule: str = "bland",
    max_iter: int = 50_000,
    tol: float = 1e-11,
) -> SimplexResult:
    """Phase-two revised simplex.

    ``rule="bland"`` picks the lowest-index improving column and breaks
    ratio-test ties by lowest variable index, which cannot cycle.
    ``rule="dantzig"`` uses the most negative reduced cost and falls back to
    Bland after 50 consecutive degenerate pivots.
    """
    if rule not in ("bland", "dantzig"):
        raise ValueError(f"unknown pivot rule {rule!r}")
    m, N = A.shape
    basis = np.array(basis, dtype=np.int64)
    if basis.shape != (m,):
        raise ValueError("basis must have one index per row")
    cost_scale = max(1.0, float(np.max(np.abs(c))))
    degenerate_run = 0
    best_x, best_obj = None, np.inf
    for it in range(max_iter):
        B = A[:, basis]
        try:
            xB = np.linalg.solve(B, b)
            y = np.linalg.solve(B.T, c[basis])
        except np.linalg.LinAlgError as exc:
            raise NumericalDegeneracyError("simplex basis became singular") from exc
        xB = np.where(xB < 0.0, np.maximum(xB, 0.0), xB)
        obj = float(c[basis] @ xB)
        if obj < best_obj:
            best_obj = obj
            best_x = (basis.copy(), xB.copy())
        reduced = c - A.T @ y
        reduced[basis] = 0.0
        improving = np.nonzero(reduced < -tol * cost_scale)[0]
        if improving.size == 0:
            x = np.zeros(N)
            x[basis] = xB
            return SimplexResult(x, obj, basis, it)
        use_bland = rule == "bland" or degenerate_run >= 50
        entering = int(improving[0]) if use_bland else int(improving[np.argmin(reduced[improving])])
        col = np.linalg.solve(B, A[:, entering])
        pivots = np.nonzero(col > tol)[0]
        if pivots.size == 0:
            raise NumericalDegeneracyError("linear program is unbounded")
        ratios = xB[pivots] / col[pivots]
        step = ratios.min()
        ties = pivots[ratios <= step + 1e-12 * max(1.0, step)]
        leave = int(ties[np.argmin(basis[ties])])
        degenerate_run = degenerate_run + 1 if step <= 1e-14 else 0
        basis[leave] = entering
    x = np.zeros(N)
    x[best_x[0]] = best_x[1]
    raise SolverStallError(f"simplex did not converge in {max_iter} iterations", incumbent=x, objective=best_obj)
