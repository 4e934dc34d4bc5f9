"""Sample covariance spectra, empirical Stieltjes transforms and the zeros of
the companion transform.

A :class:`SampleSpectrum` stores the eigenvalues of ``S_n`` (zeros included)
together with the squared projections of a unit reference vector onto the
eigenvectors.  Everything downstream (root finding, residues) works on the
distinct positive eigenvalues with merged weights, plus a single lumped null
block.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._validation import check_data_matrix, check_symmetric, check_unit_vector, check_vector
from .exceptions import InvalidInputError, NumericalDegeneracyError, PoleError, UnsupportedOrderError

__all__ = [
    "SampleSpectrum",
    "StieltjesJet",
    "EtaZeros",
    "sample_covariance",
    "spectral_decompose",
    "sample_spectrum",
    "stieltjes_jet",
    "taylor_jets",
    "find_eta_zeros",
    "RANK_TOL",
    "MAX_JET_ORDER",
]

RANK_TOL = 1e-10
TIE_TOL = 1e-12
POLE_TOL = 1e-9
MAX_JET_ORDER = 12


def sample_covariance(X: ArrayLike) -> NDArray[np.float64]:
    """Unbiased sample covariance ``1/(n-1) sum (x_i - xbar)(x_i - xbar)^T``."""
    data = check_data_matrix(X)
    centered = data - data.mean(axis=0)
    S = centered.T @ centered / (data.shape[0] - 1)
    return 0.5 * (S + S.T)


@dataclass(frozen=True, eq=False)
class SampleSpectrum:
    """Eigenvalues of ``S_n`` in descending order and projection weights.

    ``weights`` belong to the unit direction ``ref_vector``.  ``ref_norm2`` is
    the squared norm of the raw (unnormalised) reference, e.g. ``|xbar|^2`` for
    the Sharpe pipeline; it is 1 for a known unit vector.
    """

    lambdas: NDArray[np.float64]
    weights: NDArray[np.float64]
    psi: int
    n: int
    ref_vector: NDArray[np.float64] | None = None
    ref_norm2: float = 1.0

    @property
    def p(self) -> int:
        return int(self.lambdas.shape[0])

    @property
    def cn(self) -> float:
        return self.p / self.n

    @property
    def null_count(self) -> int:
        return self.p - self.psi

    @property
    def null_weight(self) -> float:
        return float(np.sum(self.weights[self.psi:]))

    @property
    def gamma(self) -> float:
        """Coefficient of ``-1/z`` in the companion transform, ``(n - psi)/n``."""
        return (self.n - self.psi) / self.n

    @cached_property
    def distinct(self) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
        """Distinct positive eigenvalues (descending), multiplicities, merged weights."""
        lam = self.lambdas[: self.psi]
        if lam.size == 0:
            empty = np.zeros(0)
            return empty, empty, empty
        tol = TIE_TOL * lam[0]
        starts = np.r_[0, np.nonzero(lam[:-1] - lam[1:] > tol)[0] + 1]
        mult = np.diff(np.r_[starts, lam.size]).astype(np.float64)
        values = np.add.reduceat(lam, starts) / mult
        merged = np.add.reduceat(self.weights[: self.psi], starts)
        return values, mult, merged

    def rescaled(self, norm2: float) -> "SampleSpectrum":
        """Copy carrying a different raw reference scale."""
        return replace(self, ref_norm2=float(norm2))


@dataclass(frozen=True)
class StieltjesJet:
    """Derivatives of order 0..K of ``m_n``, the companion transform and ``s_n``."""

    point: complex
    order: int
    m: NDArray
    um: NDArray
    s: NDArray


@dataclass(frozen=True)
class EtaZeros:
    etas: NDArray[np.float64]

    def __len__(self) -> int:
        return int(self.etas.shape[0])


def _finish_spectrum(
    lam: NDArray[np.float64],
    proj2: NDArray[np.float64],
    p: int,
    n: int,
    a: NDArray[np.float64] | None,
    norm2: float,
) -> SampleSpectrum:
    """Clamp tiny eigenvalues, sort, lump the null block and build the spectrum."""
    order = np.argsort(lam)[::-1]
    lam = np.asarray(lam, dtype=np.float64)[order]
    proj2 = np.asarray(proj2, dtype=np.float64)[order]
    if lam.size == 0 or lam[0] <= 0.0 or not np.isfinite(lam[0]):
        raise NumericalDegeneracyError("degenerate spectrum: covariance matrix is zero")
    keep = lam > RANK_TOL * lam[0]
    psi = int(np.count_nonzero(keep))
    lambdas = np.zeros(p)
    lambdas[:psi] = lam[:psi]
    weights = np.zeros(p)
    weights[:psi] = proj2[:psi]
    if psi < p:
        # choose the null eigenbasis so that one vector carries the whole projection
        weights[psi] = max(0.0, 1.0 - float(np.sum(weights[:psi])))
    return SampleSpectrum(lambdas, weights, psi, int(n), a, float(norm2))


def spectral_decompose(S: ArrayLike, a: ArrayLike, n: int) -> SampleSpectrum:
    """Eigen-decompose a covariance matrix estimated from ``n`` observations.

    ``a`` must have unit norm; eigenvalues below ``1e-10 * lambda_1`` become 0.
    """
    S = check_symmetric(S)
    a = check_unit_vector(a, S.shape[0])
    if n < 2:
        raise InvalidInputError("n must be at least 2")
    lam, vecs = np.linalg.eigh(S)
    proj2 = (vecs.T @ a) ** 2
    lam = np.where(lam > 0.0, lam, 0.0)
    return _finish_spectrum(lam, proj2, S.shape[0], n, a, 1.0)


def sample_spectrum(X: ArrayLike, ref: ArrayLike) -> SampleSpectrum:
    """Spectrum of ``S_n`` straight from data with weights for direction ``ref/|ref|``.

    Works on the smaller of the ``n x n`` Gram matrix and the ``p x p``
    covariance.  ``ref`` may have any nonzero norm; its squared norm is kept in
    ``ref_norm2``.
    """
    data = check_data_matrix(X)
    n, p = data.shape
    ref = check_vector(ref, p, name="reference vector")
    norm2 = float(ref @ ref)
    if norm2 <= 0.0:
        raise InvalidInputError("reference vector is zero")
    a = ref / math.sqrt(norm2)
    centered = data - data.mean(axis=0)
    if p <= n:
        S = centered.T @ centered / (n - 1)
        lam, vecs = np.linalg.eigh(0.5 * (S + S.T))
        proj2 = (vecs.T @ a) ** 2
        lam = np.where(lam > 0.0, lam, 0.0)
        return _finish_spectrum(lam, proj2, p, n, a, norm2)
    G = centered @ centered.T / (n - 1)
    lam, U = np.linalg.eigh(0.5 * (G + G.T))
    top = lam.max() if lam.size else 0.0
    if top <= 0.0:
        raise NumericalDegeneracyError("degenerate spectrum: covariance matrix is zero")
    pos = lam > RANK_TOL * top
    lam = lam[pos]
    # v_i = Xc^T u_i / sqrt((n-1) lambda_i)
    proj2 = (U[:, pos].T @ (centered @ a)) ** 2 / ((n - 1) * lam)
    full = np.zeros(p)
    full[: lam.size] = lam
    w = np.zeros(p)
    w[: lam.size] = proj2
    return _finish_spectrum(full, w, p, n, a, norm2)


def taylor_jets(spec: SampleSpectrum, points: ArrayLike, order: int) -> tuple[NDArray, NDArray]:
    """Taylor coefficients (derivative / k!) of the companion transform and of ``s_n``.

    Returns two arrays of shape ``(len(points), order + 1)``; complex points
    are allowed.
    """
    z = np.atleast_1d(np.asarray(points))
    values, mult, merged = spec.distinct
    R = 1.0 / (values[None, :] - z[:, None])
    inv_z = 1.0 / z
    um = np.empty((z.shape[0], order + 1), dtype=R.dtype)
    s = np.empty_like(um)
    Rk = R.copy()
    sign_inv = -inv_z  # (-1/z)^(k+1) builds up the (-z)^{-(k+1)} factor
    neg_pow = sign_inv.copy()
    for k in range(order + 1):
        um[:, k] = Rk @ mult / spec.n + spec.gamma * neg_pow
        s[:, k] = Rk @ merged + spec.null_weight * neg_pow
        Rk = Rk * R
        neg_pow = neg_pow * sign_inv
    return um, s


def stieltjes_jet(spec: SampleSpectrum, z: complex, order: int) -> StieltjesJet:
    """Exact derivatives of ``m_n``, ``underline m_n`` and ``s_n`` at ``z``."""
    if not 0 <= order <= MAX_JET_ORDER:
        raise UnsupportedOrderError(f"jet order must be in [0, {MAX_JET_ORDER}], got {order}")
    values = spec.distinct[0]
    poles = values if spec.gamma == 0.0 and spec.null_count == 0 else np.r_[values, 0.0]
    if np.min(np.abs(poles - z)) <= POLE_TOL:
        raise PoleError(f"evaluation point {z!r} collides with an eigenvalue")
    um, s = taylor_jets(spec, [z], order)
    fact = np.array([math.factorial(k) for k in range(order + 1)], dtype=np.float64)
    _, mult, _ = spec.distinct
    R = 1.0 / (values - z)
    m = np.array(
        [
            (np.sum(mult * R ** (k + 1)) + spec.null_count * (-1.0 / z) ** (k + 1)) / spec.p
            for k in range(order + 1)
        ]
    )
    return StieltjesJet(z, order, m * fact, um[0] * fact, s[0] * fact)


def _companion(spec: SampleSpectrum, z: NDArray[np.float64]) -> NDArray[np.float64]:
    values, mult, _ = spec.distinct
    return (1.0 / (values[None, :] - z[:, None])) @ mult / spec.n - spec.gamma / z


def find_eta_zeros(spec: SampleSpectrum) -> EtaZeros:
    """Real zeros of the companion transform, one per interlacing interval.

    Bisection on all intervals at once down to width ``1e-10 * lambda_1``,
    then at most five Newton steps that must stay inside the bracket.
    """
    values = spec.distinct[0]
    r = values.shape[0]
    if r == 0:
        raise NumericalDegeneracyError("spectrum has no positive eigenvalues")
    if spec.gamma <= 0.0:
        raise NumericalDegeneracyError(
            f"no root in (0, {float(values[-1])!r}): companion transform has no pole at 0 (psi >= n)"
        )
    top = values[0]
    hi = values.copy()
    lo = np.r_[values[1:], 1e-12 * top]
    moved_lo = np.zeros(r, dtype=bool)
    moved_hi = np.zeros(r, dtype=bool)
    width_tol = 1e-10 * top
    for _ in range(200):
        active = hi - lo > width_tol
        if not np.any(active):
            break
        mid = 0.5 * (lo + hi)
        val = _companion(spec, mid)
        neg = val < 0.0
        lo = np.where(active & neg, mid, lo)
        hi = np.where(active & ~neg, mid, hi)
        moved_lo |= active & neg
        moved_hi |= active & ~neg
    # the last interval's lower end is not a pole; it must carry a negative sign
    if _companion(spec, np.array([1e-12 * top]))[0] >= 0.0:
        raise NumericalDegeneracyError(f"sign condition violated on interval (0, {float(values[-1])!r})")
    bad = np.zeros(r, dtype=bool)
    if np.any(moved_lo):
        bad[moved_lo] |= _companion(spec, lo[moved_lo]) > 0.0
    if np.any(moved_hi):
        bad[moved_hi] |= _companion(spec, hi[moved_hi]) < 0.0
    if np.any(bad):
        i = int(np.nonzero(bad)[0][0])
        left = values[i + 1] if i + 1 < r else 0.0
        raise NumericalDegeneracyError(f"sign condition violated on interval ({float(left)!r}, {float(values[i])!r})")

    eta = 0.5 * (lo + hi)
    for _ in range(5):
        um, _s = taylor_jets(spec, eta, 1)
        step = um[:, 0] / um[:, 1]
        cand = eta - step
        ok = (cand > lo) & (cand < hi)
        eta = np.where(ok, cand, eta)
        if np.all(np.abs(step) <= 4 * np.finfo(float).eps * np.abs(eta)):
            break
    return EtaZeros(eta)
