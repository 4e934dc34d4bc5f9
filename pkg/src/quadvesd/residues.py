"""Moment estimators of the vector spectral distribution by residue calculus.

Every estimator is a contour integral of a rational function built from the
companion transform ``u`` (underline m_n) and ``s_n``.  Its poles sit at the
positive sample eigenvalues and at the zeros ``eta_i`` of ``u``.  Residues at
the ``eta_i`` are read off truncated Taylor expansions: with
``h(z) = u(z) / (z - eta)`` a pole of order ``q`` gives

    Res(N / u^q, eta) = [coefficient of (z - eta)^(q-1)] of N / h^q.

Kinds of integrand (``S`` is ``ref_norm2 * s_n``):

* ``known-a`` / ``sr-c1``: ``z S u' / u^(j+1)``
* ``sr-c2``: ``z u' / u^(j+1)``
* ``mcc``: ``(S - 1) u' / (z u^(j+3))``
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np
from numpy.typing import NDArray

from .exceptions import GeometryError, InvalidInputError, NumericalDegeneracyError, UnsupportedOrderError
from .series import TruncatedSeries
from .spectral import MAX_JET_ORDER, EtaZeros, SampleSpectrum, find_eta_zeros, taylor_jets

__all__ = [
    "MomentVector",
    "KINDS",
    "MAX_MOMENTS",
    "residue_at_eta",
    "lambda_residues",
    "estimate_moments_known_a",
    "estimate_moments_sharpe",
    "estimate_moments_mcc",
    "contour_oracle",
    "truncate_moments",
]

KINDS = ("known-a", "sr-c1", "sr-c2", "mcc")
MAX_MOMENTS = 8
QUADRATURE_POINTS = 2048


@dataclass(frozen=True, eq=False)
class MomentVector:
    """Moment estimates ``alpha_1..alpha_k``.

    ``raw`` keeps the untruncated values once :func:`truncate_moments` has
    been applied; ``lambda_part`` and ``eta_part`` are the signed residue sums
    per order (already multiplied by ``(-1)^j`` and the scale).
    """

    values: NDArray[np.float64]
    kind: str = "known-a"
    truncated: bool = False
    raw: NDArray[np.float64] | None = None
    lambda_part: NDArray[np.float64] | None = field(default=None, repr=False)
    eta_part: NDArray[np.float64] | None = field(default=None, repr=False)

    @property
    def k(self) -> int:
        return int(self.values.shape[0])

    @property
    def raw_values(self) -> NDArray[np.float64]:
        return self.values if self.raw is None else self.raw

    @property
    def negative_count(self) -> int:
        """Number of raw estimates below zero."""
        return int(np.count_nonzero(self.raw_values < 0.0))

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "k": self.k,
            "raw": [float(v) for v in self.raw_values],
            "truncated": [float(v) for v in self.values] if self.truncated else None,
        }
        if self.lambda_part is not None:
            out["lambda_residues"] = [float(v) for v in self.lambda_part]
        if self.eta_part is not None:
            out["eta_residues"] = [float(v) for v in self.eta_part]
        return out


def _check_order(j: int) -> None:
    if j < 1:
        raise InvalidInputError(f"moment order must be >= 1, got {j}")


def _zeros(spec: SampleSpectrum, zeros: EtaZeros | None) -> NDArray[np.float64]:
    return (find_eta_zeros(spec) if zeros is None else zeros).etas


def residue_at_eta(spec: SampleSpectrum, eta, j: int, kind: str) -> NDArray[np.float64]:
    """Residue of the ``kind`` integrand for moment ``j`` at zero(s) ``eta``.

    ``eta`` may be a scalar or an array of zeros; the result has its shape.
    """
    if kind not in KINDS:
        raise InvalidInputError(f"unknown integrand kind {kind!r}")
    _check_order(j)
    eta = np.asarray(eta, dtype=np.float64)
    scalar = eta.ndim == 0
    eta = np.atleast_1d(eta)
    pole = j + 3 if kind == "mcc" else j + 1
    need = pole  # coefficient index pole-1 of N / h^pole, N needs u'
    if need > MAX_JET_ORDER:
        raise UnsupportedOrderError(f"moment order {j} needs jets of order {need} > {MAX_JET_ORDER}")
    um, s = taylor_jets(spec, eta, need)
    u = TruncatedSeries(eta, um)
    h = u.shift_down().truncate(pole - 1)
    if np.any(np.abs(h[0]) < 1e-13):
        raise NumericalDegeneracyError("degenerate root: derivative of the companion transform vanishes")
    du = u.derivative().truncate(pole - 1)
    z = TruncatedSeries.variable(eta, pole - 1)
    S = TruncatedSeries(eta, s[:, :pole]) * spec.ref_norm2
    if kind in ("known-a", "sr-c1"):
        N = z * S * du
    elif kind == "sr-c2":
        N = z * du
    else:
        N = (S - 1.0) * du / z
    res = (N * h ** (-pole))[pole - 1]
    return res[0] if scalar else res


def lambda_residues(spec: SampleSpectrum, j: int) -> float:
    """Sum of residues of the ``known-a`` integrand at the positive eigenvalues.

    Only ``j = 1`` has poles there: ``-n * lambda * w / multiplicity`` each.
    """
    _check_order(j)
    if j != 1:
        return 0.0
    values, mult, merged = spec.distinct
    return float(-spec.n * np.sum(values * merged / mult) * spec.ref_norm2)


def _known_a_parts(spec: SampleSpectrum, k: int, etas: NDArray[np.float64]):
    lam_part = np.zeros(k)
    eta_part = np.zeros(k)
    for j in range(1, k + 1):
        sign = (-1.0) ** j
        lam_part[j - 1] = sign * lambda_residues(spec, j)
        eta_part[j - 1] = sign * float(np.sum(residue_at_eta(spec, etas, j, "known-a")))
    return lam_part, eta_part


def _check_k(k: int) -> None:
    if not 1 <= k <= MAX_MOMENTS:
        raise InvalidInputError(f"moment count must be in [1, {MAX_MOMENTS}], got {k}")


def estimate_moments_known_a(spec: SampleSpectrum, k: int, zeros: EtaZeros | None = None) -> MomentVector:
    """``alpha_j = (-1)^j [sum Res(f, lambda_i) + sum Res(f, eta_i)]`` for j = 1..k."""
    _check_k(k)
    etas = _zeros(spec, zeros)
    lam_part, eta_part = _known_a_parts(spec, k, etas)
    return MomentVector(lam_part + eta_part, "known-a", lambda_part=lam_part, eta_part=eta_part)


def _check_scale(kappa: float, name: str) -> float:
    kappa = float(kappa)
    if not np.isfinite(kappa) or kappa <= 0.0:
        raise InvalidInputError(f"{name} must be positive, got {kappa!r}")
    return kappa


def estimate_moments_sharpe(
    spec_xbar: SampleSpectrum,
    kappa_mu: float,
    k: int,
    zeros: EtaZeros | None = None,
    *,
    correction: bool = True,
) -> MomentVector:
    """Bias-adjusted moments for the direction of the mean.

    ``spec_xbar`` must carry ``ref_norm2 = |xbar|^2``.  The result is
    ``(-1)^j / kappa * (C1 + C2)`` where ``C1`` is the known-vector residue sum
    for ``xbar`` and ``C2`` the residue sum of ``z u' / u^(j+1)``.  With
    ``correction=False`` the ``C2`` term is dropped (plain plug-in).
    """
    _check_k(k)
    kappa = _check_scale(kappa_mu, "kappa_mu")
    etas = _zeros(spec_xbar, zeros)
    lam_part, eta_part = _known_a_parts(spec_xbar, k, etas)
    if correction:
        for j in range(1, k + 1):
            eta_part[j - 1] += (-1.0) ** j * float(np.sum(residue_at_eta(spec_xbar, etas, j, "sr-c2")))
    lam_part /= kappa
    eta_part /= kappa
    return MomentVector(lam_part + eta_part, "sharpe", lambda_part=lam_part, eta_part=eta_part)


def estimate_moments_mcc(
    spec_sxy: SampleSpectrum,
    kappa_sigma: float,
    k: int,
    zeros: EtaZeros | None = None,
    *,
    correction: bool = True,
) -> MomentVector:
    """Bias-corrected moments for the cross-covariance direction.

    ``spec_sxy`` is the spectrum of ``S_xx`` with reference ``s_xy / sqrt(s_yy)``
    (so ``ref_norm2 = |s_xy|^2 / s_yy``).  Only the zeros contribute:
    ``(-1)^j / kappa * sum Res((S - 1) u' / (z u^(j+3)), eta_i)``.
    """
    _check_k(k)
    kappa = _check_scale(kappa_sigma, "kappa_sigma")
    etas = _zeros(spec_sxy, zeros)
    if not correction:
        lam_part, eta_part = _known_a_parts(spec_sxy, k, etas)
        lam_part /= kappa
        eta_part /= kappa
        return MomentVector(lam_part + eta_part, "mcc", lambda_part=lam_part, eta_part=eta_part)
    eta_part = np.array(
        [(-1.0) ** j * float(np.sum(residue_at_eta(spec_sxy, etas, j, "mcc"))) for j in range(1, k + 1)]
    )
    eta_part /= kappa
    return MomentVector(eta_part.copy(), "mcc", lambda_part=np.zeros(k), eta_part=eta_part)


def _integrand(spec: SampleSpectrum, kind: str, j: int, z: NDArray[np.complex128]) -> NDArray[np.complex128]:
    um, s = taylor_jets(spec, z, 1)
    u, du = um[:, 0], um[:, 1]
    S = spec.ref_norm2 * s[:, 0]
    if kind in ("known-a", "sr-c1"):
        return z * S * du / u ** (j + 1)
    if kind == "sr-c2":
        return z * du / u ** (j + 1)
    return (S - 1.0) * du / (z * u ** (j + 3))


def contour_oracle(
    spec: SampleSpectrum,
    integrand: str,
    j: int,
    pole: float,
    radius: float | None = None,
    *,
    zeros: EtaZeros | None = None,
    points: int = QUADRATURE_POINTS,
) -> float:
    """Trapezoidal quadrature of ``(1/2 pi i) \\oint f dz`` on a circle around ``pole``.

    Every other pole (eigenvalues, zeros of ``u``, the origin) must lie at
    least ``2 * radius`` away.  Without ``radius`` half that distance is used.
    """
    if integrand not in KINDS:
        raise InvalidInputError(f"unknown integrand kind {integrand!r}")
    _check_order(j)
    etas = _zeros(spec, zeros)
    others = np.r_[spec.distinct[0], etas, 0.0]
    dist = np.abs(others - pole)
    dist = dist[dist > 1e-14 * max(1.0, abs(pole))]
    nearest = float(dist.min()) if dist.size else np.inf
    if radius is None:
        radius = 0.5 * nearest
    if not radius > 0.0 or 2.0 * radius > nearest * (1.0 + 1e-12):
        raise GeometryError(f"circle of radius {float(radius):g} around {float(pole):g} reaches another pole at distance {nearest:g}")
    theta = 2.0 * np.pi * np.arange(points) / points
    dz = radius * np.exp(1j * theta)
    f = _integrand(spec, integrand, j, pole + dz)
    return float(np.mean(f * dz).real)


def truncate_moments(m: MomentVector, a0: float, b0: float, delta: float) -> MomentVector:
    """Clamp moment estimates into the range allowed by Jensen's inequality on ``[a0, b0]``."""
    if not 0.0 < a0 < b0:
        raise InvalidInputError(f"need 0 < a0 < b0, got ({float(a0)!r}, {float(b0)!r})")
    if not delta > 0.0:
        raise InvalidInputError("delta must be positive")
    raw = m.raw_values
    out = np.empty_like(raw)
    out[0] = min(max(raw[0], a0), b0)
    for j in range(2, raw.shape[0] + 1):
        out[j - 1] = min(max(raw[j - 1], out[0] ** j - delta), b0**j)
    return replace(m, values=out, truncated=True, raw=raw.copy())
