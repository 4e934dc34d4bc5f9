"""End-to-end estimators of ``a^T Sigma^{-1} a``, the squared optimal Sharpe
ratio and the squared multiple correlation coefficient.

Each pipeline runs

    data -> spectrum of S_n -> zeros of the companion transform
         -> moment estimates -> [truncation] -> l1 moment LP -> kappa * int 1/x dF

and returns an :class:`EstimatorReport`.  The scikit-learn style classes at
the bottom wrap the same functions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray
from sklearn.base import BaseEstimator

from ._validation import UNIT_TOL, check_data_matrix, check_unit_vector, check_vector
from .exceptions import InvalidInputError, ZeroSignalError
from .residues import (
    MAX_MOMENTS,
    MomentVector,
    estimate_moments_known_a,
    estimate_moments_mcc,
    estimate_moments_sharpe,
    truncate_moments,
)
from .spectral import RANK_TOL, SampleSpectrum, find_eta_zeros, sample_covariance, sample_spectrum
from .vesd import VesdEstimate, VesdGrid, plugin_functional, solve_moment_lp

__all__ = [
    "VesdSettings",
    "EstimatorReport",
    "estimate_tau_known_a",
    "estimate_tau",
    "kappa_mu_hat",
    "estimate_sharpe",
    "kappa_sigma_hat",
    "estimate_mcc",
    "pseudo_r2_degenerate",
    "pseudoinverse_quadratic",
    "heuristic_interval",
    "QuadraticFormEstimator",
    "SharpeRatioEstimator",
    "MultipleCorrelationEstimator",
]

ZERO_SIGNAL_TOL = 1e-12


@dataclass(frozen=True)
class VesdSettings:
    """Tuning of the moment/LP stage.

    ``interval`` is the support ``(a0, b0)`` of the grid or ``"heuristic"`` for
    ``[0.8 * eta_psi, 1.2 * lambda_1]`` taken from the sample spectrum.  ``h``
    defaults to ``1/p`` and is always capped at ``1/max(n, p)``.
    """

    k: int = 4
    interval: tuple[float, float] | str = (0.3, 5.0)
    h: float | None = None
    delta: float = 0.01
    stabilized: bool = True
    rule: str = "dantzig"

    def __post_init__(self) -> None:
        if not 1 <= int(self.k) <= MAX_MOMENTS:
            raise InvalidInputError(f"k must be in [1, {MAX_MOMENTS}], got {self.k}")
        if not self.delta > 0.0:
            raise InvalidInputError("delta must be positive")
        if self.h is not None and not self.h > 0.0:
            raise InvalidInputError("h must be positive")
        if isinstance(self.interval, str):
            if self.interval != "heuristic":
                raise InvalidInputError(f"unknown interval mode {self.interval!r}")
        else:
            a0, b0 = (float(v) for v in self.interval)
            if not 0.0 < a0 < b0 < math.inf:
                raise InvalidInputError(f"need 0 < a0 < b0, got ({a0}, {b0})")
            object.__setattr__(self, "interval", (a0, b0))
        if self.rule not in ("bland", "dantzig"):
            raise InvalidInputError(f"unknown pivot rule {self.rule!r}")

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "VesdSettings":
        known = {"k", "interval", "h", "delta", "stabilized", "rule"}
        extra = set(d) - known
        if extra:
            raise InvalidInputError(f"unknown settings keys: {sorted(extra)}")
        kw = dict(d)
        if isinstance(kw.get("interval"), list):
            kw["interval"] = tuple(kw["interval"])
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class EstimatorReport:
    """Result of one pipeline run.  ``estimate == kappa * plugin`` before any clamp."""

    target: str
    estimate: float
    kappa: float
    plugin: float
    moments: MomentVector
    vesd: VesdEstimate
    diagnostics: dict[str, Any] = field(default_factory=dict)

    @property
    def raw_estimate(self) -> float:
        return self.kappa * self.plugin

    def to_dict(self) -> dict[str, Any]:
        return {
            "target": self.target,
            "estimate": float(self.estimate),
            "raw_estimate": float(self.raw_estimate),
            "kappa": float(self.kappa),
            "plugin": float(self.plugin),
            "moments": self.moments.to_dict(),
            "vesd": self.vesd.to_dict(),
            "diagnostics": dict(self.diagnostics),
        }

    def summary(self) -> str:
        d = self.diagnostics
        lines = [
            f"target        {self.target}",
            f"estimate      {self.estimate:.10g}",
            f"kappa         {self.kappa:.10g}",
            f"n, p, c_n     {d.get('n')}, {d.get('p')}, {d.get('cn', float('nan')):.4g}",
            f"moments (raw) {' '.join(f'{v:.6g}' for v in self.moments.raw_values)}",
            f"negative      {self.moments.negative_count}",
            f"LP residual   {self.vesd.residual:.3e}",
        ]
        if self.estimate != self.raw_estimate:
            lines.insert(2, f"raw estimate  {self.raw_estimate:.10g}")
        return "\n".join(lines) + "\n"


def heuristic_interval(spec: SampleSpectrum, etas: NDArray[np.float64]) -> tuple[float, float]:
    """``[0.8 * eta_psi, 1.2 * lambda_1]``; a crude data-driven support guess."""
    return 0.8 * float(etas[-1]), 1.2 * float(spec.lambdas[0])


def _recover(
    spec: SampleSpectrum,
    etas: NDArray[np.float64],
    moments: MomentVector,
    settings: VesdSettings,
) -> tuple[MomentVector, VesdEstimate, tuple[float, float]]:
    if settings.interval == "heuristic":
        a0, b0 = heuristic_interval(spec, etas)
    else:
        a0, b0 = settings.interval
    grid = VesdGrid.for_problem(a0, b0, spec.n, spec.p, settings.h)
    if settings.stabilized:
        moments = truncate_moments(moments, a0, b0, settings.delta)
        if np.any(moments.values == 0.0):
            raise InvalidInputError(f"a truncated moment is exactly zero on ({a0}, {b0}); the ratio objective is undefined")
    est = solve_moment_lp(grid, moments, weighted=settings.stabilized, rule=settings.rule)
    return moments, est, (a0, b0)


def _report(target, kappa, spec, etas, moments, est, interval, extra=None) -> EstimatorReport:
    plugin = plugin_functional(est, "inverse")
    diagnostics = {
        "n": spec.n,
        "p": spec.p,
        "cn": spec.cn,
        "psi": spec.psi,
        "eta_count": int(etas.shape[0]),
        "negative_moments": moments.negative_count,
        "lp_residual": float(est.residual),
        "lp_iterations": int(est.iterations),
        "interval": [float(interval[0]), float(interval[1])],
        "grid_size": est.grid.size,
        "h": est.grid.h,
        "stabilized": bool(est.stabilized),
    }
    if extra:
        diagnostics.update(extra)
    return EstimatorReport(target, kappa * plugin, kappa, plugin, moments, est, diagnostics)


def _settings(settings: VesdSettings | None) -> VesdSettings:
    return VesdSettings() if settings is None else settings


def estimate_tau_known_a(X: ArrayLike, a: ArrayLike, settings: VesdSettings | None = None) -> EstimatorReport:
    """Estimate ``a^T Sigma^{-1} a`` for a known unit vector ``a``; ``kappa = 1``."""
    settings = _settings(settings)
    data = check_data_matrix(X)
    a = check_unit_vector(a, data.shape[1])
    spec = sample_spectrum(data, a).rescaled(1.0)
    zeros = find_eta_zeros(spec)
    etas = zeros.etas
    raw = estimate_moments_known_a(spec, settings.k, zeros)
    moments, est, interval = _recover(spec, etas, raw, settings)
    return _report("tau", 1.0, spec, etas, moments, est, interval)


def estimate_tau(X: ArrayLike, a: ArrayLike, settings: VesdSettings | None = None) -> EstimatorReport:
    """Any nonzero ``a``: ``tau(a) = |a|^2 * tau(a / |a|)``; the report's kappa is ``|a|^2``.

    Vectors already of unit norm (within the unit tolerance) go straight to the
    known-vector pipeline, so their kappa is exactly 1.
    """
    data = check_data_matrix(X)
    a = check_vector(a, data.shape[1], name="vector a")
    norm2 = float(a @ a)
    if norm2 <= 0.0:
        raise InvalidInputError("vector a is zero")
    if abs(math.sqrt(norm2) - 1.0) <= UNIT_TOL:
        return estimate_tau_known_a(data, a, settings)
    unit = estimate_tau_known_a(data, a / math.sqrt(norm2), settings)
    return EstimatorReport(
        "tau", norm2 * unit.plugin, norm2, unit.plugin, unit.moments, unit.vesd, unit.diagnostics
    )


def kappa_mu_hat(X: ArrayLike) -> float:
    """``|sum_{i != j} x_i^T x_j| / (n (n - 1))``."""
    data = check_data_matrix(X)
    n = data.shape[0]
    total = data.sum(axis=0)
    return abs((float(total @ total) - float(np.sum(data * data))) / (n * (n - 1)))


def estimate_sharpe(
    X: ArrayLike,
    settings: VesdSettings | None = None,
    *,
    correction: bool = True,
    direction: ArrayLike | None = None,
    kappa: float | None = None,
) -> EstimatorReport:
    """Estimate ``theta = mu^T Sigma^{-1} mu`` from returns ``X``.

    ``direction`` and ``kappa`` replace ``xbar`` and ``kappa_mu_hat`` (used to
    check the pipeline against the known-vector one); ``correction=False``
    drops the bias term of the adjusted transform.
    """
    settings = _settings(settings)
    data = check_data_matrix(X)
    kappa = kappa_mu_hat(data) if kappa is None else float(kappa)
    if not kappa >= ZERO_SIGNAL_TOL:
        raise ZeroSignalError(f"kappa_mu = {kappa:.3e} is below {ZERO_SIGNAL_TOL:g}; the mean carries no signal")
    ref = data.mean(axis=0) if direction is None else check_vector(direction, data.shape[1], name="direction")
    if float(ref @ ref) <= 0.0:
        raise ZeroSignalError("reference direction is zero")
    spec = sample_spectrum(data, ref)
    zeros = find_eta_zeros(spec)
    etas = zeros.etas
    raw = estimate_moments_sharpe(spec, kappa, settings.k, zeros, correction=correction)
    moments, est, interval = _recover(spec, etas, raw, settings)
    return _report("sharpe", kappa, spec, etas, moments, est, interval, {"correction": bool(correction)})


def _center_response(y: ArrayLike, n: int) -> tuple[NDArray[np.float64], float]:
    y = check_vector(y, n, name="response")
    yc = y - y.mean()
    syy = float(yc @ yc) / (n - 1)
    if not syy > 0.0:
        raise InvalidInputError("response is constant (s_yy = 0)")
    return yc, syy


def kappa_sigma_hat(X: ArrayLike, y: ArrayLike) -> float:
    """U-statistic estimate of ``|sigma_xy|^2 / sigma_yy`` from centred cross-products."""
    data = check_data_matrix(X, min_rows=3)
    n = data.shape[0]
    yc, syy = _center_response(y, n)
    xc = data - data.mean(axis=0)
    cross = xc.T @ yc  # (n - 1) s_xy
    diag = float(np.sum(yc**2 * np.sum(xc * xc, axis=1)))
    return abs((float(cross @ cross) - diag) / (n * (n - 1) * syy))


def estimate_mcc(
    X: ArrayLike,
    y: ArrayLike,
    settings: VesdSettings | None = None,
    *,
    correction: bool = True,
    direction: ArrayLike | None = None,
    kappa: float | None = None,
) -> EstimatorReport:
    """Estimate the squared multiple correlation of ``y`` on the columns of ``X``.

    The reported estimate is clamped to ``[0, 1]``; ``raw_estimate`` keeps the
    unclamped value.  ``direction`` (replacing ``s_xy / sqrt(s_yy)``) and
    ``kappa`` are test hooks as in :func:`estimate_sharpe`.
    """
    settings = _settings(settings)
    data = check_data_matrix(X, min_rows=3)
    n = data.shape[0]
    yc, syy = _center_response(y, n)
    kappa = kappa_sigma_hat(data, y) if kappa is None else float(kappa)
    if not kappa >= ZERO_SIGNAL_TOL:
        raise ZeroSignalError(f"kappa_sigma = {kappa:.3e} is below {ZERO_SIGNAL_TOL:g}; no linear signal in y")
    if direction is None:
        s_xy = (data - data.mean(axis=0)).T @ yc / (n - 1)
        ref = s_xy / math.sqrt(syy)
    else:
        ref = check_vector(direction, data.shape[1], name="direction")
    if float(ref @ ref) <= 0.0:
        raise ZeroSignalError("cross-covariance is zero")
    spec = sample_spectrum(data, ref)
    zeros = find_eta_zeros(spec)
    etas = zeros.etas
    raw = estimate_moments_mcc(spec, kappa, settings.k, zeros, correction=correction)
    moments, est, interval = _recover(spec, etas, raw, settings)
    report = _report("mcc", kappa, spec, etas, moments, est, interval, {"correction": bool(correction)})
    clamped = min(max(report.estimate, 0.0), 1.0)
    report.diagnostics["clamped"] = clamped != report.estimate
    return EstimatorReport(
        "mcc", clamped, report.kappa, report.plugin, report.moments, report.vesd, report.diagnostics
    )


def _pinv(S: NDArray[np.float64]) -> NDArray[np.float64]:
    return np.linalg.pinv(S, rcond=RANK_TOL, hermitian=True)


def pseudo_r2_degenerate(X: ArrayLike, y: ArrayLike) -> float:
    """In-sample ``s_xy^T S_xx^+ s_xy / s_yy``, which is identically 1 once ``p > n``."""
    data = check_data_matrix(X, min_rows=2)
    n, p = data.shape
    if p <= n:
        raise InvalidInputError(f"pseudo-R^2 degeneracy needs p > n, got p={p}, n={n}")
    yc, syy = _center_response(y, n)
    xc = data - data.mean(axis=0)
    s_xy = xc.T @ yc / (n - 1)
    return float(s_xy @ _pinv(sample_covariance(data)) @ s_xy) / syy


def pseudoinverse_quadratic(X: ArrayLike, a: ArrayLike) -> float:
    """``a^T S_n^+ a`` with the Moore-Penrose inverse (singular values below ``1e-10 * max`` dropped)."""
    data = check_data_matrix(X)
    a = check_vector(a, data.shape[1], name="vector a")
    return float(a @ _pinv(sample_covariance(data)) @ a)


class _VesdEstimatorMixin:
    def _settings(self) -> VesdSettings:
        interval = self.interval if isinstance(self.interval, str) else tuple(self.interval)
        return VesdSettings(self.k, interval, self.h, self.delta, self.stabilized, self.rule)


class QuadraticFormEstimator(_VesdEstimatorMixin, BaseEstimator):
    """Estimator of ``a^T Sigma^{-1} a`` for a fixed vector ``a``.

    ``fit(X)`` sets ``tau_`` and ``report_``.
    """

    def __init__(self, a=None, k=4, interval=(0.3, 5.0), h=None, delta=0.01, stabilized=True, rule="dantzig"):
        self.a = a
        self.k = k
        self.interval = interval
        self.h = h
        self.delta = delta
        self.stabilized = stabilized
        self.rule = rule

    def fit(self, X, y=None):
        if self.a is None:
            raise InvalidInputError("the vector a must be set before fitting")
        self.report_ = estimate_tau(X, self.a, self._settings())
        self.tau_ = self.report_.estimate
        self.n_features_in_ = self.report_.diagnostics["p"]
        return self


class SharpeRatioEstimator(_VesdEstimatorMixin, BaseEstimator):
    """Squared optimal Sharpe ratio ``mu^T Sigma^{-1} mu`` from a return panel."""

    def __init__(self, k=4, interval=(0.3, 5.0), h=None, delta=0.01, stabilized=True, rule="dantzig"):
        self.k = k
        self.interval = interval
        self.h = h
        self.delta = delta
        self.stabilized = stabilized
        self.rule = rule

    def fit(self, X, y=None):
        self.report_ = estimate_sharpe(X, self._settings())
        self.theta_ = self.report_.estimate
        self.kappa_ = self.report_.kappa
        self.n_features_in_ = self.report_.diagnostics["p"]
        return self


class MultipleCorrelationEstimator(_VesdEstimatorMixin, BaseEstimator):
    """Squared multiple correlation of ``y`` on ``X``; ``rho2_`` is clamped to [0, 1]."""

    def __init__(self, k=4, interval=(0.3, 5.0), h=None, delta=0.01, stabilized=True, rule="dantzig"):
        self.k = k
        self.interval = interval
        self.h = h
        self.delta = delta
        self.stabilized = stabilized
        self.rule = rule

    def fit(self, X, y):
        self.report_ = estimate_mcc(X, y, self._settings())
        self.rho2_ = self.report_.estimate
        self.rho2_raw_ = self.report_.raw_estimate
        self.kappa_ = self.report_.kappa
        self.n_features_in_ = self.report_.diagnostics["p"]
        return self
