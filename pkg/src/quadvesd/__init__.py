"""Estimation of precision-matrix quadratic forms ``a^T Sigma^{-1} a`` when ``p > n``.

The vector spectral distribution of ``Sigma`` in direction ``a`` is recovered
from residue-based moment estimates and an l1 moment-matching linear program;
``tau = int 1/x dF``.  Bias-corrected variants estimate the squared optimal
Sharpe ratio and the squared multiple correlation coefficient.
"""

__version__ = "0.1.0"

from .estimators import (
    EstimatorReport,
    MultipleCorrelationEstimator,
    QuadraticFormEstimator,
    SharpeRatioEstimator,
    VesdSettings,
    estimate_mcc,
    estimate_sharpe,
    estimate_tau,
    estimate_tau_known_a,
    kappa_mu_hat,
    kappa_sigma_hat,
    pseudo_r2_degenerate,
    pseudoinverse_quadratic,
)
from .exceptions import (
    CellAbortedError,
    GeometryError,
    InvalidInputError,
    NumericalDegeneracyError,
    PoleError,
    QuadVesdError,
    SolverStallError,
    UnsupportedOrderError,
    ZeroSignalError,
)
from .residues import (
    MomentVector,
    contour_oracle,
    estimate_moments_known_a,
    estimate_moments_mcc,
    estimate_moments_sharpe,
    residue_at_eta,
    truncate_moments,
)
from .series import TruncatedSeries
from .spectral import (
    EtaZeros,
    SampleSpectrum,
    StieltjesJet,
    find_eta_zeros,
    sample_covariance,
    sample_spectrum,
    spectral_decompose,
    stieltjes_jet,
)
from .vesd import VesdEstimate, VesdGrid, moment_matrix, plugin_functional, solve_moment_lp, wasserstein1

__all__ = [
    "__version__",
    "EstimatorReport",
    "MultipleCorrelationEstimator",
    "QuadraticFormEstimator",
    "SharpeRatioEstimator",
    "VesdSettings",
    "estimate_mcc",
    "estimate_sharpe",
    "estimate_tau",
    "estimate_tau_known_a",
    "kappa_mu_hat",
    "kappa_sigma_hat",
    "pseudo_r2_degenerate",
    "pseudoinverse_quadratic",
    "CellAbortedError",
    "GeometryError",
    "InvalidInputError",
    "NumericalDegeneracyError",
    "PoleError",
    "QuadVesdError",
    "SolverStallError",
    "UnsupportedOrderError",
    "ZeroSignalError",
    "MomentVector",
    "contour_oracle",
    "estimate_moments_known_a",
    "estimate_moments_mcc",
    "estimate_moments_sharpe",
    "residue_at_eta",
    "truncate_moments",
    "TruncatedSeries",
    "EtaZeros",
    "SampleSpectrum",
    "StieltjesJet",
    "find_eta_zeros",
    "sample_covariance",
    "sample_spectrum",
    "spectral_decompose",
    "stieltjes_jet",
    "VesdEstimate",
    "VesdGrid",
    "moment_matrix",
    "plugin_functional",
    "solve_moment_lp",
    "wasserstein1",
]
