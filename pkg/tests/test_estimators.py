import math

import numpy as np
import pytest
from sklearn.base import clone

from quadvesd.estimators import (
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
from quadvesd.exceptions import InvalidInputError, NumericalDegeneracyError, ZeroSignalError
from quadvesd.simulation import ar1_covariance, covariance_sqrt, generate_sample
from quadvesd.vesd import plugin_functional

FAST = VesdSettings(k=4, h=0.01)


def _sample(rng, n=40, p=60, mu=None):
    X = rng.standard_normal((n, p)) * np.sqrt(np.linspace(1.0, 3.0, p))
    return X if mu is None else X + mu


# --- settings --------------------------------------------------------------


def test_settings_validation():
    with pytest.raises(InvalidInputError):
        VesdSettings(k=0)
    with pytest.raises(InvalidInputError):
        VesdSettings(interval=(2.0, 1.0))
    with pytest.raises(InvalidInputError):
        VesdSettings(interval="quest")
    with pytest.raises(InvalidInputError):
        VesdSettings(rule="steepest")
    s = VesdSettings.from_dict({"k": 3, "interval": [0.5, 4.0], "delta": 0.02})
    assert s.k == 3 and tuple(s.interval) == (0.5, 4.0) and s.delta == 0.02


# --- tau -------------------------------------------------------------------


def test_tau_report_invariants(rng):
    X = _sample(rng)
    a = np.ones(60) / math.sqrt(60)
    rep = estimate_tau_known_a(X, a, FAST)
    assert rep.kappa == 1.0
    assert rep.estimate == rep.kappa * plugin_functional(rep.vesd, "inverse")
    assert rep.diagnostics["psi"] == 39 and rep.diagnostics["p"] == 60
    assert 1 / 5.0 <= rep.estimate <= 1 / 0.3
    d = rep.to_dict()
    assert d["estimate"] == rep.estimate and d["moments"]["truncated"] is not None
    assert "LP residual" in rep.summary()


def test_tau_scaling_identity(rng):
    X = _sample(rng)
    a0 = rng.standard_normal(60)
    a0 /= np.linalg.norm(a0)
    unit = estimate_tau_known_a(X, a0, FAST)
    for c in (0.5, 3.0, -2.0):
        scaled = estimate_tau(X, c * a0, FAST)
        assert scaled.kappa == pytest.approx(c * c, rel=1e-15)
        assert scaled.estimate == pytest.approx(c * c * unit.estimate, rel=1e-12)


def test_tau_naive_and_heuristic_interval(rng):
    X = _sample(rng)
    a = np.ones(60) / math.sqrt(60)
    naive = estimate_tau_known_a(X, a, VesdSettings(stabilized=False, h=0.01))
    assert not naive.vesd.stabilized and not naive.moments.truncated
    heur = estimate_tau_known_a(X, a, VesdSettings(interval="heuristic", h=0.01))
    lo, hi = heur.diagnostics["interval"]
    assert 0 < lo < hi
    assert 1 / hi - 1e-12 <= heur.estimate <= 1 / lo + 1e-12


def test_tau_errors(rng):
    with pytest.raises(NumericalDegeneracyError):
        estimate_tau(np.ones((10, 20)), np.ones(20))
    X = _sample(rng)
    with pytest.raises(InvalidInputError):
        estimate_tau_known_a(X, np.ones(60))
    with pytest.raises(InvalidInputError):
        estimate_tau(X, np.zeros(60))
    with pytest.raises(InvalidInputError):
        estimate_tau(X[:1], np.ones(60))


# --- kappa_mu --------------------------------------------------------------


def test_kappa_mu_two_rows():
    x1, x2 = np.array([1.0, 2.0, -1.0]), np.array([0.5, -3.0, 2.0])
    assert kappa_mu_hat(np.vstack([x1, x2])) == pytest.approx(abs(x1 @ x2))


def test_kappa_mu_constant_rows():
    mu = np.array([0.3, -1.2, 2.0])
    assert kappa_mu_hat(np.tile(mu, (7, 1))) == pytest.approx(mu @ mu)


def test_kappa_mu_double_sum(rng):
    X = rng.standard_normal((6, 4))
    n = 6
    total = sum(X[i] @ X[j] for i in range(n) for j in range(n) if i != j)
    assert kappa_mu_hat(X) == pytest.approx(abs(total) / (n * (n - 1)), rel=1e-12)


def test_kappa_mu_monte_carlo(rng):
    # unbiased for |mu|^2 away from zero; the absolute value's bias fades with n at mu = 0
    mu = np.full(5, 0.4)
    draws = [kappa_mu_hat(rng.standard_normal((20, 5)) + mu) for _ in range(10_000)]
    se = np.std(draws) / 100
    assert abs(np.mean(draws) - mu @ mu) < 4 * se
    small = np.mean([kappa_mu_hat(rng.standard_normal((20, 5))) for _ in range(10_000)])
    large = np.mean([kappa_mu_hat(rng.standard_normal((200, 5))) for _ in range(2_000)])
    assert large < small / 5


def test_sharpe_zero_signal(rng):
    with pytest.raises(ZeroSignalError):
        estimate_sharpe(np.zeros((5, 8)))
    # mutually orthogonal rows: every cross product vanishes
    with pytest.raises(ZeroSignalError):
        estimate_sharpe(np.eye(3, 6) * np.array([1.0, 2.0, 3.0])[:, None])


# --- correction hooks ------------------------------------------------------


def test_sharpe_reduces_to_known_vector(rng):
    mu = np.linspace(0.1, 0.3, 60)
    X = _sample(rng, mu=mu)
    ref = estimate_tau(X, mu, FAST)
    hooked = estimate_sharpe(X, FAST, correction=False, direction=mu, kappa=float(mu @ mu))
    assert hooked.estimate == pytest.approx(ref.estimate, rel=1e-10)
    assert hooked.diagnostics["correction"] is False


def test_mcc_reduces_to_known_vector(rng):
    X = _sample(rng, n=50, p=60)
    y = X[:, 0] + rng.standard_normal(50)
    v = np.linspace(0.2, 1.0, 60)
    ref = estimate_tau(X, v, FAST)
    hooked = estimate_mcc(X, y, FAST, correction=False, direction=v, kappa=float(v @ v))
    assert hooked.raw_estimate == pytest.approx(ref.estimate, rel=1e-10)


def test_sharpe_report(rng):
    X = _sample(rng, n=60, mu=np.full(60, 0.3))
    rep = estimate_sharpe(X, FAST)
    assert rep.target == "sharpe"
    assert rep.kappa == kappa_mu_hat(X)
    assert rep.estimate == rep.kappa * rep.plugin
    assert rep.diagnostics["correction"] is True


# --- kappa_sigma / mcc -----------------------------------------------------


def test_kappa_sigma_double_sum():
    X = np.array([[1.0, 2.0], [0.0, -1.0], [3.0, 0.5]])
    y = np.array([1.0, -2.0, 0.5])
    n = 3
    xc = X - X.mean(0)
    yc = y - y.mean()
    syy = yc @ yc / (n - 1)
    total = sum(yc[i] * yc[j] * (xc[i] @ xc[j]) for i in range(n) for j in range(n) if i != j)
    assert kappa_sigma_hat(X, y) == pytest.approx(abs(total) / (n * (n - 1) * syy), rel=1e-12)


def test_kappa_sigma_errors(rng):
    X = rng.standard_normal((10, 4))
    with pytest.raises(InvalidInputError):
        kappa_sigma_hat(X, np.ones(10))
    with pytest.raises(InvalidInputError):
        kappa_sigma_hat(X[:2], np.arange(2.0))
    with pytest.raises(InvalidInputError):
        kappa_sigma_hat(X, np.ones(9))


def test_kappa_sigma_monte_carlo(rng):
    vals = []
    for _ in range(100):
        X = rng.standard_normal((800, 50))
        vals.append(kappa_sigma_hat(X, X[:, 0]))
    assert abs(np.mean(vals) - 1.0) < 0.1


def test_mcc_clamps_and_keeps_raw(rng):
    X = _sample(rng, n=50, p=60)
    y = X[:, :3].sum(axis=1) + 0.1 * rng.standard_normal(50)
    rep = estimate_mcc(X, y, FAST)
    assert 0.0 <= rep.estimate <= 1.0
    assert rep.diagnostics["clamped"] == (rep.estimate != rep.raw_estimate)
    # a large forced scale pushes the raw value above one
    big = estimate_mcc(X, y, FAST, kappa=50.0)
    assert big.raw_estimate > 1.0 and big.estimate == 1.0 and big.diagnostics["clamped"]


@pytest.mark.slow
def test_mcc_independent_response_is_small():
    # rho^2 = 0: kappa_sigma_hat is O(sqrt(p)/n) and the plug-in sits near 1/a0
    rng = np.random.default_rng(11)

    def mean_estimate(n, reps):
        vals = []
        for _ in range(reps):
            X = rng.standard_normal((n, int(1.25 * n)))
            vals.append(estimate_mcc(X, rng.standard_normal(n)).raw_estimate)
        return np.mean(vals)

    coarse, fine = mean_estimate(200, 60), mean_estimate(800, 20)
    assert 0.0 <= fine < 0.2
    assert fine < coarse


def test_mcc_zero_signal(rng):
    X = rng.standard_normal((10, 4))
    y = rng.standard_normal(10)
    with pytest.raises(ZeroSignalError):
        estimate_mcc(X, y, kappa=0.0)
    with pytest.raises(ZeroSignalError):
        estimate_mcc(X, y, direction=np.zeros(4), kappa=1.0)


# --- pseudoinverse diagnostics --------------------------------------------


def test_pseudo_r2_is_one(rng):
    for _ in range(100):
        n = int(rng.integers(3, 30))
        p = n + int(rng.integers(1, 30))
        X = rng.standard_normal((n, p)) * rng.uniform(0.2, 3.0, size=p)
        y = rng.standard_normal(n)
        assert pseudo_r2_degenerate(X, y) == pytest.approx(1.0, abs=1e-10)


def test_pseudo_r2_projector_identity(rng):
    n, p = 12, 30
    X = rng.standard_normal((n, p))
    y = rng.standard_normal(n)
    xc = X - X.mean(0)
    yc = y - y.mean()
    beta = np.linalg.lstsq(xc, yc, rcond=None)[0]
    np.testing.assert_allclose(xc @ beta, yc, atol=1e-10)


def test_pseudo_r2_wrong_regime(rng):
    with pytest.raises(InvalidInputError):
        pseudo_r2_degenerate(rng.standard_normal((20, 5)), rng.standard_normal(20))


def test_pinv_full_rank(rng):
    X = rng.standard_normal((50, 5))
    a = rng.standard_normal(5)
    S = np.cov(X, rowvar=False)
    assert pseudoinverse_quadratic(X, a) == pytest.approx(a @ np.linalg.solve(S, a), rel=1e-10)


def test_pinv_rank_one():
    v = np.array([0.6, 0.0, 0.8])
    t = 1.5
    X = np.vstack([t * v, -t * v])
    a = np.array([1.0, 2.0, 0.5])
    assert pseudoinverse_quadratic(X, a) == pytest.approx((a @ v) ** 2 / (2 * t * t), rel=1e-10)


# --- sklearn shape ---------------------------------------------------------


def test_sklearn_estimators(rng):
    X = _sample(rng, n=60, mu=np.full(60, 0.2))
    a = np.ones(60)
    est = QuadraticFormEstimator(a=a, h=0.01)
    assert est.fit(X) is est
    assert est.tau_ == est.report_.estimate and est.n_features_in_ == 60
    params = clone(est).get_params()
    assert params["h"] == 0.01 and params["k"] == 4
    sr = SharpeRatioEstimator(h=0.01).fit(X)
    assert sr.theta_ == sr.report_.estimate and sr.kappa_ > 0
    y = X[:, 0] + rng.standard_normal(60)
    mc = MultipleCorrelationEstimator(h=0.01).fit(X, y)
    assert 0 <= mc.rho2_ <= 1 and mc.rho2_raw_ == mc.report_.raw_estimate
    with pytest.raises(InvalidInputError):
        QuadraticFormEstimator().fit(X)


# --- Monte Carlo -----------------------------------------------------------


@pytest.mark.slow
def test_scaled_identity_monte_carlo():
    c, n, p, reps = 2.0, 800, 1000, 100
    a = np.r_[1.0, np.zeros(p - 1)]
    root = math.sqrt(c) * np.eye(p)
    vals = [
        estimate_tau_known_a(generate_sample("gaussian-iid", None, None, n, 300 + r, root=root), a).estimate
        for r in range(reps)
    ]
    assert abs(np.mean(vals) - 1 / c) < 0.1


def test_ar1_pinv_pairs(rng):
    p, n = 200, 100
    a = np.ones(p) / math.sqrt(p)
    for r in (0.3, 0.5, 0.7):
        Sigma = ar1_covariance(p, r)
        X = generate_sample("gaussian-iid", Sigma, None, n, int(10 * r), root=covariance_sqrt(Sigma))
        tau = a @ np.linalg.solve(Sigma, a)
        stat = pseudoinverse_quadratic(X, a)
        assert np.isfinite(stat) and stat > 0 and tau > 0
