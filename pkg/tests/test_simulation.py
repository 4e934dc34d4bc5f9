import math
import random

import numpy as np
import pytest

from quadvesd.exceptions import CellAbortedError, InvalidInputError
from quadvesd.simulation import (
    ScenarioConfig,
    aggregate,
    ar1_covariance,
    covariance_sqrt,
    expand_scenarios,
    generate_sample,
    make_covariance,
    make_vector,
    pinv_sweep,
    population_vesd,
    run_replications,
    scenario_truth,
)

SMALL = dict(n=40, cn=1.25, reps=4, seed=3)


# --- designs ---------------------------------------------------------------


def test_covariance_cases():
    np.testing.assert_array_equal(make_covariance("case1", 4), np.diag([3.0, 3.5, 4.0, 4.5]))
    np.testing.assert_array_equal(make_covariance("case2", 3), [[2.5, 0.8, 0.0], [0.8, 2.5, 0.8], [0.0, 0.8, 2.5]])
    np.testing.assert_array_equal(make_covariance("case3", 4), np.diag([3.0, 3.0, 1.5, 1.5]))
    np.testing.assert_allclose(make_covariance("case4", 2), [[2.0, 0.6], [0.6, 2.0]], rtol=1e-15)


@pytest.mark.parametrize("case", ["case1", "case2", "case3", "case4"])
def test_covariance_positive_definite(case):
    S = make_covariance(case, 50)
    np.testing.assert_array_equal(S, S.T)
    assert np.linalg.eigvalsh(S)[0] > 0


def test_covariance_errors():
    with pytest.raises(InvalidInputError):
        make_covariance("case3", 5)
    with pytest.raises(InvalidInputError):
        make_covariance("case1", 1)
    with pytest.raises(InvalidInputError):
        make_covariance("case9", 4)


def test_vector_settings():
    np.testing.assert_allclose(make_vector("dense2", 4), [0.5] * 4)
    np.testing.assert_allclose(make_vector("sparse2", 5), [0.6, 0.8, 0, 0, 0])
    np.testing.assert_allclose(make_vector("dense1", 4), np.sqrt([0.2, 0.2, 0.3, 0.3]))
    np.testing.assert_allclose(make_vector("sparse1", 10)[:8], 1 / math.sqrt(8))
    for setting in ("dense1", "sparse1", "dense2", "sparse2"):
        assert np.linalg.norm(make_vector(setting, 16)) == pytest.approx(1.0, abs=1e-14)


def test_vector_errors():
    with pytest.raises(InvalidInputError):
        make_vector("dense1", 5)
    with pytest.raises(InvalidInputError):
        make_vector("sparse1", 7)
    with pytest.raises(InvalidInputError):
        make_vector("other", 4)


# --- sampling --------------------------------------------------------------


def test_gaussian_norm_identity():
    X = generate_sample("gaussian-iid", np.eye(20), None, 10_000, 1)
    assert np.mean(np.sum(X**2, axis=1) / 20) == pytest.approx(1.0, rel=0.02)


def test_elliptical_norm_identity():
    # |z|^2 = xi^2 / (p + 1) and E xi^2 = p (p + 1)
    p = 20
    X = generate_sample("elliptical-gamma", np.eye(p), None, 10_000, 2)
    assert np.mean(np.sum(X**2, axis=1)) == pytest.approx(p, rel=0.02)
    # second moments still match Sigma
    Sigma = make_covariance("case4", 6)
    Y = generate_sample("elliptical-gamma", Sigma, None, 40_000, 3)
    np.testing.assert_allclose(Y.T @ Y / 40_000, Sigma, atol=0.06)


def test_mean_shift_and_determinism():
    mu = np.arange(5.0)
    A = generate_sample("gaussian-iid", np.eye(5), mu, 50, 9)
    B = generate_sample("gaussian-iid", np.eye(5), mu, 50, 9)
    np.testing.assert_array_equal(A, B)
    C = generate_sample("gaussian-iid", np.eye(5), mu, 50, np.random.SeedSequence(9))
    np.testing.assert_array_equal(A, C)
    assert not np.array_equal(A, generate_sample("gaussian-iid", np.eye(5), mu, 50, 10))
    assert np.abs(A.mean(0) - mu).max() < 0.6


def test_sampling_errors():
    with pytest.raises(InvalidInputError):
        covariance_sqrt(np.array([[1.0, 2.0], [2.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        covariance_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))
    with pytest.raises(InvalidInputError):
        generate_sample("student", np.eye(2), None, 5, 0)


def test_square_root_squares_back():
    S = make_covariance("case2", 30)
    R = covariance_sqrt(S)
    np.testing.assert_allclose(R @ R, S, atol=1e-12)


# --- scenarios -------------------------------------------------------------


def test_scenario_validation():
    with pytest.raises(InvalidInputError):
        ScenarioConfig(reps=0)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(k=9)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(cn=0.0)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(n=100, cn=1.25, h=0.1)
    with pytest.raises(InvalidInputError):
        ScenarioConfig(interval=(5.0, 0.3))
    with pytest.raises(InvalidInputError):
        ScenarioConfig.from_dict({"target": "tau", "colour": "red"})
    with pytest.raises(InvalidInputError):
        ScenarioConfig(cov_case="custom")


def test_scenario_round_trip():
    cfg = ScenarioConfig(target="sharpe", cov_case="case3", vector_setting="dense2", n=80, cn=1.5, interval=[0.5, 4.0])
    assert cfg.p == 120
    assert cfg.interval == (0.5, 4.0)
    assert ScenarioConfig.from_dict(cfg.to_dict()) == cfg
    assert cfg.cell_id == "sharpe-gaussian-iid-case3-dense2-cn1.5-n80"


def test_expand_scenarios():
    cells = expand_scenarios(
        {"target": "tau", "cov_case": ["case1", "case2"], "vector_setting": ["dense1", "sparse1"], "n": [40, 80, 160]}
    )
    assert len(cells) == 12
    assert len({(c["cov_case"], c["vector_setting"], c["n"]) for c in cells}) == 12
    assert expand_scenarios({"n": 40}) == [{"n": 40}]


def test_truth_by_direct_solve():
    cfg = ScenarioConfig(cov_case="case1", vector_setting="dense1", n=40)
    v = make_vector("dense1", 50)
    assert scenario_truth(cfg) == pytest.approx(np.sum(v**2 / np.diag(make_covariance("case1", 50))), rel=1e-14)
    mcc = ScenarioConfig(target="mcc", cov_case="case4", vector_setting="dense2", n=40)
    S = make_covariance("case4", 50)
    d = make_vector("dense2", 50)
    assert scenario_truth(mcc) == pytest.approx(d @ np.linalg.inv(S) @ d, rel=1e-12)


def test_population_interval():
    cfg = ScenarioConfig(target="sharpe", cov_case="case3", vector_setting="dense2", n=40)
    assert cfg.resolved_interval(make_covariance("case3", 50)) == pytest.approx((1.2, 3.6))
    assert ScenarioConfig(n=40).resolved_interval() == (0.3, 5.0)
    with pytest.raises(InvalidInputError):
        cfg.resolved_interval()


def test_population_vesd():
    atoms, weights = population_vesd(np.diag([1.0, 2.0, 4.0]), [0.0, 3.0, 4.0])
    np.testing.assert_allclose(atoms, [1.0, 2.0, 4.0])
    np.testing.assert_allclose(weights, [0.0, 0.36, 0.64], atol=1e-15)


def test_mcc_joint_must_be_psd():
    cfg = ScenarioConfig(
        target="mcc",
        cov_case="custom",
        vector_setting="custom",
        n=10,
        custom_covariance=tuple(map(tuple, np.eye(3))),
        custom_vector=(1.0, 1.0, 1.0),
    )
    with pytest.raises(InvalidInputError, match="joint"):
        scenario_truth(cfg)


def test_tau_cell_needs_unit_vector():
    cfg = ScenarioConfig(
        cov_case="custom",
        vector_setting="custom",
        n=10,
        custom_covariance=tuple(map(tuple, np.eye(3))),
        custom_vector=(1.0, 1.0, 0.0),
    )
    with pytest.raises(InvalidInputError):
        scenario_truth(cfg)


# --- replications and aggregation -----------------------------------------


@pytest.mark.parametrize("target,vector", [("tau", "dense1"), ("sharpe", "dense2"), ("mcc", "dense2")])
def test_run_replications_row(target, vector):
    cfg = ScenarioConfig(target=target, cov_case="case1", vector_setting=vector, **SMALL)
    row, records = run_replications(cfg)
    assert row.successes + row.failures == 4 == len(records)
    assert row.variance >= 0.0 and row.bias == row.mean_estimate - row.truth
    assert 0 <= row.negative_moments <= cfg.reps * cfg.k
    assert row.wall_time > 0
    assert [r["replication"] for r in records] == [0, 1, 2, 3]
    again, _ = run_replications(cfg)
    assert again == row


def test_single_replication_flag():
    row, _ = run_replications(ScenarioConfig(reps=1, n=40, seed=5))
    assert row.variance == 0.0 and row.variance_flag == "single-replication"


def _records(estimates, failures=0):
    recs = [
        {"ok": True, "estimate": e, "negative_moments": i % 2, "lp_residual": 1e-3 * i, "w1": 0.1 * e}
        for i, e in enumerate(estimates)
    ]
    recs += [{"ok": False, "error": "SolverStallError", "message": ""} for _ in range(failures)]
    return recs


def test_aggregate_permutation_invariant():
    cfg = ScenarioConfig(n=40, reps=50)
    r = np.random.default_rng(0)
    recs = _records(list(r.standard_normal(50) * 1e3 + r.uniform(0, 1e-8, 50)))
    base = aggregate(cfg, 0.5, recs)
    shuffled = list(recs)
    for s in range(5):
        random.Random(s).shuffle(shuffled)
        assert aggregate(cfg, 0.5, shuffled) == base


def test_aggregate_statistics():
    cfg = ScenarioConfig(n=40, reps=4)
    row = aggregate(cfg, 1.0, _records([1.0, 2.0, 3.0, 4.0]))
    assert row.mean_estimate == 2.5 and row.bias == 1.5
    assert row.variance == pytest.approx(5 / 3)
    assert row.mc_se == pytest.approx(math.sqrt(5 / 12))
    assert row.negative_moments == 2


def test_failure_threshold():
    cfg = ScenarioConfig(n=40, reps=10)
    row = aggregate(cfg, 1.0, _records([1.0] * 9, failures=1))
    assert row.failures == 1 and row.successes == 9
    with pytest.raises(CellAbortedError):
        aggregate(cfg, 1.0, _records([1.0] * 8, failures=2))
    with pytest.raises(CellAbortedError):
        aggregate(ScenarioConfig(n=40, reps=1), 1.0, _records([], failures=1))


def test_failed_replications_are_recorded(monkeypatch):
    import quadvesd.simulation as sim
    from quadvesd.exceptions import SolverStallError

    real = sim.estimate_tau_known_a
    calls = {"n": 0}

    def flaky(*args, **kwargs):
        calls["n"] += 1
        if calls["n"] == 2:
            raise SolverStallError("stalled")
        return real(*args, **kwargs)

    monkeypatch.setattr(sim, "estimate_tau_known_a", flaky)
    row, records = run_replications(ScenarioConfig(n=40, reps=10, seed=1))
    assert row.failures == 1 and not records[1]["ok"] and records[1]["error"] == "SolverStallError"


def test_jobs_do_not_change_results():
    cfg = ScenarioConfig(target="tau", cov_case="case2", vector_setting="dense1", n=40, reps=6, seed=17)
    serial, rec1 = run_replications(cfg, jobs=1)
    parallel, rec2 = run_replications(cfg, jobs=2)
    assert serial == parallel
    assert [r["estimate"] for r in rec1] == [r["estimate"] for r in rec2]
    assert serial.csv_row() == parallel.csv_row()


# --- pseudoinverse sweep ---------------------------------------------------


def test_ar1_covariance():
    np.testing.assert_allclose(ar1_covariance(3, 0.5), [[1, 0.5, 0.25], [0.5, 1, 0.5], [0.25, 0.5, 1]])


def test_pinv_sweep_rows():
    rows = pinv_sweep(p=40, n=20, rs=(0.3, 0.7), reps=2, seed=4)
    assert len(rows) == 4
    assert {r["r"] for r in rows} == {0.3, 0.7}
    assert all(r["tau"] > 0 and r["pinv_quadratic"] > 0 for r in rows)
    assert rows == pinv_sweep(p=40, n=20, rs=(0.3, 0.7), reps=2, seed=4)
