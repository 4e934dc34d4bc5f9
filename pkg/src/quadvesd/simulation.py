"""Simulation designs and the replication harness.

Covariance cases, vector settings and data models follow the standard
benchmark designs for this problem:

* case1 ``diag(2.5 + 2 i / p)``, case2 tridiagonal ``2.5`` / ``0.8``,
  case3 ``diag(3, .., 3, 1.5, .., 1.5)``, case4 ``2 * 0.3^|i-j|``;
* dense1/sparse1 (vectors for ``tau``), dense2/sparse2 (means / cross
  covariances for the Sharpe ratio and MCC);
* ``gaussian-iid`` and ``elliptical-gamma`` (``z = xi u / sqrt(p+1)``,
  ``xi ~ Gamma(p, 1)``, ``u`` uniform on the sphere).

Every replication draws from its own Philox stream spawned from the cell
seed, so results do not depend on the number of workers.
"""

from __future__ import annotations

import itertools
import math
import time
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any

import numpy as np
from joblib import Parallel, delayed
from numpy.typing import ArrayLike, NDArray

from .estimators import VesdSettings, estimate_mcc, estimate_sharpe, estimate_tau_known_a, pseudoinverse_quadratic
from .exceptions import CellAbortedError, InvalidInputError, QuadVesdError
from .residues import MAX_MOMENTS
from .vesd import wasserstein1

__all__ = [
    "MODELS",
    "COV_CASES",
    "VECTOR_SETTINGS",
    "TARGETS",
    "ScenarioConfig",
    "BiasVarianceRow",
    "make_covariance",
    "make_vector",
    "covariance_sqrt",
    "generate_sample",
    "population_vesd",
    "scenario_truth",
    "run_replications",
    "aggregate",
    "expand_scenarios",
    "ar1_covariance",
    "pinv_sweep",
    "MAX_FAILURE_SHARE",
]

MODELS = ("gaussian-iid", "elliptical-gamma")
COV_CASES = ("case1", "case2", "case3", "case4", "custom")
VECTOR_SETTINGS = ("dense1", "sparse1", "dense2", "sparse2", "custom")
TARGETS = ("tau", "sharpe", "mcc")
MAX_FAILURE_SHARE = 0.10
DEFAULT_TAU_INTERVAL = (0.3, 5.0)


def make_covariance(case: str, p: int) -> NDArray[np.float64]:
    if p < 2:
        raise InvalidInputError(f"dimension must be at least 2, got {p}")
    i = np.arange(1, p + 1)
    if case == "case1":
        return np.diag(2.5 + 2.0 * i / p)
    if case == "case2":
        S = np.diag(np.full(p, 2.5))
        off = np.arange(p - 1)
        S[off, off + 1] = S[off + 1, off] = 0.8
        return S
    if case == "case3":
        if p % 2:
            raise InvalidInputError(f"case3 needs an even dimension, got {p}")
        return np.diag(np.r_[np.full(p // 2, 3.0), np.full(p // 2, 1.5)])
    if case == "case4":
        return 2.0 * 0.3 ** np.abs(i[:, None] - i[None, :]).astype(np.float64)
    raise InvalidInputError(f"unknown covariance case {case!r}")


def make_vector(setting: str, p: int) -> NDArray[np.float64]:
    if setting == "dense1":
        if p % 2:
            raise InvalidInputError(f"dense1 needs an even dimension, got {p}")
        return np.r_[np.full(p // 2, math.sqrt(0.8 / p)), np.full(p // 2, math.sqrt(1.2 / p))]
    if setting == "sparse1":
        if p < 8:
            raise InvalidInputError(f"sparse1 needs p >= 8, got {p}")
        v = np.zeros(p)
        v[:8] = 1.0 / math.sqrt(8.0)
        return v
    if setting == "dense2":
        return np.full(p, 1.0 / math.sqrt(p))
    if setting == "sparse2":
        if p < 2:
            raise InvalidInputError(f"sparse2 needs p >= 2, got {p}")
        v = np.zeros(p)
        v[0], v[1] = 0.6, 0.8
        return v
    raise InvalidInputError(f"unknown vector setting {setting!r}")


def covariance_sqrt(Sigma: ArrayLike, *, tol: float = 1e-10) -> NDArray[np.float64]:
    """Symmetric square root by eigendecomposition; rejects indefinite input."""
    S = np.asarray(Sigma, dtype=np.float64)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or not np.allclose(S, S.T, rtol=0, atol=1e-12 * max(1.0, np.abs(S).max())):
        raise InvalidInputError("covariance must be a symmetric square matrix")
    lam, V = np.linalg.eigh(S)
    if lam[0] < -tol * max(1.0, lam[-1]):
        raise InvalidInputError(f"covariance is not positive semidefinite (smallest eigenvalue {lam[0]:.3e})")
    return (V * np.sqrt(np.clip(lam, 0.0, None))) @ V.T


def _latent(model: str, n: int, d: int, rng: np.random.Generator) -> NDArray[np.float64]:
    Z = rng.standard_normal((n, d))
    if model == "gaussian-iid":
        return Z
    if model == "elliptical-gamma":
        u = Z / np.linalg.norm(Z, axis=1, keepdims=True)
        xi = rng.gamma(shape=d, scale=1.0, size=n)
        return u * (xi / math.sqrt(d + 1))[:, None]
    raise InvalidInputError(f"unknown data model {model!r}")


def generate_sample(
    model: str,
    Sigma: ArrayLike,
    mu: ArrayLike | None,
    n: int,
    seed,
    *,
    root: NDArray[np.float64] | None = None,
) -> NDArray[np.float64]:
    """``n`` draws of ``mu + Sigma^{1/2} z``; ``seed`` is an int, SeedSequence or Generator.

    ``root`` may carry a precomputed ``Sigma^{1/2}``.
    """
    R = covariance_sqrt(Sigma) if root is None else root
    d = R.shape[0]
    if isinstance(seed, np.random.Generator):
        rng = seed
    else:
        ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
        rng = np.random.Generator(np.random.Philox(ss))
    X = _latent(model, int(n), d, rng) @ R
    if mu is not None:
        X += np.asarray(mu, dtype=np.float64)
    return X


@dataclass(frozen=True)
class ScenarioConfig:
    """One simulation cell."""

    target: str = "tau"
    model: str = "gaussian-iid"
    cov_case: str = "case1"
    vector_setting: str = "dense1"
    n: int = 400
    cn: float = 1.25
    reps: int = 300
    k: int = 4
    h: float | None = None
    delta: float = 0.01
    interval: tuple[float, float] | str | None = None
    stabilized: bool = True
    seed: int = 0
    custom_covariance: tuple | None = field(default=None, repr=False)
    custom_vector: tuple | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        if self.target not in TARGETS:
            raise InvalidInputError(f"unknown target {self.target!r}")
        if self.model not in MODELS:
            raise InvalidInputError(f"unknown data model {self.model!r}")
        if self.cov_case not in COV_CASES:
            raise InvalidInputError(f"unknown covariance case {self.cov_case!r}")
        if self.vector_setting not in VECTOR_SETTINGS:
            raise InvalidInputError(f"unknown vector setting {self.vector_setting!r}")
        if not self.cn > 0.0:
            raise InvalidInputError("cn must be positive")
        if int(self.n) < 3:
            raise InvalidInputError("n must be at least 3")
        if int(self.reps) < 1:
            raise InvalidInputError("reps must be at least 1")
        if not 1 <= int(self.k) <= MAX_MOMENTS:
            raise InvalidInputError(f"k must be in [1, {MAX_MOMENTS}]")
        if self.h is not None and self.h > 1.0 / max(self.n, self.p) * (1 + 1e-12):
            raise InvalidInputError(f"h = {self.h} exceeds 1/max(n, p) = {1.0 / max(self.n, self.p)}")
        if isinstance(self.interval, list):
            object.__setattr__(self, "interval", tuple(self.interval))
        if self.cov_case == "custom" and self.custom_covariance is None:
            raise InvalidInputError("cov_case 'custom' needs custom_covariance")
        if self.vector_setting == "custom" and self.custom_vector is None:
            raise InvalidInputError("vector_setting 'custom' needs custom_vector")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidInputError("seed must be a 64-bit unsigned integer")
        if self.interval is not None and self.interval != "population":
            self.settings(self.interval)  # validates interval/delta

    @property
    def p(self) -> int:
        if self.cov_case == "custom":
            return len(self.custom_covariance)
        return int(round(self.cn * self.n))

    @property
    def cell_id(self) -> str:
        return f"{self.target}-{self.model}-{self.cov_case}-{self.vector_setting}-cn{self.cn:g}-n{self.n}"

    def resolved_interval(self, Sigma: ArrayLike | None = None) -> tuple[float, float] | str:
        """Grid support for this cell.

        ``None`` means ``(0.3, 5)`` for ``tau`` cells and ``"population"`` for
        the others; ``"population"`` is ``[0.8 lambda_min, 1.2 lambda_max]`` of
        the known covariance.
        """
        mode = self.interval
        if mode is None:
            mode = DEFAULT_TAU_INTERVAL if self.target == "tau" else "population"
        if mode != "population":
            return mode
        if Sigma is None:
            raise InvalidInputError("population interval needs the covariance")
        lam = np.linalg.eigvalsh(np.asarray(Sigma, dtype=np.float64))
        return 0.8 * float(lam[0]), 1.2 * float(lam[-1])

    def settings(self, interval: tuple[float, float] | str | None = None) -> VesdSettings:
        if interval is None:
            interval = self.resolved_interval()
        return VesdSettings(int(self.k), interval, self.h, float(self.delta), bool(self.stabilized))

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> "ScenarioConfig":
        names = {f.name for f in fields(cls)}
        extra = set(d) - names
        if extra:
            raise InvalidInputError(f"unknown scenario keys: {sorted(extra)}")
        kw = dict(d)
        for key in ("custom_covariance", "custom_vector"):
            if kw.get(key) is not None:
                kw[key] = tuple(tuple(r) if isinstance(r, list) else r for r in kw[key])
        return cls(**kw)

    def to_dict(self) -> dict[str, Any]:
        d = asdict(self)
        if isinstance(self.interval, tuple):
            d["interval"] = list(self.interval)
        for key in ("custom_covariance", "custom_vector"):
            if d[key] is None:
                del d[key]
            else:
                d[key] = [list(r) if isinstance(r, tuple) else r for r in d[key]]
        return d


def expand_scenarios(entry: dict[str, Any]) -> list[dict[str, Any]]:
    """Cartesian expansion of list-valued sweep keys into single cells."""
    sweep = ("target", "model", "cov_case", "vector_setting", "n", "cn")
    keys = [k for k in sweep if isinstance(entry.get(k), list)]
    if not keys:
        return [dict(entry)]
    out = []
    for combo in itertools.product(*(entry[k] for k in keys)):
        cell = dict(entry)
        cell.update(zip(keys, combo))
        out.append(cell)
    return out


@dataclass
class _Design:
    Sigma: NDArray[np.float64]
    root: NDArray[np.float64]
    mu: NDArray[np.float64] | None
    direction: NDArray[np.float64]
    truth: float
    vesd: tuple[NDArray[np.float64], NDArray[np.float64]]
    settings: VesdSettings | None = None


def population_vesd(Sigma: ArrayLike, a: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Atoms (eigenvalues) and weights ``(a_0^T v_i)^2`` of the population VESD, ``a_0 = a/|a|``."""
    lam, V = np.linalg.eigh(np.asarray(Sigma, dtype=np.float64))
    a = np.asarray(a, dtype=np.float64)
    w = (V.T @ (a / np.linalg.norm(a))) ** 2
    return lam, w / w.sum()


def _vector(cfg: ScenarioConfig, p: int) -> NDArray[np.float64]:
    if cfg.vector_setting == "custom":
        v = np.asarray(cfg.custom_vector, dtype=np.float64)
        if v.shape != (p,):
            raise InvalidInputError(f"custom_vector has length {v.shape}, expected {p}")
        return v
    return make_vector(cfg.vector_setting, p)


def _covariance(cfg: ScenarioConfig, p: int) -> NDArray[np.float64]:
    if cfg.cov_case == "custom":
        return np.asarray(cfg.custom_covariance, dtype=np.float64)
    return make_covariance(cfg.cov_case, p)


def scenario_truth(cfg: ScenarioConfig) -> float:
    """Population target by a direct linear solve against the known covariance."""
    return _design(cfg).truth


def _design(cfg: ScenarioConfig) -> _Design:
    design = _population(cfg)
    block = design.Sigma[1:, 1:] if cfg.target == "mcc" else design.Sigma
    design.settings = cfg.settings(cfg.resolved_interval(block))
    return design


def _population(cfg: ScenarioConfig) -> _Design:
    p = cfg.p
    Sigma = _covariance(cfg, p)
    v = _vector(cfg, p)
    if cfg.target == "tau":
        if abs(np.linalg.norm(v) - 1.0) > 1e-10:
            raise InvalidInputError("the vector for a tau cell must have unit norm")
        truth = float(v @ np.linalg.solve(Sigma, v))
        return _Design(Sigma, covariance_sqrt(Sigma), None, v, truth, population_vesd(Sigma, v))
    if cfg.target == "sharpe":
        truth = float(v @ np.linalg.solve(Sigma, v))
        return _Design(Sigma, covariance_sqrt(Sigma), v, v, truth, population_vesd(Sigma, v))
    # (y, x) joint covariance with sigma_yy = 1
    joint = np.empty((p + 1, p + 1))
    joint[0, 0] = 1.0
    joint[0, 1:] = joint[1:, 0] = v
    joint[1:, 1:] = Sigma
    try:
        root = covariance_sqrt(joint)
    except InvalidInputError as exc:
        raise InvalidInputError(f"joint (y, x) covariance is not PSD for this cross-covariance: {exc}") from exc
    truth = float(v @ np.linalg.solve(Sigma, v))
    return _Design(joint, root, None, v, truth, population_vesd(Sigma, v))


@dataclass(frozen=True)
class BiasVarianceRow:
    cell_id: str
    target: str
    model: str
    cov_case: str
    vector_setting: str
    n: int
    p: int
    cn: float
    reps: int
    successes: int
    failures: int
    truth: float
    mean_estimate: float
    bias: float
    variance: float
    mc_se: float
    negative_moments: int
    mean_lp_residual: float
    mean_w1: float
    variance_flag: str
    wall_time: float = field(default=0.0, compare=False)

    CSV_FIELDS = (
        "cell_id", "target", "model", "cov_case", "vector_setting", "n", "p", "cn", "reps",
        "successes", "failures", "truth", "mean_estimate", "bias", "variance", "mc_se",
        "negative_moments", "mean_lp_residual", "mean_w1", "variance_flag",
    )

    def csv_row(self) -> list[str]:
        out = []
        for name in self.CSV_FIELDS:
            v = getattr(self, name)
            out.append(repr(float(v)) if isinstance(v, float) else str(v))
        return out

    def to_dict(self) -> dict[str, Any]:
        return {name: getattr(self, name) for name in (*self.CSV_FIELDS, "wall_time")}


def _one_replication(cfg: ScenarioConfig, design: _Design, seed_seq: np.random.SeedSequence) -> dict[str, Any]:
    rng = np.random.Generator(np.random.Philox(seed_seq))
    data = generate_sample(cfg.model, design.Sigma, design.mu, cfg.n, rng, root=design.root)
    settings = design.settings
    try:
        if cfg.target == "tau":
            report = estimate_tau_known_a(data, design.direction, settings)
        elif cfg.target == "sharpe":
            report = estimate_sharpe(data, settings)
        else:
            report = estimate_mcc(data[:, 1:], data[:, 0], settings)
    except QuadVesdError as exc:
        return {"ok": False, "error": type(exc).__name__, "message": str(exc)}
    return {
        "ok": True,
        "estimate": float(report.raw_estimate),
        "reported": float(report.estimate),
        "kappa": float(report.kappa),
        "negative_moments": int(report.moments.negative_count),
        "lp_residual": float(report.vesd.residual),
        "w1": wasserstein1(report.vesd, design.vesd),
    }


def _fsum_mean(values: list[float]) -> float:
    return math.fsum(values) / len(values)


def run_replications(cfg: ScenarioConfig, jobs: int = 1) -> tuple[BiasVarianceRow, list[dict[str, Any]]]:
    """Run one cell; returns its summary row and the per-replication records.

    Estimates are aggregated with exactly rounded sums, so the row does not
    depend on replication order or worker count.  Raises
    :class:`CellAbortedError` when more than 10% of replications fail.
    """
    start = time.perf_counter()
    design = _design(cfg)
    streams = np.random.SeedSequence(int(cfg.seed)).spawn(int(cfg.reps))
    if jobs == 1:
        records = [_one_replication(cfg, design, s) for s in streams]
    else:
        records = Parallel(n_jobs=jobs)(delayed(_one_replication)(cfg, design, s) for s in streams)
    for i, rec in enumerate(records):
        rec["replication"] = i
    row = aggregate(cfg, design.truth, records)
    return replace(row, wall_time=time.perf_counter() - start), records


def aggregate(cfg: ScenarioConfig, truth: float, records: list[dict[str, Any]]) -> BiasVarianceRow:
    """Reduce per-replication records to a row.

    Sums are exactly rounded (``math.fsum``), so the row is invariant under
    any reordering of ``records``.
    """
    ok = [r for r in records if r["ok"]]
    failures = len(records) - len(ok)
    if failures > MAX_FAILURE_SHARE * cfg.reps:
        kinds = sorted({r["error"] for r in records if not r["ok"]})
        raise CellAbortedError(f"{cfg.cell_id}: {failures} of {cfg.reps} replications failed ({', '.join(kinds)})")
    if not ok:
        raise CellAbortedError(f"{cfg.cell_id}: no successful replication")
    est = [r["estimate"] for r in ok]
    mean = _fsum_mean(est)
    if len(est) > 1:
        variance = math.fsum((e - mean) ** 2 for e in est) / (len(est) - 1)
        flag = ""
    else:
        variance, flag = 0.0, "single-replication"
    return BiasVarianceRow(
        cell_id=cfg.cell_id,
        target=cfg.target,
        model=cfg.model,
        cov_case=cfg.cov_case,
        vector_setting=cfg.vector_setting,
        n=int(cfg.n),
        p=cfg.p,
        cn=float(cfg.cn),
        reps=int(cfg.reps),
        successes=len(ok),
        failures=failures,
        truth=truth,
        mean_estimate=mean,
        bias=mean - truth,
        variance=variance,
        mc_se=math.sqrt(variance / len(est)),
        negative_moments=sum(r["negative_moments"] for r in ok),
        mean_lp_residual=_fsum_mean([r["lp_residual"] for r in ok]),
        mean_w1=_fsum_mean([r["w1"] for r in ok]),
        variance_flag=flag,
    )


def ar1_covariance(p: int, r: float) -> NDArray[np.float64]:
    i = np.arange(p)
    return float(r) ** np.abs(i[:, None] - i[None, :]).astype(np.float64)


def pinv_sweep(
    p: int,
    n: int,
    rs=(0.3, 0.4, 0.5, 0.6, 0.7),
    reps: int = 1,
    seed: int = 0,
    setting: str = "dense2",
) -> list[dict[str, float]]:
    """``(tau, a^T S^+ a)`` pairs for AR(1) covariances, one per draw.

    No limiting curve is implied; the pairs only show that the pseudoinverse
    statistic does not track ``tau`` when ``p > n``.
    """
    a = make_vector(setting, p)
    rows = []
    streams = np.random.SeedSequence(int(seed)).spawn(len(rs) * int(reps))
    for idx, (r, rep) in enumerate(itertools.product(rs, range(int(reps)))):
        Sigma = ar1_covariance(p, r)
        X = generate_sample("gaussian-iid", Sigma, None, n, streams[idx])
        rows.append(
            {
                "r": float(r),
                "replication": rep,
                "tau": float(a @ np.linalg.solve(Sigma, a)),
                "pinv_quadratic": pseudoinverse_quadratic(X, a),
            }
        )
    return rows
