"""Command line front end.

    quadvesd tau      --data X.csv --vector a.csv [--config c.json] --out DIR
    quadvesd sharpe   --data R.csv [--config c.json] --out DIR
    quadvesd mcc      --data XY.csv --response-col 0 [--config c.json] --out DIR
    quadvesd diagnose-pinv (--data X.csv --vector a.csv | --config sweep.json) --out DIR
    quadvesd simulate --config batch.json --out DIR [--seed S] [--reps R] [--jobs J]

Every run leaves ``DIR/manifest.json``, also when it fails.  Outputs are only
written once the computation has succeeded.  Exit codes: 0 success,
2 input error, 3 numerical degeneracy, 4 solver stall, 5 zero signal.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import platform
import sys
import time
from pathlib import Path
from typing import Any

import numpy as np

from . import __version__
from .estimators import (
    VesdSettings,
    estimate_mcc,
    estimate_sharpe,
    estimate_tau,
    pseudoinverse_quadratic,
)
from .exceptions import CellAbortedError, InvalidInputError, QuadVesdError
from .io import read_csv, read_matrix
from .simulation import BiasVarianceRow, ScenarioConfig, expand_scenarios, pinv_sweep, run_replications

JOBS_ENV = "QUADVESD_JOBS"
EXIT_INPUT = 2


def config_hash(config: Any) -> str:
    """SHA-256 of the canonical JSON form (sorted keys, no whitespace)."""
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"), ensure_ascii=True)
    return hashlib.sha256(canon.encode()).hexdigest()


def _versions() -> dict[str, str]:
    import sklearn

    return {
        "quadvesd": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scikit-learn": sklearn.__version__,
    }


def _load_json(path: str | None) -> dict[str, Any]:
    if path is None:
        return {}
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"config {path} is not valid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise InvalidInputError(f"config {path} must hold a JSON object")
    return data


def _csv_text(rows: list[list[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerows(rows)
    return buf.getvalue()


def _json_text(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


class _Run:
    """Collects outputs in memory, then commits them together with the manifest."""

    def __init__(self, command: str, argv: list[str], out: Path):
        self.command = command
        self.argv = argv
        self.out = out
        self.files: dict[str, str] = {}
        self.config: Any = None
        self.seed: int | None = None
        self.start = time.perf_counter()

    def add(self, name: str, text: str) -> None:
        self.files[name] = text

    def _write(self, name: str, text: str) -> None:
        path = self.out / name
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(path.name + ".tmp")
        tmp.write_text(text)
        os.replace(tmp, path)

    def commit(self, error: BaseException | None = None, exit_code: int = 0) -> None:
        self.out.mkdir(parents=True, exist_ok=True)
        written = []
        if error is None:
            for name, text in self.files.items():
                self._write(name, text)
                written.append(name)
        manifest = {
            "command": self.command,
            "argv": self.argv,
            "config_hash": config_hash(self.config) if self.config is not None else None,
            "seed": self.seed,
            "artifacts": sorted(written),
            "versions": _versions(),
            "wall_time": time.perf_counter() - self.start,
            "status": "ok" if error is None else "error",
            "exit_code": exit_code,
        }
        if error is not None:
            manifest["error"] = {"class": type(error).__name__, "message": str(error)}
        self._write("manifest.json", _json_text(manifest))


def _read_vector(path: str) -> np.ndarray:
    arr, _ = read_csv(path)
    if 1 not in arr.shape:
        raise InvalidInputError(f"{path}: expected a single row or column, got shape {arr.shape}")
    return arr.ravel()


def _settings(cfg: dict[str, Any]) -> VesdSettings:
    allowed = {"k", "interval", "h", "delta", "stabilized", "rule"}
    return VesdSettings.from_dict({k: v for k, v in cfg.items() if k in allowed})


def _emit_report(run: _Run, report, fmt: str) -> None:
    d = report.to_dict()
    if fmt == "json":
        run.add("report.json", _json_text(d))
    else:
        rows = [["field", "value"]]
        for key in ("target", "estimate", "raw_estimate", "kappa", "plugin"):
            rows.append([key, repr(d[key]) if isinstance(d[key], float) else d[key]])
        for key, val in sorted(d["diagnostics"].items()):
            rows.append([key, json.dumps(val)])
        for j, (raw, tr) in enumerate(zip(report.moments.raw_values, report.moments.values), start=1):
            rows.append([f"alpha_{j}_raw", repr(float(raw))])
            rows.append([f"alpha_{j}", repr(float(tr))])
        run.add("report.csv", _csv_text(rows))
    run.add("vesd_cdf.csv", report.vesd.to_csv())
    run.add("summary.txt", report.summary())


def _cmd_estimate(args, run: _Run) -> None:
    cfg = _load_json(args.config)
    known = {"k", "interval", "h", "delta", "stabilized", "rule", "vector", "response_col"}
    extra = set(cfg) - known
    if extra:
        raise InvalidInputError(f"unknown config keys: {sorted(extra)}")
    settings = _settings(cfg)
    if args.data is None:
        raise InvalidInputError("--data is required")
    X, names = read_matrix(args.data, header=args.header)
    run.config = {"command": args.command, "settings": cfg, "data": Path(args.data).name}
    if args.command == "tau":
        if args.vector is not None:
            a = _read_vector(args.vector)
        elif "vector" in cfg:
            a = np.asarray(cfg["vector"], dtype=np.float64)
        else:
            raise InvalidInputError("tau needs --vector or a 'vector' entry in the config")
        report = estimate_tau(X, a, settings)
    elif args.command == "sharpe":
        report = estimate_sharpe(X, settings)
    else:
        col = args.response_col if args.response_col is not None else cfg.get("response_col", 0)
        if isinstance(col, str) and not col.lstrip("-").isdigit():
            if names is None or col not in names:
                raise InvalidInputError(f"response column {col!r} not found (use --header for named columns)")
            col = names.index(col)
        col = int(col)
        if not -X.shape[1] <= col < X.shape[1]:
            raise InvalidInputError(f"response column {col} out of range for {X.shape[1]} columns")
        y = X[:, col]
        report = estimate_mcc(np.delete(X, col % X.shape[1], axis=1), y, settings)
    _emit_report(run, report, args.format)
    sys.stdout.write(report.summary())


def _cmd_pinv(args, run: _Run) -> None:
    if args.data is not None:
        if args.vector is None:
            raise InvalidInputError("diagnose-pinv with --data needs --vector")
        X, _ = read_matrix(args.data, header=args.header)
        a = _read_vector(args.vector)
        value = pseudoinverse_quadratic(X, a)
        run.config = {"command": "diagnose-pinv", "data": Path(args.data).name}
        result = {"n": X.shape[0], "p": X.shape[1], "pinv_quadratic": value}
        if args.format == "json":
            run.add("pinv.json", _json_text(result))
        else:
            run.add("pinv.csv", _csv_text([["n", "p", "pinv_quadratic"], [X.shape[0], X.shape[1], repr(value)]]))
        sys.stdout.write(f"a^T S^+ a = {value:.10g}  (n={X.shape[0]}, p={X.shape[1]})\n")
        return
    cfg = _load_json(args.config)
    if not cfg:
        raise InvalidInputError("diagnose-pinv needs --data/--vector or a sweep --config")
    allowed = {"p", "n", "rs", "reps", "seed", "setting"}
    extra = set(cfg) - allowed
    if extra:
        raise InvalidInputError(f"unknown sweep keys: {sorted(extra)}")
    if "p" not in cfg or "n" not in cfg:
        raise InvalidInputError("sweep config needs 'p' and 'n'")
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.reps is not None:
        cfg["reps"] = args.reps
    run.config = cfg
    run.seed = int(cfg.get("seed", 0))
    rows = pinv_sweep(int(cfg["p"]), int(cfg["n"]), tuple(cfg.get("rs", (0.3, 0.4, 0.5, 0.6, 0.7))),
                      int(cfg.get("reps", 1)), run.seed, cfg.get("setting", "dense2"))
    if args.format == "json":
        run.add("pinv_sweep.json", _json_text(rows))
    else:
        table = [["r", "replication", "tau", "pinv_quadratic"]]
        table += [[repr(r["r"]), r["replication"], repr(r["tau"]), repr(r["pinv_quadratic"])] for r in rows]
        run.add("pinv_sweep.csv", _csv_text(table))
    sys.stdout.write(f"{len(rows)} (tau, a^T S^+ a) pairs\n")


def _cell_seed(batch_seed: int, index: int) -> int:
    state = np.random.SeedSequence(batch_seed, spawn_key=(index,)).generate_state(1, np.uint64)
    return int(state[0])


def build_cells(batch: dict[str, Any], seed: int | None = None, reps: int | None = None) -> list[ScenarioConfig]:
    """Scenario list of a batch config after sweep expansion and overrides."""
    extra = set(batch) - {"seed", "reps", "defaults", "scenarios"}
    if extra:
        raise InvalidInputError(f"unknown batch keys: {sorted(extra)}")
    scenarios = batch.get("scenarios")
    if not isinstance(scenarios, list) or not scenarios:
        raise InvalidInputError("batch config needs a non-empty 'scenarios' list")
    batch_seed = int(seed if seed is not None else batch.get("seed", 0))
    defaults = dict(batch.get("defaults", {}))
    if "reps" in batch:
        defaults.setdefault("reps", batch["reps"])
    cells = []
    for entry in scenarios:
        if not isinstance(entry, dict):
            raise InvalidInputError("each scenario must be a JSON object")
        for cell in expand_scenarios({**defaults, **entry}):
            if reps is not None:
                cell["reps"] = reps
            if seed is not None or "seed" not in cell:
                cell["seed"] = _cell_seed(batch_seed, len(cells))
            cells.append(ScenarioConfig.from_dict(cell))
    ids = [c.cell_id for c in cells]
    if len(set(ids)) != len(ids):
        raise InvalidInputError("scenario list contains duplicate cells")
    return cells


def _cmd_simulate(args, run: _Run) -> None:
    batch = _load_json(args.config)
    if args.config is None:
        raise InvalidInputError("simulate needs --config")
    cells = build_cells(batch, args.seed, args.reps)
    run.config = {"batch": batch, "seed": args.seed, "reps": args.reps}
    run.seed = int(args.seed if args.seed is not None else batch.get("seed", 0))
    rows: list[BiasVarianceRow] = []
    aborted = []
    for cfg in cells:
        try:
            row, records = run_replications(cfg, jobs=args.jobs)
        except CellAbortedError as exc:
            aborted.append(str(exc))
            sys.stderr.write(f"aborted: {exc}\n")
            continue
        rows.append(row)
        log = {"config": cfg.to_dict(), "row": {k: v for k, v in row.to_dict().items() if k != "wall_time"},
               "replications": records}
        run.add(f"cells/{cfg.cell_id}.json", _json_text(log))
        sys.stderr.write(f"{cfg.cell_id}: bias {row.bias:+.4f} var {row.variance:.4f} ({row.wall_time:.1f}s)\n")
    if aborted:
        raise CellAbortedError(f"{len(aborted)} cell(s) aborted: " + "; ".join(aborted))
    if args.format == "json":
        payload = [{k: v for k, v in r.to_dict().items() if k != "wall_time"} for r in rows]
        run.add("results.json", _json_text(payload))
    else:
        run.add("results.csv", _csv_text([list(BiasVarianceRow.CSV_FIELDS)] + [r.csv_row() for r in rows]))
    sys.stdout.write(_csv_text([["cell_id", "bias", "variance"]] + [[r.cell_id, f"{r.bias:.4f}", f"{r.variance:.4f}"] for r in rows]))


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV)
    if raw is None:
        return 1
    try:
        return int(raw)
    except ValueError:
        return 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="quadvesd", description=__doc__.splitlines()[0] if __doc__ else None)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, fmt_default):
        p.add_argument("--data", help="data matrix, CSV (one observation per row) or .bin")
        p.add_argument("--config", help="JSON configuration")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--format", choices=("json", "csv"), default=fmt_default)
        p.add_argument("--header", action="store_true", help="first CSV line holds column names")
        p.add_argument("--seed", type=int)
        p.add_argument("--reps", type=int)
        p.add_argument("--jobs", type=int, default=_default_jobs(), help=f"worker count (default ${JOBS_ENV} or 1)")

    for name in ("tau", "sharpe", "mcc"):
        p = sub.add_parser(name)
        common(p, "json")
        if name == "tau":
            p.add_argument("--vector", help="CSV with the vector a (one row or one column)")
        if name == "mcc":
            p.add_argument("--response-col", help="index or header name of the response column (default 0)")
    p = sub.add_parser("diagnose-pinv")
    common(p, "json")
    p.add_argument("--vector")
    p = sub.add_parser("simulate")
    common(p, "csv")
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    run = _Run(args.command, argv, Path(args.out))
    handlers = {"tau": _cmd_estimate, "sharpe": _cmd_estimate, "mcc": _cmd_estimate,
                "diagnose-pinv": _cmd_pinv, "simulate": _cmd_simulate}
    try:
        if args.jobs is not None and args.jobs < 1:
            raise InvalidInputError("--jobs must be at least 1")
        if args.reps is not None and args.reps < 1:
            raise InvalidInputError("--reps must be at least 1")
        handlers[args.command](args, run)
    except QuadVesdError as exc:
        run.commit(exc, exc.exit_code)
        sys.stderr.write(f"error [{type(exc).__name__}]: {exc}\n")
        return exc.exit_code
    except Exception as exc:  # noqa: BLE001 - the manifest must record every failure
        run.commit(exc, 1)
        sys.stderr.write(f"error [{type(exc).__name__}]: {exc}\n")
        return 1
    run.commit()
    return 0


if __name__ == "__main__":
    sys.exit(main())
