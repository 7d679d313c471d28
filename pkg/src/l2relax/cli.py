"""Command-line surface: data ingestion, experiment orchestration, and
table/plot-data emission.

Exit codes: 0 success, 1 numerical failure, 2 usage or configuration error.
All commands are deterministic given ``--seed`` (falling back to the
``L2RELAX_SEED`` environment variable) and any ``--jobs`` setting.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys

import numpy as np

from . import harness
from .backtest import rolling_portfolio
from .covariance import Panel, forecast_errors, lw_linear_shrinkage, sample_vc
from .exceptions import L2RelaxError, UsageError
from .numerics import RngStream
from .simulation import bias_variance_sweep, load_ff5_params
from .solver import solve_l2_relaxation, weight_path
from .tuning import TuningGrid, cv_kfold, cv_oos, parse_grid

EXIT_OK = 0
EXIT_NUMERICAL = 1
EXIT_USAGE = 2

_FLOAT_FMT = "%.17g"


def _fmt(x: float) -> str:
    return _FLOAT_FMT % float(x)


def _emit_json(payload: dict, stream=None) -> None:
    stream = stream or sys.stdout
    json.dump(payload, stream, sort_keys=True, indent=2, allow_nan=True)
    stream.write("\n")


def _emit_csv(header: list[str], rows, stream=None) -> None:
    stream = stream or sys.stdout
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) if isinstance(v, float) else v for v in row])


def _read_csv_matrix(path: str) -> tuple[list[str], np.ndarray]:
    if not os.path.exists(path):
        raise UsageError(f"file not found: {path}")
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise UsageError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise UsageError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError:
                raise UsageError(f"{path}:{lineno}: non-numeric value") from None
    if not rows:
        raise UsageError(f"{path}: no data rows")
    return [h.strip() for h in header], np.asarray(rows, dtype=np.float64)


def _read_cov(path: str) -> tuple[np.ndarray, tuple[str, ...]]:
    header, data = _read_csv_matrix(path)
    if data.shape[0] != data.shape[1] or data.shape[1] != len(header):
        raise UsageError(f"{path}: covariance CSV must be square with one header per column")
    return data, tuple(header)


def _read_panel(path: str, target: str | None) -> Panel:
    header, data = _read_csv_matrix(path)
    if target is None:
        return Panel(data, tuple(header))
    if target not in header:
        raise UsageError(f"{path}: no column named {target!r}")
    idx = header.index(target)
    mask = np.ones(len(header), dtype=bool)
    mask[idx] = False
    labels = tuple(h for i, h in enumerate(header) if i != idx)
    return Panel(data[:, mask], labels, data[:, idx])


def _estimate(series: np.ndarray, estimator: str):
    if estimator == "sample":
        return sample_vc(series)
    if estimator == "lw":
        return lw_linear_shrinkage(series)
    if estimator in ("lw_nonlinear", "nonlinear"):
        raise UsageError(
            "the nonlinear shrinkage estimator is not implemented; "
            "choose 'sample' or 'lw'"
        )
    raise UsageError(f"unknown estimator {estimator!r}; choose 'sample' or 'lw'")


def _seed_from(args) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get("L2RELAX_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"L2RELAX_SEED must be an integer, got {env!r}") from None
    return 0


def _solution_payload(sol) -> dict:
    return {
        "weights": [float(v) for v in sol.w],
        "gamma": float(sol.gamma),
        "alpha": [float(v) for v in sol.alpha],
        "tau": float(sol.tau),
        "kkt": {k: float(v) for k, v in sol.kkt.items()},
        "iterations": int(sol.iterations),
        "status": sol.status,
    }


def _cov_from_args(args) -> tuple:
    """Covariance matrix plus unit labels from --cov or --panel input."""
    if (args.cov is None) == (args.panel is None):
        raise UsageError("provide exactly one of --cov or --panel")
    if args.cov is not None:
        return _read_cov(args.cov)
    panel = _read_panel(args.panel, args.target)
    series = forecast_errors(panel) if panel.target is not None else panel.values
    return _estimate(series, args.estimator).sigma, panel.unit_labels


def cmd_solve(args) -> int:
    sigma, labels = _cov_from_args(args)
    if args.tau < 0:
        raise UsageError(f"tau must be nonnegative, got {args.tau}")
    sol = solve_l2_relaxation(sigma, args.tau)
    payload = _solution_payload(sol)
    if labels:
        payload["units"] = list(labels)
    _emit_json(payload)
    return EXIT_OK


def cmd_combine(args) -> int:
    panel = _read_panel(args.panel, args.target)
    if panel.target is None:
        raise UsageError("combine requires --target naming the outcome column")
    grid = parse_grid(args.grid)
    estimator = args.estimator
    seed = _seed_from(args)

    def fit(train, tau, state=None):
        series = forecast_errors(train)
        sol, raw = solve_l2_relaxation(_estimate(series, estimator).sigma, tau,
                                       warm=state, return_raw=True)
        return sol.w, raw
    fit.supports_warm = True

    if args.scheme == "kfold":
        result = cv_kfold(panel, grid, fit, folds=args.folds, rng=RngStream(seed, 3))
    else:
        result = cv_oos(panel, grid, fit, blocks=args.folds)
    sol = solve_l2_relaxation(
        _estimate(forecast_errors(panel), estimator).sigma, result.chosen)
    payload = _solution_payload(sol)
    payload["chosen_tau"] = float(result.chosen)
    payload["scheme"] = result.scheme
    payload["scores"] = [float(v) for v in result.scores]
    payload["grid"] = [float(v) for v in grid.values]
    if panel.unit_labels:
        payload["units"] = list(panel.unit_labels)
    _emit_json(payload)
    return EXIT_OK


def cmd_simulate(args) -> int:
    reps = args.reps
    if args.full:
        reps = max(reps, 1000)
    rows = harness.run_dgp_study(
        args.dgp, args.T, args.N, args.K, snr=args.snr, reps=reps,
        seed=_seed_from(args), jobs=args.jobs,
        grid=parse_grid(args.grid) if args.grid else None,
        scheme=args.scheme,
    )
    if args.format == "json":
        _emit_json({"config": {"dgp": args.dgp, "T": args.T, "N": args.N, "K": args.K,
                               "snr": args.snr, "reps": reps, "seed": _seed_from(args)},
                    "results": rows})
    else:
        _emit_csv(["estimator", "msfe", "mafe"],
                  [(r["estimator"], r["msfe"], r["mafe"]) for r in rows])
    return EXIT_OK


def cmd_backtest(args) -> int:
    seed = _seed_from(args)
    grid = parse_grid(args.grid)
    if args.returns is not None:
        header, returns = _read_csv_matrix(args.returns)
        fit = harness.method_fit(args.method)
        tuned = args.method.startswith("l2relax")
        use_grid = grid if tuned else TuningGrid(np.array([0.0]))
        report = rolling_portfolio(returns, args.window, fit, use_grid,
                                   method_label=args.method)
        payload = report.to_dict()
        if not args.weights_csv:
            payload.pop("weights_history")
        _emit_json(payload)
        if args.weights_csv:
            with open(args.weights_csv, "w", newline="") as fh:
                _emit_csv(["period", "tau"] + list(header),
                          [(h["period"], float(h["tau"]), *h["weights"])
                           for h in payload["weights_history"]], fh)
        return EXIT_OK

    methods = tuple(args.methods.split(","))
    rows = harness.run_ff5_study(sort=args.ff5, window=args.window, reps=args.reps,
                                 seed=seed, jobs=args.jobs, grid=grid, methods=methods)
    if args.format == "json":
        _emit_json({"config": {"ff5": args.ff5, "L": args.window, "reps": args.reps,
                               "seed": seed},
                    "results": rows})
    else:
        _emit_csv(["method", "mean_sharpe", "n_degenerate"],
                  [(r["method"], r["mean_sharpe"], r["n_degenerate"]) for r in rows])
    return EXIT_OK


def cmd_path(args) -> int:
    sigma, labels = _cov_from_args(args)
    grid = parse_grid(args.grid)
    sols = weight_path(sigma, grid.values)
    labels = labels or [f"w{i + 1}" for i in range(sigma.shape[0])]
    _emit_csv(["tau"] + list(labels),
              [(float(s.tau), *(float(v) for v in s.w)) for s in sols])
    return EXIT_OK


def cmd_biasvar(args) -> int:
    grid = parse_grid(args.grid)
    table = bias_variance_sweep(RngStream(_seed_from(args), 2), grid, args.reps)
    cols = ["tau", "bias2_w1", "var_w1", "mse_w1", "mse_yhat"]
    _emit_csv(cols, zip(*(map(float, table[c]) for c in cols)))
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="l2relax",
        description="Combination/portfolio weights by sup-norm-relaxed minimum-norm optimization",
    )
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--seed", type=int, default=None,
                        help="RNG seed (default: $L2RELAX_SEED or 0)")
        sp.add_argument("--jobs", type=int, default=1,
                        help="replication-level parallelism (output is identical for any value)")
        sp.add_argument("--format", choices=("csv", "json"), default="json")

    sp = sub.add_parser("solve", help="solve the relaxed weight problem once")
    sp.add_argument("--cov", help="square covariance CSV")
    sp.add_argument("--panel", help="panel CSV (T x N, header row, time ascending)")
    sp.add_argument("--target", default=None,
                    help="panel column holding the outcome (errors mode); omit for returns mode")
    sp.add_argument("--tau", type=float, required=True)
    sp.add_argument("--estimator", default="sample", help="sample | lw")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("combine", help="CV-tuned forecast combination on a panel CSV")
    sp.add_argument("--panel", required=True)
    sp.add_argument("--target", required=True)
    sp.add_argument("--grid", default="0.1:1:0.1", help="start:stop:step")
    sp.add_argument("--estimator", default="sample")
    sp.add_argument("--scheme", choices=("kfold", "oos"), default="kfold")
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_combine)

    sp = sub.add_parser("simulate", help="estimator-accuracy study on a simulated design")
    sp.add_argument("--dgp", type=int, choices=(1, 2, 3), required=True)
    sp.add_argument("--T", type=int, required=True)
    sp.add_argument("--N", type=int, required=True)
    sp.add_argument("--K", type=int, required=True)
    sp.add_argument("--snr", choices=("low", "high"), default="low")
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--full", action="store_true",
                    help="raise reps to the full 1000-replication design")
    sp.add_argument("--grid", default=None, help="tuning grid start:stop:step")
    sp.add_argument("--scheme", choices=("auto", "kfold", "oos"), default="auto")
    add_common(sp)
    sp.set_defaults(func=cmd_simulate, format="csv")

    sp = sub.add_parser("backtest", help="rolling portfolio backtest (CSV returns or simulated)")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--returns", help="T x N returns CSV")
    src.add_argument("--ff5", choices=("size_bm", "size_inv", "size_op"),
                     help="simulated five-factor study with the bundled calibration")
    sp.add_argument("--window", "-L", type=int, default=60)
    sp.add_argument("--grid", default="0.1:1:0.1")
    sp.add_argument("--method", default="l2relax_sample",
                    help="single-backtest method (with --returns)")
    sp.add_argument("--methods", default=",".join(harness.FF5_METHODS),
                    help="comma list for the simulated study")
    sp.add_argument("--reps", type=int, default=200)
    sp.add_argument("--weights-csv", default=None,
                    help="also write the weights history to this CSV")
    add_common(sp)
    sp.set_defaults(func=cmd_backtest)

    sp = sub.add_parser("path", help="weights along a relaxation-level grid (plot data)")
    sp.add_argument("--cov", help="square covariance CSV")
    sp.add_argument("--panel", help="panel CSV")
    sp.add_argument("--target", default=None)
    sp.add_argument("--estimator", default="sample")
    sp.add_argument("--grid", required=True, help="start:stop:step")
    sp.set_defaults(func=cmd_path)

    sp = sub.add_parser("biasvar", help="bias-variance sweep of the first weight")
    sp.add_argument("--grid", default="0:0.1:0.005")
    sp.add_argument("--reps", type=int, default=1000)
    sp.add_argument("--seed", type=int, default=None)
    sp.set_defaults(func=cmd_biasvar)

    return p


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except L2RelaxError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
