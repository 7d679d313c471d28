"""Experiment orchestration: the forecaster-accuracy study (one row per
estimator, MSFE/MAFE columns) and the rolling five-factor portfolio study.

Replications run on independent RNG streams and aggregate in replication
order with compensated summation, so results are byte-identical for any
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .backtest import rolling_portfolio
from .competitors import (
    gec_weights,
    lasso_recentered,
    oracle_membership_weights,
    pc_grouping_weights,
    ridge_recentered,
    simple_average,
)
from .covariance import Panel, forecast_errors, lw_linear_shrinkage, sample_vc
from .exceptions import UsageError
from .numerics import RngStream
from .simulation import (
    SIGMA_Y_HIGH_SNR,
    SIGMA_Y_LOW_SNR,
    DgpSpec,
    generate_dgp,
    generate_ff5,
    load_ff5_params,
    true_groups,
)
from .solver import GroupStructure, solve_l2_relaxation
from .tuning import TuningGrid, call_fit, cv_kfold, cv_oos

__all__ = [
    "DGP_ESTIMATORS",
    "FF5_METHODS",
    "run_dgp_study",
    "run_ff5_study",
    "method_fit",
]

# top-level stream namespaces so different commands never share draws
_STREAM_DGP = 0
_STREAM_FF5 = 1

DGP_ESTIMATORS = (
    "oracle", "sa", "l2relax0", "lasso", "ridge",
    "pc_q5", "pc_q10", "pc_q20", "l2relax_sample", "l2relax_lw",
)

FF5_METHODS = ("sa", "gec_c1", "gec_c2", "l2relax_sample", "l2relax_lw")

_DEFAULT_GRID = TuningGrid(np.round(np.arange(1, 11) * 0.1, 10))


def _estimate_cov(errors: np.ndarray, estimator: str):
    if estimator == "sample":
        return sample_vc(errors)
    if estimator == "lw":
        return lw_linear_shrinkage(errors)
    raise UsageError(f"unknown covariance estimator {estimator!r}")


def _relax_fit(estimator: str):
    def fit(train: Panel, tau: float, state=None):
        cov = _estimate_cov(forecast_errors(train), estimator)
        sol, raw = solve_l2_relaxation(cov, tau, warm=state, return_raw=True)
        return sol.w, raw
    fit.supports_warm = True
    return fit


def _lasso_fit(train: Panel, tau: float, state=None):
    sol, raw = lasso_recentered(sample_vc(forecast_errors(train)), tau,
                                warm=state, return_raw=True)
    return sol.w, raw


_lasso_fit.supports_warm = True


def _ridge_fit(train: Panel, tau: float) -> np.ndarray:
    return ridge_recentered(sample_vc(forecast_errors(train)), tau).w


def _tune_and_fit(train: Panel, grid: TuningGrid, fit, scheme: str, rng: RngStream):
    if scheme == "kfold":
        result = cv_kfold(train, grid, fit, folds=5, rng=rng)
    elif scheme == "oos":
        result = cv_oos(train, grid, fit, blocks=5)
    else:
        raise UsageError(f"unknown tuning scheme {scheme!r}")
    return call_fit(fit, train, result.chosen), result.chosen


@dataclass(frozen=True)
class _DgpStudyConfig:
    dgp: int
    t: int
    n: int
    k: int
    sigma_y: float
    seed: int
    grid: tuple
    scheme: str
    pc_qs: tuple = (5, 10, 20)


def _dgp_replication(cfg: _DgpStudyConfig, rep: int) -> dict[str, tuple[float, float]]:
    root = RngStream(cfg.seed, _STREAM_DGP).substream(rep)
    spec = DgpSpec(cfg.dgp, cfg.t, cfg.n, cfg.k, sigma_y=cfg.sigma_y,
                   seed=cfg.seed, stream_id=root.substream(0).stream_id)
    panel = generate_dgp(spec)
    train = panel.rows(np.arange(cfg.t))
    f_next = panel.values[cfg.t]
    y_next = float(panel.target[cfg.t])
    errors = forecast_errors(train)
    grid = TuningGrid(np.asarray(cfg.grid))
    groups = GroupStructure(true_groups(spec))

    weights: dict[str, np.ndarray] = {}
    weights["oracle"] = oracle_membership_weights(errors, groups).w
    weights["sa"] = simple_average(cfg.n).w
    weights["l2relax0"] = solve_l2_relaxation(sample_vc(errors), 0.0).w
    weights["lasso"], _ = _tune_and_fit(train, grid, _lasso_fit, cfg.scheme,
                                        root.substream(1))
    weights["ridge"], _ = _tune_and_fit(train, grid, _ridge_fit, cfg.scheme,
                                        root.substream(2))
    for i, q in enumerate(cfg.pc_qs):
        q_eff = min(q, cfg.t, cfg.n)
        sol, _ = pc_grouping_weights(errors, cfg.k, q_eff, root.substream(3 + i))
        weights[f"pc_q{q}"] = sol.w
    weights["l2relax_sample"], _ = _tune_and_fit(train, grid, _relax_fit("sample"),
                                                 cfg.scheme, root.substream(6))
    weights["l2relax_lw"], _ = _tune_and_fit(train, grid, _relax_fit("lw"),
                                             cfg.scheme, root.substream(7))

    out = {}
    for name, w in weights.items():
        err = y_next - float(w @ f_next)
        out[name] = (err * err, abs(err))
    return out


def _run_reps(worker, cfg, reps: int, jobs: int) -> list:
    if jobs <= 1:
        return [worker(cfg, r) for r in range(reps)]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, [cfg] * reps, range(reps),
                             chunksize=max(1, reps // (4 * jobs))))


def run_dgp_study(dgp: int, t: int, n: int, k: int, snr: str = "low",
                  reps: int = 200, seed: int = 0, jobs: int = 1,
                  grid: TuningGrid | None = None, scheme: str = "auto",
                  estimators=DGP_ESTIMATORS) -> list[dict]:
    """Out-of-sample accuracy of every estimator on one simulated design.

    Returns one dict per estimator with noise-adjusted MSFE and MAFE.
    The tuning scheme follows the design (random folds for the i.i.d. and
    perturbed designs, chronological blocks for the autocorrelated one)
    unless overridden.
    """
    if snr not in ("low", "high"):
        raise UsageError("snr must be 'low' or 'high'")
    if reps < 1:
        raise UsageError("reps must be >= 1")
    sigma_y = SIGMA_Y_LOW_SNR if snr == "low" else SIGMA_Y_HIGH_SNR
    if scheme == "auto":
        scheme = "oos" if dgp == 2 else "kfold"
    grid = grid or _DEFAULT_GRID
    cfg = _DgpStudyConfig(dgp, t, n, k, sigma_y, seed, tuple(grid.values), scheme)

    results = _run_reps(_dgp_replication, cfg, reps, jobs)

    rows = []
    adj_sq = sigma_y ** 2
    adj_abs = sigma_y * math.sqrt(2.0 / math.pi)
    for name in estimators:
        sq = math.fsum(r[name][0] for r in results) / reps
        ab = math.fsum(r[name][1] for r in results) / reps
        rows.append({"estimator": name, "msfe": sq - adj_sq, "mafe": ab - adj_abs})
    return rows


@dataclass(frozen=True)
class _Ff5StudyConfig:
    sort: str
    n: int
    t: int
    window: int
    seed: int
    grid: tuple
    methods: tuple


def method_fit(method: str):
    """Weight-estimator callback for one backtest method name."""
    if method == "sa":
        return lambda train, tau: simple_average(train.shape[1]).w
    if method == "gec_c1":
        return lambda train, tau: gec_weights(sample_vc(train), 1.0).w
    if method == "gec_c2":
        return lambda train, tau: gec_weights(sample_vc(train), 2.0).w
    if method in ("l2relax_sample", "l2relax_lw"):
        estimate = sample_vc if method == "l2relax_sample" else lw_linear_shrinkage

        def fit(train, tau, state=None):
            sol, raw = solve_l2_relaxation(estimate(train), tau, warm=state,
                                           return_raw=True)
            return sol.w, raw
        fit.supports_warm = True
        return fit
    raise UsageError(f"unknown backtest method {method!r}")


def _ff5_replication(cfg: _Ff5StudyConfig, rep: int) -> dict[str, float]:
    root = RngStream(cfg.seed, _STREAM_FF5).substream(rep)
    spec = load_ff5_params(cfg.sort, n=cfg.n, t=cfg.t, seed=cfg.seed,
                           stream_id=root.substream(0).stream_id)
    returns = generate_ff5(spec)
    out = {}
    for method in cfg.methods:
        tuned = method.startswith("l2relax")
        grid = TuningGrid(np.asarray(cfg.grid)) if tuned else TuningGrid(np.array([0.0]))
        report = rolling_portfolio(returns, cfg.window, method_fit(method),
                                   grid, method_label=method)
        out[method] = report.sharpe
    return out


def run_ff5_study(sort: str = "size_bm", window: int = 60, reps: int = 200,
                  seed: int = 0, jobs: int = 1, n: int = 100, t: int = 240,
                  grid: TuningGrid | None = None,
                  methods=FF5_METHODS) -> list[dict]:
    """Mean Sharpe ratio per method over replicated five-factor panels."""
    if reps < 1:
        raise UsageError("reps must be >= 1")
    grid = grid or _DEFAULT_GRID
    cfg = _Ff5StudyConfig(sort, n, t, window, seed, tuple(grid.values), tuple(methods))
    results = _run_reps(_ff5_replication, cfg, reps, jobs)
    rows = []
    for method in methods:
        vals = [r[method] for r in results]
        finite = [v for v in vals if math.isfinite(v)]
        mean = math.fsum(finite) / len(finite) if finite else float("nan")
        rows.append({"method": method, "mean_sharpe": mean,
                     "n_degenerate": len(vals) - len(finite)})
    return rows
