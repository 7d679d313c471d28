"""Rolling-window portfolio evaluation and forecast-accuracy metrics.

Sharpe ratios use raw per-period returns with the (n-1)-divisor standard
deviation, no risk-free adjustment (inputs are already excess returns) and
no annualization.  In simulation mode the MSFE/MAFE subtract the variance
contribution of the unpredictable target innovation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import DegenerateSharpeError, InsufficientDataError, UsageError
from .tuning import TuningGrid, call_fit, sharpe_validate

__all__ = ["BacktestReport", "rolling_portfolio", "sharpe_ratio", "msfe", "mafe"]


@dataclass
class BacktestReport:
    """Outcome of one rolling backtest."""

    method: str
    window: int
    realized_returns: np.ndarray
    sharpe: float
    weights_history: list = field(default_factory=list)
    turnover: float = float("nan")  # mean l1 weight change per rebalance; diagnostic only
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "window": self.window,
            "sharpe": self.sharpe,
            "degenerate": self.degenerate,
            "turnover": self.turnover,
            "n_periods": int(self.realized_returns.size),
            "realized_returns": [float(v) for v in self.realized_returns],
            "weights_history": [
                {"period": int(p), "tau": float(tau), "weights": [float(v) for v in w]}
                for p, w, tau in self.weights_history
            ],
        }


def sharpe_ratio(r) -> float:
    """Mean over (n-1)-divisor standard deviation; raises on zero variance."""
    v = np.asarray(r, dtype=np.float64).ravel()
    if v.size < 2:
        raise InsufficientDataError("Sharpe ratio needs at least two returns")
    sd = float(np.std(v, ddof=1))
    if sd <= 0.0:
        raise DegenerateSharpeError("zero variance of realized returns")
    return float(np.mean(v)) / sd


def msfe(y_true, y_hat, sigma_y: float | None = None) -> float:
    """Mean squared forecast error; subtracts sigma_y**2 in simulation mode."""
    yt = np.asarray(y_true, dtype=np.float64).ravel()
    yh = np.asarray(y_hat, dtype=np.float64).ravel()
    if yt.size != yh.size or yt.size == 0:
        raise UsageError("forecast and outcome vectors must have equal positive length")
    value = float(np.mean((yt - yh) ** 2))
    if sigma_y is not None:
        value -= float(sigma_y) ** 2
    return value


def mafe(y_true, y_hat, sigma_y: float | None = None) -> float:
    """Mean absolute forecast error; subtracts sigma_y*sqrt(2/pi) when known."""
    yt = np.asarray(y_true, dtype=np.float64).ravel()
    yh = np.asarray(y_hat, dtype=np.float64).ravel()
    if yt.size != yh.size or yt.size == 0:
        raise UsageError("forecast and outcome vectors must have equal positive length")
    value = float(np.mean(np.abs(yt - yh)))
    if sigma_y is not None:
        value -= float(sigma_y) * math.sqrt(2.0 / math.pi)
    return value


def rolling_portfolio(returns, window: int, method, grid: TuningGrid,
                      method_label: str = "estimator", step: int = 12) -> BacktestReport:
    """Yearly-rolling minimum-variance backtest.

    Starting from the first ``window`` observations, the tuning value is
    chosen by Sharpe ratio on the following ``step`` months, those months'
    realized portfolio returns are recorded with the chosen weights, and the
    whole scheme rolls forward by ``step`` until the sample ends (a final
    partial year is still evaluated).  ``method(train_returns, value) ->
    weights`` sees training rows only.
    """
    r = np.asarray(returns, dtype=np.float64)
    if r.ndim != 2:
        raise UsageError("returns must be a T x N matrix")
    t, n = r.shape
    if t < window + step:
        raise InsufficientDataError(f"T={t} < window {window} + validation {step}")

    realized = []
    history = []
    degenerate = False
    last_tau = float(grid.values[-1])
    start = 0
    while start + window < t:
        train = r[start:start + window]
        valid = r[start + window:start + window + step]
        if valid.shape[0] >= 2:
            try:
                choice = sharpe_validate(r[start:start + window + valid.shape[0]],
                                         grid, method, train_len=window,
                                         valid_len=valid.shape[0])
                last_tau = choice.chosen
            except DegenerateSharpeError:
                degenerate = True  # keep the previous tuning value
        w = call_fit(method, train, last_tau)
        realized.append(valid @ w)
        history.append((start + window, np.asarray(w, dtype=np.float64), last_tau))
        start += step

    realized_returns = np.concatenate(realized)
    try:
        sharpe = sharpe_ratio(realized_returns)
    except DegenerateSharpeError:
        degenerate = True
        sharpe = float("nan")
    if len(history) > 1:
        turnover = float(np.mean([
            np.sum(np.abs(history[i + 1][1] - history[i][1]))
            for i in range(len(history) - 1)
        ]))
    else:
        turnover = float("nan")
    return BacktestReport(method_label, window, realized_returns, sharpe,
                          history, turnover, degenerate)
