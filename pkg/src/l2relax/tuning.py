"""Tuning-parameter selection: random K-fold CV by MSFE, chronological
out-of-sample evaluation, and rolling Sharpe validation.

All schemes take a pure ``fit`` callback so grid points and folds can be
evaluated independently, and every scheme returns a member of the grid.
Ties break toward the largest (most regularized) value.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import Panel
from .exceptions import DegenerateSharpeError, InsufficientDataError, UsageError
from .numerics import RngStream

__all__ = [
    "TuningGrid",
    "TuningResult",
    "parse_grid",
    "cv_kfold",
    "cv_oos",
    "sharpe_validate",
]

SCHEME_KFOLD = "kfold5"
SCHEME_OOS = "oos"
SCHEME_SHARPE = "sharpe_rolling"


@dataclass(frozen=True)
class TuningGrid:
    """Ascending grid of nonnegative tuning values."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64).ravel()
        if v.size == 0:
            raise UsageError("tuning grid must be nonempty")
        if np.any(v < 0) or np.any(np.diff(v) < 0) or not np.all(np.isfinite(v)):
            raise UsageError("tuning grid must be finite, nonnegative, ascending")
        object.__setattr__(self, "values", v)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class TuningResult:
    chosen: float
    scores: np.ndarray
    scheme: str


def parse_grid(spec: str) -> TuningGrid:
    """Parse ``start:stop:step``, endpoints included within 1e-12."""
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"grid must be start:stop:step, got {spec!r}")
    try:
        start, stop, step = (float(p) for p in parts)
    except ValueError:
        raise UsageError(f"non-numeric grid component in {spec!r}") from None
    if step <= 0 or stop < start - 1e-12:
        raise UsageError("grid requires step > 0 and stop >= start")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    values = start + step * np.arange(count)
    if values[-1] > stop + 1e-12:
        values = values[:-1]
    return TuningGrid(values)


def _argbest(scores: np.ndarray, grid: TuningGrid) -> float:
    """Index of the smallest score, ties toward the largest grid value."""
    finite = np.isfinite(scores)
    if not np.any(finite):
        raise DegenerateSharpeError("no grid value produced a finite score")
    best = np.min(scores[finite])
    idx = int(np.max(np.flatnonzero(finite & (scores == best))))
    return float(grid.values[idx])


def _grid_weights(fit, train, grid: TuningGrid):
    """Weights per grid value; threads solver state across the ascending grid
    when the callback advertises ``supports_warm``."""
    if getattr(fit, "supports_warm", False):
        out, state = [], None
        for val in grid.values:
            w, state = fit(train, float(val), state)
            out.append(w)
        return out
    return [fit(train, float(val)) for val in grid.values]


def call_fit(fit, train, value: float):
    """Evaluate a fit callback once, transparently handling the warm protocol."""
    if getattr(fit, "supports_warm", False):
        w, _ = fit(train, float(value), None)
        return w
    return fit(train, float(value))


def kfold_indices(t: int, folds: int, rng: RngStream) -> list[np.ndarray]:
    """Random partition of [0, t) into folds whose sizes differ by <= 1;
    the remainder goes to the earliest folds."""
    if folds < 2 or folds > t:
        raise InsufficientDataError(f"cannot split {t} rows into {folds} folds")
    perm = rng.generator().permutation(t)
    base, extra = divmod(t, folds)
    out, pos = [], 0
    for f in range(folds):
        size = base + (1 if f < extra else 0)
        out.append(np.sort(perm[pos:pos + size]))
        pos += size
    return out


def cv_kfold(panel: Panel, grid: TuningGrid, fit, folds: int = 5,
             rng: RngStream | None = None) -> TuningResult:
    """Randomly partitioned K-fold CV scored by pooled squared forecast error.

    ``fit(train_panel, value) -> weights`` must be pure; held-out rows are
    scored by the squared error of the combined forecast against the target.
    """
    if panel.target is None:
        raise InsufficientDataError("k-fold CV needs a panel with a target")
    t = panel.n_periods
    if t < folds:
        raise InsufficientDataError(f"T={t} too small for {folds} folds")
    rng = rng or RngStream(0)
    fold_idx = kfold_indices(t, folds, rng)
    sq_err = np.zeros(len(grid))
    for test in fold_idx:
        mask = np.ones(t, dtype=bool)
        mask[test] = False
        train = panel.rows(np.flatnonzero(mask))
        f_test = panel.values[test]
        y_test = panel.target[test]
        for j, w in enumerate(_grid_weights(fit, train, grid)):
            resid = y_test - f_test @ w
            sq_err[j] += float(resid @ resid)
    scores = sq_err / t
    return TuningResult(_argbest(scores, grid), scores, SCHEME_KFOLD)


def block_boundaries(t: int, blocks: int) -> list[tuple[int, int]]:
    """Chronological split into equal blocks (remainder to the earliest)."""
    base, extra = divmod(t, blocks)
    out, pos = [], 0
    for b in range(blocks):
        size = base + (1 if b < extra else 0)
        out.append((pos, pos + size))
        pos += size
    return out


def cv_oos(panel: Panel, grid: TuningGrid, fit, blocks: int = 5) -> TuningResult:
    """Chronological out-of-sample evaluation: each block from the second on
    is scored with all earlier blocks as training data; squared errors pool
    over the test blocks."""
    if panel.target is None:
        raise InsufficientDataError("out-of-sample evaluation needs a target")
    t = panel.n_periods
    bounds = block_boundaries(t, blocks)
    if bounds[0][1] - bounds[0][0] < 2:
        raise InsufficientDataError(f"T={t} leaves the first block too small to train on")
    sq_err = np.zeros(len(grid))
    n_scored = 0
    for b in range(1, blocks):
        lo, hi = bounds[b]
        train = panel.rows(np.arange(0, lo))
        f_test = panel.values[lo:hi]
        y_test = panel.target[lo:hi]
        n_scored += hi - lo
        for j, w in enumerate(_grid_weights(fit, train, grid)):
            resid = y_test - f_test @ w
            sq_err[j] += float(resid @ resid)
    scores = sq_err / max(n_scored, 1)
    return TuningResult(_argbest(scores, grid), scores, SCHEME_OOS)


def sharpe_validate(returns, grid: TuningGrid, fit, train_len: int,
                    valid_len: int = 12) -> TuningResult:
    """Pick the grid value whose weights earn the highest Sharpe ratio over
    the validation window following the training window.

    Scores are stored as negative Sharpe so smaller is better everywhere.
    """
    r = np.asarray(returns, dtype=np.float64)
    t = r.shape[0]
    if t < train_len + valid_len:
        raise InsufficientDataError(f"T={t} < train {train_len} + validation {valid_len}")
    train = r[:train_len]
    valid = r[train_len:train_len + valid_len]
    scores = np.full(len(grid), np.inf)
    for j, w in enumerate(_grid_weights(fit, train, grid)):
        port = valid @ w
        sd = float(np.std(port, ddof=1)) if port.size >= 2 else 0.0
        if sd > 0.0:
            scores[j] = -float(np.mean(port)) / sd
    if not np.any(np.isfinite(scores)):
        raise DegenerateSharpeError("validation returns degenerate for every grid value")
    return TuningResult(_argbest(scores, grid), scores, SCHEME_SHARPE)
