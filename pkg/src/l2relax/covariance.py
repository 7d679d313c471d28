"""Variance-covariance estimation from a T x N panel.

Two estimators are exposed: the plain sample VC with divisor T and the
linear shrinkage estimator toward the constant-correlation target.  The
nonlinear shrinkage option is intentionally not implemented; the tag enum
reserves room and the CLI rejects it with an explicit message.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import (
    DegenerateVarianceError,
    InsufficientDataError,
    MissingTargetError,
    UsageError,
)
from .numerics import as_matrix

__all__ = [
    "Panel",
    "CovEstimate",
    "forecast_errors",
    "sample_vc",
    "lw_linear_shrinkage",
    "ESTIMATOR_TAGS",
]

ESTIMATOR_TAGS = ("sample", "lw_linear")


@dataclass(frozen=True)
class Panel:
    """Time-ordered forecasts (or returns) with an optional aligned target.

    Row ``t`` of ``values`` holds the N forecasts issued at time t; when a
    target is present, ``target[t]`` is the outcome those forecasts aim at
    (the next-period value), so errors are ``target[t] - values[t, i]``.
    """

    values: np.ndarray
    unit_labels: tuple[str, ...] | None = None
    target: np.ndarray | None = None

    def __post_init__(self):
        v = as_matrix(self.values, "panel values")
        if v.shape[0] < 2:
            raise UsageError("panel needs at least two rows")
        object.__setattr__(self, "values", v)
        if self.unit_labels is not None:
            labels = tuple(str(u) for u in self.unit_labels)
            if len(labels) != v.shape[1]:
                raise UsageError("unit_labels length does not match column count")
            object.__setattr__(self, "unit_labels", labels)
        if self.target is not None:
            y = np.asarray(self.target, dtype=np.float64).ravel()
            if y.shape[0] != v.shape[0]:
                raise UsageError("target length does not match panel rows")
            if not np.all(np.isfinite(y)):
                raise UsageError("target contains non-finite entries")
            object.__setattr__(self, "target", y)

    @property
    def n_periods(self) -> int:
        return self.values.shape[0]

    @property
    def n_units(self) -> int:
        return self.values.shape[1]

    def rows(self, idx) -> "Panel":
        """Sub-panel of the given row indices (order preserved)."""
        tgt = self.target[idx] if self.target is not None else None
        return Panel(self.values[idx], self.unit_labels, tgt)


@dataclass(frozen=True)
class CovEstimate:
    """N x N symmetric PSD matrix with estimator provenance."""

    sigma: np.ndarray
    estimator_tag: str
    shrinkage_intensity: float | None = None

    def __post_init__(self):
        if self.estimator_tag not in ESTIMATOR_TAGS:
            raise UsageError(f"unknown estimator tag {self.estimator_tag!r}")
        s = as_matrix(self.sigma, "sigma")
        s = (s + s.T) / 2.0
        object.__setattr__(self, "sigma", s)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]


def forecast_errors(panel: Panel) -> np.ndarray:
    """T x N matrix of target-minus-forecast errors."""
    if panel.target is None:
        raise MissingTargetError("panel has no target series; cannot form forecast errors")
    return panel.target[:, None] - panel.values


def sample_vc(x) -> CovEstimate:
    """Centered second-moment matrix with divisor T (not T-1)."""
    a = as_matrix(x, "series")
    t = a.shape[0]
    if t < 2:
        raise InsufficientDataError("need at least two observations for a sample VC")
    centered = a - a.mean(axis=0)
    sigma = centered.T @ centered / t
    return CovEstimate((sigma + sigma.T) / 2.0, "sample")


def lw_linear_shrinkage(x, shrink: float | None = None) -> CovEstimate:
    """Linear shrinkage of the sample VC toward the constant-correlation target.

    The target keeps the sample variances on the diagonal and replaces every
    correlation by the average off-diagonal correlation.  The intensity is
    the quadratic-loss-optimal constant clipped to [0, 1]; pass ``shrink`` to
    override it (used to hit the convex-combination endpoints exactly).
    """
    a = as_matrix(x, "series")
    t, n = a.shape
    if t < 2:
        raise InsufficientDataError("need at least two observations")
    if n < 2:
        raise InsufficientDataError("constant-correlation target needs at least two columns")

    xm = a - a.mean(axis=0)
    s = xm.T @ xm / t
    var = np.diag(s).copy()
    if np.any(var <= 0.0):
        raise DegenerateVarianceError("zero-variance column; correlation target undefined")
    std = np.sqrt(var)
    outer_std = np.outer(std, std)
    r_bar = (np.sum(s / outer_std) - n) / (n * (n - 1))
    target = r_bar * outer_std
    np.fill_diagonal(target, var)

    if shrink is None:
        y = xm ** 2
        pi_mat = y.T @ y / t - s ** 2
        pi_hat = float(np.sum(pi_mat))
        theta = (xm ** 3).T @ xm / t - var[:, None] * s
        np.fill_diagonal(theta, 0.0)
        rho_hat = float(np.sum(np.diag(pi_mat))) + r_bar * float(
            np.sum(np.outer(1.0 / std, std) * theta)
        )
        gamma_hat = float(np.linalg.norm(s - target, "fro") ** 2)
        if gamma_hat <= 0.0:
            delta = 0.0
        else:
            kappa = (pi_hat - rho_hat) / gamma_hat
            delta = max(0.0, min(1.0, kappa / t))
    else:
        if not 0.0 <= shrink <= 1.0:
            raise UsageError("shrinkage override must lie in [0, 1]")
        delta = float(shrink)

    sigma = delta * target + (1.0 - delta) * s
    return CovEstimate((sigma + sigma.T) / 2.0, "lw_linear", shrinkage_intensity=delta)
