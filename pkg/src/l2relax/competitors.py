"""Benchmark weight estimators: simple average, recentered Lasso/Ridge,
gross-exposure constraints, PCA + K-means grouping, and the group oracle.

Lasso and GEC run on the same operator-splitting engine as the main solver
(shared code, shared tolerances) through nonnegative variable splits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._engine import QpSettings, solve_box_qp
from .covariance import sample_vc
from .exceptions import SingularMatrixError, UsageError
from .numerics import RngStream, check_symmetric, solve_linear
from .solver import (
    STATUS_MAX_ITER,
    STATUS_OPTIMAL,
    GroupStructure,
    WeightSolution,
    classical_weights,
    _sigma_of,
)

__all__ = [
    "CompetitorSpec",
    "simple_average",
    "ridge_recentered",
    "lasso_recentered",
    "gec_weights",
    "pc_grouping_weights",
    "oracle_membership_weights",
    "kmeans",
]

_METHODS = ("sa", "lasso", "ridge", "gec", "pc_grouping", "oracle")


@dataclass(frozen=True)
class CompetitorSpec:
    """Configuration of one benchmark method."""

    method: str
    tuning: float = 0.0
    q: int = 0
    k: int = 0

    def __post_init__(self):
        if self.method not in _METHODS:
            raise UsageError(f"unknown method {self.method!r}")
        if self.tuning < 0:
            raise UsageError("tuning parameter must be nonnegative")
        if self.method == "gec" and self.tuning < 1.0:
            raise UsageError("gross-exposure bound must be >= 1 (w'1=1 forces ||w||_1 >= 1)")


def simple_average(n: int) -> WeightSolution:
    """Equal weights 1/N."""
    if n < 1:
        raise UsageError("need at least one unit")
    w = np.full(n, 1.0 / n)
    kkt = {"sum_violation": 0.0, "supnorm_slack": 0.0, "stationarity_residual": 0.0}
    return WeightSolution(w, 0.0, np.zeros(n), 0.0, kkt, 0, STATUS_OPTIMAL)


def ridge_recentered(cov, tau: float) -> WeightSolution:
    """Closed-form minimizer of 0.5 w'Sw + tau||w - 1/N||^2 on the simplex plane.

    ``w = inv(S + 2 tau I) 1 / (1' inv(S + 2 tau I) 1)``; the recentering
    constant provably does not matter under w'1 = 1.
    """
    sigma = _sigma_of(cov)
    if tau < 0:
        raise UsageError("ridge penalty must be nonnegative")
    n = sigma.shape[0]
    m = sigma + 2.0 * tau * np.eye(n)
    try:
        m1, cond = solve_linear(m, np.ones(n))
    except SingularMatrixError:
        raise SingularMatrixError("S + 2 tau I singular (tau = 0 with singular S)") from None
    denom = float(np.sum(m1))
    if denom == 0.0:
        raise SingularMatrixError("degenerate ridge system")
    w = m1 / denom
    mu = -float(np.mean(sigma @ w + 2.0 * tau * (w - 1.0 / n)))
    kkt = {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": 0.0,
        "stationarity_residual": float(np.max(np.abs(sigma @ w + 2.0 * tau * (w - 1.0 / n) + mu))),
    }
    return WeightSolution(w, mu, np.zeros(n), float(tau), kkt, 0, STATUS_OPTIMAL,
                          diagnostics={"condition_number": cond})


def _lasso_kkt(sigma, w, mu, tau):
    n = sigma.shape[0]
    v = w - 1.0 / n
    g = sigma @ w + mu
    on = np.abs(v) > 1e-10
    res_on = np.abs(g[on] + tau * np.sign(v[on])) if np.any(on) else np.array([0.0])
    res_off = np.maximum(np.abs(g[~on]) - tau, 0.0) if np.any(~on) else np.array([0.0])
    return {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": 0.0,
        "stationarity_residual": float(max(np.max(res_on), np.max(res_off))),
    }


def lasso_recentered(cov, tau: float, settings: QpSettings | None = None,
                     warm=None, return_raw: bool = False):
    """Minimize 0.5 w'Sw + tau||w - 1/N||_1 subject to w'1 = 1.

    Substituting v = w - 1/N (so 1'v = 0) and splitting v = v+ - v- with
    v+/- >= 0 turns the l1 term linear; the box engine does the rest.
    """
    sigma = _sigma_of(cov)
    if tau < 0:
        raise UsageError("lasso penalty must be nonnegative")
    n = sigma.shape[0]
    m_vec = np.full(n, 1.0 / n)
    sm = sigma @ m_vec

    P = np.empty((2 * n, 2 * n))
    P[:n, :n] = sigma
    P[:n, n:] = -sigma
    P[n:, :n] = -sigma
    P[n:, n:] = sigma
    q = np.concatenate([sm + tau, -sm + tau])
    A = np.zeros((2 * n + 1, 2 * n))
    A[0, :n] = 1.0
    A[0, n:] = -1.0
    A[1:, :] = np.eye(2 * n)
    lo = np.zeros(2 * n + 1)
    hi = np.concatenate([[0.0], np.full(2 * n, np.inf)])

    qp = solve_box_qp(P, q, A, lo, hi, warm=warm, settings=settings)
    v = qp.x[:n] - qp.x[n:]
    w = m_vec + v
    mu = float(qp.y[0])
    kkt = _lasso_kkt(sigma, w, mu, tau)
    status = STATUS_OPTIMAL if (
        kkt["sum_violation"] <= 1e-9 and kkt["stationarity_residual"] <= 1e-7
    ) else STATUS_MAX_ITER
    sol = WeightSolution(w, mu, np.zeros(n), float(tau), kkt, qp.iterations, status,
                         diagnostics={"engine_converged": qp.converged, "polished": qp.polished})
    if return_raw:
        return sol, (qp.x, qp.z, qp.y, qp.rho)
    return sol


def gec_weights(cov, c: float, settings: QpSettings | None = None) -> WeightSolution:
    """Minimum-variance weights under the gross-exposure bound ||w||_1 <= c.

    Solved as a nonnegative QP on the split w = w+ - w-; always feasible
    since the simple average has unit gross exposure.
    """
    sigma = _sigma_of(cov)
    if c < 1.0:
        raise UsageError("exposure bound must be >= 1")
    n = sigma.shape[0]

    P = np.empty((2 * n, 2 * n))
    P[:n, :n] = sigma
    P[:n, n:] = -sigma
    P[n:, :n] = -sigma
    P[n:, n:] = sigma
    q = np.zeros(2 * n)
    A = np.zeros((2 * n + 2, 2 * n))
    A[0, :n] = 1.0
    A[0, n:] = -1.0
    A[1, :] = 1.0
    A[2:, :] = np.eye(2 * n)
    lo = np.concatenate([[1.0, 0.0], np.zeros(2 * n)])
    hi = np.concatenate([[1.0, float(c)], np.full(2 * n, np.inf)])

    qp = solve_box_qp(P, q, A, lo, hi, settings=settings)
    w = qp.x[:n] - qp.x[n:]
    mu = float(qp.y[0])
    kkt = {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": max(float(np.sum(np.abs(w))) - c, 0.0),
        "stationarity_residual": qp.kkt_residual,
    }
    status = STATUS_OPTIMAL if (
        kkt["sum_violation"] <= 1e-9 and kkt["supnorm_slack"] <= 1e-8 and qp.kkt_residual <= 1e-6
    ) else STATUS_MAX_ITER
    return WeightSolution(w, mu, np.zeros(n), float(c), kkt, qp.iterations, status,
                          diagnostics={"gross_exposure": float(np.sum(np.abs(w))),
                                       "engine_converged": qp.converged})


def kmeans(points, k: int, rng: RngStream, restarts: int = 10, max_iter: int = 300):
    """Squared-Euclidean K-means with k-means++ seeding.

    Best of ``restarts`` runs by within-cluster sum of squares; a restart
    that produces an empty cluster is re-seeded from its own substream.
    Deterministic given ``(points, k, rng)``.
    """
    pts = np.asarray(points, dtype=np.float64)
    n = pts.shape[0]
    if not 1 <= k <= n:
        raise UsageError("need 1 <= k <= number of points")
    restarts = min(int(restarts), 100)

    best_labels, best_wcss = None, np.inf
    for r in range(restarts):
        gen = rng.substream(r).generator()
        for _attempt in range(50):
            centers = _kmeanspp(pts, k, gen)
            labels, wcss, ok = _lloyd(pts, centers, k, max_iter)
            if ok:
                break
        if ok and wcss < best_wcss:
            best_wcss, best_labels = wcss, labels
    if best_labels is None:
        raise UsageError("k-means failed to produce a valid partition")
    return best_labels, best_wcss


def _kmeanspp(pts, k, gen):
    n = pts.shape[0]
    centers = np.empty((k, pts.shape[1]))
    centers[0] = pts[gen.integers(n)]
    d2 = np.sum((pts - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = float(d2.sum())
        if total <= 0.0:
            centers[j] = pts[gen.integers(n)]
        else:
            centers[j] = pts[gen.choice(n, p=d2 / total)]
        d2 = np.minimum(d2, np.sum((pts - centers[j]) ** 2, axis=1))
    return centers


def _lloyd(pts, centers, k, max_iter):
    labels = None
    for _ in range(max_iter):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_labels = np.argmin(d2, axis=1)
        counts = np.bincount(new_labels, minlength=k)
        if np.any(counts == 0):
            return None, np.inf, False
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            centers[j] = pts[labels == j].mean(axis=0)
    d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
    wcss = float(d2[np.arange(pts.shape[0]), labels].sum())
    return labels, wcss, True


def _grouped_classical(errors, groups: GroupStructure) -> WeightSolution:
    """Classical weights on the K group-average series, split equally within groups."""
    g = groups.membership
    k = groups.n_groups
    sizes = groups.sizes
    grouped = np.zeros((errors.shape[0], k))
    for j in range(k):
        grouped[:, j] = errors[:, g == j].mean(axis=1)
    core_sol = classical_weights(sample_vc(grouped))
    w = core_sol.w[g] / sizes[g]
    kkt = {"sum_violation": abs(float(np.sum(w)) - 1.0),
           "supnorm_slack": 0.0,
           "stationarity_residual": core_sol.kkt["stationarity_residual"]}
    return WeightSolution(w, core_sol.gamma, np.zeros(errors.shape[1]), 0.0, kkt, 0,
                          STATUS_OPTIMAL, diagnostics=dict(core_sol.diagnostics))


def pc_grouping_weights(errors, k: int, q: int, rng: RngStream,
                        restarts: int = 10) -> tuple[WeightSolution, GroupStructure]:
    """Estimate membership by K-means on the top right-singular vectors of the
    error matrix, then apply group-oracle weighting to the found partition.

    Columns of the loading matrix are sign-fixed (largest-magnitude entry
    positive) so the decomposition is deterministic.
    """
    e = np.asarray(errors, dtype=np.float64)
    t, n = e.shape
    if not 1 <= k <= n:
        raise UsageError("need 1 <= K <= N")
    if not 1 <= q <= min(t, n):
        raise UsageError("need 1 <= q <= min(T, N)")
    _, _, vt = np.linalg.svd(e, full_matrices=False)
    loadings = vt.T[:, :q].copy()
    for j in range(loadings.shape[1]):
        i = int(np.argmax(np.abs(loadings[:, j])))
        if loadings[i, j] < 0:
            loadings[:, j] = -loadings[:, j]
    labels, _ = kmeans(loadings, k, rng, restarts=restarts)
    # relabel in order of first appearance so the structure is canonical
    order = {}
    for lab in labels:
        if int(lab) not in order:
            order[int(lab)] = len(order)
    groups = GroupStructure(np.array([order[int(lab)] for lab in labels]))
    return _grouped_classical(e, groups), groups


def oracle_membership_weights(errors, groups: GroupStructure) -> WeightSolution:
    """Group-average the error series with the true membership, then apply
    classical weights on the K x K sample VC, split equally within groups."""
    e = np.asarray(errors, dtype=np.float64)
    if e.shape[1] != groups.n_units:
        raise UsageError("membership length does not match error columns")
    return _grouped_classical(e, groups)
