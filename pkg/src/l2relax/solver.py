"""Weight solvers: the sup-norm-relaxed problem, its classical limit, and
the group-oracle closed forms.

The relaxed problem minimizes ``0.5*||w||^2`` over ``w'1 = 1`` and
``||Sigma w + gamma 1||_inf <= tau``.  Its dual is an l1-penalized quadratic
in a multiplier vector ``alpha`` with ``1'alpha = 0``, linked to the primal
by ``w = A alpha + 1/N`` where ``A`` is the columnwise-demeaned covariance.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._engine import QpSettings, solve_box_qp
from .exceptions import ContractViolationError, SingularMatrixError, UsageError
from .numerics import check_symmetric, solve_linear

__all__ = [
    "WeightSolution",
    "GroupStructure",
    "classical_weights",
    "solve_l2_relaxation",
    "duality_gap",
    "oracle_group_weights",
    "expand_block_equicorrelation",
    "weight_path",
    "sa_threshold",
]

STATUS_OPTIMAL = "optimal"
STATUS_MAX_ITER = "max_iter"

#: residual levels a solution must meet to be labelled optimal
_SUM_TOL = 1e-9
_SUP_TOL = 1e-8
_STAT_TOL = 1e-7


@dataclass
class WeightSolution:
    """Solved weights with duals and solve diagnostics.

    ``alpha`` is the dual vector of the sup-norm rows (difference of the
    lower and upper multipliers), ``gamma`` the equality-row multiplier of
    the covariance-KKT constraint.  Competitor methods reuse this container
    and fill the fields that apply to their own optimality systems.
    """

    w: np.ndarray
    gamma: float
    alpha: np.ndarray
    tau: float
    kkt: dict
    iterations: int
    status: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the N units into K labelled groups (labels 0..K-1)."""

    membership: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.membership, dtype=np.int64)
        if m.ndim != 1 or m.size == 0:
            raise UsageError("membership must be a nonempty 1-D label vector")
        k = int(m.max()) + 1
        if m.min() < 0 or np.unique(m).size != k:
            raise UsageError("labels must cover 0..K-1 with every group nonempty")
        object.__setattr__(self, "membership", m)

    @property
    def n_units(self) -> int:
        return int(self.membership.size)

    @property
    def n_groups(self) -> int:
        return int(self.membership.max()) + 1

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.membership, minlength=self.n_groups)

    @property
    def shares(self) -> np.ndarray:
        return self.sizes / self.n_units

    @classmethod
    def blocks(cls, sizes) -> "GroupStructure":
        """Contiguous groups of the given sizes."""
        return cls(np.repeat(np.arange(len(sizes)), sizes))


def _sigma_of(cov) -> np.ndarray:
    sigma = getattr(cov, "sigma", cov)
    return check_symmetric(sigma, name="covariance")


def classical_weights(cov) -> WeightSolution:
    """Inverse-covariance weights ``w = inv(S)1 / (1'inv(S)1)``.

    Requires an invertible covariance; callers facing singularity fall back
    to the relaxed solver with ``tau > 0``.
    """
    sigma = _sigma_of(cov)
    n = sigma.shape[0]
    try:
        s1, cond = solve_linear(sigma, np.ones(n))
    except SingularMatrixError:
        raise SingularMatrixError(
            "covariance is numerically singular; use the relaxed solver with tau > 0"
        ) from None
    denom = float(np.sum(s1))
    if denom == 0.0 or not np.isfinite(denom):
        raise SingularMatrixError("1'inv(S)1 vanished; weights undefined")
    w = s1 / denom
    gamma = -1.0 / denom
    alpha = np.zeros(n)
    kkt = {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": float(np.max(np.abs(sigma @ w + gamma))),
        "stationarity_residual": float(np.max(np.abs(sigma @ w + gamma))),
    }
    return WeightSolution(w, gamma, alpha, 0.0, kkt, 0, STATUS_OPTIMAL,
                          diagnostics={"condition_number": cond})


def sa_threshold(cov) -> float:
    """Relaxation level above which the simple average is exactly optimal."""
    sigma = _sigma_of(cov)
    n = sigma.shape[0]
    return float(np.max(np.abs(sigma @ np.ones(n)))) / n


def _relax_kkt(sigma, w, gamma, alpha, tau) -> dict:
    n = sigma.shape[0]
    a_hat_alpha = sigma @ alpha - np.mean(sigma @ alpha)
    return {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": max(float(np.max(np.abs(sigma @ w + gamma))) - tau, 0.0),
        "stationarity_residual": float(np.max(np.abs(w - a_hat_alpha - 1.0 / n))),
    }


def solve_l2_relaxation(cov, tau: float, warm=None, settings: QpSettings | None = None,
                        return_raw: bool = False):
    """Solve the relaxed weight problem at level ``tau``.

    Splitting iterations with box projection of ``Sigma w + gamma 1`` onto
    ``[-tau, tau]^N``, followed by an exact active-set polish.  ``warm`` is an
    optional raw state from a previous solve (see :func:`weight_path`).
    """
    sigma = _sigma_of(cov)
    if not np.isfinite(tau) or tau < 0:
        raise UsageError(f"tau must be a finite nonnegative real, got {tau}")
    n = sigma.shape[0]

    P = np.zeros((n + 1, n + 1))
    P[:n, :n] = np.eye(n)
    q = np.zeros(n + 1)
    A = np.zeros((n + 1, n + 1))
    A[:n, :n] = sigma
    A[:n, n] = 1.0
    A[n, :n] = 1.0
    lo = np.concatenate([np.full(n, -tau), [1.0]])
    hi = np.concatenate([np.full(n, tau), [1.0]])

    qp = solve_box_qp(P, q, A, lo, hi, warm=warm, settings=settings)

    w = qp.x[:n].copy()
    gamma = float(qp.x[n])
    alpha = -qp.y[:n]
    if np.max(np.abs(alpha), initial=0.0) <= 1e-12:
        # constraint slack everywhere: gamma is non-unique, report the
        # sup-norm-minimizing (Chebyshev-center) multiplier
        sw = sigma @ w
        gamma = -0.5 * (float(np.max(sw)) + float(np.min(sw)))
        alpha = np.zeros(n)

    kkt = _relax_kkt(sigma, w, gamma, alpha, tau)
    optimal = (
        kkt["sum_violation"] <= _SUM_TOL
        and kkt["supnorm_slack"] <= _SUP_TOL * (1.0 + tau)
        and kkt["stationarity_residual"] <= _STAT_TOL
    )
    status = STATUS_OPTIMAL if optimal else STATUS_MAX_ITER
    diagnostics = {
        "engine_converged": qp.converged,
        "polished": qp.polished,
        "engine_kkt_residual": qp.kkt_residual,
        "rho": qp.rho,
    }
    sol = WeightSolution(w, gamma, alpha, float(tau), kkt, qp.iterations, status, diagnostics)
    if return_raw:
        return sol, (qp.x, qp.z, qp.y, qp.rho)
    return sol


def duality_gap(sol: WeightSolution, cov) -> float:
    """Primal value plus dual objective; zero at an exact optimum.

    The dual objective is
    ``0.5 a'A'Aa + (1/N) 1'Sigma a + tau ||a||_1 - 1/(2N)`` with
    ``A = (I - 11'/N) Sigma`` evaluated at ``a = sol.alpha``.
    """
    sigma = _sigma_of(cov)
    n = sigma.shape[0]
    alpha = sol.alpha
    sa = sigma @ alpha
    a_alpha = sa - np.mean(sa)
    dual = (
        0.5 * float(a_alpha @ a_alpha)
        + float(np.sum(sa)) / n
        + sol.tau * float(np.sum(np.abs(alpha)))
        - 0.5 / n
    )
    primal = 0.5 * float(sol.w @ sol.w)
    return primal + dual


def expand_block_equicorrelation(core, groups: GroupStructure) -> np.ndarray:
    """Blow a K x K core up to the N x N block-equicorrelation matrix."""
    core = check_symmetric(core, name="core")
    g = groups.membership
    if core.shape[0] != groups.n_groups:
        raise ContractViolationError("core dimension does not match number of groups")
    return core[np.ix_(g, g)]


def oracle_group_weights(core, groups: GroupStructure) -> WeightSolution:
    """Within-group-equal weights for a known block-equicorrelation core.

    Group levels are ``b0 = r^{ -1} o inv(C)1 / (1'inv(C)1)`` (Hadamard
    scaling by inverse group shares); unit ``i`` in group ``k`` receives
    ``b0_k / N``.
    """
    core = check_symmetric(core, name="core")
    k = groups.n_groups
    n = groups.n_units
    if core.shape[0] != k:
        raise ContractViolationError("core dimension does not match number of groups")
    try:
        c1, cond = solve_linear(core, np.ones(k))
    except SingularMatrixError:
        raise SingularMatrixError("singular core matrix; oracle weights undefined") from None
    denom = float(np.sum(c1))
    if denom == 0.0:
        raise SingularMatrixError("1'inv(core)1 vanished; oracle weights undefined")
    shares = groups.shares
    b0 = (c1 / denom) / shares
    w = b0[groups.membership] / n
    sigma_star = expand_block_equicorrelation(core, groups)
    gamma = -float(np.mean(sigma_star @ w))
    kkt = {
        "sum_violation": abs(float(np.sum(w)) - 1.0),
        "supnorm_slack": float(np.max(np.abs(sigma_star @ w + gamma))),
        "stationarity_residual": float(np.max(np.abs(sigma_star @ w + gamma))),
    }
    return WeightSolution(w, gamma, np.zeros(n), 0.0, kkt, 0, STATUS_OPTIMAL,
                          diagnostics={"b0": b0, "condition_number": cond})


def weight_path(cov, tau_grid, settings: QpSettings | None = None) -> list[WeightSolution]:
    """Solve along an ascending grid of relaxation levels, warm-starting
    each solve from the previous one."""
    grid = np.asarray(tau_grid, dtype=np.float64).ravel()
    if grid.size == 0:
        raise UsageError("tau grid must be nonempty")
    if np.any(grid < 0) or np.any(np.diff(grid) < 0):
        raise UsageError("tau grid must be nonnegative and ascending")
    sols = []
    warm = None
    for tau in grid:
        sol, warm = solve_l2_relaxation(cov, float(tau), warm=warm,
                                        settings=settings, return_raw=True)
        sols.append(sol)
    return sols
