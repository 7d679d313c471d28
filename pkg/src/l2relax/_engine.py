"""Box-constrained QP front end: ADMM iterations plus an exact polish step.

The polish detects the active constraint set at the ADMM fixed point,
solves the reduced equality-constrained KKT system exactly, and accepts
the candidate only when it improves the composite KKT residual.  This is
what delivers 1e-8-level accuracy and exact dual multipliers on top of the
operator-splitting iterations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._kernels import admm_box_qp

__all__ = ["QpSettings", "QpSolution", "solve_box_qp"]

_ACTIVE_TOL = 1e-7
_DUAL_TOL = 1e-9
_MAX_POLISH_ROUNDS = 40


@dataclass(frozen=True)
class QpSettings:
    eps_abs: float = 1e-9
    eps_rel: float = 1e-9
    max_iter: int = 200_000
    rho: float = 0.1
    sigma: float = 1e-6
    over_relax: float = 1.6
    check_every: int = 25
    adapt_every: int = 200
    polish: bool = True


@dataclass
class QpSolution:
    x: np.ndarray
    z: np.ndarray
    y: np.ndarray
    iterations: int
    converged: bool
    polished: bool
    kkt_residual: float
    rho: float
    diagnostics: dict = field(default_factory=dict)


def _composite_kkt(P, q, A, lo, hi, x, y) -> float:
    """Max of primal violation, stationarity residual, and complementarity."""
    ax = A @ x
    prim = max(float(np.max(ax - hi, initial=0.0)), float(np.max(lo - ax, initial=0.0)), 0.0)
    stat = float(np.max(np.abs(P @ x + q + A.T @ y)))
    y_pos = np.maximum(y, 0.0)
    y_neg = np.maximum(-y, 0.0)
    fin_hi = np.isfinite(hi)
    fin_lo = np.isfinite(lo)
    gap_hi = np.where(fin_hi, np.abs(np.where(fin_hi, hi, 0.0) - ax), 1.0)
    gap_lo = np.where(fin_lo, np.abs(ax - np.where(fin_lo, lo, 0.0)), 1.0)
    comp_hi = np.where(fin_hi, y_pos * gap_hi, y_pos)
    comp_lo = np.where(fin_lo, y_neg * gap_lo, y_neg)
    comp = float(max(np.max(comp_hi, initial=0.0), np.max(comp_lo, initial=0.0)))
    return max(prim, stat, comp)


def _solve_kkt(P, q, A, active_idx, targets):
    """Exact solve of the equality-constrained KKT system for an active set."""
    n = P.shape[0]
    k = active_idx.size
    kkt = np.zeros((n + k, n + k))
    kkt[:n, :n] = P
    rhs = np.empty(n + k)
    rhs[:n] = -q
    if k:
        G = A[active_idx]
        kkt[:n, n:] = G.T
        kkt[n:, :n] = G
        rhs[n:] = targets
    scale = max(1.0, float(np.max(np.abs(kkt))))
    try:
        sol = np.linalg.solve(kkt, rhs)
        if not np.all(np.isfinite(sol)) or \
                float(np.max(np.abs(kkt @ sol - rhs))) > 1e-8 * scale * max(1.0, float(np.max(np.abs(sol)))):
            raise np.linalg.LinAlgError
    except np.linalg.LinAlgError:
        sol, *_ = np.linalg.lstsq(kkt, rhs, rcond=None)
        if not np.all(np.isfinite(sol)):
            return None, None
    return sol[:n], sol[n:]


def _polish(P, q, A, lo, hi, sol: QpSolution):
    """Active-set refinement seeded by the ADMM iterate; returns best candidate."""
    m = A.shape[0]
    eq = np.isclose(lo, hi, rtol=0.0, atol=0.0)
    bound_scale = np.where(np.isfinite(hi), np.abs(hi), 0.0) + np.where(np.isfinite(lo), np.abs(lo), 0.0)
    tol_act = _ACTIVE_TOL * (1.0 + bound_scale)

    z, y = sol.z, sol.y
    lower = ~eq & np.isfinite(lo) & ((z - lo <= tol_act) | (y < -_ACTIVE_TOL))
    upper = ~eq & np.isfinite(hi) & ((hi - z <= tol_act) | (y > _ACTIVE_TOL))
    both = lower & upper
    if np.any(both):
        upper[both] = y[both] > 0
        lower[both] = ~upper[both]

    best = None
    best_res = np.inf
    for _ in range(_MAX_POLISH_ROUNDS):
        active = eq | lower | upper
        active_idx = np.flatnonzero(active)
        targets = np.where(eq[active_idx], lo[active_idx],
                           np.where(upper[active_idx], hi[active_idx], lo[active_idx]))
        x_new, nu = _solve_kkt(P, q, A, active_idx, targets)
        if x_new is None:
            break
        y_new = np.zeros(m)
        y_new[active_idx] = nu
        res = _composite_kkt(P, q, A, lo, hi, x_new, y_new)
        if res < best_res:
            best_res = res
            best = (x_new, y_new)

        ax = A @ x_new
        viol_hi = np.where(~active & np.isfinite(hi), ax - hi, -np.inf)
        viol_lo = np.where(~active & np.isfinite(lo), lo - ax, -np.inf)
        wrong_hi = upper & (y_new < -_DUAL_TOL)
        wrong_lo = lower & (y_new > _DUAL_TOL)
        worst_hi = float(np.max(viol_hi, initial=-np.inf))
        worst_lo = float(np.max(viol_lo, initial=-np.inf))
        feas_tol = 1e-11 * (1.0 + float(np.max(np.abs(ax))))
        changed = False
        if max(worst_hi, worst_lo) > feas_tol:
            upper |= viol_hi > feas_tol
            lower |= viol_lo > feas_tol
            changed = True
        elif np.any(wrong_hi) or np.any(wrong_lo):
            upper[wrong_hi] = False
            lower[wrong_lo] = False
            changed = True
        if not changed:
            break
    if best is None:
        return None, np.inf
    x_new, y_new = best
    ax = A @ x_new
    z_new = np.minimum(np.maximum(ax, lo), hi)
    return QpSolution(x_new, z_new, y_new, sol.iterations, sol.converged, True,
                      best_res, sol.rho, dict(sol.diagnostics)), best_res


def solve_box_qp(P, q, A, lo, hi, warm=None, settings: QpSettings | None = None) -> QpSolution:
    """Solve ``min 0.5 x'Px + q'x  s.t.  lo <= Ax <= hi``.

    ``warm`` is an optional ``(x, z, y)`` triple used to warm-start the
    splitting iterations (used by the tuning-path solvers).
    """
    cfg = settings or QpSettings()
    P = np.ascontiguousarray(P, dtype=np.float64)
    q = np.ascontiguousarray(q, dtype=np.float64)
    A = np.ascontiguousarray(A, dtype=np.float64)
    AT = np.ascontiguousarray(A.T)
    lo = np.ascontiguousarray(lo, dtype=np.float64)
    hi = np.ascontiguousarray(hi, dtype=np.float64)
    m, n = A.shape
    eq_mask = np.isclose(lo, hi, rtol=0.0, atol=0.0)

    rho0 = cfg.rho
    if warm is None:
        x0 = np.zeros(n)
        z0 = np.minimum(np.maximum(np.zeros(m), lo), hi)
        y0 = np.zeros(m)
    else:
        x0 = np.ascontiguousarray(warm[0], dtype=np.float64).copy()
        z0 = np.minimum(np.maximum(np.ascontiguousarray(warm[1], dtype=np.float64), lo), hi)
        y0 = np.ascontiguousarray(warm[2], dtype=np.float64).copy()
        if len(warm) > 3 and np.isfinite(warm[3]) and warm[3] > 0:
            rho0 = float(warm[3])

    x, z, y, rho_bar, niter, converged = admm_box_qp(
        P, q, A, AT, lo, hi, eq_mask, x0, z0, y0,
        rho0, cfg.sigma, cfg.over_relax, cfg.eps_abs, cfg.eps_rel,
        cfg.max_iter, cfg.check_every, cfg.adapt_every,
    )
    res = _composite_kkt(P, q, A, lo, hi, x, y)
    sol = QpSolution(x, z, y, niter, bool(converged), False, res, float(rho_bar))

    if cfg.polish:
        polished, pres = _polish(P, q, A, lo, hi, sol)
        if polished is not None and pres <= max(res, 1e-12):
            polished.diagnostics["admm_kkt_residual"] = res
            return polished
    return sol
