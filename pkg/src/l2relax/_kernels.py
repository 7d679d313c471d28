"""Operator-splitting iteration kernel shared by all quadratic solvers.

The kernel solves the box-constrained QP

    minimize    0.5 x'Px + q'x
    subject to  lo <= Ax <= hi        (rows with lo == hi are equalities)

by ADMM with over-relaxation and residual-balancing penalty adaptation.
The same source is compiled with numba ``@njit`` when available; setting
the environment variable ``L2RELAX_NO_NUMBA=1`` (before import) selects
the pure-numpy path instead.  Both paths execute identical arithmetic.
"""

from __future__ import annotations

import os

import numpy as np

__all__ = ["admm_box_qp", "NUMBA_ENABLED"]

_RHO_EQ_BOOST = 1e3
_RHO_MIN = 1e-6
_RHO_MAX = 1e6


def _numba_disabled() -> bool:
    return os.environ.get("L2RELAX_NO_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


def _admm_box_qp_impl(P, q, A, AT, lo, hi, eq_mask, x, z, y,
                      rho_bar, sigma, alpha, eps_abs, eps_rel,
                      max_iter, check_every, adapt_every):
    n = P.shape[0]
    m = A.shape[0]

    rho = np.where(eq_mask, rho_bar * _RHO_EQ_BOOST, rho_bar)
    reg = P + sigma * np.eye(n) + AT @ (rho.reshape(m, 1) * A)
    minv = np.linalg.inv(reg)

    norm_q = np.max(np.abs(q)) if n > 0 else 0.0
    niter = 0
    converged = False

    while niter < max_iter:
        niter += 1

        rhs = sigma * x - q + AT @ (rho * z - y)
        x_tilde = minv @ rhs
        z_tilde = A @ x_tilde

        x = alpha * x_tilde + (1.0 - alpha) * x
        z_hat = alpha * z_tilde + (1.0 - alpha) * z
        z_new = np.minimum(np.maximum(z_hat + y / rho, lo), hi)
        y = y + rho * (z_hat - z_new)
        z = z_new

        if niter % check_every == 0 or niter == max_iter:
            ax = A @ x
            px = P @ x
            aty = AT @ y
            r_prim = np.max(np.abs(ax - z))
            r_dual = np.max(np.abs(px + q + aty))
            scale_prim = max(np.max(np.abs(ax)), np.max(np.abs(z)))
            scale_dual = max(np.max(np.abs(px)), np.max(np.abs(aty)), norm_q)
            if r_prim <= eps_abs + eps_rel * scale_prim and \
                    r_dual <= eps_abs + eps_rel * scale_dual:
                converged = True
                break

            if niter % adapt_every == 0:
                rp = r_prim / max(scale_prim, 1e-12)
                rd = r_dual / max(scale_dual, 1e-12)
                ratio = np.sqrt(rp / max(rd, 1e-16))
                if ratio > 5.0 or ratio < 0.2:
                    rho_bar = min(max(rho_bar * ratio, _RHO_MIN), _RHO_MAX)
                    rho = np.where(eq_mask, rho_bar * _RHO_EQ_BOOST, rho_bar)
                    reg = P + sigma * np.eye(n) + AT @ (rho.reshape(m, 1) * A)
                    minv = np.linalg.inv(reg)

    return x, z, y, rho_bar, niter, converged


NUMBA_ENABLED = False
admm_box_qp = _admm_box_qp_impl

if not _numba_disabled():
    try:
        import numba

        admm_box_qp = numba.njit(cache=True, fastmath=False)(_admm_box_qp_impl)
        NUMBA_ENABLED = True
    except ImportError:  # pragma: no cover - numba is a declared dependency
        pass
