"""Dense matrix primitives and seeded random sampling.

Everything here is a thin, contract-checked layer over LAPACK (through
numpy/scipy) plus a counter-based RNG.  All functions are pure; arrays are
treated as immutable and are safe to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import (
    ContractViolationError,
    NotPSDError,
    SingularMatrixError,
)

__all__ = [
    "RngStream",
    "as_matrix",
    "check_symmetric",
    "sym_eigen",
    "psd_sqrt",
    "solve_linear",
    "mvn_sample",
]

_U64 = np.uint64
_SUBSTREAM_STRIDE = 1 << 20


@dataclass(frozen=True)
class RngStream:
    """Identifier of a reproducible random stream.

    Distinct ``(seed, stream_id)`` pairs index statistically independent
    Philox (counter-based) streams, so replications can be distributed over
    any number of workers and still reproduce bit-identical draws.
    """

    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        mask = (1 << 64) - 1
        key = np.array([self.seed & mask, self.stream_id & mask], dtype=_U64)
        return np.random.Generator(np.random.Philox(key=key))

    def substream(self, k: int) -> "RngStream":
        """Child stream ``k``; collision-free for k < 2**20 and shallow nesting."""
        if not 0 <= k < _SUBSTREAM_STRIDE:
            raise ValueError(f"substream index must be in [0, {_SUBSTREAM_STRIDE})")
        mask = (1 << 64) - 1
        child = ((self.stream_id & mask) * _SUBSTREAM_STRIDE + k) & mask
        return RngStream(self.seed, child)


def as_matrix(x, name: str = "matrix") -> np.ndarray:
    """Validate and convert to a float64 2-D array with finite entries."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ContractViolationError(f"{name} must be 2-dimensional, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise ContractViolationError(f"{name} dimensions must be strictly positive")
    if not np.all(np.isfinite(a)):
        raise ContractViolationError(f"{name} contains non-finite entries")
    return a


def check_symmetric(s, rtol: float = 1e-12, name: str = "matrix") -> np.ndarray:
    """Validate symmetry within relative tolerance; returns the symmetrized array."""
    a = as_matrix(s, name)
    if a.shape[0] != a.shape[1]:
        raise ContractViolationError(f"{name} must be square, got shape {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    asym = float(np.max(np.abs(a - a.T)))
    if asym > rtol * scale:
        raise ContractViolationError(
            f"{name} is not symmetric (relative asymmetry {asym / scale:.3e} > {rtol:.1e})"
        )
    return (a + a.T) / 2.0


def sym_eigen(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a symmetric matrix, eigenvalues descending.

    Returns ``(eigenvalues, eigenvectors)`` with ``S = V diag(lam) V'`` and
    orthonormal columns in ``V``.
    """
    a = check_symmetric(s)
    lam, vec = np.linalg.eigh(a)
    order = np.argsort(lam)[::-1]
    return lam[order], np.ascontiguousarray(vec[:, order])


def psd_sqrt(s, tol: float = 1e-10) -> np.ndarray:
    """Symmetric square root of a PSD matrix.

    Eigenvalues in ``[-tol*max(1, lam_max), 0)`` are clipped to zero
    (sample-covariance rounding); anything lower raises :class:`NotPSDError`.
    """
    lam, vec = sym_eigen(s)
    floor = -tol * max(1.0, float(lam[0]) if lam.size else 1.0)
    if np.any(lam < floor):
        raise NotPSDError(
            f"matrix is not PSD: min eigenvalue {float(lam.min()):.3e} below tolerance {floor:.3e}"
        )
    lam = np.maximum(lam, 0.0)
    root = (vec * np.sqrt(lam)) @ vec.T
    return (root + root.T) / 2.0


def solve_linear(s, b, pivot_rtol: float = 1e-13, compute_cond: bool = True):
    """Solve ``S x = b`` for symmetric S via LU with partial pivoting.

    Returns ``(x, cond)`` where ``cond`` is the 2-norm condition number of S
    (a cheap pivot-ratio proxy when ``compute_cond`` is off).  Raises
    :class:`SingularMatrixError` when any pivot falls below
    ``pivot_rtol * ||S||_inf``.
    """
    a = check_symmetric(s)
    rhs = np.asarray(b, dtype=np.float64)
    if rhs.shape[0] != a.shape[0]:
        raise ContractViolationError("right-hand side length does not match matrix")
    norm = float(np.max(np.abs(a)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
    min_pivot = float(np.min(np.abs(np.diag(lu))))
    if norm == 0.0 or min_pivot < pivot_rtol * norm:
        raise SingularMatrixError(
            f"matrix numerically singular (min pivot {min_pivot:.3e}, scale {norm:.3e})"
        )
    x = scipy.linalg.lu_solve((lu, piv), rhs, check_finite=False)
    if compute_cond:
        svals = np.linalg.svd(a, compute_uv=False)
        cond = float(svals[0] / svals[-1]) if svals[-1] > 0 else np.inf
    else:
        cond = norm / min_pivot
    return x, cond


def mvn_sample(rng: RngStream, mean, cov, n: int) -> np.ndarray:
    """Draw ``n`` multivariate-normal vectors as an ``n x dim`` matrix.

    Uses the symmetric PSD square root of ``cov`` so singular covariances are
    handled deterministically.
    """
    mu = np.asarray(mean, dtype=np.float64).ravel()
    root = psd_sqrt(cov)
    if root.shape[0] != mu.shape[0]:
        raise ContractViolationError("mean and covariance dimensions do not match")
    if n < 0:
        raise ContractViolationError("sample count must be nonnegative")
    z = rng.generator().standard_normal((n, mu.shape[0]))
    return mu + z @ root
