import numpy as np
import pytest

from l2relax.covariance import Panel, forecast_errors, lw_linear_shrinkage, sample_vc
from l2relax.exceptions import (
    DegenerateVarianceError,
    InsufficientDataError,
    MissingTargetError,
    UsageError,
)


def lw_delta_reference(x):
    """Literal triple-loop transcription of the published constant-correlation
    shrinkage intensity, kept independent of the vectorized implementation."""
    x = np.asarray(x, dtype=float)
    t, n = x.shape
    xm = x - x.mean(axis=0)
    s = xm.T @ xm / t
    std = np.sqrt(np.diag(s))

    r_bar = 0.0
    for i in range(n):
        for j in range(n):
            if i != j:
                r_bar += s[i, j] / (std[i] * std[j])
    r_bar /= n * (n - 1)

    f = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            f[i, j] = s[i, j] if i == j else r_bar * std[i] * std[j]

    pi_mat = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            pi_mat[i, j] = np.mean((xm[:, i] * xm[:, j] - s[i, j]) ** 2)
    pi_hat = pi_mat.sum()

    rho = np.trace(pi_mat)
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            th_ii = np.mean((xm[:, i] ** 2 - s[i, i]) * (xm[:, i] * xm[:, j] - s[i, j]))
            th_jj = np.mean((xm[:, j] ** 2 - s[j, j]) * (xm[:, i] * xm[:, j] - s[i, j]))
            rho += (r_bar / 2.0) * (np.sqrt(s[j, j] / s[i, i]) * th_ii
                                    + np.sqrt(s[i, i] / s[j, j]) * th_jj)

    gamma = np.sum((s - f) ** 2)
    kappa = (pi_hat - rho) / gamma
    return max(0.0, min(1.0, kappa / t))


class TestPanel:
    def test_rejects_short_panel(self):
        with pytest.raises(UsageError):
            Panel(np.ones((1, 3)))

    def test_rejects_nan(self):
        v = np.ones((3, 2))
        v[1, 1] = np.nan
        with pytest.raises(UsageError):
            Panel(v)

    def test_row_subset_keeps_target(self):
        p = Panel(np.arange(8.0).reshape(4, 2), target=np.arange(4.0))
        sub = p.rows(np.array([0, 2]))
        assert np.array_equal(sub.target, [0.0, 2.0])


class TestForecastErrors:
    def test_perfect_forecasts(self):
        y = np.array([1.0, 2.0, 3.0])
        p = Panel(np.column_stack([y, y]), target=y)
        assert np.allclose(forecast_errors(p), 0.0)

    def test_single_column(self):
        p = Panel(np.zeros((2, 1)), target=np.array([1.0, 2.0]))
        assert np.allclose(forecast_errors(p), [[1.0], [2.0]])

    def test_matches_elementwise_oracle(self, rng):
        f = rng.standard_normal((5, 3))
        y = rng.standard_normal(5)
        p = Panel(f, target=y)
        e = forecast_errors(p)
        for t in range(5):
            for i in range(3):
                assert e[t, i] == y[t] - f[t, i]

    def test_missing_target(self):
        with pytest.raises(MissingTargetError):
            forecast_errors(Panel(np.ones((3, 2))))


class TestSampleVc:
    def test_constant_columns(self):
        est = sample_vc(np.tile([1.0, 2.0], (4, 1)))
        assert np.allclose(est.sigma, 0.0)
        assert est.estimator_tag == "sample"

    def test_hand_computed_divisor_t(self):
        x = np.array([[1.0, 0.0], [-1.0, 0.0], [0.0, 0.0]])
        assert np.allclose(sample_vc(x).sigma, [[2.0 / 3.0, 0.0], [0.0, 0.0]])

    def test_centering_identity(self, rng):
        x = rng.standard_normal((7, 3))
        xc = x - x.mean(axis=0)
        uncentered = xc.T @ xc / x.shape[0]
        assert np.allclose(sample_vc(x).sigma, uncentered, atol=1e-14)

    def test_row_shift_invariance(self, rng):
        x = rng.standard_normal((9, 4))
        shift = rng.standard_normal(4)
        assert np.allclose(sample_vc(x).sigma, sample_vc(x + shift).sigma, atol=1e-12)

    def test_too_few_rows(self):
        with pytest.raises(InsufficientDataError):
            sample_vc(np.ones((1, 2)))


class TestLwShrinkage:
    def test_endpoint_zero(self, rng):
        x = rng.standard_normal((20, 5))
        est = lw_linear_shrinkage(x, shrink=0.0)
        assert np.allclose(est.sigma, sample_vc(x).sigma)
        assert est.shrinkage_intensity == 0.0

    def test_endpoint_one_is_constant_correlation(self, rng):
        x = rng.standard_normal((20, 5))
        est = lw_linear_shrinkage(x, shrink=1.0)
        s = sample_vc(x).sigma
        std = np.sqrt(np.diag(s))
        corr = est.sigma / np.outer(std, std)
        off = corr[~np.eye(5, dtype=bool)]
        assert np.allclose(off, off[0], atol=1e-12)
        assert np.allclose(np.diag(est.sigma), np.diag(s))

    def test_intensity_matches_reference(self, rng):
        x = rng.standard_normal((60, 10)) @ rand_corr_chol(rng, 10)
        est = lw_linear_shrinkage(x)
        assert est.shrinkage_intensity == pytest.approx(lw_delta_reference(x), abs=1e-10)

    def test_psd_of_convex_combination(self, rng):
        x = rng.standard_normal((15, 12))  # T > N barely; shrinkage active
        est = lw_linear_shrinkage(x)
        assert np.linalg.eigvalsh(est.sigma).min() >= -1e-10

    def test_permutation_equivariance(self, rng):
        x = rng.standard_normal((30, 6))
        perm = rng.permutation(6)
        a = lw_linear_shrinkage(x).sigma[np.ix_(perm, perm)]
        b = lw_linear_shrinkage(x[:, perm]).sigma
        assert np.allclose(a, b, atol=1e-12)

    def test_degenerate_column(self):
        x = np.column_stack([np.ones(10), np.arange(10.0)])
        with pytest.raises(DegenerateVarianceError):
            lw_linear_shrinkage(x)


def rand_corr_chol(gen, n):
    a = gen.standard_normal((n, n)) / np.sqrt(n)
    return np.linalg.cholesky(a @ a.T + 0.4 * np.eye(n)).T
