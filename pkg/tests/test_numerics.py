import numpy as np
import pytest

from l2relax.exceptions import ContractViolationError, NotPSDError, SingularMatrixError
from l2relax.numerics import RngStream, mvn_sample, psd_sqrt, solve_linear, sym_eigen
from l2relax.simulation import psi_core

from conftest import rand_spd


class TestSymEigen:
    def test_identity(self):
        lam, vec = sym_eigen(np.eye(3))
        assert np.allclose(lam, 1.0)
        assert np.allclose(vec @ vec.T, np.eye(3), atol=1e-10)

    def test_diagonal(self):
        lam, vec = sym_eigen(np.diag([3.0, 1.0]))
        assert np.allclose(lam, [3.0, 1.0])
        # axis-aligned eigenvectors up to sign
        assert np.allclose(np.abs(vec), np.eye(2), atol=1e-12)

    def test_random_reconstruction(self, rng):
        s = rand_spd(rng, 5) - 0.3 * np.eye(5)
        lam, vec = sym_eigen(s)
        assert np.all(np.diff(lam) <= 0)
        recon = (vec * lam) @ vec.T
        assert np.max(np.abs(recon - s)) <= 1e-9 * np.max(np.abs(s))
        assert np.max(np.abs(vec.T @ vec - np.eye(5))) <= 1e-10

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractViolationError):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))


class TestPsdSqrt:
    def test_identity(self):
        assert np.allclose(psd_sqrt(np.eye(4)), np.eye(4))

    def test_diagonal(self):
        assert np.allclose(psd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]))

    def test_tridiagonal_core(self):
        core = psi_core(2)
        root = psd_sqrt(core)
        assert np.max(np.abs(root @ root - core)) <= 1e-8

    def test_round_trip_random_sizes(self, rng):
        for n in (2, 7, 23, 50):
            s = rand_spd(rng, n)
            root = psd_sqrt(s)
            assert np.max(np.abs(root @ root - s)) <= 1e-8 * (1.0 + np.max(np.abs(s)))

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSDError):
            psd_sqrt(np.diag([1.0, -1e-6]))


class TestSolveLinear:
    def test_identity(self):
        x, _ = solve_linear(np.eye(3), np.array([1.0, 2.0, 3.0]))
        assert np.allclose(x, [1.0, 2.0, 3.0])

    def test_diagonal_inverse(self):
        x, _ = solve_linear(np.diag([1.0, 2.0, 3.0]), np.ones(3))
        assert np.allclose(x, [1.0, 0.5, 1.0 / 3.0])

    def test_random_spd_residual(self, rng):
        s = rand_spd(rng, 8)
        b = rng.standard_normal(8)
        x, cond = solve_linear(s, b)
        assert np.max(np.abs(s @ x - b)) <= 1e-9 * (1.0 + np.max(np.abs(b)))
        assert cond >= 1.0

    def test_singular_rejected(self):
        s = np.ones((3, 3))
        with pytest.raises(SingularMatrixError):
            solve_linear(s, np.ones(3))


class TestMvnSample:
    def test_zero_cov_returns_mean(self):
        mean = np.array([1.0, -2.0])
        x = mvn_sample(RngStream(1), mean, np.zeros((2, 2)), 5)
        assert np.allclose(x, mean)

    def test_deterministic(self):
        a = mvn_sample(RngStream(42, 3), np.zeros(3), np.eye(3), 10)
        b = mvn_sample(RngStream(42, 3), np.zeros(3), np.eye(3), 10)
        assert np.array_equal(a, b)

    def test_empirical_convergence(self):
        x = mvn_sample(RngStream(7), np.zeros(4), np.eye(4), 100_000)
        emp = x.T @ x / x.shape[0]
        assert np.max(np.abs(emp - np.eye(4))) < 0.02
        assert np.max(np.abs(x.mean(axis=0))) < 0.02

    def test_rejects_indefinite(self):
        with pytest.raises(NotPSDError):
            mvn_sample(RngStream(0), np.zeros(2), np.array([[1.0, 0.0], [0.0, -1.0]]), 3)


class TestRngStream:
    def test_same_key_same_draws(self):
        a = RngStream(5, 9).generator().standard_normal(16)
        b = RngStream(5, 9).generator().standard_normal(16)
        assert np.array_equal(a, b)

    def test_distinct_streams_differ(self):
        a = RngStream(5, 1).generator().standard_normal(16)
        b = RngStream(5, 2).generator().standard_normal(16)
        assert not np.array_equal(a, b)

    def test_substreams_order_independent(self):
        root = RngStream(11)
        forward = [root.substream(k).generator().standard_normal(4) for k in range(6)]
        backward = [root.substream(k).generator().standard_normal(4) for k in reversed(range(6))]
        for k in range(6):
            assert np.array_equal(forward[k], backward[5 - k])

    def test_negative_seed_accepted(self):
        a = RngStream(-3, 0).generator().standard_normal(2)
        b = RngStream(-3, 0).generator().standard_normal(2)
        assert np.array_equal(a, b)
