import itertools

import numpy as np
import pytest

from l2relax.exceptions import SingularMatrixError, UsageError
from l2relax.numerics import psd_sqrt
from l2relax.solver import (
    GroupStructure,
    classical_weights,
    duality_gap,
    expand_block_equicorrelation,
    oracle_group_weights,
    sa_threshold,
    solve_l2_relaxation,
    weight_path,
)

from conftest import rand_sample_cov, rand_spd


def enumerate_relaxation_oracle(sigma, tau):
    """Active-set enumeration over the 2N box constraints.

    For each sign pattern, solves the equality-constrained first-order
    system and keeps the feasible candidate with the smallest norm.  The
    optimum's pattern is always enumerated, so the feasible minimum is the
    exact solution.  Independent of the splitting engine.
    """
    n = sigma.shape[0]
    best_obj, best_w = np.inf, None
    for pattern in itertools.product((-1, 0, 1), repeat=n):
        active = [i for i, p in enumerate(pattern) if p]
        m = len(active)
        dim = n + 2 + m  # w, gamma, mu_sum, nu_active
        k = np.zeros((dim, dim))
        r = np.zeros(dim)
        k[:n, :n] = np.eye(n)
        k[:n, n + 1] = 1.0                     # d/dw of mu (w'1 - 1)
        k[n + 1, :n] = 1.0
        r[n + 1] = 1.0
        for j, i in enumerate(active):
            k[:n, n + 2 + j] = sigma[i]        # d/dw of nu_i (sigma_i w + gamma -+ tau)
            k[n, n + 2 + j] = 1.0              # d/dgamma
            k[n + 2 + j, :n] = sigma[i]
            k[n + 2 + j, n] = 1.0
            r[n + 2 + j] = tau * pattern[i]
        sol, *_ = np.linalg.lstsq(k, r, rcond=None)
        if np.max(np.abs(k @ sol - r)) > 1e-9:
            continue
        w, gamma = sol[:n], sol[n]
        if m == 0:
            gamma = -0.5 * (np.max(sigma @ w) + np.min(sigma @ w))
        if np.max(np.abs(sigma @ w + gamma)) > tau + 1e-9:
            continue
        obj = 0.5 * float(w @ w)
        if obj < best_obj:
            best_obj, best_w = obj, w
    return best_w


class TestClassicalWeights:
    def test_identity_symmetry(self):
        sol = classical_weights(np.eye(5))
        assert np.allclose(sol.w, 0.2)

    def test_single_unit(self):
        sol = classical_weights(np.array([[2.0]]))
        assert np.allclose(sol.w, [1.0])

    def test_diagonal_closed_form(self):
        sol = classical_weights(np.diag([1.0, 2.0, 3.0]))
        assert np.allclose(sol.w, [6 / 11, 3 / 11, 2 / 11])
        assert sol.gamma == pytest.approx(-6 / 11, abs=1e-12)

    def test_singular_rejected(self):
        with pytest.raises(SingularMatrixError):
            classical_weights(np.ones((3, 3)))


class TestSolveRelaxation:
    def test_identity_any_tau(self):
        for tau in (0.0, 0.03, 0.5, 2.0):
            sol = solve_l2_relaxation(np.eye(4), tau)
            assert np.allclose(sol.w, 0.25, atol=1e-10)
            assert sol.gamma == pytest.approx(-0.25, abs=1e-8)
            assert sol.status == "optimal"

    def test_simple_average_above_threshold(self, rng):
        for _ in range(5):
            sigma = rand_spd(rng, 6, scale=3.0)
            tau = sa_threshold(sigma)
            sol = solve_l2_relaxation(sigma, tau)
            assert np.max(np.abs(sol.w - 1 / 6)) <= 1e-10
            sol2 = solve_l2_relaxation(sigma, tau * 1.7)
            assert np.max(np.abs(sol2.w - 1 / 6)) <= 1e-10

    def test_matches_enumeration_oracle(self, rng):
        for _ in range(6):
            sigma = rand_spd(rng, 4)
            tau = float(10 ** rng.uniform(-2.5, -0.5))
            sol = solve_l2_relaxation(sigma, tau)
            w_oracle = enumerate_relaxation_oracle(sigma, tau)
            assert np.max(np.abs(sol.w - w_oracle)) <= 1e-6

    def test_tau_zero_equals_classical(self, rng):
        sigma = rand_spd(rng, 7)
        sol = solve_l2_relaxation(sigma, 0.0)
        ref = classical_weights(sigma)
        assert np.max(np.abs(sol.w - ref.w)) <= 1e-8

    def test_singular_tau_zero_returns_fixed_point(self, rng):
        sigma = rand_sample_cov(rng, 5, 9)  # N > T: singular
        sol = solve_l2_relaxation(sigma, 0.0)
        assert abs(sol.w.sum() - 1.0) <= 1e-9
        assert sol.kkt["supnorm_slack"] <= 1e-8

    def test_scale_covariance(self, rng):
        sigma = rand_spd(rng, 5)
        tau = 0.05
        base = solve_l2_relaxation(sigma, tau)
        for c in (1e-3, 12.0, 4096.0):
            scaled = solve_l2_relaxation(c * sigma, c * tau)
            assert np.max(np.abs(scaled.w - base.w)) <= 1e-8

    def test_invariants_on_random_instances(self, rng):
        for _ in range(4):
            sigma = rand_sample_cov(rng, 30, 12, scale=2.0)
            tau = float(10 ** rng.uniform(-2, 0))
            sol = solve_l2_relaxation(sigma, tau)
            n = 12
            assert abs(sol.w.sum() - 1.0) <= 1e-9
            assert np.max(np.abs(sigma @ sol.w + sol.gamma)) <= tau + 1e-8 * (1 + tau)
            assert abs(sol.alpha.sum()) <= 1e-9
            a_hat_alpha = sigma @ sol.alpha - np.mean(sigma @ sol.alpha)
            assert np.max(np.abs(sol.w - a_hat_alpha - 1.0 / n)) <= 1e-7

    def test_negative_tau_rejected(self):
        with pytest.raises(UsageError):
            solve_l2_relaxation(np.eye(3), -0.1)


class TestDualityGap:
    def test_identity_hand_value(self):
        sol = solve_l2_relaxation(np.eye(4), 0.5)
        assert duality_gap(sol, np.eye(4)) == pytest.approx(0.0, abs=1e-12)

    def test_optimal_gap_small(self, rng):
        for _ in range(5):
            sigma = rand_sample_cov(rng, 25, 10)
            sol = solve_l2_relaxation(sigma, 0.1)
            gap = duality_gap(sol, sigma)
            assert abs(gap) <= 1e-6 * (1.0 + 0.5 * float(sol.w @ sol.w))

    def test_perturbed_primal_positive_gap(self, rng):
        sigma = rand_spd(rng, 5)
        sol = solve_l2_relaxation(sigma, 0.05)
        sol.w = sol.w.copy()
        sol.w[0] += 0.01
        sol.w[1] -= 0.01
        assert duality_gap(sol, sigma) > 0.0


class TestOracleGroupWeights:
    def test_single_group(self):
        groups = GroupStructure(np.zeros(6, dtype=int))
        sol = oracle_group_weights(np.array([[2.0]]), groups)
        assert np.allclose(sol.w, 1 / 6)

    def test_identity_core_equal_sizes(self):
        groups = GroupStructure(np.repeat([0, 1, 2], 4))
        sol = oracle_group_weights(np.eye(3), groups)
        assert np.allclose(sol.w, 1 / 12)

    def test_hand_example(self):
        groups = GroupStructure(np.array([0, 0, 1, 1]))
        core = np.array([[1.0, 0.0], [0.0, 2.0]])
        sol = oracle_group_weights(core, groups)
        assert np.allclose(sol.diagnostics["b0"], [4 / 3, 2 / 3])
        assert np.allclose(sol.w, [1 / 3, 1 / 3, 1 / 6, 1 / 6])
        assert sol.w.sum() == pytest.approx(1.0, abs=1e-12)

    def test_relaxation_recovers_oracle_on_block_matrix(self, rng):
        groups = GroupStructure(np.repeat([0, 1, 2], [4, 3, 5]))
        core = rand_spd(rng, 3)
        sigma_star = expand_block_equicorrelation(core, groups)
        expected = oracle_group_weights(core, groups).w
        sol = solve_l2_relaxation(sigma_star, 1e-8)
        assert np.max(np.abs(sol.w - expected)) <= 1e-5


class TestExpandBlock:
    def test_single_group(self):
        groups = GroupStructure(np.zeros(3, dtype=int))
        assert np.allclose(expand_block_equicorrelation([[2.5]], groups), 2.5)

    def test_identity_core_unit_groups(self):
        groups = GroupStructure(np.array([0, 1]))
        assert np.allclose(expand_block_equicorrelation(np.eye(2), groups), np.eye(2))

    def test_index_by_index(self, rng):
        groups = GroupStructure(np.array([0, 0, 1]))
        core = rand_spd(rng, 2)
        full = expand_block_equicorrelation(core, groups)
        g = groups.membership
        for i in range(3):
            for j in range(3):
                assert full[i, j] == core[g[i], g[j]]


class TestWeightPath:
    def test_singleton_grid_equals_classical(self, rng):
        sigma = rand_spd(rng, 5)
        path = weight_path(sigma, [0.0])
        assert len(path) == 1
        assert np.max(np.abs(path[0].w - classical_weights(sigma).w)) <= 1e-8

    def test_top_of_grid_is_simple_average(self, rng):
        sigma = rand_spd(rng, 6, scale=2.0)
        top = sa_threshold(sigma) * 1.2
        path = weight_path(sigma, np.linspace(0.0, top, 8))
        assert np.max(np.abs(path[-1].w - 1 / 6)) <= 1e-10

    def test_norm_monotonicity(self, rng):
        sigma = rand_sample_cov(rng, 40, 15)
        grid = np.linspace(0.0, sa_threshold(sigma), 20)
        path = weight_path(sigma, grid)
        norms = [float(np.linalg.norm(s.w)) for s in path]
        assert all(norms[i + 1] <= norms[i] + 1e-10 for i in range(len(norms) - 1))

    def test_rejects_descending_grid(self, rng):
        with pytest.raises(UsageError):
            weight_path(np.eye(3), [0.5, 0.1])


class TestSameSignProperty:
    def test_constructed_instances(self, rng):
        for _ in range(6):
            k = int(rng.integers(2, 5))
            sizes = rng.integers(2, 6, size=k)
            groups = GroupStructure(np.repeat(np.arange(k), sizes))
            n = groups.n_units
            core = rand_spd(rng, k)
            sigma_star = expand_block_equicorrelation(core, groups)
            noise = rng.standard_normal((n, n)) * 0.01
            noise = (noise + noise.T) / 2.0
            sigma = sigma_star + noise
            b0 = oracle_group_weights(core, groups).diagnostics["b0"]
            phi_e = float(np.max(np.linalg.norm(noise, axis=0)))
            bound = phi_e * float(np.max(np.abs(b0))) / np.sqrt(n)
            tau = 1.5 * bound + 1e-6
            sol = solve_l2_relaxation(sigma, tau)
            assert float(np.linalg.norm(sol.w)) <= float(np.max(np.abs(b0))) / np.sqrt(n) + 1e-8
            for g in range(k):
                a = sol.alpha[groups.membership == g]
                a = a[np.abs(a) > 1e-10]
                if a.size:
                    assert a.min() * a.max() >= 0.0
