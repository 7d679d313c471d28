import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)


def rand_spd(gen: np.random.Generator, n: int, scale: float = 1.0) -> np.ndarray:
    """Random well-conditioned symmetric positive definite matrix."""
    a = gen.standard_normal((n, n))
    s = a @ a.T / n + 0.5 * np.eye(n)
    return scale * (s + s.T) / 2.0


def rand_sample_cov(gen: np.random.Generator, t: int, n: int, scale: float = 1.0) -> np.ndarray:
    """Sample covariance of a random panel (singular when t <= n)."""
    x = scale * gen.standard_normal((t, n))
    xc = x - x.mean(axis=0)
    s = xc.T @ xc / t
    return (s + s.T) / 2.0
