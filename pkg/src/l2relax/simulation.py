"""Monte Carlo data generators and the bias-variance demonstration.

Three forecaster DGPs share a block-equicorrelated factor structure with a
tridiagonal K x K core; a separate five-factor return model (parameters
bundled in ``ff5_params.json``) feeds the portfolio backtests.  Everything
is deterministic under an :class:`RngStream` and replication-order
independent.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .covariance import Panel, forecast_errors, sample_vc
from .exceptions import UsageError
from .numerics import RngStream, check_symmetric, psd_sqrt, solve_linear
from .solver import solve_l2_relaxation
from .tuning import TuningGrid

__all__ = [
    "DgpSpec",
    "Ff5Spec",
    "psi_core",
    "dgp_oracle_weights",
    "generate_dgp",
    "compute_snr",
    "load_ff5_params",
    "generate_ff5",
    "bias_variance_sweep",
]

SIGMA_Y_LOW_SNR = 1.0
SIGMA_Y_HIGH_SNR = 0.1


@dataclass(frozen=True)
class DgpSpec:
    """Configuration of the grouped-forecaster simulations."""

    dgp: int
    t: int
    n: int
    k: int
    sigma_u: float = 5.0
    sigma_y: float = SIGMA_Y_LOW_SNR
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        if self.dgp not in (1, 2, 3):
            raise UsageError(f"dgp must be 1, 2 or 3, got {self.dgp}")
        if self.t < 2:
            raise UsageError("need T >= 2")
        if self.k < 1 or self.n < self.k or self.n % self.k != 0:
            raise UsageError("N must be a positive multiple of K (equal group sizes)")
        if self.sigma_u < 0 or self.sigma_y < 0:
            raise UsageError("noise scales must be nonnegative")

    @property
    def group_size(self) -> int:
        return self.n // self.k

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream_id)


@dataclass(frozen=True)
class Ff5Spec:
    """Configuration of the simulated five-factor return panel."""

    mu_f: np.ndarray
    cov_f: np.ndarray
    mu_lambda: np.ndarray
    cov_lambda: np.ndarray
    n: int = 100
    t: int = 240
    cov_u: np.ndarray | None = None
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "mu_f", np.asarray(self.mu_f, dtype=np.float64).ravel())
        object.__setattr__(self, "mu_lambda", np.asarray(self.mu_lambda, dtype=np.float64).ravel())
        object.__setattr__(self, "cov_f", check_symmetric(self.cov_f, rtol=1e-3, name="cov_f"))
        object.__setattr__(self, "cov_lambda",
                           check_symmetric(self.cov_lambda, rtol=1e-3, name="cov_lambda"))
        nfac = self.mu_f.size
        if self.mu_lambda.size != nfac or self.cov_f.shape[0] != nfac \
                or self.cov_lambda.shape[0] != nfac:
            raise UsageError("factor parameter dimensions are inconsistent")
        if self.n < 1 or self.t < 2:
            raise UsageError("need N >= 1 and T >= 2")
        if self.cov_u is not None:
            cu = check_symmetric(self.cov_u, name="cov_u")
            if cu.shape[0] != self.n:
                raise UsageError("cov_u must be N x N")
            object.__setattr__(self, "cov_u", cu)

    def residual_cov(self) -> np.ndarray:
        # the calibrated residual VC comes from unavailable real-data fits;
        # default to homoskedastic noise with standard deviation 5
        if self.cov_u is not None:
            return self.cov_u
        return 25.0 * np.eye(self.n)

    def rng(self) -> RngStream:
        return RngStream(self.seed, self.stream_id)


def psi_core(k: int) -> np.ndarray:
    """Tridiagonal K x K core: diagonal (j+1)/2 for j = 1..K, off-diagonal 0.1."""
    if k < 1:
        raise UsageError("need K >= 1")
    core = np.zeros((k, k))
    for j in range(k):
        core[j, j] = (j + 2) / 2.0
    idx = np.arange(k - 1)
    core[idx, idx + 1] = 0.1
    core[idx + 1, idx] = 0.1
    return core


def dgp_oracle_weights(core, n: int, k: int) -> np.ndarray:
    """Population minimum-variance weights of the grouped design:
    ``kron(inv(C)1, 1_{N1}) / (N1 * 1'inv(C)1)``."""
    core = check_symmetric(core, name="core")
    if core.shape[0] != k or n % k != 0:
        raise UsageError("core must be K x K with N a multiple of K")
    n1 = n // k
    b, _ = solve_linear(core, np.ones(k))
    denom = n1 * float(np.sum(b))
    if denom == 0.0:
        raise UsageError("degenerate core: weights undefined")
    return np.kron(b, np.ones(n1)) / denom


def _loading_root(spec: DgpSpec) -> np.ndarray:
    """Block factor loading matrix: N1^{-1/2} (core^{1/2} kron ones-block)."""
    n1 = spec.group_size
    core_root = psd_sqrt(psi_core(spec.k))
    block = np.ones((n1, n1))
    return np.kron(core_root, block) / np.sqrt(n1)


def generate_dgp(spec: DgpSpec) -> Panel:
    """Simulate one replication: T + 1 rows of forecasts plus aligned targets.

    The first T rows are the training pairs; the extra row supports the
    one-step-ahead evaluation.  Draw order is fixed (loading perturbation,
    AR parameters, factors, noise, target noise) so results are reproducible
    for any scheduling of replications.
    """
    gen = spec.rng().generator()
    n, k, t = spec.n, spec.k, spec.t
    n1 = spec.group_size
    rows = t + 1

    root = _loading_root(spec)
    f_root = root
    if spec.dgp == 3:
        # loadings perturbed once per replication, target keeps clean loadings
        f_root = root + gen.normal(0.0, n1 ** -0.25, size=(n, n))

    if spec.dgp == 2:
        rho = gen.uniform(0.0, 0.9, size=n)
        eta = np.empty((rows, n))
        state = gen.standard_normal(n)
        innov_sd = np.sqrt(1.0 - rho ** 2)
        for s in range(rows):
            state = rho * state + innov_sd * gen.standard_normal(n)
            eta[s] = state
    else:
        eta = gen.standard_normal((rows, n))

    u = spec.sigma_u * gen.standard_normal((rows, n))
    u_y = spec.sigma_y * gen.standard_normal(rows)

    w_star = dgp_oracle_weights(psi_core(k), n, k)
    f = eta @ f_root.T + u
    y = eta @ (root.T @ w_star) + u_y
    labels = tuple(f"f{i + 1}" for i in range(n))
    return Panel(f, labels, y)


def true_groups(spec: DgpSpec) -> np.ndarray:
    """Membership labels of the simulated design (contiguous equal blocks)."""
    return np.repeat(np.arange(spec.k), spec.group_size)


def compute_snr(psi, omega_u, w_star, sigma_y: float) -> float:
    """Signal-to-noise ratio of the simulated target.

    Projects the idiosyncratic noise out of the forecasts and compares the
    predictable variance with the remaining noise variance plus the target's
    own innovation variance.
    """
    psi = check_symmetric(psi, name="psi")
    omega = check_symmetric(omega_u, name="omega_u")
    w = np.asarray(w_star, dtype=np.float64).ravel()
    total = psi + omega
    inner, _ = solve_linear(total, omega @ w)
    proj = omega @ inner  # Omega (Psi + Omega)^{-1} Omega w
    signal = float(w @ (psi @ w) - w @ (omega @ w) + w @ proj)
    noise = float(w @ (omega @ w) - w @ proj) + sigma_y ** 2
    if noise <= 0.0:
        raise UsageError("noise variance vanished; SNR undefined")
    return signal / noise


def load_ff5_params(sort: str = "size_bm", n: int = 100, t: int = 240,
                    seed: int = 0, stream_id: int = 0,
                    cov_u=None) -> Ff5Spec:
    """Build an :class:`Ff5Spec` from the bundled calibration config."""
    raw = json.loads(resources.files("l2relax").joinpath("ff5_params.json").read_text())
    if sort not in raw["loadings"]:
        raise UsageError(f"unknown sort {sort!r}; choose from {sorted(raw['loadings'])}")
    block = raw["loadings"][sort]
    return Ff5Spec(
        mu_f=raw["factor_returns"]["mu_f"],
        cov_f=raw["factor_returns"]["cov_f"],
        mu_lambda=block["mu_lambda"],
        cov_lambda=block["cov_lambda"],
        n=n, t=t, cov_u=cov_u, seed=seed, stream_id=stream_id,
    )


def generate_ff5(spec: Ff5Spec) -> np.ndarray:
    """Simulate a T x N excess-return panel from the five-factor design.

    Loadings are drawn once per replication; factors and idiosyncratic
    noise are i.i.d. over time.
    """
    gen = spec.rng().generator()
    lam_root = psd_sqrt(spec.cov_lambda)
    lam = spec.mu_lambda + gen.standard_normal((spec.n, spec.mu_lambda.size)) @ lam_root
    f_root = psd_sqrt(spec.cov_f)
    eta = spec.mu_f + gen.standard_normal((spec.t, spec.mu_f.size)) @ f_root
    u_root = psd_sqrt(spec.residual_cov())
    u = gen.standard_normal((spec.t, spec.n)) @ u_root
    return eta @ lam.T + u


def bias_variance_sweep(rng: RngStream, tau_grid: TuningGrid, reps: int,
                        settings=None) -> dict[str, np.ndarray]:
    """Empirical bias/variance decomposition of the first relaxed weight and
    of the one-step forecast over a two-group linear design.

    Design per replication: 20 inputs, the first ten N(1,1) with weight 0.09,
    the last ten N(0,1) with weight 0.01, noise N(0, 0.25), T = 100 training
    rows plus one forecast row.
    """
    if reps < 2:
        raise UsageError("need at least two replications")
    n, t = 20, 100
    w_true = np.concatenate([np.full(10, 0.09), np.full(10, 0.01)])
    taus = tau_grid.values
    w1 = np.empty((reps, len(taus)))
    fc_err = np.empty((reps, len(taus)))

    for r in range(reps):
        gen = rng.substream(r).generator()
        f = gen.standard_normal((t + 1, n))
        f[:, :10] += 1.0
        u = gen.normal(0.0, 0.5, size=t + 1)
        y = f @ w_true + u
        panel = Panel(f, target=y)
        errors = forecast_errors(panel.rows(np.arange(t)))
        cov = sample_vc(errors)
        warm = None
        for j, tau in enumerate(taus):
            sol, warm = solve_l2_relaxation(cov, float(tau), warm=warm,
                                            settings=settings, return_raw=True)
            w1[r, j] = sol.w[0]
            fc_err[r, j] = y[t] - float(f[t] @ sol.w)

    mean_w1 = w1.mean(axis=0)
    bias2 = (mean_w1 - w_true[0]) ** 2
    var = ((w1 - mean_w1) ** 2).mean(axis=0)
    return {
        "tau": taus.copy(),
        "bias2_w1": bias2,
        "var_w1": var,
        "mse_w1": bias2 + var,
        "mse_yhat": (fc_err ** 2).mean(axis=0),
    }
