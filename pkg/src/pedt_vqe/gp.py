"""Gaussian-process regression over angle vectors with a first-harmonic kernel.

The kernel

    k(x, x') = sigma0^2 * prod_d (1 + gamma cos(x_d - x'_d)) / (1 + gamma)

restricted to any single axis spans ``{1, cos, sin}``, which is exactly the
function class of a VQE energy along one rotation angle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.linalg import cholesky, solve_triangular

log = logging.getLogger(__name__)

JITTER_START = 1e-10
JITTER_CAP = 1e-4


class FactorizationError(np.linalg.LinAlgError):
    pass


@dataclass(frozen=True)
class KernelParams:
    sigma0: float
    gamma: float = 0.7
    sigma_n: float = 1e-6

    def __post_init__(self):
        if not self.sigma0 > 0:
            raise ValueError(f"sigma0 must be > 0, got {self.sigma0}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not self.sigma_n >= 0:
            raise ValueError(f"sigma_n must be >= 0, got {self.sigma_n}")


def kernel_matrix(kp: KernelParams, a, b) -> np.ndarray:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise ValueError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    lag = a[:, None, :] - b[None, :, :]
    factors = (1.0 + kp.gamma * np.cos(lag)) / (1.0 + kp.gamma)
    return kp.sigma0 ** 2 * np.prod(factors, axis=-1)


def kernel_eval(kp: KernelParams, x, x2) -> float:
    x = np.asarray(x, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if x.shape != x2.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {x2.shape}")
    return float(kernel_matrix(kp, x[None], x2[None])[0, 0])


class Posterior(NamedTuple):
    mean: float
    variance: float
    prior_only: bool = False


def _jitter_schedule(sigma0: float):
    j = JITTER_START
    while j <= JITTER_CAP * (1 + 1e-9):
        yield j * sigma0 ** 2
        j *= 10


def _safe_cholesky(mat: np.ndarray, floor: float, sigma0: float):
    """Cholesky of ``mat`` with escalating diagonal jitter.

    A factor is accepted only if every pivot squared stays above ``floor / 2``;
    in exact arithmetic each pivot is a Schur complement bounded below by the
    noise variance, so smaller pivots mean round-off has taken over.
    Returns ``(L, jitter)``.
    """
    for jitter in [0.0, *_jitter_schedule(sigma0)]:
        try:
            chol = cholesky(mat + jitter * np.eye(len(mat)), lower=True)
        except np.linalg.LinAlgError:
            continue
        if len(mat) == 0 or np.min(np.diag(chol)) ** 2 >= 0.5 * (floor + jitter):
            return chol, jitter
    raise FactorizationError("covariance not positive definite at maximum jitter")


@dataclass(frozen=True)
class GpModel:
    """Fixed-hyperparameter GP posterior; ``update`` returns a new model.

    With ``center=True`` the prior mean is the running mean of ``train_y``;
    otherwise it is zero.
    """

    kernel: KernelParams
    train_x: np.ndarray
    train_y: np.ndarray
    chol: np.ndarray
    center: bool = True
    jitter: float = 0.0
    _alpha: Optional[np.ndarray] = field(default=None, repr=False, compare=False)

    @classmethod
    def empty(cls, kernel: KernelParams, dim: int, center: bool = True) -> "GpModel":
        return cls(kernel, np.zeros((0, dim)), np.zeros(0), np.zeros((0, 0)), center)

    @classmethod
    def fit(cls, kernel: KernelParams, x, y, center: bool = True) -> "GpModel":
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.asarray(y, dtype=float).reshape(-1)
        if len(x) != len(y):
            raise ValueError(f"{len(x)} inputs but {len(y)} outputs")
        noise = kernel.sigma_n ** 2
        gram = kernel_matrix(kernel, x, x) + noise * np.eye(len(x))
        chol, jitter = _safe_cholesky(gram, noise, kernel.sigma0)
        return cls(kernel, x, y, chol, center, jitter)

    @property
    def dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def n_train(self) -> int:
        return len(self.train_y)

    @property
    def noise_diag(self) -> float:
        return self.kernel.sigma_n ** 2 + self.jitter

    @property
    def prior_mean(self) -> float:
        if self.center and self.n_train:
            return float(np.mean(self.train_y))
        return 0.0

    @property
    def alpha(self) -> np.ndarray:
        if self._alpha is None:
            resid = self.train_y - self.prior_mean
            tmp = solve_triangular(self.chol, resid, lower=True)
            object.__setattr__(self, "_alpha", solve_triangular(self.chol.T, tmp, lower=False))
        return self._alpha

    def _as_points(self, xs) -> np.ndarray:
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        if xs.shape[1] != self.dim:
            raise ValueError(f"query dimension {xs.shape[1]} != model dimension {self.dim}")
        return xs

    def posterior_batch(self, xs, clamp: bool = True):
        """Posterior means and marginal variances at each row of ``xs``."""
        xs = self._as_points(xs)
        prior_var = np.full(len(xs), self.kernel.sigma0 ** 2)
        if self.n_train == 0:
            return np.full(len(xs), self.prior_mean), prior_var
        k_star = kernel_matrix(self.kernel, self.train_x, xs)
        mean = self.prior_mean + k_star.T @ self.alpha
        v = solve_triangular(self.chol, k_star, lower=True)
        var = prior_var - np.sum(v * v, axis=0)
        if clamp:
            var = np.maximum(var, 0.0)
        return mean, var

    def posterior(self, x) -> Posterior:
        mean, var = self.posterior_batch(np.asarray(x, dtype=float)[None])
        return Posterior(float(mean[0]), float(var[0]), self.n_train == 0)

    def posterior_joint(self, xs):
        """Posterior mean vector and full covariance over the rows of ``xs``."""
        xs = self._as_points(xs)
        cov = kernel_matrix(self.kernel, xs, xs)
        if self.n_train == 0:
            return np.full(len(xs), self.prior_mean), cov
        k_star = kernel_matrix(self.kernel, self.train_x, xs)
        mean = self.prior_mean + k_star.T @ self.alpha
        v = solve_triangular(self.chol, k_star, lower=True)
        cov = cov - v.T @ v
        return mean, 0.5 * (cov + cov.T)

    def hypothetical_variances(self, pending, xs) -> np.ndarray:
        """Variance at ``xs`` after adding ``pending`` inputs (outputs not needed)."""
        xs = self._as_points(xs)
        pending = np.asarray(pending, dtype=float).reshape(-1, self.dim)
        if len(pending) == 0:
            return self.posterior_batch(xs)[1]
        _, cov = self.posterior_joint(np.vstack([pending, xs]))
        return conditioned_variances(cov, len(pending), self.noise_diag)

    def hypothetical_variance(self, pending, x) -> float:
        return float(self.hypothetical_variances(pending, np.asarray(x, dtype=float)[None])[0])

    def update(self, x, y: float) -> "GpModel":
        """Append one observation via a rank-1 bordering of the Cholesky factor."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        new_x = np.vstack([self.train_x, x])
        new_y = np.append(self.train_y, float(y))
        if self.n_train == 0:
            return GpModel.fit(self.kernel, new_x, new_y, self.center)
        k_vec = kernel_matrix(self.kernel, self.train_x, x)[:, 0]
        row = solve_triangular(self.chol, k_vec, lower=True)
        pivot_sq = self.kernel.sigma0 ** 2 + self.noise_diag - row @ row
        if not pivot_sq >= 0.5 * self.noise_diag:
            return self._refit(new_x, new_y)
        n = self.n_train
        chol = np.zeros((n + 1, n + 1))
        chol[:n, :n] = self.chol
        chol[n, :n] = row
        chol[n, n] = np.sqrt(pivot_sq)
        return GpModel(self.kernel, new_x, new_y, chol, self.center, self.jitter)

    def _refit(self, x, y) -> "GpModel":
        noise = self.kernel.sigma_n ** 2
        gram = kernel_matrix(self.kernel, x, x) + (noise + self.jitter) * np.eye(len(x))
        chol, extra = _safe_cholesky(gram, noise + self.jitter, self.kernel.sigma0)
        if extra:
            log.debug("GP refactorization added jitter %.2e", extra)
        return GpModel(self.kernel, x, y, chol, self.center, self.jitter + extra)

    def sample_joint(self, xs, n_samples: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``n_samples`` joint posterior samples over ``xs``; shape ``(n_samples, len(xs))``."""
        if n_samples < 1:
            raise ValueError("n_samples must be positive")
        mean, cov = self.posterior_joint(xs)
        return draw_gaussian(mean, cov, n_samples, rng, self.kernel.sigma0)


def conditioned_variances(cov: np.ndarray, n_pending: int, noise: float) -> np.ndarray:
    """Marginal variances of the trailing block of a joint Gaussian after noisy
    observation of its first ``n_pending`` coordinates."""
    p = n_pending
    c_pp = cov[:p, :p] + noise * np.eye(p)
    c_px = cov[:p, p:]
    scale = np.sqrt(max(float(np.max(np.diag(cov))), 1e-300))
    chol, _ = _safe_cholesky(c_pp, noise, scale)
    w = solve_triangular(chol, c_px, lower=True)
    return np.maximum(np.diag(cov)[p:] - np.sum(w * w, axis=0), 0.0)


def draw_gaussian(mean, cov, n_samples: int, rng: np.random.Generator, sigma0: float) -> np.ndarray:
    """Samples of N(mean, cov) using the GP jitter schedule for the factorization."""
    m = len(mean)
    for jitter in [0.0, *_jitter_schedule(sigma0)]:
        try:
            chol = cholesky(cov + jitter * np.eye(m), lower=True)
            break
        except np.linalg.LinAlgError:
            continue
    else:
        raise FactorizationError("joint posterior covariance not factorizable at maximum jitter")
    z = rng.standard_normal((n_samples, m))
    return mean[None, :] + z @ chol.T


def random_model(
    rng: np.random.Generator,
    dim: int,
    n_train: int,
    sigma0: float = 1.0,
    gamma: float = 0.7,
    sigma_n: float = 0.1,
    center: bool = True,
    y: Optional[Sequence[float]] = None,
) -> GpModel:
    """Model on uniformly random angles; handy for property checks."""
    x = rng.uniform(0, 2 * np.pi, size=(n_train, dim))
    if y is None:
        y = rng.normal(size=n_train)
    return GpModel.fit(KernelParams(sigma0, gamma, sigma_n), x, y, center)
