"""Sandwich matrices, the oracle learning rate and Gaussian-limit diagnostics."""

import logging
import math
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.stats import chi2, kstest

from .const import (
    BANDWIDTH_EXPONENT,
    EIGEN_FLOOR,
    PLAIN_STEP_EXPONENT,
    SMOOTH_STEP_FRACTION,
)
from .data import DataSet, as_theta
from .exceptions import (
    ContractViolation,
    DomainError,
    SingularHessianError,
    UnsupportedOperation,
)
from .gibbs import PosteriorDraws
from .loss import LossModel, risk_from

_LOGGER = logging.getLogger(__name__)


def _symmetric(matrix) -> np.ndarray:
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    if matrix.shape[0] != matrix.shape[1]:
        raise ContractViolation(f"expected a square matrix, got {matrix.shape}")
    return 0.5 * (matrix + matrix.T)


def _is_pd(matrix) -> bool:
    return bool(np.all(np.linalg.eigvalsh(matrix) > 0.0))


def psd_sqrt(matrix) -> np.ndarray:
    """Return the symmetric square root, eigenvalues floored at EIGEN_FLOOR."""
    values, vectors = np.linalg.eigh(_symmetric(matrix))
    root = np.sqrt(np.maximum(values, EIGEN_FLOOR))
    return (vectors * root) @ vectors.T


def matrix_to_json(matrix) -> Dict:
    """Return a matrix as a row-major array with its dimensions."""
    matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    return {
        "rows": int(matrix.shape[0]),
        "cols": int(matrix.shape[1]),
        "data": [float(v) for v in matrix.ravel()],
    }


def estimate_score_outer(loss: LossModel, data: DataSet, theta) -> np.ndarray:
    """Return n^-1 sum_i l'(T_i) l'(T_i)^T at theta."""
    if not loss.has_subgradient:
        raise UnsupportedOperation(f"the {loss.kind} loss has no subgradient")
    loss.check_data(data)
    theta = as_theta(theta, loss.param_dim)
    grads = loss.subgradients_from(theta, loss.prepare(data.records))
    return _symmetric(grads.T @ grads / data.n)


@dataclass(frozen=True)
class HessianConfig:
    """Settings for the risk Hessian estimate.

    h0 overrides the residual-scale bandwidth constant; smooth=False forces
    plain differences of R_n.
    """

    h0: Optional[float] = None
    smooth: bool = True
    step_fraction: float = SMOOTH_STEP_FRACTION


@dataclass(frozen=True)
class RiskHessian:
    """A finite-difference Hessian of the (smoothed) empirical risk."""

    matrix: np.ndarray
    bandwidth: Optional[float]
    step: float
    indefinite: bool

    def to_json(self) -> Dict:
        return {
            "matrix": matrix_to_json(self.matrix),
            "bandwidth": self.bandwidth,
            "step": self.step,
            "indefinite": self.indefinite,
        }


def _central_hessian(func, theta, step) -> np.ndarray:
    q = theta.shape[0]
    hessian = np.empty((q, q))
    center = func(theta)
    basis = np.eye(q) * step
    for i in range(q):
        hessian[i, i] = (
            func(theta + basis[i]) - 2.0 * center + func(theta - basis[i])
        ) / step**2
        for j in range(i + 1, q):
            hessian[i, j] = hessian[j, i] = (
                func(theta + basis[i] + basis[j])
                - func(theta + basis[i] - basis[j])
                - func(theta - basis[i] + basis[j])
                + func(theta - basis[i] - basis[j])
            ) / (4.0 * step**2)
    return hessian


def estimate_risk_hessian(
    loss: LossModel, data: DataSet, theta, cfg: HessianConfig = None
) -> RiskHessian:
    """Return the Hessian V of the empirical risk at theta.

    Kinked losses are differenced through their Gaussian-smoothed surrogate
    with bandwidth h = h0 n^(-1/5), h0 the residual sd at theta; losses
    without a surrogate use plain differences with step n^(-1/4).
    """
    cfg = cfg or HessianConfig()
    loss.check_data(data)
    theta = np.array(as_theta(theta, loss.param_dim))
    prepared = loss.prepare(data.records)
    n = data.n

    if cfg.smooth and loss.has_surrogate:
        h0 = cfg.h0
        if h0 is None:
            residuals = loss.residuals_from(theta, prepared)
            h0 = float(np.std(residuals, ddof=1)) if n > 1 else 1.0
            if not h0 > 0.0:
                h0 = 1.0
        bandwidth = h0 * n**BANDWIDTH_EXPONENT
        step = cfg.step_fraction * bandwidth

        def func(point) -> float:
            values = loss.smoothed_losses_from(point, prepared, bandwidth)
            return math.fsum(values) / n

    else:
        bandwidth = None
        step = float(n**PLAIN_STEP_EXPONENT)

        def func(point) -> float:
            return risk_from(loss, point, prepared)

    matrix = _symmetric(_central_hessian(func, theta, step))
    indefinite = not _is_pd(matrix)
    if indefinite:
        _LOGGER.warning(
            "estimate_risk_hessian(): the %s risk Hessian is not positive definite.",
            loss.kind,
        )
    return RiskHessian(matrix, bandwidth, step, indefinite)


@dataclass(frozen=True)
class SandwichEstimate:
    """The pieces of Sigma = V^-1 S V^-1."""

    V: np.ndarray
    S: np.ndarray
    Sigma: np.ndarray

    def to_json(self) -> Dict:
        return {
            "V": matrix_to_json(self.V),
            "S": matrix_to_json(self.S),
            "Sigma": matrix_to_json(self.Sigma),
        }


def sandwich_cov(V, S) -> SandwichEstimate:
    """Return the sandwich covariance V^-1 S V^-1."""
    V = _symmetric(V)
    S = _symmetric(S)
    if V.shape != S.shape:
        raise ContractViolation("V and S must have the same shape")
    try:
        V_inv = np.linalg.inv(V)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError("the risk Hessian V is singular") from exc
    if not np.all(np.isfinite(V_inv)) or np.linalg.cond(V) > 1e14:
        raise SingularHessianError("the risk Hessian V is singular")
    return SandwichEstimate(V, S, _symmetric(V_inv @ S @ V_inv))


def oracle_learning_rate(Sigma, V) -> float:
    """Return {lambda_min(Sigma^1/2 V Sigma^1/2)}^(-1/3)."""
    Sigma = _symmetric(Sigma)
    V = _symmetric(V)
    if Sigma.shape != V.shape:
        raise ContractViolation("Sigma and V must have the same shape")
    if not (_is_pd(Sigma) and _is_pd(V)):
        raise DomainError("oracle_learning_rate() needs positive definite Sigma and V")
    root = psd_sqrt(Sigma)
    smallest = float(np.linalg.eigvalsh(_symmetric(root @ V @ root))[0])
    return smallest ** (-1.0 / 3.0)


def asymptotic_coverage(eta, Sigma, V, alpha) -> float:
    """Return the large-sample lower bound on the coverage function.

    P{ChiSq(q) <= k_alpha / (eta^3 lambda_min)}, with k_alpha the chi-square
    (1 - alpha) quantile; it equals 1 - alpha at the oracle learning rate.
    """
    Sigma = _symmetric(Sigma)
    q = Sigma.shape[0]
    root = psd_sqrt(Sigma)
    smallest = float(np.linalg.eigvalsh(_symmetric(root @ _symmetric(V) @ root))[0])
    critical = chi2.ppf(1.0 - alpha, q)
    return float(chi2.cdf(critical / (eta**3 * smallest), q))


@dataclass(frozen=True)
class GaussianApprox:
    """The Gaussian limit N(eta theta_hat + (1 - eta) theta*, (eta n V)^-1)."""

    mean: np.ndarray
    cov: np.ndarray
    eta: float
    n: int

    def to_json(self) -> Dict:
        return {
            "mean": self.mean.tolist(),
            "cov": matrix_to_json(self.cov),
            "eta": self.eta,
            "n": self.n,
        }


def bvm_approx(eta, theta_hat, theta_star, V, n) -> GaussianApprox:
    """Return the Gaussian approximation to the Gibbs posterior.

    Pass theta_hat as theta_star when the risk minimizer is unknown.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    theta_star = np.atleast_1d(np.asarray(theta_star, dtype=float))
    V = _symmetric(V)
    if not _is_pd(V):
        raise DomainError("bvm_approx() needs a positive definite V")
    mean = eta * theta_hat + (1.0 - eta) * theta_star
    cov = _symmetric(np.linalg.inv(eta * n * V))
    return GaussianApprox(mean, cov, float(eta), int(n))


def bvm_distance(draws, approx: GaussianApprox) -> float:
    """Return the largest per-coordinate Kolmogorov-Smirnov distance to N(0, 1).

    The draws are whitened by the approximation's mean and Cholesky factor,
    so the value is unchanged by translations and lower-triangular linear
    maps applied to both the draws and the approximation.
    """
    matrix = draws.draws if isinstance(draws, PosteriorDraws) else draws
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim == 1:
        matrix = matrix.reshape(-1, 1)
    if matrix.shape[1] != approx.mean.shape[0]:
        raise ContractViolation("draws and approximation differ in dimension")
    chol = np.linalg.cholesky(approx.cov)
    whitened = np.linalg.solve(chol, (matrix - approx.mean).T).T
    return max(
        float(kstest(whitened[:, j], "norm").statistic)
        for j in range(whitened.shape[1])
    )
