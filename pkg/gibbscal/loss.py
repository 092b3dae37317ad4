"""Loss functions, empirical risk and the empirical risk minimizer.

A loss model works on prepared records: `prepare()` turns the raw
(n, width) record array into whatever the loss needs (a response vector,
a design matrix), so repeated risk evaluations over one dataset, as in a
sampler, do not rebuild it.
"""

import logging
import math
from abc import abstractmethod
from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np
from scipy.optimize import minimize
from scipy.stats import norm

from .const import (
    BASIS_KIND,
    DEFAULT_N_STARTS,
    DEFAULT_OPT_FATOL,
    DEFAULT_OPT_MAX_ITER,
    DEFAULT_OPT_XATOL,
    DEFAULT_START_JITTER,
    LOSS_KIND,
)
from .data import DataSet, as_datum, as_theta
from .exceptions import ContractViolation, DomainError, UnsupportedOperation

_LOGGER = logging.getLogger(__name__)


class Basis:
    """A dictionary of functions f(x) = (f_1(x), ..., f_J(x))."""

    def __init__(self, kind, degree=None, input_dim=1) -> None:
        if kind not in vars(BASIS_KIND).values():
            raise ContractViolation(f"Basis(): kind='{kind}' isn't valid.")
        if input_dim < 1:
            raise ContractViolation("a basis needs at least one input")
        if kind == BASIS_KIND.Polynomial:
            if degree is None or int(degree) < 0:
                raise ContractViolation("a polynomial basis needs a degree >= 0")
            if input_dim != 1:
                raise ContractViolation("a polynomial basis takes a scalar x")
            degree = int(degree)
        else:
            degree = None

        self.kind = kind
        self.degree = degree
        self.input_dim = input_dim

    def __repr__(self) -> str:
        return f"Basis(kind={self.kind!r}, degree={self.degree}, input_dim={self.input_dim})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, Basis):
            return NotImplemented
        return self.to_json() == other.to_json()

    @property
    def output_dim(self) -> int:
        if self.kind == BASIS_KIND.Affine:
            return self.input_dim + 1
        if self.kind == BASIS_KIND.Polynomial:
            return self.degree + 1
        return self.input_dim

    def design(self, x) -> np.ndarray:
        """Return the (n, J) matrix whose rows are f(x_i)."""
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1) if self.input_dim == 1 else x.reshape(1, -1)
        if x.shape[1] != self.input_dim:
            raise ContractViolation(
                f"x has dimension {x.shape[1]}, the basis expects {self.input_dim}"
            )
        if self.kind == BASIS_KIND.Affine:
            return np.column_stack([np.ones(x.shape[0]), x])
        if self.kind == BASIS_KIND.Polynomial:
            return np.vander(x[:, 0], self.degree + 1, increasing=True)
        return x.copy()

    def to_json(self) -> Dict:
        result = {"kind": self.kind, "input_dim": self.input_dim}
        if self.degree is not None:
            result["degree"] = self.degree
        return result


def basis_eval(basis: Basis, x) -> np.ndarray:
    """Return f(x) for a single covariate vector x."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.ndim != 1 or x.shape[0] != basis.input_dim:
        raise ContractViolation(
            f"x has shape {x.shape}, the basis expects {basis.input_dim} inputs"
        )
    return basis.design(x.reshape(1, -1))[0]


def _check_tau(tau) -> float:
    tau = float(tau)
    if not 0.0 < tau < 1.0:
        raise ContractViolation(f"tau={tau} must lie in (0, 1)")
    return tau


def _check_loss(residual, tau):
    return residual * (tau - (residual < 0.0))


def _smoothed_check_loss(residual, tau, h):
    """Return the check loss convolved with a Gaussian kernel of bandwidth h."""
    return (tau - norm.cdf(-residual / h)) * residual + h * norm.pdf(residual / h)


class LossModel:
    """The base class for a loss family l_theta(t)."""

    kind = None
    has_subgradient = True
    has_surrogate = False

    def __init__(self, param_dim, record_width, split_index=None) -> None:
        self.param_dim = param_dim
        self.record_width = record_width
        self.split_index = split_index

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self.to_json()})"

    def __eq__(self, other) -> bool:
        if not isinstance(other, LossModel):
            return NotImplemented
        return self.to_json() == other.to_json()

    @property
    def base(self) -> "LossModel":
        """Return the unscaled loss."""
        return self

    @property
    def scale(self) -> float:
        return 1.0

    def check_data(self, data: DataSet) -> None:
        """Raise unless the dataset's layout suits this loss."""
        if data.record_width != self.record_width:
            raise ContractViolation(
                f"{self.kind} loss expects records of width {self.record_width}, "
                f"got {data.record_width}"
            )
        if self.split_index is not None and data.split_index != self.split_index:
            raise ContractViolation(
                f"{self.kind} loss expects split_index={self.split_index}, "
                f"got {data.split_index}"
            )

    @abstractmethod
    def prepare(self, records: np.ndarray) -> tuple:
        """Return the prepared form of an (n, width) record array."""

    @abstractmethod
    def losses_from(self, theta: np.ndarray, prepared: tuple) -> np.ndarray:
        """Return the vector of per-record losses."""

    def subgradients_from(self, theta: np.ndarray, prepared: tuple) -> np.ndarray:
        """Return the (n, q) matrix of per-record subgradients."""
        raise UnsupportedOperation(f"the {self.kind} loss has no subgradient")

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        """Return per-record losses with the kink smoothed at the given bandwidth."""
        raise UnsupportedOperation(f"the {self.kind} loss has no smoothed surrogate")

    def residuals_from(self, theta, prepared) -> np.ndarray:
        """Return the residual whose spread sets the smoothing bandwidth."""
        raise UnsupportedOperation(f"the {self.kind} loss has no residual")

    def least_squares_seed(self, prepared) -> np.ndarray:
        """Return a cheap data-driven starting point for the optimizer."""
        return np.zeros(self.param_dim)

    def design_from(self, prepared) -> Optional[np.ndarray]:
        """Return the design matrix for basis losses, else None."""
        return None

    @abstractmethod
    def to_json(self) -> Dict:
        """Return the loss description as a JSON-ready dict."""


class QuantileLoss(LossModel):
    """The check loss (t - theta)(tau - 1{t < theta}) for a scalar quantile."""

    kind = LOSS_KIND.Quantile
    has_surrogate = True

    def __init__(self, tau) -> None:
        super().__init__(param_dim=1, record_width=1)
        self.tau = _check_tau(tau)

    def prepare(self, records) -> tuple:
        return (np.asarray(records, dtype=float)[:, 0],)

    def residuals_from(self, theta, prepared) -> np.ndarray:
        return prepared[0] - theta[0]

    def losses_from(self, theta, prepared) -> np.ndarray:
        return _check_loss(self.residuals_from(theta, prepared), self.tau)

    def subgradients_from(self, theta, prepared) -> np.ndarray:
        residual = self.residuals_from(theta, prepared)
        grad = np.where(residual >= 0.0, -self.tau, 1.0 - self.tau)
        return grad.reshape(-1, 1)

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        residual = self.residuals_from(theta, prepared)
        return _smoothed_check_loss(residual, self.tau, bandwidth)

    def least_squares_seed(self, prepared) -> np.ndarray:
        return np.array([np.mean(prepared[0])])

    def to_json(self) -> Dict:
        return {"kind": self.kind, "tau": self.tau}


class McidLoss(LossModel):
    """The loss 1/2 {1 - y sign(x - theta)}, with sign(0) taken as +1."""

    kind = LOSS_KIND.Mcid
    has_subgradient = False
    has_surrogate = True

    def __init__(self) -> None:
        super().__init__(param_dim=1, record_width=2, split_index=1)

    def prepare(self, records) -> tuple:
        records = np.asarray(records, dtype=float)
        return records[:, 0], records[:, 1]

    def residuals_from(self, theta, prepared) -> np.ndarray:
        return prepared[0] - theta[0]

    def losses_from(self, theta, prepared) -> np.ndarray:
        sign = np.where(self.residuals_from(theta, prepared) >= 0.0, 1.0, -1.0)
        return 0.5 * (1.0 - prepared[1] * sign)

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        smooth_sign = 2.0 * norm.cdf(self.residuals_from(theta, prepared) / bandwidth)
        return 0.5 * (1.0 - prepared[1] * (smooth_sign - 1.0))

    def least_squares_seed(self, prepared) -> np.ndarray:
        return np.array([np.median(prepared[0])])

    def to_json(self) -> Dict:
        return {"kind": self.kind}


class _BasisLoss(LossModel):
    """A loss on supervised records (x, y) through a basis f(x)."""

    def __init__(self, basis: Basis) -> None:
        super().__init__(
            param_dim=basis.output_dim,
            record_width=basis.input_dim + 1,
            split_index=basis.input_dim,
        )
        self.basis = basis

    def prepare(self, records) -> tuple:
        records = np.asarray(records, dtype=float)
        split = self.split_index
        return self.basis.design(records[:, :split]), records[:, split]

    def design_from(self, prepared) -> np.ndarray:
        return prepared[0]

    def least_squares_seed(self, prepared) -> np.ndarray:
        design, response = prepared
        return np.linalg.lstsq(design, response, rcond=None)[0]

    def residuals_from(self, theta, prepared) -> np.ndarray:
        design, response = prepared
        return response - design @ theta


class CheckRegressionLoss(_BasisLoss):
    """The check loss for linear quantile regression, rho_tau(y - theta'f(x))."""

    kind = LOSS_KIND.CheckRegression
    has_surrogate = True

    def __init__(self, tau, basis: Basis) -> None:
        super().__init__(basis)
        self.tau = _check_tau(tau)

    def losses_from(self, theta, prepared) -> np.ndarray:
        return _check_loss(self.residuals_from(theta, prepared), self.tau)

    def subgradients_from(self, theta, prepared) -> np.ndarray:
        residual = self.residuals_from(theta, prepared)
        weight = np.where(residual >= 0.0, -self.tau, 1.0 - self.tau)
        return weight[:, None] * prepared[0]

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        residual = self.residuals_from(theta, prepared)
        return _smoothed_check_loss(residual, self.tau, bandwidth)

    def to_json(self) -> Dict:
        return {"kind": self.kind, "tau": self.tau, "basis": self.basis.to_json()}


class HingeLoss(_BasisLoss):
    """The hinge loss max(0, 1 - y theta'f(x)) with labels y in {-1, +1}."""

    kind = LOSS_KIND.Hinge
    has_surrogate = True

    def residuals_from(self, theta, prepared) -> np.ndarray:
        design, labels = prepared
        return 1.0 - labels * (design @ theta)

    def losses_from(self, theta, prepared) -> np.ndarray:
        return np.maximum(0.0, self.residuals_from(theta, prepared))

    def subgradients_from(self, theta, prepared) -> np.ndarray:
        design, labels = prepared
        active = self.residuals_from(theta, prepared) >= 0.0
        return -(labels * active)[:, None] * design

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        slack = self.residuals_from(theta, prepared)
        scaled = slack / bandwidth
        return slack * norm.cdf(scaled) + bandwidth * norm.pdf(scaled)

    def to_json(self) -> Dict:
        return {"kind": self.kind, "basis": self.basis.to_json()}


class SquaredErrorLoss(_BasisLoss):
    """The squared-error loss {y - theta'f(x)}^2."""

    kind = LOSS_KIND.SquaredError

    def losses_from(self, theta, prepared) -> np.ndarray:
        return self.residuals_from(theta, prepared) ** 2

    def subgradients_from(self, theta, prepared) -> np.ndarray:
        residual = self.residuals_from(theta, prepared)
        return (-2.0 * residual)[:, None] * prepared[0]

    def to_json(self) -> Dict:
        return {"kind": self.kind, "basis": self.basis.to_json()}


class ScaledLoss(LossModel):
    """The loss c * l_theta(t) for a constant c > 0."""

    def __init__(self, base: LossModel, scale) -> None:
        scale = float(scale)
        if not scale > 0.0 or not math.isfinite(scale):
            raise ContractViolation(f"scale={scale} must be a positive real")
        if isinstance(base, ScaledLoss):
            base, scale = base.base, base.scale * scale
        super().__init__(base.param_dim, base.record_width, base.split_index)
        self._base = base
        self._scale = scale
        self.kind = base.kind
        self.has_subgradient = base.has_subgradient
        self.has_surrogate = base.has_surrogate

    @property
    def base(self) -> LossModel:
        return self._base

    @property
    def scale(self) -> float:
        return self._scale

    def prepare(self, records) -> tuple:
        return self._base.prepare(records)

    def losses_from(self, theta, prepared) -> np.ndarray:
        return self._scale * self._base.losses_from(theta, prepared)

    def subgradients_from(self, theta, prepared) -> np.ndarray:
        return self._scale * self._base.subgradients_from(theta, prepared)

    def smoothed_losses_from(self, theta, prepared, bandwidth) -> np.ndarray:
        return self._scale * self._base.smoothed_losses_from(theta, prepared, bandwidth)

    def residuals_from(self, theta, prepared) -> np.ndarray:
        return self._base.residuals_from(theta, prepared)

    def least_squares_seed(self, prepared) -> np.ndarray:
        return self._base.least_squares_seed(prepared)

    def design_from(self, prepared):
        return self._base.design_from(prepared)

    def to_json(self) -> Dict:
        return {"scale": self._scale, **self._base.to_json()}


def make_loss(kind, tau=None, basis=None, scale=None) -> LossModel:
    """Build a loss model from its kind and parameters."""
    if kind == LOSS_KIND.Quantile:
        loss = QuantileLoss(tau)
    elif kind == LOSS_KIND.Mcid:
        loss = McidLoss()
    elif kind == LOSS_KIND.CheckRegression:
        loss = CheckRegressionLoss(tau, basis)
    elif kind == LOSS_KIND.Hinge:
        loss = HingeLoss(basis)
    elif kind == LOSS_KIND.SquaredError:
        loss = SquaredErrorLoss(basis)
    else:
        raise ContractViolation(f"make_loss(): kind='{kind}' isn't valid.")
    return loss if scale is None or scale == 1.0 else ScaledLoss(loss, scale)


def loss_from_json(node: Dict) -> LossModel:
    """Rebuild a loss model from the dict produced by to_json()."""
    basis = node.get("basis")
    if basis is not None:
        basis = Basis(basis["kind"], basis.get("degree"), basis.get("input_dim", 1))
    return make_loss(node["kind"], node.get("tau"), basis, node.get("scale"))


def _single(loss: LossModel, theta, datum) -> tuple:
    theta = as_theta(theta, loss.param_dim)
    datum = as_datum(datum, loss.record_width)
    return theta, loss.prepare(datum.reshape(1, -1))


def eval_loss(loss: LossModel, theta, datum) -> float:
    """Return l_theta(t) for a single observation."""
    theta, prepared = _single(loss, theta, datum)
    return float(loss.losses_from(theta, prepared)[0])


def loss_subgradient(loss: LossModel, theta, datum) -> np.ndarray:
    """Return the subgradient of l_theta(t) in theta.

    At a kink the branch of the strict inequality listed first in the case
    formula is returned: y >= theta'f(x) for the check losses, and
    1 - y theta'f(x) >= 0 for the hinge loss.
    """
    if not loss.has_subgradient:
        raise UnsupportedOperation(f"the {loss.kind} loss has no subgradient")
    theta, prepared = _single(loss, theta, datum)
    return loss.subgradients_from(theta, prepared)[0]


def risk_from(loss: LossModel, theta, prepared) -> float:
    """Return the mean of the per-record losses, with exactly rounded summation."""
    losses = loss.losses_from(theta, prepared)
    return math.fsum(losses) / losses.shape[0]


def empirical_risk(loss: LossModel, theta, data: DataSet) -> float:
    """Return R_n(theta) = n^-1 sum_i l_theta(T_i)."""
    if data is None or len(data) == 0:
        raise DomainError("the empirical risk needs at least one record")
    loss.check_data(data)
    theta = as_theta(theta, loss.param_dim)
    value = risk_from(loss, theta, loss.prepare(data.records))
    if not math.isfinite(value):
        raise DomainError(f"empirical risk is not finite at theta={theta}")
    return value


@dataclass(frozen=True)
class OptimizerConfig:
    """Settings for the multi-start simplex search."""

    n_starts: int = DEFAULT_N_STARTS
    max_iter: int = DEFAULT_OPT_MAX_ITER
    xatol: float = DEFAULT_OPT_XATOL
    fatol: float = DEFAULT_OPT_FATOL
    jitter: float = DEFAULT_START_JITTER
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_starts < 1 or self.max_iter < 1:
            raise ContractViolation("n_starts and max_iter must be positive")
        if self.xatol <= 0 or self.fatol <= 0 or self.jitter < 0:
            raise ContractViolation("optimizer tolerances must be positive")


@dataclass(frozen=True)
class ThetaEstimate:
    """The empirical risk minimizer theta_hat and how it was found."""

    theta: np.ndarray
    risk_value: float
    converged: bool
    iterations: int

    def to_json(self) -> Dict:
        return {
            "theta": [float(v) for v in self.theta],
            "risk_value": float(self.risk_value),
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
        }


def _quantile_order_statistic(values, tau) -> float:
    """Return the ceil(n tau)-th order statistic."""
    n = values.shape[0]
    k = max(1, int(math.ceil(round(n * tau, 9))))
    return float(np.partition(values, k - 1)[k - 1])


def _mcid_cut_point(x, y) -> float:
    """Return a minimizer of the piecewise-constant MCID empirical risk."""
    cuts = np.unique(x)
    candidates = np.append(cuts, cuts[-1] + 1.0)
    negatives = np.sort(x[y < 0])
    positives = np.sort(x[y > 0])

    # loss 1 where x >= theta and y = -1, or x < theta and y = +1
    errors = (negatives.shape[0] - np.searchsorted(negatives, candidates)) + (
        np.searchsorted(positives, candidates)
    )
    best = int(np.argmin(errors))
    if best == 0:
        return float(candidates[0])
    if best == candidates.shape[0] - 1:
        return float(cuts[-1] + 0.5)
    return float(0.5 * (candidates[best - 1] + candidates[best]))


def erm_fit(loss: LossModel, data: DataSet, cfg: OptimizerConfig = None) -> ThetaEstimate:
    """Return a minimizer theta_hat of the empirical risk.

    The scalar quantile and MCID risks are minimized exactly; every other
    loss uses a multi-start Nelder-Mead search (origin, least-squares seed,
    random perturbations of that seed) and returns the best result.
    """
    cfg = cfg or OptimizerConfig()
    loss.check_data(data)
    if data.n < loss.param_dim:
        raise ContractViolation(
            f"erm_fit() needs n >= {loss.param_dim} records, got {data.n}"
        )
    prepared = loss.prepare(data.records)
    _LOGGER.debug("erm_fit(kind=%s, n=%s)...", loss.kind, data.n)

    if loss.kind == LOSS_KIND.Quantile:
        theta = as_theta([_quantile_order_statistic(prepared[0], loss.base.tau)])
        return ThetaEstimate(theta, risk_from(loss, theta, prepared), True, 0)

    if loss.kind == LOSS_KIND.Mcid:
        theta = as_theta([_mcid_cut_point(*prepared)])
        return ThetaEstimate(theta, risk_from(loss, theta, prepared), True, 0)

    def objective(theta) -> float:
        return risk_from(loss, theta, prepared)

    options = {
        "maxiter": cfg.max_iter,
        "maxfev": 2 * cfg.max_iter,
        "xatol": cfg.xatol,
        "fatol": cfg.fatol,
    }
    seed = np.asarray(loss.least_squares_seed(prepared), dtype=float)
    if not np.all(np.isfinite(seed)):
        seed = np.zeros(loss.param_dim)
    rng = np.random.default_rng(cfg.seed)
    starts = [np.zeros(loss.param_dim), seed]
    while len(starts) < cfg.n_starts:
        spread = cfg.jitter * (1.0 + np.abs(seed))
        starts.append(seed + spread * rng.standard_normal(loss.param_dim))
    starts = starts[: cfg.n_starts]

    best = None
    iterations = 0
    for start in starts:
        result = minimize(objective, start, method="Nelder-Mead", options=options)
        iterations += int(result.nit)
        if best is None or result.fun < best.fun:
            best = result

    # restart from the best vertex, simplex searches stall on kinks
    polish = minimize(objective, best.x, method="Nelder-Mead", options=options)
    iterations += int(polish.nit)
    if polish.fun <= best.fun:
        converged = bool(polish.success)
        best = polish
    else:
        converged = bool(best.success)

    if not converged:
        _LOGGER.warning(
            "erm_fit(): the %s search stopped before reaching tolerance (%s).",
            loss.kind,
            best.message,
        )
    theta = as_theta(best.x, loss.param_dim)
    return ThetaEstimate(theta, objective(theta), converged, iterations)
