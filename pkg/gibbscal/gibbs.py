"""The Gibbs posterior exp(-eta n R_n(theta)) pi(theta) and its sampler."""

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Union

import numpy as np
from scipy.optimize import linprog
from scipy.special import logsumexp, rel_entr

from .const import (
    ADAPT_GAIN_EXPONENT,
    ATTRS_DRAWS,
    DEFAULT_ADAPT_WINDOW,
    DEFAULT_BURN_IN,
    DEFAULT_N_DRAWS,
    DEFAULT_THIN,
    LOSS_KIND,
    PRIOR_KIND,
    PROPOSAL_JITTER,
    TARGET_ACCEPT_1D,
    TARGET_ACCEPT_ND,
)
from .data import DataSet, as_theta
from .exceptions import (
    ContractViolation,
    DomainError,
    InitializationError,
)
from .loss import LossModel, OptimizerConfig, erm_fit, risk_from

_LOGGER = logging.getLogger(__name__)


class FlatPrior:
    """The improper prior with log density identically 0."""

    kind = PRIOR_KIND.Flat

    def __init__(self, param_dim: Optional[int] = None) -> None:
        self.param_dim = param_dim

    def __repr__(self) -> str:
        return f"FlatPrior(param_dim={self.param_dim})"

    def log_density(self, theta) -> float:
        return 0.0

    def to_json(self) -> Dict:
        return {"kind": self.kind}


class GaussianPrior:
    """Independent normal coordinates, log density with the constant dropped."""

    kind = PRIOR_KIND.Gaussian

    def __init__(self, mean, sd) -> None:
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        sd = np.atleast_1d(np.asarray(sd, dtype=float))
        if sd.shape[0] == 1 and mean.shape[0] > 1:
            sd = np.repeat(sd, mean.shape[0])
        if mean.shape != sd.shape or mean.ndim != 1:
            raise ContractViolation("prior mean and sd must be vectors of one length")
        if not np.all(sd > 0.0) or not np.all(np.isfinite(mean)):
            raise ContractViolation("prior sd entries must be positive and finite")
        self.mean = mean
        self.sd = sd
        self.param_dim = mean.shape[0]

    def __repr__(self) -> str:
        return f"GaussianPrior(mean={self.mean.tolist()}, sd={self.sd.tolist()})"

    def log_density(self, theta) -> float:
        z = (np.asarray(theta, dtype=float) - self.mean) / self.sd
        return -0.5 * math.fsum(z * z)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "mean": [float(v) for v in self.mean],
            "sd": [float(v) for v in self.sd],
        }


Prior = Union[FlatPrior, GaussianPrior]


def prior_from_json(node: Dict, param_dim: Optional[int] = None) -> Prior:
    """Rebuild a prior from its JSON description."""
    if node["kind"] == PRIOR_KIND.Flat:
        return FlatPrior(param_dim)
    if node["kind"] == PRIOR_KIND.Gaussian:
        mean, sd = node["mean"], node["sd"]
        if param_dim is not None and np.ndim(mean) == 0:
            mean = [mean] * param_dim
        return GaussianPrior(mean, sd)
    raise ContractViolation(f"prior kind='{node['kind']}' isn't valid.")


def log_prior(prior: Prior, theta) -> float:
    """Return log pi(theta), up to an additive constant."""
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    if prior.param_dim is not None and theta.shape[0] != prior.param_dim:
        raise ContractViolation(
            f"theta has dimension {theta.shape[0]}, the prior has {prior.param_dim}"
        )
    return prior.log_density(theta)


def check_flat_prior_integrable(loss: LossModel, data: DataSet) -> None:
    """Raise DomainError when exp(-eta n R_n) cannot be normalized under a flat prior.

    The flat-prior posterior is proper only if the empirical risk grows
    along every ray: bounded losses never do, and basis losses do not on a
    rank-deficient design or, for the hinge loss, on separable data.
    """
    if loss.kind == LOSS_KIND.Mcid:
        raise DomainError(
            "the MCID loss is bounded, so a flat prior gives an improper posterior"
        )
    prepared = loss.prepare(data.records)
    design = loss.design_from(prepared)
    if design is None:
        return

    if np.linalg.matrix_rank(design) < loss.param_dim:
        raise DomainError(
            "the design matrix is rank deficient, so a flat prior gives an "
            "improper posterior"
        )
    if loss.kind == LOSS_KIND.Hinge:
        signed = prepared[1][:, None] * design
        result = linprog(
            c=np.zeros(loss.param_dim),
            A_ub=-signed,
            b_ub=np.zeros(data.n),
            A_eq=signed.sum(axis=0, keepdims=True),
            b_eq=[1.0],
            bounds=[(None, None)] * loss.param_dim,
            method="highs",
        )
        if result.status == 0:
            raise DomainError(
                "the labels are linearly separable, so the hinge risk stays "
                "bounded along a ray and a flat prior gives an improper posterior"
            )


@dataclass(frozen=True)
class GibbsSpec:
    """A loss, a prior, a learning rate and the data they are bound to."""

    loss: LossModel
    prior: Prior
    eta: float
    data: DataSet
    prepared: tuple = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if not (self.eta > 0.0 and math.isfinite(self.eta)):
            raise ContractViolation(f"eta={self.eta} must be a positive real")
        self.loss.check_data(self.data)
        if self.prior.param_dim is not None and (
            self.prior.param_dim != self.loss.param_dim
        ):
            raise ContractViolation(
                f"the prior has dimension {self.prior.param_dim}, the loss has "
                f"{self.loss.param_dim}"
            )
        if self.prior.kind == PRIOR_KIND.Flat:
            check_flat_prior_integrable(self.loss, self.data)
        object.__setattr__(self, "prepared", self.loss.prepare(self.data.records))

    @property
    def n(self) -> int:
        return self.data.n

    @property
    def param_dim(self) -> int:
        return self.loss.param_dim

    def with_eta(self, eta) -> "GibbsSpec":
        return GibbsSpec(self.loss, self.prior, eta, self.data)

    def log_target(self, theta) -> float:
        """Return the unnormalized log density, or -inf where it is not finite."""
        value = -self.eta * self.n * risk_from(self.loss, theta, self.prepared)
        value += self.prior.log_density(theta)
        return value if math.isfinite(value) else -math.inf


def log_post_unnorm(spec: GibbsSpec, theta) -> float:
    """Return -eta n R_n(theta) + log pi(theta)."""
    theta = as_theta(theta, spec.param_dim)
    value = -spec.eta * spec.n * risk_from(spec.loss, theta, spec.prepared)
    value += log_prior(spec.prior, theta)
    if not math.isfinite(value):
        raise DomainError(f"log posterior is not finite at theta={theta}")
    return value


@dataclass(frozen=True)
class SamplerConfig:
    """Settings for the adaptive random-walk Metropolis sampler."""

    n_draws: int = DEFAULT_N_DRAWS
    burn_in: int = DEFAULT_BURN_IN
    thin: int = DEFAULT_THIN
    init: Union[str, Sequence[float]] = "erm"
    target_accept: Optional[float] = None
    adapt_window: int = DEFAULT_ADAPT_WINDOW

    def __post_init__(self) -> None:
        if self.n_draws < 1 or self.thin < 1 or self.adapt_window < 1:
            raise ContractViolation("n_draws, thin and adapt_window must be positive")
        if self.burn_in < 0:
            raise ContractViolation("burn_in must be nonnegative")
        if self.target_accept is not None and not 0.0 < self.target_accept < 1.0:
            raise ContractViolation("target_accept must lie in (0, 1)")
        if isinstance(self.init, str) and self.init != "erm":
            raise ContractViolation(f"init='{self.init}' isn't valid.")
        if not isinstance(self.init, str):
            object.__setattr__(self, "init", tuple(float(v) for v in self.init))

    def accept_target(self, param_dim: int) -> float:
        if self.target_accept is not None:
            return self.target_accept
        return TARGET_ACCEPT_1D if param_dim == 1 else TARGET_ACCEPT_ND

    def to_json(self) -> Dict:
        return {
            "n_draws": self.n_draws,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "init": self.init if isinstance(self.init, str) else list(self.init),
            "target_accept": self.target_accept,
            "adapt_window": self.adapt_window,
        }


@dataclass(frozen=True)
class PosteriorDraws:
    """Thinned draws approximating the Gibbs posterior."""

    draws: np.ndarray
    log_post: np.ndarray
    accept_rate: float
    seed: int
    eta: Optional[float] = None

    @property
    def n_draws(self) -> int:
        return self.draws.shape[0]

    @property
    def param_dim(self) -> int:
        return self.draws.shape[1]

    def column(self, index: int) -> np.ndarray:
        return self.draws[:, index]

    @property
    def data(self) -> Dict:
        """Return a JSON-ready description of the draws."""
        quantiles = np.quantile(self.draws, [0.025, 0.5, 0.975], axis=0)
        return {
            "n_draws": self.n_draws,
            "mean": self.draws.mean(axis=0).tolist(),
            "sd": self.draws.std(axis=0, ddof=1).tolist()
            if self.n_draws > 1
            else [0.0] * self.param_dim,
            "accept_rate": float(self.accept_rate),
            "quantiles": {
                "q025": quantiles[0].tolist(),
                "q500": quantiles[1].tolist(),
                "q975": quantiles[2].tolist(),
            },
            "seed": int(self.seed),
        }

    def info(self, verbosity=0) -> Dict:
        """Return the summary, with detail according to verbosity."""
        if verbosity >= 2:
            return self.data
        keys = list(ATTRS_DRAWS["summary_keys"])
        if verbosity == 1:
            keys += ATTRS_DRAWS["detail_keys"]
        return {k: v for k, v in self.data.items() if k in keys}


class MetropolisKernel:
    """A random-walk Metropolis kernel with a fixed Gaussian proposal.

    The proposal is theta + scale * L z with z standard normal, so the
    kernel is symmetric and leaves exp(log_target) invariant.
    """

    def __init__(self, log_target: Callable, chol, scale) -> None:
        self.log_target = log_target
        self.chol = np.atleast_2d(np.asarray(chol, dtype=float))
        self.scale = float(scale)

    def step(self, theta, log_p, rng) -> tuple:
        """Return (theta, log_p, accepted, acceptance probability)."""
        noise = self.chol @ rng.standard_normal(self.chol.shape[0])
        proposal = theta + self.scale * noise
        log_new = self.log_target(proposal)
        log_ratio = log_new - log_p
        accept_prob = math.exp(min(0.0, log_ratio)) if log_ratio == log_ratio else 0.0
        if rng.random() < accept_prob:
            return proposal, log_new, True, accept_prob
        return theta, log_p, False, accept_prob


def _initial_scale(spec: GibbsSpec) -> float:
    """Return a first proposal scale from the posterior's rough spread."""
    strength = spec.eta * spec.loss.scale * spec.n
    return float(np.clip(2.38 / math.sqrt(spec.param_dim * strength), 1e-4, 10.0))


def _empirical_chol(history: List[np.ndarray]) -> Optional[np.ndarray]:
    # drop the first half, it holds the transient
    states = np.asarray(history[len(history) // 2 :])
    if states.shape[0] < 2:
        return None
    cov = np.atleast_2d(np.cov(states, rowvar=False))
    cov = cov + PROPOSAL_JITTER * np.eye(cov.shape[0])
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        return None


def sample_gibbs(spec: GibbsSpec, cfg: SamplerConfig = None, seed=0) -> PosteriorDraws:
    """Draw from the Gibbs posterior by adaptive random-walk Metropolis.

    During burn-in the log proposal scale follows a Robbins-Monro update
    toward the target acceptance rate, and after the first adapt_window
    steps the proposal shape is the empirical covariance of the burn-in
    states. The kernel is frozen once burn-in ends.
    """
    cfg = cfg or SamplerConfig()
    q = spec.param_dim
    if q < 1:
        raise ContractViolation("sample_gibbs() needs a parameter of dimension >= 1")
    _LOGGER.debug(
        "sample_gibbs(kind=%s, eta=%s, n=%s, seed=%s)...",
        spec.loss.kind,
        spec.eta,
        spec.n,
        seed,
    )

    if isinstance(cfg.init, str):
        theta = np.array(erm_fit(spec.loss, spec.data, OptimizerConfig()).theta)
    else:
        theta = np.array(as_theta(cfg.init, q))
    log_p = spec.log_target(theta)
    if not math.isfinite(log_p):
        raise InitializationError(
            f"the log posterior is not finite at the initial state {theta}"
        )

    rng = np.random.default_rng(seed)
    target = cfg.accept_target(q)
    log_scale = math.log(_initial_scale(spec))
    kernel = MetropolisKernel(spec.log_target, np.eye(q), math.exp(log_scale))
    history = []
    shaped = False

    for t in range(cfg.burn_in):
        theta, log_p, _, accept_prob = kernel.step(theta, log_p, rng)
        history.append(theta)
        log_scale += (accept_prob - target) / (t + 1) ** ADAPT_GAIN_EXPONENT
        if (t + 1) % cfg.adapt_window == 0:
            chol = _empirical_chol(history)
            if chol is not None:
                kernel.chol = chol
                if not shaped:
                    log_scale = math.log(2.38 / math.sqrt(q))
                    shaped = True
        kernel.scale = math.exp(log_scale)

    total = cfg.n_draws * cfg.thin
    draws = np.empty((cfg.n_draws, q))
    log_post = np.empty(cfg.n_draws)
    accepted = 0
    for t in range(total):
        theta, log_p, moved, _ = kernel.step(theta, log_p, rng)
        accepted += moved
        if (t + 1) % cfg.thin == 0:
            draws[t // cfg.thin] = theta
            log_post[t // cfg.thin] = log_p

    draws.setflags(write=False)
    log_post.setflags(write=False)
    result = PosteriorDraws(draws, log_post, accepted / total, seed, spec.eta)
    _LOGGER.debug("sample_gibbs(): accept_rate=%.3f", result.accept_rate)
    return result


@dataclass(frozen=True)
class DiscreteGrid:
    """A finitely supported candidate measure over parameter values."""

    points: tuple
    prior_weights: np.ndarray
    risk_values: np.ndarray

    def __post_init__(self) -> None:
        prior = np.asarray(self.prior_weights, dtype=float)
        risks = np.asarray(self.risk_values, dtype=float)
        if prior.shape != (len(self.points),) or risks.shape != prior.shape:
            raise ContractViolation("grid points, weights and risks differ in length")
        if np.any(prior < 0.0) or abs(math.fsum(prior) - 1.0) > 1e-12:
            raise ContractViolation("prior weights must be a probability vector")
        if not np.all(np.isfinite(risks)):
            raise DomainError("grid risk values must be finite")
        object.__setattr__(self, "prior_weights", prior)
        object.__setattr__(self, "risk_values", risks)

    @classmethod
    def from_loss(cls, loss: LossModel, data: DataSet, points, prior_weights=None):
        """Evaluate R_n at every point; default prior weights are uniform."""
        prepared = loss.prepare(data.records)
        points = tuple(as_theta(p, loss.param_dim) for p in points)
        if prior_weights is None:
            prior_weights = np.full(len(points), 1.0 / len(points))
        risks = [risk_from(loss, p, prepared) for p in points]
        return cls(points, prior_weights, risks)


def _check_simplex(weights, size) -> np.ndarray:
    weights = np.asarray(weights, dtype=float)
    if weights.shape != (size,):
        raise ContractViolation(f"weights must have length {size}")
    if np.any(weights < 0.0) or abs(math.fsum(weights) - 1.0) > 1e-9:
        raise ContractViolation("weights must be a probability vector")
    return weights


def bissiri_objective(grid: DiscreteGrid, weights, eta, n) -> float:
    """Return sum_j w_j R_n(theta_j) + (eta n)^-1 KL(w || p), with 0 log 0 = 0."""
    weights = _check_simplex(weights, len(grid.points))
    if not eta > 0.0 or n < 1:
        raise ContractViolation("eta and n must be positive")
    if np.any((weights > 0.0) & (grid.prior_weights == 0.0)):
        raise DomainError("weight on a point with zero prior mass has infinite KL")
    divergence = math.fsum(rel_entr(weights, grid.prior_weights))
    return math.fsum(weights * grid.risk_values) + divergence / (eta * n)


def gibbs_weights_discrete(grid: DiscreteGrid, eta, n) -> np.ndarray:
    """Return w_j proportional to p_j exp(-eta n R_n(theta_j)), normalized."""
    if not np.any(grid.prior_weights > 0.0):
        raise ContractViolation("at least one prior weight must be positive")
    with np.errstate(divide="ignore"):
        log_weights = np.log(grid.prior_weights) - eta * n * grid.risk_values
    weights = np.exp(log_weights - logsumexp(log_weights))
    return weights / math.fsum(weights)
