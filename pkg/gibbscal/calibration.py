"""General posterior calibration of the learning rate.

The coverage of the credible region at a learning rate eta is estimated by
the bootstrap, and eta is moved by a Robbins-Monro iteration until that
coverage matches the nominal level 1 - alpha.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from .const import (
    DEFAULT_ALPHA,
    DEFAULT_B,
    DEFAULT_ETA0,
    DEFAULT_ETA_BOUNDS,
    DEFAULT_GAMMA_EXP,
    DEFAULT_KAPPA0,
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    REGION_KIND,
    REGION_KINDS,
)
from .data import DataSet
from .exceptions import ContractViolation
from .gibbs import GibbsSpec, PosteriorDraws, Prior, SamplerConfig, sample_gibbs
from .loss import LossModel, erm_fit
from .regions import (
    CredibleRegion,
    contains,
    elliptical_region,
    hpd_density_region,
    hpd_interval,
    uniform_band,
)
from .session import call_with_retry, derive_seed, run_map

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class GpcConfig:
    """Settings for bootstrap coverage estimation and the Robbins-Monro loop."""

    alpha: float = DEFAULT_ALPHA
    B: int = DEFAULT_B
    eta0: float = DEFAULT_ETA0
    kappa0: float = DEFAULT_KAPPA0
    gamma_exp: float = DEFAULT_GAMMA_EXP
    max_iter: int = DEFAULT_MAX_ITER
    tol: float = DEFAULT_TOL
    eta_bounds: Tuple[float, float] = DEFAULT_ETA_BOUNDS
    region_kind: str = REGION_KIND.Ellipse
    feature: Optional[int] = None
    band_grid: Optional[Tuple[float, ...]] = None
    sampler: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ContractViolation(f"alpha={self.alpha} must lie in (0, 1)")
        if self.B < 1 or self.max_iter < 1:
            raise ContractViolation("B and max_iter must be positive integers")
        if not (self.kappa0 > 0.0 and self.tol > 0.0):
            raise ContractViolation("kappa0 and tol must be positive")
        if not 0.5 < self.gamma_exp <= 1.0:
            raise ContractViolation(f"gamma_exp={self.gamma_exp} must lie in (0.5, 1]")
        eta_min, eta_max = (float(v) for v in self.eta_bounds)
        if not 0.0 < eta_min < self.eta0 < eta_max:
            raise ContractViolation(
                f"need 0 < eta_min < eta0 < eta_max, got {eta_min}, {self.eta0}, "
                f"{eta_max}"
            )
        object.__setattr__(self, "eta_bounds", (eta_min, eta_max))
        if self.region_kind not in REGION_KINDS:
            raise ContractViolation(f"region_kind='{self.region_kind}' isn't valid.")
        if self.feature is not None and self.feature < 0:
            raise ContractViolation("feature must be a nonnegative index")
        if self.region_kind == REGION_KIND.Band:
            if self.band_grid is None or len(self.band_grid) < 2:
                raise ContractViolation("a band region needs at least two grid points")
        if self.band_grid is not None:
            object.__setattr__(
                self, "band_grid", tuple(float(v) for v in self.band_grid)
            )

    @property
    def target(self) -> float:
        return 1.0 - self.alpha

    def kappa(self, s) -> float:
        """Return the step size kappa_s = kappa0 (1 + s)^-gamma_exp."""
        return self.kappa0 * (1.0 + s) ** (-self.gamma_exp)

    def to_json(self) -> Dict:
        return {
            "alpha": self.alpha,
            "B": self.B,
            "eta0": self.eta0,
            "kappa0": self.kappa0,
            "gamma_exp": self.gamma_exp,
            "max_iter": self.max_iter,
            "tol": self.tol,
            "eta_bounds": list(self.eta_bounds),
            "region_kind": self.region_kind,
            "feature": self.feature,
            "band_grid": None if self.band_grid is None else list(self.band_grid),
            "sampler": self.sampler.to_json(),
        }


def band_design(loss: LossModel, grid) -> np.ndarray:
    """Return the (grid, J) matrix turning coefficients into curve values."""
    basis = getattr(loss.base, "basis", None)
    if basis is None:
        raise ContractViolation(f"the {loss.kind} loss has no basis to draw curves from")
    return basis.design(np.asarray(grid, dtype=float).reshape(-1, 1))


def credible_region(
    draws: PosteriorDraws, spec: GibbsSpec, cfg: GpcConfig, feature=None
) -> CredibleRegion:
    """Build the region cfg asks for from the draws.

    A feature index, from the argument or cfg, selects a marginal HPD
    interval for that coordinate.
    """
    feature = cfg.feature if feature is None else feature
    if feature is not None or cfg.region_kind == REGION_KIND.Interval:
        index = 0 if feature is None else feature
        if index >= draws.param_dim:
            raise ContractViolation(f"feature {index} is outside the parameter")
        return hpd_interval(draws.column(index), cfg.alpha, feature=index)
    if cfg.region_kind == REGION_KIND.Ellipse:
        return elliptical_region(draws, cfg.alpha)
    if cfg.region_kind == REGION_KIND.DensityLevel:
        return hpd_density_region(draws, cfg.alpha, spec)
    design = band_design(spec.loss, cfg.band_grid)
    return uniform_band(draws.draws @ design.T, cfg.alpha, grid=cfg.band_grid)


def region_point(theta, loss: LossModel, cfg: GpcConfig, feature=None):
    """Return what the configured region is tested against for a parameter theta."""
    feature = cfg.feature if feature is None else feature
    theta = np.asarray(theta, dtype=float)
    if feature is not None or cfg.region_kind == REGION_KIND.Interval:
        return float(theta[0 if feature is None else feature])
    if cfg.region_kind == REGION_KIND.Band:
        return band_design(loss, cfg.band_grid) @ theta
    return theta


def bootstrap_resample(data: DataSet, seed) -> DataSet:
    """Return n records drawn uniformly with replacement from data."""
    rng = np.random.default_rng(seed)
    return data.take(rng.integers(0, data.n, size=data.n))


def _replicate_covers(data, loss, prior, eta, cfg, theta_hat, seed) -> bool:
    resample = bootstrap_resample(data, seed)
    spec = GibbsSpec(loss, prior, eta, resample)
    draws = sample_gibbs(spec, cfg.sampler, derive_seed(seed, "chain", 0))
    region = credible_region(draws, spec, cfg)
    return contains(region, region_point(theta_hat, loss, cfg))


def _safe_replicate(data, loss, prior, eta, cfg, theta_hat, seed) -> bool:
    try:
        return bool(
            call_with_retry(
                _replicate_covers, seed, data, loss, prior, eta, cfg, theta_hat
            )
        )
    except Exception:  # pylint: disable=broad-except
        _LOGGER.warning(
            "Bootstrap replicate (eta=%s, seed=%s) failed twice, counted as "
            "not covering.",
            eta,
            seed,
            exc_info=True,
        )
        return False


@dataclass(frozen=True)
class CoverageEstimate:
    """The bootstrap coverage proportion at one learning rate."""

    eta: float
    c_hat: float
    B: int
    seed: int
    hits: int = 0

    def to_json(self) -> Dict:
        return {
            "eta": self.eta,
            "c_hat": self.c_hat,
            "B": self.B,
            "seed": self.seed,
            "hits": self.hits,
        }


def coverage_from_flags(flags, eta, seed) -> CoverageEstimate:
    """Return the proportion of True flags as a CoverageEstimate."""
    flags = [bool(f) for f in flags]
    if not flags:
        raise ContractViolation("coverage needs at least one replicate")
    hits = sum(flags)
    return CoverageEstimate(float(eta), hits / len(flags), len(flags), int(seed), hits)


def estimate_coverage_boot(
    eta,
    data: DataSet,
    loss: LossModel,
    prior: Prior,
    cfg: GpcConfig,
    seed,
    pool=None,
    theta_hat=None,
) -> CoverageEstimate:
    """Return the bootstrap estimate of the coverage of the credible region at eta.

    Each of the B replicates resamples the data, samples the Gibbs posterior
    on the resample and checks whether its region holds the original-data
    risk minimizer.
    """
    if theta_hat is None:
        theta_hat = erm_fit(loss, data).theta
    _LOGGER.debug("estimate_coverage_boot(eta=%s, B=%s, seed=%s)...", eta, cfg.B, seed)
    args = [
        (data, loss, prior, eta, cfg, theta_hat, derive_seed(seed, "boot", b))
        for b in range(cfg.B)
    ]
    flags = run_map(pool, _safe_replicate, args)
    return coverage_from_flags(flags, eta, seed)


@dataclass(frozen=True)
class TraceEntry:
    """One Robbins-Monro update from eta_prev to eta."""

    s: int
    eta_prev: float
    c_hat: float
    kappa: float
    eta_raw: float
    eta: float

    def to_json(self) -> Dict:
        return {
            "s": self.s,
            "eta_prev": self.eta_prev,
            "c_hat": self.c_hat,
            "kappa": self.kappa,
            "eta_raw": self.eta_raw,
            "eta": self.eta,
        }


@dataclass(frozen=True)
class CalibrationResult:
    """The selected learning rate and the path that led to it."""

    eta_hat: float
    trace: List[TraceEntry]
    terminated_by: str
    total_posterior_samples_run: int

    def to_json(self) -> Dict:
        return {
            "eta_hat": self.eta_hat,
            "trace": [entry.to_json() for entry in self.trace],
            "terminated_by": self.terminated_by,
            "total_posterior_samples_run": self.total_posterior_samples_run,
        }


def rm_update(eta_prev, c_hat, s, cfg: GpcConfig) -> TraceEntry:
    """Return eta_s = clamp(eta_{s-1} + kappa_s {c_hat - (1 - alpha)})."""
    kappa = cfg.kappa(s)
    eta_raw = eta_prev + kappa * (c_hat - cfg.target)
    eta = float(np.clip(eta_raw, *cfg.eta_bounds))
    return TraceEntry(s, float(eta_prev), float(c_hat), kappa, eta_raw, eta)


def gpc_calibrate(
    data: DataSet,
    loss: LossModel,
    prior: Prior,
    cfg: GpcConfig,
    seed,
    pool=None,
    coverage_fn: Optional[Callable[[float, int], float]] = None,
    progress: Optional[Callable[[Dict], None]] = None,
) -> CalibrationResult:
    """Return the learning rate whose bootstrap coverage matches 1 - alpha.

    coverage_fn(eta, seed) replaces the bootstrap estimate when given.
    The loop stops once |eta_s - eta_{s-1}| < tol or after max_iter updates.
    """
    _LOGGER.debug(
        "gpc_calibrate(alpha=%s, B=%s, eta0=%s, seed=%s)...",
        cfg.alpha,
        cfg.B,
        cfg.eta0,
        seed,
    )
    if coverage_fn is None:
        theta_hat = erm_fit(loss, data).theta

        def coverage_fn(eta, iter_seed) -> float:
            return estimate_coverage_boot(
                eta, data, loss, prior, cfg, iter_seed, pool, theta_hat
            ).c_hat

        samples_per_eval = cfg.B
    else:
        samples_per_eval = 0

    eta = float(cfg.eta0)
    trace = []
    terminated_by = "max_iter"
    for s in range(1, cfg.max_iter + 1):
        c_hat = coverage_fn(eta, derive_seed(seed, "iter", s))
        entry = rm_update(eta, c_hat, s, cfg)
        trace.append(entry)
        if progress is not None:
            progress(entry.to_json())
        _LOGGER.debug("gpc_calibrate(): s=%s, c_hat=%s, eta=%s", s, c_hat, entry.eta)

        converged = abs(entry.eta - eta) < cfg.tol
        eta = entry.eta
        if converged:
            terminated_by = "tolerance"
            break

    _LOGGER.info(
        "gpc_calibrate(): eta_hat=%.4f after %s iterations (%s).",
        eta,
        len(trace),
        terminated_by,
    )
    return CalibrationResult(eta, trace, terminated_by, samples_per_eval * len(trace))
