"""Data-generating processes and Monte Carlo studies of Gibbs posteriors."""

import dataclasses
import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional

import numpy as np
from scipy.stats import gamma as gamma_dist
from scipy.stats import norm
from scipy.stats import t as t_dist

from .calibration import (
    GpcConfig,
    bootstrap_resample,
    credible_region,
    gpc_calibrate,
    region_point,
)
from .const import (
    ATTRS_STUDY,
    DEFAULT_BAND_POINTS,
    DGP_KIND,
    DGP_KINDS,
    GAMMA_SCALE,
    GAMMA_SHAPE,
    GAMMA_TAU,
    HINGE_T_DF,
    HINGE_THETA,
    HINGE_X_MEAN,
    HINGE_X_SD,
    MCID_PRIOR_SD,
    NLR_COEFS,
    NLR_DEGREE,
    NLR_NOISE_SD,
    NLR_PRIOR_SD,
    QR_CHISQ_DF,
    QR_NOISE_SD,
    QR_SHIFT,
    QR_THETA,
    REGION_KIND,
)
from .data import DataSet
from .exceptions import ContractViolation
from .gibbs import (
    FlatPrior,
    GaussianPrior,
    GibbsSpec,
    PosteriorDraws,
    Prior,
    sample_gibbs,
)
from .loss import (
    Basis,
    CheckRegressionLoss,
    HingeLoss,
    LossModel,
    McidLoss,
    OptimizerConfig,
    QuantileLoss,
    SquaredErrorLoss,
    erm_fit,
)
from .regions import (
    EllipticalRegion,
    contains,
    elliptical_region,
    hpd_density_region,
    hpd_interval,
)
from .session import derive_seed, run_map

_LOGGER = logging.getLogger(__name__)


@dataclass(frozen=True)
class Dgp:
    """A data-generating process with its risk minimizer and loss."""

    kind: str
    true_theta: np.ndarray
    loss_binding: LossModel
    prior: Prior

    def __post_init__(self) -> None:
        theta = np.atleast_1d(np.asarray(self.true_theta, dtype=float))
        if theta.shape[0] != self.loss_binding.param_dim:
            raise ContractViolation(
                f"true theta has dimension {theta.shape[0]}, the loss has "
                f"{self.loss_binding.param_dim}"
            )
        object.__setattr__(self, "true_theta", theta)

    def gpc_config(self, **overrides) -> GpcConfig:
        """Return the GPC settings the studies use for this process."""
        if self.kind == DGP_KIND.QuantileRegression:
            settings = {"region_kind": REGION_KIND.Ellipse}
        elif self.kind == DGP_KIND.HingeClassification:
            settings = {"region_kind": REGION_KIND.Interval, "feature": 1}
        elif self.kind == DGP_KIND.NonlinearRegression:
            grid = tuple(np.linspace(0.0, 1.0, DEFAULT_BAND_POINTS).tolist())
            settings = {"region_kind": REGION_KIND.Band, "band_grid": grid}
        else:
            settings = {"region_kind": REGION_KIND.Interval}
        settings.update(overrides)
        return GpcConfig(**settings)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "true_theta": self.true_theta.tolist(),
            "loss": self.loss_binding.to_json(),
            "prior": self.prior.to_json(),
        }


def make_dgp(kind) -> Dgp:
    """Return one of the built-in data-generating processes.

    The hinge example uses the feature map f(x) = (1, x); the MCID example
    uses X ~ N(0, 1) and P(Y = +1 | x) = Phi(x), so theta* = 0.
    """
    affine = Basis("affine")
    if kind == DGP_KIND.GammaQuantile:
        theta = [gamma_dist.ppf(GAMMA_TAU, GAMMA_SHAPE, scale=GAMMA_SCALE)]
        return Dgp(kind, theta, QuantileLoss(GAMMA_TAU), FlatPrior(1))
    if kind == DGP_KIND.Mcid:
        return Dgp(kind, [0.0], McidLoss(), GaussianPrior([0.0], [MCID_PRIOR_SD]))
    if kind == DGP_KIND.QuantileRegression:
        return Dgp(kind, QR_THETA, CheckRegressionLoss(0.5, affine), FlatPrior(2))
    if kind == DGP_KIND.HingeClassification:
        return Dgp(kind, HINGE_THETA, HingeLoss(affine), FlatPrior(2))
    if kind == DGP_KIND.NonlinearRegression:
        basis = Basis("polynomial", degree=NLR_DEGREE)
        prior = GaussianPrior(np.zeros(NLR_DEGREE + 1), NLR_PRIOR_SD)
        return Dgp(kind, NLR_COEFS, SquaredErrorLoss(basis), prior)
    raise ContractViolation(f"make_dgp(): kind='{kind}' isn't valid, use {DGP_KINDS}")


def true_curve(x) -> np.ndarray:
    """Return 20x^3 - 34x^2 + 15.2x - 1.2."""
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), NLR_COEFS)


def gen_dataset(dgp: Dgp, n, seed) -> DataSet:
    """Return n records drawn from the process, deterministic in seed."""
    if n < 1:
        raise ContractViolation("gen_dataset() needs n >= 1")
    rng = np.random.default_rng(seed)

    if dgp.kind == DGP_KIND.GammaQuantile:
        return DataSet(rng.gamma(GAMMA_SHAPE, GAMMA_SCALE, size=n).reshape(-1, 1))

    if dgp.kind == DGP_KIND.QuantileRegression:
        x = rng.chisquare(QR_CHISQ_DF, size=n) - QR_SHIFT
        y = QR_THETA[0] + QR_THETA[1] * x + QR_NOISE_SD * rng.standard_normal(n)
    elif dgp.kind == DGP_KIND.HingeClassification:
        x = rng.normal(HINGE_X_MEAN, HINGE_X_SD, size=n)
        prob = t_dist.cdf(HINGE_THETA[0] + HINGE_THETA[1] * x, HINGE_T_DF)
        y = np.where(rng.random(n) < prob, 1.0, -1.0)
    elif dgp.kind == DGP_KIND.Mcid:
        x = rng.standard_normal(n)
        y = np.where(rng.random(n) < norm.cdf(x), 1.0, -1.0)
    elif dgp.kind == DGP_KIND.NonlinearRegression:
        x = rng.random(n)
        y = true_curve(x) + NLR_NOISE_SD * rng.standard_normal(n)
    else:
        raise ContractViolation(f"gen_dataset(): kind='{dgp.kind}' isn't valid.")
    return DataSet(np.column_stack([x, y]), split_index=1)


@dataclass(frozen=True)
class ReplicationRecord:
    """The outcome of one study replication."""

    rep: int
    seed: int
    eta_hat: Optional[float]
    contains: Dict[str, bool]
    region_size: Optional[float]
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None

    def to_json(self) -> Dict:
        return {
            "rep": self.rep,
            "seed": self.seed,
            "eta_hat": self.eta_hat,
            "contains": dict(self.contains),
            "region_size": self.region_size,
            "error": self.error,
        }


@dataclass(frozen=True)
class StudyResult:
    """Coverage proportions and learning-rate statistics over replications."""

    reps: int
    failed: int
    coverage: Dict[str, float]
    mean_eta_hat: float
    sd_eta_hat: float
    mean_region_size: float
    per_rep_records: List[ReplicationRecord]

    @property
    def data(self) -> Dict:
        return {
            "reps": self.reps,
            "failed": self.failed,
            "coverage": dict(self.coverage),
            "mean_eta_hat": self.mean_eta_hat,
            "sd_eta_hat": self.sd_eta_hat,
            "mean_region_size": self.mean_region_size,
        }

    def info(self, verbosity=0) -> Dict:
        """Return the summary, with detail according to verbosity."""
        if verbosity >= 2:
            return {
                **self.data,
                "per_rep_records": [r.to_json() for r in self.per_rep_records],
            }
        keys = list(ATTRS_STUDY["summary_keys"])
        if verbosity == 1:
            keys += ATTRS_STUDY["detail_keys"]
        return {k: v for k, v in self.data.items() if k in keys}

    def rows(self) -> List[Dict]:
        """Return flat per-replication rows for a CSV side table."""
        rows = []
        for record in self.per_rep_records:
            row = {
                "rep": record.rep,
                "seed": record.seed,
                "eta_hat": record.eta_hat,
                "region_size": record.region_size,
                "error": record.error or "",
            }
            row.update({f"contains_{k}": int(v) for k, v in record.contains.items()})
            rows.append(row)
        return rows


def _run_replication(dgp, n, cfg, calibrate, eta, rep, seed) -> ReplicationRecord:
    """Generate data, choose eta, sample, and test the regions against theta*."""
    try:
        data = gen_dataset(dgp, n, derive_seed(seed, "data"))
        loss, prior = dgp.loss_binding, dgp.prior
        if calibrate:
            eta = gpc_calibrate(data, loss, prior, cfg, derive_seed(seed, "gpc")).eta_hat
        spec = GibbsSpec(loss, prior, eta, data)
        draws = sample_gibbs(spec, cfg.sampler, derive_seed(seed, "chain", 0))

        region = credible_region(draws, spec, cfg)
        flags = {"region": contains(region, region_point(dgp.true_theta, loss, cfg))}
        for j in range(draws.param_dim):
            interval = hpd_interval(draws.column(j), cfg.alpha, feature=j)
            flags[f"theta{j}"] = contains(interval, dgp.true_theta[j])
        return ReplicationRecord(rep, seed, float(eta), flags, float(region.size))

    except Exception as exc:  # pylint: disable=broad-except
        _LOGGER.exception("Replication %s (seed=%s) failed.", rep, seed)
        return ReplicationRecord(rep, seed, None, {}, None, error=repr(exc))


def summarize_replications(records: List[ReplicationRecord]) -> StudyResult:
    """Aggregate replication records in index order; failures are counted apart."""
    done = [r for r in records if not r.failed]
    failed = len(records) - len(done)
    if failed:
        _LOGGER.warning("%s of %s replications failed and were excluded.", failed, len(records))
    if not done:
        return StudyResult(0, failed, {}, math.nan, math.nan, math.nan, list(records))

    keys = list(done[0].contains)
    coverage = {k: sum(r.contains[k] for r in done) / len(done) for k in keys}
    etas = np.array([r.eta_hat for r in done])
    sizes = np.array([r.region_size for r in done])
    sd_eta = float(np.std(etas, ddof=1)) if len(done) > 1 else 0.0
    return StudyResult(
        len(done),
        failed,
        coverage,
        float(np.mean(etas)),
        sd_eta,
        float(np.mean(sizes)),
        list(records),
    )


def run_coverage_study(
    dgp: Dgp,
    n,
    cfg: GpcConfig,
    reps,
    seed,
    calibrate=True,
    pool=None,
    progress: Optional[Callable[[Dict], None]] = None,
) -> StudyResult:
    """Return Monte Carlo coverage of credible regions for the true theta*.

    With calibrate=False every replication uses the fixed eta0 from cfg.
    progress, if given, is called with a replication count after each batch.
    """
    if reps < 1:
        raise ContractViolation("run_coverage_study() needs reps >= 1")
    _LOGGER.debug(
        "run_coverage_study(kind=%s, n=%s, reps=%s, calibrate=%s)...",
        dgp.kind,
        n,
        reps,
        calibrate,
    )
    args = [
        (dgp, n, cfg, calibrate, cfg.eta0, r, derive_seed(seed, "rep", r))
        for r in range(reps)
    ]
    batch = pool.workers if pool is not None else 1
    records = []
    for start in range(0, reps, batch):
        records += run_map(pool, _run_replication, args[start : start + batch])
        if progress is not None:
            progress({"done": len(records), "reps": reps})
    result = summarize_replications(records)
    _LOGGER.info(
        "run_coverage_study(): coverage=%s, mean_eta_hat=%.4f",
        result.coverage,
        result.mean_eta_hat,
    )
    return result


def _fixed_eta_config(cfg: GpcConfig, eta) -> GpcConfig:
    eta_min, eta_max = cfg.eta_bounds
    bounds = (min(eta_min, eta / 2.0), max(eta_max, 2.0 * eta))
    return dataclasses.replace(cfg, eta0=eta, eta_bounds=bounds)


def coverage_vs_eta_curve(
    dgp: Dgp,
    n_list,
    eta_grid,
    reps,
    seed,
    cfg: GpcConfig = None,
    pool=None,
) -> List[Dict]:
    """Return one Monte Carlo coverage row per (n, eta) cell.

    Replication r at sample size n reuses the same data for every eta.
    """
    if not n_list or not eta_grid or reps < 1:
        raise ContractViolation("coverage_vs_eta_curve() needs nonempty grids")
    cfg = cfg or dgp.gpc_config()
    cells = [(n, float(eta)) for n in n_list for eta in eta_grid]
    args = [
        (dgp, n, _fixed_eta_config(cfg, eta), False, eta, r, derive_seed(seed, "n", n, "rep", r))
        for n, eta in cells
        for r in range(reps)
    ]
    records = run_map(pool, _run_replication, args)

    table = []
    for index, (n, eta) in enumerate(cells):
        result = summarize_replications(records[index * reps : (index + 1) * reps])
        table.append(
            {
                "n": n,
                "eta": eta,
                "coverage": result.coverage.get("region", math.nan),
                "reps": result.reps,
                "failed": result.failed,
            }
        )
    return table


def _exceedance(dgp, n, eps, eta, cfg, seed) -> float:
    data = gen_dataset(dgp, n, derive_seed(seed, "data"))
    spec = GibbsSpec(dgp.loss_binding, dgp.prior, eta, data)
    draws = sample_gibbs(spec, cfg.sampler, derive_seed(seed, "chain", 0))
    distance = np.linalg.norm(draws.draws - dgp.true_theta, axis=1)
    return float(np.mean(distance > eps))


def consistency_diagnostic(
    dgp: Dgp,
    n_list,
    eps,
    eta,
    reps,
    seed,
    cfg: GpcConfig = None,
    pool=None,
) -> List[Dict]:
    """Return, per n, the average posterior probability of {|theta - theta*| > eps}."""
    if not eps > 0.0:
        raise ContractViolation("consistency_diagnostic() needs eps > 0")
    if not n_list or reps < 1:
        raise ContractViolation("consistency_diagnostic() needs n_list and reps")
    cfg = cfg or dgp.gpc_config()
    args = [
        (dgp, n, eps, eta, cfg, derive_seed(seed, "n", n, "rep", r))
        for n in n_list
        for r in range(reps)
    ]
    probs = run_map(pool, _exceedance, args)
    return [
        {
            "n": n,
            "eps": float(eps),
            "eta": float(eta),
            "prob": float(np.mean(probs[i * reps : (i + 1) * reps])),
            "reps": reps,
        }
        for i, n in enumerate(n_list)
    ]


def _bootstrap_estimate(data, loss, seed) -> np.ndarray:
    resample = bootstrap_resample(data, seed)
    return np.array(erm_fit(loss, resample, OptimizerConfig(seed=seed % 2**32)).theta)


def bootstrap_m_region(
    data: DataSet, loss: LossModel, B, alpha, seed, pool=None
) -> EllipticalRegion:
    """Return the elliptical confidence region of the bootstrapped M-estimator."""
    if B < loss.param_dim + 2:
        raise ContractViolation(
            f"bootstrap_m_region() needs B >= {loss.param_dim + 2}, got {B}"
        )
    args = [(data, loss, derive_seed(seed, "boot", b)) for b in range(B)]
    estimates = np.array(run_map(pool, _bootstrap_estimate, args))
    return elliptical_region(estimates, alpha)


def compare_regions(
    draws: PosteriorDraws, spec: GibbsSpec, alpha, B, seed, points: Dict, pool=None
) -> List[Dict]:
    """Return one row per region: the posterior HPD set, the posterior
    ellipse and the bootstrapped M-estimator ellipse.

    Each row has the region's size and, for every (label, theta) in points,
    a contains_<label> flag. The HPD set's size is its retained fraction of
    draws; the ellipses report sqrt(det(threshold * shape)).
    """
    regions = {
        "hpd-density": hpd_density_region(draws, alpha, spec),
        "posterior-ellipse": elliptical_region(draws, alpha),
        "bootstrap-ellipse": bootstrap_m_region(spec.data, spec.loss, B, alpha, seed, pool),
    }
    rows = []
    for name, region in regions.items():
        row = {"region": name, "size": float(region.size)}
        for label, theta in points.items():
            row[f"contains_{label}"] = contains(region, theta)
        rows.append(row)
    return rows
