"""Python library for Gibbs posterior inference with a calibrated learning rate.

A Gibbs posterior replaces the likelihood by exp(-eta n R_n(theta)), with
R_n the empirical risk of a loss; the learning rate eta is chosen so that
its credible regions reach their nominal frequentist coverage.
"""

import logging
from typing import Optional

from ._version import __version__
from .asymptotics import (
    HessianConfig,
    SandwichEstimate,
    estimate_risk_hessian,
    estimate_score_outer,
    oracle_learning_rate,
    sandwich_cov,
)
from .calibration import CalibrationResult, GpcConfig, credible_region, gpc_calibrate
from .data import DataSet
from .exceptions import GibbsCalError
from .gibbs import (
    FlatPrior,
    GaussianPrior,
    GibbsSpec,
    PosteriorDraws,
    Prior,
    SamplerConfig,
    sample_gibbs,
)
from .loss import Basis, LossModel, OptimizerConfig, ThetaEstimate, erm_fit, make_loss
from .session import derive_seed

_LOGGER = logging.getLogger(__name__)

__all__ = [
    "Basis",
    "CalibrationResult",
    "DataSet",
    "FlatPrior",
    "GaussianPrior",
    "GibbsCalError",
    "GibbsModel",
    "GibbsSpec",
    "GpcConfig",
    "HessianConfig",
    "LossModel",
    "OptimizerConfig",
    "PosteriorDraws",
    "Prior",
    "SamplerConfig",
    "SandwichEstimate",
    "ThetaEstimate",
    "__version__",
    "credible_region",
    "derive_seed",
    "erm_fit",
    "estimate_risk_hessian",
    "estimate_score_outer",
    "gpc_calibrate",
    "make_loss",
    "oracle_learning_rate",
    "sample_gibbs",
    "sandwich_cov",
]


class GibbsModel:
    """A loss bound to a dataset and a prior."""

    def __init__(
        self, loss: LossModel, data: DataSet, prior: Optional[Prior] = None, debug=False
    ) -> None:
        if debug is True:
            _LOGGER.setLevel(logging.DEBUG)
            _LOGGER.debug("Debug mode is explicitly enabled.")
        else:
            _LOGGER.debug(
                "Debug mode is not explicitly enabled (but may be enabled elsewhere)."
            )

        loss.check_data(data)
        self.loss = loss
        self.data = data
        self.prior = prior if prior is not None else FlatPrior(loss.param_dim)
        self._estimate = None
        self._verbose = 0

    def __repr__(self) -> str:
        return f"GibbsModel(loss={self.loss.kind}, prior={self.prior!r}, data={self.data!r})"

    @property
    def verbosity(self) -> int:
        """Get/Set the level of detail of draw summaries."""
        return self._verbose

    @verbosity.setter
    def verbosity(self, value) -> None:
        if 0 <= value <= 2:
            self._verbose = value
        else:
            raise ValueError(
                f"{value} is not valid for verbosity, the permissible range is (0-2)."
            )

    def fit(self, cfg: OptimizerConfig = None) -> ThetaEstimate:
        """Return the empirical risk minimizer, computed once."""
        if self._estimate is None or cfg is not None:
            self._estimate = erm_fit(self.loss, self.data, cfg)
            if not self._estimate.converged:
                _LOGGER.warning(
                    "GibbsModel.fit(): the search stopped after %s iterations "
                    "without converging.",
                    self._estimate.iterations,
                )
        return self._estimate

    def spec(self, eta) -> GibbsSpec:
        return GibbsSpec(self.loss, self.prior, eta, self.data)

    def sample(self, eta, cfg: SamplerConfig = None, seed=0) -> PosteriorDraws:
        """Return draws from the Gibbs posterior at learning rate eta."""
        return sample_gibbs(self.spec(eta), cfg, derive_seed(seed, "chain", 0))

    def summary(self, draws: PosteriorDraws):
        return draws.info(self.verbosity)

    def region(self, draws: PosteriorDraws, cfg: GpcConfig):
        """Return the credible region cfg asks for, built from draws."""
        return credible_region(draws, self.spec(draws.eta), cfg)

    def calibrate(self, cfg: GpcConfig, seed=0, pool=None, progress=None) -> CalibrationResult:
        """Return the learning rate selected by bootstrap coverage calibration."""
        return gpc_calibrate(
            self.data, self.loss, self.prior, cfg, seed, pool=pool, progress=progress
        )

    def sandwich(self, theta=None, cfg: HessianConfig = None) -> SandwichEstimate:
        """Return V, S and V^-1 S V^-1 at theta (by default the ERM)."""
        theta = self.fit().theta if theta is None else theta
        V = estimate_risk_hessian(self.loss, self.data, theta, cfg).matrix
        S = estimate_score_outer(self.loss, self.data, theta)
        return sandwich_cov(V, S)

    def oracle_learning_rate(self, theta=None, cfg: HessianConfig = None) -> float:
        estimate = self.sandwich(theta, cfg)
        return oracle_learning_rate(estimate.Sigma, estimate.V)
