"""Credible regions built from posterior draws, and their membership tests.

Empirical quantiles use the inclusive order statistic: the p-quantile of m
values is the k-th smallest, k = ceil(p m).
"""

import logging
import math
from dataclasses import dataclass, field
from typing import Dict, Optional, Union

import numpy as np

from .const import MIN_INTERVAL_DRAWS, REGION_KIND
from .exceptions import ContractViolation, DegeneratePosteriorError, DomainError
from .gibbs import GibbsSpec, PosteriorDraws, log_post_unnorm

_LOGGER = logging.getLogger(__name__)


def _order_index(p, m) -> int:
    """Return the 0-based index of the inclusive p-quantile of m sorted values."""
    k = int(math.ceil(round(p * m, 9)))
    return min(max(k, 1), m) - 1


def empirical_quantile(values, p) -> float:
    values = np.sort(np.asarray(values, dtype=float))
    return float(values[_order_index(p, values.shape[0])])


def _check_alpha(alpha, allow_zero=False) -> float:
    alpha = float(alpha)
    low_ok = alpha >= 0.0 if allow_zero else alpha > 0.0
    if not (low_ok and alpha < 1.0):
        raise ContractViolation(f"alpha={alpha} must lie in (0, 1)")
    return alpha


def _draw_matrix(draws) -> np.ndarray:
    matrix = draws.draws if isinstance(draws, PosteriorDraws) else draws
    matrix = np.asarray(matrix, dtype=float)
    return matrix.reshape(-1, 1) if matrix.ndim == 1 else matrix


@dataclass(frozen=True)
class Interval:
    """A marginal credible interval [lo, hi]."""

    lo: float
    hi: float
    level: float
    feature: Optional[int] = None
    kind = REGION_KIND.Interval

    def __post_init__(self) -> None:
        if self.lo > self.hi:
            raise ContractViolation(f"interval lo={self.lo} exceeds hi={self.hi}")

    @property
    def size(self) -> float:
        return self.hi - self.lo

    def contains(self, value) -> bool:
        value = np.atleast_1d(np.asarray(value, dtype=float))
        if value.shape[0] != 1:
            if self.feature is None or value.shape[0] <= self.feature:
                raise ContractViolation("an interval tests a scalar")
            value = value[self.feature : self.feature + 1]
        return bool(self.lo <= value[0] <= self.hi)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "lo": self.lo,
            "hi": self.hi,
            "level": self.level,
            "feature": self.feature,
        }


@dataclass(frozen=True)
class EllipticalRegion:
    """The set {theta: (theta - c)' S^-1 (theta - c) <= threshold}."""

    center: np.ndarray
    shape: np.ndarray
    threshold: float
    level: float
    chol: np.ndarray = field(init=False, repr=False, compare=False)
    kind = REGION_KIND.Ellipse

    def __post_init__(self) -> None:
        center = np.atleast_1d(np.asarray(self.center, dtype=float))
        shape = np.atleast_2d(np.asarray(self.shape, dtype=float))
        if shape.shape != (center.shape[0], center.shape[0]):
            raise ContractViolation("ellipse shape must be q x q")
        if not np.allclose(shape, shape.T, rtol=1e-10, atol=0.0):
            raise DegeneratePosteriorError("ellipse shape is not symmetric")
        try:
            chol = np.linalg.cholesky(shape)
        except np.linalg.LinAlgError as exc:
            raise DegeneratePosteriorError(
                "ellipse shape is not positive definite"
            ) from exc
        object.__setattr__(self, "center", center)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "chol", chol)

    @property
    def size(self) -> float:
        """Return sqrt(det(threshold * shape)), a volume proxy."""
        q = self.center.shape[0]
        return float(np.prod(np.diag(self.chol)) * self.threshold ** (q / 2.0))

    def mahalanobis(self, points) -> np.ndarray:
        """Return g(theta) for each row of points."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if points.shape[1] != self.center.shape[0]:
            raise ContractViolation(
                f"points have dimension {points.shape[1]}, the region has "
                f"{self.center.shape[0]}"
            )
        whitened = np.linalg.solve(self.chol, (points - self.center).T)
        return np.sum(whitened * whitened, axis=0)

    def contains(self, theta) -> bool:
        return bool(self.mahalanobis(theta)[0] <= self.threshold)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "center": self.center.tolist(),
            "shape": self.shape.tolist(),
            "threshold": self.threshold,
            "level": self.level,
        }


@dataclass(frozen=True)
class DensityLevelRegion:
    """The draws, and points, whose log posterior is at least log_cut."""

    draws: PosteriorDraws = field(repr=False)
    log_cut: float
    level: float
    spec: Optional[GibbsSpec] = field(default=None, repr=False, compare=False)
    kind = REGION_KIND.DensityLevel

    @property
    def retained(self) -> np.ndarray:
        return self.draws.draws[self.draws.log_post >= self.log_cut]

    @property
    def size(self) -> float:
        """Return the fraction of draws retained."""
        return float(np.mean(self.draws.log_post >= self.log_cut))

    def contains(self, theta) -> bool:
        if self.spec is None:
            raise ContractViolation(
                "membership of a new point needs the posterior the draws came from"
            )
        return bool(log_post_unnorm(self.spec, theta) >= self.log_cut)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "log_cut": self.log_cut,
            "level": self.level,
            "n_retained": int(self.retained.shape[0]),
        }


@dataclass(frozen=True)
class UniformBand:
    """A sup-norm ball of curves: center +- radius at every grid point."""

    grid: np.ndarray
    center_curve: np.ndarray
    radius: float
    level: float
    kind = REGION_KIND.Band

    def __post_init__(self) -> None:
        grid = np.asarray(self.grid, dtype=float)
        center = np.asarray(self.center_curve, dtype=float)
        if grid.shape != center.shape:
            raise ContractViolation("band grid and center curve differ in length")
        if self.radius < 0.0:
            raise ContractViolation("band radius must be nonnegative")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "center_curve", center)

    @property
    def size(self) -> float:
        return self.radius

    @property
    def lower(self) -> np.ndarray:
        return self.center_curve - self.radius

    @property
    def upper(self) -> np.ndarray:
        return self.center_curve + self.radius

    def contains(self, curve) -> bool:
        curve = np.asarray(curve, dtype=float)
        if curve.shape != self.center_curve.shape:
            raise ContractViolation(
                f"curve has {curve.shape} values, the band grid has "
                f"{self.center_curve.shape}"
            )
        return bool(np.max(np.abs(curve - self.center_curve)) <= self.radius)

    def to_json(self) -> Dict:
        return {
            "kind": self.kind,
            "grid": self.grid.tolist(),
            "center_curve": self.center_curve.tolist(),
            "radius": self.radius,
            "level": self.level,
        }


CredibleRegion = Union[Interval, EllipticalRegion, DensityLevelRegion, UniformBand]


def hpd_interval(draws, alpha, feature: Optional[int] = None) -> Interval:
    """Return the shortest interval holding ceil((1 - alpha) m) of the draws.

    Ties go to the window with the smallest lower end.
    """
    alpha = _check_alpha(alpha)
    values = np.sort(np.asarray(draws, dtype=float).ravel())
    m = values.shape[0]
    if m < MIN_INTERVAL_DRAWS:
        raise DomainError(
            f"hpd_interval() needs at least {MIN_INTERVAL_DRAWS} draws, got {m}"
        )
    k = _order_index(1.0 - alpha, m) + 1
    widths = values[k - 1 :] - values[: m - k + 1]
    start = int(np.argmin(widths))
    return Interval(float(values[start]), float(values[start + k - 1]), 1.0 - alpha, feature)


def elliptical_region(draws, alpha) -> EllipticalRegion:
    """Return the Mahalanobis ball from the draw mean and covariance.

    The threshold is the (1 - alpha) empirical quantile of g(theta) over the
    draws themselves.
    """
    alpha = _check_alpha(alpha)
    matrix = _draw_matrix(draws)
    m, q = matrix.shape
    if m <= q + 1:
        raise ContractViolation(f"elliptical_region() needs more than {q + 1} draws")
    center = matrix.mean(axis=0)
    shape = np.atleast_2d(np.cov(matrix, rowvar=False))
    shape = 0.5 * (shape + shape.T)
    try:
        np.linalg.cholesky(shape)
    except np.linalg.LinAlgError as exc:
        raise DegeneratePosteriorError("the draws have a singular covariance") from exc
    if not np.all(np.diag(shape) > 0.0):
        raise DegeneratePosteriorError("the draws have a singular covariance")

    region = EllipticalRegion(center, shape, 0.0, 1.0 - alpha)
    distances = region.mahalanobis(matrix)
    threshold = empirical_quantile(distances, 1.0 - alpha)
    return EllipticalRegion(center, shape, threshold, 1.0 - alpha)


def hpd_density_region(draws: PosteriorDraws, alpha, spec=None) -> DensityLevelRegion:
    """Return the draws whose log posterior reaches the alpha quantile of log_post.

    With alpha = 0 the cut is the smallest log_post and every draw is kept.
    """
    alpha = _check_alpha(alpha, allow_zero=True)
    if draws.log_post is None or draws.log_post.shape[0] != draws.n_draws:
        raise ContractViolation("hpd_density_region() needs per-draw log_post")
    values = np.sort(draws.log_post)
    log_cut = float(values[0] if alpha == 0.0 else values[_order_index(alpha, values.shape[0])])
    return DensityLevelRegion(draws, log_cut, 1.0 - alpha, spec)


def uniform_band(curve_draws, alpha, grid=None) -> UniformBand:
    """Return the constant-radius band around the pointwise mean curve.

    The radius is the (1 - alpha) empirical quantile over draws of
    sup_grid |curve - center|.
    """
    alpha = _check_alpha(alpha)
    curves = np.atleast_2d(np.asarray(curve_draws, dtype=float))
    if curves.shape[1] < 2:
        raise ContractViolation("uniform_band() needs at least two grid points")
    center = curves.mean(axis=0)
    sup_dev = np.max(np.abs(curves - center), axis=1)
    radius = empirical_quantile(sup_dev, 1.0 - alpha)
    if grid is None:
        grid = np.arange(curves.shape[1], dtype=float)
    return UniformBand(grid, center, radius, 1.0 - alpha)


def contains(region: CredibleRegion, point) -> bool:
    """Return True if the region holds the point (a theta, a scalar, or a curve)."""
    return region.contains(point)


def region_from_json(node: Dict) -> CredibleRegion:
    """Rebuild an interval, ellipse or band from its JSON description."""
    kind = node["kind"]
    if kind == REGION_KIND.Interval:
        return Interval(node["lo"], node["hi"], node["level"], node.get("feature"))
    if kind == REGION_KIND.Ellipse:
        return EllipticalRegion(
            node["center"], node["shape"], node["threshold"], node["level"]
        )
    if kind == REGION_KIND.Band:
        return UniformBand(
            node["grid"], node["center_curve"], node["radius"], node["level"]
        )
    raise ContractViolation(f"region kind='{kind}' cannot be rebuilt from JSON")
