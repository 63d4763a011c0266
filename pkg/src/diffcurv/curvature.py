"""Pointwise and region curvature from random-walk laziness.

The curvature of a point is the average t-step transition probability into
the ball of points within diffusion distance r of it: walks started in
positively curved regions stay closer to home, so their averaged return
mass is larger.  Values live in [0, 1/|ball|] and are relative, not
calibrated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import stats

from .errors import DegenerateVariance, EmptyRegion, InvalidConfig
from .geometry import (
    DiffusionOperator,
    pairwise_diffusion_distances,
    power_operator,
)

DEFAULT_T = 8
DEFAULT_QUANTILE = 0.1


@dataclass(frozen=True)
class RadiusQuantile:
    """Per-point radius: the q-quantile of that point's diffusion distances."""

    q: float = DEFAULT_QUANTILE

    def __post_init__(self):
        if not 0.0 <= self.q <= 1.0:
            raise InvalidConfig(f"quantile must be in [0, 1], got {self.q}")


@dataclass(frozen=True)
class RadiusFixed:
    """One global ball radius in diffusion-distance units."""

    r: float

    def __post_init__(self):
        if self.r < 0:
            raise InvalidConfig(f"radius must be >= 0, got {self.r}")


RadiusRule = Union[RadiusQuantile, RadiusFixed]


@dataclass(frozen=True)
class DiffusionBall:
    center: int
    radius: float
    members: np.ndarray  # sorted point indices, center included

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        members.flags.writeable = False
        object.__setattr__(self, "members", members)
        if self.center not in members:
            raise InvalidConfig("ball must contain its own center")

    @property
    def size(self) -> int:
        return self.members.shape[0]


@dataclass(frozen=True)
class CurvatureField:
    """Per-point curvature values with the parameters that produced them."""

    values: np.ndarray
    t: int
    radius_rule: RadiusRule
    ball_sizes: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        sizes = np.asarray(self.ball_sizes, dtype=np.int64)
        if values.shape != sizes.shape:
            raise InvalidConfig("values and ball_sizes must have equal length")
        if sizes.min() < 1:
            raise InvalidConfig("every ball must contain at least its center")
        values.flags.writeable = False
        sizes.flags.writeable = False
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "ball_sizes", sizes)

    @property
    def n_points(self) -> int:
        return self.values.shape[0]


def _resolve_radii(distances: np.ndarray, rule: RadiusRule) -> np.ndarray:
    """Per-point ball radii; quantiles are taken over distances to *other* points."""
    n = distances.shape[0]
    if isinstance(rule, RadiusFixed):
        return np.full(n, rule.r)
    off_diag = distances[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return np.quantile(off_diag, rule.q, axis=1)


def diffusion_ball(op: DiffusionOperator, t: int, center: int, r: float) -> DiffusionBall:
    """Points within diffusion distance r of the center at time t."""
    n = op.n_points
    if not 0 <= center < n:
        raise InvalidConfig(f"center {center} out of range for N = {n}")
    if r < 0:
        raise InvalidConfig(f"radius must be >= 0, got {r}")
    pt = power_operator(op, t).p
    diff = pt - pt[center][None, :]
    dists = np.sqrt((diff * diff / op.stationary[None, :]).sum(axis=1))
    members = np.flatnonzero(dists <= r)
    return DiffusionBall(center=center, radius=float(r), members=members)


def pointwise_curvature(
    op: DiffusionOperator, t: int = DEFAULT_T, radius_rule: RadiusRule | None = None
) -> CurvatureField:
    """Average t-step transition mass into each point's diffusion ball.

    values[i] = sum_{y in B(x_i, r_i)} P^t[i, y] / |B(x_i, r_i)|.
    """
    if t < 1:
        raise InvalidConfig(f"t must be >= 1, got {t}")
    if radius_rule is None:
        radius_rule = RadiusQuantile()
    pt = power_operator(op, t).p
    distances = pairwise_diffusion_distances(op, t)
    radii = _resolve_radii(distances, radius_rule)
    member_mask = distances <= radii[:, None]
    sizes = member_mask.sum(axis=1)
    values = np.where(member_mask, pt, 0.0).sum(axis=1) / sizes
    return CurvatureField(values=values, t=t, radius_rule=radius_rule, ball_sizes=sizes)


def region_curvature(
    op: DiffusionOperator,
    t: int,
    region,
    radius_rule: RadiusRule | None = None,
) -> float:
    """Curvature of a set of points diffused together.

    The region indicator is normalized to total mass 1 (1/|U| per member),
    diffused t steps, and the arriving mass is averaged over the union of
    the members' diffusion balls.
    """
    if radius_rule is None:
        radius_rule = RadiusQuantile()
    region = np.asarray(sorted(set(int(i) for i in np.atleast_1d(region))), dtype=np.int64)
    if region.size == 0:
        raise EmptyRegion("region must contain at least one point")
    n = op.n_points
    if region.min() < 0 or region.max() >= n:
        raise InvalidConfig(f"region indices out of range for N = {n}")
    pt = power_operator(op, t).p
    distances = pairwise_diffusion_distances(op, t)
    radii = _resolve_radii(distances, radius_rule)
    union_mask = np.zeros(n, dtype=bool)
    for i in region:
        union_mask |= distances[i] <= radii[i]
    mu = np.zeros(n)
    mu[region] = 1.0 / region.size
    mass = mu @ pt
    return float(mass[union_mask].sum() / union_mask.sum())


def curvature_correlation(
    field: CurvatureField, reference: np.ndarray, interior_mask: np.ndarray
) -> dict[str, float]:
    """Pearson and Spearman correlation against a reference curvature vector."""
    reference = np.asarray(reference, dtype=np.float64)
    interior_mask = np.asarray(interior_mask, dtype=bool)
    if reference.shape != (field.n_points,) or interior_mask.shape != (field.n_points,):
        raise InvalidConfig("reference and mask must match the field length")
    if interior_mask.sum() < 10:
        raise InvalidConfig("interior mask must select at least 10 points")
    a = field.values[interior_mask]
    b = reference[interior_mask]
    if np.ptp(a) == 0 or np.ptp(b) == 0:
        raise DegenerateVariance("correlation undefined for a constant vector")
    pearson = stats.pearsonr(a, b).statistic
    spearman = stats.spearmanr(a, b).statistic
    return {"pearson": float(pearson), "spearman": float(spearman)}
