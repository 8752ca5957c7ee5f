"""Observation families over a partitioned parameter set.

Each stream draws i.i.d. observations from a one-parameter family f_theta.
The parameter set Theta is the union of two disjoint closed intervals: a
noise region Theta0 and a signal region Theta1, with Theta0 entirely to the
left of Theta1.  A stream is a signal stream when its parameter falls in
Theta1 and a noise stream otherwise.

Likelihood computations are carried out in log space throughout.  For each
family the pair (n, s) of observation count and running sum is sufficient
for the parameter, so restricted maximum-likelihood values reduce to closed
forms in the sample mean projected onto the relevant region.

For the Gaussian family the observation-level term sum(x_t^2)/2 is not
recoverable from (n, s); :func:`stat_loglik` therefore returns the
log-likelihood with the base-measure sum omitted, and :func:`sup_loglik`
anchors that unrecoverable term at the sample mean.  Differences between
regions for the same statistic are unaffected by the convention.  Bernoulli
log-likelihoods are exact functions of (n, s).
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import ConfigError, DomainError

__all__ = [
    "Family",
    "Region",
    "ParameterSpace",
    "StreamModel",
    "SufficientStat",
    "JointParameter",
    "log_density",
    "log_base_measure",
    "kl",
    "stat_loglik",
    "sup_stat_loglik",
    "region_mle",
    "mle_unrestricted",
    "sup_loglik",
    "sample",
]

LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


class Family(Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"


class Region(Enum):
    NOISE = "noise"
    SIGNAL = "signal"
    FULL = "full"


@dataclass(frozen=True)
class ParameterSpace:
    """Union of a closed noise interval and a closed signal interval.

    The interior boundaries theta0_hi < theta1_lo must be finite; the outer
    boundaries may be infinite (Gaussian indifference zones use
    (-inf, -delta] and [delta, +inf)).
    """

    theta0_lo: float
    theta0_hi: float
    theta1_lo: float
    theta1_hi: float

    def __post_init__(self):
        vals = (self.theta0_lo, self.theta0_hi, self.theta1_lo, self.theta1_hi)
        if any(math.isnan(v) for v in vals):
            raise ConfigError("parameter space bounds must not be NaN")
        if not (math.isfinite(self.theta0_hi) and math.isfinite(self.theta1_lo)):
            raise ConfigError("interior region boundaries must be finite")
        if not self.theta0_lo <= self.theta0_hi:
            raise ConfigError("empty noise region")
        if not self.theta1_lo <= self.theta1_hi:
            raise ConfigError("empty signal region")
        if not self.theta0_hi < self.theta1_lo:
            raise ConfigError("noise region must lie strictly below signal region")

    @classmethod
    def gaussian_indifference(cls, delta: float) -> "ParameterSpace":
        """Symmetric unbounded space (-inf, -delta] | [delta, +inf)."""
        if not (math.isfinite(delta) and delta > 0.0):
            raise ConfigError("delta must be finite and positive")
        return cls(-math.inf, -delta, delta, math.inf)

    def region_bounds(self, region: Region) -> tuple[float, float]:
        if region is Region.NOISE:
            return self.theta0_lo, self.theta0_hi
        if region is Region.SIGNAL:
            return self.theta1_lo, self.theta1_hi
        raise DomainError("FULL is not a single interval; handle regions separately")

    def in_noise(self, theta: float) -> bool:
        return self.theta0_lo <= theta <= self.theta0_hi

    def in_signal(self, theta: float) -> bool:
        return self.theta1_lo <= theta <= self.theta1_hi

    def contains(self, theta: float) -> bool:
        return self.in_noise(theta) or self.in_signal(theta)


@dataclass(frozen=True)
class StreamModel:
    """One observation family together with its partitioned parameter set."""

    family: Family
    space: ParameterSpace

    def __post_init__(self):
        if self.family is Family.BERNOULLI:
            sp = self.space
            if not (0.0 < sp.theta0_lo and sp.theta1_hi < 1.0):
                raise ConfigError(
                    "Bernoulli regions must be closed subintervals of (0, 1)"
                )


@dataclass(slots=True)
class SufficientStat:
    """Observation count and running sum for one stream."""

    n: int = 0
    s: float = 0.0

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("observation count must be non-negative")
        if self.n == 0 and self.s != 0.0:
            raise DomainError("empty statistic must have zero sum")

    def add(self, x: float) -> None:
        self.n += 1
        self.s += x

    @property
    def mean(self) -> float:
        if self.n == 0:
            raise DomainError("sample mean undefined for an empty statistic")
        return self.s / self.n

    def copy(self) -> "SufficientStat":
        return SufficientStat(self.n, self.s)


@dataclass(frozen=True)
class JointParameter:
    """Parameter vector across the K streams."""

    thetas: tuple[float, ...]

    def __post_init__(self):
        if len(self.thetas) == 0:
            raise ConfigError("at least one stream required")
        if any(not math.isfinite(t) for t in self.thetas):
            raise ConfigError("stream parameters must be finite")

    @classmethod
    def coupled(
        cls,
        k: int,
        signal_set: Sequence[int],
        theta1: float | None,
        theta0: float | None,
    ) -> "JointParameter":
        """Build a vector with one shared signal value and one shared noise value.

        Streams listed in ``signal_set`` (0-based) receive ``theta1``, the rest
        ``theta0``.  The value for an empty group may be None.
        """
        members = frozenset(signal_set)
        if not members.issubset(range(k)):
            raise ConfigError("signal set contains an out-of-range stream index")
        thetas = []
        for i in range(k):
            v = theta1 if i in members else theta0
            if v is None:
                raise ConfigError("missing parameter value for a non-empty group")
            thetas.append(float(v))
        return cls(tuple(thetas))

    @property
    def k(self) -> int:
        return len(self.thetas)

    def signal_set(self, space: ParameterSpace) -> frozenset[int]:
        """Indices of streams whose parameter lies in the signal region."""
        out = []
        for i, t in enumerate(self.thetas):
            if space.in_signal(t):
                out.append(i)
            elif not space.in_noise(t):
                raise DomainError(f"stream {i} parameter {t} outside the parameter set")
        return frozenset(out)

    def is_constrained(self, space: ParameterSpace) -> bool:
        """True when all signal coordinates are equal and all noise coordinates are equal."""
        sig = self.signal_set(space)
        sig_vals = {self.thetas[i] for i in sig}
        noise_vals = {self.thetas[i] for i in range(self.k) if i not in sig}
        return len(sig_vals) <= 1 and len(noise_vals) <= 1

    def require_constrained(self, space: ParameterSpace) -> None:
        if not self.is_constrained(space):
            raise ConfigError("joint parameter is not in the coupled space")


def _require_in_space(model: StreamModel, theta: float, what: str = "theta") -> None:
    if not model.space.contains(theta):
        raise DomainError(f"{what}={theta!r} outside the parameter set")


def log_density(model: StreamModel, theta: float, x: float) -> float:
    """Log density of a single observation.

    Gaussian: unit-variance normal with mean theta.  Bernoulli: success
    probability theta, observation in {0, 1}.  theta must lie in the
    parameter set.
    """
    _require_in_space(model, theta)
    if model.family is Family.GAUSSIAN:
        d = x - theta
        return -0.5 * d * d - LOG_SQRT_2PI
    if x == 1.0:
        return math.log(theta)
    if x == 0.0:
        return math.log1p(-theta)
    raise DomainError(f"Bernoulli observation must be 0 or 1, got {x!r}")


def log_base_measure(model: StreamModel, x: float) -> float:
    """Parameter-free part of the log density.

    For the Gaussian family this is -x^2/2 - log(sqrt(2*pi)); for Bernoulli
    it is 0.  Summing these over observations converts statistic-level
    log-likelihoods (:func:`stat_loglik`) into observation-level ones.
    """
    if model.family is Family.GAUSSIAN:
        return -0.5 * x * x - LOG_SQRT_2PI
    if x not in (0.0, 1.0):
        raise DomainError(f"Bernoulli observation must be 0 or 1, got {x!r}")
    return 0.0


def kl(model: StreamModel, theta: float, theta_p: float) -> float:
    """Kullback-Leibler divergence between f_theta and f_theta_p.

    Both arguments must lie in the parameter set.  Gaussian:
    (theta - theta_p)^2 / 2.  Bernoulli:
    theta*log(theta/theta_p) + (1-theta)*log((1-theta)/(1-theta_p)).
    """
    _require_in_space(model, theta)
    _require_in_space(model, theta_p, "theta_p")
    if model.family is Family.GAUSSIAN:
        d = theta - theta_p
        return 0.5 * d * d
    return theta * (math.log(theta) - math.log(theta_p)) + (1.0 - theta) * (
        math.log1p(-theta) - math.log1p(-theta_p)
    )


def stat_loglik(model: StreamModel, stat: SufficientStat, theta: float) -> float:
    """Log-likelihood of a sufficient statistic at theta.

    Exact for Bernoulli.  For the Gaussian family the observation-level
    base-measure sum is omitted (see the module docstring); add the
    accumulated :func:`log_base_measure` values to recover the full
    log-likelihood.
    """
    _require_in_space(model, theta)
    if model.family is Family.GAUSSIAN:
        return theta * stat.s - 0.5 * stat.n * theta * theta
    return stat.s * math.log(theta) + (stat.n - stat.s) * math.log1p(-theta)


def _clip(x: float, lo: float, hi: float) -> float:
    if x < lo:
        return lo
    if x > hi:
        return hi
    return x


def sup_stat_loglik(model: StreamModel, n: int, s: float, region: Region) -> float:
    """Supremum of :func:`stat_loglik` over a region, in closed form.

    Takes raw pooled counts so callers can combine several streams without
    building intermediate objects.  The maximizer is the sample mean s/n
    projected onto the region; an empty statistic contributes 0.
    """
    if n == 0:
        return 0.0
    mean = s / n
    sp = model.space
    if region is Region.FULL:
        return max(
            sup_stat_loglik(model, n, s, Region.NOISE),
            sup_stat_loglik(model, n, s, Region.SIGNAL),
        )
    lo, hi = sp.region_bounds(region)
    t = _clip(mean, lo, hi)
    if model.family is Family.GAUSSIAN:
        return t * s - 0.5 * n * t * t
    return s * math.log(t) + (n - s) * math.log1p(-t)


def region_mle(model: StreamModel, stat: SufficientStat, region: Region) -> float:
    """Maximum-likelihood parameter restricted to a region.

    For a single interval this is the sample mean clipped into the interval.
    Over the full two-interval set, the better of the two clipped candidates
    is returned; exact ties resolve to the signal side.
    """
    if stat.n == 0:
        raise DomainError("MLE undefined for an empty statistic")
    mean = stat.mean
    sp = model.space
    if region is not Region.FULL:
        lo, hi = sp.region_bounds(region)
        return _clip(mean, lo, hi)
    cand0 = _clip(mean, sp.theta0_lo, sp.theta0_hi)
    cand1 = _clip(mean, sp.theta1_lo, sp.theta1_hi)
    # Compare restricted maxima; >= sends gap ties to the signal boundary.
    if stat_loglik(model, stat, cand1) >= stat_loglik(model, stat, cand0):
        return cand1
    return cand0


def mle_unrestricted(model: StreamModel, stat: SufficientStat) -> float:
    """Maximum-likelihood parameter over the whole parameter set."""
    return region_mle(model, stat, Region.FULL)


def sup_loglik(model: StreamModel, stat: SufficientStat, region: Region) -> float:
    """Supremum over a region of the log-likelihood reconstructed from ``stat``.

    The Gaussian reconstruction anchors the base-measure term at the sample
    mean, giving -(n/2)*(mean - t)^2 - n*log(sqrt(2*pi)) at the projected
    parameter t; the Bernoulli value is exact.  An empty statistic yields 0
    for every region.
    """
    if stat.n == 0:
        return 0.0
    q = sup_stat_loglik(model, stat.n, stat.s, region)
    if model.family is Family.GAUSSIAN:
        return q - 0.5 * stat.s * stat.mean - stat.n * LOG_SQRT_2PI
    return q


def sample(model: StreamModel, theta: float, rng) -> float:
    """Draw one observation from f_theta using ``rng`` (a random.Random)."""
    _require_in_space(model, theta)
    if model.family is Family.GAUSSIAN:
        return rng.gauss(theta, 1.0)
    return 1.0 if rng.random() < theta else 0.0
