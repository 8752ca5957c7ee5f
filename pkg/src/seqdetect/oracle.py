"""Brute-force reference implementations for cross-checking.

Everything here is deliberately slow and simple: restricted likelihood
suprema and information constants are found by scanning dense parameter
grids instead of using the closed-form projections, and the martingale and
law-of-large-numbers properties of the adaptive likelihood are estimated by
plain Monte Carlo.  The test suite and the ``validate`` command compare the
fast implementations against these references.

Grid scans are valid only while the relevant sample means stay inside the
grid box; :func:`grid_sup_loglik` checks that at call time.  Grid maxima of
a smooth function are exact at included region endpoints and otherwise off
by at most curvature * step^2 / 8 per pooled observation.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import engine as _engine
from .errors import DomainError
from .geometry import InfoConstants
from .models import (
    Family,
    JointParameter,
    Region,
    StreamModel,
    SufficientStat,
    log_density,
    sample,
)

_NEG_INF = float("-inf")


@dataclass(frozen=True)
class Grid:
    """Uniform scan grid on [lo, hi] with a fixed number of points."""

    lo: float = -5.0
    hi: float = 5.0
    points: int = 10_000

    def __post_init__(self):
        if not (math.isfinite(self.lo) and math.isfinite(self.hi) and self.lo < self.hi):
            raise DomainError("grid needs finite lo < hi")
        if self.points < 2:
            raise DomainError("grid needs at least two points")

    @property
    def step(self) -> float:
        return (self.hi - self.lo) / (self.points - 1)

    def axis(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.points)

    def region_points(self, model: StreamModel, region: Region) -> np.ndarray:
        """Grid points inside one region, with the clipped region endpoints
        appended so boundary optima are hit exactly."""
        if region is Region.FULL:
            return np.unique(
                np.concatenate(
                    [
                        self.region_points(model, Region.NOISE),
                        self.region_points(model, Region.SIGNAL),
                    ]
                )
            )
        rlo, rhi = model.space.region_bounds(region)
        lo = max(self.lo, rlo)
        hi = min(self.hi, rhi)
        if lo > hi:
            return np.empty(0)
        ax = self.axis()
        pts = ax[(ax >= lo) & (ax <= hi)]
        return np.unique(np.concatenate([pts, [lo, hi]]))


def _stat_loglik_curve(model: StreamModel, n: int, s: float, pts: np.ndarray) -> np.ndarray:
    """Statistic-level log-likelihood along a parameter grid (vectorized,
    written out independently of the closed-form module)."""
    if model.family is Family.GAUSSIAN:
        return pts * s - 0.5 * n * pts * pts
    return s * np.log(pts) + (n - s) * np.log1p(-pts)


def _kl_curve(model: StreamModel, theta: float, pts: np.ndarray) -> np.ndarray:
    if model.family is Family.GAUSSIAN:
        return 0.5 * (theta - pts) ** 2
    return theta * (math.log(theta) - np.log(pts)) + (1.0 - theta) * (
        math.log1p(-theta) - np.log1p(-pts)
    )


def _group_max(curves: list[np.ndarray], members: list[int], pts: np.ndarray) -> float:
    """max over the grid of the summed curves; empty groups cost nothing."""
    if not members:
        return 0.0
    if pts.size == 0:
        return _NEG_INF
    total = curves[members[0]]
    for i in members[1:]:
        total = total + curves[i]
    return float(total.max())


def grid_sup_loglik(
    model: StreamModel,
    stats: Sequence[SufficientStat],
    signal_estimate: frozenset,
    kind: "_engine.TestKind",
    grid: Grid,
    data_loglik: float = 0.0,
) -> tuple[float, float]:
    """Grid version of the engine's error-set suprema.

    Scans every signal-set assignment and every grid value of the shared
    parameters (the two shared values enter separate sums, so the 2-D scan
    reduces to two 1-D scans per assignment).  ``data_loglik`` is the
    accumulated base-measure term that converts statistic-level values to
    the observation-level convention; pass the engine state's value when
    comparing against it.
    """
    k = len(stats)
    for i, st in enumerate(stats):
        if st.n > 0 and not (grid.lo <= st.s / st.n <= grid.hi):
            raise DomainError(
                f"stream {i} sample mean {st.s / st.n!r} outside the grid box"
            )
    sig_pts = grid.region_points(model, Region.SIGNAL)
    noise_pts = grid.region_points(model, Region.NOISE)
    sig_curves = [_stat_loglik_curve(model, st.n, st.s, sig_pts) for st in stats]
    noise_curves = [_stat_loglik_curve(model, st.n, st.s, noise_pts) for st in stats]

    if kind is _engine.TestKind.UNCONSTRAINED:
        sig_max = [float(c.max()) if c.size else _NEG_INF for c in sig_curves]
        noise_max = [float(c.max()) if c.size else _NEG_INF for c in noise_curves]
        full_max = [max(a, b) for a, b in zip(sig_max, noise_max)]
        total = sum(full_max)
        l0 = _NEG_INF
        l1 = _NEG_INF
        for i in range(k):
            if i in signal_estimate:
                l1 = max(l1, total - full_max[i] + noise_max[i])
            else:
                l0 = max(l0, total - full_max[i] + sig_max[i])
        l0 = l0 + data_loglik if l0 > _NEG_INF else l0
        l1 = l1 + data_loglik if l1 > _NEG_INF else l1
        return l0, l1

    a_mask = 0
    for i in signal_estimate:
        a_mask |= 1 << i
    l0 = _NEG_INF
    l1 = _NEG_INF
    for mask in range(1 << k):
        cand0 = bool(mask & ~a_mask)
        cand1 = bool(a_mask & ~mask)
        if not (cand0 or cand1):
            continue
        members = [i for i in range(k) if mask >> i & 1]
        rest = [i for i in range(k) if not mask >> i & 1]
        val = _group_max(sig_curves, members, sig_pts) + _group_max(
            noise_curves, rest, noise_pts
        )
        if cand0 and val > l0:
            l0 = val
        if cand1 and val > l1:
            l1 = val
    l0 = l0 + data_loglik if l0 > _NEG_INF else l0
    l1 = l1 + data_loglik if l1 > _NEG_INF else l1
    return l0, l1


def grid_info_constants(model: StreamModel, theta: JointParameter, grid: Grid) -> InfoConstants:
    """Grid version of the information constants."""
    theta.require_constrained(model.space)
    for i, t in enumerate(theta.thetas):
        if not (grid.lo <= t <= grid.hi):
            raise DomainError(f"stream {i} parameter {t!r} outside the grid box")
    k = theta.k
    a_set = theta.signal_set(model.space)
    a_mask = 0
    for i in a_set:
        a_mask |= 1 << i
    sig_pts = grid.region_points(model, Region.SIGNAL)
    noise_pts = grid.region_points(model, Region.NOISE)
    sig_kl = [_kl_curve(model, t, sig_pts) for t in theta.thetas]
    noise_kl = [_kl_curve(model, t, noise_pts) for t in theta.thetas]

    def group_min(curves, members, pts):
        if not members:
            return 0.0
        if pts.size == 0:
            return math.inf
        total = curves[members[0]]
        for i in members[1:]:
            total = total + curves[i]
        return float(total.min())

    i0 = math.inf
    i1 = math.inf
    for mask in range(1 << k):
        cand0 = bool(mask & ~a_mask)
        cand1 = bool(a_mask & ~mask)
        if not (cand0 or cand1):
            continue
        members = [i for i in range(k) if mask >> i & 1]
        rest = [i for i in range(k) if not mask >> i & 1]
        v = group_min(sig_kl, members, sig_pts) + group_min(noise_kl, rest, noise_pts)
        if cand0 and v < i0:
            i0 = v
        if cand1 and v < i1:
            i1 = v

    i0_tilde = math.inf
    i1_tilde = math.inf
    for i in range(k):
        if i in a_set:
            i1_tilde = min(i1_tilde, float(noise_kl[i].min()) if noise_pts.size else math.inf)
        else:
            i0_tilde = min(i0_tilde, float(sig_kl[i].min()) if sig_pts.size else math.inf)
    return InfoConstants(i0=i0, i1=i1, i0_tilde=i0_tilde, i1_tilde=i1_tilde)


def mean_one_martingale_estimate(
    model: StreamModel,
    theta: JointParameter,
    n: int,
    trials: int,
    rng: random.Random,
) -> tuple[float, float]:
    """Monte Carlo mean and standard error of the adaptive likelihood ratio.

    Simulates the engine under ``theta`` for ``n`` steps and averages
    exp(adaptive_loglik - true_loglik), whose expectation is exactly 1 at
    every n.  Requires a coupled truth and at least 10^4 trials; n = 0
    returns (1.0, 0.0) since both log-likelihoods are empty sums.
    """
    theta.require_constrained(model.space)
    if n < 0:
        raise DomainError("n must be non-negative")
    if trials < 10_000:
        raise DomainError("martingale estimate needs at least 10^4 trials")
    if n == 0:
        return 1.0, 0.0
    k = theta.k
    models = (model,) * k
    thetas = theta.thetas
    ratios = np.empty(trials)
    for t in range(trials):
        state = _engine.init(models)
        true_ll = 0.0
        for _ in range(n):
            obs = [sample(model, thetas[i], rng) for i in range(k)]
            for i in range(k):
                true_ll += log_density(model, thetas[i], obs[i])
            _engine.update(state, obs)
        ratios[t] = math.exp(state.adaptive_loglik - true_ll)
    mean = float(ratios.mean())
    se = float(ratios.std(ddof=1) / math.sqrt(trials))
    return mean, se


def lln_rate_estimate(
    model: StreamModel,
    theta: JointParameter,
    n: int,
    trials: int,
    kind: "_engine.TestKind",
    rng: random.Random,
) -> tuple[float, float]:
    """Monte Carlo means of the normalized stopping statistics at time n.

    Returns the averages of (adaptive_loglik - logL0)/n and
    (adaptive_loglik - logL1)/n, which converge to the information constants
    governing the chosen kind.  Requires a coupled truth and n >= 500 so the
    normalized statistics are near their limits.
    """
    theta.require_constrained(model.space)
    if n < 500:
        raise DomainError("rate estimate needs n >= 500")
    if trials < 1:
        raise DomainError("at least one trial required")
    k = theta.k
    models = (model,) * k
    thetas = theta.thetas
    acc0 = 0.0
    acc1 = 0.0
    for _ in range(trials):
        state = _engine.init(models)
        for _ in range(n):
            obs = [sample(model, thetas[i], rng) for i in range(k)]
            _engine.update(state, obs)
        l0, l1 = _engine.sup_loglik_error_sets(state, kind)
        acc0 += (state.adaptive_loglik - l0) / n
        acc1 += (state.adaptive_loglik - l1) / n
    return acc0 / trials, acc1 / trials
