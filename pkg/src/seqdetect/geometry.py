"""Information geometry of the coupled parameter space.

The coupled space restricts a K-stream parameter vector to share a single
signal value across signal streams and a single noise value across noise
streams.  For a vector theta with signal set A(theta), the constants

    i0 = min over subsets B with B \\ A(theta) nonempty of KL(theta, space_B)
    i1 = min over subsets B with A(theta) \\ B nonempty of KL(theta, space_B)

measure the cheapest way a wrong signal-set assignment B can explain data
generated under theta; space_B is the slice of the coupled space whose
signal set is exactly B.  The per-stream relaxations i0_tilde and i1_tilde
drop the coupling and bound i0 and i1 from below.  Expected sample sizes of
valid sequential procedures are bounded below through the function phi.

Empty minimization families produce +inf, which propagates through max and
min and turns the corresponding bound term into zero.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

from .errors import CapacityError, DomainError
from .models import Family, JointParameter, Region, StreamModel, kl

MAX_STREAMS = 16

# Slack for floating-point noise when validating i0 >= i0_tilde; grid-based
# constructions can violate the exact inequality by the grid error.
_TILDE_SLACK = 1e-6


@dataclass(frozen=True)
class InfoConstants:
    """Coupled and per-stream information constants for one truth vector."""

    i0: float
    i1: float
    i0_tilde: float
    i1_tilde: float

    def __post_init__(self):
        for name in ("i0", "i1", "i0_tilde", "i1_tilde"):
            v = getattr(self, name)
            if math.isnan(v) or v <= 0.0:
                raise DomainError(f"{name} must be positive (or +inf), got {v!r}")
        if self.i0 < self.i0_tilde - _TILDE_SLACK:
            raise DomainError("i0 cannot be smaller than its per-stream relaxation")
        if self.i1 < self.i1_tilde - _TILDE_SLACK:
            raise DomainError("i1 cannot be smaller than its per-stream relaxation")


def phi(x: float, y: float) -> float:
    """x*log(x/(1-y)) + (1-x)*log((1-x)/y) for x, y in (0,1) with x+y < 1.

    Decreasing in both arguments; behaves like |log y| as x, y -> 0.
    """
    if not (0.0 < x < 1.0 and 0.0 < y < 1.0):
        raise DomainError("phi requires x, y in (0, 1)")
    if not x + y < 1.0:
        raise DomainError("phi requires x + y < 1")
    return x * math.log(x / (1.0 - y)) + (1.0 - x) * math.log((1.0 - x) / y)


def kl_to_region(model: StreamModel, theta: float, region: Region) -> float:
    """Smallest KL divergence from f_theta to the family over one region.

    The divergence is decreasing then increasing along the parameter axis,
    so the infimum over a closed interval is attained at the clipped point.
    Zero when theta already lies in the region.
    """
    if region is Region.FULL:
        raise DomainError("kl_to_region expects the noise or signal region")
    if not model.space.contains(theta):
        raise DomainError(f"theta={theta!r} outside the parameter set")
    lo, hi = model.space.region_bounds(region)
    t = min(max(theta, lo), hi)
    return kl(model, theta, t)


def _golden_min(f, lo: float, hi: float, tol: float = 1e-10) -> float:
    """Minimum value of a unimodal f over [lo, hi] by golden-section search."""
    invphi = 0.6180339887498949
    a, b = lo, hi
    if b - a <= tol:
        return f(0.5 * (a + b))
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return min(fc, fd, f(0.5 * (a + b)))


def _group_inf(model: StreamModel, values: list[float], region: Region) -> float:
    """inf over u in the region of sum_k KL(theta_k, u) for one shared u."""
    if not values:
        return 0.0
    lo, hi = model.space.region_bounds(region)
    if model.family is Family.GAUSSIAN:
        u = sum(values) / len(values)
        u = min(max(u, lo), hi)
        return sum(kl(model, t, u) for t in values)
    return _golden_min(lambda u: sum(kl(model, t, u) for t in values), lo, hi)


def assignment_kl(model: StreamModel, theta: JointParameter, b: Iterable[int]) -> float:
    """KL(theta, space_B): cost of explaining theta with signal set B.

    Decouples into two scalar minimizations, one for the shared signal value
    over the streams in B and one for the shared noise value over the rest.
    The Gaussian minimizer is the group mean projected onto the region;
    other families use golden-section search (tolerance 1e-10).
    """
    theta.require_constrained(model.space)
    members = frozenset(b)
    if not members.issubset(range(theta.k)):
        raise DomainError("subset contains an out-of-range stream index")
    sig_vals = [theta.thetas[i] for i in sorted(members)]
    noise_vals = [theta.thetas[i] for i in range(theta.k) if i not in members]
    return _group_inf(model, sig_vals, Region.SIGNAL) + _group_inf(
        model, noise_vals, Region.NOISE
    )


def info_constants(model: StreamModel, theta: JointParameter) -> InfoConstants:
    """Compute (i0, i1, i0_tilde, i1_tilde) by subset enumeration.

    Enumerates all 2^K signal-set assignments, so K is capped at
    MAX_STREAMS.  i0 is +inf exactly when every stream is a signal stream,
    i1 is +inf exactly when none is.
    """
    k = theta.k
    if k > MAX_STREAMS:
        raise CapacityError(f"subset enumeration supports at most {MAX_STREAMS} streams")
    theta.require_constrained(model.space)
    a_set = theta.signal_set(model.space)
    a_mask = 0
    for i in a_set:
        a_mask |= 1 << i

    i0 = math.inf
    i1 = math.inf
    for mask in range(1 << k):
        in_b0 = bool(mask & ~a_mask)   # B \ A nonempty
        in_b1 = bool(a_mask & ~mask)   # A \ B nonempty
        if not (in_b0 or in_b1):
            continue
        members = [i for i in range(k) if mask >> i & 1]
        v = assignment_kl(model, theta, members)
        if in_b0 and v < i0:
            i0 = v
        if in_b1 and v < i1:
            i1 = v

    i0_tilde = math.inf
    i1_tilde = math.inf
    for i in range(k):
        if i in a_set:
            i1_tilde = min(i1_tilde, kl_to_region(model, theta.thetas[i], Region.NOISE))
        else:
            i0_tilde = min(i0_tilde, kl_to_region(model, theta.thetas[i], Region.SIGNAL))
    return InfoConstants(i0=i0, i1=i1, i0_tilde=i0_tilde, i1_tilde=i1_tilde)


def lower_bound(constants: InfoConstants, alpha: float, beta: float) -> float:
    """Lower bound on the expected sample size of any valid procedure.

    Valid means familywise error rates at most alpha (false alarm) and beta
    (missed detection).  Requires alpha + beta < 1/2.  A +inf constant makes
    its term vanish.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise DomainError("alpha and beta must lie in (0, 1)")
    if not alpha + beta < 0.5:
        raise DomainError("lower bound requires alpha + beta < 1/2")
    t0 = phi(alpha + beta, beta) / constants.i0
    t1 = phi(alpha + beta, alpha) / constants.i1
    return max(t0, t1)


def asymptotic_approximation(constants: InfoConstants, alpha: float, beta: float) -> float:
    """First-order expected-sample-size approximation max(|log beta|/i0, |log alpha|/i1)."""
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise DomainError("alpha and beta must lie in (0, 1)")
    return max(-math.log(beta) / constants.i0, -math.log(alpha) / constants.i1)
