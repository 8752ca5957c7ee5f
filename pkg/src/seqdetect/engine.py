"""Adaptive sequential test over K parallel streams.

The procedure tracks, per stream, the sufficient statistic and the lagged
maximum-likelihood estimate, and accumulates an adaptive log-likelihood in
which observation n is scored against the estimate formed from the first
n - 1 observations.  That one-step lag makes the likelihood ratio of the
adaptive process to the truth a mean-one martingale, which is what gives
the stopping rule its familywise error guarantees.

At each time the current signal-set estimate splits the alternatives into
two error families: assignments that add a stream (false alarms) and
assignments that drop one (missed detections).  The test stops when the
adaptive log-likelihood beats the best achievable log-likelihood of both
families by the configured margins.  The constrained variant restricts the
alternatives to the coupled space (one shared signal value, one shared
noise value); the unconstrained variant lets every stream move freely and
serves as the baseline.

All suprema here are observation-level log-likelihoods: the statistic-based
closed forms are combined with the accumulated base-measure term so that
differences against ``adaptive_loglik`` are exact log-likelihood ratios.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .errors import CapacityError, ConfigError, DomainError
from .models import (
    JointParameter,
    Region,
    StreamModel,
    SufficientStat,
    log_base_measure,
    log_density,
    mle_unrestricted,
    sample,
    sup_stat_loglik,
)

MAX_STREAMS = 16

_NEG_INF = float("-inf")


class TestKind(Enum):
    CONSTRAINED = "constrained"
    UNCONSTRAINED = "unconstrained"


@dataclass(frozen=True)
class Thresholds:
    """Log-scale stopping margins: log_a guards false alarms at level
    exp(-log_a), log_b guards missed detections at exp(-log_b)."""

    log_a: float
    log_b: float

    def __post_init__(self):
        if not (math.isfinite(self.log_a) and math.isfinite(self.log_b)):
            raise DomainError("thresholds must be finite")


@dataclass(frozen=True)
class Decision:
    stopped_at: int
    selected: frozenset[int]
    truncated: bool


@dataclass(frozen=True)
class TrialResult:
    """Decision plus the terminal normalized stopping statistics."""

    decision: Decision
    norm_stat0: float
    norm_stat1: float


@dataclass
class EngineState:
    models: tuple[StreamModel, ...]
    stats: list[SufficientStat]
    lagged_mle: list[float]
    adaptive_loglik: float
    data_loglik: float
    n: int

    @property
    def k(self) -> int:
        return len(self.models)


def init(
    models: Sequence[StreamModel],
    init_mle: str | Sequence[float] = "signal-boundary",
) -> EngineState:
    """Fresh state at n = 0.

    All models must share one family and parameter space.  ``init_mle``
    seeds the lagged estimates before any data arrive: "signal-boundary"
    starts every stream at the lower signal endpoint, "noise-boundary" at
    the upper noise endpoint, or pass one value per stream.
    """
    models = tuple(models)
    if not models:
        raise ConfigError("at least one stream model required")
    if len({(m.family, m.space) for m in models}) != 1:
        raise ConfigError("streams must share one family and parameter space")
    sp = models[0].space
    k = len(models)
    if isinstance(init_mle, str):
        if init_mle == "signal-boundary":
            lagged = [sp.theta1_lo] * k
        elif init_mle == "noise-boundary":
            lagged = [sp.theta0_hi] * k
        else:
            raise ConfigError(f"unknown init policy {init_mle!r}")
    else:
        lagged = [float(v) for v in init_mle]
        if len(lagged) != k:
            raise ConfigError("per-stream init needs one value per stream")
        for v in lagged:
            if not sp.contains(v):
                raise ConfigError(f"init value {v!r} outside the parameter set")
    return EngineState(
        models=models,
        stats=[SufficientStat() for _ in range(k)],
        lagged_mle=lagged,
        adaptive_loglik=0.0,
        data_loglik=0.0,
        n=0,
    )


def update(state: EngineState, obs: Sequence[float]) -> EngineState:
    """Absorb one observation per stream (in place).

    The adaptive log-likelihood scores the new observations against the
    lagged estimates first; only then do the statistics absorb the data and
    the estimates refresh.  Ordering is what keeps the adaptive likelihood
    ratio a martingale.
    """
    k = state.k
    if len(obs) != k:
        raise DomainError(f"expected {k} observations, got {len(obs)}")
    adaptive = state.adaptive_loglik
    base = state.data_loglik
    for i in range(k):
        x = float(obs[i])
        model = state.models[i]
        adaptive += log_density(model, state.lagged_mle[i], x)
        base += log_base_measure(model, x)
        st = state.stats[i]
        st.add(x)
        state.lagged_mle[i] = mle_unrestricted(model, st)
    state.adaptive_loglik = adaptive
    state.data_loglik = base
    state.n += 1
    return state


def estimate_signal_set(state: EngineState) -> frozenset[int]:
    """Streams whose restricted signal likelihood is at least the noise one.

    Ties go to the signal side.  Requires at least one observation.
    """
    if state.n < 1:
        raise DomainError("signal-set estimate requires at least one observation")
    out = []
    for i in range(state.k):
        st = state.stats[i]
        model = state.models[i]
        if sup_stat_loglik(model, st.n, st.s, Region.SIGNAL) >= sup_stat_loglik(
            model, st.n, st.s, Region.NOISE
        ):
            out.append(i)
    return frozenset(out)


def sup_loglik_error_sets(state: EngineState, kind: TestKind) -> tuple[float, float]:
    """Best log-likelihood over each error family of assignments.

    Returns (logL0, logL1) where logL0 ranges over assignments adding at
    least one stream to the current estimate (their acceptance would be a
    false alarm) and logL1 over assignments dropping at least one (a miss).
    An empty family yields -inf.  Constrained assignments pool counts and
    sums within the signal group and within the noise group; the
    unconstrained value frees every stream and charges only the cheapest
    forced flip.
    """
    if state.n < 1:
        raise DomainError("error-set suprema require at least one observation")
    k = state.k
    model = state.models[0]
    a_hat = estimate_signal_set(state)
    a_mask = 0
    for i in a_hat:
        a_mask |= 1 << i
    base = state.data_loglik

    if kind is TestKind.UNCONSTRAINED:
        full_q = []
        sig_q = []
        noise_q = []
        for i in range(k):
            st = state.stats[i]
            qs = sup_stat_loglik(model, st.n, st.s, Region.SIGNAL)
            qn = sup_stat_loglik(model, st.n, st.s, Region.NOISE)
            sig_q.append(qs)
            noise_q.append(qn)
            full_q.append(qs if qs >= qn else qn)
        total = sum(full_q)
        flip0 = [full_q[i] - sig_q[i] for i in range(k) if i not in a_hat]
        flip1 = [full_q[i] - noise_q[i] for i in range(k) if i in a_hat]
        l0 = total - min(flip0) + base if flip0 else _NEG_INF
        l1 = total - min(flip1) + base if flip1 else _NEG_INF
        return l0, l1

    if k > MAX_STREAMS:
        raise CapacityError(f"subset enumeration supports at most {MAX_STREAMS} streams")
    ns = [st.n for st in state.stats]
    ss = [st.s for st in state.stats]
    l0 = _NEG_INF
    l1 = _NEG_INF
    for mask in range(1 << k):
        cand0 = bool(mask & ~a_mask)
        cand1 = bool(a_mask & ~mask)
        if not (cand0 or cand1):
            continue
        nb = 0
        sb = 0.0
        for i in range(k):
            if mask >> i & 1:
                nb += ns[i]
                sb += ss[i]
        nc = state.n * k - nb
        sc = sum(ss) - sb
        val = (
            sup_stat_loglik(model, nb, sb, Region.SIGNAL)
            + sup_stat_loglik(model, nc, sc, Region.NOISE)
            + base
        )
        if cand0 and val > l0:
            l0 = val
        if cand1 and val > l1:
            l1 = val
    return l0, l1


def check_stop(
    state: EngineState, thresholds: Thresholds, kind: TestKind
) -> Decision | None:
    """Stopping check at the current time.

    Stops when the adaptive log-likelihood exceeds logL0 by log_b and logL1
    by log_a simultaneously; a -inf supremum satisfies its condition
    vacuously.  Returns the decision or None.
    """
    l0, l1 = sup_loglik_error_sets(state, kind)
    adaptive = state.adaptive_loglik
    if adaptive - l0 >= thresholds.log_b and adaptive - l1 >= thresholds.log_a:
        return Decision(
            stopped_at=state.n,
            selected=estimate_signal_set(state),
            truncated=False,
        )
    return None


def run_to_decision(
    models: Sequence[StreamModel],
    theta_true: JointParameter,
    thresholds: Thresholds,
    kind: TestKind,
    rng,
    n_max: int = 10**6,
    init_mle: str | Sequence[float] = "signal-boundary",
) -> TrialResult:
    """Simulate one trial to its decision.

    Samples stream observations (in stream order) from ``theta_true``,
    feeds them through :func:`update`, and checks the stopping rule after
    every step.  If no decision is reached by ``n_max`` the trial is
    truncated and the current signal-set estimate is reported with the
    truncation flag set; truncation is reported, never hidden.
    """
    models = tuple(models)
    if n_max < 1:
        raise ConfigError("n_max must be at least 1")
    if theta_true.k != len(models):
        raise ConfigError("truth vector length must match the number of streams")
    for i, t in enumerate(theta_true.thetas):
        if not models[i].space.contains(t):
            raise ConfigError(f"stream {i} truth {t!r} outside the parameter set")
    state = init(models, init_mle)
    thetas = theta_true.thetas
    decision = None
    while state.n < n_max:
        obs = [sample(models[i], thetas[i], rng) for i in range(len(models))]
        update(state, obs)
        decision = check_stop(state, thresholds, kind)
        if decision is not None:
            break
    if decision is None:
        decision = Decision(
            stopped_at=state.n,
            selected=estimate_signal_set(state),
            truncated=True,
        )
    l0, l1 = sup_loglik_error_sets(state, kind)
    inv_n = 1.0 / state.n
    return TrialResult(
        decision=decision,
        norm_stat0=(state.adaptive_loglik - l0) * inv_n,
        norm_stat1=(state.adaptive_loglik - l1) * inv_n,
    )
