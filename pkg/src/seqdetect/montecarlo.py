"""Monte Carlo evaluation of the sequential tests.

Runs independent trials per cell, where a cell is one (thresholds, kind)
pair, and reduces them to operating characteristics: expected sample size,
familywise error rates of both types, and the first-order theoretical
approximation for the cell.  Trial seeds are derived, not shared, so the
summary is independent of execution order and of the degree of
parallelism.
"""
from __future__ import annotations

import math
import os
import random
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import engine, geometry
from .errors import ConfigError
from .models import JointParameter, StreamModel

_MASK64 = (1 << 64) - 1

# Normal quantile for the reported 95% binomial half-widths.
_Z95 = 1.959963984540054

# Below this many observed errors a binomial rate estimate is too coarse to
# certify; the summary carries a flag instead of pretending precision.
_CERTIFY_FLOOR = 10


def _splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_trial_seed(base_seed: int, cell_index: int, trial_index: int) -> int:
    """Mix (base_seed, cell_index, trial_index) into one 64-bit trial seed.

    Chained splitmix64 finalizers; distinct triples collide only with
    birthday probability, so derived streams are effectively independent.
    """
    if cell_index < 0 or trial_index < 0:
        raise ConfigError("cell and trial indices must be non-negative")
    x = _splitmix64(base_seed & _MASK64)
    x = _splitmix64(x ^ (cell_index & _MASK64))
    x = _splitmix64(x ^ (trial_index & _MASK64))
    return x


def thresholds_from_levels(alpha: float, beta: float) -> engine.Thresholds:
    """Thresholds delivering familywise error rates alpha and beta:
    log_a = -log(alpha), log_b = -log(beta)."""
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise ConfigError("alpha and beta must lie in (0, 1)")
    return engine.Thresholds(log_a=-math.log(alpha), log_b=-math.log(beta))


@dataclass(frozen=True)
class ExperimentConfig:
    model: StreamModel
    k: int
    theta: JointParameter
    kinds: tuple[engine.TestKind, ...]
    thresholds: tuple[engine.Thresholds, ...]
    trials: int
    base_seed: int
    n_max: int = 10**6
    init_mle: str = "signal-boundary"

    def __post_init__(self):
        if self.k != self.theta.k:
            raise ConfigError("k must match the truth vector length")
        if not self.kinds:
            raise ConfigError("at least one test kind required")
        if len(set(self.kinds)) != len(self.kinds):
            raise ConfigError("duplicate test kinds")
        if not self.thresholds:
            raise ConfigError("at least one threshold pair required")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.n_max < 1:
            raise ConfigError("n_max must be positive")
        for i, t in enumerate(self.theta.thetas):
            if not self.model.space.contains(t):
                raise ConfigError(f"stream {i} truth {t!r} outside the parameter set")
        if engine.TestKind.CONSTRAINED in self.kinds and not self.theta.is_constrained(
            self.model.space
        ):
            raise ConfigError("constrained cells require a coupled truth vector")


@dataclass(frozen=True)
class Summary:
    """Operating characteristics of one (thresholds, kind) cell."""

    kind: engine.TestKind
    log_a: float
    log_b: float
    trials: int
    ess: float
    ess_se: float
    fwer1: float
    fwer1_ci: float
    fwer2: float
    fwer2_ci: float
    truncated: int
    approx_ess: float
    n_type1: int
    n_type2: int
    fwer1_certifiable: bool
    fwer2_certifiable: bool


def _run_batch(
    model: StreamModel,
    theta: JointParameter,
    thresholds: engine.Thresholds,
    kind: engine.TestKind,
    true_signal: frozenset,
    base_seed: int,
    cell_index: int,
    start: int,
    stop: int,
    n_max: int,
    init_mle: str,
) -> list[tuple[int, bool, bool, bool]]:
    models = (model,) * theta.k
    out = []
    for trial in range(start, stop):
        rng = random.Random(derive_trial_seed(base_seed, cell_index, trial))
        result = engine.run_to_decision(
            models, theta, thresholds, kind, rng, n_max=n_max, init_mle=init_mle
        )
        d = result.decision
        err1 = bool(d.selected - true_signal)
        err2 = bool(true_signal - d.selected)
        out.append((d.stopped_at, d.truncated, err1, err2))
    return out


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get("SEQDETECT_THREADS")
        if env is not None:
            try:
                workers = int(env)
            except ValueError as exc:
                raise ConfigError(f"SEQDETECT_THREADS must be an integer, got {env!r}") from exc
        else:
            workers = os.cpu_count() or 1
    if workers < 1:
        raise ConfigError("worker count must be at least 1")
    return workers


def _rate_ci(count: int, trials: int) -> float:
    p = count / trials
    return _Z95 * math.sqrt(p * (1.0 - p) / trials)


def approx_ess(
    constants: geometry.InfoConstants, kind: engine.TestKind, th: engine.Thresholds
) -> float:
    if kind is engine.TestKind.CONSTRAINED:
        pair = constants
    else:
        # The baseline's sample size is governed by the per-stream constants.
        pair = geometry.InfoConstants(
            constants.i0_tilde,
            constants.i1_tilde,
            constants.i0_tilde,
            constants.i1_tilde,
        )
    if th.log_a <= 0.0 or th.log_b <= 0.0:
        return float("nan")
    # max(|log beta|/i0, |log alpha|/i1) stated directly in threshold space;
    # exponentiating and re-logging would underflow for large thresholds.
    return max(th.log_b / pair.i0, th.log_a / pair.i1)


def run_experiment(config: ExperimentConfig, workers: int | None = None) -> list[Summary]:
    """Run every cell of the experiment and summarize.

    Cells are enumerated thresholds-major, kinds-minor; each trial draws its
    own seed from (base_seed, cell, trial), so results do not depend on how
    work is scheduled.  Truncated trials are excluded from the expected
    sample size (with a warning) but still count toward the error rates.
    """
    workers = _resolve_workers(workers)
    true_signal = config.theta.signal_set(config.model.space)
    constants = geometry.info_constants(config.model, config.theta)

    cells = []
    for ti, th in enumerate(config.thresholds):
        for ki, kind in enumerate(config.kinds):
            cells.append((ti * len(config.kinds) + ki, th, kind))

    chunk = max(1, -(-config.trials // max(1, workers * 4)))
    tasks = []
    for cell_index, th, kind in cells:
        for start in range(0, config.trials, chunk):
            stop = min(start + chunk, config.trials)
            tasks.append((cell_index, th, kind, start, stop))

    results: dict[int, dict[int, list]] = {c: {} for c, _, _ in cells}
    if workers == 1:
        for cell_index, th, kind, start, stop in tasks:
            results[cell_index][start] = _run_batch(
                config.model, config.theta, th, kind, true_signal,
                config.base_seed, cell_index, start, stop,
                config.n_max, config.init_mle,
            )
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {}
            for cell_index, th, kind, start, stop in tasks:
                fut = pool.submit(
                    _run_batch,
                    config.model, config.theta, th, kind, true_signal,
                    config.base_seed, cell_index, start, stop,
                    config.n_max, config.init_mle,
                )
                futures[fut] = (cell_index, start)
            for fut, (cell_index, start) in futures.items():
                results[cell_index][start] = fut.result()

    summaries = []
    for cell_index, th, kind in cells:
        records = []
        for start in sorted(results[cell_index]):
            records.extend(results[cell_index][start])
        stopped = np.array([r[0] for r in records], dtype=float)
        trunc = np.array([r[1] for r in records], dtype=bool)
        err1 = sum(1 for r in records if r[2])
        err2 = sum(1 for r in records if r[3])

        kept = stopped[~trunc]
        n_trunc = int(trunc.sum())
        if n_trunc > 0:
            warnings.warn(
                f"cell {cell_index}: {n_trunc} truncated trial(s) excluded from ESS",
                stacklevel=2,
            )
        if kept.size == 0:
            ess = float("nan")
            ess_se = float("nan")
        else:
            ess = float(kept.mean())
            ess_se = (
                float(kept.std(ddof=1) / math.sqrt(kept.size)) if kept.size > 1 else 0.0
            )

        summaries.append(
            Summary(
                kind=kind,
                log_a=th.log_a,
                log_b=th.log_b,
                trials=config.trials,
                ess=ess,
                ess_se=ess_se,
                fwer1=err1 / config.trials,
                fwer1_ci=_rate_ci(err1, config.trials),
                fwer2=err2 / config.trials,
                fwer2_ci=_rate_ci(err2, config.trials),
                truncated=n_trunc,
                approx_ess=approx_ess(constants, kind, th),
                n_type1=err1,
                n_type2=err2,
                fwer1_certifiable=err1 >= _CERTIFY_FLOOR,
                fwer2_certifiable=err2 >= _CERTIFY_FLOOR,
            )
        )
    return summaries
