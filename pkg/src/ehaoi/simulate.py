"""Event-driven Monte Carlo of a threshold policy under Poisson harvesting.

Age grows linearly between events, so the age integral is accumulated in
closed form; there is no time stepping. Two kinds of events exist: the next
energy arrival, and the instant ``Z_k + tau_l`` at which the age reaches the
threshold of the current battery level ``l``. An arrival that lifts the
level to ``l'`` when the age already exceeds ``tau_{l'}`` fires at once.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numba import njit

from .policy import SystemParams, ThresholdPolicy, validate_policy

__all__ = ["SimulationConfig", "SimulationResult", "simulate", "replication_seed"]

_MASK64 = (1 << 64) - 1

# float state slots
_Z, _AREA = 0, 1
# int state slots
_LEVEL, _PREV, _UPDATES, _LOST, _FIRES, _STORED, _CYCLES, _DONE = range(8)


def replication_seed(seed: int, index: int) -> int:
    """SplitMix64 finaliser applied to ``seed + index``."""
    z = (seed + index + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SimulationConfig:
    """Run length is either a time ``horizon`` or a number of renewal cycles.

    ``warmup`` defaults to 1% of the horizon (cycle mode: 1% of
    ``cycle_count / mu_h``); ``initial_battery`` defaults to a full battery.
    """

    horizon: float | None = None
    cycle_count: int | None = None
    seed: int = 0
    replications: int = 1
    initial_battery: int | None = None
    warmup: float | None = None
    workers: int = 1

    def __post_init__(self):
        if (self.horizon is None) == (self.cycle_count is None):
            raise ValueError("exactly one of horizon and cycle_count must be set")
        if self.horizon is not None and not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ValueError(f"horizon must be positive and finite, got {self.horizon!r}")
        if self.cycle_count is not None and (int(self.cycle_count) != self.cycle_count or self.cycle_count < 1):
            raise ValueError(f"cycle_count must be a positive integer, got {self.cycle_count!r}")
        if int(self.replications) != self.replications or self.replications < 1:
            raise ValueError(f"replications must be a positive integer, got {self.replications!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        if self.warmup is not None and not (math.isfinite(self.warmup) and self.warmup >= 0):
            raise ValueError(f"warmup must be finite and nonnegative, got {self.warmup!r}")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True)
class SimulationResult:
    """Pooled output of all replications.

    ``estimate`` is the mean of the per-replication time averages and
    ``std_error`` their sample standard deviation over sqrt(replications)
    (NaN for a single replication). Per-level statistics are indexed by the
    post-update battery level and pool only complete cycles that started
    after warmup.
    """

    estimate: float
    std_error: float
    updates: int
    lost_energy: int
    state_frequencies: tuple[float, ...]
    replicate_estimates: tuple[float, ...] = ()
    state_counts: tuple[int, ...] = ()
    cond_mean: tuple[float, ...] = ()
    cond_second: tuple[float, ...] = ()
    transition_counts: np.ndarray = field(default=None, compare=False, repr=False)
    energy_balance: tuple[int, ...] = field(default=(), compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "std_error": None if math.isnan(self.std_error) else self.std_error,
            "updates": self.updates,
            "lost_energy": self.lost_energy,
            "state_frequencies": list(self.state_frequencies),
            "replicate_estimates": list(self.replicate_estimates),
            "state_counts": list(self.state_counts),
            "cond_mean": list(self.cond_mean),
            "cond_second": list(self.cond_second),
        }


@njit(cache=True, nogil=True)
def _fire(t, warmup, fstate, istate, sums, sumsq, counts, trans):
    level = istate[_LEVEL]
    if level < 1:
        raise RuntimeError("update fired with an empty battery")
    z = fstate[_Z]
    if t > warmup:
        s = max(z, warmup)
        fstate[_AREA] += 0.5 * ((t - z) ** 2 - (s - z) ** 2)
        istate[_UPDATES] += 1
    prev = istate[_PREV]
    if prev >= 0 and z >= warmup:
        x = t - z
        sums[prev] += x
        sumsq[prev] += x * x
        counts[prev] += 1
        trans[prev, level - 1] += 1
        istate[_CYCLES] += 1
    istate[_FIRES] += 1
    istate[_LEVEL] = level - 1
    istate[_PREV] = level - 1
    fstate[_Z] = t


@njit(cache=True, nogil=True)
def _run_chunk(arrivals, taus, battery, horizon, warmup, cycle_limit, fstate, istate, sums, sumsq, counts, trans):
    """Consume arrival times until they run out or the run ends.

    ``horizon`` is ``inf`` in cycle mode; ``cycle_limit`` is 0 in horizon mode.
    """
    n = arrivals.shape[0]
    i = 0
    while i < n:
        a = arrivals[i]
        level = istate[_LEVEL]
        if level >= 1:
            f = fstate[_Z] + taus[level - 1]
        else:
            f = np.inf
        if f <= a:
            if f >= horizon:
                break
            _fire(f, warmup, fstate, istate, sums, sumsq, counts, trans)
            if cycle_limit > 0 and istate[_CYCLES] >= cycle_limit:
                istate[_DONE] = 1
                return
            continue
        if a >= horizon:
            break
        i += 1
        if level < battery:
            istate[_LEVEL] = level + 1
            istate[_STORED] += 1
        elif a > warmup:
            istate[_LOST] += 1
        level = istate[_LEVEL]
        if a - fstate[_Z] >= taus[level - 1]:
            _fire(a, warmup, fstate, istate, sums, sumsq, counts, trans)
            if cycle_limit > 0 and istate[_CYCLES] >= cycle_limit:
                istate[_DONE] = 1
                return
    if i < n:
        # horizon reached before the next arrival
        z = fstate[_Z]
        if horizon > warmup:
            s = max(z, warmup)
            fstate[_AREA] += 0.5 * ((horizon - z) ** 2 - (s - z) ** 2)
        istate[_DONE] = 1


def _one_replication(params: SystemParams, taus: np.ndarray, config: SimulationConfig, index: int, warmup: float):
    b = params.battery
    mu = params.mu_h
    rng = np.random.Generator(np.random.PCG64(replication_seed(config.seed, index)))
    horizon = float(config.horizon) if config.horizon is not None else math.inf
    cycle_limit = int(config.cycle_count) if config.cycle_count is not None else 0

    fstate = np.zeros(2)
    istate = np.zeros(8, dtype=np.int64)
    istate[_LEVEL] = b if config.initial_battery is None else config.initial_battery
    istate[_PREV] = -1
    initial = int(istate[_LEVEL])
    sums = np.zeros(b)
    sumsq = np.zeros(b)
    counts = np.zeros(b, dtype=np.int64)
    trans = np.zeros((b, b), dtype=np.int64)

    last = 0.0
    while not istate[_DONE]:
        if math.isfinite(horizon):
            size = int(min(max(mu * (horizon - last) * 1.02 + 64, 1024), 1 << 20))
        else:
            size = 1 << 16
        # inverse-transform exponential gaps
        gaps = -np.log1p(-rng.random(size)) / mu
        arrivals = last + np.cumsum(gaps)
        last = float(arrivals[-1])
        _run_chunk(arrivals, taus, b, horizon, warmup, cycle_limit, fstate, istate, sums, sumsq, counts, trans)

    if cycle_limit:
        total = sums.sum()
        estimate = float(sumsq.sum() / (2.0 * total)) if total > 0 else math.nan
    else:
        estimate = float(fstate[_AREA] / (horizon - warmup))
    balance = (initial, int(istate[_STORED]), int(istate[_FIRES]), int(istate[_LEVEL]))
    return estimate, istate.copy(), sums, sumsq, counts, trans, balance


def simulate(params: SystemParams, policy: ThresholdPolicy, config: SimulationConfig) -> SimulationResult:
    """Simulate ``config.replications`` independent runs and pool them.

    Raises
    ------
    ValueError
        If the warmup leaves no time to measure, or ``initial_battery`` is
        outside ``0..B``.
    """
    policy = validate_policy(params, policy)
    b = params.battery
    if config.initial_battery is not None and not 0 <= config.initial_battery <= b:
        raise ValueError(f"initial_battery must be in 0..{b}, got {config.initial_battery!r}")
    if config.horizon is not None:
        warmup = 0.01 * config.horizon if config.warmup is None else float(config.warmup)
        if config.horizon - warmup <= 0:
            raise ValueError("warmup leaves a zero effective horizon")
    else:
        warmup = 0.01 * config.cycle_count / params.mu_h if config.warmup is None else float(config.warmup)
    taus = policy.as_array()

    def run(k):
        return _one_replication(params, taus, config, k, warmup)

    if config.workers > 1 and config.replications > 1:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            outs = list(pool.map(run, range(config.replications)))
    else:
        outs = [run(k) for k in range(config.replications)]

    estimates = np.array([o[0] for o in outs])
    sums = sum(o[2] for o in outs)
    sumsq = sum(o[3] for o in outs)
    counts = sum(o[4] for o in outs)
    trans = sum(o[5] for o in outs)
    n = len(outs)
    std_error = float(np.std(estimates, ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    total = counts.sum()
    freqs = counts / total if total else np.zeros(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        cond_mean = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
        cond_second = np.where(counts > 0, sumsq / np.maximum(counts, 1), np.nan)
    return SimulationResult(
        estimate=float(estimates.mean()),
        std_error=std_error,
        updates=int(sum(o[1][_UPDATES] for o in outs)),
        lost_energy=int(sum(o[1][_LOST] for o in outs)),
        state_frequencies=tuple(freqs.tolist()),
        replicate_estimates=tuple(estimates.tolist()),
        state_counts=tuple(int(c) for c in counts),
        cond_mean=tuple(cond_mean.tolist()),
        cond_second=tuple(cond_second.tolist()),
        transition_counts=trans,
        energy_balance=tuple(o[6] for o in outs),
    )
