"""Multi-start Nelder-Mead search over monotone threshold policies.

Thresholds are parameterised by nonnegative gaps

    tau_B = g_B,  tau_l = tau_{l+1} + g_l,

so every clamped gap vector is a valid monotone policy and the search itself
is unconstrained.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import minimize

from .policy import SystemParams, ThresholdPolicy, validate_policy
from .renewal import average_age

__all__ = [
    "OptimizerOptions",
    "OptimizationReport",
    "SweepRow",
    "gaps_to_taus",
    "taus_to_gaps",
    "optimize_thresholds",
    "sweep",
]


@dataclass(frozen=True)
class OptimizerOptions:
    restarts: int = 8
    max_evals: int = 4000
    tol: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if isinstance(self.restarts, bool) or int(self.restarts) != self.restarts or self.restarts < 1:
            raise ValueError(f"restarts must be a positive integer, got {self.restarts!r}")
        if isinstance(self.max_evals, bool) or int(self.max_evals) != self.max_evals or self.max_evals < 1:
            raise ValueError(f"max_evals must be a positive integer, got {self.max_evals!r}")
        if not (0 < self.tol < 1):
            raise ValueError(f"tol must lie in (0, 1), got {self.tol!r}")
        if isinstance(self.seed, bool) or int(self.seed) != self.seed or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        object.__setattr__(self, "restarts", int(self.restarts))
        object.__setattr__(self, "max_evals", int(self.max_evals))
        object.__setattr__(self, "tol", float(self.tol))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class OptimizationReport:
    params: SystemParams
    best_policy: ThresholdPolicy
    best_age: float
    fixed_point_residual: float
    evals: int
    converged: bool
    restart_trace: tuple[float, ...] = field(default=())

    def to_dict(self) -> dict:
        return {
            "mu_h": self.params.mu_h,
            "battery": self.params.battery,
            "taus": list(self.best_policy.taus),
            "best_age": self.best_age,
            "fixed_point_residual": self.fixed_point_residual,
            "evals": self.evals,
            "converged": self.converged,
            "restart_trace": list(self.restart_trace),
        }


@dataclass(frozen=True)
class SweepRow:
    battery: int
    mu_h: float
    taus: tuple[float, ...]
    avg_age: float
    converged: bool


def gaps_to_taus(gaps: Sequence[float]) -> np.ndarray:
    """Clamp gaps at zero and accumulate from the full-battery end."""
    g = np.maximum(np.asarray(gaps, dtype=float), 0.0)
    return np.cumsum(g[::-1])[::-1]


def taus_to_gaps(taus: Sequence[float]) -> np.ndarray:
    t = np.asarray(taus, dtype=float)
    return t - np.append(t[1:], 0.0)


def _initial_simplex(x0: np.ndarray, scale: float) -> np.ndarray:
    n = x0.size
    simplex = np.tile(x0, (n + 1, 1))
    for k in range(n):
        simplex[k + 1, k] += max(0.25 * abs(x0[k]), 0.1 * scale)
    return simplex


def _run_restart(objective, x0: np.ndarray, scale: float, options: OptimizerOptions):
    """Nelder-Mead from ``x0``, re-seeding the simplex at the incumbent until it stops improving.

    Returns ``(x, f, evals, converged)``.
    """
    budget = options.max_evals
    x, f = x0, objective(x0)
    evals = 1
    converged = False
    while budget - evals > 0:
        res = minimize(
            objective,
            x,
            method="Nelder-Mead",
            options={
                "initial_simplex": _initial_simplex(x, scale),
                "xatol": options.tol * scale,
                "fatol": options.tol * scale,
                "maxfev": budget - evals,
                "adaptive": x.size > 2,
            },
        )
        evals += res.nfev
        converged = res.status == 0
        improved = f - res.fun > options.tol * scale
        if res.fun < f:
            x, f = res.x, res.fun
        if not converged or not improved:
            break
        # a fresh simplex at the new incumbent guards against premature collapse
        scale = max(scale * 0.1, options.tol * 10)
    return x, f, evals, converged


def optimize_thresholds(
    params: SystemParams,
    options: OptimizerOptions | None = None,
    previous: OptimizationReport | None = None,
) -> OptimizationReport:
    """Minimise the average age over monotone threshold policies.

    Runs ``options.restarts`` searches from random gaps ``U(0, 2/mu_h)`` plus,
    for ``B > 1``, one from the optimal ``B - 1`` policy with its last
    threshold repeated. ``previous`` supplies that ``B - 1`` report; when
    omitted it is computed (and cached) recursively.

    Exhausting ``max_evals`` is not an error: the best point found is
    returned with ``converged=False``.
    """
    options = options or OptimizerOptions()
    b = params.battery
    mu = params.mu_h
    scale = 1.0 / mu

    def objective(gaps):
        return average_age(params, ThresholdPolicy(tuple(gaps_to_taus(gaps)))).avg_age

    starts = []
    rng = np.random.default_rng(np.random.SeedSequence([options.seed, b]))
    for _ in range(options.restarts):
        starts.append(rng.uniform(0.0, 2.0 / mu, size=b))
    if b > 1:
        if previous is None:
            previous = _cached_optimize(SystemParams(mu, b - 1), options)
        if previous.params.battery != b - 1:
            raise ValueError("warm start must come from a battery one unit smaller")
        prev = previous.best_policy.taus
        starts.append(taus_to_gaps(prev + (prev[-1],)))

    trace = []
    best = None
    total_evals = 0
    for k, x0 in enumerate(starts):
        x, f, evals, ok = _run_restart(objective, np.asarray(x0, dtype=float), scale, options)
        total_evals += evals
        trace.append(float(f))
        if best is None or f < best[1]:
            best = (x, f, ok, k)

    taus = tuple(float(t) for t in gaps_to_taus(best[0]))
    policy = validate_policy(params, ThresholdPolicy(taus))
    age = average_age(params, policy).avg_age
    return OptimizationReport(
        params=params,
        best_policy=policy,
        best_age=age,
        fixed_point_residual=abs(taus[-1] - age),
        evals=total_evals,
        converged=best[2],
        restart_trace=tuple(trace),
    )


@lru_cache(maxsize=256)
def _cached_optimize(params: SystemParams, options: OptimizerOptions) -> OptimizationReport:
    return optimize_thresholds(params, options)


def sweep(
    mu_values: Iterable[float],
    batteries: Iterable[int],
    options: OptimizerOptions | None = None,
) -> list[SweepRow]:
    """Optimise every (battery, mu_h) cell; rows ordered by battery then mu_h.

    Each battery size is warm-started from the next smaller one at the same
    rate (computed on the side if it is not itself part of the grid).
    """
    options = options or OptimizerOptions()
    mus = sorted({float(m) for m in mu_values})
    bs = sorted({int(b) for b in batteries})
    if not mus or not bs:
        raise ValueError("sweep grids must be nonempty")
    for m in mus:
        if not (math.isfinite(m) and m > 0):
            raise ValueError(f"mu_h values must be positive, got {m!r}")
    rows = []
    last: dict[tuple[float, int], OptimizationReport] = {}
    for b in bs:
        for m in mus:
            params = SystemParams(m, b)
            prev = last.get((m, b - 1))
            if prev is None and b > 1:
                prev = _cached_optimize(SystemParams(m, b - 1), options)
            report = optimize_thresholds(params, options, previous=prev)
            last[(m, b)] = report
            rows.append(SweepRow(b, m, report.best_policy.taus, report.best_age, report.converged))
    return rows
