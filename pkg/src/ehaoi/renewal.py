"""Inter-update laws, conditional moments and the renewal-reward average age."""

from __future__ import annotations

import math

import numpy as np

from .chain import stationary_distribution, transition_from_cdf
from .erlang import ErlangSpec, PoissonTables, erlang_cdf
from .policy import PolicyEvaluation, SystemParams, ThresholdPolicy, validate_policy

__all__ = [
    "interupdate_cdf",
    "conditional_moments",
    "all_conditional_moments",
    "average_age",
    "average_age_b2_closed",
    "moment_derivative_residual",
]


def _check_level(params: SystemParams, j: int) -> int:
    if int(j) != j or not 0 <= j < params.battery:
        raise ValueError(f"post-update level must be in 0..{params.battery - 1}, got {j!r}")
    return int(j)


def interupdate_cdf(params: SystemParams, policy: ThresholdPolicy, j: int, x: float) -> float:
    """P(X <= x | post-update level j).

    Zero before ``tau_B``; on ``[tau_m, tau_{m-1})`` the update has happened
    iff ``m - j`` arrivals came by ``x``; past ``tau_1`` one level suffices.
    """
    policy = validate_policy(params, policy)
    j = _check_level(params, j)
    x = float(x)
    if not math.isfinite(x) or x < 0:
        raise ValueError(f"x must be finite and nonnegative, got {x!r}")
    taus = policy.taus
    b = params.battery
    if x < taus[b - 1]:
        return 0.0
    # smallest level m whose threshold has been reached
    m = next(level for level in range(1, b + 1) if x >= taus[level - 1])
    return erlang_cdf(ErlangSpec(m - j, params.mu_h), x)


def _moments_from_tables(params: SystemParams, taus: np.ndarray, tables: PoissonTables):
    """Conditional moments for every post-update level from tables at ``mu_h * taus``.

    Level j integrates shape ``m - j`` over ``[tau_m, tau_{m-1})`` for
    m = B..2 and shape ``1 - j`` over ``[tau_1, inf)``; survival is 1 on
    ``[0, tau_B)``.
    """
    b = params.battery
    rate = params.mu_h
    # append the point at infinity, where both antiderivative tails vanish
    first = np.vstack([tables.first, np.zeros(b + 1)])
    second = np.vstack([tables.second, np.zeros(b + 1)])
    m = np.arange(b, 0, -1)  # B, B-1, ..., 1
    lower = m - 1  # row of tau_m
    upper = np.where(m > 1, m - 2, b)  # row of tau_{m-1}, or infinity
    k = np.maximum(m[None, :] - np.arange(b)[:, None], 0)
    seg0 = (first[lower, k] - first[upper, k]) / rate
    seg1 = (second[lower, k] - second[upper, k]) / rate**2
    tau_full = taus[-1]
    mean = tau_full + np.maximum(seg0, 0.0).sum(axis=1)
    second_moment = tau_full**2 + 2.0 * np.maximum(seg1, 0.0).sum(axis=1)
    return mean, second_moment


def all_conditional_moments(params: SystemParams, policy: ThresholdPolicy) -> tuple[np.ndarray, np.ndarray]:
    """``(E[X | j], E[X^2 | j])`` for every post-update level j, as arrays."""
    policy = validate_policy(params, policy)
    taus = policy.as_array()
    tables = PoissonTables.build(params.mu_h * taus, params.battery)
    return _moments_from_tables(params, taus, tables)


def conditional_moments(params: SystemParams, policy: ThresholdPolicy, j: int) -> tuple[float, float]:
    j = _check_level(params, j)
    first, second = all_conditional_moments(params, policy)
    return float(first[j]), float(second[j])


def average_age(params: SystemParams, policy: ThresholdPolicy) -> PolicyEvaluation:
    """Time-average age of a monotone threshold policy, with its ingredients."""
    policy = validate_policy(params, policy)
    b = params.battery
    taus = policy.as_array()
    tables = PoissonTables.build(params.mu_h * taus, b)
    transition = transition_from_cdf(tables.cdf[: b - 1]) if b > 1 else np.ones((1, 1))
    pi = stationary_distribution(transition)
    first, second = _moments_from_tables(params, taus, tables)
    mean_cycle = float(first @ pi)
    avg = float(second @ pi) / (2.0 * mean_cycle)
    return PolicyEvaluation(
        cond_mean=tuple(first.tolist()),
        cond_second=tuple(second.tolist()),
        stationary=tuple(pi.tolist()),
        mean_cycle=mean_cycle,
        avg_age=avg,
        extras={"transition": transition},
    )


def average_age_b2_closed(params: SystemParams, tau_1: float, tau_2: float) -> float:
    """Closed-form average age for a two-unit battery.

    Written in the scaled thresholds ``a_i = mu_h * tau_i`` with
    ``rho = exp(-a_1) / (1 - a_1 exp(-a_1))``.
    """
    validate_policy(SystemParams(params.mu_h, 2), ThresholdPolicy((tau_1, tau_2)))
    mu = params.mu_h
    a1, a2 = mu * tau_1, mu * tau_2
    e1, e2 = math.exp(-a1), math.exp(-a2)
    rho = e1 / (1.0 - e1 * a1)
    num = a2**2 / 2 + e2 * (a2 + 1 + rho * (a2**2 + 2 * a2 + 2)) - e1 * (a1 + 1 + rho * (a1**2 + a1 + 1))
    den = mu * (a2 + e2 * (1 + rho * (a2 + 1)) - e1 * (1 + rho * a1))
    return num / den


def moment_derivative_residual(params: SystemParams, policy: ThresholdPolicy, i: int, h: float) -> float:
    """Finite-difference check of ``dE[X^2|j]/dtau_i = 2 tau_i dE[X|j]/dtau_i``.

    Central differences of step ``h``; the maximum violation over j is
    returned and should shrink like ``h**2``.

    Raises
    ------
    ValueError
        If ``i`` is not a battery level, ``h <= 0``, or ``tau_i +/- h``
        would leave the interval ``[tau_{i+1}, tau_{i-1}]``.
    """
    policy = validate_policy(params, policy)
    b = params.battery
    if int(i) != i or not 1 <= i <= b:
        raise ValueError(f"level i must be in 1..{b}, got {i!r}")
    if not (h > 0 and math.isfinite(h)):
        raise ValueError(f"step h must be positive, got {h!r}")
    taus = list(policy.taus)
    t = taus[i - 1]
    lo = taus[i] if i < b else 0.0
    hi = taus[i - 2] if i > 1 else math.inf
    if t - h < lo or t + h > hi:
        raise ValueError(f"tau_{i} +/- {h} leaves its monotone band [{lo}, {hi}]")
    up, down = list(taus), list(taus)
    up[i - 1] = t + h
    down[i - 1] = t - h
    m1p, m2p = all_conditional_moments(params, ThresholdPolicy(tuple(up)))
    m1m, m2m = all_conditional_moments(params, ThresholdPolicy(tuple(down)))
    d1 = (m1p - m1m) / (2 * h)
    d2 = (m2p - m2m) / (2 * h)
    return float(np.max(np.abs(d2 - 2 * t * d1)))
