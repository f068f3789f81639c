"""Embedded chain of post-update battery levels.

State ``j`` is the battery content right after an update, ``j = 0..B-1``.
Row ``j`` of the transition matrix is the law of the next post-update level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .erlang import erlang_cdf_table
from .policy import SystemParams, ThresholdPolicy, validate_policy

__all__ = [
    "ChainModel",
    "StationaryError",
    "build_transition",
    "transition_from_cdf",
    "stationary_distribution",
    "chain_model",
]

STATIONARY_RESIDUAL_TOL = 1e-10


class StationaryError(ArithmeticError):
    pass


@dataclass(frozen=True)
class ChainModel:
    transition: np.ndarray
    stationary: np.ndarray


def build_transition(params: SystemParams, policy: ThresholdPolicy) -> np.ndarray:
    """Transition matrix ``P[j, i] = P(next post-update level = i | level j)``.

    An update fires at level ``i + 1`` (leaving ``i``) when level ``i + 1`` is
    reached before age hits ``tau_i`` but level ``i + 2`` is not reached
    before ``tau_{i+1}``. Full-battery firing (``i = B - 1``) only needs
    ``B - j`` arrivals before ``tau_{B-1}``. ``tau_B`` never enters.
    """
    policy = validate_policy(params, policy)
    b = params.battery
    if b == 1:
        return np.ones((1, 1))
    return transition_from_cdf(erlang_cdf_table(params.mu_h, policy.taus[: b - 1], b))


def transition_from_cdf(cdf: np.ndarray) -> np.ndarray:
    """Assemble the transition matrix from ``cdf[l - 1, n] = P(Y_n <= tau_l)``, l = 1..B-1."""
    b = cdf.shape[0] + 1
    # row l holds P(Y_n <= tau_l); row 0 is tau_0 = inf
    by_tau = np.ones((b, b + 1))
    by_tau[1:] = cdf[:, : b + 1]
    j, i = np.meshgrid(np.arange(b), np.arange(b - 1), indexing="ij")
    # nonpositive arrival counts mean Y = 0, whose cdf sits in column 0
    reach = by_tau[i, np.maximum(1 + i - j, 0)]
    overshoot = by_tau[i + 1, np.maximum(2 + i - j, 0)]
    p = np.empty((b, b))
    p[:, : b - 1] = reach - overshoot
    p[:, b - 1] = by_tau[b - 1, b - np.arange(b)]
    np.clip(p, 0.0, 1.0, out=p)
    return p


def stationary_distribution(transition: np.ndarray) -> np.ndarray:
    """Solve ``pi P = pi`` with the last balance equation replaced by ``sum(pi) = 1``.

    Raises
    ------
    StationaryError
        If the system is singular or the residual exceeds 1e-10.
    """
    p = np.asarray(transition, dtype=float)
    n = p.shape[0]
    if n == 1:
        return np.ones(1)
    a = p.T - np.eye(n)
    a[-1, :] = 1.0
    rhs = np.zeros(n)
    rhs[-1] = 1.0
    try:
        pi = np.linalg.solve(a, rhs)
    except np.linalg.LinAlgError as exc:
        raise StationaryError(f"stationary system is singular: {exc}") from None
    pi = np.maximum(pi, 0.0)
    pi /= pi.sum()
    resid = np.max(np.abs(pi @ p - pi))
    if not np.isfinite(resid) or resid > STATIONARY_RESIDUAL_TOL:
        raise StationaryError(f"stationary residual {resid:.3e} exceeds {STATIONARY_RESIDUAL_TOL:g}")
    return pi


def chain_model(params: SystemParams, policy: ThresholdPolicy) -> ChainModel:
    p = build_transition(params, policy)
    return ChainModel(transition=p, stationary=stationary_distribution(p))
