"""System parameters, monotone threshold policies and their validation."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

__all__ = [
    "PolicyError",
    "LengthMismatchError",
    "MonotonicityError",
    "InvalidThresholdError",
    "SystemParams",
    "ThresholdPolicy",
    "PolicyEvaluation",
    "validate_policy",
    "system_to_dict",
    "system_from_dict",
    "dumps_system",
    "loads_system",
]


class PolicyError(ValueError):
    """Base class for rejected parameters or policies."""


class LengthMismatchError(PolicyError):
    pass


class MonotonicityError(PolicyError):
    pass


class InvalidThresholdError(PolicyError):
    """A threshold is negative, NaN or infinite."""


@dataclass(frozen=True)
class SystemParams:
    """Poisson harvesting rate ``mu_h`` and battery capacity ``battery`` (units of energy)."""

    mu_h: float
    battery: int

    def __post_init__(self):
        if isinstance(self.mu_h, bool) or not isinstance(self.mu_h, (int, float)):
            raise PolicyError(f"mu_h must be a number, got {self.mu_h!r}")
        if not (math.isfinite(self.mu_h) and self.mu_h > 0):
            raise PolicyError(f"mu_h must be positive and finite, got {self.mu_h!r}")
        if isinstance(self.battery, bool) or int(self.battery) != self.battery:
            raise PolicyError(f"battery must be an integer, got {self.battery!r}")
        if self.battery < 1:
            raise PolicyError(f"battery must be >= 1, got {self.battery!r}")
        object.__setattr__(self, "mu_h", float(self.mu_h))
        object.__setattr__(self, "battery", int(self.battery))


@dataclass(frozen=True)
class ThresholdPolicy:
    """Age thresholds ``taus[0] = tau_1, ..., taus[B-1] = tau_B``.

    ``taus[l - 1]`` is the threshold used while the battery holds ``l``
    units. Construction does not validate; see :func:`validate_policy`.
    """

    taus: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "taus", tuple(float(t) for t in self.taus))

    def tau(self, level: int) -> float:
        """Threshold at battery ``level`` (1-based); level 0 never fires."""
        if level <= 0:
            return math.inf
        return self.taus[level - 1]

    @property
    def size(self) -> int:
        return len(self.taus)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.taus, dtype=float)


@dataclass(frozen=True)
class PolicyEvaluation:
    """Steady-state renewal quantities of a policy.

    Index ``j`` of every per-state vector is the post-update battery level.
    """

    cond_mean: tuple[float, ...]
    cond_second: tuple[float, ...]
    stationary: tuple[float, ...]
    mean_cycle: float
    avg_age: float
    extras: dict = field(default_factory=dict, compare=False, repr=False)

    def to_dict(self) -> dict:
        return {
            "avg_age": self.avg_age,
            "cond_mean": list(self.cond_mean),
            "cond_second": list(self.cond_second),
            "stationary": list(self.stationary),
            "mean_cycle": self.mean_cycle,
        }


def validate_policy(params: SystemParams, policy: ThresholdPolicy | Sequence[float]) -> ThresholdPolicy:
    """Check that ``policy`` is a monotone threshold policy for ``params``.

    Returns the policy (as a :class:`ThresholdPolicy`) on success.

    Raises
    ------
    LengthMismatchError
        If the number of thresholds differs from the battery size.
    InvalidThresholdError
        If any threshold is negative or non-finite.
    MonotonicityError
        If ``tau_{l+1} > tau_l`` for some level.
    """
    if not isinstance(policy, ThresholdPolicy):
        policy = ThresholdPolicy(tuple(policy))
    taus = policy.taus
    if len(taus) != params.battery:
        raise LengthMismatchError(
            f"expected {params.battery} thresholds (one per battery level), got {len(taus)}"
        )
    for level, t in enumerate(taus, start=1):
        if not math.isfinite(t) or t < 0:
            raise InvalidThresholdError(f"tau_{level} must be finite and >= 0, got {t!r}")
    for level in range(1, len(taus)):
        if taus[level] > taus[level - 1]:
            raise MonotonicityError(
                f"thresholds must be nonincreasing in battery level: "
                f"tau_{level + 1}={taus[level]!r} > tau_{level}={taus[level - 1]!r}"
            )
    return policy


def system_to_dict(params: SystemParams, policy: ThresholdPolicy | None = None) -> dict:
    out = {"mu_h": params.mu_h, "battery": params.battery}
    if policy is not None:
        out["taus"] = list(policy.taus)
    return out


def system_from_dict(data: dict) -> tuple[SystemParams, ThresholdPolicy | None]:
    """Parse ``{"mu_h": ..., "battery": ..., "taus": [...]}``; ``taus`` is optional."""
    if not isinstance(data, dict):
        raise PolicyError("expected a JSON object with keys mu_h, battery, taus")
    unknown = set(data) - {"mu_h", "battery", "taus"}
    if unknown:
        raise PolicyError(f"unknown field(s): {', '.join(sorted(unknown))}")
    missing = {"mu_h", "battery"} - set(data)
    if missing:
        raise PolicyError(f"missing field(s): {', '.join(sorted(missing))}")
    params = SystemParams(data["mu_h"], data["battery"])
    policy = None
    if "taus" in data:
        taus = data["taus"]
        if not isinstance(taus, list) or not all(
            isinstance(t, (int, float)) and not isinstance(t, bool) for t in taus
        ):
            raise PolicyError("taus must be a list of numbers")
        policy = validate_policy(params, ThresholdPolicy(tuple(taus)))
    return params, policy


def dumps_system(params: SystemParams, policy: ThresholdPolicy | None = None) -> str:
    return json.dumps(system_to_dict(params, policy))


def loads_system(text: str) -> tuple[SystemParams, ThresholdPolicy | None]:
    return system_from_dict(json.loads(text))
