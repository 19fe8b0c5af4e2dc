"""Domain types and the cost functional of the fork-join dimensioning problem.

All inventories live in capacity-normalised units: a policy ``(I, beta)``
keeps ``I / beta`` physical units of stock, and the backlog law used for
costs is that of the queues at unit capacity, ``Q_i = sup_s (W_i(s) + W_A(s) - s)``.
The total cost of a policy is then ``F(I, beta) = C(I) / beta + beta * N``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .special_functions import exp_max_partial_expectation

__all__ = [
    "SystemParams",
    "CostRates",
    "Regime",
    "Method",
    "Policy",
    "Solution",
    "gamma_of",
    "cost_c_indep",
    "total_cost",
    "capacity_from_cost",
    "classify_regime",
]


@dataclass(frozen=True)
class SystemParams:
    """N component queues driven by volatility ``sigma`` and shared demand volatility ``sigma_a``."""

    n_components: int
    sigma: float = 1.0
    sigma_a: float = 0.0

    def __post_init__(self):
        if int(self.n_components) != self.n_components or self.n_components < 1:
            raise ValueError(f"n_components must be a positive integer, got {self.n_components!r}")
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma!r}")
        if not self.sigma_a >= 0:
            raise ValueError(f"sigma_a must be non-negative, got {self.sigma_a!r}")
        object.__setattr__(self, "n_components", int(self.n_components))
        object.__setattr__(self, "sigma", float(self.sigma))
        object.__setattr__(self, "sigma_a", float(self.sigma_a))

    @property
    def N(self) -> int:
        return self.n_components

    @property
    def independent(self) -> bool:
        return self.sigma_a == 0.0

    @property
    def mean_backlog(self) -> float:
        """E[Q_i] at unit capacity: the sup of drifted BM is exponential with this mean."""
        return 0.5 * (self.sigma**2 + self.sigma_a**2)


@dataclass(frozen=True)
class CostRates:
    holding: float
    backorder: float

    def __post_init__(self):
        if not (self.holding > 0 and self.backorder > 0):
            raise ValueError("holding and backorder rates must be positive")
        object.__setattr__(self, "holding", float(self.holding))
        object.__setattr__(self, "backorder", float(self.backorder))

    def gamma(self, N: int) -> float:
        nh = N * self.holding
        return nh / (nh + self.backorder)

    def overshoot_weight(self, N: int) -> float:
        """Coefficient N*h + b of the expected backorder term."""
        return N * self.holding + self.backorder


class Regime(enum.Enum):
    BALANCED = "Balanced"
    QUALITY_DRIVEN = "QualityDriven"
    EFFICIENCY_DRIVEN = "EfficiencyDriven"


class Method(enum.Enum):
    EXACT_INDEP = "ExactIndep"
    FIRST_ORDER = "FirstOrder"
    GUMBEL_INDEP = "GumbelIndep"
    NORMAL_DEP = "NormalDep"
    MIXED = "Mixed"
    SIMULATED_DEP = "SimulatedDep"


@dataclass(frozen=True)
class Policy:
    inventory: float
    capacity: float

    def __post_init__(self):
        if not self.inventory >= 0:
            raise ValueError(f"inventory must be >= 0, got {self.inventory!r}")
        if not self.capacity > 0:
            raise ValueError(f"capacity must be > 0, got {self.capacity!r}")

    @property
    def physical_inventory(self) -> float:
        return self.inventory / self.capacity


@dataclass(frozen=True)
class Solution:
    """A policy with its cost decomposition.

    ``cost_c`` is C(I) under whatever law produced the solution (the exact law,
    an approximating law, or a simulation); ``cost_f`` is the matching total
    cost. ``stderr_f`` is zero for deterministic methods.
    """

    policy: Policy
    cost_c: float
    cost_f: float
    method: Method
    stderr_f: float = 0.0

    @property
    def inventory(self) -> float:
        return self.policy.inventory

    @property
    def capacity(self) -> float:
        return self.policy.capacity


def gamma_of(params: SystemParams, rates: CostRates) -> float:
    return rates.gamma(params.N)


def cost_c_indep(params: SystemParams, rates: CostRates, I: float, method: str = "sum") -> float:
    """C_N(I) = N h (I - sigma^2/2) + (N h + b) E[(max Q_i - I)^+] for deterministic demand."""
    if not params.independent:
        raise ValueError("closed-form cost needs sigma_a == 0; use simulation or an approximation")
    N = params.N
    overshoot = exp_max_partial_expectation(N, params.sigma, I, method=method)
    return N * rates.holding * (I - params.mean_backlog) + rates.overshoot_weight(N) * overshoot


def total_cost(c: float, beta: float, N: int) -> float:
    if not beta > 0:
        raise ValueError(f"capacity must be positive, got {beta!r}")
    return c / beta + beta * N


def capacity_from_cost(c: float, N: int) -> float:
    """Minimiser of ``c / beta + beta N`` over beta."""
    if not c > 0:
        raise ValueError(f"inventory cost must be positive to define a capacity, got {c!r}")
    return math.sqrt(c / N)


def classify_regime(gamma_limit: float) -> Regime:
    if not 0.0 <= gamma_limit <= 1.0:
        raise ValueError(f"limiting fractile must lie in [0, 1], got {gamma_limit!r}")
    if gamma_limit == 0.0:
        return Regime.QUALITY_DRIVEN
    if gamma_limit == 1.0:
        return Regime.EFFICIENCY_DRIVEN
    return Regime.BALANCED
