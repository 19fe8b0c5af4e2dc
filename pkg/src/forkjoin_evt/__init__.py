"""Capacity and inventory dimensioning for large Brownian fork-join systems.

The maximum of N component backlogs drives the end-product backorders; this
package computes its exact law for deterministic demand, extreme-value
approximations (first order, Gumbel, normal, mixed) and a Monte Carlo engine
for stochastic demand, and uses them to size inventory and capacity.
"""
from .approximations import MixedQuadConfig, first_order, gumbel_indep, mixed, normal_dep
from .model import (
    CostRates,
    Method,
    Policy,
    Regime,
    Solution,
    SystemParams,
    capacity_from_cost,
    classify_regime,
    cost_c_indep,
    gamma_of,
    total_cost,
)
from .optimize import (
    cbound_check,
    evaluate_policy,
    gap_diagnostic,
    solve_dep_simulated,
    solve_exact_indep,
)
from .simulate import SimConfig, Stream

__version__ = "0.1.0"

__all__ = [
    "CostRates",
    "Method",
    "MixedQuadConfig",
    "Policy",
    "Regime",
    "SimConfig",
    "Solution",
    "Stream",
    "SystemParams",
    "capacity_from_cost",
    "cbound_check",
    "classify_regime",
    "cost_c_indep",
    "evaluate_policy",
    "first_order",
    "gamma_of",
    "gap_diagnostic",
    "gumbel_indep",
    "mixed",
    "normal_dep",
    "solve_dep_simulated",
    "solve_exact_indep",
    "total_cost",
]
