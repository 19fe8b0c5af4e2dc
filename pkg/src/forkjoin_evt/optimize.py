"""Optimal policies, evaluation under the true backlog law, and gap diagnostics."""
from __future__ import annotations

import math
from dataclasses import dataclass

from . import approximations as approx
from .model import (
    CostRates,
    Method,
    Policy,
    Regime,
    Solution,
    SystemParams,
    capacity_from_cost,
    cost_c_indep,
    total_cost,
)
from .simulate import SimConfig, Stream, estimate_cost_c_dep, estimate_quantile
from .special_functions import exp_max_quantile

__all__ = [
    "solve_exact_indep",
    "solve_dep_simulated",
    "standardized_quantile",
    "evaluate_policy",
    "GapDiagnostic",
    "gap_scale",
    "gap_diagnostic",
    "CBound",
    "cbound_check",
    "approx_cost_ratio",
    "corollary_ratio",
]


def solve_exact_indep(params: SystemParams, rates: CostRates) -> Solution:
    """Exact optimum for deterministic demand: I* is the (1 - gamma) quantile of max Q."""
    if not params.independent:
        raise ValueError("the exact closed form needs sigma_a == 0; use solve_dep_simulated()")
    N = params.N
    I_star = exp_max_quantile(N, params.sigma, 1.0 - rates.gamma(N))
    c_star = cost_c_indep(params, rates, I_star)
    beta = capacity_from_cost(c_star, N)
    return Solution(Policy(I_star, beta), c_star, 2.0 * N * beta, Method.EXACT_INDEP)


def standardized_quantile(params: SystemParams, q: float) -> float:
    """Map a quantile of max Q to the scale of (max Q - sigma^2/2 log N) / (sigma sigma_a / sqrt 2 sqrt(log N))."""
    m, s = approx._normal_center_scale(params)
    return (q - m) / s


def solve_dep_simulated(params: SystemParams, rates: CostRates, cfg: SimConfig, stream: Stream | None = None) -> Solution:
    """Simulated optimum under stochastic demand.

    Sub-streams of ``stream``: child 0 for the quantile, child 1 for C(I) and
    hence beta, child 2 for a fresh estimate of F at the chosen policy.
    """
    if params.independent:
        raise ValueError("solve_dep_simulated needs sigma_a > 0; use solve_exact_indep()")
    stream = stream or Stream.from_config(cfg)
    N = params.N
    I_sim = estimate_quantile(params, 1.0 - rates.gamma(N), cfg, stream.child(0))
    c_sim, _ = estimate_cost_c_dep(params, rates, I_sim, cfg, stream.child(1))
    beta = capacity_from_cost(c_sim, N)
    f, se = evaluate_policy(params, rates, Policy(I_sim, beta), cfg, stream.child(2))
    return Solution(Policy(I_sim, beta), c_sim, f, Method.SIMULATED_DEP, stderr_f=se)


def evaluate_policy(
    params: SystemParams,
    rates: CostRates,
    policy: Policy,
    cfg: SimConfig | None = None,
    stream: Stream | None = None,
) -> tuple[float, float]:
    """(F(I, beta), stderr) under the true backlog law.

    Closed form (stderr 0) when sigma_a == 0; otherwise simulated from ``stream``.
    Evaluating several policies on the same stream uses common random numbers.
    """
    if params.independent:
        c = cost_c_indep(params, rates, policy.inventory)
        return total_cost(c, policy.capacity, params.N), 0.0
    if cfg is None:
        raise ValueError("a SimConfig is needed to evaluate policies when sigma_a > 0")
    stream = stream or Stream.from_config(cfg).child(2)
    c, se = estimate_cost_c_dep(params, rates, policy.inventory, cfg, stream)
    return total_cost(c, policy.capacity, params.N), se / policy.capacity


# --- gap diagnostics -------------------------------------------------------

@dataclass(frozen=True)
class GapDiagnostic:
    """Scaled relative gap with a normal-theory confidence interval.

    The interval uses the delta method on the two F standard errors treated as
    independent; it collapses to a point for closed-form inputs.
    """

    value: float
    stderr: float
    scale: float

    @property
    def ci(self) -> tuple[float, float]:
        return self.value - 1.96 * self.stderr, self.value + 1.96 * self.stderr

    def __float__(self):
        return self.value


def gap_scale(params: SystemParams, rates: CostRates, regime: Regime) -> float:
    N = params.N
    if not params.independent:
        return math.sqrt(math.log(N))
    if regime is Regime.BALANCED:
        return N * math.log(N)
    if regime is Regime.QUALITY_DRIVEN:
        r = N / rates.gamma(N)
        return r * math.log(r)
    if regime is Regime.EFFICIENCY_DRIVEN:
        return math.log(N)
    raise ValueError(f"unknown regime {regime!r}")


def gap_diagnostic(
    params: SystemParams,
    rates: CostRates,
    exact: Solution,
    approx_sol: Solution,
    regime: Regime,
    f_approx: float | None = None,
    stderr_approx: float | None = None,
) -> GapDiagnostic:
    """(1 - F_exact / F_approx) * scale.

    ``F_approx`` must be the approximate policy's cost under the true law, so by
    default it is recomputed in closed form (sigma_a == 0); for dependent
    demand pass the simulated ``f_approx`` and its ``stderr_approx``.
    """
    fe, se = exact.cost_f, exact.stderr_f
    if f_approx is None:
        if not params.independent:
            raise ValueError("pass the simulated f_approx when sigma_a > 0")
        f_approx, stderr_approx = evaluate_policy(params, rates, approx_sol.policy)
    sa = stderr_approx or 0.0
    if not f_approx > 0:
        raise ValueError("approximate cost must be positive")
    scale = gap_scale(params, rates, regime)
    value = (1.0 - fe / f_approx) * scale
    d_fe = -1.0 / f_approx
    d_fa = fe / f_approx**2
    stderr = scale * math.hypot(d_fe * se, d_fa * sa)
    return GapDiagnostic(value, stderr, scale)


# --- cost bounds -----------------------------------------------------------

@dataclass(frozen=True)
class CBound:
    """Both sides of the two cost-gap bounds.

    ``rhs2`` carries the factor ``N h + b`` that the bound's derivation yields;
    ``rhs2_stated`` is the same bound with ``N h`` alone, which fails when b
    dominates N h (e.g. N=10, h=1, b=100).
    """

    lhs1: float
    rhs1: float
    lhs2: float
    rhs2: float
    inventory_gap: float
    rhs2_stated: float = math.nan

    @property
    def holds(self) -> bool:
        return self.lhs1 <= self.rhs1 and self.lhs2 <= self.rhs2 and self.inventory_gap > 0

    @property
    def holds_as_stated(self) -> bool:
        return self.holds and self.lhs2 <= self.rhs2_stated


def cbound_check(params: SystemParams, rates: CostRates, strict: bool = True) -> CBound:
    """Both sides of the two cost-gap bounds between the exact and Gumbel inventories.

    ``lhs1 = |C(I*) - C(I_hat)|`` and ``lhs2 = |C_gumbel(I_hat) - C(I_hat)|``.
    With ``strict`` a violated bound raises ``ArithmeticError``.
    """
    if not params.independent:
        raise ValueError("the cost bounds are for sigma_a == 0")
    N = params.N
    gamma = rates.gamma(N)
    if not gamma < -math.expm1(-N):
        raise ValueError("need gamma < 1 - exp(-N)")
    I_star = exp_max_quantile(N, params.sigma, 1.0 - gamma)
    I_hat = approx.gumbel_indep(params, rates).inventory
    gap = I_star - I_hat
    # (1 + log(1 - gamma)/N)^N, which is P(max Q <= I_hat)
    power = math.exp(N * math.log1p(math.log1p(-gamma) / N))
    c_hat = cost_c_indep(params, rates, I_hat)
    lhs1 = abs(cost_c_indep(params, rates, I_star) - c_hat)
    rhs1 = gap * rates.overshoot_weight(N) * (1.0 - gamma - power)
    lhs2 = abs(approx.gumbel_cost_c(params, rates, I_hat) - c_hat)
    rhs2 = gap * rates.overshoot_weight(N) * (1.0 - power)
    out = CBound(lhs1, rhs1, lhs2, rhs2, gap, rhs2_stated=gap * N * rates.holding * (1.0 - power))
    if strict and not out.holds:
        raise ArithmeticError(f"cost bound violated: {out}")
    return out


def approx_cost_ratio(params: SystemParams, rates: CostRates) -> float:
    """F* / F(I_hat, beta_hat) computed directly from the two policies."""
    exact = solve_exact_indep(params, rates)
    f_hat, _ = evaluate_policy(params, rates, approx.gumbel_indep(params, rates).policy)
    return exact.cost_f / f_hat


def corollary_ratio(params: SystemParams, rates: CostRates) -> float:
    """2 sqrt(C(I*)) sqrt(C_gumbel(I_hat)) / (C(I_hat) + C_gumbel(I_hat))."""
    c_star = solve_exact_indep(params, rates).cost_c
    hat = approx.gumbel_indep(params, rates)
    c_true = cost_c_indep(params, rates, hat.inventory)
    return 2.0 * math.sqrt(c_star) * math.sqrt(hat.cost_c) / (c_true + hat.cost_c)
