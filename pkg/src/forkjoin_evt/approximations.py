"""Closed and semi-closed approximations of the optimal policy.

Each scheme replaces ``max_i Q_i`` by a tractable law and solves the
resulting newsvendor problem exactly:

* first order:  ``sigma^2/2 log N`` (a point mass),
* Gumbel:       ``sigma^2/2 (G + log N)``, deterministic demand,
* normal:       ``sigma^2/2 log N + sigma sigma_A / sqrt(2) sqrt(log N) X``,
* mixed:        the sum of the Gumbel and normal corrections.

The ``cost_c`` reported on each :class:`~forkjoin_evt.model.Solution` is the
inventory cost under the approximating law, not under the true backlog law;
use :func:`forkjoin_evt.optimize.evaluate_policy` for the latter.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .model import CostRates, Method, Policy, Solution, SystemParams, capacity_from_cost
from .special_functions import (
    find_root,
    gumbel_cdf,
    gumbel_partial_expectation,
    normal_partial_expectation,
    std_normal_pdf,
    std_normal_quantile,
)

__all__ = [
    "MixedQuadConfig",
    "first_order",
    "gumbel_indep",
    "gumbel_cost_c",
    "normal_dep",
    "normal_cost_c",
    "normal_cost_c_closed_form",
    "mixed_scales",
    "mixed_cdf",
    "mixed_overshoot",
    "mixed_cost_c",
    "mixed",
]


@dataclass(frozen=True)
class MixedQuadConfig:
    """Numerical knobs for the mixed approximation.

    ``rule="adaptive"`` integrates over the normal variable with adaptive
    quadrature split at the kink; ``rule="hermite"`` uses Gauss-Hermite with
    ``outer_nodes`` doubled until successive values agree to ``quad_tol``.
    """

    outer_nodes: int = 64
    root_tol: float = 1e-10
    bracket_expansion: float = 2.0
    quad_tol: float = 1e-11
    rule: str = "adaptive"

    def __post_init__(self):
        if self.outer_nodes < 16:
            raise ValueError("outer_nodes must be >= 16")
        if not self.root_tol > 0:
            raise ValueError("root_tol must be positive")
        if not self.bracket_expansion > 1:
            raise ValueError("bracket_expansion must exceed 1")
        if self.rule not in ("adaptive", "hermite"):
            raise ValueError(f"unknown rule {self.rule!r}")


def _finish(params, rates, inventory, cost_c, method):
    beta = capacity_from_cost(cost_c, params.N)
    return Solution(
        policy=Policy(inventory=inventory, capacity=beta),
        cost_c=cost_c,
        cost_f=2.0 * params.N * beta,
        method=method,
    )


def _holding_term(params, rates, I):
    return params.N * rates.holding * (I - params.mean_backlog)


# --- first order -----------------------------------------------------------

def first_order(params: SystemParams, rates: CostRates) -> Solution:
    I_bar = 0.5 * params.sigma**2 * math.log(params.N)
    c_bar = _holding_term(params, rates, I_bar)
    if not c_bar > 0:
        raise ValueError(
            f"first-order cost {c_bar:.6g} <= 0: log N must exceed (sigma^2 + sigma_a^2) / sigma^2"
        )
    return _finish(params, rates, I_bar, c_bar, Method.FIRST_ORDER)


# --- Gumbel, deterministic demand -----------------------------------------

def gumbel_cost_c(params: SystemParams, rates: CostRates, I: float) -> float:
    """Inventory cost with max Q replaced by sigma^2/2 (G + log N)."""
    half_var = 0.5 * params.sigma**2
    a = I / half_var - math.log(params.N)
    overshoot = half_var * gumbel_partial_expectation(a)
    return _holding_term(params, rates, I) + rates.overshoot_weight(params.N) * overshoot


def gumbel_indep(params: SystemParams, rates: CostRates) -> Solution:
    if not params.independent:
        raise ValueError("the Gumbel approximation is for sigma_a == 0; use mixed() otherwise")
    N = params.N
    gamma = rates.gamma(N)
    if not gamma < -math.expm1(-N):
        raise ValueError("need gamma < 1 - exp(-N) for a non-negative Gumbel inventory")
    half_var = 0.5 * params.sigma**2
    u = -math.log1p(-gamma)
    I_hat = half_var * math.log(N) - half_var * math.log(u)
    return _finish(params, rates, I_hat, gumbel_cost_c(params, rates, I_hat), Method.GUMBEL_INDEP)


# --- normal limit, stochastic demand --------------------------------------

def _normal_center_scale(params):
    L = math.log(params.N)
    return 0.5 * params.sigma**2 * L, params.sigma * params.sigma_a / math.sqrt(2.0) * math.sqrt(L)


def normal_cost_c(params: SystemParams, rates: CostRates, I: float) -> float:
    """Inventory cost with max Q replaced by its normal limit."""
    m, s = _normal_center_scale(params)
    overshoot = normal_partial_expectation(m, s, I)
    return _holding_term(params, rates, I) + rates.overshoot_weight(params.N) * overshoot


def normal_cost_c_closed_form(params: SystemParams, rates: CostRates) -> float:
    """The same cost at the optimal normal-limit inventory, with the quantile terms cancelled."""
    N = params.N
    z = std_normal_quantile(1.0 - rates.gamma(N))
    m, _ = _normal_center_scale(params)
    tail = (
        params.sigma * params.sigma_a * math.sqrt(math.log(N)) * math.exp(-0.5 * z * z)
        / (2.0 * math.sqrt(math.pi))
    )
    return N * rates.holding * (m - params.mean_backlog) + rates.overshoot_weight(N) * tail


def normal_dep(params: SystemParams, rates: CostRates) -> Solution:
    if params.independent:
        raise ValueError("the normal limit needs sigma_a > 0; use gumbel_indep() for sigma_a == 0")
    if params.N < 2:
        raise ValueError("the normal limit needs N >= 2")
    m, s = _normal_center_scale(params)
    I_hat = m + s * std_normal_quantile(1.0 - rates.gamma(params.N))
    cost = normal_cost_c_closed_form(params, rates)
    composed = normal_cost_c(params, rates, I_hat)
    if not math.isclose(cost, composed, rel_tol=1e-10, abs_tol=1e-10):
        raise ArithmeticError(f"normal-limit cost mismatch: {cost!r} vs {composed!r}")
    if I_hat < 0:
        raise ValueError(f"normal-limit inventory {I_hat:.6g} is negative for this instance")
    return _finish(params, rates, I_hat, cost, Method.NORMAL_DEP)


# --- mixed Gumbel + normal -------------------------------------------------

def mixed_scales(params: SystemParams):
    """(center, gumbel scale, normal scale) of the mixed law."""
    m, s = _normal_center_scale(params)
    return m, 0.5 * params.sigma**2, s


def _gauss_expect(fn, kink, quad: MixedQuadConfig):
    """E[fn(X)] for standard normal X; fn may bend sharply near ``kink``."""
    if quad.rule == "hermite":
        n = quad.outer_nodes
        prev = None
        while n <= 4096:
            x, w = special.roots_hermitenorm(n)
            val = float(np.dot(w, [fn(xi) for xi in x])) / math.sqrt(2.0 * math.pi)
            if prev is not None and abs(val - prev) <= quad.quad_tol * max(1.0, abs(val)):
                return val
            prev, n = val, 2 * n
        raise ArithmeticError("Gauss-Hermite did not converge; use rule='adaptive'")

    def integrand(x):
        return fn(x) * float(std_normal_pdf(x))

    # normal mass beyond |x| = 40 is below 1e-340; fixed breakpoints keep the bulk resolved
    points = sorted({-8.0, -4.0, -2.0, 0.0, 2.0, 4.0, 8.0} | ({kink} if abs(kink) < 40.0 else set()))
    value, _ = integrate.quad(
        integrand, -40.0, 40.0, points=points, epsabs=quad.quad_tol, epsrel=quad.quad_tol, limit=400
    )
    return value


def mixed_cdf(params: SystemParams, I: float, quad: MixedQuadConfig | None = None) -> float:
    """P(sigma^2/2 G + sigma^2/2 log N + s X <= I) for independent Gumbel G, normal X."""
    quad = quad or MixedQuadConfig()
    m, g, s = mixed_scales(params)
    if s == 0.0:
        return gumbel_cdf((I - m) / g)

    def cond(x):
        arg = (I - m - s * x) / g
        return math.exp(-math.exp(-arg)) if arg > -700.0 else 0.0

    return _gauss_expect(cond, (I - m) / s, quad)


def mixed_overshoot(params: SystemParams, I: float, quad: MixedQuadConfig | None = None) -> float:
    """E[(sigma^2/2 G + sigma^2/2 log N + s X - I)^+].

    Conditioning on X leaves a Gumbel partial expectation, which is closed form.
    """
    quad = quad or MixedQuadConfig()
    m, g, s = mixed_scales(params)
    if s == 0.0:
        return g * gumbel_partial_expectation((I - m) / g)

    def cond(x):
        return g * gumbel_partial_expectation((I - m - s * x) / g)

    return _gauss_expect(cond, (I - m) / s, quad)


def mixed_cost_c(params: SystemParams, rates: CostRates, I: float, quad: MixedQuadConfig | None = None) -> float:
    return _holding_term(params, rates, I) + rates.overshoot_weight(params.N) * mixed_overshoot(params, I, quad)


def mixed(params: SystemParams, rates: CostRates, quad: MixedQuadConfig | None = None) -> Solution:
    if params.N < 2:
        raise ValueError("the mixed approximation needs N >= 2")
    quad = quad or MixedQuadConfig()
    target = 1.0 - rates.gamma(params.N)
    m, g, s = mixed_scales(params)
    spread = g * math.pi / math.sqrt(6.0) + s
    I_mix = find_root(
        lambda I: mixed_cdf(params, I, quad) - target,
        m - 5.0 * spread,
        m + 5.0 * spread,
        xtol=quad.root_tol,
        expand=quad.bracket_expansion,
    )
    if I_mix < 0:
        raise ValueError(f"mixed inventory {I_mix:.6g} is negative for this instance")
    cost = mixed_cost_c(params, rates, I_mix, quad)
    return _finish(params, rates, I_mix, cost, Method.MIXED)
