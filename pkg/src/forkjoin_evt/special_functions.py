"""Probability kernels shared by the rest of the package.

Normal, Gumbel and maximum-of-exponentials laws, the exponential integral,
partial expectations ``E[(Y - a)^+]`` for each family, and thin wrappers
around adaptive quadrature / bracketing root finders.

Everything here is a pure function of its arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "EULER_GAMMA",
    "QuadratureConfig",
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_quantile",
    "gumbel_cdf",
    "gumbel_quantile",
    "exp_integral_e1",
    "ein",
    "gumbel_partial_expectation",
    "normal_partial_expectation",
    "exp_max_cdf",
    "exp_max_quantile",
    "exp_max_partial_expectation",
    "coupled_gumbel",
    "coupling_gap",
    "harmonic_number",
    "integrate_tail",
    "find_root",
]

EULER_GAMMA = float(np.euler_gamma)
_SQRT_2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    max_subdivisions: int = 200

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("quadrature tolerances must be positive")
        if self.max_subdivisions < 16:
            raise ValueError("max_subdivisions must be >= 16")


DEFAULT_QUAD = QuadratureConfig()


def _open_unit(p, name="p"):
    p = float(p)
    if not 0.0 < p < 1.0:
        raise ValueError(f"{name} must lie strictly inside (0, 1), got {p!r}")
    return p


# --- standard normal -------------------------------------------------------

def std_normal_pdf(x):
    return np.exp(-0.5 * np.square(x)) / _SQRT_2PI


def std_normal_cdf(x):
    """Phi(x). Accepts scalars or arrays."""
    return special.ndtr(x)


def std_normal_sf(x):
    """1 - Phi(x) without cancellation in the upper tail."""
    return special.ndtr(-np.asarray(x, dtype=float))


def std_normal_quantile(p):
    p = _open_unit(p)
    return float(special.ndtri(p))


# --- Gumbel ----------------------------------------------------------------

def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float))) if np.ndim(x) else math.exp(-math.exp(-x))


def gumbel_quantile(p):
    p = _open_unit(p)
    return -math.log(-math.log(p))


def exp_integral_e1(u):
    """E1(u) = int_u^inf e^{-t}/t dt for u > 0."""
    u = float(u)
    if not u > 0.0:
        raise ValueError(f"E1 is only defined here for u > 0, got {u!r}")
    return float(special.exp1(u))


def ein(z):
    """Entire exponential integral Ein(z) = int_0^z (1 - e^{-t})/t dt.

    Uses the alternating power series for small z, where
    ``E1(z) + gamma + log z`` would lose digits to cancellation.
    """
    z = float(z)
    if z < 0.0:
        raise ValueError("ein is used here only for z >= 0")
    if z == 0.0:
        return 0.0
    if z <= 2.0:
        term = z
        total = z
        k = 1
        while abs(term) > 1e-17 * abs(total):
            # term_k = (-1)^{k+1} z^k / k!, summand = term_k / k
            term *= -z / (k + 1)
            k += 1
            total += term / k
        return total
    return exp_integral_e1(z) + EULER_GAMMA + math.log(z)


def gumbel_partial_expectation(a):
    """E[(G - a)^+] for a standard Gumbel G.

    Equals E1(e^{-a}) + Euler-gamma - a, evaluated as Ein(e^{-a}).
    """
    a = float(a)
    if a < -700.0:
        # e^{-a} overflows; (G - a)^+ = G - a to double precision there
        return EULER_GAMMA - a
    return ein(math.exp(-a))


def normal_partial_expectation(m, s, I):
    """E[(m + s X - I)^+] with X standard normal, s > 0."""
    s = float(s)
    if not s > 0.0:
        raise ValueError(f"scale s must be positive, got {s!r}")
    z = (float(I) - float(m)) / s
    if z < 0.0:
        # E[(sX - c)^+] = -c + E[(c - sX)^+]; keeps the small term on the small side
        return s * (-z + float(std_normal_pdf(z)) + z * float(special.ndtr(z)))
    return s * (float(std_normal_pdf(z)) - z * float(special.ndtr(-z)))


# --- maximum of N iid exponentials with mean sigma^2 / 2 -------------------

def _check_n_sigma(N, sigma):
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    return int(N), float(sigma)


def exp_max_cdf(N, sigma, x):
    """P(max of N iid Exp(rate 2/sigma^2) <= x)."""
    N, sigma = _check_n_sigma(N, sigma)
    x = float(x)
    if x <= 0.0:
        return 0.0
    # (1 - e^{-2x/s^2})^N in log space to keep precision for large N
    return math.exp(N * math.log1p(-math.exp(-2.0 * x / sigma**2)))


def exp_max_quantile(N, sigma, p):
    N, sigma = _check_n_sigma(N, sigma)
    p = _open_unit(p)
    # sigma^2/2 * log(1 / (1 - p^{1/N})), with p^{1/N} = exp(log(p)/N)
    return -0.5 * sigma**2 * math.log(-math.expm1(math.log(p) / N))


def _exp_max_tail_sum(N, sigma, I):
    # int_I^inf 1-(1-y)^N dx with y = e^{-2x/s^2}  ==  s^2/2 * sum_j (1-(1-y0)^j)/j
    y0 = math.exp(-2.0 * I / sigma**2)
    j = np.arange(1, N + 1, dtype=float)
    if y0 >= 1.0:
        terms = 1.0 / j
    else:
        terms = -np.expm1(j * math.log1p(-y0)) / j
    return 0.5 * sigma**2 * math.fsum(terms)


def _exp_max_binomial_sum(N, sigma, I):
    # s^2/2 * sum_k C(N,k) (-1)^{k+1} e^{-2kI/s^2} / k; returns (value, worst term / |value|)
    y0 = math.exp(-2.0 * I / sigma**2)
    terms = [
        (-1.0) ** (k + 1) * math.comb(N, k) * y0**k / k for k in range(1, N + 1)
    ]
    value = math.fsum(terms)
    ratio = max(abs(t) for t in terms) / abs(value) if value != 0.0 else math.inf
    return 0.5 * sigma**2 * value, ratio


def _exp_max_quad(N, sigma, I, quad):
    def sf(x):
        return -math.expm1(N * math.log1p(-math.exp(-2.0 * x / sigma**2))) if x > 0 else 1.0

    return integrate_tail(sf, I, quad)


def exp_max_partial_expectation(N, sigma, I, method="sum", quad=DEFAULT_QUAD):
    """E[(max_{i<=N} Q_i - I)^+] for iid exponential Q_i with mean sigma^2/2.

    method
        ``"sum"``: positive-term representation
        ``sigma^2/2 * sum_{j=1}^N (1 - (1 - e^{-2I/sigma^2})^j) / j``; stable for any N.
        ``"binomial"``: alternating inclusion-exclusion sum, falling back to
        quadrature for N > 50 or when the largest term exceeds the result by 1e6.
        ``"quad"``: adaptive quadrature of the tail probability.
    """
    N, sigma = _check_n_sigma(N, sigma)
    I = float(I)
    if I < 0.0:
        raise ValueError(f"inventory I must be >= 0, got {I!r}")
    if method == "sum":
        return _exp_max_tail_sum(N, sigma, I)
    if method == "binomial":
        if N <= 50:
            value, ratio = _exp_max_binomial_sum(N, sigma, I)
            if ratio <= 1e6:
                return value
        return _exp_max_quad(N, sigma, I, quad)
    if method == "quad":
        return _exp_max_quad(N, sigma, I, quad)
    raise ValueError(f"unknown method {method!r}")


def harmonic_number(n):
    n = int(n)
    if n < 1:
        return 0.0
    if n < 10_000:
        return math.fsum(1.0 / np.arange(1, n + 1, dtype=float))
    return float(special.digamma(n + 1) + EULER_GAMMA)


def coupled_gumbel(N, sigma, x):
    """G_N = -log(-log(P_N(x))) with P_N the exp-max cdf; Gumbel distributed when x ~ P_N."""
    N, sigma = _check_n_sigma(N, sigma)
    x = np.asarray(x, dtype=float)
    log_cdf = N * np.log1p(-np.exp(-2.0 * x / sigma**2))
    return -np.log(-log_cdf)


def coupling_gap(N, sigma, x):
    """max Q - sigma^2/2 (G_N + log N) as a function of max Q = x.

    Equals sigma^2/2 * log(-log(1 - y) / y) with y = exp(-2x/sigma^2), which does
    not depend on N; evaluated without the cancellation of the defining difference.
    """
    N, sigma = _check_n_sigma(N, sigma)
    x = np.asarray(x, dtype=float)
    y = np.exp(-2.0 * x / sigma**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = -np.log1p(-y) / y - 1.0
    # -log(1-y)/y - 1 = sum_k y^k / (k + 1); the series avoids losing digits for small y
    series = y * (1.0 / 2 + y * (1.0 / 3 + y * (1.0 / 4 + y * (1.0 / 5 + y / 6))))
    excess = np.where(y < 1e-3, series, direct)
    return 0.5 * sigma**2 * np.log1p(excess)


# --- numerics --------------------------------------------------------------

def integrate_tail(sf: Callable[[float], float], a: float, quad: QuadratureConfig = DEFAULT_QUAD):
    """int_a^inf sf(x) dx for a decreasing tail function sf."""
    value, _ = integrate.quad(
        sf, a, np.inf, epsabs=quad.abs_tol, epsrel=quad.rel_tol, limit=quad.max_subdivisions
    )
    return float(value)


def find_root(f: Callable[[float], float], lo: float, hi: float, xtol=1e-12, expand=2.0, max_expand=60):
    """Root of an increasing function; widens [lo, hi] geometrically until it brackets."""
    flo, fhi = f(lo), f(hi)
    width = hi - lo
    tries = 0
    while flo > 0 or fhi < 0:
        if tries >= max_expand:
            raise RuntimeError(f"could not bracket root; last bracket [{lo}, {hi}] -> ({flo}, {fhi})")
        width *= expand
        if flo > 0:
            lo -= width
            flo = f(lo)
        if fhi < 0:
            hi += width
            fhi = f(hi)
        tries += 1
    if flo == 0:
        return lo
    if fhi == 0:
        return hi
    return optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=500)
