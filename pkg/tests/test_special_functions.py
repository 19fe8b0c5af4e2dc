from __future__ import annotations

import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from forkjoin_evt import special_functions as sf

mp.mp.dps = 40


def mp_phi(x):
    return float(mp.ncdf(x))


# --- normal ----------------------------------------------------------------

def test_normal_cdf_examples():
    assert sf.std_normal_cdf(0.0) == 0.5
    assert abs(sf.std_normal_cdf(0.67449) - 0.75) < 1e-5
    assert sf.std_normal_cdf(-8.0) < 1e-14


@pytest.mark.parametrize("x", [-12.0, -8.0, -3.3, -1.0, 0.0, 0.4, 2.5, 7.0])
def test_normal_cdf_vs_mpmath(x):
    assert abs(sf.std_normal_cdf(x) - mp_phi(x)) < 1e-12
    assert math.isclose(float(sf.std_normal_sf(x)), float(1 - mp.ncdf(x)), rel_tol=1e-12, abs_tol=1e-300)


def test_normal_quantile_examples():
    assert sf.std_normal_quantile(0.5) == 0.0
    assert abs(sf.std_normal_quantile(0.75) - 0.67449) < 1e-5
    assert abs(sf.std_normal_quantile(10 / 11) - 1.33518) < 1e-4


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, float("nan")])
def test_normal_quantile_domain(p):
    with pytest.raises(ValueError):
        sf.std_normal_quantile(p)


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-12, max_value=1 - 1e-12))
def test_normal_round_trip(p):
    assert abs(sf.std_normal_cdf(sf.std_normal_quantile(p)) - p) < 1e-10


# --- Gumbel ----------------------------------------------------------------

def test_gumbel_examples():
    assert abs(sf.gumbel_cdf(0.0) - math.exp(-1)) < 1e-15
    assert abs(sf.gumbel_quantile(0.5) - 0.366513) < 1e-6
    assert abs(sf.gumbel_quantile(math.exp(-1))) < 1e-15


@settings(max_examples=200, deadline=None)
@given(st.floats(min_value=1e-9, max_value=1 - 1e-9))
def test_gumbel_round_trip(p):
    assert abs(sf.gumbel_cdf(sf.gumbel_quantile(p)) - p) < 1e-12


def test_gumbel_quantile_domain():
    for p in (0.0, 1.0):
        with pytest.raises(ValueError):
            sf.gumbel_quantile(p)


# --- exponential integral --------------------------------------------------

def test_e1_examples():
    quad_1, _ = integrate.quad(lambda t: math.exp(-t) / t, 1, 50)
    assert abs(sf.exp_integral_e1(1.0) - 0.219384) < 1e-6
    assert abs(sf.exp_integral_e1(1.0) - quad_1) < 1e-10
    assert abs(sf.exp_integral_e1(math.log(2)) - 0.37867) < 1e-4
    assert sf.exp_integral_e1(50.0) <= math.exp(-50) / 50


@pytest.mark.parametrize("u", [1e-8, 1e-3, 0.3, 1.0, 2.5, 10.0, 40.0])
def test_e1_vs_mpmath(u):
    assert math.isclose(sf.exp_integral_e1(u), float(mp.e1(u)), rel_tol=1e-10)


@pytest.mark.parametrize("u", [0.0, -1.0])
def test_e1_domain(u):
    with pytest.raises(ValueError):
        sf.exp_integral_e1(u)


def test_e1_decreasing():
    u = np.linspace(0.01, 20, 400)
    v = [sf.exp_integral_e1(x) for x in u]
    assert np.all(np.diff(v) < 0)


@pytest.mark.parametrize("z", [1e-10, 0.1, 1.0, 1.999, 2.0, 2.001, 5.0, 30.0])
def test_ein_vs_mpmath(z):
    ref = float(mp.e1(z) + mp.euler + mp.log(z))
    assert math.isclose(sf.ein(z), ref, rel_tol=1e-13)


# --- partial expectations --------------------------------------------------

def gumbel_tail_quad(a):
    val, _ = integrate.quad(lambda x: -math.expm1(-math.exp(-x)), a, np.inf, epsabs=1e-13, epsrel=1e-13, limit=200)
    return val


def test_gumbel_partial_expectation_examples():
    assert abs(sf.gumbel_partial_expectation(0.0) - 0.796600) < 1e-5
    assert abs(sf.gumbel_partial_expectation(-math.log(math.log(2))) - 0.58937) < 1e-4
    assert abs(sf.gumbel_partial_expectation(-10.0) - 10.57722) < 1e-4


@pytest.mark.parametrize("a", np.linspace(-10, 10, 41))
def test_gumbel_partial_expectation_vs_quadrature(a):
    assert abs(sf.gumbel_partial_expectation(a) - gumbel_tail_quad(a)) < 1e-8


def test_gumbel_partial_expectation_properties():
    a = np.linspace(-30, 30, 601)
    v = np.array([sf.gumbel_partial_expectation(x) for x in a])
    assert np.all(v >= 0)
    assert np.all(v >= sf.EULER_GAMMA - a - 1e-12)
    assert np.all(np.diff(v) < 0)
    assert np.all(np.diff(v, 2) >= -1e-9)
    assert sf.gumbel_partial_expectation(60.0) < 1e-25
    assert sf.gumbel_partial_expectation(-800.0) == pytest.approx(800 + sf.EULER_GAMMA)


def test_normal_partial_expectation_examples():
    assert abs(sf.normal_partial_expectation(0, 1, 0) - 0.398942) < 1e-6
    # z = 0: s / sqrt(2 pi) = 0.2140625 (a quoted 0.214066 is a rounding slip)
    assert abs(sf.normal_partial_expectation(1.151293, 0.536575, 1.151293) - 0.536575 / math.sqrt(2 * math.pi)) < 1e-12
    assert abs(sf.normal_partial_expectation(1.151293, 0.536575, 1.151293) - 0.214066) < 1e-5
    assert abs(sf.normal_partial_expectation(5, 1, -10) - 15) < 1e-12
    with pytest.raises(ValueError):
        sf.normal_partial_expectation(0, 0, 0)


@pytest.mark.parametrize("m,s,I", [(0, 1, 0.5), (1.15, 0.54, 1.5), (2, 3, -1), (0, 0.2, 0.1), (3, 0.7, 5)])
def test_normal_partial_expectation_monte_carlo(m, s, I):
    rng = np.random.default_rng(12345)
    draws = np.maximum(m + s * rng.standard_normal(1_000_000) - I, 0.0)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(sf.normal_partial_expectation(m, s, I) - draws.mean()) < 4 * se


def test_normal_partial_expectation_shape():
    I = np.linspace(-5, 8, 500)
    v = np.array([sf.normal_partial_expectation(1.0, 1.3, x) for x in I])
    assert np.all(v >= np.maximum(0, 1.0 - I) - 1e-14)
    assert np.all(np.diff(v) <= 0)
    assert np.all(np.diff(v, 2) >= -1e-9)


# --- maximum of exponentials ----------------------------------------------

def test_exp_max_cdf_examples():
    assert abs(sf.exp_max_cdf(1, 1, 0.5 * math.log(2)) - 0.5) < 1e-14
    assert abs(sf.exp_max_cdf(10, 1, 1.35178) - 0.5) < 1e-4
    assert sf.exp_max_cdf(10, 1, 0) == 0.0
    x = np.linspace(0.01, 10, 300)
    assert np.all(np.diff([sf.exp_max_cdf(7, 1.3, v) for v in x]) > 0)


def test_exp_max_quantile_examples():
    assert abs(sf.exp_max_quantile(10, 1, 0.5) - 1.35178) < 1e-4
    assert abs(sf.exp_max_quantile(1, 1, 0.5) - 0.346574) < 1e-6
    assert abs(sf.exp_max_quantile(100, 1, 100 / 101) - 4.60768) < 1e-4


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 5000), st.floats(0.1, 3.0), st.floats(1e-6, 1 - 1e-6))
def test_exp_max_round_trip(N, sigma, p):
    x = sf.exp_max_quantile(N, sigma, p)
    assert abs(sf.exp_max_cdf(N, sigma, x) - p) < 1e-10


def test_exp_max_domain():
    with pytest.raises(ValueError):
        sf.exp_max_cdf(0, 1, 1)
    with pytest.raises(ValueError):
        sf.exp_max_cdf(3, -1, 1)
    with pytest.raises(ValueError):
        sf.exp_max_quantile(3, 1, 1.0)
    with pytest.raises(ValueError):
        sf.exp_max_partial_expectation(3, 1, -0.1)
    with pytest.raises(ValueError):
        sf.exp_max_partial_expectation(3, 1, 1.0, method="nope")


def test_exp_max_partial_expectation_examples():
    assert abs(sf.exp_max_partial_expectation(10, 1, 0) - 1.464484) < 1e-6
    assert abs(sf.exp_max_partial_expectation(10, 1, 0) - 0.5 * sf.harmonic_number(10)) < 1e-12
    assert abs(sf.exp_max_partial_expectation(10, 1, 1.35178) - 0.28989) < 5e-4
    for I in (0.0, 0.3, 2.0, 7.5):
        assert math.isclose(sf.exp_max_partial_expectation(1, 1, I), 0.5 * math.exp(-2 * I), rel_tol=1e-13)


def mp_exp_max_pe(N, sigma, I):
    c = mp.mpf(sigma) ** 2 / 2
    y0 = mp.e ** (-mp.mpf(I) / c)
    return float(c * mp.fsum((-1) ** (k + 1) * mp.binomial(N, k) * y0**k / k for k in range(1, N + 1)))


@pytest.mark.parametrize("N", [1, 2, 3, 7, 10, 25, 50, 51, 100, 137, 200])
def test_exp_max_methods_agree(N):
    for I in np.linspace(0, 10, 21):
        s = sf.exp_max_partial_expectation(N, 1.0, I, method="sum")
        b = sf.exp_max_partial_expectation(N, 1.0, I, method="binomial")
        q = sf.exp_max_partial_expectation(N, 1.0, I, method="quad")
        assert abs(b - q) < 1e-8
        assert abs(s - q) < 1e-8


@pytest.mark.parametrize("N,sigma,I", [(5, 1.0, 0.7), (40, 0.8, 1.1), (120, 1.0, 2.0), (200, 1.5, 4.0)])
def test_exp_max_sum_vs_mpmath(N, sigma, I):
    assert abs(sf.exp_max_partial_expectation(N, sigma, I) - mp_exp_max_pe(N, sigma, I)) < 1e-12


def test_exp_max_partial_expectation_shape():
    I = np.linspace(0, 8, 400)
    for N in (1, 10, 300):
        v = np.array([sf.exp_max_partial_expectation(N, 1.0, x) for x in I])
        assert np.all(v >= 0)
        assert np.all(np.diff(v) < 0)
        assert np.all(np.diff(v, 2) >= -1e-9)


def test_harmonic_number():
    assert sf.harmonic_number(0) == 0.0
    assert abs(sf.harmonic_number(10) - 2.928968) < 1e-6
    for n in (9_999, 10_000, 123_456):
        assert math.isclose(sf.harmonic_number(n), float(mp.harmonic(n)), rel_tol=1e-13)


# --- coupling transform ----------------------------------------------------

def test_coupled_gumbel_is_gumbel_of_uniform():
    u = np.linspace(0.001, 0.999, 999)
    x = np.array([sf.exp_max_quantile(25, 1.0, p) for p in u])
    g = sf.coupled_gumbel(25, 1.0, x)
    assert np.allclose(g, [sf.gumbel_quantile(p) for p in u], atol=1e-9)


def test_coupling_gap_positive_decreasing():
    x = np.linspace(0.05, 15, 2000)
    for N in (1, 10, 1000):
        gap = sf.coupling_gap(N, 1.0, x)
        assert np.all(gap > 0)
        assert np.all(np.diff(gap) < 0)


# --- numerics --------------------------------------------------------------

def test_quadrature_config_validation():
    with pytest.raises(ValueError):
        sf.QuadratureConfig(abs_tol=0)
    with pytest.raises(ValueError):
        sf.QuadratureConfig(max_subdivisions=8)


def test_integrate_tail_and_find_root():
    assert abs(sf.integrate_tail(lambda x: math.exp(-x), 1.0) - math.exp(-1)) < 1e-10
    r = sf.find_root(lambda x: x**3 - 2, 10.0, 11.0, xtol=1e-14)
    assert abs(r - 2 ** (1 / 3)) < 1e-12
    with pytest.raises(RuntimeError):
        sf.find_root(lambda x: 1.0, 0.0, 1.0, max_expand=5)


def test_coupling_gap_matches_definition():
    x = np.linspace(0.05, 6, 200)
    for N in (1, 10, 1000):
        direct = x - 0.5 * (sf.coupled_gumbel(N, 1.0, x) + math.log(N))
        assert np.allclose(sf.coupling_gap(N, 1.0, x), direct, atol=1e-12)
    # mpmath oracle at a point where the direct difference cancels badly
    y = mp.e ** (-2 * mp.mpf(14))
    ref = float(mp.log(-mp.log(1 - y) / y) / 2)
    assert math.isclose(float(sf.coupling_gap(10, 1.0, 14.0)), ref, rel_tol=1e-10)
