from __future__ import annotations

import math

import numpy as np
import pytest
from scipy import integrate

from forkjoin_evt import approximations as ap
from forkjoin_evt import special_functions as sf
from forkjoin_evt.model import CostRates, Method, SystemParams


def test_first_order_examples():
    sol = ap.first_order(SystemParams(10), CostRates(1, 10))
    assert sol.inventory == pytest.approx(1.151293, abs=1e-6)
    assert sol.cost_c == pytest.approx(6.51293, abs=1e-5)
    assert sol.capacity == pytest.approx(0.80703, abs=1e-5)
    assert sol.cost_f == pytest.approx(2 * 10 * sol.capacity, rel=1e-12)
    assert sol.method is Method.FIRST_ORDER and sol.stderr_f == 0
    with pytest.raises(ValueError):
        ap.first_order(SystemParams(2, 1, 1), CostRates(1, 2))


def test_gumbel_indep_examples():
    sol = ap.gumbel_indep(SystemParams(10), CostRates(1, 10))
    assert abs(sol.inventory - 1.33455) < 1e-4
    assert abs(sol.capacity - 1.19328) < 1e-4
    assert abs(ap.gumbel_indep(SystemParams(10), CostRates(1, 100)).inventory - 2.3266) < 1e-4


def test_gumbel_indep_gamma_at_one_minus_inverse_e():
    # gamma = N h / (N h + b) = 1 - 1/e  when  b = N h (1/gamma - 1)
    N, sigma = 40, 1.4
    gamma = -math.expm1(-1.0)
    sol = ap.gumbel_indep(SystemParams(N, sigma), CostRates(1.0, N * (1 / gamma - 1)))
    assert sol.inventory == pytest.approx(0.5 * sigma**2 * math.log(N), rel=1e-12)


def test_gumbel_indep_domain():
    with pytest.raises(ValueError):
        ap.gumbel_indep(SystemParams(10, 1, 0.3), CostRates(1, 10))
    # gamma = 1 - 1e-6 exceeds 1 - exp(-2)
    with pytest.raises(ValueError):
        ap.gumbel_indep(SystemParams(2), CostRates(1e6, 2))


def test_gumbel_expectation_matches_quadrature():
    p, r = SystemParams(10), CostRates(1, 10)
    I = ap.gumbel_indep(p, r).inventory
    a = 2 * I - math.log(10)
    tail, _ = integrate.quad(lambda x: -math.expm1(-math.exp(-x)), a, np.inf, epsabs=1e-13, epsrel=1e-13)
    expected = 10 * (I - 0.5) + 20 * 0.5 * tail
    assert ap.gumbel_cost_c(p, r, I) == pytest.approx(expected, abs=1e-8)


def test_normal_dep_examples():
    sol = ap.normal_dep(SystemParams(10, 1, 0.5), CostRates(1, 10))
    assert abs(sol.inventory - 1.15129) < 1e-5
    assert abs(sol.capacity - 0.976909) < 1e-5
    assert abs(ap.normal_dep(SystemParams(10, 1, 0.5), CostRates(1, 30)).inventory - 1.51315) < 1e-4
    for sa in (0.1, 0.8, 2.0):
        sol = ap.normal_dep(SystemParams(37, 1.2, sa), CostRates(1, 37))
        assert sol.inventory == pytest.approx(0.72 * math.log(37), rel=1e-14)
    with pytest.raises(ValueError):
        ap.normal_dep(SystemParams(10), CostRates(1, 10))
    with pytest.raises(ValueError):
        ap.normal_dep(SystemParams(1, 1, 0.5), CostRates(1, 10))


@pytest.mark.parametrize("N", [2, 10, 100, 5000])
@pytest.mark.parametrize("sa", [0.1, 0.5, 1.0, 3.0])
@pytest.mark.parametrize("bfac", [0.1, 1.0, 3.0, 50.0])
def test_normal_cost_identity(N, sa, bfac):
    p, r = SystemParams(N, 1.1, sa), CostRates(1.0, bfac * N)
    m, s = ap._normal_center_scale(p)
    I = m + s * sf.std_normal_quantile(1 - r.gamma(N))
    composed = ap.normal_cost_c(p, r, I)
    closed = ap.normal_cost_c_closed_form(p, r)
    assert closed == pytest.approx(composed, rel=1e-10, abs=1e-10)


def test_mixed_cdf_examples():
    p = SystemParams(10, 1, 0.5)
    assert abs(ap.mixed_cdf(p, 1.38072) - 0.5) < 1e-3
    assert ap.mixed_cdf(p, -50.0) < 1e-12
    assert ap.mixed_cdf(p, 60.0) > 1 - 1e-12
    # near-degenerate demand collapses to the Gumbel cdf
    tiny = SystemParams(10, 1, 1e-9)
    I_med = 0.5 * (math.log(10) + sf.gumbel_quantile(0.5))
    assert ap.mixed_cdf(tiny, I_med) == pytest.approx(0.5, abs=1e-9)


def test_mixed_cdf_increasing():
    p = SystemParams(50, 1, 0.75)
    I = np.linspace(-1, 8, 200)
    v = np.array([ap.mixed_cdf(p, x) for x in I])
    assert np.all(np.diff(v) > 0)
    assert np.all((v > 0) & (v < 1))


def test_mixed_examples():
    sol = ap.mixed(SystemParams(10, 1, 0.5), CostRates(1, 10))
    assert abs(sol.inventory - 1.38072) < 1e-3 and abs(sol.capacity - 1.21129) < 1e-3
    sol = ap.mixed(SystemParams(100, 1, 0.5), CostRates(1, 300))
    assert abs(sol.inventory - 3.21861) < 1e-3 and abs(sol.capacity - 1.8044) < 1e-3
    with pytest.raises(ValueError):
        ap.mixed(SystemParams(1, 1, 0.5), CostRates(1, 1))


def test_mixed_quantile_consistency():
    for N, sa, b in [(10, 0.5, 10), (50, 1.0, 150), (100, 0.1, 100)]:
        p, r = SystemParams(N, 1, sa), CostRates(1, b)
        sol = ap.mixed(p, r)
        assert ap.mixed_cdf(p, sol.inventory) == pytest.approx(1 - r.gamma(N), abs=1e-9)


@pytest.mark.parametrize("N", [10, 50, 100])
@pytest.mark.parametrize("b", ["N", "3N"])
def test_mixed_degenerates_to_gumbel(N, b):
    r = CostRates(1, N if b == "N" else 3 * N)
    g = ap.gumbel_indep(SystemParams(N), r)
    m = ap.mixed(SystemParams(N, 1, 1e-8), r)
    assert m.inventory == pytest.approx(g.inventory, rel=1e-4)
    assert m.cost_c == pytest.approx(g.cost_c, rel=1e-4)
    assert m.capacity == pytest.approx(g.capacity, rel=1e-4)


def test_hermite_agrees_with_adaptive():
    p, r = SystemParams(50, 1, 0.75), CostRates(1, 50)
    a = ap.mixed(p, r)
    h = ap.mixed(p, r, ap.MixedQuadConfig(rule="hermite"))
    assert h.inventory == pytest.approx(a.inventory, rel=1e-8)
    assert h.cost_c == pytest.approx(a.cost_c, rel=1e-8)


def test_mixed_quad_config_validation():
    for kw in [dict(outer_nodes=8), dict(root_tol=0), dict(bracket_expansion=1.0), dict(rule="simpson")]:
        with pytest.raises(ValueError):
            ap.MixedQuadConfig(**kw)


@pytest.mark.parametrize("N,sa", [(10, 0.5), (50, 1.0), (100, 0.1)])
def test_mixed_monte_carlo_oracle(N, sa):
    p = SystemParams(N, 1, sa)
    rng = np.random.default_rng(2024 + N)
    n = 1_000_000
    m, g, s = ap.mixed_scales(p)
    draws = m + g * rng.gumbel(size=n) + s * rng.standard_normal(n)
    for I in (m - 0.5, m + 0.3, m + 1.5):
        ind = draws <= I
        se = ind.std() / math.sqrt(n)
        assert abs(ap.mixed_cdf(p, I) - ind.mean()) < 4 * se
        over = np.maximum(draws - I, 0.0)
        se = over.std() / math.sqrt(n)
        assert abs(ap.mixed_overshoot(p, I) - over.mean()) < 4 * se
