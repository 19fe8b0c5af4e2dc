"""Exact vs Gumbel-approximate dimensioning in the three cost regimes.

With deterministic demand the optimal inventory is a quantile of the maximum
of N exponential backlogs, so everything here is closed form.
"""
from __future__ import annotations

from forkjoin_evt import CostRates, Regime, SystemParams
from forkjoin_evt.approximations import gumbel_indep
from forkjoin_evt.optimize import evaluate_policy, gap_diagnostic, solve_exact_indep

REGIMES = {
    Regime.BALANCED: lambda N: CostRates(1.0, N),
    Regime.QUALITY_DRIVEN: lambda N: CostRates(1.0, N * N),
    Regime.EFFICIENCY_DRIVEN: lambda N: CostRates(N, 1.0),
}


def main():
    for regime, rates_at in REGIMES.items():
        print(f"\n{regime.value}")
        print(f"{'N':>6} {'I*':>9} {'beta*':>9} {'F*':>11} {'I_hat':>9} {'F(hat)':>11} {'scaled gap':>11}")
        for N in (10, 100, 1000):
            p, r = SystemParams(N), rates_at(N)
            exact, hat = solve_exact_indep(p, r), gumbel_indep(p, r)
            f_hat, _ = evaluate_policy(p, r, hat.policy)
            gap = gap_diagnostic(p, r, exact, hat, regime).value
            print(f"{N:>6} {exact.inventory:9.5f} {exact.capacity:9.5f} {exact.cost_f:11.4f} "
                  f"{hat.inventory:9.5f} {f_hat:11.4f} {gap:11.3e}")


if __name__ == "__main__":
    main()
