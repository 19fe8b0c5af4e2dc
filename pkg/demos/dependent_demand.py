"""Stochastic demand: normal-limit and mixed policies against a simulated optimum.

Uses a coarse grid with bridge and tail corrections so it runs in well under a
minute; the plain 0.001 grid used for the published tables is slower.
"""
from __future__ import annotations

import time

from forkjoin_evt import CostRates, SimConfig, Stream, SystemParams
from forkjoin_evt.approximations import mixed, normal_dep
from forkjoin_evt.model import Regime
from forkjoin_evt.optimize import evaluate_policy, gap_diagnostic, solve_dep_simulated

CFG = SimConfig(grid_step=0.01, bridge_correction=True, tail_correction=True,
                quantile_reps=40, overshoot_reps=4000)


def main(N=10):
    print(f"N={N}, sigma=1, h=1, b=N")
    for sa in (0.1, 0.5, 1.0):
        t0 = time.perf_counter()
        p, r = SystemParams(N, 1.0, sa), CostRates(1.0, N)
        stream = Stream(CFG.seed)
        sim = solve_dep_simulated(p, r, CFG, stream)
        line = f"  sigma_a={sa:<4} simulated I={sim.inventory:.4f} F={sim.cost_f:.3f}+-{sim.stderr_f:.3f}"
        for name, sol in (("normal", normal_dep(p, r)), ("mixed", mixed(p, r))):
            # same sub-stream as the simulated optimum's evaluation: common random numbers
            f, se = evaluate_policy(p, r, sol.policy, CFG, stream.child(2))
            g = gap_diagnostic(p, r, sim, sol, Regime.BALANCED, f, se)
            line += f" | {name} I={sol.inventory:.4f} F={f:.3f} gap={g.value:.4f}"
        print(line + f"  [{time.perf_counter() - t0:.1f}s]")


if __name__ == "__main__":
    main()
