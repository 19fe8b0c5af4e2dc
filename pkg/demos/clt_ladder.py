"""How fast does the standardized maximum approach its normal limit?

The spread narrows toward sigma*sigma_a/sqrt(2) only at a sqrt(log N) rate,
which is why the mixed approximation keeps the Gumbel part.
"""
from __future__ import annotations

import numpy as np

from forkjoin_evt import SimConfig, Stream, SystemParams
from forkjoin_evt.simulate import clt_samples

CFG = SimConfig(grid_step=0.01, bridge_correction=True, tail_correction=True)


def main(reps=400):
    target = 1 / np.sqrt(2)
    print(f"{'N':>6} {'sd(z)':>8} {'target':>8} {'mean|z - s x|':>14}")
    for N in (10, 100, 1000):
        z, x = clt_samples(SystemParams(N, 1.0, 1.0), reps, CFG, Stream(CFG.seed)).T
        print(f"{N:>6} {z.std(ddof=1):8.4f} {target:8.4f} {np.mean(np.abs(z - target * x)):14.4f}")


if __name__ == "__main__":
    main()
