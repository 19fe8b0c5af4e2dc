"""Monte Carlo engine for the maximum backlog of a fork-join system.

Each replication simulates ``X_i(t) = W_i(t) + W_A(t) - t`` for ``i <= N`` on a
uniform grid, with one shared demand increment and N component increments
per step, and records the running maximum over components and grid times.

Streams
-------
Every replication draws from its own counter-based generator (Philox keyed by
``SeedSequence(seed, spawn_key=(*stream.key, rep))``), so a sample depends only
on ``(seed, key, rep)`` and never on how replications are scheduled over
workers.  Callers carve independent sub-streams with :meth:`Stream.child`.
"""
from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from scipy import stats

from .model import CostRates, SystemParams
from .special_functions import harmonic_number

__all__ = [
    "SimConfig",
    "Stream",
    "MaxSample",
    "SamplePool",
    "SimulationBudgetError",
    "attainment_scale",
    "early_stop_default",
    "sample_max_backlog",
    "sample_pool",
    "clear_pool_cache",
    "zielinski_weights",
    "median_unbiased_quantile",
    "estimate_quantile",
    "estimate_overshoot",
    "estimate_cost_c_dep",
    "clt_samples",
    "write_samples_csv",
    "read_samples_csv",
    "worker_count",
]

THREADS_ENV = "FORKJOIN_EVT_THREADS"
SAMPLE_COLUMNS = ("rep_index", "max_backlog", "demand_at_d", "argmax_time", "truncated_flag")


class SimulationBudgetError(RuntimeError):
    """Raised when a replication would need more grid work than allowed."""


@dataclass(frozen=True)
class SimConfig:
    """Grid and replication settings.

    ``bridge_correction`` replaces each grid step by the exact maximum of a
    Brownian bridge between its endpoints and ``tail_correction`` adds the
    exact overshoot beyond the horizon; both are exact for ``sigma_a == 0``
    and approximate otherwise, and both are off by default.
    ``early_stop_slack=None`` selects the default slack from
    :func:`early_stop_default`; ``math.inf`` disables early stopping.
    ``quantile_method`` is ``"zielinski"`` (randomised, median-unbiased) or
    ``"interpolate"`` (fractional order statistic).
    """

    grid_step: float = 0.001
    horizon_factor: float = 2.0
    early_stop_slack: float | None = None
    quantile_batch: int = 100
    quantile_reps: int = 100
    overshoot_reps: int = 10_000
    seed: int = 20240607
    bridge_correction: bool = False
    tail_correction: bool = False
    quantile_method: str = "zielinski"
    step_budget: float = 5e7
    chunk_steps: int = 512
    workers: int | None = None

    def __post_init__(self):
        if not self.grid_step > 0:
            raise ValueError(f"grid_step must be positive, got {self.grid_step!r}")
        if not self.horizon_factor >= 1:
            raise ValueError(f"horizon_factor must be >= 1, got {self.horizon_factor!r}")
        if self.early_stop_slack is not None and not self.early_stop_slack > 0:
            raise ValueError("early_stop_slack must be positive (or None for the default)")
        for name in ("quantile_batch", "quantile_reps", "overshoot_reps", "chunk_steps"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if self.workers is not None and self.workers < 1:
            raise ValueError("workers must be >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.quantile_method not in ("zielinski", "interpolate"):
            raise ValueError(f"unknown quantile_method {self.quantile_method!r}")
        if not self.step_budget > 0:
            raise ValueError("step_budget must be positive")


@dataclass(frozen=True)
class Stream:
    """Address of an independent family of replication streams."""

    seed: int
    key: tuple[int, ...] = ()

    def child(self, index: int) -> "Stream":
        return Stream(self.seed, self.key + (int(index),))

    def generator(self, rep: int) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.seed), spawn_key=self.key + (int(rep),))
        return np.random.Generator(np.random.Philox(ss))

    @classmethod
    def from_config(cls, cfg: SimConfig) -> "Stream":
        return cls(int(cfg.seed))


@dataclass(frozen=True)
class MaxSample:
    max_backlog: float
    demand_at_d: float
    argmax_time: float = 0.0
    truncated: bool = False


@dataclass(frozen=True)
class SamplePool:
    """Column store of replications ``0..n-1`` drawn from one stream."""

    max_backlog: np.ndarray
    demand_at_d: np.ndarray
    argmax_time: np.ndarray
    truncated: np.ndarray

    def __len__(self):
        return len(self.max_backlog)

    @property
    def truncation_rate(self) -> float:
        return float(np.mean(self.truncated)) if len(self) else 0.0


def attainment_scale(params: SystemParams) -> float:
    """t-hat = (sigma^2 + sigma_a^2)/2 * H_N, the scale of the time the maximum is attained."""
    return params.mean_backlog * harmonic_number(params.N)


def early_stop_default(params: SystemParams) -> float:
    """Slack with N exp(-2 slack / (sigma^2 + sigma_a^2)) = 1e-6."""
    return params.mean_backlog * math.log(params.N / 1e-6)


def worker_count(cfg: SimConfig) -> int:
    n = cfg.workers or (os.cpu_count() or 1)
    cap = os.environ.get(THREADS_ENV)
    if cap:
        try:
            n = min(n, max(1, int(cap)))
        except ValueError:
            raise ValueError(f"{THREADS_ENV} must be an integer, got {cap!r}") from None
    return max(1, n)


# --- one replication -------------------------------------------------------

def _grid(params, cfg):
    horizon = cfg.horizon_factor * attainment_scale(params)
    n_steps = max(1, int(math.ceil(horizon / cfg.grid_step - 1e-9)))
    if n_steps * params.N > cfg.step_budget:
        raise SimulationBudgetError(
            f"N * steps = {params.N} * {n_steps} exceeds step_budget {cfg.step_budget:g}"
        )
    d_time = 0.5 * params.sigma**2 * math.log(params.N)
    k_d = int(round(d_time / cfg.grid_step))
    return n_steps, min(k_d, n_steps)


def _bridge_max(prev, cur, var_step, rng):
    # max of a Brownian bridge from prev to cur with variance var_step over the step
    u = rng.random(cur.shape)
    return 0.5 * (prev + cur + np.sqrt(np.square(cur - prev) - 2.0 * var_step * np.log(u)))


def _simulate_one(params: SystemParams, cfg: SimConfig, rng: np.random.Generator, n_steps: int, k_d: int):
    N = params.N
    h = cfg.grid_step
    comp_scale = params.sigma * math.sqrt(h)
    dem_scale = params.sigma_a * math.sqrt(h)
    with_demand = params.sigma_a > 0.0
    slack = early_stop_default(params) if cfg.early_stop_slack is None else cfg.early_stop_slack
    var_step = (params.sigma**2 + params.sigma_a**2) * h

    level = np.zeros(N)  # unscaled component sums
    demand = 0.0
    best, best_k = 0.0, 0
    demand_d = 0.0 if k_d == 0 else None
    prev_x = np.zeros(N)
    k0 = 0
    while k0 < n_steps:
        m = min(cfg.chunk_steps, n_steps - k0)
        z = rng.standard_normal((m, N + 1 if with_demand else N))
        paths = np.cumsum(z[:, :N], axis=0)
        paths += level
        level = paths[-1].copy()
        t = (k0 + 1 + np.arange(m)) * h
        drift = -t
        if with_demand:
            dem = np.cumsum(z[:, N]) * dem_scale + demand
            demand = float(dem[-1])
            drift = drift + dem
            if demand_d is None and k_d <= k0 + m:
                demand_d = float(dem[k_d - k0 - 1])
        if cfg.bridge_correction:
            x = paths * comp_scale + drift[:, None]
            starts = np.vstack([prev_x[None, :], x[:-1]])
            prev_x = x[-1]
            row = _bridge_max(starts, x, var_step, rng).max(axis=1)
        else:
            row = paths.max(axis=1) * comp_scale + drift
        j = int(np.argmax(row))
        if row[j] > best:
            best, best_k = float(row[j]), k0 + j + 1
        k0 += m
        if row[-1] < best - slack:
            break

    if cfg.tail_correction and k0 >= n_steps:
        # beyond the horizon each component climbs a further Exp(mean_backlog);
        # exact for sigma_a = 0, the demand coupling is ignored otherwise
        end = level * comp_scale + demand - n_steps * h
        tail = float(np.max(end + rng.exponential(params.mean_backlog, size=N)))
        if tail > best:
            best, best_k = tail, n_steps + 1

    if demand_d is None:
        if with_demand:
            # stopped early: the remaining demand increment is an independent normal
            demand_d = demand + params.sigma_a * math.sqrt((k_d - k0) * h) * float(rng.standard_normal())
        else:
            demand_d = 0.0
    return best, demand_d, best_k * h, best_k > 0.95 * n_steps


def sample_max_backlog(params: SystemParams, cfg: SimConfig, stream: Stream, rep: int = 0) -> MaxSample:
    """One replication of ``max_i sup_t X_i(t)`` on the grid."""
    n_steps, k_d = _grid(params, cfg)
    best, dem, tmax, trunc = _simulate_one(params, cfg, stream.generator(rep), n_steps, k_d)
    return MaxSample(best, dem, tmax, bool(trunc))


# --- pools -----------------------------------------------------------------

_POOL_CACHE: dict = {}
_POOL_CACHE_SIZE = 64


def _run_pool(params, cfg, stream, n):
    n_steps, k_d = _grid(params, cfg)

    def run(rep):
        return _simulate_one(params, cfg, stream.generator(rep), n_steps, k_d)

    workers = worker_count(cfg)
    if workers == 1:
        rows = [run(r) for r in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            rows = list(ex.map(run, range(n)))
    arr = np.array(rows, dtype=float).reshape(n, 4)
    pool = SamplePool(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3].astype(bool))
    for col in (pool.max_backlog, pool.demand_at_d, pool.argmax_time, pool.truncated):
        col.setflags(write=False)
    return pool


def sample_pool(params: SystemParams, cfg: SimConfig, stream: Stream, n: int) -> SamplePool:
    """Replications ``0..n-1`` of ``stream``, memoised since pools are expensive.

    The worker count cannot change the result, so it is not part of the cache key.
    """
    n = int(n)
    if n < 1:
        raise ValueError("need at least one replication")
    key = (params, replace(cfg, workers=None), stream, n)
    pool = _POOL_CACHE.get(key)
    if pool is None:
        pool = _run_pool(params, cfg, stream, n)
        if len(_POOL_CACHE) >= _POOL_CACHE_SIZE:
            _POOL_CACHE.pop(next(iter(_POOL_CACHE)))
        _POOL_CACHE[key] = pool
    return pool


def clear_pool_cache() -> None:
    _POOL_CACHE.clear()


# --- quantiles -------------------------------------------------------------

def zielinski_weights(n: int, p: float) -> tuple[int, float]:
    """(k, lam): pick X_(k) with prob lam, else X_(k+1), so the estimate is median-unbiased.

    With pi_j = P(X_(j) <= x_p) = P(Bin(n, p) >= j), k is the order with
    pi_k >= 1/2 > pi_{k+1} and lam solves lam pi_k + (1 - lam) pi_{k+1} = 1/2.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    n = int(n)
    if n < 2:
        raise ValueError("batch must hold at least two samples")
    j = np.arange(1, n + 1)
    pi = stats.binom.sf(j - 1, n, p)  # P(Bin >= j)
    above = np.nonzero(pi >= 0.5)[0]
    if above.size == 0:
        raise ValueError(f"batch of {n} is too small for p={p}: would need order statistic 0")
    k = int(above[-1]) + 1
    if k >= n:
        raise ValueError(f"batch of {n} is too small for p={p}: would need order statistic {n + 1}")
    pk, pk1 = pi[k - 1], pi[k]
    lam = 1.0 if pk == pk1 else float((0.5 - pk1) / (pk - pk1))
    return k, lam


def median_unbiased_quantile(sample, p: float, rng: np.random.Generator) -> float:
    x = np.sort(np.asarray(sample, dtype=float))
    k, lam = zielinski_weights(len(x), p)
    return float(x[k - 1] if rng.random() < lam else x[k])


def _interpolated_quantile(sample, p):
    x = np.sort(np.asarray(sample, dtype=float))
    n = len(x)
    pos = p * (n + 1)
    if pos < 1 or pos > n:
        raise ValueError(f"batch of {n} is too small for p={p}")
    lo = int(math.floor(pos))
    if lo == n:
        return float(x[-1])
    return float(x[lo - 1] + (pos - lo) * (x[lo] - x[lo - 1]))


def estimate_quantile(params: SystemParams, p: float, cfg: SimConfig, stream: Stream) -> float:
    """Median over ``quantile_reps`` batch estimates of the p-quantile of max backlog.

    Samples come from ``stream.child(0)``; the randomisation between order
    statistics uses ``stream.child(1)``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p!r}")
    nb, reps = cfg.quantile_batch, cfg.quantile_reps
    if cfg.quantile_method == "zielinski":
        zielinski_weights(nb, p)  # validate before simulating
    pool = sample_pool(params, cfg, stream.child(0), nb * reps)
    batches = pool.max_backlog.reshape(reps, nb)
    if cfg.quantile_method == "zielinski":
        rng = stream.child(1).generator(0)
        est = [median_unbiased_quantile(b, p, rng) for b in batches]
    else:
        est = [_interpolated_quantile(b, p) for b in batches]
    return float(np.median(est))


# --- overshoot and cost ----------------------------------------------------

def _overshoot_from_pool(pool: SamplePool, I: float):
    over = np.maximum(pool.max_backlog - I, 0.0)
    n = len(over)
    se = float(np.std(over, ddof=1) / math.sqrt(n)) if n > 1 else math.inf
    return float(math.fsum(over) / n), se


def estimate_overshoot(params: SystemParams, I: float, cfg: SimConfig, stream: Stream):
    """(mean, stderr) of ``(max backlog - I)^+`` over ``overshoot_reps`` replications."""
    if not I >= 0:
        raise ValueError(f"inventory I must be >= 0, got {I!r}")
    pool = sample_pool(params, cfg, stream, cfg.overshoot_reps)
    return _overshoot_from_pool(pool, float(I))


def estimate_cost_c_dep(params: SystemParams, rates: CostRates, I: float, cfg: SimConfig, stream: Stream):
    """(C_N(I), stderr) with the overshoot term estimated by simulation."""
    over, se = estimate_overshoot(params, I, cfg, stream)
    N = params.N
    w = rates.overshoot_weight(N)
    return N * rates.holding * (I - params.mean_backlog) + w * over, w * se


# --- limit-theorem harness -------------------------------------------------

def clt_samples(params: SystemParams, reps: int, cfg: SimConfig, stream: Stream) -> np.ndarray:
    """``reps x 2`` array of (z, x_coupled).

    z = (max - sigma^2/2 log N) / sqrt(log N) and x_coupled is the demand path at
    time sigma^2/2 log N scaled to a standard normal.
    """
    if params.independent:
        raise ValueError("the CLT harness needs sigma_a > 0")
    if params.N < 2:
        raise ValueError("the CLT harness needs N >= 2")
    pool = sample_pool(params, cfg, stream, reps)
    L = math.log(params.N)
    z = (pool.max_backlog - 0.5 * params.sigma**2 * L) / math.sqrt(L)
    x = math.sqrt(2.0) * pool.demand_at_d / (params.sigma * params.sigma_a * math.sqrt(L))
    return np.column_stack([z, x])


# --- CSV dumps -------------------------------------------------------------

def write_samples_csv(fh, pool: SamplePool) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SAMPLE_COLUMNS)
    for i in range(len(pool)):
        w.writerow([
            i,
            repr(float(pool.max_backlog[i])),
            repr(float(pool.demand_at_d[i])),
            repr(float(pool.argmax_time[i])),
            int(pool.truncated[i]),
        ])


def read_samples_csv(fh) -> SamplePool:
    rows = list(csv.DictReader(fh))
    if rows and tuple(rows[0].keys()) != SAMPLE_COLUMNS:
        raise ValueError(f"unexpected columns {tuple(rows[0].keys())}")
    idx = [int(r["rep_index"]) for r in rows]
    if idx != list(range(len(rows))):
        raise ValueError("rep_index must run 0..n-1 in order")
    col = lambda k: np.array([float(r[k]) for r in rows])  # noqa: E731
    return SamplePool(
        col("max_backlog"), col("demand_at_d"), col("argmax_time"),
        np.array([r["truncated_flag"] == "1" for r in rows], dtype=bool),
    )
