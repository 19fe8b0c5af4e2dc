"""Command-line front end.

    forkjoin-evt solve --n 10 --n 50 --sigma-a 0 --h const:1 --b linear:1 --method exact
    forkjoin-evt table 2
    forkjoin-evt clt --n 10 --n 100 --n 1000 --sigma-a 1

Exit codes: 0 when every requested check passes, 1 when a check fails,
2 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import io
import json
import math
import sys
import time
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import approximations as approx
from . import optimize as opt
from .model import CostRates, Regime, Solution, SystemParams, classify_regime
from .reference_tables import EXPERIMENT_GRID, TABLES, DepTable, IndepTable
from .simulate import SimConfig, Stream, clt_samples, sample_pool, write_samples_csv

__all__ = [
    "RateRule",
    "RunRecord",
    "METHODS",
    "build_parser",
    "main",
    "records_to_csv",
    "records_from_csv",
]

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
METHODS = ("exact", "first-order", "gumbel", "normal", "mixed", "simulate")


class UsageError(Exception):
    pass


# --- cost-rate sequences ---------------------------------------------------

@dataclass(frozen=True)
class RateRule:
    """A cost sequence in N: ``c`` (const), ``c N`` (linear) or ``c N^alpha`` (power)."""

    kind: str
    coef: float
    exponent: float = 0.0

    def __post_init__(self):
        if self.kind not in ("const", "linear", "power"):
            raise ValueError(f"rate kind must be const, linear or power, got {self.kind!r}")
        if not self.coef > 0:
            raise ValueError(f"rate coefficient must be positive, got {self.coef!r}")
        if not math.isfinite(self.exponent):
            raise ValueError("rate exponent must be finite")

    @classmethod
    def parse(cls, text: str) -> "RateRule":
        parts = text.strip().lower().split(":")
        kind = {"constant": "const", "lin": "linear", "pow": "power"}.get(parts[0], parts[0])
        try:
            if kind == "power":
                if len(parts) != 3:
                    raise ValueError("power rules need kind:coef:exponent")
                return cls("power", float(parts[1]), float(parts[2]))
            if len(parts) != 2:
                raise ValueError(f"{kind} rules take kind:coef")
            return cls(kind, float(parts[1]), 1.0 if kind == "linear" else 0.0)
        except ValueError as exc:
            raise ValueError(f"bad rate rule {text!r}: {exc}") from None

    @property
    def alpha(self) -> float:
        return {"const": 0.0, "linear": 1.0}.get(self.kind, self.exponent)

    def at(self, N: int) -> float:
        return self.coef * float(N) ** self.alpha

    def __str__(self):
        if self.kind == "power":
            return f"power:{self.coef:g}:{self.exponent:g}"
        return f"{self.kind}:{self.coef:g}"


def limit_gamma(h: RateRule, b: RateRule) -> float:
    """lim gamma_N for gamma_N = N h_N / (N h_N + b_N)."""
    e = 1.0 + h.alpha - b.alpha
    if e > 0:
        return 1.0
    if e < 0:
        return 0.0
    return h.coef / (h.coef + b.coef)


# --- run records -----------------------------------------------------------

RECORD_FIELDS = (
    "n", "sigma", "sigma_a", "h_rule", "b_rule", "holding", "backorder", "gamma", "regime",
    "method", "inventory", "capacity", "cost_c", "cost_f", "stderr_f", "wall_time", "seed",
    "config_digest",
)


@dataclass(frozen=True)
class RunRecord:
    n: int
    sigma: float
    sigma_a: float
    h_rule: str
    b_rule: str
    holding: float
    backorder: float
    gamma: float
    regime: str
    method: str
    inventory: float
    capacity: float
    cost_c: float
    cost_f: float
    stderr_f: float
    wall_time: float
    seed: int
    config_digest: str

    def as_row(self) -> list[str]:
        out = []
        for name in RECORD_FIELDS:
            v = getattr(self, name)
            out.append(repr(v) if isinstance(v, float) else str(v))
        return out

    @classmethod
    def from_row(cls, row: dict) -> "RunRecord":
        kw = {}
        for f in dataclasses.fields(cls):
            raw = row[f.name]
            if f.type == "int":
                kw[f.name] = int(raw)
            elif f.type == "float":
                kw[f.name] = float(raw)
            else:
                kw[f.name] = raw
        return cls(**kw)


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(RECORD_FIELDS)
    for r in records:
        w.writerow(r.as_row())
    return buf.getvalue()


def records_from_csv(text: str) -> list[RunRecord]:
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if tuple(reader.fieldnames or ()) != RECORD_FIELDS:
        raise ValueError(f"unexpected CSV header {reader.fieldnames}")
    return [RunRecord.from_row(row) for row in reader]


def config_digest(cfg: SimConfig) -> str:
    d = dataclasses.asdict(cfg)
    d.pop("workers")
    blob = json.dumps(d, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:12]


# --- solving ---------------------------------------------------------------

def _solve_one(method: str, params: SystemParams, rates: CostRates, cfg: SimConfig) -> Solution:
    if method == "exact":
        return opt.solve_exact_indep(params, rates)
    if method == "first-order":
        return approx.first_order(params, rates)
    if method == "gumbel":
        return approx.gumbel_indep(params, rates)
    if method == "normal":
        return approx.normal_dep(params, rates)
    if method == "mixed":
        return approx.mixed(params, rates)
    if method == "simulate":
        return opt.solve_dep_simulated(params, rates, cfg, Stream(int(cfg.seed)))
    raise UsageError(f"unknown method {method!r}")


def _check_method_flags(method: str, sigma_a: float):
    if method in ("exact", "gumbel") and sigma_a > 0:
        raise UsageError(f"--method {method} needs --sigma-a 0 (deterministic demand)")
    if method in ("normal", "simulate") and sigma_a == 0:
        raise UsageError(f"--method {method} needs --sigma-a > 0 (stochastic demand)")


def _sim_config(args) -> SimConfig:
    kw = {}
    if args.seed is not None:
        kw["seed"] = args.seed
    if args.grid_step is not None:
        kw["grid_step"] = args.grid_step
    if args.horizon_factor is not None:
        kw["horizon_factor"] = args.horizon_factor
    if getattr(args, "reps", None) is not None:
        kw["overshoot_reps"] = args.reps
        kw["quantile_reps"] = max(1, args.reps // SimConfig().quantile_batch)
    kw["bridge_correction"] = bool(args.bridge_correction)
    kw["tail_correction"] = bool(args.tail_correction)
    return SimConfig(**kw)


def run_solve(ns, sigma, sigma_a, h_rule, b_rule, method, cfg) -> list[RunRecord]:
    _check_method_flags(method, sigma_a)
    regime = classify_regime(limit_gamma(h_rule, b_rule))
    out = []
    for N in ns:
        params = SystemParams(N, sigma, sigma_a)
        rates = CostRates(h_rule.at(N), b_rule.at(N))
        t0 = time.perf_counter()
        sol = _solve_one(method, params, rates, cfg)
        dt = time.perf_counter() - t0
        out.append(RunRecord(
            n=N, sigma=params.sigma, sigma_a=params.sigma_a, h_rule=str(h_rule), b_rule=str(b_rule),
            holding=rates.holding, backorder=rates.backorder, gamma=rates.gamma(N), regime=regime.value,
            method=method, inventory=sol.inventory, capacity=sol.capacity, cost_c=sol.cost_c,
            cost_f=sol.cost_f, stderr_f=sol.stderr_f, wall_time=dt, seed=int(cfg.seed),
            config_digest=config_digest(cfg),
        ))
    return out


def _format_table(header, rows) -> str:
    cells = [list(map(str, header))] + [[str(c) for c in r] for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def cmd_solve(args) -> int:
    try:
        h_rule, b_rule = RateRule.parse(args.h), RateRule.parse(args.b)
        cfg = _sim_config(args)
        records = run_solve(args.n or [10], args.sigma, args.sigma_a, h_rule, b_rule, args.method, cfg)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out == "csv":
        _emit(records_to_csv(records), args.output)
    elif args.out == "json":
        _emit(json.dumps([dataclasses.asdict(r) for r in records], indent=2), args.output)
    else:
        header = ("N", "method", "gamma", "I", "beta", "C", "F", "stderr_F", "seconds")
        rows = [
            (r.n, r.method, f"{r.gamma:.6g}", f"{r.inventory:.6g}", f"{r.capacity:.6g}",
             f"{r.cost_c:.6g}", f"{r.cost_f:.6g}", f"{r.stderr_f:.3g}", f"{r.wall_time:.2f}")
            for r in records
        ]
        print(_format_table(header, rows))
    if args.dump_samples:
        cfg = _sim_config(args)
        N = (args.n or [10])[0]
        pool = sample_pool(SystemParams(N, args.sigma, args.sigma_a), cfg, Stream(int(cfg.seed)).child(0),
                           cfg.quantile_batch * cfg.quantile_reps)
        with open(args.dump_samples, "w", newline="") as fh:
            write_samples_csv(fh, pool)
    return EXIT_OK


# --- table reproduction ----------------------------------------------------

@dataclass
class Check:
    row: str
    column: str
    computed: float
    reference: float
    tol: float
    mode: str  # "rel", "abs" or "info"
    stderr: float = 0.0

    @property
    def deviation(self) -> float:
        if self.mode == "rel":
            return abs(self.computed - self.reference) / abs(self.reference)
        return abs(self.computed - self.reference)

    @property
    def status(self) -> str:
        if self.mode == "info":
            return "INFO"
        return "PASS" if self.deviation <= self.tol else "FAIL"


def _indep_checks(table: IndepTable, ns) -> list[Check]:
    h_rule, b_rule = RateRule.parse(table.h_rule), RateRule.parse(table.b_rule)
    regime = {"balanced": Regime.BALANCED, "quality": Regime.QUALITY_DRIVEN,
              "efficiency": Regime.EFFICIENCY_DRIVEN}[table.regime]
    out = []
    for N, ref in table.rows.items():
        if ns and N not in ns:
            continue
        p, r = SystemParams(N), CostRates(h_rule.at(N), b_rule.at(N))
        ex, g = opt.solve_exact_indep(p, r), approx.gumbel_indep(p, r)
        f_hat, _ = opt.evaluate_policy(p, r, g.policy)
        gap = opt.gap_diagnostic(p, r, ex, g, regime).value
        vals = (ex.inventory, ex.capacity, ex.cost_f, g.inventory, g.capacity, f_hat)
        names = ("I*", "beta*", "F*", "I_hat", "beta_hat", "F(I_hat,beta_hat)")
        tag = f"N={N}"
        out += [Check(tag, n, v, rv, 1e-3, "rel") for n, v, rv in zip(names, vals, ref)]
        out.append(Check(tag, "scaled gap", gap, ref[6], 1e-4, "abs"))
    return out


def _dep_checks(table, ns, sas, cfg) -> list[Check]:
    h_rule, b_rule = RateRule.parse(table.h_rule), RateRule.parse(table.b_rule)
    out = []
    for (N, sa), ref in table.rows.items():
        if (ns and N not in ns) or (sas and not any(abs(sa - s) < 1e-12 for s in sas)):
            continue
        p, r = SystemParams(N, 1.0, sa), CostRates(h_rule.at(N), b_rule.at(N))
        stream = Stream(int(cfg.seed))
        sim = opt.solve_dep_simulated(p, r, cfg, stream)
        tag = f"N={N} sigma_a={sa:g}"
        if isinstance(table, DepTable):
            nd = approx.normal_dep(p, r)
            f_hat, se_hat = opt.evaluate_policy(p, r, nd.policy, cfg, stream.child(2))
            gap = opt.gap_diagnostic(p, r, sim, nd, Regime.BALANCED, f_hat, se_hat)
            out += [
                Check(tag, "I^A", sim.inventory, ref[0], 0.1, "abs"),
                Check(tag, "beta^A", sim.capacity, ref[1], 0.02, "rel"),
                Check(tag, "F(I^A,beta^A)", sim.cost_f, ref[2], 0.02, "rel", sim.stderr_f),
                Check(tag, "I_hat^A", nd.inventory, ref[3], 1e-3, "rel"),
                Check(tag, "beta_hat^A", nd.capacity, ref[4], 1e-3, "rel"),
                Check(tag, "F(I_hat^A,beta_hat^A)", f_hat, ref[5], 0.02, "rel", se_hat),
                Check(tag, "scaled gap", gap.value, ref[6], 0.0, "info", gap.stderr),
            ]
        else:
            mx = approx.mixed(p, r)
            f_mix, se_mix = opt.evaluate_policy(p, r, mx.policy, cfg, stream.child(2))
            gap_m = opt.gap_diagnostic(p, r, sim, mx, Regime.BALANCED, f_mix, se_mix)
            nd = approx.normal_dep(p, r)
            f_hat, se_hat = opt.evaluate_policy(p, r, nd.policy, cfg, stream.child(2))
            gap_a = opt.gap_diagnostic(p, r, sim, nd, Regime.BALANCED, f_hat, se_hat)
            out += [
                Check(tag, "I^M", mx.inventory, ref[0], 1e-3, "rel"),
                Check(tag, "beta^M", mx.capacity, ref[1], 1e-3, "rel"),
                Check(tag, "F(I^M,beta^M)", f_mix, ref[2], 0.02, "rel", se_mix),
                Check(tag, "scaled gap mixed", gap_m.value, ref[3], 0.0, "info", gap_m.stderr),
                Check(tag, "scaled gap normal", gap_a.value, ref[4], 0.0, "info", gap_a.stderr),
            ]
    return out


def table_checks(table_id: int, ns=(), sas=(), cfg: SimConfig | None = None) -> list[Check]:
    if table_id not in TABLES:
        raise UsageError(f"table must be one of 2-9, got {table_id}")
    table = TABLES[table_id]
    if isinstance(table, IndepTable):
        return _indep_checks(table, set(ns))
    return _dep_checks(table, set(ns), list(sas), cfg or SimConfig())


def cmd_table(args) -> int:
    if args.table_id == 5:
        print("experiment grid for tables 6-9 (sigma = 1, h = 1):")
        for k, v in EXPERIMENT_GRID.items():
            print(f"  {k}: {', '.join(map(str, v))}")
        return EXIT_OK
    try:
        cfg = _sim_config(args)
        checks = table_checks(args.table_id, args.n or (), args.sigma_a or (), cfg)
    except (UsageError, ValueError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out == "json":
        _emit(json.dumps([{**dataclasses.asdict(c), "deviation": c.deviation, "status": c.status}
                          for c in checks], indent=2), args.output)
    elif args.out == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\r\n")
        w.writerow(("row", "column", "computed", "reference", "deviation", "tolerance", "mode", "stderr", "status"))
        for c in checks:
            w.writerow((c.row, c.column, repr(c.computed), repr(c.reference), repr(c.deviation),
                        repr(c.tol), c.mode, repr(c.stderr), c.status))
        _emit(buf.getvalue(), args.output)
    else:
        print(f"table {args.table_id}: {TABLES[args.table_id].title}")
        rows = [
            (c.row, c.column, f"{c.computed:.6g}", f"{c.reference:.6g}", f"{c.deviation:.3g}",
             f"{c.tol:g} {c.mode}" if c.mode != "info" else "-",
             f"{c.stderr:.2g}" if c.stderr else "", c.status)
            for c in checks
        ]
        print(_format_table(("row", "column", "computed", "reference", "deviation", "tolerance", "stderr", "status"), rows))
    return EXIT_OK if all(c.status != "FAIL" for c in checks) else EXIT_FAIL


# --- CLT harness -----------------------------------------------------------

CLT_SD_BAND = (0.59 / (1 / math.sqrt(2.0)), 0.83 / (1 / math.sqrt(2.0)))  # relative to the target sd


def clt_report(ns, sigma, sigma_a, reps, cfg) -> tuple[list[dict], list[tuple[str, bool]]]:
    rows, checks = [], []
    target = sigma * sigma_a / math.sqrt(2.0)
    for N in ns:
        zx = clt_samples(SystemParams(N, sigma, sigma_a), reps, cfg, Stream(int(cfg.seed)))
        z, x = zx[:, 0], zx[:, 1]
        sd = float(np.std(z, ddof=1))
        rows.append({
            "n": N,
            "sd_z": sd,
            "target_sd": target,
            "ks_z": float(stats.kstest((z - z.mean()) / target, "norm").statistic),
            "ks_x_pvalue": float(stats.kstest(x, "norm").pvalue),
            "coupling_error": float(np.mean(np.abs(z - target * x))),
        })
    for r in rows:
        checks.append((f"N={r['n']}: x_coupled KS p-value {r['ks_x_pvalue']:.3g} >= 0.001", r["ks_x_pvalue"] >= 1e-3))
        if r["n"] >= 1000:
            lo, hi = CLT_SD_BAND[0] * target, CLT_SD_BAND[1] * target
            checks.append((f"N={r['n']}: sd(z) {r['sd_z']:.4f} in [{lo:.3f}, {hi:.3f}]", lo <= r["sd_z"] <= hi))
    errs = [r["coupling_error"] for r in rows]
    if len(errs) > 1:
        checks.append(("coupling error strictly decreasing in N", all(a > b for a, b in zip(errs, errs[1:]))))
    return rows, checks


def cmd_clt(args) -> int:
    if args.sigma_a <= 0:
        print("usage error: clt needs --sigma-a > 0", file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = _sim_config(args)
        ns = sorted(args.n or [10, 100, 1000])
        if min(ns) < 2:
            raise ValueError("clt needs N >= 2")
        rows, checks = clt_report(ns, args.sigma, args.sigma_a, args.reps or 2000, cfg)
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out == "json":
        _emit(json.dumps({"rows": rows, "checks": [{"check": c, "pass": ok} for c, ok in checks]}, indent=2),
              args.output)
    elif args.out == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(rows[0].keys()), lineterminator="\r\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: repr(v) if isinstance(v, float) else v for k, v in r.items()})
        _emit(buf.getvalue(), args.output)
    else:
        print(_format_table(
            ("N", "sd(z)", "target", "KS z", "KS p (x)", "mean |z - s x|"),
            [(r["n"], f"{r['sd_z']:.4f}", f"{r['target_sd']:.4f}", f"{r['ks_z']:.4f}",
              f"{r['ks_x_pvalue']:.3g}", f"{r['coupling_error']:.4f}") for r in rows],
        ))
        for c, ok in checks:
            print(f"{'PASS' if ok else 'FAIL'}  {c}")
    return EXIT_OK if all(ok for _, ok in checks) else EXIT_FAIL


# --- parser ----------------------------------------------------------------

def _sim_flags(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="64-bit seed (default from SimConfig)")
    p.add_argument("--grid-step", type=float, default=None)
    p.add_argument("--horizon-factor", type=float, default=None)
    p.add_argument("--reps", type=int, default=None, help="overshoot replications (quantile uses reps/100 batches)")
    p.add_argument("--bridge-correction", action="store_true", help="exact Brownian-bridge maximum between grid points")
    p.add_argument("--tail-correction", action="store_true", help="exact overshoot beyond the simulation horizon")
    p.add_argument("--out", choices=("table", "csv", "json"), default="table")
    p.add_argument("--output", default=None, help="write csv/json to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="forkjoin-evt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="optimal or approximate (I, beta) for one or more N")
    ps.add_argument("--n", type=int, action="append", help="number of components (repeatable)")
    ps.add_argument("--sigma", type=float, default=1.0)
    ps.add_argument("--sigma-a", type=float, default=0.0)
    ps.add_argument("--h", default="const:1", help="holding-rate rule kind:coef[:exponent]")
    ps.add_argument("--b", default="linear:1", help="backorder-rate rule kind:coef[:exponent]")
    ps.add_argument("--method", choices=METHODS, default="exact")
    ps.add_argument("--dump-samples", default=None, help="write the raw quantile sample pool of the first N as CSV")
    _sim_flags(ps)
    ps.set_defaults(func=cmd_solve)

    pt = sub.add_parser("table", help="recompute a published table and compare")
    pt.add_argument("table_id", type=int, choices=range(2, 10), metavar="{2..9}")
    pt.add_argument("--n", type=int, action="append", help="restrict to these N (repeatable)")
    pt.add_argument("--sigma-a", type=float, action="append", help="restrict to these sigma_a (repeatable)")
    _sim_flags(pt)
    pt.set_defaults(func=cmd_table)

    pc = sub.add_parser("clt", help="limit-theorem diagnostics for the standardized maximum")
    pc.add_argument("--n", type=int, action="append", help="N ladder (repeatable, default 10 100 1000)")
    pc.add_argument("--sigma", type=float, default=1.0)
    pc.add_argument("--sigma-a", type=float, default=1.0)
    _sim_flags(pc)
    pc.set_defaults(func=cmd_clt)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
