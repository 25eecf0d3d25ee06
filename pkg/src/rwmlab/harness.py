"""Experiment orchestration: JSON configs, seeded deterministic multi-chain
execution, parameter sweeps, and CSV emission.

RNG splitting rule: the stream for chain j of parameter combination i is
Generator(Philox(SeedSequence(entropy=seed, spawn_key=(i, j)))), a
counter-based splittable generator, so results are reproducible and
independent of worker scheduling.  Combinations are enumerated in
itertools.product(d, l, c) order.  The environment variable RWM_THREADS caps
the worker-process count (default 1: serial); rows are sorted by combination
and chain index before writing, so parallel and serial runs emit identical
files.
"""

from __future__ import annotations

import csv
import itertools
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from . import _loops, theory
from .diagnostics import iact
from .diffusion import chain_vs_diffusion_autocorr
from .kernels import KernelConfig, StuckChainError
from .targets import UNIT, GSpec, TargetDensity, normalize, sample_iid

__all__ = [
    "ExperimentConfig",
    "chain_rng",
    "run_experiment",
    "uniform_start_experiment",
    "SUMMARY_COLUMNS",
]

logger = logging.getLogger(__name__)

TAGS = ("simulate", "sweep", "theory", "diffusion", "coupling", "pseudo")

SUMMARY_COLUMNS = [
    "tag", "family", "params", "support", "kind", "d", "l", "c", "chain",
    "n_iters", "accept_rate", "esjd_scaled", "iact_first", "b_mean", "b_var",
    "p_d", "omega_inv_mean", "omega_inv_m2",
]

_MAX_IACT_LAG = 200_000
_STAT_SAMPLES = 100_000


@dataclass
class ExperimentConfig:
    """Declarative description of one experiment run."""

    tag: str
    seed: int
    out: str = "."
    target: GSpec | None = None
    kind: str = "rwm"
    d: tuple = ()
    l: tuple = ()
    c: tuple = (1.0,)
    n_iters: int = 0
    n_chains: int = 1
    burn_in: int | None = None
    start: str = "stationary"
    fstar: tuple = ()
    t_grid: tuple = ()
    r: tuple = ()
    k: int | None = None
    n_rep: int = 10_000

    def __post_init__(self):
        if self.tag not in TAGS:
            raise ValueError(f"unknown experiment tag {self.tag!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit value")
        for name in ("d", "l", "c", "fstar", "t_grid", "r"):
            setattr(self, name, tuple(getattr(self, name)))
        if self.start not in ("stationary", "uniform"):
            raise ValueError("start must be 'stationary' or 'uniform'")
        needs_chains = self.tag in ("simulate", "sweep", "diffusion", "coupling", "pseudo")
        if needs_chains:
            if self.target is None:
                raise ValueError(f"{self.tag} needs a target")
            if not self.d or not self.l:
                raise ValueError(f"{self.tag} needs nonempty d and l lists")
            for dd, ll in itertools.product(self.d, self.l):
                if ll / dd >= 0.5:
                    raise ValueError(f"(d={dd}, l={ll}) violates l/d < 1/2")
        if self.tag in ("simulate", "sweep"):
            if self.n_iters <= 0:
                raise ValueError("n_iters must be positive")
            if self.burn_in is not None and not 0 <= self.burn_in < self.n_iters:
                raise ValueError("need n_iters > burn_in >= 0")
        if self.tag == "theory" and not self.l:
            raise ValueError("theory needs an l list")

    def burn_in_for(self, d: int) -> int:
        """Stationary starts are exact, so burn-in defaults to 0; uniform
        starts default to 10*d^2 (the mixing scale)."""
        if self.burn_in is not None:
            return self.burn_in
        return 0 if self.start == "stationary" else 10 * d * d

    @classmethod
    def from_dict(cls, data: dict, tag: str | None = None) -> "ExperimentConfig":
        data = dict(data)
        if tag is not None:
            data["tag"] = tag
        if "target" in data and data["target"] is not None and not isinstance(data["target"], GSpec):
            data["target"] = GSpec.from_dict(data["target"])
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path, tag: str | None = None) -> "ExperimentConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh), tag=tag)


def chain_rng(seed: int, comb_index: int, chain_index: int) -> np.random.Generator:
    """The documented splitting rule: Philox keyed by (seed; comb, chain)."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(comb_index, chain_index))
    return np.random.Generator(np.random.Philox(ss))


@lru_cache(maxsize=32)
def _cached_target(family: str, params: tuple, support: str) -> TargetDensity:
    return normalize(GSpec(family=family, params=params, support=support))


def _fmt(value) -> str:
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return f"{value:.12g}"
    return str(value)


def _write_csv(path: Path, columns, rows) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])
    return path


def _target_cols(gspec: GSpec):
    return gspec.family, ";".join(f"{p:.12g}" for p in gspec.params), gspec.support


# ---------------------------------------------------------------------------
# single-chain runner (simulate / sweep)


def _run_single_chain(gspec_key, kind, d, l, c, n_iters, burn_in, start, seed, ci, chain):
    """Run one chain and return its summary statistics as a plain dict
    (picklable, so it can cross a process boundary)."""
    target = _cached_target(*gspec_key)
    cfg = KernelConfig(l=l, d=d, kind=kind, c=c)
    rng = chain_rng(seed, ci, chain)

    if start == "stationary":
        x = sample_iid(target, d, rng)
    else:
        x = rng.random(d)

    support_code = 0 if target.support == UNIT else 1
    kind_code = {"rwm": _loops.KIND_RWM, "mwg": _loops.KIND_MWG, "rwh": _loops.KIND_RWH}[kind]
    dummy = np.empty(1)
    no_windows = np.zeros(1, np.int64)

    if burn_in > 0:
        _loops.run_chain(
            target._coeffs, support_code, kind_code, cfg.sigma, d, cfg.n_update,
            burn_in, x, rng, dummy, False, dummy, False, 0, False, 0, no_windows,
        )

    first_trace = np.empty(n_iters)
    stat_stride = max(1, n_iters // _STAT_SAMPLES)
    window = max(1, math.ceil(d**0.4))
    n_windows = n_iters // window
    # one extra slot for the trailing partial window (excluded from p_d)
    window_accepts = np.zeros(n_windows + 1, np.int64)
    collect_oi = support_code == 0

    n_acc, sum_sq, b_sum, b_sq, n_stat, oi_sum, oi_sq = _loops.run_chain(
        target._coeffs, support_code, kind_code, cfg.sigma, d, cfg.n_update,
        n_iters, x, rng, first_trace, True, dummy, False, stat_stride,
        collect_oi, window, window_accepts,
    )

    accept_rate = n_acc / n_iters
    esjd_scaled = d * sum_sq / n_iters
    max_lag = min(n_iters // 50, _MAX_IACT_LAG)
    iact_first = iact(first_trace, max_lag) if max_lag >= 1 else float("nan")
    b_mean = b_sum / n_stat if n_stat else float("nan")
    b_var = b_sq / n_stat - b_mean**2 if n_stat else float("nan")
    p_d = float(np.mean(window_accepts[:n_windows] / window)) if n_windows else float("nan")
    oi_mean = oi_sum / n_stat if collect_oi and n_stat else float("nan")
    oi_m2 = oi_sq / n_stat if collect_oi and n_stat else float("nan")

    return {
        "chain": chain, "ci": ci, "d": d, "l": l, "c": c, "n_iters": n_iters,
        "accept_rate": accept_rate, "esjd_scaled": esjd_scaled,
        "iact_first": iact_first, "b_mean": b_mean, "b_var": b_var, "p_d": p_d,
        "omega_inv_mean": oi_mean, "omega_inv_m2": oi_m2,
    }


def _worker_count() -> int:
    return max(1, int(os.environ.get("RWM_THREADS", "1")))


def _map_tasks(fn, tasks):
    workers = _worker_count()
    if workers == 1 or len(tasks) <= 1:
        return [fn(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*tasks)))


def _summary_rows(config: ExperimentConfig, results) -> list:
    gspec = config.target
    fam, params, support = _target_cols(gspec)
    stat_names = ["accept_rate", "esjd_scaled", "iact_first", "b_mean", "b_var",
                  "p_d", "omega_inv_mean", "omega_inv_m2"]
    rows = []
    results = sorted(results, key=lambda r: (r["ci"], r["chain"]))
    for ci, group in itertools.groupby(results, key=lambda r: r["ci"]):
        group = list(group)
        for res in group:
            rows.append(
                [config.tag, fam, params, support, config.kind, res["d"], res["l"],
                 res["c"], res["chain"], res["n_iters"]]
                + [res[name] for name in stat_names]
            )
        agg = [float(np.mean([r2[name] for r2 in group])) for name in stat_names]
        rows.append(
            [config.tag, fam, params, support, config.kind, group[0]["d"],
             group[0]["l"], group[0]["c"], "agg", group[0]["n_iters"]] + agg
        )
    return rows


def run_experiment(config: ExperimentConfig) -> list:
    """Execute the experiment described by config; returns written CSV paths.

    Re-running an identical config produces byte-identical files.
    """
    out_dir = Path(config.out)
    dispatch = {
        "simulate": _run_simulate,
        "sweep": _run_simulate,
        "theory": _run_theory,
        "diffusion": _run_diffusion,
        "coupling": _run_coupling,
        "pseudo": _run_pseudo,
    }
    try:
        return dispatch[config.tag](config, out_dir)
    except StuckChainError as err:
        logger.error("stuck state detected: %s", err)
        raise


def _run_simulate(config: ExperimentConfig, out_dir: Path) -> list:
    if config.start == "uniform":
        return uniform_start_experiment(config)
    gspec = config.target
    key = (gspec.family, gspec.params, gspec.support)
    combos = list(itertools.product(config.d, config.l, config.c))
    tasks = [
        (key, config.kind, dd, ll, cc, config.n_iters, config.burn_in_for(dd),
         config.start, config.seed, ci, chain)
        for ci, (dd, ll, cc) in enumerate(combos)
        for chain in range(config.n_chains)
    ]
    results = _map_tasks(_run_single_chain, tasks)
    rows = _summary_rows(config, results)
    return [_write_csv(out_dir / f"{config.tag}.csv", SUMMARY_COLUMNS, rows)]


# ---------------------------------------------------------------------------
# uniform-start experiment


def _target_mean_sd(target: TargetDensity):
    xs = np.linspace(0.0, 1.0, 20001)
    w = target.pdf(xs)
    mean = float(np.trapezoid(xs * w, xs))
    var = float(np.trapezoid((xs - mean) ** 2 * w, xs))
    return mean, math.sqrt(var)


def _stabilization_iteration(mean_trace, mu, d):
    """First iteration by which the windowed convergence statistic has decayed
    below 1/e of its initial discrepancy from the stationary value, for 3
    consecutive windows (windows on the d^2 mixing scale).

    The e-folding threshold is deliberately independent of d: a band that
    shrinks with d (e.g. stationary standard errors, which scale as 1/sqrt(d)
    for the cross-component mean) inflates the apparent growth exponent of
    the stabilization time by the extra log(d) decay it demands."""
    window = max(50, (d * d) // 8)
    n_win = mean_trace.size // window
    if n_win == 0:
        return float("nan")
    wm = mean_trace[: n_win * window].reshape(n_win, window).mean(axis=1)
    initial = abs(wm[0] - mu)
    if initial == 0.0:
        return window
    ok = np.abs(wm - mu) <= initial / math.e
    run = 0
    for i, flag in enumerate(ok):
        run = run + 1 if flag else 0
        if run == 3:
            return (i - 1) * window
    return float("nan")


def uniform_start_experiment(config: ExperimentConfig) -> list:
    """Chains started uniformly on the cube: records the scaled ESJD of the
    first transition and the iterations-to-stabilization of the running mean
    of the state (monitored per iteration, windowed on the d^2 scale)."""
    if config.kind != "rwm":
        raise ValueError("uniform-start experiment requires the rwm kernel")
    gspec = config.target
    if gspec.support != UNIT:
        raise ValueError("uniform-start experiment requires a unit-interval target")
    target = _cached_target(gspec.family, gspec.params, gspec.support)
    mu, _ = _target_mean_sd(target)
    fam, params, support = _target_cols(gspec)

    combos = list(itertools.product(config.d, config.l, config.c))
    rows = []
    for ci, (dd, ll, cc) in enumerate(combos):
        first_esjds = []
        stabs = []
        accs = []
        esjds = []
        trace_sum = np.zeros(config.n_iters)
        for chain in range(config.n_chains):
            rng = chain_rng(config.seed, ci, chain)
            x = rng.random(dd)
            cfg = KernelConfig(l=ll, d=dd, kind="rwm")
            mean_trace = np.empty(config.n_iters)
            dummy = np.empty(1)
            no_windows = np.zeros(1, np.int64)
            x_before = x.copy()
            n_acc, sum_sq, *_ = _loops.run_chain(
                target._coeffs, 0, _loops.KIND_RWM, cfg.sigma, dd, dd, 1, x,
                rng, dummy, False, dummy, False, 0, False, 0, no_windows,
            )
            first_esjds.append(dd * float(np.sum((x - x_before) ** 2)))
            n_acc2, sum_sq2, *_ = _loops.run_chain(
                target._coeffs, 0, _loops.KIND_RWM, cfg.sigma, dd, dd,
                config.n_iters, x, rng, dummy, False, mean_trace, True,
                0, False, 0, no_windows,
            )
            trace_sum += mean_trace
            stabs.append(_stabilization_iteration(mean_trace, mu, dd))
            accs.append((n_acc + n_acc2) / (config.n_iters + 1))
            esjds.append(dd * (sum_sq + sum_sq2) / (config.n_iters + 1))
            rows.append([config.tag, fam, params, support, "rwm", dd, ll, cc,
                         chain, config.n_iters, accs[-1], esjds[-1],
                         first_esjds[-1], stabs[-1]])
        # the combination-level stabilization uses the chain-averaged trace,
        # which resolves the e-folding crossing far better than one chain
        stab_agg = _stabilization_iteration(trace_sum / config.n_chains, mu, dd)
        rows.append([config.tag, fam, params, support, "rwm", dd, ll, cc, "agg",
                     config.n_iters, float(np.mean(accs)), float(np.mean(esjds)),
                     float(np.mean(first_esjds)), stab_agg])
    columns = ["tag", "family", "params", "support", "kind", "d", "l", "c",
               "chain", "n_iters", "accept_rate", "esjd_scaled", "first_esjd",
               "stabilize_iters"]
    return [_write_csv(Path(config.out) / "uniform_start.csv", columns, rows)]


# ---------------------------------------------------------------------------
# theory / diffusion / coupling / pseudo experiments


def _run_theory(config: ExperimentConfig, out_dir: Path) -> list:
    fstars = config.fstar
    if not fstars:
        if config.target is None:
            raise ValueError("theory needs either an fstar list or a target")
        fstars = (_cached_target(config.target.family, config.target.params,
                                 config.target.support).fstar,)
    columns = ["tag", "l", "fstar", "c", "phi", "aoar", "l_opt", "aoar_at_l_opt",
               "phi_mwg", "l_opt_mwg", "phi_halfline", "l_opt_halfline"]
    rows = []
    for ll, fs, cc in itertools.product(config.l, fstars, config.c):
        rows.append([
            "theory", ll, fs, cc,
            theory.phi(ll, fs), theory.aoar(ll, fs), theory.optimal_l(fs),
            theory.aoar(theory.optimal_l(fs), fs),
            theory.phi_mwg(ll, fs, cc), theory.optimal_l_mwg(fs, cc),
            theory.phi_halfline(ll, fs), theory.optimal_l_halfline(fs),
        ])
    return [_write_csv(out_dir / "theory.csv", columns, rows)]


def _run_diffusion(config: ExperimentConfig, out_dir: Path) -> list:
    gspec = config.target
    target = _cached_target(gspec.family, gspec.params, gspec.support)
    fam, params, support = _target_cols(gspec)
    t_grid = config.t_grid or (0.05, 0.1, 0.2)
    rows = []
    columns = ["tag", "family", "params", "support", "d", "l", "t",
               "chain_rho", "diffusion_rho"]
    for ci, (dd, ll) in enumerate(itertools.product(config.d, config.l)):
        rng = chain_rng(config.seed, ci, 0)
        x = sample_iid(target, dd, rng)
        trace = np.empty(config.n_iters)
        dummy = np.empty(1)
        no_windows = np.zeros(1, np.int64)
        _loops.run_chain(
            target._coeffs, 0 if support == UNIT else 1, _loops.KIND_RWM,
            ll / dd, dd, dd, config.n_iters, x, rng, trace, True, dummy, False,
            0, False, 0, no_windows,
        )
        for t, chain_rho, diff_rho in chain_vs_diffusion_autocorr(
            trace, dd, ll, target, t_grid, rng=rng
        ):
            rows.append(["diffusion", fam, params, support, dd, ll, t,
                         chain_rho, diff_rho])
    return [_write_csv(out_dir / "diffusion.csv", columns, rows)]


def _run_coupling(config: ExperimentConfig, out_dir: Path) -> list:
    gspec = config.target
    if gspec.support != UNIT:
        raise ValueError("coupling experiment requires a unit-interval target")
    target = _cached_target(gspec.family, gspec.params, gspec.support)
    fam, params, support = _target_cols(gspec)
    rows = []
    for ci, (dd, ll) in enumerate(itertools.product(config.d, config.l)):
        for chain in range(config.n_chains):
            rng = chain_rng(config.seed, ci, chain)
            x = sample_iid(target, dd, rng)
            n_dec, n_acc = _loops.coupled_decouple_count(
                target._coeffs, 0, ll / dd, dd, config.n_iters, x, rng
            )
            rows.append(["coupling", fam, params, support, "rwm", dd, ll, 1.0,
                         chain, config.n_iters, n_dec / config.n_iters,
                         n_acc / config.n_iters])
    columns = ["tag", "family", "params", "support", "kind", "d", "l", "c",
               "chain", "n_iters", "decouple_rate", "accept_rate"]
    return [_write_csv(out_dir / "coupling.csv", columns, rows)]


def _run_pseudo(config: ExperimentConfig, out_dir: Path) -> list:
    """Jump-chain boundary intensities, averaged over n_chains start states
    drawn from the jump-chain-tilted per-component law (exact for the uniform
    target, where the spec intensity lambda(r) is its stationary value)."""
    from .diagnostics import estimate_lambda, sample_jump_tilted

    gspec = config.target
    target = _cached_target(gspec.family, gspec.params, gspec.support)
    fam, params, support = _target_cols(gspec)
    rows = []
    for ci, (dd, ll) in enumerate(itertools.product(config.d, config.l)):
        k = config.k if config.k is not None else math.ceil(dd**0.4)
        r_list = tuple(r for r in config.r if 0.0 <= r <= ll) or tuple(np.linspace(0.0, ll, 5)[1:])
        cfg = KernelConfig(l=ll, d=dd, kind="pseudo")
        n_starts = max(1, config.n_chains)
        reps = max(1, config.n_rep // n_starts)
        acc_mean = np.zeros(len(r_list))
        acc_var = np.zeros(len(r_list))
        for chain in range(n_starts):
            rng = chain_rng(config.seed, ci, chain)
            x0 = sample_jump_tilted(target, ll, dd, rng)
            means, ses = estimate_lambda(target, cfg, x0, list(r_list), k, reps, rng)
            acc_mean += means
            acc_var += ses**2
        acc_mean /= n_starts
        acc_se = np.sqrt(acc_var) / n_starts
        for r, m, se in zip(r_list, acc_mean, acc_se):
            rows.append(["pseudo", fam, params, support, "pseudo", dd, ll, 1.0,
                         r, k, n_starts * reps, m, se,
                         theory.lambda_intensity(r, ll, target.fstar)])
    columns = ["tag", "family", "params", "support", "kind", "d", "l", "c",
               "r", "k", "n_rep", "lambda_hat", "lambda_se", "lambda_theory"]
    return [_write_csv(out_dir / "pseudo.csv", columns, rows)]
