"""Estimators connecting simulation to the limit theory: acceptance rates,
scaled ESJD, boundary counts, the exact uniform-target acceptance oracle,
jump-chain boundary intensities, inverse staying-probability statistics,
window acceptance proportions, and integrated autocorrelation times.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.fft import next_fast_len

from . import _loops
from .kernels import KernelConfig, StuckChainError
from .targets import UNIT, TargetDensity

__all__ = [
    "RunSummary",
    "BoundaryStats",
    "boundary_count",
    "uniform_accept_oracle",
    "estimate_J",
    "esjd",
    "estimate_lambda",
    "omega_inv",
    "omega_vec",
    "sample_omega_tilted",
    "sample_jump_tilted",
    "omega_inv_stationary_moments",
    "estimate_P_d",
    "fd_statistics",
    "acf",
    "corr_at_lag",
    "iact",
]


@dataclass
class RunSummary:
    """Per-run statistics in the scaled units used throughout: esjd_scaled is
    d times the per-iteration mean of the summed squared coordinate jumps."""

    n_iters: int
    accept_rate: float
    esjd_scaled: float
    iact_first: float = float("nan")
    acf: list = field(default_factory=list)

    def __post_init__(self):
        if not 0.0 <= self.accept_rate <= 1.0:
            raise ValueError("accept_rate must lie in [0, 1]")
        if self.esjd_scaled < 0.0:
            raise ValueError("esjd_scaled must be nonnegative")


@dataclass
class BoundaryStats:
    """Boundary-count profile of a single state: b_d^r over a grid of r, the
    log-d membership flag for the count at r = l, and the per-state deviation
    of the mean-square g' statistic from its stationary expectation."""

    r_grid: np.ndarray
    counts: np.ndarray
    fd1_ok: bool
    fd4_stat: float
    gamma: float


def boundary_count(state, r: float, l: float, d: int) -> int:
    """#{j : x_j in (0, r/d) u (1 - r/d, 1)} for a unit-interval state."""
    if not 0.0 <= r <= l:
        raise ValueError(f"r must lie in [0, l], got r={r}, l={l}")
    x = np.asarray(state, dtype=float)
    bound = r / d
    return int(np.count_nonzero((x < bound) | (x > 1.0 - bound)))


def uniform_accept_oracle(state, l: float, d: int) -> float:
    """Exact acceptance probability from `state` under the uniform target:
    the product of (1/2 + x/(2 sigma)) over components within sigma of either
    boundary; interior components contribute 1."""
    x = np.asarray(state, dtype=float)
    sigma = l / d
    lo = x[x < sigma]
    hi = x[x > 1.0 - sigma]
    prob = 1.0
    if lo.size:
        prob *= float(np.prod(0.5 + lo / (2.0 * sigma)))
    if hi.size:
        prob *= float(np.prod(0.5 + (1.0 - hi) / (2.0 * sigma)))
    return prob


def estimate_J(target: TargetDensity, cfg: KernelConfig, state, n_mc: int, rng):
    """Monte Carlo estimate of the acceptance probability from `state`.

    Returns (estimate, standard_error).
    """
    if n_mc < 10**3:
        raise ValueError("n_mc must be at least 1e3")
    x = np.asarray(state, dtype=float)
    support_code = 0 if target.support == UNIT else 1
    n_acc = _loops.accept_mc(target._coeffs, support_code, cfg.sigma, cfg.d, x, n_mc, rng)
    p = n_acc / n_mc
    se = math.sqrt(max(p * (1.0 - p), 0.0) / n_mc)
    return p, se


def esjd(trajectory) -> float:
    """Scaled expected squared jumping distance of a (T, d) trajectory:
    d times the per-iteration mean of sum_i (x_{t+1,i} - x_{t,i})^2."""
    traj = np.asarray(trajectory, dtype=float)
    if traj.ndim != 2 or traj.shape[0] < 2:
        raise ValueError("trajectory must be a (T >= 2, d) array")
    d = traj.shape[1]
    sq = np.sum(np.diff(traj, axis=0) ** 2, axis=1)
    return d * float(np.mean(sq))


def estimate_lambda(
    target: TargetDensity,
    cfg: KernelConfig,
    start_state,
    r,
    k: int,
    n_rep: int,
    rng,
    trial_cap: int = 10**9,
):
    """Mean boundary count b_d^r after k jump-chain steps from start_state,
    averaged over n_rep independent pseudo-RWM replicas.

    k must sit inside the homogenization window [ceil(d^0.3), ceil(d^0.5)].
    r may be a scalar or a sequence; returns (estimate, standard_error) with
    matching shape.
    """
    d = cfg.d
    k_lo, k_hi = math.ceil(d**0.3), math.ceil(d**0.5)
    if not k_lo <= k <= k_hi:
        raise ValueError(f"k={k} outside the window [{k_lo}, {k_hi}] for d={d}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if np.any(r_arr < 0) or np.any(r_arr > cfg.l):
        raise ValueError("r values must lie in [0, l]")
    x0 = np.asarray(start_state, dtype=float)
    support_code = 0 if target.support == UNIT else 1
    sums, sqs, status = _loops.lambda_replicas(
        target._coeffs, support_code, cfg.sigma, d, k, n_rep, x0, rng, r_arr / d, trial_cap
    )
    if status < 0:
        raise StuckChainError(x0, trial_cap)
    mean = sums / n_rep
    var = np.maximum(sqs / n_rep - mean**2, 0.0)
    se = np.sqrt(var / n_rep)
    if np.isscalar(r) or np.asarray(r).ndim == 0:
        return float(mean[0]), float(se[0])
    return mean, se


def omega_vec(x, sigma: float):
    """Per-component staying probability omega(x) = P(0 < x + sigma*Z < 1)."""
    x = np.asarray(x, dtype=float)
    return 0.5 * (np.minimum(1.0, x / sigma) + np.minimum(1.0, (1.0 - x) / sigma))


def omega_inv(state, l: float, d: int) -> float:
    """Product of 1/omega over the components of a unit-interval state."""
    sigma = l / d
    w = omega_vec(np.asarray(state, dtype=float), sigma)
    return float(np.prod(1.0 / w))


def sample_omega_tilted(l: float, d: int, size: int, rng) -> np.ndarray:
    """(size, d) i.i.d. draws from the jump-chain-tilted per-component law
    with density omega(x) / (1 - sigma/2) on (0, 1), by rejection from U(0,1)."""
    sigma = l / d
    n = size * d
    out = np.empty(n)
    filled = 0
    while filled < n:
        need = n - filled
        x = rng.random(need)
        keep = rng.random(need) < omega_vec(x, sigma)
        k = int(np.count_nonzero(keep))
        out[filled : filled + k] = x[keep]
        filled += k
    return out.reshape(size, d)


def sample_jump_tilted(target: TargetDensity, l: float, d: int, rng) -> np.ndarray:
    """One state with components drawn from the density proportional to
    f(x) * omega(x): the per-component stationary law of the hypercube-walk
    jump chain, and of the RWM jump chain when the target is uniform.
    Rejection from f with acceptance probability omega."""
    sigma = l / d
    out = np.empty(d)
    filled = 0
    while filled < d:
        need = d - filled
        x = target.ppf(rng.random(need))
        keep = rng.random(need) < omega_vec(x, sigma)
        k = int(np.count_nonzero(keep))
        out[filled : filled + k] = x[keep]
        filled += k
    return out


def omega_inv_stationary_moments(l: float, d: int, n_rep: int, rng, chunk: int = 20000):
    """First and second moments of omega_inv under per-component tilted
    stationary draws.  Returns (m1, se1, m2, se2)."""
    sigma = l / d
    s1 = s2 = s4 = 0.0
    done = 0
    while done < n_rep:
        m = min(chunk, n_rep - done)
        block = sample_omega_tilted(l, d, m, rng)
        oi = np.prod(1.0 / omega_vec(block, sigma), axis=1)
        s1 += float(np.sum(oi))
        s2 += float(np.sum(oi**2))
        s4 += float(np.sum(oi**4))
        done += m
    m1 = s1 / n_rep
    v1 = max(s2 / n_rep - m1 * m1, 0.0)
    m2 = s2 / n_rep
    v2 = max(s4 / n_rep - m2 * m2, 0.0)
    return m1, math.sqrt(v1 / n_rep), m2, math.sqrt(v2 / n_rep)


def estimate_P_d(target: TargetDensity, cfg: KernelConfig, start_state, window: int, rng) -> float:
    """Proportion of accepted RWM moves over a `window`-iteration stretch."""
    if window < 1:
        raise ValueError("window must be >= 1")
    x = np.asarray(start_state, dtype=float).copy()
    support_code = 0 if target.support == UNIT else 1
    dummy = np.empty(1)
    wins = np.zeros(1, np.int64)
    n_acc, *_ = _loops.run_chain(
        target._coeffs, support_code, _loops.KIND_RWM, cfg.sigma, cfg.d, cfg.d,
        window, x, rng, dummy, False, dummy, False, 0, False, 0, wins,
    )
    return n_acc / window


def fd_statistics(target: TargetDensity, state, l: float, gamma: float = 0.5, n_r: int = 5) -> BoundaryStats:
    """Boundary-count profile b_d^r on an r grid, the gamma*log(d) membership
    flag at r = l, and the mean-square g' deviation statistic."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    x = np.asarray(state, dtype=float)
    d = x.size
    r_grid = np.linspace(0.0, l, n_r)
    counts = np.array([boundary_count(x, r, l, d) for r in r_grid])
    fd1_ok = counts[-1] <= gamma * math.log(d)
    fd4_stat = abs(float(np.mean(target.gprime(x) ** 2)) - target.e_gprime_sq)
    return BoundaryStats(r_grid=r_grid, counts=counts, fd1_ok=bool(fd1_ok),
                         fd4_stat=fd4_stat, gamma=gamma)


def acf(series, max_lag: int) -> np.ndarray:
    """Autocorrelation at lags 0..max_lag (FFT, biased normalization)."""
    x = np.asarray(series, dtype=float)
    n = x.size
    if max_lag >= n:
        raise ValueError("max_lag must be smaller than the series length")
    x = x - x.mean()
    m = next_fast_len(2 * n)
    f = np.fft.rfft(x, m)
    c = np.fft.irfft(f * np.conj(f), m)[: max_lag + 1]
    if c[0] <= 0.0:
        raise ValueError("series has zero variance")
    return c / c[0]


def corr_at_lag(series, lag: int) -> float:
    """Single-lag autocorrelation estimate (stationary mean/variance)."""
    x = np.asarray(series, dtype=float)
    if lag == 0:
        return 1.0
    if lag >= x.size:
        raise ValueError("lag must be smaller than the series length")
    mu = x.mean()
    var = x.var()
    cov = float(np.mean((x[:-lag] - mu) * (x[lag:] - mu)))
    return cov / var


def iact(series, max_lag: int) -> float:
    """Integrated autocorrelation time 1 + 2 sum rho(k), truncated by Geyer's
    initial-positive-sequence rule on paired lags.  Floored at 0.5."""
    x = np.asarray(series, dtype=float)
    if x.size < 50 * max_lag:
        raise ValueError(
            f"series too short: need >= 50*max_lag = {50 * max_lag}, got {x.size}"
        )
    rho = acf(x, max_lag)
    tau = -1.0
    m = 0
    while 2 * m + 1 <= max_lag:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    return max(tau, 0.5)
