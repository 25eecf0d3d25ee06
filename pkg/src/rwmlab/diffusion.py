"""Reference simulation of the limiting reflected Langevin diffusions and the
spectral autocorrelation oracle for the zero-drift (uniform-target) case.

The limit process on [0,1] is dV = sqrt(phi) dB + (phi/2) g'(V) dt with
instantaneous reflection at both boundaries (a single reflecting boundary at
0 on the half-line).  Reflection is realized by folding the Euler-Maruyama
increment back into the support, which is exact in distribution for Brownian
increments at the step sizes used here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _loops, theory
from .diagnostics import corr_at_lag
from .targets import UNIT, TargetDensity

__all__ = [
    "DiffusionConfig",
    "simulate_reflected_langevin",
    "reflected_bm_autocorr",
    "chain_vs_diffusion_autocorr",
]

_SERIES_TOL = 1e-12


@dataclass(frozen=True)
class DiffusionConfig:
    """Euler discretization of the limiting diffusion.

    speed: diffusion speed phi; step: Euler step (default 1e-4/speed, which
    resolves the fastest spectral mode used in tests by >= 1e3 steps);
    horizon: total simulated time; support: "unit" or "halfline".
    """

    speed: float
    horizon: float
    step: float = 0.0
    support: str = UNIT

    def __post_init__(self):
        if self.speed <= 0.0:
            raise ValueError("speed must be positive")
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if self.step == 0.0:
            object.__setattr__(self, "step", 1e-4 / self.speed)
        if self.step <= 0.0:
            raise ValueError("step must be positive")
        if self.step > 1e-3 * self.horizon:
            raise ValueError("step must be <= 1e-3 * horizon")

    @property
    def n_steps(self) -> int:
        return int(math.ceil(self.horizon / self.step))


def simulate_reflected_langevin(
    target: TargetDensity,
    cfg: DiffusionConfig,
    v0: float,
    rng,
    record_stride: int = 1,
):
    """Simulate the reflected Langevin limit for `target`.

    Returns (times, values) sampled every record_stride Euler steps.  The
    drift is (speed/2) * g'(v); overshoots are folded back into the support.
    """
    if not np.all(target.in_support(v0)):
        raise ValueError("v0 must lie in the open support")
    if target.support != cfg.support:
        raise ValueError("target and config support disagree")
    n_rec = cfg.n_steps // record_stride
    out = np.empty(n_rec)
    support_code = 0 if cfg.support == UNIT else 1
    final = _loops.euler_reflected(
        target._dcoeffs, cfg.speed, support_code, cfg.step, cfg.n_steps,
        float(v0), rng, record_stride, out,
    )
    if not math.isfinite(final) or not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite drift evaluation in Euler step")
    times = cfg.step * record_stride * np.arange(1, n_rec + 1)
    return times, out


def reflected_bm_autocorr(phi: float, t: float) -> float:
    """Stationary autocorrelation of reflected Brownian motion on [0,1] with
    variance rate phi, from the Neumann cosine eigenbasis:

        rho(t) = sum_{k odd} (96 / (pi^4 k^4)) exp(-k^2 pi^2 phi t / 2)

    truncated once terms drop below 1e-12.
    """
    if phi <= 0.0 or t < 0.0:
        raise ValueError("need phi > 0 and t >= 0")
    pi4 = math.pi**4
    decay = math.pi * math.pi * phi * t / 2.0
    total = 0.0
    k = 1
    while True:
        term = 96.0 / (pi4 * k**4) * math.exp(-decay * k * k)
        if term < _SERIES_TOL:
            break
        total += term
        k += 2
    return total


def _diffusion_autocorr_sim(target: TargetDensity, speed: float, t_grid, rng):
    """Autocorrelation oracle by long Euler simulation (non-uniform targets)."""
    t_max = max(t_grid)
    # record on a grid fine enough to hit each requested lag exactly
    rec_dt = t_max / 200.0
    horizon = 4000.0 * t_max
    step = rec_dt / 50.0
    cfg = DiffusionConfig(speed=speed, horizon=horizon, step=step, support=target.support)
    stride = max(1, round(rec_dt / cfg.step))
    v0 = float(target.ppf(rng.random()))
    _, path = simulate_reflected_langevin(target, cfg, v0, rng, record_stride=stride)
    dt = cfg.step * stride
    return [corr_at_lag(path, max(1, round(t / dt))) if t > 0 else 1.0 for t in t_grid]


def chain_vs_diffusion_autocorr(series, d: int, l: float, target: TargetDensity, t_grid, rng=None):
    """Pair chain autocorrelations with the diffusion-limit oracle.

    series is the first-component trace of a stationary chain; diffusion time
    t corresponds to lag ceil(t * d^2).  Uses the spectral oracle for the
    uniform target and a long Euler simulation otherwise (which consumes rng).
    Returns a list of (t, chain_rho, diffusion_rho) rows.
    """
    x = np.asarray(series, dtype=float)
    t_grid = list(t_grid)
    max_lag = max(math.ceil(t * d * d) for t in t_grid)
    if x.size < 20 * max_lag:
        raise ValueError(
            f"trajectory too short: need >= 20 * max(t)*d^2 = {20 * max_lag}, got {x.size}"
        )
    if target.support == UNIT:
        speed = theory.phi(l, target.fstar)
    else:
        speed = theory.phi_halfline(l, target.fstar)
    if target.is_uniform:
        oracle = [reflected_bm_autocorr(speed, t) if t > 0 else 1.0 for t in t_grid]
    else:
        if rng is None:
            raise ValueError("rng is required for the simulated oracle")
        oracle = _diffusion_autocorr_sim(target, speed, t_grid, rng)
    rows = []
    for t, diff_rho in zip(t_grid, oracle):
        lag = math.ceil(t * d * d)
        chain_rho = corr_at_lag(x, lag) if t > 0 else 1.0
        rows.append((t, chain_rho, diff_rho))
    return rows
