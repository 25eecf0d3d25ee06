"""Chain constructions: RWM, Metropolis-within-Gibbs, the hypercube walk,
the accepted-moves jump chain with geometric holding times, and couplers.

States are plain float64 arrays of length d with every component strictly
inside the open support.  Step functions are pure: they never mutate the
input state and return a fresh array on acceptance (the same array object on
rejection).  All kernels draw d (or k, for partial MwG updates) increments
followed by exactly one acceptance uniform per proposal, so different kernels
fed the same stream stay aligned draw for draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _loops
from .targets import UNIT, TargetDensity, log_density_ratio

__all__ = [
    "KernelConfig",
    "JumpChainStep",
    "StuckChainError",
    "rwm_step",
    "mwg_step",
    "rwh_step",
    "coupled_rwm_rwh_step",
    "pseudo_rwm_step",
    "couple_geometrics",
    "DEFAULT_TRIAL_CAP",
]

KINDS = ("rwm", "mwg", "rwh", "pseudo")
DEFAULT_TRIAL_CAP = 10**9


@dataclass(frozen=True)
class KernelConfig:
    """Proposal-scale parameter l, dimension d, kernel kind, update fraction c.

    The proposal scale is sigma = l / d, constrained below 1/2 so that the
    boundary regions (0, l/d) and (1 - l/d, 1) do not overlap.
    """

    l: float
    d: int
    kind: str = "rwm"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.l <= 0:
            raise ValueError("l must be positive")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if self.l / self.d >= 0.5:
            raise ValueError(f"sigma = l/d = {self.l / self.d} must be < 1/2")
        if not (0.0 < self.c <= 1.0):
            raise ValueError("update fraction c must lie in (0, 1]")
        if self.kind == "mwg" and self.c * self.d < 1.0:
            raise ValueError("mwg requires c*d >= 1")

    @property
    def sigma(self) -> float:
        return self.l / self.d

    @property
    def n_update(self) -> int:
        """Number of coordinates moved per proposal."""
        if self.kind == "mwg":
            return math.ceil(self.c * self.d)
        return self.d


class JumpChainStep(NamedTuple):
    """An accepted move and the number of proposals it took (holding time)."""

    state: np.ndarray
    holding: int


class StuckChainError(RuntimeError):
    """The jump chain exceeded the proposal cap at a numerically stuck state."""

    def __init__(self, state, trials):
        self.state = np.array(state)
        self.trials = trials
        super().__init__(
            f"no accepted move after {trials} proposals "
            f"(state min {self.state.min():.3g}, max {self.state.max():.3g})"
        )


def _check_state(cfg: KernelConfig, state: np.ndarray) -> np.ndarray:
    state = np.asarray(state, dtype=float)
    if state.shape != (cfg.d,):
        raise ValueError(f"state has shape {state.shape}, expected ({cfg.d},)")
    return state


def _accept(u: float, logr: float) -> bool:
    lu = math.log(u) if u > 0.0 else -math.inf
    return lu < logr


def rwm_step(target: TargetDensity, cfg: KernelConfig, state, rng):
    """One random-walk Metropolis proposal: y = x + sigma * Z, Z ~ U[-1,1]^d.

    Returns (next_state, accepted).  Rejection returns the input state object.
    """
    state = _check_state(cfg, state)
    z = rng.uniform(-1.0, 1.0, cfg.d)
    y = state + cfg.sigma * z
    u = rng.random()
    if _accept(u, log_density_ratio(target, state, y)):
        return y, True
    return state, False


def mwg_step(target: TargetDensity, cfg: KernelConfig, state, rng):
    """Metropolis-within-Gibbs: update ceil(c*d) coordinates chosen uniformly
    without replacement, joint accept/reject as in rwm_step.

    With c == 1 the selection step is skipped entirely (all coordinates update
    in natural order), making the kernel draw-for-draw identical to rwm_step.
    Partial updates select via a Fisher-Yates prefix shuffle, consuming one
    uniform per selected coordinate before the increments are drawn.
    """
    state = _check_state(cfg, state)
    k = cfg.n_update
    if k == cfg.d:
        return rwm_step(target, cfg, state, rng)

    idx = np.arange(cfg.d)
    for j in range(k):
        r = j + int(rng.random() * (cfg.d - j))
        idx[j], idx[r] = idx[r], idx[j]
    sel = idx[:k]

    z = rng.uniform(-1.0, 1.0, k)
    y_sel = state[sel] + cfg.sigma * z
    u = rng.random()

    if not np.all(target.in_support(y_sel)):
        return state, False
    logr = float(np.sum(target.g(y_sel) - target.g(state[sel])))
    if _accept(u, logr):
        y = state.copy()
        y[sel] = y_sel
        return y, True
    return state, False


def rwh_step(cfg: KernelConfig, state, rng):
    """Random walk on the hypercube: accept iff the proposal stays inside
    (0,1)^d; no density evaluation.  The acceptance uniform is still drawn
    (and discarded) to keep the stream aligned with rwm_step."""
    state = _check_state(cfg, state)
    z = rng.uniform(-1.0, 1.0, cfg.d)
    y = state + cfg.sigma * z
    rng.random()
    if np.all((y > 0.0) & (y < 1.0)):
        return y, True
    return state, False


def coupled_rwm_rwh_step(target: TargetDensity, cfg: KernelConfig, pair, rng):
    """Advance an RWM chain and a hypercube walk with shared increments and a
    shared acceptance uniform.

    Returns ((x_next, w_next), decoupled) where decoupled is True when the two
    accept decisions differ while the chains sat at equal states.
    """
    x, w = pair
    x = _check_state(cfg, x)
    w = _check_state(cfg, w)
    z = rng.uniform(-1.0, 1.0, cfg.d)
    u = rng.random()

    yw = w + cfg.sigma * z
    accept_w = bool(np.all((yw > 0.0) & (yw < 1.0)))
    w_next = yw if accept_w else w

    yx = x + cfg.sigma * z
    accept_x = _accept(u, log_density_ratio(target, x, yx))
    x_next = yx if accept_x else x

    decoupled = bool(np.array_equal(x, w) and accept_x != accept_w)
    return (x_next, w_next), decoupled


def pseudo_rwm_step(
    target: TargetDensity,
    cfg: KernelConfig,
    state,
    rng,
    max_trials: int = DEFAULT_TRIAL_CAP,
) -> JumpChainStep:
    """One jump-chain step: redraw RWM proposals until one is accepted.

    The trial count is exactly Geometric(J_d(state)) and the accepted move has
    the acceptance-conditioned proposal law, with no explicit computation of
    J_d.  Consumes the stream exactly like `holding` consecutive rwm_step
    calls, so expanding the jump chain by its holding times reproduces the RWM
    path draw for draw.
    """
    state = _check_state(cfg, state)
    x = state.copy()
    trials = _loops.pseudo_jumps(
        target._coeffs, 0 if target.support == UNIT else 1, cfg.sigma, cfg.d, 1, x, rng, max_trials
    )
    if trials < 0:
        raise StuckChainError(state, max_trials)
    return JumpChainStep(state=x, holding=trials)


def couple_geometrics(p: float, q: float, rng):
    """Coupled Geometric(p) and Geometric(q) draws, 0 < q <= p <= 1.

    Y = X when a Bernoulli(q/p) coin lands heads, else Y = X + Z with an
    independent Geometric(q) tail, so P(X != Y) = (p - q) / p and the
    marginals are exact.  Draw order is fixed: X's uniform, the coin, Z's
    uniform (Z is drawn even when unused).
    """
    if not (0.0 < q <= p <= 1.0):
        raise ValueError("need 0 < q <= p <= 1 (pass the larger probability first)")

    def geom(prob):
        if prob == 1.0:
            rng.random()
            return 1
        u = rng.random()
        u = max(u, 1e-300)
        return int(math.floor(math.log(u) / math.log1p(-prob))) + 1

    x_draw = geom(p)
    heads = rng.random() < q / p
    z_draw = geom(q)
    y_draw = x_draw if heads else x_draw + z_draw
    return x_draw, y_draw
