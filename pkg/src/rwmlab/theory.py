"""Closed-form limiting quantities: diffusion speeds, optimal proposal
scalings, asymptotic acceptance rates, the boundary-count intensity, inverse
staying-probability moments, and the Monte Carlo evaluator for the
interior-discontinuity ESJD limit.

Conventions: fstar is the boundary density of the normalized target (mean of
the two one-sided limits on the unit interval, the left limit on the
half-line); l parameterizes the proposal scale sigma_d = l / d.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _loops

__all__ = [
    "phi",
    "aoar",
    "optimal_l",
    "phi_halfline",
    "aoar_halfline",
    "optimal_l_halfline",
    "phi_mwg",
    "aoar_mwg",
    "optimal_l_mwg",
    "lambda_intensity",
    "omega_inv_moment_limits",
    "InteriorDiscontinuitySpec",
    "esjd_limit_interior",
]


def _check_positive(**kwargs):
    for name, value in kwargs.items():
        if not value > 0:
            raise ValueError(f"{name} must be positive, got {value}")


def phi(l: float, fstar: float) -> float:
    """Diffusion speed (l^2/3) exp(-fstar*l/2) on the unit interval."""
    _check_positive(l=l, fstar=fstar)
    return l * l / 3.0 * math.exp(-fstar * l / 2.0)


def aoar(l: float, fstar: float) -> float:
    """Asymptotic acceptance rate exp(-fstar*l/2)."""
    _check_positive(l=l, fstar=fstar)
    return math.exp(-fstar * l / 2.0)


def optimal_l(fstar: float) -> float:
    """argmax of phi: 4/fstar, where the acceptance rate equals exp(-2)."""
    _check_positive(fstar=fstar)
    return 4.0 / fstar


def phi_halfline(l: float, fstar: float) -> float:
    """Half-line diffusion speed (l^2/3) exp(-fstar*l/4)."""
    _check_positive(l=l, fstar=fstar)
    return l * l / 3.0 * math.exp(-fstar * l / 4.0)


def aoar_halfline(l: float, fstar: float) -> float:
    _check_positive(l=l, fstar=fstar)
    return math.exp(-fstar * l / 4.0)


def optimal_l_halfline(fstar: float) -> float:
    """argmax of phi_halfline: 8/fstar (acceptance exp(-2) again)."""
    _check_positive(fstar=fstar)
    return 8.0 / fstar


def phi_mwg(l: float, fstar: float, c: float) -> float:
    """Speed (c*l^2/3) exp(-c*fstar*l/2) when a fraction c of coordinates move."""
    _check_positive(l=l, fstar=fstar)
    if not (0.0 < c <= 1.0):
        raise ValueError("c must lie in (0, 1]")
    return c * l * l / 3.0 * math.exp(-c * fstar * l / 2.0)


def aoar_mwg(l: float, fstar: float, c: float) -> float:
    _check_positive(l=l, fstar=fstar)
    if not (0.0 < c <= 1.0):
        raise ValueError("c must lie in (0, 1]")
    return math.exp(-c * fstar * l / 2.0)


def optimal_l_mwg(fstar: float, c: float) -> float:
    """argmax of phi_mwg: 4/(c*fstar); the optimal speed scales as 1/c."""
    _check_positive(fstar=fstar)
    if not (0.0 < c <= 1.0):
        raise ValueError("c must lie in (0, 1]")
    return 4.0 / (c * fstar)


def lambda_intensity(r: float, l: float, fstar: float) -> float:
    """Stationary jump-chain boundary-count intensity fstar * r * (1 + r/(2l)).

    Defined for 0 <= r <= l (the boundary-region parameterization).
    """
    _check_positive(l=l, fstar=fstar)
    if r < 0 or r > l:
        raise ValueError(f"r must lie in [0, l], got r={r}, l={l}")
    return fstar * r * (1.0 + r / (2.0 * l))


def omega_inv_moment_limits(l: float, fstar: float):
    """Limits of the first two moments of the inverse staying probability
    under the jump-chain-tilted stationary law:

        E[Omega^-1]   -> exp(fstar*l/2)
        E[Omega^-2]   -> exp(fstar*l*(4 ln 2 - 3/2))
    """
    _check_positive(l=l, fstar=fstar)
    first = math.exp(fstar * l / 2.0)
    second = math.exp(fstar * l * (4.0 * math.log(2.0) - 1.5))
    return first, second


@dataclass(frozen=True)
class InteriorDiscontinuitySpec:
    """Density limits (location, left, right) at every discontinuity,
    including the support endpoints with the conventions left[0] = 0 and
    right[-1] = 0.  All other limits must be strictly positive (a zero
    interior limit makes the chain reducible in the limit)."""

    jumps: tuple

    def __post_init__(self):
        jumps = tuple((float(a), float(fm), float(fp)) for a, fm, fp in self.jumps)
        object.__setattr__(self, "jumps", jumps)
        if len(jumps) < 2:
            raise ValueError("need at least the two support endpoints")
        locs = [a for a, _, _ in jumps]
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("discontinuity locations must be strictly increasing")
        if jumps[0][1] != 0.0 or jumps[-1][2] != 0.0:
            raise ValueError("endpoint conventions: left limit at a_0 and right "
                             "limit at a_{k+1} must be 0")
        interior = [fm for _, fm, _ in jumps[1:]] + [fp for _, _, fp in jumps[:-1]]
        if any(v <= 0.0 for v in interior):
            raise ValueError("zero interior density limit: chain is reducible")

    @classmethod
    def boundary_only(cls, f_left: float, f_right: float) -> "InteriorDiscontinuitySpec":
        """Unit-interval target with jumps only at the support endpoints."""
        return cls(jumps=((0.0, 0.0, f_left), (1.0, f_right, 0.0)))

    def limit_arrays(self):
        fm = np.array([fm for _, fm, _ in self.jumps])
        fp = np.array([fp for _, _, fp in self.jumps])
        return fm, fp


def esjd_limit_interior(l: float, spec: InteriorDiscontinuitySpec, n_mc: int, rng):
    """ESJD limit (l^2/3) E[1 ^ prod_j (f_j^-/f_j^+)^(Y_j^+ - Y_j^-)] with
    Y_j^- ~ Po(l f_j^-/4) and Y_j^+ ~ Po(l f_j^+/4) drawn independently.

    Returns (estimate, mc_standard_error).
    """
    _check_positive(l=l)
    if n_mc < 10**4:
        raise ValueError("n_mc must be at least 1e4")
    fm, fp = spec.limit_arrays()
    s1, s2 = _loops.interior_esjd_mc(l, fm, fp, n_mc, rng)
    mean = s1 / n_mc
    var = max(s2 / n_mc - mean * mean, 0.0)
    scale = l * l / 3.0
    return scale * mean, scale * math.sqrt(var / n_mc)
