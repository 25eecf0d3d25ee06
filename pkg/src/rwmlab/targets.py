"""One-dimensional product-target building blocks.

A target is a density f(x) = exp(g(x)) / Z restricted to an open support,
either the unit interval (0, 1) or the positive half-line (0, inf).  The
d-dimensional target is the i.i.d. product of f, so everything needed by the
samplers and diagnostics reduces to the one-dimensional quantities computed
here: the normalizer Z, the boundary density fstar, the derivative bound
gstar, and E_f[g'(X)^2].

All g families reduce internally to a polynomial coefficient vector
(ascending order), which is what the compiled chain kernels consume.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as npoly
from scipy.interpolate import PchipInterpolator

__all__ = [
    "GSpec",
    "TargetDensity",
    "normalize",
    "log_density_ratio",
    "sample_iid",
    "UNIT",
    "HALFLINE",
]

UNIT = "unit"
HALFLINE = "halfline"

FAMILIES = ("uniform", "linear", "quadratic", "polynomial")

# Inverse-CDF grid: 4096 uniform knots, refined x4 over the outer 1/64 of the
# (mapped) domain where the discontinuous boundary mass lives.
_GRID_KNOTS = 4096
_EDGE_FRACTION = 1.0 / 64.0
_EDGE_REFINE = 4

_SIMPSON_TOL = 1e-10


@dataclass(frozen=True)
class GSpec:
    """Specification of the log-density term g and its support.

    family/params:
        uniform     -> ()              g(x) = 0
        linear      -> (theta,)        g(x) = -theta * x
        quadratic   -> (mu, s)         g(x) = -(x - mu)^2 / (2 s^2)
        polynomial  -> (c0, c1, ...)   g(x) = sum_k c_k x^k
    support: "unit" for (0, 1), "halfline" for (0, inf).
    """

    family: str
    params: tuple = ()
    support: str = UNIT

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.support not in (UNIT, HALFLINE):
            raise ValueError(f"unknown support {self.support!r}")
        object.__setattr__(self, "params", tuple(float(p) for p in self.params))
        arity = {"uniform": 0, "linear": 1, "quadratic": 2}
        if self.family in arity and len(self.params) != arity[self.family]:
            raise ValueError(
                f"family {self.family!r} takes {arity[self.family]} parameter(s)"
            )
        if self.family == "quadratic" and self.params[1] <= 0:
            raise ValueError("quadratic family needs s > 0")

    def coeffs(self) -> np.ndarray:
        """Polynomial coefficients of g, ascending, trailing zeros trimmed."""
        if self.family == "uniform":
            c = np.zeros(0)
        elif self.family == "linear":
            c = np.array([0.0, -self.params[0]])
        elif self.family == "quadratic":
            mu, s = self.params
            c = np.array([-mu * mu / (2 * s * s), mu / (s * s), -1.0 / (2 * s * s)])
        else:
            c = np.asarray(self.params, dtype=float)
        nz = np.nonzero(c)[0]
        return c[: nz[-1] + 1].copy() if nz.size else np.zeros(0)

    def to_dict(self) -> dict:
        return {"family": self.family, "params": list(self.params), "support": self.support}

    @classmethod
    def from_dict(cls, data: dict) -> "GSpec":
        return cls(
            family=data["family"],
            params=tuple(data.get("params", ())),
            support=data.get("support", UNIT),
        )


def _adaptive_simpson(fn, a, b, tol=_SIMPSON_TOL):
    """Adaptive Simpson quadrature with Richardson acceptance on [a, b]."""

    def _simpson(fa, fm, fb, h):
        return h / 6.0 * (fa + 4.0 * fm + fb)

    def _recurse(a, fa, b, fb, m, fm, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm = fn(lm)
        frm = fn(rm)
        left = _simpson(fa, flm, fm, m - a)
        right = _simpson(fm, frm, fb, b - m)
        if depth > 48:
            return left + right
        if abs(left + right - whole) <= 15.0 * tol:
            return left + right + (left + right - whole) / 15.0
        return _recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1) + _recurse(
            m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1
        )

    fa, fb = fn(a), fn(b)
    m = 0.5 * (a + b)
    fm = fn(m)
    return _recurse(a, fa, b, fb, m, fm, _simpson(fa, fm, fb, b - a), tol, 0)


def _halfline_integrand(fn):
    """Map integral over (0, inf) to (0, 1) via x = t / (1 - t)."""

    def mapped(t):
        if t >= 1.0:
            return 0.0
        return fn(t / (1.0 - t)) * (1.0 - t) ** -2

    return mapped


@dataclass(frozen=True, eq=False)
class TargetDensity:
    """A normalized target: immutable after construction (see normalize)."""

    gspec: GSpec
    z: float
    fstar: float
    gstar: float
    e_gprime_sq: float
    _coeffs: np.ndarray = field(repr=False)
    _dcoeffs: np.ndarray = field(repr=False)
    _ppf: PchipInterpolator = field(repr=False)
    _cdf: PchipInterpolator = field(repr=False)

    # -- basic evaluators ---------------------------------------------------

    @property
    def support(self) -> str:
        return self.gspec.support

    @property
    def is_uniform(self) -> bool:
        return self._coeffs.size == 0

    def g(self, x):
        x = np.asarray(x, dtype=float)
        if self._coeffs.size == 0:
            return np.zeros_like(x)
        return npoly.polyval(x, self._coeffs)

    def gprime(self, x):
        x = np.asarray(x, dtype=float)
        if self._dcoeffs.size == 0:
            return np.zeros_like(x)
        return npoly.polyval(x, self._dcoeffs)

    def in_support(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.support == UNIT:
            return (x > 0.0) & (x < 1.0)
        return x > 0.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where(self.in_support(x), np.exp(self.g(x)) / self.z, 0.0)
        return out

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = x if self.support == UNIT else x / (1.0 + x)
        return np.clip(self._cdf(np.clip(t, 0.0, 1.0)), 0.0, 1.0)

    def ppf(self, u):
        """Inverse CDF on the cached monotone grid; maps (0,1) into the open support."""
        u = np.asarray(u, dtype=float)
        t = self._ppf(np.clip(u, 0.0, 1.0))
        if self.support == UNIT:
            lo = np.nextafter(0.0, 1.0)
            hi = np.nextafter(1.0, 0.0)
            return np.clip(t, lo, hi)
        t = np.clip(t, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0))
        return t / (1.0 - t)

    def __eq__(self, other):
        if not isinstance(other, TargetDensity):
            return NotImplemented
        return (
            self.gspec == other.gspec
            and self.z == other.z
            and self.fstar == other.fstar
            and self.gstar == other.gstar
            and self.e_gprime_sq == other.e_gprime_sq
        )


def _sup_abs_gprime(dcoeffs: np.ndarray, support: str) -> float:
    if dcoeffs.size == 0:
        return 0.0
    if support == HALFLINE:
        # normalize() only admits degree <= 1 on the half-line, so g' is constant
        return abs(dcoeffs[0])
    candidates = [0.0, 1.0]
    if dcoeffs.size >= 2:
        ddc = npoly.polyder(dcoeffs)
        roots = npoly.polyroots(ddc)
        for r in roots:
            if abs(r.imag) < 1e-12 and 0.0 <= r.real <= 1.0:
                candidates.append(float(r.real))
    vals = [abs(float(npoly.polyval(x, dcoeffs))) for x in candidates]
    return max(vals)


def _build_knots() -> np.ndarray:
    base = np.linspace(0.0, 1.0, _GRID_KNOTS + 1)
    n_fine = int(_GRID_KNOTS * _EDGE_FRACTION) * _EDGE_REFINE
    fine = np.linspace(0.0, _EDGE_FRACTION, n_fine + 1)
    return np.unique(np.concatenate([base, fine, 1.0 - fine]))


def _grid_cdf(knots: np.ndarray, dens) -> np.ndarray:
    """Cumulative integral of dens over the knot intervals (composite Simpson)."""
    mids = 0.5 * (knots[:-1] + knots[1:])
    fa = dens(knots[:-1])
    fm = dens(mids)
    fb = dens(knots[1:])
    pieces = (knots[1:] - knots[:-1]) / 6.0 * (fa + 4.0 * fm + fb)
    cdf = np.concatenate([[0.0], np.cumsum(pieces)])
    return cdf


def normalize(gspec: GSpec) -> TargetDensity:
    """Normalize a GSpec into a TargetDensity.

    Computes Z = int exp(g), fstar (mean boundary limit on the unit interval,
    left boundary limit on the half-line), gstar = sup|g'|, and E_f[g'(X)^2]
    by adaptive Simpson quadrature.  Rejects half-line specs whose g' is
    unbounded or whose exp(g) is not integrable.

    Deterministic: identical GSpec values produce bit-identical results.
    """
    coeffs = gspec.coeffs()

    if gspec.support == HALFLINE:
        if coeffs.size > 2:
            raise ValueError(
                "half-line target has unbounded g' (degree >= 2); "
                "only linear g is admissible on (0, inf)"
            )
        if coeffs.size < 2 or coeffs[1] >= 0.0:
            raise ValueError("exp(g) is not integrable on (0, inf); need g' < 0")

    dcoeffs = npoly.polyder(coeffs) if coeffs.size else np.zeros(0)

    def eg(x):
        return math.exp(float(npoly.polyval(x, coeffs))) if coeffs.size else 1.0

    def eg_gp2(x):
        gp = float(npoly.polyval(x, dcoeffs)) if dcoeffs.size else 0.0
        return gp * gp * eg(x)

    if gspec.support == UNIT:
        z = _adaptive_simpson(eg, 0.0, 1.0)
        moment = _adaptive_simpson(eg_gp2, 0.0, 1.0)
        fstar = (eg(0.0) + eg(1.0)) / (2.0 * z)
    else:
        z = _adaptive_simpson(_halfline_integrand(eg), 0.0, 1.0)
        moment = _adaptive_simpson(_halfline_integrand(eg_gp2), 0.0, 1.0)
        fstar = eg(0.0) / z

    if not (z > 0.0 and math.isfinite(z)):
        raise ValueError(f"normalizer is not a positive real: {z}")

    gstar = _sup_abs_gprime(dcoeffs, gspec.support)
    e_gprime_sq = moment / z

    if gspec.family == "uniform":
        # exact by construction
        z, fstar, gstar, e_gprime_sq = 1.0, 1.0, 0.0, 0.0

    # inverse-CDF grid in the (mapped) unit coordinate
    knots = _build_knots()
    if gspec.support == UNIT:
        dens = lambda t: np.exp(npoly.polyval(t, coeffs)) if coeffs.size else np.ones_like(t)
    else:
        def dens(t):
            t = np.asarray(t, dtype=float)
            out = np.zeros_like(t)
            inner = t < 1.0
            x = t[inner] / (1.0 - t[inner])
            out[inner] = np.exp(npoly.polyval(x, coeffs) - 2.0 * np.log1p(-t[inner]))
            return out

    cdf_vals = _grid_cdf(knots, dens)
    grid_total = cdf_vals[-1]
    if abs(grid_total - z) > 1e-8 * z:
        raise ValueError(
            f"density fails to integrate to 1 over the support: "
            f"grid integral {grid_total!r} vs Z {z!r}"
        )
    cdf_vals = cdf_vals / grid_total
    cdf_vals[0], cdf_vals[-1] = 0.0, 1.0

    # drop flat spots (dead tail mass on the half-line) so the inverse stays
    # strictly increasing
    k_cdf, idx = np.unique(cdf_vals, return_index=True)
    ppf = PchipInterpolator(k_cdf, knots[idx], extrapolate=False)
    cdf = PchipInterpolator(knots, cdf_vals, extrapolate=False)

    return TargetDensity(
        gspec=gspec,
        z=z,
        fstar=fstar,
        gstar=gstar,
        e_gprime_sq=e_gprime_sq,
        _coeffs=coeffs,
        _dcoeffs=dcoeffs,
        _ppf=ppf,
        _cdf=cdf,
    )


def log_density_ratio(target: TargetDensity, x: np.ndarray, y: np.ndarray) -> float:
    """log pi_d(y) - log pi_d(x); -inf when y leaves the open support.

    The normalizer cancels, so only sum_i [g(y_i) - g(x_i)] is evaluated.
    Points exactly on the boundary count as outside.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"dimension mismatch: {x.shape} vs {y.shape}")
    if not np.all(target.in_support(y)):
        return -math.inf
    if target.is_uniform:
        return 0.0
    return float(np.sum(target.g(y) - target.g(x)))


def sample_iid(target: TargetDensity, d: int, rng: np.random.Generator) -> np.ndarray:
    """d i.i.d. draws from f via the cached inverse-CDF grid."""
    if d < 1:
        raise ValueError("d must be >= 1")
    return target.ppf(rng.random(d))
