"""Radial multiplier family: piecewise weights with convex profile.

The family phi_R is the rescaling R * phi0(r/R) of a base profile whose
first derivative is

    phi0'(r) = M + r/(2n) - r^3/(2n(n+2))          for r <= 1,
    phi0'(r) = M + 1/(2n) - r^(1-n)/(2n(n+2))      for r > 1,

with M >= 1.  The module carries the full calculus in closed form: phi
itself (antiderivative with phi(0) = 0), first and second derivatives,
Laplacian, and the bilaplacian split into an absolutely continuous density
plus the negative singular parts (a surface Dirac on r = R for n >= 4, a
point Dirac at the origin for n = 3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MultiplierFamily",
    "MultiplierValues",
    "SingularParts",
    "BoundsReport",
    "eval",
    "eval_arrays",
    "singular_parts",
    "verify_bounds",
    "default_sample_radii",
]


@dataclass(frozen=True)
class MultiplierFamily:
    """Parameters of one multiplier: dimension n, strength M >= 1, scale R > 0."""

    n: int
    M: float = 1.0
    R: float = 1.0

    def __post_init__(self):
        if self.n < 3:
            raise ValueError(f"dimension must be at least 3, got n={self.n}")
        if not self.M >= 1.0:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if not self.R > 0:
            raise ValueError(f"R must be positive, got {self.R}")

    @property
    def c1(self) -> float:
        return 1.0 / (2.0 * self.n)

    @property
    def c2(self) -> float:
        return 1.0 / (2.0 * self.n * (self.n + 2))


@dataclass(frozen=True)
class MultiplierValues:
    """Pointwise multiplier calculus at one radius.

    lap_phi is +inf at r = 0 (flagged by at_origin); bilap_ac is -inf at
    r = 0 when n >= 4.  Everything else is finite for r >= 0.
    """

    phi: float
    phi_p: float
    phi_pp: float
    lap_phi: float
    bilap_ac: float
    at_origin: bool = False


@dataclass(frozen=True)
class SingularParts:
    """Coefficients of the negative singular parts of the bilaplacian.

    surface_weight multiplies the surface Dirac on |x| = R (zero for n = 3);
    origin_mass multiplies the point Dirac at x = 0 (zero for n >= 4).
    """

    surface_weight: float
    origin_mass: float


@dataclass(frozen=True)
class BoundsReport:
    passed: bool
    worst_slack: float
    worst_bound: str
    worst_radius: float
    slack_by_bound: dict


def eval_arrays(fam: MultiplierFamily, r: np.ndarray) -> dict:
    """Vectorized closed forms; returns dict of arrays keyed like MultiplierValues."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative radius")
    n, M, R = fam.n, fam.M, fam.R
    c1, c2 = fam.c1, fam.c2
    s = r / R
    inner = s <= 1.0
    outer = ~inner

    phi = np.empty_like(s)
    phi_p = np.empty_like(s)
    phi_pp = np.empty_like(s)
    lap = np.empty_like(s)
    bilap = np.empty_like(s)

    si = s[inner]
    phi[inner] = R * (M * si + 0.5 * c1 * si**2 - 0.25 * c2 * si**4)
    phi_p[inner] = M + c1 * si - c2 * si**3
    phi_pp[inner] = (c1 - 3.0 * c2 * si**2) / R

    so = s[outer]
    phi0_at_1 = M + 0.5 * c1 - 0.25 * c2
    phi[outer] = R * (
        phi0_at_1 + (M + c1) * (so - 1.0) + c2 / (n - 2) * (so ** (2 - n) - 1.0)
    )
    phi_p[outer] = M + c1 - c2 * so ** (1 - n)
    phi_pp[outer] = (n - 1) * c2 * so ** (-n) / R

    with np.errstate(divide="ignore"):
        ri = r[inner]
        lap[inner] = M * (n - 1) / ri + 0.5 / R - ri**2 / (2.0 * n * R**3)
        lap[outer] = (n - 1) * (M + c1) / r[outer]
        if n == 3:
            bilap[inner] = -1.0 / R**3
            bilap[outer] = 0.0
        else:
            bilap[inner] = -(1.0 / R**3 + M * (n - 1) * (n - 3) / ri**3)
            bilap[outer] = -(M + c1) * (n - 1) * (n - 3) / r[outer] ** 3
    return {"phi": phi, "phi_p": phi_p, "phi_pp": phi_pp, "lap_phi": lap, "bilap_ac": bilap}


def eval(fam: MultiplierFamily, r: float) -> MultiplierValues:
    """Closed-form multiplier calculus at a single radius r >= 0."""
    if r < 0:
        raise ValueError(f"negative radius {r}")
    vals = eval_arrays(fam, np.asarray([r]))
    at_origin = r == 0.0
    return MultiplierValues(
        phi=float(vals["phi"][0]),
        phi_p=float(vals["phi_p"][0]),
        phi_pp=float(vals["phi_pp"][0]),
        lap_phi=float(vals["lap_phi"][0]),
        bilap_ac=float(vals["bilap_ac"][0]),
        at_origin=at_origin,
    )


def singular_parts(fam: MultiplierFamily) -> SingularParts:
    """Dirac coefficients of the bilaplacian: both nonpositive."""
    if fam.n == 3:
        return SingularParts(surface_weight=0.0, origin_mass=-8.0 * math.pi * fam.M)
    return SingularParts(
        surface_weight=-(fam.n - 3) / (2.0 * fam.n) / fam.R**2, origin_mass=0.0
    )


def default_sample_radii(fam: MultiplierFamily, count: int = 10_000) -> np.ndarray:
    """Log-spaced radii over [1e-3 R, 1e3 R] plus r = 0, for bound checks."""
    radii = fam.R * np.logspace(-3.0, 3.0, count)
    return np.concatenate(([0.0], radii))


def verify_bounds(fam: MultiplierFamily, r_samples) -> BoundsReport:
    """Check the closed-form lower/upper bounds of the calculus at samples.

    Bounds checked (kappa = (n-1)/(2n(n+2)), m = min(1/R, R^(n-1)/r^n)):
      phi'/r >= M/r + kappa*m        phi'  <= M + 1/(2n)
      phi''  >= kappa*m              phi'' <= 1/(2nR)
      |lap phi| <= M(n-1)/r + 1/(2 max(r, R))
    Returns the worst normalized slack; negative slack beyond rounding
    tolerance marks the report failed with the offending bound and radius.
    """
    r = np.asarray(r_samples, dtype=float)
    if np.any(r < 0):
        raise ValueError("negative radius in samples")
    n, M, R = fam.n, fam.M, fam.R
    kappa = (n - 1) * fam.c2
    vals = eval_arrays(fam, r)
    pos = r > 0

    with np.errstate(divide="ignore", over="ignore"):
        mcut = np.minimum(1.0 / R, np.where(pos, R ** (n - 1) / r**n, np.inf))
        mcut = np.where(pos, mcut, 1.0 / R)

        checks = {}
        lhs = vals["phi_p"][pos] / r[pos]
        rhs = M / r[pos] + kappa * mcut[pos]
        checks["phi_p_over_r_lower"] = ((lhs - rhs) / np.maximum(1.0, np.abs(rhs)), r[pos])

        rhs = kappa * mcut
        checks["phi_pp_lower"] = ((vals["phi_pp"] - rhs) / np.maximum(1.0, np.abs(rhs)), r)

        cap = M + fam.c1
        checks["phi_p_upper"] = ((cap - vals["phi_p"]) / cap, r)

        cap = fam.c1 / R
        checks["phi_pp_upper"] = ((cap - vals["phi_pp"]) / cap, r)

        cap = M * (n - 1) / r[pos] + 0.5 / np.maximum(r[pos], R)
        checks["lap_upper"] = ((cap - np.abs(vals["lap_phi"][pos])) / cap, r[pos])

    worst_slack = math.inf
    worst_bound = ""
    worst_radius = math.nan
    slack_by_bound = {}
    for name, (slack, radii) in checks.items():
        k = int(np.argmin(slack))
        slack_by_bound[name] = float(slack[k])
        if slack[k] < worst_slack:
            worst_slack = float(slack[k])
            worst_bound = name
            worst_radius = float(radii[k])
    passed = worst_slack >= -1e-12
    return BoundsReport(
        passed=passed,
        worst_slack=worst_slack,
        worst_bound=worst_bound,
        worst_radius=worst_radius,
        slack_by_bound=slack_by_bound,
    )
