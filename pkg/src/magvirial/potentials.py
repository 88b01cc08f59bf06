"""Electric/magnetic potential families, field matrix B, and gauge shifts.

Families are closed-form and carry analytic derivatives; the bracket
weight is <x> = sqrt(1 + |x|^2).  Electric families: "polynomial"
(c <x>^m), "constant" (c, radially flat, usable as the repulsive debug
family since dV/dr = 0), "zero", and "custom" (caller-supplied closures,
not JSON-serializable).  Magnetic families: "zero", "constant" (n = 3
Landau gauge A = (-b y / 2, b x / 2, 0)), and "tangential_poly" (n = 3,
A = (b/2) <x>^p (-y, x, 0) with p = lambda - m/2, saturating the allowed
growth).

A time-dependent gauge shift with parameter c0 raises the electric part by
c0 <x>^m, shifts A by -c0 t grad <x>^m, and multiplying a shifted-spec
solution by exp(+i c0 t <x>^m) recovers the base-spec solution under the
propagation convention u_t = -i H u.  The matrix B is unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .grid import ComplexField, Grid, ScalarField, VectorField

__all__ = [
    "ElectricSpec",
    "MagneticSpec",
    "GaugeSpec",
    "PotentialSpec",
    "MagneticMatrixField",
    "AssumptionReport",
    "eval_V",
    "eval_A",
    "electric_values",
    "electric_radial_derivative",
    "vector_potential",
    "magnetic_matrix",
    "b_tau",
    "div_b_tau",
    "check_assumptions",
    "gauge_transform",
    "apply_gauge_phase",
    "spec_to_dict",
    "spec_from_dict",
]

ELECTRIC_FAMILIES = ("polynomial", "constant", "zero", "custom")
MAGNETIC_FAMILIES = ("zero", "constant", "tangential_poly")


@dataclass(frozen=True)
class ElectricSpec:
    family: str = "polynomial"
    c: float = 1.0
    m: float = 2.0
    repulsive: bool = False
    v_fn: Callable | None = field(default=None, repr=False, compare=False)
    v_r_fn: Callable | None = field(default=None, repr=False, compare=False)


@dataclass(frozen=True)
class MagneticSpec:
    family: str = "zero"
    b: float = 0.0
    lam: float = 1.0


@dataclass(frozen=True)
class GaugeSpec:
    c0: float = 0.0


@dataclass(frozen=True)
class PotentialSpec:
    electric: ElectricSpec = ElectricSpec()
    magnetic: MagneticSpec = MagneticSpec()
    gauge: GaugeSpec = GaugeSpec()

    def __post_init__(self):
        e, b = self.electric, self.magnetic
        if e.family not in ELECTRIC_FAMILIES:
            raise ValueError(f"unknown electric family {e.family!r}")
        if b.family not in MAGNETIC_FAMILIES:
            raise ValueError(f"unknown magnetic family {b.family!r}")
        if not e.m >= 2.0:
            raise ValueError(f"growth exponent m must be >= 2, got {e.m}")
        if not e.c > 0.0:
            raise ValueError(f"electric amplitude c must be positive, got {e.c}")
        if not (e.m / 2.0 <= b.lam <= e.m - 1.0):
            raise ValueError(
                f"lambda must lie in [m/2, m-1] = [{e.m / 2.0}, {e.m - 1.0}], got {b.lam}"
            )
        if e.family == "custom" and (e.v_fn is None or e.v_r_fn is None):
            raise ValueError("custom electric family needs v_fn and v_r_fn closures")

    @property
    def m(self) -> float:
        return self.electric.m

    @property
    def lam(self) -> float:
        return self.magnetic.lam

    @property
    def c0(self) -> float:
        return self.gauge.c0

    @property
    def is_time_dependent(self) -> bool:
        return self.c0 != 0.0


@dataclass
class MagneticMatrixField:
    """Per-node antisymmetric matrix B, stored as (n, n, N, ..., N)."""

    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        expected = (self.grid.n, self.grid.n) + self.grid.shape
        values = np.asarray(self.values, dtype=float)
        if values.shape != expected:
            raise ValueError(f"B shape {values.shape}, expected {expected}")
        scale = max(1.0, float(np.max(np.abs(values))))
        skew_defect = float(np.max(np.abs(values + np.swapaxes(values, 0, 1))))
        if skew_defect > 1e-12 * scale:
            raise ValueError(f"B is not antisymmetric: defect {skew_defect:.3e}")
        values.setflags(write=False)
        self.values = values


def _bracket(X: np.ndarray) -> np.ndarray:
    """<x> = sqrt(1 + |x|^2) for points X of shape (n, ...)."""
    return np.sqrt(1.0 + np.sum(X * X, axis=0))


def electric_values(spec: PotentialSpec, t: float, X: np.ndarray) -> np.ndarray:
    e = spec.electric
    if e.family == "polynomial":
        v = e.c * _bracket(X) ** e.m
    elif e.family == "constant":
        v = np.full(X.shape[1:], e.c)
    elif e.family == "zero":
        v = np.zeros(X.shape[1:])
    else:
        v = np.asarray(e.v_fn(t, X), dtype=float)
    if spec.c0 != 0.0:
        v = v + spec.c0 * _bracket(X) ** e.m
    return v


def electric_radial_derivative(spec: PotentialSpec, t: float, X: np.ndarray) -> np.ndarray:
    """dV/dr, analytic per family (d<x>^m/dr = m r <x>^(m-2))."""
    e = spec.electric
    r = np.sqrt(np.sum(X * X, axis=0))
    if e.family == "polynomial":
        vr = e.c * e.m * r * _bracket(X) ** (e.m - 2.0)
    elif e.family in ("constant", "zero"):
        vr = np.zeros(X.shape[1:])
    else:
        vr = np.asarray(e.v_r_fn(t, X), dtype=float)
    if spec.c0 != 0.0:
        vr = vr + spec.c0 * e.m * r * _bracket(X) ** (e.m - 2.0)
    return vr


def _tangential_seed(X: np.ndarray) -> np.ndarray:
    """The vector (-y, x, 0): tangential to spheres, divergence free."""
    T = np.zeros_like(X)
    T[0] = -X[1]
    T[1] = X[0]
    return T


def vector_potential(spec: PotentialSpec, t: float, X: np.ndarray) -> np.ndarray:
    mag = spec.magnetic
    n = X.shape[0]
    if mag.family == "zero":
        A = np.zeros_like(X)
    elif mag.family in ("constant", "tangential_poly"):
        if n != 3:
            raise ValueError(f"magnetic family {mag.family!r} is defined for n = 3 only")
        A = 0.5 * mag.b * _tangential_seed(X)
        if mag.family == "tangential_poly":
            p = mag.lam - spec.m / 2.0
            A = A * _bracket(X) ** p
    else:  # pragma: no cover - guarded by PotentialSpec validation
        raise ValueError(f"unknown magnetic family {mag.family!r}")
    if spec.c0 != 0.0 and t != 0.0:
        # gauge shift -c0 t grad<x>^m keeps exp(+i c0 t <x>^m) the recovery phase
        A = A - spec.c0 * t * spec.m * X * _bracket(X) ** (spec.m - 2.0)
    return A


def _a_jacobian(spec: PotentialSpec, t: float, X: np.ndarray) -> np.ndarray | None:
    """Analytic J[i, j] = dA^i/dx^j where available, else None."""
    mag = spec.magnetic
    n = X.shape[0]
    base_shape = X.shape[1:]
    J = np.zeros((n, n) + base_shape)
    if mag.family == "zero":
        pass
    elif mag.family == "constant":
        J[0, 1] = -0.5 * mag.b
        J[1, 0] = 0.5 * mag.b
    elif mag.family == "tangential_poly":
        p = mag.lam - spec.m / 2.0
        g = _bracket(X) ** p
        gj = p * X * _bracket(X) ** (p - 2.0)  # gradient of g
        T = _tangential_seed(X)
        for i in range(n):
            for j in range(n):
                J[i, j] = 0.5 * mag.b * gj[j] * T[i]
        J[0, 1] += -0.5 * mag.b * g
        J[1, 0] += 0.5 * mag.b * g
    else:
        return None
    if spec.c0 != 0.0 and t != 0.0:
        br = _bracket(X)
        m = spec.m
        scale = -spec.c0 * t * m
        for i in range(n):
            J[i, i] += scale * br ** (m - 2.0)
            for j in range(n):
                J[i, j] += scale * (m - 2.0) * X[i] * X[j] * br ** (m - 4.0)
    return J


def eval_V(spec: PotentialSpec, t: float, g: Grid) -> ScalarField:
    return ScalarField(g, electric_values(spec, t, g.coordinates()))


def eval_A(spec: PotentialSpec, t: float, g: Grid) -> VectorField:
    return VectorField(g, vector_potential(spec, t, g.coordinates()))


def _nodal_derivative(values: np.ndarray, axis: int, h: float) -> np.ndarray:
    """Central difference along one axis, one-sided 2nd order at the faces."""
    out = np.empty_like(values)
    v = np.moveaxis(values, axis, 0)
    o = np.moveaxis(out, axis, 0)
    o[1:-1] = (v[2:] - v[:-2]) / (2.0 * h)
    o[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h)
    o[-1] = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * h)
    return out


def magnetic_matrix(spec: PotentialSpec, t: float, g: Grid) -> MagneticMatrixField:
    """B = DA - DA^t, from the analytic Jacobian when the family has one."""
    X = g.coordinates()
    J = _a_jacobian(spec, t, X)
    if J is None:
        A = vector_potential(spec, t, X)
        J = np.empty((g.n, g.n) + g.shape)
        for i in range(g.n):
            for j in range(g.n):
                J[i, j] = _nodal_derivative(A[i], j, g.spacing)
    return MagneticMatrixField(g, J - np.swapaxes(J, 0, 1))


def b_tau(B: MagneticMatrixField, g: Grid) -> VectorField:
    """Tangential field (x/|x|) . B; satisfies b_tau . x = 0 nodewise."""
    if B.grid != g:
        raise ValueError("B lives on a different grid")
    xhat = np.empty((g.n,) + g.shape)
    for j in range(g.n):
        xhat[j] = g._broadcast_axis(j) / g.radii
    out = np.einsum("i...,ij...->j...", xhat, B.values)
    return VectorField(g, out)


def div_b_tau(spec: PotentialSpec, t: float, g: Grid) -> ScalarField:
    """Divergence of b_tau: identically zero for zero/constant families,
    central finite differences of the nodal field otherwise."""
    if spec.magnetic.family in ("zero", "constant"):
        return ScalarField(g, np.zeros(g.shape))
    bt = b_tau(magnetic_matrix(spec, t, g), g)
    div = np.zeros(g.shape)
    for j in range(g.n):
        div += _nodal_derivative(bt.values[j], j, g.spacing)
    return ScalarField(g, div)


@dataclass(frozen=True)
class AssumptionReport:
    """Empirical grid suprema for the growth/regularity assumptions.

    The constants are reported as measured; `passed` asks only that the
    magnetic constants are finite and that V/<x>^m stays inside
    [inf, sup] with sup/inf below `spread_cap` and inf > 0.
    """

    passed: bool
    v_ratio_inf: float
    v_ratio_sup: float
    vr_plus_const: float
    btau_const: float
    div_btau_const: float
    spread_cap: float


def check_assumptions(
    spec: PotentialSpec,
    g: Grid,
    t_samples=(0.0,),
    spread_cap: float = 100.0,
) -> AssumptionReport:
    X = g.coordinates()
    br = _bracket(X)
    m, lam = spec.m, spec.lam
    v_inf, v_sup, vr_c, bt_c, db_c = np.inf, -np.inf, 0.0, 0.0, 0.0
    for t in t_samples:
        v = electric_values(spec, t, X)
        ratio = v / br**m
        v_inf = min(v_inf, float(np.min(ratio)))
        v_sup = max(v_sup, float(np.max(ratio)))
        vr_plus = np.maximum(electric_radial_derivative(spec, t, X), 0.0)
        vr_c = max(vr_c, float(np.max(vr_plus / br ** (m - 1.0))))
        bt = b_tau(magnetic_matrix(spec, t, g), g)
        bt_norm = np.sqrt(np.sum(bt.values**2, axis=0))
        bt_c = max(bt_c, float(np.max(bt_norm / br ** (lam - m / 2.0))))
        db = div_b_tau(spec, t, g)
        db_c = max(db_c, float(np.max(np.abs(db.values) / br**lam)))
    finite = all(np.isfinite(x) for x in (v_inf, v_sup, vr_c, bt_c, db_c))
    passed = finite and v_inf > 0.0 and v_sup / v_inf <= spread_cap
    return AssumptionReport(
        passed=passed,
        v_ratio_inf=v_inf,
        v_ratio_sup=v_sup,
        vr_plus_const=vr_c,
        btau_const=bt_c,
        div_btau_const=db_c,
        spread_cap=spread_cap,
    )


def gauge_transform(spec: PotentialSpec, c0: float) -> PotentialSpec:
    """Shift the spec by the time-dependent gauge with parameter c0.

    The electric part gains +c0 <x>^m, the vector potential gains
    -c0 t grad <x>^m, and B is unchanged.  apply_gauge_phase undoes the
    companion phase on solutions.
    """
    return replace(spec, gauge=GaugeSpec(c0=spec.gauge.c0 + float(c0)))


def apply_gauge_phase(u: ComplexField, c0: float, t: float, m: float = 2.0) -> ComplexField:
    """Multiply by exp(+i c0 t <x>^m): maps shifted-spec solutions back to
    base-spec solutions under u_t = -i H u."""
    g = u.grid
    br = _bracket(g.coordinates())
    return ComplexField(g, u.values * np.exp(1j * c0 * t * br**m))


def spec_to_dict(spec: PotentialSpec) -> dict:
    if spec.electric.family == "custom":
        raise ValueError("custom electric families are not serializable")
    return {
        "electric": {
            "type": spec.electric.family,
            "c": spec.electric.c,
            "m": spec.electric.m,
            "repulsive": spec.electric.repulsive,
        },
        "magnetic": {
            "type": spec.magnetic.family,
            "b": spec.magnetic.b,
            "lambda": spec.magnetic.lam,
        },
        "gauge": {"c0": spec.gauge.c0},
    }


def _take(d: dict, key: str, kind, path: str, default=None, required=False):
    if key not in d:
        if required:
            raise ValueError(f"{path}.{key}: missing required field")
        return default
    try:
        return kind(d[key])
    except (TypeError, ValueError):
        raise ValueError(f"{path}.{key}: expected {kind.__name__}, got {d[key]!r}") from None


def spec_from_dict(d: dict, path: str = "potential") -> PotentialSpec:
    if not isinstance(d, dict):
        raise ValueError(f"{path}: expected an object")
    e = d.get("electric", {})
    mg = d.get("magnetic", {})
    ga = d.get("gauge", {})
    for name, sub in (("electric", e), ("magnetic", mg), ("gauge", ga)):
        if not isinstance(sub, dict):
            raise ValueError(f"{path}.{name}: expected an object")
    family = _take(e, "type", str, f"{path}.electric", default="polynomial")
    if family == "custom":
        raise ValueError(f"{path}.electric.type: custom families cannot be built from JSON")
    electric = ElectricSpec(
        family=family,
        c=_take(e, "c", float, f"{path}.electric", default=1.0),
        m=_take(e, "m", float, f"{path}.electric", default=2.0),
        repulsive=bool(e.get("repulsive", False)),
    )
    magnetic = MagneticSpec(
        family=_take(mg, "type", str, f"{path}.magnetic", default="zero"),
        b=_take(mg, "b", float, f"{path}.magnetic", default=0.0),
        lam=_take(mg, "lambda", float, f"{path}.magnetic", default=electric.m / 2.0),
    )
    gauge = GaugeSpec(c0=_take(ga, "c0", float, f"{path}.gauge", default=0.0))
    try:
        return PotentialSpec(electric=electric, magnetic=magnetic, gauge=gauge)
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None
