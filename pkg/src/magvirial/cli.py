"""Config-driven experiment runner with machine-readable CSV/JSON output.

Every verification ships as a subcommand:

    simulate            propagate and dump snapshots + per-step diagnostics
    virial-check        identity residual time series
    smoothing-estimate  R-indexed smoothing functionals and sup ratio
    hardy-check         Hardy ratio of the configured data
    multiplier-table    closed-form multiplier calculus as CSV
    assumptions-check   empirical growth/regularity constants (exit 2 on fail)
    gauge-check         field invariance + phase-mapped solution comparison
    oracle-compare      Crank-Nicolson vs dense spectral propagator

Exit codes: 0 success, 1 config error (nothing written), 2 assumption check
failed, 3 numerical failure (solver stall or boundary-mass breach).
Numbers are printed with 17 significant digits so reruns are bit-identical.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time as _time
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .estimates import (
    hardy_bound,
    hardy_check,
    smoothing_report,
    virial_series,
)
from .grid import ComplexField, Grid, build_grid
from .multiplier import MultiplierFamily, eval_arrays, singular_parts
from .operators import ConvergenceError, assemble_hamiltonian, ground_state, l2_norm
from .potentials import (
    PotentialSpec,
    apply_gauge_phase,
    check_assumptions,
    gauge_transform,
    magnetic_matrix,
    spec_from_dict,
)
from .solver import (
    DENSE_ORACLE_CAP,
    BoundaryMassError,
    dense_propagate_oracle,
    gaussian_packet,
    propagate,
)

__all__ = ["ConfigError", "ExperimentConfig", "main", "run"]

NUM_FMT = "%.17g"

SUBCOMMANDS = (
    "simulate",
    "virial-check",
    "smoothing-estimate",
    "hardy-check",
    "multiplier-table",
    "assumptions-check",
    "gauge-check",
    "oracle-compare",
)


class ConfigError(ValueError):
    """Invalid configuration; reported with a field path."""


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------


def _need(d: dict, key: str, path: str):
    if key not in d:
        raise ConfigError(f"{path}.{key}: missing required field")
    return d[key]


def _num(d: dict, key: str, path: str, default=None, required=False) -> float:
    if key not in d:
        if required:
            raise ConfigError(f"{path}.{key}: missing required field")
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}: expected a number, got {v!r}")
    return float(v)


@dataclass
class GridConfig:
    n: int
    extent: float
    points: int

    @classmethod
    def from_dict(cls, d: dict, path: str = "grid") -> "GridConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        n = _num(d, "n", path, required=True)
        extent = _num(d, "extent", path, required=True)
        points = _num(d, "points", path, required=True)
        if n != int(n) or points != int(points):
            raise ConfigError(f"{path}: n and points must be integers")
        return cls(n=int(n), extent=extent, points=int(points))

    def build(self) -> Grid:
        try:
            return build_grid(self.n, self.extent, self.points)
        except ValueError as exc:
            raise ConfigError(f"grid: {exc}") from None


@dataclass
class MultiplierConfig:
    M: float = 1.0
    R: float = 1.0
    r_max: float | None = None
    r_points: int = 400

    @classmethod
    def from_dict(cls, d: dict, path: str = "multiplier") -> "MultiplierConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        M = _num(d, "M", path, default=1.0)
        R = _num(d, "R", path, default=1.0)
        r_max = _num(d, "r_max", path, default=None)
        r_points = int(_num(d, "r_points", path, default=400))
        if M < 1.0:
            raise ConfigError(f"{path}.M: must be >= 1, got {M}")
        if R <= 0.0:
            raise ConfigError(f"{path}.R: must be positive, got {R}")
        if r_points < 2:
            raise ConfigError(f"{path}.r_points: must be >= 2")
        return cls(M=M, R=R, r_max=r_max, r_points=r_points)


@dataclass
class TimeConfig:
    horizon: float
    dt: float
    snapshot_stride: int = 1

    @classmethod
    def from_dict(cls, d: dict, path: str = "time") -> "TimeConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        horizon = _num(d, "horizon", path, required=True)
        dt = _num(d, "dt", path, required=True)
        stride = int(_num(d, "snapshot_stride", path, default=1))
        if dt <= 0.0:
            raise ConfigError(f"{path}.dt: must be positive, got {dt}")
        if horizon <= 0.0:
            raise ConfigError(f"{path}.horizon: must be positive, got {horizon}")
        steps = round(horizon / dt)
        if steps < 1 or abs(steps * dt - horizon) > 1e-9 * max(1.0, horizon):
            raise ConfigError(f"{path}: horizon must be an integer multiple of dt")
        if stride < 1 or steps % stride != 0:
            raise ConfigError(f"{path}.snapshot_stride: must divide the step count {steps}")
        return cls(horizon=horizon, dt=dt, snapshot_stride=stride)


@dataclass
class DataConfig:
    kind: str
    center: list
    width: float
    momentum: list | None

    @classmethod
    def from_dict(cls, d: dict, path: str = "data") -> "DataConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        kind = d.get("type", "gaussian")
        if kind not in ("gaussian", "ground_state"):
            raise ConfigError(f"{path}.type: unknown data family {kind!r}")
        center = d.get("center", None)
        momentum = d.get("momentum", None)
        width = _num(d, "width", path, default=1.0)
        if width <= 0.0:
            raise ConfigError(f"{path}.width: must be positive")
        for name, vec in (("center", center), ("momentum", momentum)):
            if vec is not None and not (
                isinstance(vec, list) and all(isinstance(x, (int, float)) for x in vec)
            ):
                raise ConfigError(f"{path}.{name}: expected a list of numbers")
        return cls(kind=kind, center=center, width=width, momentum=momentum)

    def build(self, g: Grid, spec: PotentialSpec):
        if self.kind == "ground_state":
            _, state = ground_state(assemble_hamiltonian(spec, 0.0, g))
            return state
        center = self.center if self.center is not None else [0.0] * g.n
        if len(center) != g.n:
            raise ConfigError(f"data.center: expected {g.n} components")
        if self.momentum is not None and len(self.momentum) != g.n:
            raise ConfigError(f"data.momentum: expected {g.n} components")
        return gaussian_packet(g, center, self.width, self.momentum)


@dataclass
class EstimateConfig:
    R_set: list
    use_repulsive_rhs: bool = False

    @classmethod
    def from_dict(cls, d: dict, g: Grid | None, path: str = "estimate") -> "EstimateConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        r_set = d.get("R_set", None)
        if r_set is None:
            r_set = [2.0**k for k in range(-2, 4)]
        if not (isinstance(r_set, list) and all(isinstance(x, (int, float)) for x in r_set)):
            raise ConfigError(f"{path}.R_set: expected a list of numbers")
        r_set = [float(x) for x in r_set]
        if g is not None:
            r_set = [R for R in r_set if g.spacing / 2.0 < R < g.extent]
            if not r_set:
                raise ConfigError(f"{path}.R_set: no radii inside (h/2, extent)")
        return cls(R_set=r_set, use_repulsive_rhs=bool(d.get("use_repulsive_rhs", False)))


@dataclass
class SolverConfig:
    solve_tol: float = 1e-12
    boundary_tol: float = 1e-6

    @classmethod
    def from_dict(cls, d: dict, path: str = "solver") -> "SolverConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        return cls(
            solve_tol=_num(d, "solve_tol", path, default=1e-12),
            boundary_tol=_num(d, "boundary_tol", path, default=1e-6),
        )


@dataclass
class OutputConfig:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv"])

    @classmethod
    def from_dict(cls, d: dict, path: str = "output") -> "OutputConfig":
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: expected an object")
        formats = d.get("formats", ["csv"])
        if not (isinstance(formats, list) and all(f in ("csv", "bin") for f in formats)):
            raise ConfigError(f"{path}.formats: entries must be 'csv' or 'bin'")
        directory = d.get("directory", "out")
        if not isinstance(directory, str):
            raise ConfigError(f"{path}.directory: expected a string")
        return cls(directory=directory, formats=list(formats))


@dataclass
class ExperimentConfig:
    raw: dict
    grid: GridConfig
    potential_raw: dict
    multiplier: MultiplierConfig
    time: TimeConfig | None
    data: DataConfig | None
    estimate_raw: dict
    solver: SolverConfig
    output: OutputConfig

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config: top level must be an object")
        grid = GridConfig.from_dict(_need(raw, "grid", "config"))
        potential_raw = raw.get("potential", {})
        multiplier = MultiplierConfig.from_dict(raw.get("multiplier", {}))
        time_cfg = TimeConfig.from_dict(raw["time"]) if "time" in raw else None
        data_cfg = DataConfig.from_dict(raw["data"]) if "data" in raw else None
        solver = SolverConfig.from_dict(raw.get("solver", {}))
        output = OutputConfig.from_dict(raw.get("output", {}))
        return cls(
            raw=raw,
            grid=grid,
            potential_raw=potential_raw,
            multiplier=multiplier,
            time=time_cfg,
            data=data_cfg,
            estimate_raw=raw.get("estimate", {}),
            solver=solver,
            output=output,
        )

    def spec(self) -> PotentialSpec:
        try:
            return spec_from_dict(self.potential_raw)
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def need_time(self) -> TimeConfig:
        if self.time is None:
            raise ConfigError("time: section required for this subcommand")
        return self.time

    def need_data(self) -> DataConfig:
        if self.data is None:
            raise ConfigError("data: section required for this subcommand")
        return self.data


def load_config(path: str) -> tuple[ExperimentConfig, str]:
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise ConfigError(f"config: cannot read {path}: {exc}") from None
    try:
        raw = json.loads(blob)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config: malformed JSON in {path}: {exc}") from None
    sha = hashlib.sha256(
        json.dumps(raw, sort_keys=True, separators=(",", ":")).encode()
    ).hexdigest()
    return ExperimentConfig.from_dict(raw), sha


# ---------------------------------------------------------------------------
# Artifact helpers
# ---------------------------------------------------------------------------


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and np.isnan(x)):
        return "nan"
    return NUM_FMT % x


def write_csv(path: str, header: list, rows: list) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _manifest(outdir, subcommand, sha, cfg: ExperimentConfig, seed, threads, t0) -> None:
    import scipy

    payload = {
        "subcommand": subcommand,
        "config_sha256": sha,
        "grid": {
            "n": cfg.grid.n,
            "extent": cfg.grid.extent,
            "points": cfg.grid.points,
            "spacing": 2.0 * cfg.grid.extent / cfg.grid.points,
        },
        "dt": cfg.time.dt if cfg.time else None,
        "tolerances": {
            "solve_tol": cfg.solver.solve_tol,
            "boundary_tol": cfg.solver.boundary_tol,
        },
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "magvirial": __version__,
        },
        "seed": seed,
        "threads": threads,
        "wall_time_s": _time.monotonic() - t0,
    }
    _write_json(os.path.join(outdir, "manifest.json"), payload)


# ---------------------------------------------------------------------------
# Subcommand implementations (return exit code)
# ---------------------------------------------------------------------------


def _sc_multiplier_table(cfg: ExperimentConfig, outdir: str) -> int:
    mc = cfg.multiplier
    fam = MultiplierFamily(n=cfg.grid.n, M=mc.M, R=mc.R)
    r_max = mc.r_max if mc.r_max is not None else 4.0 * mc.R
    radii = np.arange(mc.r_points + 1) / mc.r_points * r_max
    vals = eval_arrays(fam, radii)
    rows = [
        (r, vals["phi"][i], vals["phi_p"][i], vals["phi_pp"][i], vals["lap_phi"][i], vals["bilap_ac"][i])
        for i, r in enumerate(radii)
    ]
    write_csv(
        os.path.join(outdir, "multiplier.csv"),
        ["r", "phi", "phi_p", "phi_pp", "lap_phi", "bilap_ac"],
        rows,
    )
    parts = singular_parts(fam)
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "n": fam.n,
            "M": fam.M,
            "R": fam.R,
            "surface_weight": parts.surface_weight,
            "origin_mass": parts.origin_mass,
        },
    )
    return 0


def _sc_assumptions(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    if cfg.time is not None:
        t_samples = [0.0, 0.5 * cfg.time.horizon, cfg.time.horizon]
    else:
        t_samples = [0.0]
    report = check_assumptions(spec, g, t_samples)
    _write_json(
        os.path.join(outdir, "assumptions.json"),
        {
            "passed": report.passed,
            "v_ratio_inf": report.v_ratio_inf,
            "v_ratio_sup": report.v_ratio_sup,
            "vr_plus_const": report.vr_plus_const,
            "btau_const": report.btau_const,
            "div_btau_const": report.div_btau_const,
            "spread_cap": report.spread_cap,
            "t_samples": t_samples,
        },
    )
    return 0 if report.passed else 2


def _sc_hardy(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    u = cfg.need_data().build(g, spec)
    ratio = hardy_check(u, spec, 0.0)
    bound = hardy_bound(g.n)
    _write_json(
        os.path.join(outdir, "hardy.json"),
        {"ratio": ratio, "bound": bound, "slack": 0.05, "passed": ratio <= bound * 1.05},
    )
    return 0


def _sc_simulate(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    tc = cfg.need_time()
    f = cfg.need_data().build(g, spec)
    traj = propagate(
        f,
        spec,
        tc.horizon,
        tc.dt,
        stride=tc.snapshot_stride,
        solve_tol=cfg.solver.solve_tol,
        boundary_tol=cfg.solver.boundary_tol,
    )
    write_csv(
        os.path.join(outdir, "diagnostics.csv"),
        ["t", "l2_norm", "h1_norm", "boundary_mass"],
        list(zip(traj.step_times, traj.l2_norms, traj.h1_norms, traj.boundary_masses)),
    )
    snapdir = os.path.join(outdir, "snapshots")
    os.makedirs(snapdir, exist_ok=True)
    for k, (t, snap) in enumerate(zip(traj.times, traj.snapshots)):
        flat = np.asarray(snap).ravel()  # row-major over axes
        if "bin" in cfg.output.formats:
            inter = np.empty(2 * flat.size)
            inter[0::2] = flat.real
            inter[1::2] = flat.imag
            inter.astype("<f8").tofile(os.path.join(snapdir, f"snap_{k:06d}.bin"))
        if "csv" in cfg.output.formats:
            write_csv(
                os.path.join(snapdir, f"snap_{k:06d}.csv"),
                ["re", "im"],
                list(zip(flat.real, flat.imag)),
            )
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "snapshots": len(traj.times),
            "snapshot_times": [float(t) for t in traj.times],
            "layout": "row-major over axes, real/imag interleaved",
            "final_l2_norm": float(traj.l2_norms[-1]),
            "max_boundary_mass": float(np.max(traj.boundary_masses)),
        },
    )
    return 0


def _sc_virial(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    tc = cfg.need_time()
    f = cfg.need_data().build(g, spec)
    fam = MultiplierFamily(n=g.n, M=cfg.multiplier.M, R=cfg.multiplier.R)
    series = virial_series(
        f,
        spec,
        fam,
        tc.horizon,
        tc.dt,
        stride=tc.snapshot_stride,
        solve_tol=cfg.solver.solve_tol,
        boundary_tol=cfg.solver.boundary_tol,
    )
    rows = list(
        zip(
            series.times,
            series.theta,
            series.theta_ddot,
            series.hessian,
            series.bilap_ac,
            series.bilap_sing,
            series.potential,
            series.magnetic,
            series.rhs_flux,
            series.residual,
        )
    )
    write_csv(
        os.path.join(outdir, "virial.csv"),
        [
            "t",
            "theta",
            "theta_ddot",
            "hessian",
            "bilap_ac",
            "bilap_sing",
            "potential",
            "magnetic",
            "rhs_flux",
            "residual",
        ],
        rows,
    )
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "max_residual": series.max_residual,
            "max_residual_flux": float(np.nanmax(series.residual_flux)),
            "max_residual_theta": float(np.nanmax(series.residual_theta)),
            "snapshots": len(series.times),
        },
    )
    return 0


def _sc_smoothing(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    tc = cfg.need_time()
    est = EstimateConfig.from_dict(cfg.estimate_raw, g)
    f = cfg.need_data().build(g, spec)
    report = smoothing_report(
        f,
        spec,
        tc.horizon,
        tc.dt,
        est.R_set,
        stride=tc.snapshot_stride,
        use_repulsive_rhs=est.use_repulsive_rhs,
        solve_tol=cfg.solver.solve_tol,
        boundary_tol=cfg.solver.boundary_tol,
    )
    header = ["R", "term_grad", "term_tan"]
    if g.n >= 4:
        header.append("term_u3")
    header += ["term_surface", "lhs_total", "rhs_norm2", "ratio"]
    if g.n == 3:
        header.append("term_surface_alt")
    rows = []
    for row in report.rows:
        out = [row.R, row.term_grad, row.term_tan]
        if g.n >= 4:
            out.append(row.term_u3)
        out += [row.term_surface, row.lhs_total, row.rhs_norm2, row.ratio]
        if g.n == 3:
            out.append(row.term_surface_alt)
        rows.append(out)
    write_csv(os.path.join(outdir, "estimate.csv"), header, rows)
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "sup_ratio": report.sup_ratio,
            "ratio_min": report.ratio_min,
            "ratio_max": report.ratio_max,
            "uniform_in_R": report.uniform_in_R,
            "rhs_exponent": report.s_exponent,
            "rhs_norm2": report.rhs_norm2,
            "use_repulsive_rhs": est.use_repulsive_rhs,
        },
    )
    return 0


def _sc_gauge(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    spec = cfg.spec()
    tc = cfg.need_time()
    c0 = spec.c0
    if c0 == 0.0:
        raise ConfigError("potential.gauge.c0: gauge-check needs a nonzero shift")
    base = gauge_transform(spec, -c0)  # strip the shift to get the base spec
    f = cfg.need_data().build(g, base)
    b_diff = float(
        np.max(
            np.abs(
                magnetic_matrix(base, 0.7, g).values - magnetic_matrix(spec, 0.7, g).values
            )
        )
    )
    traj_base = propagate(
        f, base, tc.horizon, tc.dt, stride=tc.snapshot_stride,
        solve_tol=cfg.solver.solve_tol, boundary_tol=cfg.solver.boundary_tol,
    )
    traj_shift = propagate(
        f, spec, tc.horizon, tc.dt, stride=tc.snapshot_stride,
        solve_tol=cfg.solver.solve_tol, boundary_tol=cfg.solver.boundary_tol,
    )
    rows = []
    for t, ub, us in zip(traj_base.times, traj_base.snapshots, traj_shift.snapshots):
        mapped = apply_gauge_phase(ComplexField(g, us), c0, t, spec.m)
        diff = l2_norm(g, mapped.values - np.asarray(ub))
        rows.append((t, diff))
    write_csv(os.path.join(outdir, "gauge.csv"), ["t", "l2_diff"], rows)
    _write_json(
        os.path.join(outdir, "summary.json"),
        {
            "c0": c0,
            "b_matrix_max_diff": b_diff,
            "max_l2_diff": max(r[1] for r in rows),
        },
    )
    return 0


def _sc_oracle(cfg: ExperimentConfig, outdir: str) -> int:
    g = cfg.grid.build()
    if g.size > DENSE_ORACLE_CAP:
        raise ConfigError(
            f"grid: {g.size} unknowns exceed the dense-oracle cap {DENSE_ORACLE_CAP}"
        )
    spec = cfg.spec()
    if spec.is_time_dependent:
        raise ConfigError("potential: oracle-compare needs a static spec")
    tc = cfg.need_time()
    f = cfg.need_data().build(g, spec)
    traj = propagate(
        f, spec, tc.horizon, tc.dt, stride=tc.snapshot_stride,
        solve_tol=cfg.solver.solve_tol, boundary_tol=cfg.solver.boundary_tol,
    )
    oracle = dense_propagate_oracle(f, spec, tc.horizon, times=traj.times)
    rows = [
        (t, l2_norm(g, np.asarray(a) - np.asarray(b)))
        for t, a, b in zip(traj.times, traj.snapshots, oracle.snapshots)
    ]
    write_csv(os.path.join(outdir, "oracle.csv"), ["t", "l2_distance"], rows)
    _write_json(
        os.path.join(outdir, "summary.json"),
        {"max_l2_distance": max(r[1] for r in rows), "snapshots": len(rows)},
    )
    return 0


_RUNNERS = {
    "simulate": _sc_simulate,
    "virial-check": _sc_virial,
    "smoothing-estimate": _sc_smoothing,
    "hardy-check": _sc_hardy,
    "multiplier-table": _sc_multiplier_table,
    "assumptions-check": _sc_assumptions,
    "gauge-check": _sc_gauge,
    "oracle-compare": _sc_oracle,
}


def run(subcommand: str, config_path: str, out: str | None = None,
        seed: int = 0, threads: int | None = None) -> int:
    """Validate, execute one subcommand, and write artifacts + manifest."""
    t0 = _time.monotonic()
    cfg, sha = load_config(config_path)
    # validate the pieces this subcommand needs before creating any artifact
    cfg.grid.build()
    if subcommand not in ("multiplier-table",):
        cfg.spec()
    outdir = out if out is not None else cfg.output.directory

    limiter = None
    if threads is not None:
        try:
            from threadpoolctl import threadpool_limits

            limiter = threadpool_limits(limits=threads)
        except ImportError:
            pass
    try:
        runner = _RUNNERS[subcommand]
        os.makedirs(outdir, exist_ok=True)
        code = runner(cfg, outdir)
        _manifest(outdir, subcommand, sha, cfg, seed, threads, t0)
        return code
    finally:
        if limiter is not None:
            limiter.unregister()


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # config/usage errors exit 1, not argparse's 2
        self.exit(1, f"{self.prog}: error: {message}\n")


def main(argv=None) -> int:
    parser = _Parser(prog="magvirial", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("subcommand", choices=SUBCOMMANDS)
    parser.add_argument("--config", required=True, help="path to the JSON experiment config")
    parser.add_argument("--out", default=None, help="output directory (overrides config)")
    parser.add_argument("--threads", type=int, default=None,
                        help="BLAS thread cap (fallback: MAGVIRIAL_THREADS)")
    parser.add_argument("--seed", type=int, default=0, help="RNG seed recorded in the manifest")
    args = parser.parse_args(argv)

    threads = args.threads
    if threads is None:
        env = os.environ.get("MAGVIRIAL_THREADS")
        if env is not None:
            try:
                threads = int(env)
            except ValueError:
                print(f"magvirial: error: MAGVIRIAL_THREADS={env!r} is not an integer",
                      file=sys.stderr)
                return 1

    try:
        return run(args.subcommand, args.config, args.out, args.seed, threads)
    except ConfigError as exc:
        print(f"magvirial: config error: {exc}", file=sys.stderr)
        return 1
    except (BoundaryMassError, ConvergenceError) as exc:
        print(f"magvirial: numerical failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
