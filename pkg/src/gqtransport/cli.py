"""
Command line front end: scatter, milne, solve, verify.

Runs are described by flat text files of ``dotted.key = value`` lines
('#' starts a comment).  Values are typed by the key's default; flags
``--set key=value`` override the file.  Outputs go to --output, else
$GQTRANSPORT_OUTPUT_DIR, else the config's output.dir.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional

import numpy as np

from .device import BLOCKS, BoundaryData, DeviceConfig, compute_observables, solve_device
from .errors import ConfigError, ConvergenceError, DomainError, GQTransportError, SolvabilityError
from .interface import OrdinateGrid
from .milne import CoupledMilneSolver, MilneGrid, solve_halfspace
from .scattering import PotentialProfile, ScatteringTable, validate_scattering

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_PARSE = 2
EXIT_SOLVABILITY = 3
EXIT_CONVERGENCE = 4
EXIT_DOMAIN = 5

OUTPUT_ENV = "GQTRANSPORT_OUTPUT_DIR"


@dataclass
class RunConfig:
    physics_temperature: float = 300.0
    physics_delta_V: float = 1.0
    physics_tau: float = 0.0
    profile_kind: str = "step"
    profile_segments: str = ""
    profile_constant: float = 1.0
    mesh_nx: int = 32
    mesh_ny: int = 8
    mesh_L: float = 1.0
    mesh_l: float = 1.0
    ordinates_M: int = 60
    ordinates_K: int = 32
    ordinates_Q: int = 96
    ordinates_Xi: float = 30.0
    boundary_left_plus: float = 1.0
    boundary_left_minus: float = 1.0
    boundary_right_plus: float = 2.0
    boundary_right_minus: float = 0.5
    potential_kind: str = "none"
    potential_amplitude: float = 0.0
    potential_wavenumber: float = 1.0
    mode: str = "MB"
    solver_damping: float = 0.5
    solver_outer_tol: float = 1e-8
    solver_newton_tol: float = 1e-12
    solver_max_outer: int = 200
    solver_freeze_ninf: bool = False
    scatter_nE: int = 101
    scatter_np: int = 51
    scatter_E_max: float = 6.0
    milne_inflow: str = "current"
    milne_side: int = 2
    milne_amplitude: float = 0.5
    milne_j1_plus: float = 0.1
    milne_j1_minus: float = -0.05
    milne_j2_plus: float = 0.2
    milne_j2_minus: float = 0.05
    milne_n1_plus: float = 1.0
    milne_n1_minus: float = 1.0
    milne_n2_plus: float = 1.0
    milne_n2_minus: float = 1.0
    output_dir: str = "."

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.ordinates_K < 8 or self.ordinates_K % 4:
            raise ConfigError("ordinates.K must be a multiple of 4 and at least 8")
        if self.ordinates_M < 8:
            raise ConfigError("ordinates.M must be at least 8")
        if self.ordinates_Q < 32:
            raise ConfigError("ordinates.Q must be at least 32")
        if self.mesh_nx < 1 or self.mesh_ny < 1 or self.scatter_nE < 1 or self.scatter_np < 1:
            raise ConfigError("counts must be positive")
        for name in ("solver_outer_tol", "solver_newton_tol", "mesh_L", "mesh_l", "ordinates_Xi",
                     "physics_temperature"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{_key(name)} must be positive")
        if not 0 < self.solver_damping <= 1:
            raise ConfigError("solver.damping must lie in (0, 1]")
        if self.physics_tau < 0:
            raise ConfigError("physics.tau must be nonnegative")
        if self.mode not in ("FD", "MB"):
            raise ConfigError("mode must be FD or MB")
        if self.profile_kind not in ("step", "layers", "constant"):
            raise ConfigError("profile.kind must be step, layers or constant")
        if self.potential_kind not in ("none", "linear", "sine"):
            raise ConfigError("potential.kind must be none, linear or sine")
        if self.milne_inflow not in ("equilibrium", "zero", "anisotropic", "current"):
            raise ConfigError("milne.inflow must be equilibrium, zero, anisotropic or current")
        if self.milne_side not in (1, 2):
            raise ConfigError("milne.side must be 1 or 2")
        _parse_segments(self.profile_segments)

    # -- text format

    @classmethod
    def parse(cls, text: str, overrides: Iterable[str] = ()) -> "RunConfig":
        types = {f.name: f.type for f in fields(cls)}
        values: Dict[str, object] = {}
        lines = [(n, ln) for n, ln in enumerate(text.splitlines(), 1)]
        lines += [("--set", ov) for ov in overrides]
        for where, raw in lines:
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {where}: expected 'key = value', got {raw.strip()!r}")
            key, val = (p.strip() for p in line.split("=", 1))
            name = key.replace(".", "_")
            if name not in types:
                raise ConfigError(f"line {where}: unknown key {key!r}")
            try:
                values[name] = _convert(val, types[name])
            except ValueError as exc:
                raise ConfigError(f"line {where}: bad value for {key!r}: {exc}") from None
        return cls(**values)

    @classmethod
    def load(cls, path, overrides: Iterable[str] = ()) -> "RunConfig":
        return cls.parse(Path(path).read_text(), overrides)

    def serialize(self) -> str:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            out.append(f"{_key(f.name)} = {s}")
        return "\n".join(out) + "\n"

    # -- builders

    def table(self) -> ScatteringTable:
        dv = self.physics_delta_V
        if self.profile_kind == "constant":
            return ScatteringTable.constant_table(self.profile_constant, dv)
        if self.profile_kind == "layers":
            return ScatteringTable.from_profile(PotentialProfile(_parse_segments(self.profile_segments), dv))
        return ScatteringTable.step(dv)

    def potential(self):
        a, k = self.potential_amplitude, self.potential_wavenumber
        if self.potential_kind == "linear":
            return lambda x, y: a * x
        if self.potential_kind == "sine":
            return lambda x, y: a * np.sin(k * x) * np.cos(k * y)
        return None

    def device_config(self) -> DeviceConfig:
        return DeviceConfig(delta_V=self.physics_delta_V, tau=self.physics_tau, mode=self.mode,
                            nx=self.mesh_nx, ny=self.mesh_ny, L=self.mesh_L, l=self.mesh_l,
                            potential=self.potential(), damping=self.solver_damping,
                            outer_tol=self.solver_outer_tol, newton_tol=self.solver_newton_tol,
                            max_outer=self.solver_max_outer, K=self.ordinates_K, Q=self.ordinates_Q,
                            Xi=self.ordinates_Xi, radial_cell=30.0 / self.ordinates_M,
                            freeze_ninf=self.solver_freeze_ninf)

    def boundary(self) -> BoundaryData:
        return BoundaryData((self.boundary_left_plus, self.boundary_left_minus),
                            (self.boundary_right_plus, self.boundary_right_minus))


def _key(name: str) -> str:
    return name.replace("_", ".", 1)


def _convert(val: str, typ):
    typ = {"float": float, "int": int, "str": str, "bool": bool}.get(typ, typ)
    if typ is bool:
        low = val.lower()
        if low in ("true", "yes", "1"):
            return True
        if low in ("false", "no", "0"):
            return False
        raise ValueError(f"not a boolean: {val!r}")
    if typ is float:
        x = float(val)
        if not math.isfinite(x):
            raise ValueError("must be finite")
        return x
    return typ(val)


def _parse_segments(text: str):
    """'w:v, w:v' -> ((w, v), ...)"""
    segs = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            w, v = (float(x) for x in part.split(":"))
        except ValueError:
            raise ConfigError(f"profile.segments: cannot read {part!r} as width:value") from None
        if not w > 0:
            raise ConfigError("profile.segments: widths must be positive")
        segs.append((w, v))
    return tuple(segs)


# ---------------------------------------------------------------------------
# Output helpers


def _fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path: Path, header: List[str], rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def output_dir(cfg: RunConfig, override: Optional[str] = None) -> Path:
    d = Path(override or os.environ.get(OUTPUT_ENV) or cfg.output_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


# ---------------------------------------------------------------------------
# Commands


def cmd_scatter(cfg: RunConfig, out: Path) -> int:
    table = cfg.table()
    E = np.linspace(-cfg.scatter_E_max, cfg.scatter_E_max, cfg.scatter_nE)
    py = np.linspace(-cfg.scatter_E_max, cfg.scatter_E_max, cfg.scatter_np)
    if 0.0 not in py:
        py = np.sort(np.append(py, 0.0))
    Eg, Pg = np.meshgrid(E, py, indexing="ij")
    Eg, Pg = Eg.ravel(), Pg.ravel()
    dv = table.delta_V
    # keep propagating states on both sides, away from the Dirac points
    keep = (np.abs(Pg) < np.abs(Eg)) & (np.abs(Pg) < np.abs(Eg - dv))
    keep &= (np.abs(Eg) > 1e-9) & (np.abs(Eg - dv) > 1e-9)
    for _, v in (table.profile.segments if table.profile else ()):
        keep &= np.abs(Eg - v) > 1e-9
    Eg, Pg = Eg[keep], Pg[keep]
    T1 = table.transmission(1, Eg, Pg)
    R1 = table.reflection(1, Eg, Pg)
    # the side-2 state of the same channel has energy E - dV
    T2 = table.transmission(2, Eg - dv, Pg)
    R2 = table.reflection(2, Eg - dv, Pg)
    write_csv(out / "scatter.csv", ["E", "p_y", "T1", "R1", "T2", "R2"], zip(Eg, Pg, T1, R1, T2, R2))
    rep = validate_scattering(table, E, py)
    write_json(out / "scatter_report.json", {"kind": table.kind, "delta_V": dv, **rep.as_dict()})
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_milne(cfg: RunConfig, out: Path) -> int:
    K = cfg.ordinates_K
    mg = MilneGrid.build(K, cfg.ordinates_Q, cfg.ordinates_Xi)
    meta: Dict[str, object] = {"inflow": cfg.milne_inflow, "K": K, "Q": cfg.ordinates_Q}
    if cfg.milne_inflow == "current":
        grid = OrdinateGrid.build(cfg.physics_delta_V, K=K, cell_width=30.0 / cfg.ordinates_M)
        solver = CoupledMilneSolver(grid, cfg.table(), mg, cfg.mode)
        res = solver.solve((cfg.milne_j1_plus, cfg.milne_j1_minus), (cfg.milne_j2_plus, cfg.milne_j2_minus),
                           (cfg.milne_n1_plus, cfg.milne_n1_minus), (cfg.milne_n2_plus, cfg.milne_n2_minus))
        n_inf = {f"n_inf_{i}{'plus' if s == 1 else 'minus'}": res.n_inf[(i, s)] for i, s in BLOCKS}
        meta.update(n_inf)
        meta.update({"gauge": res.gauge, "kernel_dim": res.kernel_dim, "mismatch": [float(v) for v in np.ravel(res.mismatch)],
                     "projected": bool(res.projected), "fixed_point_update": res.fixed_point_update,
                     "mode": cfg.mode, "delta_V": cfg.physics_delta_V})
        write_csv(out / "milne_profile.csv", ["block", "n_inf"],
                  [(10 * i + (1 if s == 1 else 2), res.n_inf[(i, s)]) for i, s in BLOCKS])
    else:
        mu = mg.mu
        if cfg.milne_inflow == "equilibrium":
            g = np.ones(K)
        elif cfg.milne_inflow == "zero":
            g = np.zeros(K)
        else:
            g = 1.0 + cfg.milne_amplitude * mu
        sol = solve_halfspace(g, side=cfg.milne_side, grid=mg)
        meta.update({"n_inf": sol.n_inf, "decay_rate": sol.decay_rate, "decay_r2": sol.decay_r2,
                     "predicted_residual": sol.predicted_residual, "Xi": float(sol.xi[-1]),
                     "side": cfg.milne_side, "gauge": "none (single half-space problem has no kernel)"})
        rows = [[x] + list(row) for x, row in zip(sol.xi, sol.theta)]
        write_csv(out / "milne_profile.csv", ["xi"] + [f"theta_{k}" for k in range(K)], rows)
    write_json(out / "milne_summary.json", meta)
    return EXIT_OK


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    dcfg = cfg.device_config()
    table = cfg.table() if cfg.physics_tau > 0 else None
    try:
        st = solve_device(dcfg, cfg.boundary(), table)
    except ConvergenceError as exc:
        write_csv(out / "residual_history.csv", ["iteration", "update"],
                  enumerate(exc.history or [], 1))
        raise
    mesh = st.mesh
    for region in (1, 2):
        x = mesh.x(region)
        rows = []
        for ix in range(mesh.nx):
            for iy in range(mesh.ny):
                rows.append((x[ix], mesh.y[iy], st.n[(region, 1)][ix, iy], st.n[(region, -1)][ix, iy]))
        write_csv(out / f"fields_region{region}.csv", ["x", "y", "n_plus", "n_minus"], rows)
    header = ["y"]
    cols = [mesh.y]
    for key, data in (("trace", st.traces), ("current", st.currents), ("n_inf", st.n_inf)):
        for i, s in BLOCKS:
            header.append(f"{key}_{i}{'plus' if s == 1 else 'minus'}")
            cols.append(data[(i, s)])
    write_csv(out / "interface.csv", header, zip(*cols))
    obs = compute_observables(st)
    write_json(out / "summary.json", {"observables": obs, "mode": cfg.mode,
                                      "delta_V": cfg.physics_delta_V, "tau": cfg.physics_tau})
    write_csv(out / "convergence.csv", ["iteration", "update"], enumerate(st.outer_history, 1))
    return EXIT_OK


def cmd_verify(suite: str, out: Optional[Path] = None, stream=None) -> int:
    from .verify import SUITES, run_suite
    if suite != "all" and suite not in SUITES:
        raise ConfigError(f"unknown suite {suite!r}; choose from {', '.join(list(SUITES) + ['all'])}")
    checks = run_suite(suite)
    report = [c.as_dict() for c in checks]
    stream = stream or sys.stdout
    for r in report:
        stream.write(json.dumps(r, sort_keys=True) + "\n")
    if out is not None:
        write_json(out / f"verify_{suite}.json", report)
    return EXIT_OK if all(c.passed for c in checks) else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gqtransport", description="Hybrid kinetic/diffusive graphene transport")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("scatter", "milne", "solve"):
        sp = sub.add_parser(name)
        sp.add_argument("config", nargs="?", help="run configuration file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("-o", "--output")
        sp.add_argument("--dump-config", action="store_true", help="print the resolved configuration")
    sp = sub.add_parser("verify")
    sp.add_argument("suite", nargs="?", default="all")
    sp.add_argument("-o", "--output")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PARSE if exc.code else EXIT_OK
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "verify":
            out = output_dir(RunConfig(), args.output) if (args.output or os.environ.get(OUTPUT_ENV)) else None
            return cmd_verify(args.suite, out)
        text = Path(args.config).read_text() if args.config else ""
        cfg = RunConfig.parse(text, args.set)
        if args.dump_config:
            sys.stdout.write(cfg.serialize())
            return EXIT_OK
        out = output_dir(cfg, args.output)
        (out / "config.txt").write_text(cfg.serialize())
        return {"scatter": cmd_scatter, "milne": cmd_milne, "solve": cmd_solve}[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except SolvabilityError as exc:
        print(f"solvability error: {exc}", file=sys.stderr)
        return EXIT_SOLVABILITY
    except ConvergenceError as exc:
        print(f"convergence failure: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except GQTransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
