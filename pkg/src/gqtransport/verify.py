"""Invariant checks runnable from the command line, grouped by module."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from . import core
from .device import BoundaryData, DeviceConfig, compute_observables, solve_device
from .errors import SolvabilityError
from .interface import OrdinateGrid, BoundaryDistribution, apply_B, charge_flux
from .milne import CoupledMilneSolver, MilneGrid, solve_halfspace
from .scattering import (PotentialProfile, ScatteringTable, step_coefficients,
                         transfer_matrix_transmission, validate_scattering)


@dataclass
class Check:
    suite: str
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    def as_dict(self) -> dict:
        return {"suite": self.suite, "check": self.name, "value": float(self.value),
                "tolerance": self.tolerance, "passed": self.passed}


def physics_checks() -> List[Check]:
    out = [Check("physics", "phi2(0) = pi^2/12", abs(float(core.phi2(0.0)) - math.pi ** 2 / 12), 1e-10),
           Check("physics", "phi1(0) = ln 2", abs(float(core.phi1(0.0)) - math.log(2.0)), 1e-10)]
    q = core.MomentQuadrature.build(M=128, K=32)
    worst_F = worst_I = 0.0
    for n in (0.1, 1.0, 10.0):
        worst_F = max(worst_F, abs(q.bracket(core.fd_density_derivative(q.eps, n)) - 1.0))
        worst_I = max(worst_I, float(np.max(np.abs(q.velocity_ell_moment(n) - np.eye(2)))))
    out.append(Check("physics", "<F'_n> = 1", worst_F, 1e-8))
    out.append(Check("physics", "<v (x) ell> = I", worst_I, 1e-6))
    n = np.array([0.1, 1.0, 10.0])
    out.append(Check("physics", "phi2(A(n)) = n", float(np.max(np.abs(core.phi2(core.chemical_potential(n)) / n - 1))), 1e-12))
    return out


def scattering_checks() -> List[Check]:
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(20):
        dv = rng.uniform(-3, 3)
        E = rng.uniform(-5, 5)
        if min(abs(E), abs(E - dv)) < 1e-3:
            continue
        T, _, _ = step_coefficients(E, 0.0, dv)
        worst = max(worst, abs(T - 1.0))
    out = [Check("scattering", "step normal incidence T = 1", worst, 1e-12)]
    T, _ = transfer_matrix_transmission(PotentialProfile.barrier(2.0, 1.5), np.array([0.7]), np.array([0.0]))
    out.append(Check("scattering", "barrier normal incidence T = 1", abs(float(T[0]) - 1.0), 1e-8))
    E = np.linspace(-6, 6, 100)
    py = np.linspace(-5, 5, 50)
    rep = validate_scattering(ScatteringTable.step(1.0), E, py)
    out.append(Check("scattering", "step P1-P3", max(rep.unitarity, rep.symmetry, rep.reciprocity), 1e-12))
    prof = PotentialProfile(((0.5, 2.0), (1.0, -0.7)), 0.8)
    rep = validate_scattering(ScatteringTable.from_profile(prof), E, py)
    out.append(Check("scattering", "transfer-matrix P1-P3", max(rep.unitarity, rep.symmetry, rep.reciprocity), 1e-8))
    return out


def _random_outflow(grid, rng):
    sides = []
    for i in (1, 2):
        f = np.where(grid.outflow_mask(i), rng.random(grid.shape(i)), 0.0)
        sides.append(f)
    return sides


def interface_checks() -> List[Check]:
    out = []
    rng = np.random.default_rng(11)
    for dv in (1.5, 0.0, -1.0):
        grid = OrdinateGrid.build(dv, K=16)
        table = ScatteringTable.step(dv)
        worst = 0.0
        for _ in range(10):
            o1, o2 = _random_outflow(grid, rng)
            f = BoundaryDistribution(grid, apply_B(1, o1, o2, table, dv, grid), apply_B(2, o2, o1, table, dv, grid))
            J1, J2 = charge_flux(f, 1), charge_flux(f, 2)
            if dv != 0:
                worst = max(worst, abs((J1[0] - J1[1]) - (J2[0] - J2[1])))
            else:
                worst = max(worst, abs(J1[0] - J2[0]), abs(J1[1] - J2[1]))
        out.append(Check("interface", f"flux conservation dV={dv:g}", worst, 1e-10))
        out.append(Check("interface", f"fixed point dV={dv:g}", _prop2_residual(dv, grid, table), 1e-12))
    return out


def _prop2_residual(dv, grid, table):
    A1p = 0.3
    if dv != 0:
        A = {(1, 1): A1p, (1, -1): -A1p, (2, 1): A1p - dv, (2, -1): -A1p + dv}
    else:
        A = {(1, 1): A1p, (1, -1): -0.2, (2, 1): A1p, (2, -1): -0.2}

    def F(side, s, eps, phi):
        return np.where(s == 1, core.fd_occupation(eps, A[(side, 1)]),
                        core.fd_occupation(eps, A[(side, -1)]))

    f = grid.evaluate(F)
    worst = 0.0
    for i in (1, 2):
        j = 3 - i
        res = apply_B(i, f.side(i), f.side(j), table, dv, grid) - f.side(i)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


def milne_checks() -> List[Check]:
    grid = MilneGrid.build(K=32, Q=96)
    sol = solve_halfspace(np.ones(32), side=2, grid=grid)
    out = [Check("milne", "equilibrium theta = 1", float(np.max(np.abs(sol.theta - 1.0))), 1e-10),
           Check("milne", "equilibrium n_inf = 1", abs(sol.n_inf - 1.0), 1e-10)]
    mu = grid.mu
    sol = solve_halfspace(1.0 + 0.5 * mu + 0.3 * mu ** 2, side=2, grid=grid)
    # decay_rate is the positive rate of the fitted exp(-rate xi) tail
    out.append(Check("milne", "tail decays", 0.0 if sol.decay_rate > 0 else 1.0, 0.5))
    out.append(Check("milne", "decay fit 1 - R^2", 1.0 - sol.decay_r2, 0.01))
    out.append(Check("milne", "flux conservation", float(np.ptp(sol.flux)), 1e-12))
    og = OrdinateGrid.build(1.0, K=16)
    solver = CoupledMilneSolver(og, ScatteringTable.step(1.0), MilneGrid.build(16, 64), "MB")
    rejected = 0.0
    try:
        solver.solve((0.1, 0.0), (0.1 + 1e-3, 0.0))
        rejected = 1.0
    except SolvabilityError:
        pass
    out.append(Check("milne", "inconsistent currents rejected", rejected, 0.5))
    res = solver.solve((0.1, -0.05), (0.2, 0.05))
    out.append(Check("milne", "fixed-point update", res.fixed_point_update, 1e-10))
    return out


def device_checks() -> List[Check]:
    dv = 1.0
    st = solve_device(DeviceConfig(delta_V=dv, nx=16, ny=4), BoundaryData((1.0, 1.0), (2.0, 0.5)))
    t = st.traces
    e = math.exp(dv)
    out = [Check("device", "n1+ = e^dV n2+", float(np.max(np.abs(t[(1, 1)] - e * t[(2, 1)]))), 1e-8),
           Check("device", "n1- = e^-dV n2-", float(np.max(np.abs(t[(1, -1)] - t[(2, -1)] / e))), 1e-8),
           Check("device", "mass action", compute_observables(st)["mass_action"], 1e-8)]
    st = solve_device(DeviceConfig(delta_V=0.0, nx=16, ny=4), BoundaryData((1.0, 1.0), (2.0, 2.0)))
    worst = 0.0
    for region in (1, 2):
        x = st.mesh.x(region)
        exact = 1.5 + 0.5 * x / st.mesh.L
        worst = max(worst, float(np.max(np.abs(st.n[(region, 1)] - exact[:, None]))))
    out.append(Check("device", "transparent linear profile", worst, 1e-8))
    return out


SUITES: Dict[str, Callable[[], List[Check]]] = {
    "physics": physics_checks,
    "scattering": scattering_checks,
    "interface": interface_checks,
    "milne": milne_checks,
    "device": device_checks,
}


def run_suite(name: str) -> List[Check]:
    if name == "all":
        return [c for key in SUITES for c in SUITES[key]()]
    if name not in SUITES:
        raise KeyError(name)
    return SUITES[name]()
