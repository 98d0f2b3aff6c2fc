"""
Stationary drift-diffusion on the two classical regions with interface DTC.

Both regions share a tensor mesh; x = 0 is a face.  Each species has cell
densities in both regions plus one trace per side and interface row.  Face
fluxes are Scharfetter-Gummel, including the half cells that touch the
contacts and the interface traces.  The bulk balances, the flux-continuity
rows and the DTC rows form one sparse nonlinear system solved by Newton
(the FD mobility factor is lagged).  For tau > 0 an outer damped loop
feeds interface currents and traces to the coupled Milne solver and
reinserts the asymptotic densities.

Fluxes follow j_s = -(grad n_s + s kappa n_s grad U) with kappa = 1 (MB) or
phi_1(A(n))/n (FD), so in FD j_s is twice the first-order current of the
kinetic expansion.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import core
from .errors import ConvergenceError, DomainError, StructuralError
from .interface import OrdinateGrid, SPECIES, admissible_couples, dtc_first_order_residual
from .milne import CoupledMilneSolver, MilneGrid
from .scattering import ScatteringTable

log = logging.getLogger(__name__)

BLOCKS = [(1, 1), (1, -1), (2, 1), (2, -1)]


def bernoulli(x):
    """B(x) = x / (e^x - 1), with B(0) = 1."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = safe / np.expm1(safe)
    return np.where(small, 1.0 - 0.5 * x + x * x / 12.0, out)


@dataclass(frozen=True)
class Mesh:
    """Uniform tensor mesh of (-L, 0) and (0, L) times (-l, l); nx cells per region."""

    nx: int
    ny: int
    L: float = 1.0
    l: float = 1.0

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise StructuralError("mesh needs at least one cell per direction")
        if not (self.L > 0 and self.l > 0):
            raise StructuralError("mesh spacing must be positive")

    @property
    def dx(self) -> float:
        return self.L / self.nx

    @property
    def dy(self) -> float:
        return 2.0 * self.l / self.ny

    @property
    def y(self) -> np.ndarray:
        return -self.l + (np.arange(self.ny) + 0.5) * self.dy

    def x(self, region: int) -> np.ndarray:
        c = (np.arange(self.nx) + 0.5) * self.dx
        return c - self.L if region == 1 else c

    @property
    def ncell(self) -> int:
        return self.nx * self.ny


@dataclass
class BoundaryData:
    """Contact densities n_s at x = -L (left) and x = +L (right), per y or constant."""

    left: Tuple[object, object]
    right: Tuple[object, object]

    def values(self, mesh: Mesh) -> Dict[Tuple[str, int], np.ndarray]:
        out = {}
        for side, pair in (("left", self.left), ("right", self.right)):
            for s, v in zip(SPECIES, pair):
                arr = np.broadcast_to(np.asarray(v, dtype=float), (mesh.ny,)).copy()
                if np.any(arr <= 0) or not np.all(np.isfinite(arr)):
                    raise DomainError("contact densities must be positive")
                out[(side, s)] = arr
        return out


@dataclass
class DeviceConfig:
    delta_V: float = 0.0
    tau: float = 0.0
    mode: str = "MB"
    nx: int = 64
    ny: int = 32
    L: float = 1.0
    l: float = 1.0
    potential: Optional[Callable] = None
    damping: float = 0.5
    outer_tol: float = 1e-8
    max_outer: int = 200
    newton_tol: float = 1e-12
    max_newton: int = 100
    K: int = 32
    Q: int = 96
    Xi: float = 30.0
    radial_cell: float = 0.5
    freeze_ninf: bool = False

    def __post_init__(self):
        if self.mode not in ("FD", "MB"):
            raise DomainError("mode must be FD or MB")
        if self.tau < 0:
            raise DomainError("tau must be nonnegative")
        if not 0 < self.damping <= 1:
            raise DomainError("damping must lie in (0, 1]")

    def mesh(self) -> Mesh:
        return Mesh(self.nx, self.ny, self.L, self.l)


@dataclass
class DeviceState:
    """Converged (or current) device fields and interface data.

    n[(region, s)] are (nx, ny) cell densities; traces, currents and n_inf
    are keyed by (side, s) with one value per interface row.
    """

    mesh: Mesh
    config: DeviceConfig
    n: Dict[Tuple[int, int], np.ndarray]
    U: Dict[str, np.ndarray]
    traces: Dict[Tuple[int, int], np.ndarray]
    currents: Dict[Tuple[int, int], np.ndarray]
    n_inf: Dict[Tuple[int, int], np.ndarray]
    contact_currents: Dict[Tuple[str, int], np.ndarray]
    bulk_residual: float = 0.0
    dtc_residual: float = 0.0
    flux_residual: float = 0.0
    outer_history: List[float] = field(default_factory=list)
    newton_iterations: int = 0
    converged: bool = False

    @property
    def n_plus(self):
        return (self.n[(1, 1)], self.n[(2, 1)])

    @property
    def n_minus(self):
        return (self.n[(1, -1)], self.n[(2, -1)])


# ---------------------------------------------------------------------------
# Assembly


def _potential_fields(mesh: Mesh, potential) -> Dict[str, np.ndarray]:
    y = mesh.y
    def ev(x, yy):
        if potential is None:
            return np.zeros(np.broadcast(x, yy).shape)
        return np.broadcast_to(np.asarray(potential(x, yy), dtype=float), np.broadcast(x, yy).shape).copy()
    X1, Y = np.meshgrid(mesh.x(1), y, indexing="ij")
    X2, _ = np.meshgrid(mesh.x(2), y, indexing="ij")
    return {"c1": ev(X1, Y), "c2": ev(X2, Y), "left": ev(np.full_like(y, -mesh.L), y),
            "right": ev(np.full_like(y, mesh.L), y), "iface": ev(np.zeros_like(y), y)}


class _Layout:
    """Unknown numbering: four cell blocks, then four trace blocks."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        N, ny = mesh.ncell, mesh.ny
        self.cell = {b: k * N + np.arange(N).reshape(mesh.nx, mesh.ny) for k, b in enumerate(BLOCKS)}
        self.trace = {b: 4 * N + k * ny + np.arange(ny) for k, b in enumerate(BLOCKS)}
        self.size = 4 * N + 4 * ny


class _Flux:
    """A face flux j = cA * u[iA] + cB * u[iB] + const, vectorised over faces."""

    def __init__(self, iA, cA, iB, cB, const=None):
        self.iA, self.cA, self.iB, self.cB = iA, cA, iB, cB
        self.const = np.zeros_like(cA) if const is None else const

    def value(self, u):
        v = self.const.copy()
        if self.iA is not None:
            v += self.cA * u[self.iA]
        if self.iB is not None:
            v += self.cB * u[self.iB]
        return v


def _sg(h, D):
    return bernoulli(D) / h, -bernoulli(-D) / h


def _region_fluxes(mesh, lay, U, region, s, kappa, bc_val, Uc):
    """All face fluxes of one region/species block.

    Returns (x-interior, y-interior, contact, interface) flux objects; the
    contact flux has the Dirichlet value folded into its constant.
    """
    dx, dy = mesh.dx, mesh.dy
    idx = lay.cell[(region, s)]
    tr = lay.trace[(region, s)]
    # interior x faces
    ka = 0.5 * (kappa[:-1] + kappa[1:])
    D = s * ka * (Uc[1:] - Uc[:-1])
    a, b = _sg(dx, D)
    fx = _Flux(idx[:-1].ravel(), a.ravel(), idx[1:].ravel(), b.ravel())
    ky = 0.5 * (kappa[:, :-1] + kappa[:, 1:])
    D = s * ky * (Uc[:, 1:] - Uc[:, :-1])
    a, b = _sg(dy, D)
    fy = _Flux(idx[:, :-1].ravel(), a.ravel(), idx[:, 1:].ravel(), b.ravel())
    h = 0.5 * dx
    if region == 1:
        # contact at x = -L: boundary point -> first cell
        D = s * kappa[0] * (Uc[0] - U["left"])
        a, b = _sg(h, D)
        fc = _Flux(None, a, idx[0], b, a * bc_val)
        fc.cA = np.zeros_like(a)
        D = s * kappa[-1] * (U["iface"] - Uc[-1])
        a, b = _sg(h, D)
        fi = _Flux(idx[-1], a, tr, b)
    else:
        D = s * kappa[0] * (Uc[0] - U["iface"])
        a, b = _sg(h, D)
        fi = _Flux(tr, a, idx[0], b)
        D = s * kappa[-1] * (U["right"] - Uc[-1])
        a, b = _sg(h, D)
        fc = _Flux(idx[-1], a, None, b, b * bc_val)
        fc.cB = np.zeros_like(b)
    return fx, fy, fc, fi


def _add_flux(rows, cols, vals, flux, row_idx, sign, const):
    """Add sign * flux into the balance rows row_idx."""
    for i, c in ((flux.iA, flux.cA), (flux.iB, flux.cB)):
        if i is None:
            continue
        rows.append(np.asarray(row_idx).ravel())
        cols.append(np.asarray(i).ravel())
        vals.append(sign * np.asarray(c).ravel())
    np.add.at(const, np.asarray(row_idx).ravel(), sign * np.asarray(flux.const).ravel())


def _kappa(n, mode):
    if mode == "MB":
        return np.ones_like(n)
    A = core.chemical_potential(np.maximum(n, 1e-300))
    return core.phi1(A) / n


def assemble_dd(mesh: Mesh, region: int, s: int, U=None, mode: str = "MB",
                n_prev=None, contact=1.0, trace=1.0):
    """Finite-volume system A n = b of one region and species.

    The contact density and the interface trace are Dirichlet data; U is a
    callable potential.  FD mode lags kappa = phi_1(A)/n at n_prev.
    Returns (A, b) over the (nx, ny) cells, flattened row-major.
    """
    if mode not in ("FD", "MB"):
        raise DomainError("mode must be FD or MB")
    lay = _Layout(mesh)
    Uf = _potential_fields(mesh, U)
    Uc = Uf["c1" if region == 1 else "c2"]
    if n_prev is None:
        n_prev = np.ones((mesh.nx, mesh.ny))
    kap = _kappa(np.asarray(n_prev, dtype=float), mode)
    bc = np.broadcast_to(np.asarray(contact, dtype=float), (mesh.ny,))
    tr = np.broadcast_to(np.asarray(trace, dtype=float), (mesh.ny,))
    fx, fy, fc, fi = _region_fluxes(mesh, lay, Uf, region, s, kap, bc, Uc)
    # trace values known: fold them into constants
    base = lay.cell[(region, s)][0, 0]
    if region == 1:
        fi = _Flux(fi.iA, fi.cA, None, fi.cB, fi.cB * tr)
    else:
        fi = _Flux(None, fi.cA, fi.iB, fi.cB, fi.cA * tr)
    A, const = _balance_matrix(mesh, lay, region, s, fx, fy, fc, fi)
    N = mesh.ncell
    A = A.tocsr()[base:base + N][:, base:base + N]
    return A.tocsr(), -const[base:base + N]


def _balance_matrix(mesh, lay, region, s, fx, fy, fc, fi):
    rows, cols, vals = [], [], []
    const = np.zeros(lay.size)
    idx = lay.cell[(region, s)]
    dx, dy = mesh.dx, mesh.dy
    _add_flux(rows, cols, vals, fx, idx[:-1], dy, const)
    _add_flux(rows, cols, vals, fx, idx[1:], -dy, const)
    _add_flux(rows, cols, vals, fy, idx[:, :-1], dx, const)
    _add_flux(rows, cols, vals, fy, idx[:, 1:], -dx, const)
    if region == 1:
        _add_flux(rows, cols, vals, fc, idx[0], -dy, const)
        _add_flux(rows, cols, vals, fi, idx[-1], dy, const)
    else:
        _add_flux(rows, cols, vals, fi, idx[0], -dy, const)
        _add_flux(rows, cols, vals, fc, idx[-1], dy, const)
    r = np.concatenate(rows) if rows else np.zeros(0, int)
    c = np.concatenate(cols) if cols else np.zeros(0, int)
    v = np.concatenate(vals) if vals else np.zeros(0)
    A = sparse.coo_matrix((v, (r, c)), shape=(lay.size, lay.size))
    return A, const


# ---------------------------------------------------------------------------
# Interface rows


def _dtc_rows(t, m, tau, dv, mode):
    """DTC residuals (rows, ny) and their derivatives (rows, 4, ny) wrt the traces."""
    n1p, n1m, n2p, n2m = t
    m1p, m1m, m2p, m2m = m
    ny = n1p.size
    if mode == "MB":
        e = math.exp(dv)
        if dv == 0:
            F = np.array([n1p - n2p - tau * (m2p - m1p), n1m - n2m - tau * (m2m - m1m)])
            J = np.zeros((2, 4, ny))
            J[0, 0], J[0, 2] = 1.0, -1.0
            J[1, 1], J[1, 3] = 1.0, -1.0
            return F, J
        F = np.empty((3, ny))
        J = np.zeros((3, 4, ny))
        F[0] = n1p - e * n2p - tau * (e * m2p - m1p)
        J[0, 0], J[0, 2] = 1.0, -e
        F[2] = n1m - n2m / e - tau * (m2m / e - m1m)
        J[2, 1], J[2, 3] = 1.0, -1.0 / e
        if dv > 0:
            F[1] = n1p * n2m + tau * (n1p * m2m + n2m * m1p) - e
            J[1, 0] = n2m + tau * m2m
            J[1, 3] = n1p + tau * m1p
        else:
            F[1] = n1m * n2p + tau * (n1m * m2p + n2p * m1m) - 1.0 / e
            J[1, 1] = n2p + tau * m2p
            J[1, 2] = n1m + tau * m1m
        return F, J
    # FD, tangent form of the first-order relation
    def pot(n, mm):
        A = core.chemical_potential(n)
        p1 = core.phi1(A)
        p0 = core.phi0(A)
        val = A + tau * mm / p1
        der = 1.0 / p1 - tau * mm * p0 / p1 ** 3
        return val, der
    P = {0: pot(n1p, m1p), 1: pot(n1m, m1m), 2: pot(n2p, m2p), 3: pot(n2m, m2m)}
    col = {(1, 1): 0, (1, -1): 1, (2, 1): 2, (2, -1): 3}
    couples = admissible_couples(dv)
    F = np.empty((len(couples), ny))
    J = np.zeros((len(couples), 4, ny))
    for r, (s, s2) in enumerate(couples):
        a, b = col[(1, s)], col[(2, s2)]
        F[r] = s * P[a][0] - s2 * P[b][0] - dv
        J[r, a] += s * P[a][1]
        J[r, b] -= s2 * P[b][1]
    return F, J


class _System:
    def __init__(self, mesh, cfg, bc, U):
        self.mesh, self.cfg, self.U = mesh, cfg, U
        self.lay = _Layout(mesh)
        self.bc = bc

    def linear_part(self, u):
        """Bulk balances and flux rows (linear given lagged kappa) as (A, const)."""
        mesh, lay, cfg = self.mesh, self.lay, self.cfg
        const = np.zeros(lay.size)
        self.fluxes = {}
        mats = []
        for region, s in BLOCKS:
            n = u[lay.cell[(region, s)]]
            kap = _kappa(n, cfg.mode)
            Uc = self.U["c1" if region == 1 else "c2"]
            bcv = self.bc[("left" if region == 1 else "right", s)]
            fx, fy, fc, fi = _region_fluxes(mesh, lay, self.U, region, s, kap, bcv, Uc)
            self.fluxes[(region, s)] = (fx, fy, fc, fi)
            A, c = _balance_matrix(mesh, lay, region, s, fx, fy, fc, fi)
            mats.append(A)
            const += c
        bulk = sum(mats[1:], mats[0]).tocsr()
        nb = 4 * mesh.ncell
        bulk = bulk[:nb]
        const = const[:nb]
        # flux continuity rows
        fl = {b: self.fluxes[b][3] for b in BLOCKS}
        ny = mesh.ny
        if cfg.delta_V != 0:
            combos = [[((1, 1), 1), ((1, -1), -1), ((2, 1), -1), ((2, -1), 1)]]
        else:
            combos = [[((1, 1), 1), ((2, 1), -1)], [((1, -1), 1), ((2, -1), -1)]]
        fr, fc_, fv = [], [], []
        fconst = np.zeros(len(combos) * ny)
        for r, combo in enumerate(combos):
            ridx = r * ny + np.arange(ny)
            for b, sign in combo:
                f = fl[b]
                for i, c in ((f.iA, f.cA), (f.iB, f.cB)):
                    if i is None:
                        continue
                    fr.append(ridx); fc_.append(i); fv.append(sign * c)
        F = sparse.csr_matrix((np.concatenate(fv), (np.concatenate(fr), np.concatenate(fc_))),
                              shape=(len(combos) * ny, lay.size))
        A = sparse.vstack([bulk, F]).tocsr()
        return A, np.concatenate([const, fconst])

    def residual_and_jacobian(self, u, m):
        A, c = self.linear_part(u)
        lin = A @ u + c
        t = [u[self.lay.trace[b]] for b in BLOCKS]
        Fd, Jd = _dtc_rows(t, m, self.cfg.tau, self.cfg.delta_V, self.cfg.mode)
        ny = self.mesh.ny
        rr, cc, vv = [], [], []
        for r in range(Fd.shape[0]):
            for k, b in enumerate(BLOCKS):
                if np.any(Jd[r, k] != 0):
                    rr.append(r * ny + np.arange(ny)); cc.append(self.lay.trace[b]); vv.append(Jd[r, k])
        Jdtc = sparse.csr_matrix((np.concatenate(vv), (np.concatenate(rr), np.concatenate(cc))),
                                 shape=(Fd.shape[0] * ny, self.lay.size))
        J = sparse.vstack([A, Jdtc]).tocsc()
        F = np.concatenate([lin, Fd.ravel()])
        return F, J, lin, Fd


def _initial_guess(mesh, lay, bc, cfg):
    u = np.empty(lay.size)
    dv = cfg.delta_V
    for (region, s) in BLOCKS:
        a = bc[("left", s)]
        b = bc[("right", s)]
        if region == 1:
            tr = a if dv == 0 else np.sqrt(a * b)
            frac = (mesh.x(1) + mesh.L) / mesh.L
            u[lay.cell[(region, s)]] = (a[None, :] * (1 - frac[:, None]) + tr[None, :] * frac[:, None])
            u[lay.trace[(region, s)]] = tr
        else:
            tr = b if dv == 0 else np.sqrt(a * b)
            frac = mesh.x(2) / mesh.L
            u[lay.cell[(region, s)]] = (tr[None, :] * (1 - frac[:, None]) + b[None, :] * frac[:, None])
            u[lay.trace[(region, s)]] = tr
    return u


def _newton(system, u, m, cfg):
    history = []
    for it in range(1, cfg.max_newton + 1):
        F, J, _, _ = system.residual_and_jacobian(u, m)
        du = splinalg.spsolve(J, -F)
        neg = du < 0
        alpha = 1.0
        if np.any(neg):
            alpha = min(1.0, 0.9 * float(np.min(-u[neg] / du[neg])))
        u = u + alpha * du
        step = float(np.max(np.abs(alpha * du)) / max(1.0, np.max(np.abs(u))))
        history.append(step)
        if step < cfg.newton_tol and alpha == 1.0:
            return u, it
    raise ConvergenceError("Newton iteration for the device system did not converge", history=history)


def _state_from(system, u, m, cfg):
    mesh, lay = system.mesh, system.lay
    F, _, lin, Fd = system.residual_and_jacobian(u, m)
    nb = 4 * mesh.ncell
    n = {b: u[lay.cell[b]].copy() for b in BLOCKS}
    traces = {b: u[lay.trace[b]].copy() for b in BLOCKS}
    currents = {b: system.fluxes[b][3].value(u) for b in BLOCKS}
    contact = {}
    for (region, s) in BLOCKS:
        key = ("left" if region == 1 else "right", s)
        contact[key] = system.fluxes[(region, s)][2].value(u)
    scale = max(1.0, float(np.max(np.abs(u))))
    st = DeviceState(mesh, cfg, n, system.U, traces, currents,
                     {b: m[k].copy() for k, b in enumerate(BLOCKS)}, contact)
    st.bulk_residual = float(np.max(np.abs(lin[:nb]))) / (mesh.dx * mesh.dy) / scale
    st.flux_residual = float(np.max(np.abs(lin[nb:]))) if lin.size > nb else 0.0
    st.dtc_residual = float(np.max(np.abs(Fd)))
    return st


def solve_device(config: DeviceConfig, boundary: BoundaryData, table: Optional[ScatteringTable] = None,
                 milne_solver: Optional[CoupledMilneSolver] = None) -> DeviceState:
    """Hybrid drift-diffusion solve with first-order DTC at x = 0.

    For tau = 0 the Milne layer is not needed and table may be None.
    """
    cfg = config
    mesh = cfg.mesh()
    bc = boundary.values(mesh)
    U = _potential_fields(mesh, cfg.potential)
    system = _System(mesh, cfg, bc, U)
    lay = system.lay
    u = _initial_guess(mesh, lay, bc, cfg)
    m = np.zeros((4, mesh.ny))
    u, its = _newton(system, u, m, cfg)
    total_newton = its
    history: List[float] = []
    if cfg.tau > 0:
        if table is None:
            raise DomainError("tau > 0 needs a scattering table")
        if abs(table.delta_V - cfg.delta_V) > 1e-14:
            raise DomainError("scattering table built for a different delta_V")
        if milne_solver is None:
            grid = OrdinateGrid.build(cfg.delta_V, K=cfg.K, cell_width=cfg.radial_cell)
            milne_solver = CoupledMilneSolver(grid, table, MilneGrid.build(cfg.K, cfg.Q, cfg.Xi), cfg.mode)
        frozen = None
        for outer in range(1, cfg.max_outer + 1):
            st = _state_from(system, u, m, cfg)
            if frozen is not None:
                m_new = frozen
            else:
                m_new = _milne_all(milne_solver, st, cfg)
                if cfg.freeze_ninf and outer > 1:
                    frozen = m_new
            old_tr = np.array([st.traces[b] for b in BLOCKS])
            old_j = np.array([st.currents[b] for b in BLOCKS])
            m_next = (1.0 - cfg.damping) * m + cfg.damping * m_new
            dm = float(np.max(np.abs(m_next - m)))
            m = m_next
            try:
                u, its = _newton(system, u, m, cfg)
            except ConvergenceError as exc:
                raise ConvergenceError("device Newton failed inside the outer loop",
                                       history=history) from exc
            total_newton += its
            st = _state_from(system, u, m, cfg)
            tr = np.array([st.traces[b] for b in BLOCKS])
            jj = np.array([st.currents[b] for b in BLOCKS])
            d_tr = float(np.max(np.abs(tr - old_tr)) / max(1e-300, np.max(np.abs(tr))))
            d_j = float(np.max(np.abs(jj - old_j)) / max(1.0, np.max(np.abs(jj))))
            d_m = dm / max(1.0, float(np.max(np.abs(m))))
            err = max(d_tr, d_j, d_m)
            history.append(err)
            log.debug("outer %d: update %.3e", outer, err)
            if err < cfg.outer_tol:
                break
        else:
            raise ConvergenceError("outer DTC/Milne iteration did not converge", history=history)
    st = _state_from(system, u, m, cfg)
    st.outer_history = history
    st.newton_iterations = total_newton
    st.converged = True
    for b in BLOCKS:
        if np.any(st.traces[b] + cfg.tau * st.n_inf[b] <= 0):
            raise DomainError("corrected interface density nonpositive: tau too large")
    return st


def _milne_all(solver: CoupledMilneSolver, st: DeviceState, cfg: DeviceConfig) -> np.ndarray:
    ny = st.mesh.ny
    m = np.zeros((4, ny))
    factor = 0.5 if cfg.mode == "FD" else 1.0
    for r in range(ny):
        j1 = (factor * st.currents[(1, 1)][r], factor * st.currents[(1, -1)][r])
        j2 = (factor * st.currents[(2, 1)][r], factor * st.currents[(2, -1)][r])
        n1 = (st.traces[(1, 1)][r], st.traces[(1, -1)][r])
        n2 = (st.traces[(2, 1)][r], st.traces[(2, -1)][r])
        res = solver.solve(j1, j2, n1, n2)
        m[:, r] = res.as_tuple()
    return m


def extract_interface_currents(state: DeviceState) -> Dict[Tuple[int, int], np.ndarray]:
    """x-currents j^i_s(y) at the interface face, drift-diffusion convention."""
    return {b: state.currents[b].copy() for b in BLOCKS}


def compute_observables(state: DeviceState) -> Dict[str, float]:
    """Deterministic scalar summaries of a converged state."""
    mesh, cfg = state.mesh, state.config
    dy = mesh.dy
    obs: Dict[str, float] = {}
    for side in ("left", "right"):
        jp = state.contact_currents[(side, 1)]
        jm = state.contact_currents[(side, -1)]
        obs[f"current_{side}_plus"] = float(np.sum(jp) * dy)
        obs[f"current_{side}_minus"] = float(np.sum(jm) * dy)
        obs[f"terminal_current_{side}"] = float(np.sum(jp - jm) * dy)
    for (i, s) in BLOCKS:
        tag = f"{i}{'plus' if s == 1 else 'minus'}"
        obs[f"interface_current_{tag}"] = float(np.sum(state.currents[(i, s)]) * dy)
        obs[f"trace_mean_{tag}"] = float(np.mean(state.traces[(i, s)]))
        obs[f"n_inf_mean_{tag}"] = float(np.mean(state.n_inf[(i, s)]))
    for s in SPECIES:
        tag = "plus" if s == 1 else "minus"
        obs[f"jump_{tag}"] = float(np.max(np.abs(state.traces[(1, s)] - state.traces[(2, s)])))
    t = state.traces
    dv = cfg.delta_V
    if dv > 0:
        obs["mass_action"] = float(np.max(np.abs(t[(1, 1)] * t[(2, -1)] - math.exp(dv))))
    elif dv < 0:
        obs["mass_action"] = float(np.max(np.abs(t[(1, -1)] * t[(2, 1)] - math.exp(-dv))))
    obs["bulk_residual"] = state.bulk_residual
    obs["dtc_residual"] = state.dtc_residual
    obs["flux_residual"] = state.flux_residual
    obs["outer_iterations"] = float(len(state.outer_history))
    return dict(sorted(obs.items()))


def dtc_report(state: DeviceState) -> np.ndarray:
    """Per-row first-order DTC residuals recomputed from the traces."""
    cfg = state.config
    rows = []
    for r in range(state.mesh.ny):
        t = [state.traces[b][r] for b in BLOCKS]
        m = [state.n_inf[b][r] for b in BLOCKS]
        rows.append(dtc_first_order_residual(t[:2], t[2:], m[:2], m[2:], cfg.tau, cfg.delta_V, cfg.mode))
    return np.array(rows)
