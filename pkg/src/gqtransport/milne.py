"""
Coupled half-space Milne problems of the interface layer.

Each side/species problem is reduced to its |p|-average, an isotropic
neutron-type Milne problem in (xi, phi).  That problem is discretised with
step characteristics on a stretched xi grid; the scheme is positive, exact
for constants and conserves the x-flux cell by cell, so the discrete albedo
returns exactly zero net flux.  The far end xi = Xi is closed by specular
reflection, which keeps the flux at zero and lets the solution settle on
its asymptotic constant.

The coupled problem is a small linear system for the averaged outflows
(four blocks of K/2 angles), solved directly and checked by one application
of the fixed-point map.  Its kernel is computed numerically and removed by a
Euclidean gauge on the asymptotic densities.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import linalg as splinalg

from . import core
from .errors import ConvergenceError, DomainError, SolvabilityError
from .interface import (KTCOperator, OrdinateGrid, BoundaryDistribution, SPECIES,
                        ktc_operator)
from .scattering import ScatteringTable

log = logging.getLogger(__name__)

SOLVABILITY_TOL = 1e-6
XI_LIMIT = 120.0
DECAY_TARGET = 1e-8


@dataclass(frozen=True, eq=False)
class MilneGrid:
    """Layer nodes 0 = xi_0 < ... < xi_Q = Xi and the K angular ordinates."""

    xi: np.ndarray
    K: int
    phi: np.ndarray

    @classmethod
    def build(cls, K: int = 32, Q: int = 96, Xi: float = 30.0, stretch: float = 5.0) -> "MilneGrid":
        if Q < 32:
            raise DomainError("need at least 32 layer cells")
        if Xi < 20:
            raise DomainError("truncation depth must be at least 20")
        t = np.linspace(0.0, 1.0, Q + 1)
        xi = Xi * np.sinh(stretch * t) / math.sinh(stretch) if stretch > 0 else Xi * t
        xi[0], xi[-1] = 0.0, Xi
        return cls(xi, int(K), core.angular_nodes(K))

    @property
    def Xi(self) -> float:
        return float(self.xi[-1])

    @property
    def Q(self) -> int:
        return self.xi.size - 1

    @cached_property
    def mu(self) -> np.ndarray:
        return np.cos(self.phi)

    @cached_property
    def mirror(self) -> np.ndarray:
        return (self.K // 2 - 1 - np.arange(self.K)) % self.K

    def refined(self, factor: int = 2) -> "MilneGrid":
        return MilneGrid.build(self.K * factor, self.Q * factor, self.Xi)

    def deepened(self) -> "MilneGrid":
        return MilneGrid.build(self.K, 2 * self.Q, 2.0 * self.Xi)

    def inflow_angles(self, side: int) -> np.ndarray:
        return np.flatnonzero((-1) ** side * self.mu > 0)

    def outflow_angles(self, side: int) -> np.ndarray:
        return np.flatnonzero((-1) ** side * self.mu < 0)


@dataclass
class MilneSolution:
    """Averaged layer solution for one side and species.

    theta[q, k] holds node values, cell_density the cell sources (angular
    averages), outflow the trace at xi = 0 on all K angles (inflow entries
    equal the data).  xi is the distance from the interface.
    """

    side: int
    xi: np.ndarray
    theta: np.ndarray
    cell_density: np.ndarray
    n_inf: float
    outflow: np.ndarray
    decay_rate: float
    decay_r2: float
    predicted_residual: float
    flux: np.ndarray
    grid: MilneGrid

    @property
    def node_density(self) -> np.ndarray:
        return self.theta.mean(axis=1)


class _HalfSpace:
    """Factorised step-characteristic system for one side."""

    def __init__(self, grid: MilneGrid, side: int):
        self.grid = grid
        self.side = side
        K, Q = grid.K, grid.Q
        # orientation: distance from the interface grows with q on both sides
        mu = (-1) ** side * grid.mu
        self.mu_eff = mu
        nth = (Q + 1) * K
        n = nth + Q
        rows, cols, vals = [], [], []
        dxi = np.diff(grid.xi)
        r = 0
        fwd = mu > 0
        for c in range(Q):
            a = np.exp(-dxi[c] / np.abs(mu))
            for k in range(K):
                up, down = (c, c + 1) if fwd[k] else (c + 1, c)
                rows += [r, r, r]
                cols += [down * K + k, up * K + k, nth + c]
                vals += [1.0, -a[k], -(1.0 - a[k])]
                r += 1
            # flux through both faces of the cell agrees
            for k in range(K):
                rows += [r, r]
                cols += [c * K + k, (c + 1) * K + k]
                vals += [mu[k], -mu[k]]
            r += 1
        self.inflow = np.flatnonzero(fwd)
        self.outflow = np.flatnonzero(~fwd)
        for k in self.inflow:
            rows.append(r); cols.append(k); vals.append(1.0)
            r += 1
        # specular reflection at the far end
        for k in self.outflow:
            rows += [r, r]
            cols += [Q * K + k, Q * K + grid.mirror[k]]
            vals += [1.0, -1.0]
            r += 1
        assert r == n
        A = sparse.csc_matrix((vals, (rows, cols)), shape=(n, n))
        self.lu = splinalg.splu(A)
        self.rhs_rows = np.arange(n - K, n - K + self.inflow.size)
        self.n = n
        self.nth = nth

    def solve(self, g_in: np.ndarray) -> np.ndarray:
        """Solution vector(s) for inflow values g_in (n_in,) or (n_in, m)."""
        g_in = np.asarray(g_in, dtype=float)
        b = np.zeros((self.n,) + g_in.shape[1:])
        b[self.rhs_rows] = g_in
        return self.lu.solve(b)

    @cached_property
    def albedo(self) -> np.ndarray:
        """Outflow at xi = 0 (outflow angles) per unit inflow (inflow angles)."""
        sol = self.solve(np.eye(self.inflow.size))
        return sol[self.outflow]

    @cached_property
    def asymptote(self) -> np.ndarray:
        """Row vector mapping inflow to the density at Xi."""
        sol = self.solve(np.eye(self.inflow.size))
        Q, K = self.grid.Q, self.grid.K
        return sol[Q * K:(Q + 1) * K].mean(axis=0)


_HS_CACHE: Dict[Tuple[int, int], _HalfSpace] = {}


def _halfspace(grid: MilneGrid, side: int) -> _HalfSpace:
    key = (id(grid), side)
    hs = _HS_CACHE.get(key)
    if hs is None or hs.grid is not grid:
        if len(_HS_CACHE) > 64:
            _HS_CACHE.clear()
        hs = _halfspace_new(grid, side)
        _HS_CACHE[key] = hs
    return hs


def _halfspace_new(grid, side):
    return _HalfSpace(grid, side)


def _decay_fit(xi_mid, dens, n_inf, Xi):
    res = np.abs(dens - n_inf)
    scale = max(np.max(np.abs(dens)), 1e-300)
    sel = (xi_mid > 1.0) & (xi_mid < 0.5 * Xi) & (res > 1e-11 * scale)
    if sel.sum() < 4:
        # already flat to round-off
        return float("inf"), 1.0, float(res[xi_mid > 1.0].max(initial=0.0))
    x, y = xi_mid[sel], np.log(res[sel])
    slope, icpt = np.polyfit(x, y, 1)
    fit = slope * x + icpt
    ss_res = float(np.sum((y - fit) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    predicted = float(np.exp(icpt + slope * Xi)) if slope < 0 else float("inf")
    return float(-slope), r2, predicted


def solve_halfspace(g_tilde, side: int = 2, grid: Optional[MilneGrid] = None,
                    adaptive: bool = True, decay_tol: float = DECAY_TARGET) -> MilneSolution:
    """Averaged Milne problem with inflow g_tilde on the side's inflow angles.

    g_tilde has length K (entries at outflow angles are ignored).  With
    adaptive=True, Xi is doubled (up to 120) until the fitted exponential
    tail predicts a residual below decay_tol at Xi.
    """
    grid = grid or MilneGrid.build()
    if side not in (1, 2):
        raise DomainError("side must be 1 or 2")
    g_tilde = np.asarray(g_tilde, dtype=float)
    if g_tilde.shape != (grid.K,):
        raise DomainError("g_tilde must have one value per angular ordinate")
    if not np.all(np.isfinite(g_tilde)):
        raise DomainError("inflow must be finite")
    while True:
        hs = _halfspace(grid, side)
        sol = hs.solve(g_tilde[hs.inflow])
        K, Q = grid.K, grid.Q
        theta = sol[:hs.nth].reshape(Q + 1, K)
        cells = sol[hs.nth:]
        n_inf = float(theta[-1].mean())
        xi_mid = 0.5 * (grid.xi[1:] + grid.xi[:-1])
        rate, r2, predicted = _decay_fit(xi_mid, cells, n_inf, grid.Xi)
        if not adaptive or predicted < decay_tol or grid.Xi * 2 > XI_LIMIT:
            break
        grid = grid.deepened()
    flux = theta @ grid.mu / K
    return MilneSolution(side, grid.xi.copy(), theta, cells, n_inf, theta[0].copy(),
                         rate, r2, predicted, flux, grid)


def average_over_modulus(g: np.ndarray, radial_weights: np.ndarray, L: np.ndarray) -> np.ndarray:
    """|p|-average of g (M, K) normalised so that the average of L is 1."""
    g = np.asarray(g, dtype=float)
    rw = np.asarray(radial_weights, dtype=float)
    norm = float(rw @ np.asarray(L, dtype=float))
    return (rw @ g) / norm


def extend_solution(sol: MilneSolution, g: np.ndarray, L_i: np.ndarray) -> np.ndarray:
    """Full trace at xi = 0: L * averaged outflow on outflow angles, g on inflow angles."""
    g = np.asarray(g, dtype=float)
    out = np.asarray(L_i, dtype=float)[:, None] * sol.outflow[None, :]
    inflow = (-1) ** sol.side * sol.grid.mu > 0
    return np.where(inflow[None, :], g, out)


# ---------------------------------------------------------------------------
# Coupled problem


def radial_profile(eps: np.ndarray, n: float, mode: str) -> np.ndarray:
    """L = F'_n (FD) or the Maxwellian (MB) on the radial nodes."""
    if mode == "FD":
        return core.fd_density_derivative(eps, n)
    if mode == "MB":
        return core.maxwellian(eps)
    raise DomainError("mode must be FD or MB")


def _vec2(j):
    arr = np.atleast_1d(np.asarray(j, dtype=float))
    if arr.size == 1:
        return np.array([arr[0], 0.0])
    if arr.size != 2:
        raise DomainError("a current is a scalar x-component or an (x, y) pair")
    return arr


def build_G(grid: OrdinateGrid, j: Dict[Tuple[int, int], Sequence[float]],
            n: Dict[Tuple[int, int], float], mode: str = "FD") -> BoundaryDistribution:
    """First-order term G on the interface nodes.

    j and n are keyed by (side, species).  FD: G = 2 F'_n v.j, so <v G> = j.
    MB: G = M v.j with j the drift-diffusion flux, so <v G> = j / 2.
    """
    sides = []
    for side in (1, 2):
        eps = grid.eps(side)
        sp = grid.species(side)
        vals = np.zeros(grid.shape(side))
        for s in SPECIES:
            rows = sp == s
            jj = _vec2(j[(side, s)])
            if mode == "FD":
                nn = float(n[(side, s)])
                if not nn > 0:
                    raise DomainError("FD mode needs positive densities")
                rad = 2.0 * core.fd_density_derivative(eps[rows], nn)
            elif mode == "MB":
                rad = core.maxwellian(eps[rows])
            else:
                raise DomainError("mode must be FD or MB")
            ang = jj[0] * grid.mu + jj[1] * np.sin(grid.phi)
            vals[rows] = rad[:, None] * ang[None, :]
        sides.append(vals)
    return BoundaryDistribution(grid, sides[0], sides[1])


def flux_mismatch(j1, j2, delta_V: float) -> np.ndarray:
    """Violation of the solvability condition from (plus, minus) x-currents."""
    j1 = [float(_vec2(v)[0]) for v in j1]
    j2 = [float(_vec2(v)[0]) for v in j2]
    if delta_V != 0:
        return np.array([(j1[0] - j1[1]) - (j2[0] - j2[1])])
    return np.array([j1[0] - j2[0], j1[1] - j2[1]])


@dataclass
class CoupledMilneResult:
    """Asymptotic densities n_inf[(side, s)] and solver diagnostics."""

    n_inf: Dict[Tuple[int, int], float]
    fixed_point_update: float
    residual: float
    kernel_dim: int
    kernel_images: np.ndarray
    mismatch: np.ndarray
    projected: bool
    outflow: Dict[Tuple[int, int], np.ndarray]
    trace: Optional[BoundaryDistribution] = None
    gamma: Optional[BoundaryDistribution] = None
    iterations: int = 0
    gauge: str = "n_inf orthogonal to the numerical kernel images"

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.n_inf[(1, 1)], self.n_inf[(1, -1)], self.n_inf[(2, 1)], self.n_inf[(2, -1)])

    def __iter__(self):
        return iter(self.as_tuple())


class CoupledMilneSolver:
    """Reusable solver for one (interface grid, table, layer grid, mode)."""

    def __init__(self, grid: OrdinateGrid, table: ScatteringTable,
                 milne_grid: Optional[MilneGrid] = None, mode: str = "MB"):
        if mode not in ("FD", "MB"):
            raise DomainError("mode must be FD or MB")
        self.grid = grid
        self.table = table
        self.mode = mode
        self.milne_grid = milne_grid or MilneGrid.build(K=grid.K)
        if self.milne_grid.K != grid.K:
            raise DomainError("layer and interface grids need the same angular ordinates")
        self.op: KTCOperator = ktc_operator(grid, table)
        K = grid.K
        self.blocks = [(i, s) for i in (1, 2) for s in SPECIES]
        self.half = K // 2
        self.hs = {i: _halfspace(self.milne_grid, i) for i in (1, 2)}
        self._kmat = sparse.vstack(self.op.matrices).tocsr()
        self._cached_key = None

    # -- reduced operators ---------------------------------------------------

    def _profiles(self, n):
        L = {}
        for i, s in self.blocks:
            rows = self.grid.species(i) == s
            L[(i, s)] = radial_profile(self.grid.eps(i)[rows], float(n[(i, s)]) if n else 1.0, self.mode)
        return L

    def _operators(self, n):
        key = None if self.mode == "MB" else tuple(float(n[b]) for b in self.blocks)
        if self._cached_key == ("ok", key):
            return self._ops
        g = self.grid
        K, H = g.K, self.half
        L = self._profiles(n)
        offs = {1: 0, 2: g.energies[0].size * K}
        ntot = offs[2] + g.energies[1].size * K
        # x (averaged outflow per block) -> full outflow trace
        er, ec, ev = [], [], []
        # full inflow trace -> averaged inflow per block
        ar, ac, av = [], [], []
        for b, (i, s) in enumerate(self.blocks):
            rows = np.flatnonzero(g.species(i) == s)
            rw = g.radial_weights(i)[rows]
            norm = float(rw @ L[(i, s)])
            out_k = self.hs[i].outflow
            in_k = self.hs[i].inflow
            for a, k in enumerate(out_k):
                er.append(offs[i] + rows * K + k)
                ec.append(np.full(rows.size, b * H + a))
                ev.append(L[(i, s)])
            for a, k in enumerate(in_k):
                ar.append(np.full(rows.size, b * H + a))
                ac.append(offs[i] + rows * K + k)
                av.append(rw / norm)
        ext = sparse.csr_matrix((np.concatenate(ev), (np.concatenate(er), np.concatenate(ec))),
                                shape=(ntot, 4 * H))
        avg = sparse.csr_matrix((np.concatenate(av), (np.concatenate(ar), np.concatenate(ac))),
                                shape=(4 * H, ntot))
        alb = np.zeros((4 * H, 4 * H))
        asym = np.zeros((4, 4 * H))
        for b, (i, s) in enumerate(self.blocks):
            alb[b * H:(b + 1) * H, b * H:(b + 1) * H] = self.hs[i].albedo
            asym[b, b * H:(b + 1) * H] = self.hs[i].asymptote
        avgK = (avg @ self._kmat @ ext).toarray()
        M = alb @ avgK
        self._ops = dict(L=L, ext=ext, avg=avg, alb=alb, asym=asym, avgK=avgK, M=M)
        self._cached_key = ("ok", key)
        return self._ops

    def kernel(self, n=None, rtol: float = 1e-9):
        """Numerical kernel of I - M (columns) and the singular values."""
        ops = self._operators(n)
        A = np.eye(ops["M"].shape[0]) - ops["M"]
        U, sv, Vt = np.linalg.svd(A)
        rank = int(np.sum(sv > rtol * sv[0]))
        return Vt[rank:].T, sv

    def _n_inf_from(self, ops, x, gam_avg):
        g_in = gam_avg + ops["avgK"] @ x
        return ops["asym"] @ g_in

    def solve(self, j1, j2, n1=None, n2=None, project: bool = True,
              method: str = "direct", omega: float = 1.0, tol: float = 1e-10,
              max_iter: int = 20000, keep_trace: bool = False) -> CoupledMilneResult:
        """Asymptotic densities for currents j1 = (j1+, j1-), j2 = (j2+, j2-).

        In FD mode n1, n2 are the interface densities (plus, minus); in MB mode
        they are not needed.  Currents follow build_G's convention.
        """
        dv = self.grid.delta_V
        j = {(1, 1): _vec2(j1[0]), (1, -1): _vec2(j1[1]),
             (2, 1): _vec2(j2[0]), (2, -1): _vec2(j2[1])}
        if self.mode == "FD":
            if n1 is None or n2 is None:
                raise DomainError("FD mode needs interface densities")
            n = {(1, 1): n1[0], (1, -1): n1[1], (2, 1): n2[0], (2, -1): n2[1]}
        else:
            n = None
        mismatch = flux_mismatch(j1, j2, dv)
        scale = max(1.0, max(abs(v[0]) for v in j.values()))
        if project and np.max(np.abs(mismatch)) > SOLVABILITY_TOL * scale:
            raise SolvabilityError(
                "currents violate the flux-conservation solvability condition of the coupled "
                f"Milne problem (mismatch {np.max(np.abs(mismatch)):.3e})", mismatch=mismatch)
        nn = n or {b: 1.0 for b in self.blocks}
        G = build_G(self.grid, j, nn, self.mode)
        projected = False
        if project:
            G, projected = self._project(G, j, nn)
        ops = self._operators(n)
        KG = self.op.apply_all(G, affine=False)
        gam = BoundaryDistribution(self.grid,
                                   np.where(self.grid.inflow_mask(1), G.side1 - KG.side1, 0.0),
                                   np.where(self.grid.inflow_mask(2), G.side2 - KG.side2, 0.0))
        gvec = np.concatenate([gam.side1.ravel(), gam.side2.ravel()])
        gam_avg = ops["avg"] @ gvec
        b = ops["alb"] @ gam_avg
        M = ops["M"]
        I = np.eye(M.shape[0])
        kern, sv = self.kernel(n)
        iterations = 0
        if method == "direct":
            A = I - M
            x = np.linalg.lstsq(A, b, rcond=1e-9)[0]
        elif method == "iterate":
            x, iterations = _damped_iteration(M, b, omega, tol, max_iter)
        else:
            raise DomainError("method must be 'direct' or 'iterate'")
        residual = float(np.max(np.abs(x - M @ x - b)))
        n_vec = self._n_inf_from(ops, x, gam_avg)
        images = np.array([ops["asym"] @ (ops["avgK"] @ kern[:, c]) for c in range(kern.shape[1])])
        if images.size:
            coef = np.linalg.lstsq(images.T, n_vec, rcond=None)[0]
            x = x - kern @ coef
            n_vec = self._n_inf_from(ops, x, gam_avg)
        update = float(np.max(np.abs(M @ x + b - x)))
        if not update < 1e-8:
            rho = float(np.max(np.abs(np.linalg.eigvals(M))))
            raise ConvergenceError(
                f"coupled Milne fixed point did not converge (update {update:.3e})",
                history=[update], spectral_radius=rho)
        outflow = {blk: x[k * self.half:(k + 1) * self.half].copy() for k, blk in enumerate(self.blocks)}
        trace = None
        if keep_trace:
            theta_out = ops["ext"] @ x
            th_in = self._kmat @ theta_out + gvec
            n1_ = self.grid.energies[0].size * self.grid.K
            full = np.where(np.concatenate([self.grid.inflow_mask(1).ravel(),
                                            self.grid.inflow_mask(2).ravel()]), th_in, theta_out)
            trace = BoundaryDistribution(self.grid, full[:n1_].reshape(self.grid.shape(1)),
                                         full[n1_:].reshape(self.grid.shape(2)))
        return CoupledMilneResult(
            n_inf={blk: float(n_vec[k]) for k, blk in enumerate(self.blocks)},
            fixed_point_update=update, residual=residual, kernel_dim=kern.shape[1],
            kernel_images=images, mismatch=mismatch, projected=projected,
            outflow=outflow, trace=trace, gamma=gam if keep_trace else None,
            iterations=iterations)

    def _project(self, G, j, n):
        """Make the discrete G fluxes satisfy the conservation condition exactly."""
        g = self.grid
        flux = {(i, s): g.flux_x(G.side(i), i)[s] for i in (1, 2) for s in SPECIES}
        unit = build_G(g, {b: (1.0, 0.0) for b in self.blocks}, n, self.mode)
        per = {(i, s): g.flux_x(unit.side(i), i)[s] for i in (1, 2) for s in SPECIES}
        dv = g.delta_V
        shift = {b: 0.0 for b in self.blocks}
        if dv != 0:
            m = (flux[(1, 1)] - flux[(1, -1)]) - (flux[(2, 1)] - flux[(2, -1)])
            shift[(1, 1)], shift[(1, -1)] = -m / 4, m / 4
            shift[(2, 1)], shift[(2, -1)] = m / 4, -m / 4
        else:
            for s in SPECIES:
                m = flux[(1, s)] - flux[(2, s)]
                shift[(1, s)], shift[(2, s)] = -m / 2, m / 2
        if not any(shift.values()):
            return G, False
        jn = {b: j[b] + np.array([shift[b] / per[b], 0.0]) for b in self.blocks}
        return build_G(g, jn, n, self.mode), True


def _damped_iteration(M, b, omega, tol, max_iter):
    x = np.zeros_like(b)
    prev = np.inf
    history = []
    for it in range(1, max_iter + 1):
        new = (1.0 - omega) * x + omega * (M @ x + b)
        upd = float(np.max(np.abs(new - x)))
        history.append(upd)
        if upd > prev and omega > 1e-3:
            omega *= 0.5
        prev = upd
        x = new
        if upd < tol:
            return x, it
    rho = float(np.max(np.abs(np.linalg.eigvals(M))))
    raise ConvergenceError("damped fixed-point iteration did not converge",
                           history=history[-20:], spectral_radius=rho)


def solve_coupled(j1, j2, n1, n2, table: ScatteringTable, delta_V: float, mode: str = "FD",
                  grid: Optional[OrdinateGrid] = None, milne_grid: Optional[MilneGrid] = None,
                  **kwargs) -> CoupledMilneResult:
    """Gauge-fixed asymptotic densities of the coupled Milne problems.

    j1 = (j1+, j1-), j2 = (j2+, j2-) are interface currents (x component or
    (x, y) pairs), n1, n2 the interface densities.  Iterating the result
    gives (ninf1+, ninf1-, ninf2+, ninf2-).
    """
    if abs(table.delta_V - delta_V) > 1e-14:
        raise DomainError("table and delta_V disagree")
    if grid is None:
        grid = OrdinateGrid.build(delta_V, K=milne_grid.K if milne_grid else 32)
    solver = CoupledMilneSolver(grid, table, milne_grid, mode)
    return solver.solve(j1, j2, n1, n2, **kwargs)


def kernel_element(n1, n2, delta_V: float, mode: str = "FD", t: float = 1.0,
                   t_minus: Optional[float] = None):
    """A homogeneous-kernel shift gamma[(side, s)] = s t c^i_s of the asymptotic densities.

    c^i_s = phi_1(A(n^i_s)) in FD mode and n^i_s in MB mode.  For delta_V = 0
    the two species take independent multipliers (t, t_minus).
    """
    n = {(1, 1): n1[0], (1, -1): n1[1], (2, 1): n2[0], (2, -1): n2[1]}
    if mode == "FD":
        c = {b: float(core.phi1(core.chemical_potential(v))) for b, v in n.items()}
    else:
        c = {b: float(v) for b, v in n.items()}
    tm = t if (t_minus is None or delta_V != 0) else t_minus
    return {(i, s): s * (t if s == 1 else tm) * c[(i, s)] for (i, s) in n}
