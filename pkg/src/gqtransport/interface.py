"""
Discrete kinetic transmission conditions at the quantum interface.

The ordinate grid is built in (E, phi) on each side.  Energies come from
composite Gauss cells whose edges include both cone apices (E = 0 on side 1,
E = delta_V on the side-1 axis), so every side-1 node has its partner energy
E - delta_V as an exact side-2 node.  Transverse momentum is matched by
overlapping p_y cells: each angular node owns a p_y interval whose length is
its flux weight, and transmitted flux is exchanged in proportion to the
overlap.  The exchange weights are symmetric between the sides, which makes
charge-flux conservation and the F-D fixed point hold to round-off.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy import sparse

from . import core
from .errors import DomainError, StructuralError
from .scattering import ScatteringTable

EPSILON = np.array([[0, 1], [1, 0]])

SPECIES = (1, -1)


def epsilon(s: int, s2: int) -> int:
    """Inhomogeneity symbol: 0 for equal chiralities, 1 otherwise."""
    return 0 if s == s2 else 1


def _cell_edges(delta_V: float, E_max: float, width: float) -> np.ndarray:
    lo = min(-E_max, delta_V - E_max)
    hi = max(E_max, delta_V + E_max)
    k = np.arange(np.floor(lo / width) - 1, np.ceil(hi / width) + 2)
    base = k * width
    pinned = np.array([0.0, delta_V, -E_max, E_max, delta_V - E_max, delta_V + E_max])
    cand = np.concatenate([base, base + delta_V])
    cand = cand[(cand >= lo) & (cand <= hi)]
    # drop anything too close to a pinned edge, then dedupe
    far = np.min(np.abs(cand[:, None] - pinned[None, :]), axis=1) > 1e-9
    edges = np.unique(np.concatenate([pinned, cand[far]]))
    keep = np.concatenate([[True], np.diff(edges) > 1e-9])
    return edges[keep]


@dataclass(frozen=True, eq=False)
class OrdinateGrid:
    """Tensor ordinates (E, phi) on both sides of the interface.

    energies[i-1] holds the signed node energies of side i, measured from that
    side's asymptotic potential; weights[i-1] the matching dE weights.  Node
    (e, k) of side i has radial variable eps = |E_e|, species sign(E_e) and
    angle phi_k.  Inflow on side 1 is cos(phi) < 0, on side 2 cos(phi) > 0.
    """

    delta_V: float
    K: int
    phi: np.ndarray
    energies: Tuple[np.ndarray, np.ndarray]
    weights: Tuple[np.ndarray, np.ndarray]
    E_max: float = core.EPS_MAX

    @classmethod
    def build(cls, delta_V: float = 0.0, K: int = 32, E_max: float = core.EPS_MAX,
              cell_width: float = 0.5, gauss: int = 4) -> "OrdinateGrid":
        if K < 8 or K % 4:
            raise DomainError("K must be a multiple of 4 and at least 8")
        if gauss < 1 or not cell_width > 0 or not E_max > 0:
            raise DomainError("invalid radial quadrature parameters")
        edges = _cell_edges(float(delta_V), float(E_max), float(cell_width))
        x, w = np.polynomial.legendre.leggauss(gauss)
        a, b = edges[:-1], edges[1:]
        half = 0.5 * (b - a)
        nodes = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
        wts = half[:, None] * w[None, :]
        nodes, wts = nodes.ravel(), wts.ravel()
        tol = 1e-12
        in1 = (nodes > -E_max - tol) & (nodes < E_max + tol)
        in2 = (nodes > delta_V - E_max - tol) & (nodes < delta_V + E_max + tol)
        e1, w1 = nodes[in1], wts[in1]
        # side-2 energies share the side-1 axis, shifted by the jump
        e2, w2 = nodes[in2] - delta_V, wts[in2]
        return cls(float(delta_V), int(K), core.angular_nodes(K), (e1, e2), (w1, w2), float(E_max))

    # -- geometry ------------------------------------------------------------

    @cached_property
    def mu(self) -> np.ndarray:
        return np.cos(self.phi)

    @cached_property
    def sin_phi(self) -> np.ndarray:
        return np.sin(self.phi)

    @cached_property
    def mirror(self) -> np.ndarray:
        """Index of the p_x-reflected angle pi - phi_k."""
        return (self.K // 2 - 1 - np.arange(self.K)) % self.K

    def inflow_angles(self, side: int) -> np.ndarray:
        _side(side)
        return np.flatnonzero((-1) ** side * self.mu > 0)

    def outflow_angles(self, side: int) -> np.ndarray:
        _side(side)
        return np.flatnonzero((-1) ** side * self.mu < 0)

    def inflow_mask(self, side: int) -> np.ndarray:
        mask = np.zeros((self.energies[side - 1].size, self.K), dtype=bool)
        mask[:, self.inflow_angles(side)] = True
        return mask

    def outflow_mask(self, side: int) -> np.ndarray:
        return ~self.inflow_mask(side)

    def eps(self, side: int) -> np.ndarray:
        return np.abs(self.energies[side - 1])

    def species(self, side: int) -> np.ndarray:
        return np.where(self.energies[side - 1] > 0, 1, -1)

    def species_rows(self, side: int, s: int) -> np.ndarray:
        """Energy rows of species s on a side, ordered by increasing eps."""
        rows = np.flatnonzero(self.species(side) == s)
        return rows[np.argsort(self.eps(side)[rows], kind="stable")]

    def radial_weights(self, side: int) -> np.ndarray:
        """Weights for <.>: dE * eps, the eps factor of the polar measure."""
        return self.weights[side - 1] * self.eps(side)

    def shape(self, side: int) -> Tuple[int, int]:
        return (self.energies[side - 1].size, self.K)

    def same_as(self, other: "OrdinateGrid") -> bool:
        if other is self:
            return True
        return (self.K == other.K and self.delta_V == other.delta_V
                and all(np.array_equal(a, b) for a, b in zip(self.energies, other.energies)))

    # -- quadrature ----------------------------------------------------------

    def density(self, values: np.ndarray, side: int) -> Dict[int, float]:
        """<f> per species from side values shaped (n_E, K)."""
        w = self.radial_weights(side) * values.mean(axis=1)
        sp = self.species(side)
        return {s: float(w[sp == s].sum()) for s in SPECIES}

    def flux_x(self, values: np.ndarray, side: int) -> Dict[int, float]:
        """<mu f> per species."""
        w = self.radial_weights(side) * (values @ self.mu) / self.K
        sp = self.species(side)
        return {s: float(w[sp == s].sum()) for s in SPECIES}

    def evaluate(self, func) -> "BoundaryDistribution":
        """Fill both sides with func(side, s, eps, phi) evaluated on broadcast arrays."""
        sides = []
        for side in (1, 2):
            eps = self.eps(side)[:, None]
            s = self.species(side)[:, None]
            sides.append(np.asarray(func(side, s, eps, self.phi[None, :]), dtype=float)
                         * np.ones(self.shape(side)))
        return BoundaryDistribution(self, sides[0], sides[1])


def _side(side: int) -> None:
    if side not in (1, 2):
        raise DomainError("side must be 1 or 2")


@dataclass(eq=False)
class BoundaryDistribution:
    """Interface traces on both sides: side arrays are indexed [energy row, angle]."""

    grid: OrdinateGrid
    side1: np.ndarray
    side2: np.ndarray

    def __post_init__(self):
        for side, arr in ((1, self.side1), (2, self.side2)):
            if np.shape(arr) != self.grid.shape(side):
                raise StructuralError(f"side {side} values do not match the ordinate grid")
            if not np.all(np.isfinite(arr)):
                raise DomainError("boundary values must be finite")

    def side(self, i: int) -> np.ndarray:
        _side(i)
        return self.side1 if i == 1 else self.side2

    def block(self, i: int, s: int) -> np.ndarray:
        """Values of species s on side i as (M, K), rows ordered by eps."""
        return self.side(i)[self.grid.species_rows(i, s)]

    def copy(self) -> "BoundaryDistribution":
        return BoundaryDistribution(self.grid, self.side1.copy(), self.side2.copy())

    def __add__(self, other: "BoundaryDistribution") -> "BoundaryDistribution":
        _check_grid(self.grid, other.grid)
        return BoundaryDistribution(self.grid, self.side1 + other.side1, self.side2 + other.side2)

    def __sub__(self, other: "BoundaryDistribution") -> "BoundaryDistribution":
        _check_grid(self.grid, other.grid)
        return BoundaryDistribution(self.grid, self.side1 - other.side1, self.side2 - other.side2)

    def scaled(self, a: float) -> "BoundaryDistribution":
        return BoundaryDistribution(self.grid, a * self.side1, a * self.side2)


def _check_grid(a: OrdinateGrid, b: OrdinateGrid) -> None:
    if not a.same_as(b):
        raise StructuralError("boundary data live on different ordinate grids")


# ---------------------------------------------------------------------------
# KTC operator


@dataclass(eq=False)
class KTCOperator:
    """Sparse form of the transmission conditions on an ordinate grid.

    For side i, inflow = K_i @ (outflow of both sides) + const_i, where the
    outflow vector is side-1 values then side-2 values, flattened row-major.
    """

    grid: OrdinateGrid
    table: ScatteringTable
    matrices: Tuple[sparse.csr_matrix, sparse.csr_matrix] = field(init=False)
    constants: Tuple[np.ndarray, np.ndarray] = field(init=False)
    transmitted: Tuple[np.ndarray, np.ndarray] = field(init=False)

    def __post_init__(self):
        if abs(self.table.delta_V - self.grid.delta_V) > 1e-14:
            raise StructuralError("scattering table and ordinate grid disagree on delta_V")
        self._assemble()

    def _pairs(self, i: int):
        # matched energy rows (e on side i, e' on side j)
        g = self.grid
        j = 3 - i
        Ei, Ej = g.energies[i - 1], g.energies[j - 1]
        target = Ei - (-1) ** j * g.delta_V
        order = np.argsort(Ej)
        pos = np.searchsorted(Ej[order], target)
        pos = np.clip(pos, 0, Ej.size - 1)
        cand = [order[np.clip(pos + d, 0, Ej.size - 1)] for d in (-1, 0)]
        best = np.where(np.abs(Ej[cand[0]] - target) < np.abs(Ej[cand[1]] - target), cand[0], cand[1])
        hit = np.abs(Ej[best] - target) < 1e-9
        return np.flatnonzero(hit), best[hit]

    def _assemble(self):
        g = self.grid
        K = g.K
        h = 2.0 * np.pi / K
        mats, consts, teffs = [], [], []
        n1 = g.energies[0].size * K
        offsets = {1: 0, 2: n1}
        ntot = n1 + g.energies[1].size * K
        for i in (1, 2):
            j = 3 - i
            ang = g.inflow_angles(i)  # equals the outflow angles of side j
            ang = ang[np.argsort(g.sin_phi[ang])]
            lens = h * np.abs(g.mu[ang])
            cK = 0.5 * lens.sum()
            upper = np.cumsum(lens) - cK
            lower = upper - lens
            rows_i, rows_j = self._pairs(i)
            Ei = g.energies[i - 1][rows_i]
            Ej = g.energies[j - 1][rows_j]
            ei, ej = np.abs(Ei), np.abs(Ej)
            # overlap of p_y cells, all pairs of angles, all matched energies
            lo = np.maximum(ei[:, None, None] * lower[None, :, None], ej[:, None, None] * lower[None, None, :])
            hi = np.minimum(ei[:, None, None] * upper[None, :, None], ej[:, None, None] * upper[None, None, :])
            ov = np.clip(hi - lo, 0.0, None)
            e_idx, a_idx, b_idx = np.nonzero(ov > 0)
            ov = ov[e_idx, a_idx, b_idx]
            p_mid = 0.5 * (lo[e_idx, a_idx, b_idx] + hi[e_idx, a_idx, b_idx]) / cK
            E1 = (Ei if i == 1 else Ej)[e_idx]
            T = self.table.transmission(1, E1, p_mid) if E1.size else np.zeros(0)
            w = ov * T / (ei[e_idx] * lens[a_idx])
            s_i = np.sign(Ei[e_idx]).astype(int)
            s_j = np.sign(Ej[e_idx]).astype(int)
            row = rows_i[e_idx] * K + ang[a_idx]
            col = offsets[j] + rows_j[e_idx] * K + ang[b_idx]
            shape_i = g.shape(i)
            teff = np.zeros(shape_i[0] * K)
            np.add.at(teff, row, w)
            const = np.zeros(shape_i[0] * K)
            np.add.at(const, row, w * (s_i != s_j))
            # reflection from the mirrored outflow node of the same side
            inflow_rows = np.flatnonzero(g.inflow_mask(i).ravel())
            e_of, k_of = np.divmod(inflow_rows, K)
            refl_col = offsets[i] + e_of * K + g.mirror[k_of]
            refl = 1.0 - teff[inflow_rows]
            data = np.concatenate([refl, w * s_i * s_j])
            r = np.concatenate([inflow_rows, row])
            c = np.concatenate([refl_col, col])
            mats.append(sparse.csr_matrix((data, (r, c)), shape=(shape_i[0] * K, ntot)))
            consts.append(const)
            teffs.append(teff.reshape(shape_i))
        self.matrices = (mats[0], mats[1])
        self.constants = (consts[0], consts[1])
        self.transmitted = (teffs[0], teffs[1])

    def outflow_vector(self, out1: np.ndarray, out2: np.ndarray) -> np.ndarray:
        return np.concatenate([np.asarray(out1, float).ravel(), np.asarray(out2, float).ravel()])

    def _apply(self, i: int, out_i, out_j, affine: bool) -> np.ndarray:
        _side(i)
        g = self.grid
        j = 3 - i
        out_i = np.asarray(out_i, dtype=float)
        out_j = np.asarray(out_j, dtype=float)
        if out_i.shape != g.shape(i) or out_j.shape != g.shape(j):
            raise StructuralError("outflow data do not match the ordinate grid")
        vec = self.outflow_vector(out_i, out_j) if i == 1 else self.outflow_vector(out_j, out_i)
        # only outflow entries feed the operator
        mask = np.concatenate([g.outflow_mask(1).ravel(), g.outflow_mask(2).ravel()])
        res = self.matrices[i - 1] @ np.where(mask, vec, 0.0)
        if affine:
            res = res + self.constants[i - 1]
        res = res.reshape(g.shape(i))
        inflow = g.inflow_mask(i)
        return np.where(inflow, res, out_i)

    def apply_B(self, i: int, out_i, out_j) -> np.ndarray:
        """Side-i trace whose inflow part is B^i(out_i, out_j); outflow copied from out_i."""
        return self._apply(i, out_i, out_j, True)

    def apply_K(self, i: int, out_i, out_j) -> np.ndarray:
        """Side-i trace whose inflow part is K^i(out_i, out_j); outflow copied from out_i."""
        return self._apply(i, out_i, out_j, False)

    def apply_all(self, f: BoundaryDistribution, affine: bool = True) -> BoundaryDistribution:
        """Both sides' inflows from the outflows of f."""
        _check_grid(self.grid, f.grid)
        a = self._apply(1, f.side1, f.side2, affine)
        b = self._apply(2, f.side2, f.side1, affine)
        return BoundaryDistribution(self.grid, a, b)


_OPERATOR_CACHE: Dict[Tuple[int, int], KTCOperator] = {}


def ktc_operator(grid: OrdinateGrid, table: ScatteringTable) -> KTCOperator:
    key = (id(grid), id(table))
    op = _OPERATOR_CACHE.get(key)
    if op is None or op.grid is not grid or op.table is not table:
        op = KTCOperator(grid, table)
        if len(_OPERATOR_CACHE) > 32:
            _OPERATOR_CACHE.clear()
        _OPERATOR_CACHE[key] = op
    return op


def _grid_for(f_out_i, grid, delta_V):
    if isinstance(f_out_i, BoundaryDistribution):
        return f_out_i.grid
    if grid is None:
        raise StructuralError("raw arrays need an explicit ordinate grid")
    if abs(grid.delta_V - delta_V) > 1e-14:
        raise StructuralError("ordinate grid built for a different delta_V")
    return grid


def _side_values(f, side):
    return f.side(side) if isinstance(f, BoundaryDistribution) else np.asarray(f, dtype=float)


def apply_B(i: int, f_out_i, f_out_j, table: ScatteringTable, delta_V: float,
            grid: Optional[OrdinateGrid] = None) -> np.ndarray:
    """Inflow on side i from the affine transmission conditions.

    f_out_i and f_out_j are side arrays (or BoundaryDistributions, whose own
    sides i and j are used); only their outflow entries are read.  Returns the
    side-i array with inflow entries replaced.
    """
    grid = _grid_for(f_out_i, grid, delta_V)
    if abs(table.delta_V - delta_V) > 1e-14:
        raise StructuralError("scattering table built for a different delta_V")
    j = 3 - i
    return ktc_operator(grid, table).apply_B(i, _side_values(f_out_i, i), _side_values(f_out_j, j))


def apply_K(i: int, g_out_i, g_out_j, table: ScatteringTable, delta_V: float,
            grid: Optional[OrdinateGrid] = None) -> np.ndarray:
    """Inflow on side i from the linear part of the transmission conditions."""
    grid = _grid_for(g_out_i, grid, delta_V)
    if abs(table.delta_V - delta_V) > 1e-14:
        raise StructuralError("scattering table built for a different delta_V")
    j = 3 - i
    return ktc_operator(grid, table).apply_K(i, _side_values(g_out_i, i), _side_values(g_out_j, j))


def charge_flux(f: BoundaryDistribution, i: int) -> Tuple[float, float]:
    """(J_+, J_-) x-fluxes <mu f_s> on side i."""
    fl = f.grid.flux_x(f.side(i), i)
    return fl[1], fl[-1]


def admissible_couples(delta_V: float) -> List[Tuple[int, int]]:
    if delta_V > 0:
        return [(1, 1), (1, -1), (-1, -1)]
    if delta_V < 0:
        return [(1, 1), (-1, 1), (-1, -1)]
    return [(1, 1), (-1, -1)]


def _positive(*values):
    for v in values:
        if not (np.all(np.isfinite(v)) and np.all(np.asarray(v) > 0)):
            raise DomainError("densities must be positive")


def dtc_leading_residual(n1_plus, n1_minus, n2_plus, n2_minus, delta_V: float) -> np.ndarray:
    """s A(n1_s) - s' A(n2_s') - delta_V for each admissible couple."""
    _positive(n1_plus, n1_minus, n2_plus, n2_minus)
    A1 = {1: core.chemical_potential(n1_plus), -1: core.chemical_potential(n1_minus)}
    A2 = {1: core.chemical_potential(n2_plus), -1: core.chemical_potential(n2_minus)}
    return np.array([s * A1[s] - s2 * A2[s2] - delta_V for s, s2 in admissible_couples(delta_V)])


def dtc_first_order_residual(n1, n2, ninf1, ninf2, tau: float, delta_V: float,
                             mode: str = "FD", form: str = "linear") -> np.ndarray:
    """First-order diffusive transmission residuals.

    n1, n2, ninf1, ninf2 are (plus, minus) pairs.  FD mode evaluates, per
    admissible couple, s A(n1_s + tau ninf1_s) - s' A(n2_s' + tau ninf2_s') - delta_V.
    With form="linear" (default) each A(n + tau m) is replaced by its tangent
    A(n) + tau m / phi_1(A(n)), which is exactly invariant under the Milne
    kernel; form="exact" keeps the full nonlinear relation.

    MB mode returns, for delta_V != 0, the two linear jump relations and the
    linearised mass-action law (ordered as the admissible couples); for
    delta_V = 0 the two species continuity relations.
    """
    n1 = tuple(float(v) for v in n1)
    n2 = tuple(float(v) for v in n2)
    m1 = tuple(float(v) for v in ninf1)
    m2 = tuple(float(v) for v in ninf2)
    if tau < 0:
        raise DomainError("tau must be nonnegative")
    _positive(*n1, *n2)
    idx = {1: 0, -1: 1}
    corrected = [n1[k] + tau * m1[k] for k in (0, 1)] + [n2[k] + tau * m2[k] for k in (0, 1)]
    if min(corrected) <= 0:
        raise DomainError("corrected density nonpositive: tau too large for the linearisation")
    if mode == "FD":
        def pot(n, m):
            A = core.chemical_potential(n)
            if form == "exact":
                return core.chemical_potential(n + tau * m)
            return A + tau * m / core.phi1(A)
        out = []
        for s, s2 in admissible_couples(delta_V):
            a = s * pot(n1[idx[s]], m1[idx[s]])
            b = s2 * pot(n2[idx[s2]], m2[idx[s2]])
            out.append(a - b - delta_V)
        return np.array(out)
    if mode != "MB":
        raise DomainError("mode must be FD or MB")
    e = np.exp(delta_V)
    if delta_V == 0:
        return np.array([n1[0] - n2[0] - tau * (m2[0] - m1[0]),
                         n1[1] - n2[1] - tau * (m2[1] - m1[1])])
    if delta_V > 0:
        return np.array([
            n1[0] - e * n2[0] - tau * (e * m2[0] - m1[0]),
            n1[0] * n2[1] + tau * (n1[0] * m2[1] + n2[1] * m1[0]) - e,
            n1[1] - n2[1] / e - tau * (m2[1] / e - m1[1]),
        ])
    # delta_V < 0: couple (-,+) gives n1_- n2_+ = e^{-delta_V}
    return np.array([
        n1[0] - e * n2[0] - tau * (e * m2[0] - m1[0]),
        n1[1] * n2[0] + tau * (n1[1] * m2[0] + n2[0] * m1[1]) - 1.0 / e,
        n1[1] - n2[1] / e - tau * (m2[1] / e - m1[1]),
    ])
