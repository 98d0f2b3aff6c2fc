import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from gqtransport import core
from gqtransport.errors import DomainError, StructuralError
from gqtransport.interface import (BoundaryDistribution, OrdinateGrid, admissible_couples, apply_B,
                                   apply_K, charge_flux, dtc_first_order_residual,
                                   dtc_leading_residual, ktc_operator)
from gqtransport.milne import kernel_element
from gqtransport.scattering import ScatteringTable

DVS = [1.5, 0.0, -1.0, 0.37]


def outflow_pair(grid, rng):
    return [np.where(grid.outflow_mask(i), rng.random(grid.shape(i)), 0.0) for i in (1, 2)]


def closed(grid, table, o1, o2):
    dv = grid.delta_V
    return BoundaryDistribution(grid, apply_B(1, o1, o2, table, dv, grid), apply_B(2, o2, o1, table, dv, grid))


def fd_data(grid, A):
    def F(side, s, eps, phi):
        return np.where(s == 1, core.fd_occupation(eps, A[(side, 1)]), core.fd_occupation(eps, A[(side, -1)]))
    return grid.evaluate(F)


@pytest.mark.parametrize("dv", DVS)
def test_grid_is_shift_matched(dv):
    g = OrdinateGrid.build(dv, K=16)
    e1, e2 = g.energies
    w1, w2 = g.weights
    # every side-1 node E with |E - dv| inside the window has side-2 node E - dv with the same weight
    inside = np.abs(e1 - dv) < g.E_max - 1e-9
    lookup = {round(e, 12): w for e, w in zip(e2, w2)}
    for e, w in zip(e1[inside], w1[inside]):
        assert lookup[round(e - dv, 12)] == w
    # no node sits on a cone apex
    assert np.min(np.abs(e1)) > 0 and np.min(np.abs(e2)) > 0


@pytest.mark.parametrize("dv", [0.0, 1.0])
def test_grid_integrates_occupations(dv):
    g = OrdinateGrid.build(dv, K=16)
    A = 0.4
    f = g.evaluate(lambda side, s, eps, phi: core.fd_occupation(eps, A))
    d = g.density(f.side(1), 1)
    assert abs(d[1] - core.phi2(A)) < 1e-10 and abs(d[-1] - core.phi2(A)) < 1e-10


def test_grid_rejects_bad_K():
    with pytest.raises(DomainError):
        OrdinateGrid.build(0.0, K=10)


@pytest.mark.parametrize("dv", DVS)
def test_flux_conservation(dv):
    g = OrdinateGrid.build(dv, K=16)
    table = ScatteringTable.step(dv)
    rng = np.random.default_rng(3)
    for _ in range(20):
        f = closed(g, table, *outflow_pair(g, rng))
        J1, J2 = charge_flux(f, 1), charge_flux(f, 2)
        if dv != 0:
            assert abs((J1[0] - J1[1]) - (J2[0] - J2[1])) < 1e-12
        else:
            assert abs(J1[0] - J2[0]) < 1e-12 and abs(J1[1] - J2[1]) < 1e-12


@given(st.floats(-2.5, 2.5), st.integers(0, 2 ** 31 - 1))
def test_flux_conservation_property(dv, seed):
    g = OrdinateGrid.build(dv, K=8, cell_width=1.0, gauss=2, E_max=12.0)
    f = closed(g, ScatteringTable.step(dv), *outflow_pair(g, np.random.default_rng(seed)))
    J1, J2 = charge_flux(f, 1), charge_flux(f, 2)
    assert abs((J1[0] - J1[1]) - (J2[0] - J2[1])) < 1e-11


@given(st.floats(-3.0, 3.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0))
def test_equilibrium_fixed_point(dv, A1p, A1m_free):
    dv = round(dv, 3)
    if dv != 0:
        A = {(1, 1): A1p, (1, -1): -A1p, (2, 1): A1p - dv, (2, -1): -A1p + dv}
    else:
        A = {(1, 1): A1p, (1, -1): A1m_free, (2, 1): A1p, (2, -1): A1m_free}
    g = OrdinateGrid.build(dv, K=8, cell_width=1.0, gauss=2, E_max=12.0)
    table = ScatteringTable.step(dv)
    f = fd_data(g, A)
    for i in (1, 2):
        res = apply_B(i, f.side(i), f.side(3 - i), table, dv, g) - f.side(i)
        assert np.max(np.abs(res)) < 1e-12


@pytest.mark.parametrize("dv", [-1.0, 0.0, 1.5])
def test_equilibrium_fixed_point_transfer_matrix(dv):
    from gqtransport.scattering import PotentialProfile
    table = ScatteringTable.from_profile(PotentialProfile(((0.6, 2.2),), dv))
    g = OrdinateGrid.build(dv, K=16)
    A1p = 0.25
    A = ({(1, 1): A1p, (1, -1): -A1p, (2, 1): A1p - dv, (2, -1): -A1p + dv} if dv
         else {(1, 1): A1p, (1, -1): -0.6, (2, 1): A1p, (2, -1): -0.6})
    f = fd_data(g, A)
    for i in (1, 2):
        assert np.max(np.abs(apply_B(i, f.side(i), f.side(3 - i), table, dv, g) - f.side(i))) < 1e-12


def test_pure_reflection_mirrors_outflow():
    g = OrdinateGrid.build(0.8, K=16)
    table = ScatteringTable.constant_table(0.0, 0.8)
    o1, o2 = outflow_pair(g, np.random.default_rng(5))
    for i, o in ((1, o1), (2, o2)):
        inflow = apply_B(i, o, o2 if i == 1 else o1, table, 0.8, g)
        m = g.mirror
        mask = g.inflow_mask(i)
        assert np.allclose(inflow[mask], o[:, m][mask], atol=0)


def test_B_is_affine_and_K_linear():
    dv = 1.2
    g = OrdinateGrid.build(dv, K=16)
    table = ScatteringTable.step(dv)
    rng = np.random.default_rng(9)
    a1, a2 = outflow_pair(g, rng)
    b1, b2 = outflow_pair(g, rng)
    for i, (x, y), (u, v) in ((1, (a1, a2), (b1, b2)), (2, (a2, a1), (b2, b1))):
        lhs = apply_K(i, 2 * x - 3 * u, 2 * y - 3 * v, table, dv, g)
        rhs = 2 * apply_K(i, x, y, table, dv, g) - 3 * apply_K(i, u, v, table, dv, g)
        assert np.max(np.abs(lhs - rhs)) < 1e-13
        # B - K is the same constant for any outflow
        d1 = apply_B(i, x, y, table, dv, g) - apply_K(i, x, y, table, dv, g)
        d2 = apply_B(i, u, v, table, dv, g) - apply_K(i, u, v, table, dv, g)
        assert np.max(np.abs(d1 - d2)) < 1e-13


def test_operator_rejects_mismatched_table():
    g = OrdinateGrid.build(1.0, K=8)
    with pytest.raises(StructuralError):
        ktc_operator(g, ScatteringTable.step(0.5))


def test_admissible_couples():
    assert admissible_couples(1.0) == [(1, 1), (1, -1), (-1, -1)]
    assert admissible_couples(0.0) == [(1, 1), (-1, -1)]
    assert admissible_couples(-1.0) == [(1, 1), (-1, 1), (-1, -1)]


def test_leading_dtc_from_equilibrium_potentials():
    dv, A1p = 1.5, 0.3
    n = {k: core.phi2(a) for k, a in {(1, 1): A1p, (1, -1): -A1p, (2, 1): A1p - dv, (2, -1): dv - A1p}.items()}
    r = dtc_leading_residual(n[(1, 1)], n[(1, -1)], n[(2, 1)], n[(2, -1)], dv)
    assert np.max(np.abs(r)) < 1e-12


def test_first_order_reduces_to_leading_at_tau_zero():
    n1, n2 = (0.8, 1.3), (0.4, 2.1)
    lead = dtc_leading_residual(*n1, *n2, 0.7)
    first = dtc_first_order_residual(n1, n2, (5.0, -2.0), (1.0, 3.0), 0.0, 0.7)
    assert np.allclose(lead, first, atol=1e-15)


@given(st.floats(-2, 2), st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0.05, 5), st.floats(0.05, 5),
       st.floats(-1, 1), st.floats(-3, 3))
def test_gauge_invariance_fd(dv, a, b, c, d, m, t):
    n1, n2 = (a, b), (c, d)
    m1, m2 = (m, -0.5 * m), (0.3 * m, m)
    tau = 1e-3
    base = dtc_first_order_residual(n1, n2, m1, m2, tau, dv, "FD")
    gam = kernel_element(n1, n2, dv, "FD", t=t, t_minus=-0.7 * t)
    shifted = dtc_first_order_residual(n1, n2, (m1[0] + gam[(1, 1)], m1[1] + gam[(1, -1)]),
                                       (m2[0] + gam[(2, 1)], m2[1] + gam[(2, -1)]), tau, dv, "FD")
    assert np.max(np.abs(shifted - base)) < 1e-12


def mb_leading_solution(dv):
    """Densities satisfying the leading MB jump and mass-action relations."""
    e = math.exp(dv)
    if dv > 0:
        n1p = 2.0
        n2p, n2m = n1p / e, e / n1p
        return (n1p, n2m / e), (n2p, n2m)
    if dv < 0:
        n1m = 0.7
        n2p = (1.0 / e) / n1m
        return (e * n2p, n1m), (n2p, e * n1m)
    return (1.3, 0.6), (1.3, 0.6)


def test_gauge_invariance_mb_on_leading_solutions():
    for dv in (1.0, -0.6, 0.0):
        n1, n2 = mb_leading_solution(dv)
        assert np.max(np.abs(dtc_first_order_residual(n1, n2, (0, 0), (0, 0), 0.0, dv, "MB"))) < 1e-12
        m1, m2 = (0.2, -0.4), (0.5, 0.1)
        tau = 2e-3
        base = dtc_first_order_residual(n1, n2, m1, m2, tau, dv, "MB")
        gam = kernel_element(n1, n2, dv, "MB", t=1.7, t_minus=0.4)
        shifted = dtc_first_order_residual(n1, n2, (m1[0] + gam[(1, 1)], m1[1] + gam[(1, -1)]),
                                           (m2[0] + gam[(2, 1)], m2[1] + gam[(2, -1)]), tau, dv, "MB")
        assert np.max(np.abs(shifted - base)) < 1e-12


def test_first_order_rejects_negative_corrected_density():
    with pytest.raises(DomainError):
        dtc_first_order_residual((0.1, 1.0), (1.0, 1.0), (-200.0, 0.0), (0.0, 0.0), 1e-3, 0.5)


def test_exact_and_linear_forms_agree_to_second_order():
    n1, n2, m1, m2 = (0.8, 1.3), (0.4, 2.1), (0.5, -0.2), (0.1, 0.3)
    d = []
    for tau in (1e-2, 5e-3):
        lin = dtc_first_order_residual(n1, n2, m1, m2, tau, 0.7, "FD", "linear")
        ex = dtc_first_order_residual(n1, n2, m1, m2, tau, 0.7, "FD", "exact")
        d.append(np.max(np.abs(lin - ex)))
    assert 3.5 < d[0] / d[1] < 4.5
