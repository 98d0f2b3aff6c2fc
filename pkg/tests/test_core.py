import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, strategies as st

from gqtransport import core
from gqtransport.errors import DomainError, SaturationWarning


def polylog_fermi(k, z):
    # phi_k(z) = -Li_k(-e^z), evaluated in extended precision
    return float(mpmath.re(-mpmath.polylog(k, -mpmath.exp(z))))


def test_phi_values_at_zero():
    assert abs(core.phi1(0.0) - math.log(2.0)) < 1e-14
    assert abs(core.phi2(0.0) - math.pi ** 2 / 12) < 1e-14
    assert abs(core.phi0(0.0) - 0.5) < 1e-15


@pytest.mark.parametrize("z", [-35.0, -8.0, -2.0, -1.3, 0.0, 0.7, 4.0, 25.0, 39.0])
def test_phi2_against_polylog(z):
    ref = polylog_fermi(2, z)
    assert abs(core.phi2(z) - ref) <= 1e-13 * abs(ref)


@pytest.mark.parametrize("k", [0.5, 1.5, 3.0])
@pytest.mark.parametrize("z", [-6.0, -1.0, 0.5, 8.0])
def test_fermi_integral_against_polylog(k, z):
    ref = polylog_fermi(k, z)
    assert abs(core.fermi_integral(k, z) - ref) <= 1e-11 * abs(ref)


def test_fermi_integral_matches_closed_forms():
    z = np.array([-3.0, 0.0, 2.5])
    assert np.allclose(core.fermi_integral(1.0, z), core.phi1(z), rtol=1e-12, atol=0)
    assert np.allclose(core.fermi_integral(2.0, z), core.phi2(z), rtol=1e-12, atol=0)


def test_frozen_chemical_potentials():
    # values frozen from a 30-digit mpmath root of -Li_2(-e^A) = n
    ref = {0.1: -2.2777553283452763, 1.0: 0.23536340006520354, 10.0: 4.091871112240725}
    for n, A in ref.items():
        assert abs(core.chemical_potential(n) - A) < 1e-12


def test_chemical_potential_against_mpmath_root():
    for n in (0.1, 1.0, 10.0):
        A = mpmath.findroot(lambda a: -mpmath.polylog(2, -mpmath.exp(a)) - n, 0.5)
        assert abs(core.chemical_potential(n) - float(A)) < 1e-12


@given(st.floats(min_value=1e-6, max_value=500.0))
def test_inverse_round_trip(n):
    assert abs(core.phi2(core.chemical_potential(n)) / n - 1.0) < 1e-12


@given(st.floats(min_value=-30.0, max_value=30.0), st.floats(min_value=1e-3, max_value=5.0))
def test_phi_monotone_with_derivative_chain(z, dz):
    assert core.phi2(z + dz) > core.phi2(z)
    assert core.phi1(z + dz) > core.phi1(z)
    # d phi_2 / dz = phi_1 by a centred difference
    h = 1e-5
    d = (core.phi2(z + h) - core.phi2(z - h)) / (2 * h)
    assert abs(d - core.phi1(z)) < 1e-7 * max(1.0, core.phi1(z))


def test_inverse_saturates_with_warning():
    with warnings.catch_warnings(record=True) as rec:
        warnings.simplefilter("always")
        A = core.chemical_potential(1e-30)
    assert A == -core.A_MAX
    assert any(issubclass(w.category, SaturationWarning) for w in rec)


@pytest.mark.parametrize("bad", [0.0, -1.0, float("nan"), float("inf")])
def test_inverse_rejects_bad_density(bad):
    with pytest.raises(DomainError):
        core.chemical_potential(bad)


def test_occupation_and_derivative_identity():
    eps = np.linspace(0.0, 30.0, 7)
    A = 0.3
    F = core.fd_occupation(eps, A)
    assert np.allclose(core.fd_occupation_derivative_A(eps, A) * core.phi1(A), F * (1 - F), rtol=1e-14)


def test_fd_derivative_is_d_dn_of_occupation():
    eps = np.linspace(0.0, 12.0, 13)
    n, h = 1.7, 1e-6
    fd = (core.fd_occupation(eps, core.chemical_potential(n + h))
          - core.fd_occupation(eps, core.chemical_potential(n - h))) / (2 * h)
    assert np.allclose(core.fd_density_derivative(eps, n), fd, atol=1e-8)


@pytest.mark.parametrize("n", [0.1, 1.0, 10.0])
def test_quadrature_identities(n):
    q = core.MomentQuadrature.build(M=128, K=32)
    assert abs(q.bracket(core.fd_density_derivative(q.eps, n)) - 1.0) < 1e-8
    assert np.max(np.abs(q.velocity_ell_moment(n) - np.eye(2))) < 1e-6
    assert np.max(np.abs(q.velocity_ell_moment(n, "MB") - np.eye(2))) < 1e-6


def test_bracket_of_occupation_is_density():
    q = core.MomentQuadrature.build(M=128, K=32)
    A = core.chemical_potential(2.0)
    assert abs(q.bracket(core.fd_occupation(q.eps, A)) - 2.0) < 1e-10
    assert abs(q.bracket(core.maxwellian(q.eps)) - 1.0) < 1e-10


def test_angular_nodes_avoid_grazing():
    phi = core.angular_nodes(16)
    assert np.min(np.abs(np.cos(phi))) > 0.05
    with pytest.raises(DomainError):
        core.angular_nodes(10)


def test_scaled_units_round_trip():
    cfg = core.PhysicalConfig(temperature=300.0)
    u = cfg.units()
    for kind in ("density", "energy", "momentum", "velocity"):
        x = u.to_scaled(3.5, kind)
        assert abs(u.to_physical(x, kind) - 3.5) < 1e-12 * 3.5
    # k_B T at 300 K in joules, and n0 = (k_B T)^2 / (2 pi hbar^2 c^2)
    assert abs(u.energy - 4.141947e-21) < 1e-26
    assert abs(cfg.n0 - u.energy ** 2 / (2 * math.pi * core.HBAR ** 2 * 1e12)) < 1e-6 * cfg.n0
    with pytest.raises(DomainError):
        u.to_scaled(1.0, "length")
    with pytest.raises(DomainError):
        core.PhysicalConfig(temperature=-1.0)
