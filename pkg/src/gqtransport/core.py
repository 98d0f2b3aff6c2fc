"""
Fermi-integral algebra, equilibrium distributions and the scaled unit system.

Everything here works in scaled units: beta = c = n0 = 1, energies in k_B T,
the radial momentum variable is eps = beta*c*|p| and densities are in units of
n0 = (k_B T)^2 / (2 pi hbar^2 c^2).  The bracket of a phase-space function is

    <f> = (1/2pi) * int_0^2pi dphi int_0^inf f(eps, phi) eps d(eps),

so that <exp(-eps)> = 1 and <F_n> = phi_2(A(n)) = n.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, SaturationWarning

A_MAX = 40.0
EPS_MAX = 30.0

K_BOLTZMANN = 1.380649e-23
HBAR = 1.054571817e-34


@dataclass(frozen=True)
class PhysicalConfig:
    """Physical parameters of a run, in SI units where dimensional."""

    temperature: float = 300.0
    fermi_velocity: float = 1.0e6
    hbar: float = HBAR
    delta_V: float = 0.0
    tau: float = 0.0
    half_length_L: float = 1.0
    half_width_l: float = 1.0

    def __post_init__(self):
        if not self.temperature > 0:
            raise DomainError("temperature must be positive")
        if not self.fermi_velocity > 0:
            raise DomainError("fermi_velocity must be positive")
        if not self.hbar > 0:
            raise DomainError("hbar must be positive")
        if not self.tau >= 0:
            raise DomainError("tau must be nonnegative")
        if not (self.half_length_L > 0 and self.half_width_l > 0):
            raise DomainError("device dimensions must be positive")
        if not math.isfinite(self.delta_V):
            raise DomainError("delta_V must be finite")

    @property
    def n0(self) -> float:
        """Reference density (k_B T)^2 / (2 pi hbar^2 c^2) in m^-2."""
        kt = K_BOLTZMANN * self.temperature
        return kt * kt / (2.0 * math.pi * self.hbar ** 2 * self.fermi_velocity ** 2)

    def units(self) -> "ScaledUnits":
        return ScaledUnits.from_config(self)


@dataclass(frozen=True)
class ScaledUnits:
    """Conversion factors between physical (SI) and scaled quantities.

    A physical quantity q of a given kind is scaled as q / scale[kind].
    """

    energy: float
    momentum: float
    density: float
    velocity: float

    @classmethod
    def from_config(cls, config: PhysicalConfig) -> "ScaledUnits":
        kt = K_BOLTZMANN * config.temperature
        return cls(energy=kt, momentum=kt / config.fermi_velocity,
                   density=config.n0, velocity=config.fermi_velocity)

    def _scale(self, kind: str) -> float:
        try:
            return getattr(self, kind)
        except AttributeError:
            raise DomainError(f"unknown quantity kind {kind!r}") from None

    def to_scaled(self, value, kind: str):
        return np.asarray(value, dtype=float) / self._scale(kind)

    def to_physical(self, value, kind: str):
        return np.asarray(value, dtype=float) * self._scale(kind)


# ---------------------------------------------------------------------------
# Fermi integrals


def _fermi_series(k: float, z: float) -> float:
    # alternating nondegenerate series, |e^z| <= e^-2 here
    x = math.exp(z)
    total = 0.0
    term_pow = 1.0
    for j in range(1, 200):
        term_pow *= x
        term = term_pow / j ** k
        total += term if j % 2 else -term
        if term < 1e-18 * total:
            break
    return total


def _fermi_quad(k: float, z: float) -> float:
    def integrand(t):
        return t ** (k - 1.0) * special.expit(z - t)

    split = max(z, 0.0)
    head = 0.0
    if split > 0:
        head = integrate.quad(integrand, 0.0, split, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    tail = integrate.quad(integrand, split, np.inf, epsabs=0.0, epsrel=1e-13, limit=200)[0]
    return (head + tail) / math.gamma(k)


def fermi_integral(k: float, z):
    """Complete Fermi-Dirac integral phi_k(z) of real order k > 0.

    Uses the nondegenerate series for z <= -2 and split adaptive quadrature
    otherwise.  Accepts a scalar or an array of arguments.
    """
    if not (np.isfinite(k) and k > 0):
        raise DomainError("Fermi integral order must be a positive finite number")
    z_arr = np.asarray(z, dtype=float)
    if not np.all(np.isfinite(z_arr)):
        raise DomainError("Fermi integral argument must be finite")
    flat = z_arr.ravel()
    out = np.empty_like(flat)
    for idx, zi in enumerate(flat):
        out[idx] = _fermi_series(k, zi) if zi <= -2.0 else _fermi_quad(k, zi)
    out = out.reshape(z_arr.shape)
    return float(out) if out.ndim == 0 else out


def phi0(z):
    """phi_0(z) = 1/(1+e^-z), the derivative of phi_1."""
    return special.expit(z)


def phi1(z):
    """phi_1(z) = ln(1 + e^z) in closed form."""
    return np.logaddexp(0.0, z)


def _series2(z):
    # vectorised nondegenerate series for phi_2, valid for z <= -2
    x = np.exp(z)
    j = np.arange(1, 41, dtype=float)
    signs = np.where(j % 2 == 1, 1.0, -1.0)
    return np.sum(signs * x[..., None] ** j / j ** 2, axis=-1)


def phi2(z):
    """phi_2(z) = -Li_2(-e^z): series for z <= -2, dilogarithm otherwise."""
    z = np.asarray(z, dtype=float)
    mid = np.clip(z, -2.0, 0.0)
    pos = np.maximum(z, 0.0)
    # scipy's spence(x) is Li_2(1 - x)
    low = _series2(np.minimum(z, -2.0))
    centre = -special.spence(1.0 + np.exp(mid))
    high = 0.5 * pos * pos + math.pi ** 2 / 6.0 + special.spence(1.0 + np.exp(-pos))
    out = np.where(z > 0, high, np.where(z <= -2.0, low, centre))
    return float(out) if out.ndim == 0 else out


def _saturate(a, x):
    lo = x < phi2(-A_MAX)
    hi = x > phi2(A_MAX)
    if np.any(lo) or np.any(hi):
        warnings.warn(f"chemical potential saturated at |A| = {A_MAX}", SaturationWarning,
                      stacklevel=3)
    a = np.where(lo, -A_MAX, a)
    return np.where(hi, A_MAX, a)


def inverse_fermi2(x):
    """Chemical potential A with phi_2(A) = x, for x > 0.

    Safeguarded Newton iteration with a bisection fallback.  Results are
    capped at |A| <= 40; capped values raise a SaturationWarning.
    """
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)) or np.any(x_arr <= 0):
        raise DomainError("inverse_fermi2 needs a positive finite density")
    xs = np.clip(x_arr, phi2(-A_MAX), phi2(A_MAX))
    # phi_2(a) <= e^a everywhere and phi_2(a) >= a^2/2 for a >= 0
    lo = np.log(xs)
    hi = np.maximum(np.sqrt(2.0 * xs), lo + 1.0)
    lo = np.maximum(lo - 1e-12, -A_MAX - 1.0)
    a = np.where(xs < 1.0, np.log(xs), np.sqrt(2.0 * xs))
    a = np.clip(a, lo, hi)
    for _ in range(100):
        f = phi2(a) - xs
        lo = np.where(f < 0, a, lo)
        hi = np.where(f > 0, a, hi)
        step = f / phi1(a)
        trial = a - step
        bad = (trial <= lo) | (trial >= hi) | ~np.isfinite(trial)
        a_new = np.where(bad, 0.5 * (lo + hi), trial)
        done = np.abs(a_new - a) <= 1e-15 * np.maximum(1.0, np.abs(a))
        a = a_new
        if np.all(done):
            break
    a = _saturate(a, x_arr)
    return float(a) if np.ndim(a) == 0 else a


def chemical_potential(n):
    """A(n) in scaled units (n0 = 1)."""
    return inverse_fermi2(n)


# ---------------------------------------------------------------------------
# Equilibrium distributions


def _check_eps(eps):
    eps = np.asarray(eps, dtype=float)
    if np.any(eps < 0) or not np.all(np.isfinite(eps)):
        raise DomainError("radial energy eps must be finite and nonnegative")
    return eps


def _check_density(n):
    n = np.asarray(n, dtype=float)
    if np.any(n <= 0) or not np.all(np.isfinite(n)):
        raise DomainError("density must be positive and finite")
    return n


def fd_occupation(eps, A):
    """Fermi-Dirac occupation 1/(exp(eps - A) + 1)."""
    eps = _check_eps(eps)
    return special.expit(np.asarray(A, dtype=float) - eps)


def fd_occupation_derivative_A(eps, A):
    """F_n'(eps) written in terms of the chemical potential A."""
    eps = _check_eps(eps)
    A = np.asarray(A, dtype=float)
    return special.expit(A - eps) * special.expit(eps - A) / phi1(A)


def fd_density_derivative(eps, n):
    """dF_n/dn = F_n^2 exp(eps - A(n)) / phi_1(A(n)), scaled units."""
    n = _check_density(n)
    return fd_occupation_derivative_A(eps, inverse_fermi2(n))


def maxwellian(eps):
    """Normalised Maxwellian exp(-eps), scaled units."""
    return np.exp(-_check_eps(eps))


# ---------------------------------------------------------------------------
# Moment quadrature


def angular_nodes(K: int) -> np.ndarray:
    """Uniform angles (k + 1/2) 2pi/K; with K divisible by 4 no node hits +-pi/2."""
    if K < 4 or K % 4:
        raise DomainError("angular node count must be a positive multiple of 4")
    return (np.arange(K) + 0.5) * (2.0 * math.pi / K)


@dataclass(frozen=True)
class MomentQuadrature:
    """Tensor rule for <.>: Gauss-Legendre in eps on [0, eps_max], trapezoid in phi."""

    eps: np.ndarray
    radial_weights: np.ndarray
    phi: np.ndarray

    @classmethod
    def build(cls, M: int = 128, K: int = 32, eps_max: float = EPS_MAX) -> "MomentQuadrature":
        x, w = np.polynomial.legendre.leggauss(M)
        eps = 0.5 * eps_max * (x + 1.0)
        # the eps factor of the polar measure lives in the radial weight
        weights = 0.5 * eps_max * w * eps
        return cls(eps=eps, radial_weights=weights, phi=angular_nodes(K))

    @property
    def mu(self) -> np.ndarray:
        return np.cos(self.phi)

    def bracket(self, values) -> float:
        """<f> for values shaped (M, K), or (M,) for radial functions."""
        values = np.asarray(values, dtype=float)
        if values.ndim == 1:
            return float(self.radial_weights @ values)
        return float(self.radial_weights @ values.mean(axis=1))

    def velocity_ell_moment(self, n: float, mode: str = "FD") -> np.ndarray:
        """<v (x) ell> with ell = 2 F_n' v (or 2 M v), expected to be the identity."""
        radial = fd_density_derivative(self.eps, n) if mode == "FD" else maxwellian(self.eps)
        v = np.stack([np.cos(self.phi), np.sin(self.phi)])
        ang = v @ v.T / self.phi.size
        return 2.0 * float(self.radial_weights @ radial) * ang
