"""
Dirac scattering data for steep potential profiles.

Energies are scaled (c = 1) and measured, on each side, from that side's
asymptotic potential: a state on side 1 with energy E has partner energy
E - delta_V on side 2.  Transmission coefficients depend on (E, p_y) only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from .errors import DegenerateStateError, DomainError

APEX_GUARD = 1e-9


@dataclass(frozen=True)
class PhaseState:
    """A point z = (|p|, phi, s) of pseudomomentum-chirality space.

    Velocity is parallel to p for both electrons and holes, so mu = cos(phi).
    Side 1 (x < 0) receives inflow with p_x < 0, side 2 with p_x > 0.
    """

    p_mod: float
    phi: float
    s: int

    def __post_init__(self):
        if self.p_mod < 0:
            raise DomainError("|p| must be nonnegative")
        if self.s not in (1, -1):
            raise DomainError("chirality must be +1 or -1")
        object.__setattr__(self, "phi", float(self.phi) % (2.0 * math.pi))

    @classmethod
    def from_components(cls, p_x: float, p_y: float, s: int) -> "PhaseState":
        return cls(math.hypot(p_x, p_y), math.atan2(p_y, p_x), s)

    @property
    def energy(self) -> float:
        return self.s * self.p_mod

    @property
    def mu(self) -> float:
        return math.cos(self.phi)

    @property
    def p_x(self) -> float:
        return self.p_mod * math.cos(self.phi)

    @property
    def p_y(self) -> float:
        return self.p_mod * math.sin(self.phi)

    def is_inflow(self, side: int) -> bool:
        _check_side(side)
        return (-1) ** side * self.p_x > 0

    def is_outflow(self, side: int) -> bool:
        _check_side(side)
        return (-1) ** side * self.p_x < 0

    def reflected(self) -> "PhaseState":
        """The p_x-reflected state ~z = (-p_x, p_y, s)."""
        return PhaseState(self.p_mod, math.pi - self.phi, self.s)


def _check_side(side: int) -> None:
    if side not in (1, 2):
        raise DomainError("side must be 1 or 2")


@dataclass(frozen=True)
class PotentialProfile:
    """Piecewise-constant potential between the asymptotes 0 (left) and delta_V (right)."""

    segments: Tuple[Tuple[float, float], ...] = ()
    delta_V: float = 0.0

    def __post_init__(self):
        segs = tuple((float(w), float(v)) for w, v in self.segments)
        for w, _ in segs:
            if not w > 0:
                raise DomainError("segment widths must be positive")
        object.__setattr__(self, "segments", segs)

    @classmethod
    def step(cls, delta_V: float) -> "PotentialProfile":
        return cls((), delta_V)

    @classmethod
    def barrier(cls, height: float, width: float, delta_V: float = 0.0) -> "PotentialProfile":
        return cls(((width, height),), delta_V)

    def mirrored(self) -> "PotentialProfile":
        """The profile seen from the right, re-referenced to its own asymptote."""
        segs = tuple((w, v - self.delta_V) for w, v in reversed(self.segments))
        return PotentialProfile(segs, -self.delta_V)

    def value(self, x: float) -> float:
        if x < 0:
            return 0.0
        edge = 0.0
        for w, v in self.segments:
            edge += w
            if x < edge:
                return v
        return self.delta_V


# ---------------------------------------------------------------------------
# Closed-form step


def step_coefficients(E: float, phi: float, delta_V: float):
    """Transmission and reflection through a sharp step of height delta_V.

    Returns (T, R, theta) with theta the transmission angle from the signed
    Snell law E sin(phi) = (E - delta_V) sin(theta), or None when the
    transmitted wave is evanescent (then T = 0).
    """
    if abs(E) < APEX_GUARD or abs(E - delta_V) < APEX_GUARD:
        raise DegenerateStateError("energy at a cone apex, chirality undefined")
    if not -math.pi / 2 < phi < math.pi / 2:
        raise DomainError("incidence angle must lie in (-pi/2, pi/2)")
    k2 = E - delta_V
    if abs(E * math.sin(phi)) >= abs(k2):
        return 0.0, 1.0, None
    theta = math.asin(E * math.sin(phi) / k2)
    T = 2.0 * math.cos(phi) * math.cos(theta) / (1.0 + math.cos(phi + theta))
    return T, 1.0 - T, theta


def step_transmission(E, p_y, delta_V: float):
    """Vectorised step transmission as a function of (E, p_y)."""
    E = np.asarray(E, dtype=float)
    p_y = np.asarray(p_y, dtype=float)
    k2 = E - delta_V
    with np.errstate(divide="ignore", invalid="ignore"):
        ok = (np.abs(p_y) < np.abs(k2)) & (np.abs(p_y) < np.abs(E))
        sphi = np.where(ok, p_y / np.where(E == 0, 1.0, E), 0.0)
        sth = np.where(ok, p_y / np.where(k2 == 0, 1.0, k2), 0.0)
        phi = np.arcsin(np.clip(sphi, -1.0, 1.0))
        th = np.arcsin(np.clip(sth, -1.0, 1.0))
        T = 2.0 * np.cos(phi) * np.cos(th) / (1.0 + np.cos(phi + th))
    if delta_V == 0:
        # no step: theta = phi and T = 1 identically, even at grazing
        T = np.ones_like(T)
    return np.where(ok, T, 0.0)


# ---------------------------------------------------------------------------
# Transfer matrix


def _modes(k, p_y):
    # x-wavenumber of the right-moving (or right-decaying) mode and spinor ratios
    disc = k * k - p_y * p_y
    prop = disc > 0
    root = np.sqrt(np.abs(disc))
    p = np.where(prop, np.sign(k) * root, 1j * root)
    up = (p + 1j * p_y) / k
    um = (-p + 1j * p_y) / k
    return p, up, um, prop


def transfer_matrix_transmission(profile: PotentialProfile, E, p_y):
    """Vectorised (T, R) for a piecewise-constant profile by bispinor matching.

    Both spinor components are continuous at every jump.  Points whose right
    lead is evanescent get T = 0, R = 1.
    """
    E = np.atleast_1d(np.asarray(E, dtype=float))
    p_y = np.atleast_1d(np.asarray(p_y, dtype=float))
    E, p_y = np.broadcast_arrays(E, p_y)
    for v in (0.0, profile.delta_V) + tuple(v for _, v in profile.segments):
        if np.any(np.abs(E - v) < APEX_GUARD):
            raise DegenerateStateError("energy at a segment cone apex")

    k0 = E
    kR = E - profile.delta_V
    lead_ok = (np.abs(p_y) < np.abs(k0)) & (np.abs(p_y) < np.abs(kR))

    shape = E.shape + (2, 2)
    # spinor propagator across each layer: d psi/dx = G psi with
    # G = i k sigma_x + p_y sigma_z and G^2 = -p^2, so
    # U(w) = cos(p w) + sin(p w)/p G stays regular where p -> 0
    P = np.zeros(shape, dtype=complex)
    P[..., 0, 0] = 1.0
    P[..., 1, 1] = 1.0
    for w, v in profile.segments:
        k = E - v
        p = np.sqrt((k * k - p_y * p_y).astype(complex))
        c = np.cos(p * w)
        sn = w * np.sinc(p * w / np.pi)
        U = np.empty(shape, dtype=complex)
        U[..., 0, 0] = c + sn * p_y
        U[..., 0, 1] = 1j * sn * k
        U[..., 1, 0] = 1j * sn * k
        U[..., 1, 1] = c - sn * p_y
        P = U @ P
    # lead mode bases (columns: right- and left-moving), valid where lead_ok
    with np.errstate(divide="ignore", invalid="ignore"):
        _, upL, umL, _ = _modes(k0, p_y)
        _, upR, umR, _ = _modes(kR, p_y)
        left = np.empty(shape, dtype=complex)
        left[..., 0, 0] = 1.0
        left[..., 0, 1] = 1.0
        left[..., 1, 0] = upL
        left[..., 1, 1] = umL
        det = umR - upR
        inv = np.empty(shape, dtype=complex)
        inv[..., 0, 0] = umR / det
        inv[..., 0, 1] = -1.0 / det
        inv[..., 1, 0] = -upR / det
        inv[..., 1, 1] = 1.0 / det
        M = inv @ P @ left

    with np.errstate(divide="ignore", invalid="ignore"):
        r = -M[..., 1, 0] / M[..., 1, 1]
        t = M[..., 0, 0] + M[..., 0, 1] * r
        pL, _, _, _ = _modes(k0, p_y)
        pR, _, _, _ = _modes(kR, p_y)
        vL = np.real(pL) / k0
        vR = np.real(pR) / kR
        T = np.abs(t) ** 2 * vR / vL
        R = np.abs(r) ** 2
    T = np.where(lead_ok, T, 0.0)
    R = np.where(lead_ok, R, 1.0)
    return T, R


def transfer_matrix_coefficients(profile: PotentialProfile, E: float, p_y: float):
    """(T, R) for one state incident from the left with energy E and momentum p_y."""
    T, R = transfer_matrix_transmission(profile, E, p_y)
    return float(T[0]), float(R[0])


# ---------------------------------------------------------------------------
# Tables


@dataclass(frozen=True)
class ScatteringTable:
    """Evaluator of T^i(E, p_y), R^i = 1 - T^i for i = 1, 2.

    kind is "step", "transfer-matrix" or "constant".  Side-2 energies are
    measured from delta_V, so reciprocity reads T^1(E, p_y) = T^2(E - delta_V, p_y).
    """

    delta_V: float
    kind: str = "step"
    profile: Optional[PotentialProfile] = None
    constant: float = 1.0
    _mirror: Optional[PotentialProfile] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if self.kind not in ("step", "transfer-matrix", "constant"):
            raise DomainError(f"unknown scattering table kind {self.kind!r}")
        if self.kind == "transfer-matrix":
            if self.profile is None:
                raise DomainError("transfer-matrix table needs a profile")
            if self.profile.delta_V != self.delta_V:
                raise DomainError("profile delta_V disagrees with the table")
            object.__setattr__(self, "_mirror", self.profile.mirrored())

    @classmethod
    def step(cls, delta_V: float) -> "ScatteringTable":
        return cls(float(delta_V), "step")

    @classmethod
    def from_profile(cls, profile: PotentialProfile) -> "ScatteringTable":
        if not profile.segments:
            return cls.step(profile.delta_V)
        return cls(profile.delta_V, "transfer-matrix", profile)

    @classmethod
    def constant_table(cls, value: float, delta_V: float = 0.0) -> "ScatteringTable":
        """T fixed to value wherever both partner states propagate (test fixture)."""
        return cls(float(delta_V), "constant", constant=float(value))

    def transmission(self, side: int, E, p_y):
        _check_side(side)
        dv = self.delta_V if side == 1 else -self.delta_V
        E = np.asarray(E, dtype=float)
        p_y = np.asarray(p_y, dtype=float)
        if self.kind == "step":
            return step_transmission(E, p_y, dv)
        if self.kind == "constant":
            ok = (np.abs(p_y) < np.abs(E)) & (np.abs(p_y) < np.abs(E - dv))
            return np.where(ok, self.constant, 0.0)
        prof = self.profile if side == 1 else self._mirror
        T, _ = transfer_matrix_transmission(prof, E, p_y)
        return T.reshape(np.broadcast(E, p_y).shape)

    def reflection(self, side: int, E, p_y):
        return 1.0 - self.transmission(side, E, p_y)


def partner_state(z: PhaseState, from_side: int, delta_V: float) -> Optional[PhaseState]:
    """State across the interface sharing energy (shifted by the jump) and p_y.

    The partner keeps the sign of p_x, so an inflow state of one side maps to
    an outflow state of the other.  Returns None without a propagating partner.
    """
    _check_side(from_side)
    other = 2 if from_side == 1 else 1
    E2 = z.energy - (-1) ** other * delta_V
    p_y = z.p_y
    if E2 == 0 or abs(E2) <= abs(p_y):
        return None
    px = math.copysign(math.sqrt(E2 * E2 - p_y * p_y), z.p_x)
    return PhaseState(abs(E2), math.atan2(p_y, px), 1 if E2 > 0 else -1)


@dataclass(frozen=True)
class ScatteringReport:
    unitarity: float
    symmetry: float
    reciprocity: float
    tolerance: float
    points: int

    @property
    def passed(self) -> bool:
        return max(self.unitarity, self.symmetry, self.reciprocity) < self.tolerance

    def as_dict(self) -> dict:
        return {"unitarity": self.unitarity, "symmetry": self.symmetry,
                "reciprocity": self.reciprocity, "tolerance": self.tolerance,
                "points": self.points, "passed": self.passed}


def validate_scattering(table: ScatteringTable, E_grid: Sequence[float],
                        p_y_grid: Sequence[float], tolerance: Optional[float] = None) -> ScatteringReport:
    """Largest violations of unitarity, p_y symmetry and reciprocity over a grid."""
    if tolerance is None:
        tolerance = 1e-8 if table.kind == "transfer-matrix" else 1e-10
    E, P = np.meshgrid(np.asarray(E_grid, float), np.asarray(p_y_grid, float), indexing="ij")
    dv = table.delta_V
    keep = (np.abs(E) > APEX_GUARD) & (np.abs(E - dv) > APEX_GUARD) & (np.abs(E + dv) > APEX_GUARD)
    # grazing states: T ~ sqrt(distance to grazing) turns roundoff into 1e-8 noise
    keep &= (np.abs(np.abs(P) - np.abs(E)) > APEX_GUARD) & (np.abs(np.abs(P) - np.abs(E - dv)) > APEX_GUARD)
    for _, v in (table.profile.segments if table.profile else ()):
        keep &= (np.abs(E - v) > APEX_GUARD) & (np.abs(E - v + dv) > APEX_GUARD)
    E, P = E[keep], P[keep]
    unit = sym = rec = 0.0
    for side in (1, 2):
        prop = np.abs(P) < np.abs(E)
        T = table.transmission(side, E[prop], P[prop])
        R = table.reflection(side, E[prop], P[prop])
        if T.size:
            unit = max(unit, float(np.max(np.abs(T + R - 1.0))),
                       float(np.max(np.maximum.reduce([T - 1.0, -T, R - 1.0, -R])).clip(0.0)))
            Tm = table.transmission(side, E[prop], -P[prop])
            sym = max(sym, float(np.max(np.abs(T - Tm))))
    both = (np.abs(P) < np.abs(E)) & (np.abs(P) < np.abs(E - dv))
    if np.any(both):
        T1 = table.transmission(1, E[both], P[both])
        T2 = table.transmission(2, E[both] - dv, P[both])
        rec = float(np.max(np.abs(T1 - T2)))
    return ScatteringReport(unit, sym, rec, tolerance, int(E.size))
