"""Local A-site Green's function of the bare SSH bath and the in-gap emitter pole.

Inside the central gap |w| < 2J|d| the retarded local propagator is real,

    G(w) = -w / sqrt((4J^2 - w^2)(4J^2 d^2 - w^2)),

odd in w and strictly decreasing, diverging at both inner band edges.  The
dressed emitter propagator 1 / (w - delta - g^2 G(w)) therefore has exactly
one pole inside the gap for any detuning.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, InvalidParameterError, NoBoundStateError
from .lattice import dispersion

RICHARDSON_ETAS = (1e-3, 1e-4, 1e-5)
POLE_XTOL = 1e-12
EDGE_OFFSET = 1e-12


@dataclass(frozen=True)
class BoundStateInfo:
    omega_bs: float
    z_bs: float
    delta_edge: float

    def __post_init__(self):
        if not self.delta_edge > 0:
            raise DomainError(f"bound state must lie strictly inside the gap (delta_edge={self.delta_edge})")
        if not 0 < self.z_bs <= 1:
            raise DomainError(f"residue {self.z_bs} outside (0, 1]")

    @property
    def f_bs(self) -> float:
        """Bound-state QFI benchmark Z^2."""
        return self.z_bs**2


def _check_gap(omega, J, d):
    if d == 0:
        raise DomainError("the central gap is closed for d = 0")
    edge = 2 * J * abs(d)
    if np.any(np.abs(omega) >= edge):
        raise DomainError(f"omega must satisfy |omega| < {edge:g}")


def ga0(omega, J: float = 1.0, d: float = 0.3):
    """Closed-form local Green's function for real in-gap frequency."""
    _check_gap(omega, J, d)
    w2 = np.square(omega)
    return -np.asarray(omega) / np.sqrt((4 * J**2 - w2) * (4 * J**2 * d**2 - w2))


def ga0_derivative(omega, J: float = 1.0, d: float = 0.3):
    _check_gap(omega, J, d)
    w2 = np.square(omega)
    prod = (4 * J**2 - w2) * (4 * J**2 * d**2 - w2)
    return -(16 * J**4 * d**2 - w2**2) / prod**1.5


def ga0_quadrature(omega: float, J: float = 1.0, d: float = 0.3, eta: float = 1e-3, n_k: int = 20001) -> complex:
    """Trapezoidal k-integral of (z) / (z^2 - omega_plus(k)^2) with z = omega + i eta."""
    if not eta > 0:
        raise InvalidParameterError("broadening eta must be positive")
    if n_k < 1000:
        raise InvalidParameterError("quadrature grid needs at least 1000 points")
    k = np.linspace(-np.pi, np.pi, n_k)
    wp, _ = dispersion(k, J, d)
    z = omega + 1j * eta
    integrand = z / (z * z - wp * wp)
    return complex(np.trapezoid(integrand, k) / (2 * np.pi))


def ga0_extrapolated(omega: float, J: float = 1.0, d: float = 0.3, etas=RICHARDSON_ETAS, n_k: int = 20001) -> float:
    """Real part of the quadrature extrapolated to eta -> 0.

    Re G(w + i eta) is even in eta for in-gap w, so the samples are fitted by a
    polynomial in eta^2 and evaluated at zero.
    """
    etas = np.asarray(etas, dtype=float)
    vals = np.array([ga0_quadrature(omega, J, d, eta, n_k).real for eta in etas])
    coef = np.polynomial.polynomial.polyfit(etas**2, vals, deg=etas.size - 1)
    return float(coef[0])


def solve_pole(delta: float, g: float, J: float = 1.0, d: float = 0.3) -> float:
    """Unique in-gap root of w - delta - g^2 G(w) by bisection."""
    if d == 0:
        raise NoBoundStateError("no central gap for d = 0")
    if g < 0:
        raise InvalidParameterError("g must be nonnegative")
    edge = 2 * J * abs(d)
    if g == 0:
        if abs(delta) < edge:
            return float(delta)
        raise NoBoundStateError(f"decoupled level {delta:g} lies outside the gap")

    def lhs(w):
        return w - delta - g * g * float(ga0(w, J, d))

    eps = EDGE_OFFSET * edge
    lo, hi = -edge + eps, edge - eps
    f_lo, f_hi = lhs(lo), lhs(hi)
    # Root pushed closer to an edge than the bracket offset: clamp.
    if f_lo >= 0:
        return lo
    if f_hi <= 0:
        return hi
    while hi - lo > POLE_XTOL:
        mid = 0.5 * (lo + hi)
        f_mid = lhs(mid)
        if f_mid == 0:
            return mid
        if f_mid < 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def residue(omega_bs: float, g: float, J: float = 1.0, d: float = 0.3) -> float:
    """Emitter weight [1 - g^2 G'(w_bs)]^-1 of the in-gap pole."""
    return float(1.0 / (1.0 - g * g * ga0_derivative(omega_bs, J, d)))


def resonant_plateau(g: float, J: float = 1.0, d: float = 0.3):
    """Resonant residue Z and retained QFI Z^2 at zero detuning."""
    if d == 0:
        raise DomainError("no bound-state plateau for d = 0")
    z = 1.0 / (1.0 + g * g / (4 * J**2 * abs(d)))
    return z, z * z


def bound_state(delta: float, g: float, J: float = 1.0, d: float = 0.3) -> BoundStateInfo:
    w = solve_pole(delta, g, J, d)
    z = residue(w, g, J, d) if g > 0 else 1.0
    return BoundStateInfo(omega_bs=w, z_bs=z, delta_edge=2 * J * abs(d) - abs(w))


def bound_state_amplitude(info: BoundStateInfo, t):
    """Pole contribution Z exp(-i w_bs t) to the survival amplitude."""
    return info.z_bs * np.exp(-1j * info.omega_bs * np.asarray(t, dtype=float))
