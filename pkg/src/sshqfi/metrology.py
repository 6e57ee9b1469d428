"""Phase-QFI of the emitter probe and late-time operational diagnostics."""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dynamics import AmplitudeTrace, SpectralData, TimeGrid
from .errors import DomainError, NoBoundStateError, RangeError
from .greens import BoundStateInfo
from .lattice import BandStructure

DEFAULT_WINDOW = (40.0, 100.0)
DEFAULT_RETENTION_ETA = 0.2
DEFAULT_WINDOW_ETA = 0.4
DEFAULT_T_CUT = 20.0
DEFAULT_HORIZON = 100.0
DEFAULT_EDGE_MARGIN = 1e-9
_COVER_TOL = 1e-9


@dataclass(frozen=True)
class QfiTrace:
    grid: TimeGrid
    f: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return self.grid.samples


def qfi_trace(trace: AmplitudeTrace) -> QfiTrace:
    return QfiTrace(trace.grid, np.abs(trace.u) ** 2)


@dataclass(frozen=True)
class ReducedState:
    """Emitter qubit after encoding phase phi, in Bloch form.

    Components follow r = (Re[u e^{i phi}], Im[u e^{i phi}], |u|^2 - 1), i.e.
    sigma_z = |e><e| - |g><g| in the ordered basis {|g>, |e>}.
    """

    u: complex
    phi: float
    bloch: tuple

    @property
    def density_matrix(self) -> np.ndarray:
        u, ph = self.u, np.exp(1j * self.phi)
        p = abs(u) ** 2
        return np.array(
            [[1 - p / 2, np.conj(u) * np.conj(ph) / 2], [u * ph / 2, p / 2]],
            dtype=complex,
        )

    @property
    def bloch_derivative(self) -> tuple:
        rx, ry, _ = self.bloch
        return (-ry, rx, 0.0)

    @property
    def qfi(self) -> float:
        """Bloch-derivative QFI |d r / d phi|^2."""
        dx, dy, dz = self.bloch_derivative
        return dx * dx + dy * dy + dz * dz

    @property
    def norm2(self) -> float:
        return sum(c * c for c in self.bloch)

    @property
    def optimal_angle(self) -> float:
        """Equatorial measurement axis angle arg(u) + phi."""
        return float(np.angle(self.u) + self.phi)


def reduced_state(u: complex, phi: float) -> ReducedState:
    if abs(u) > 1 + 1e-9:
        raise DomainError(f"|u| = {abs(u)} exceeds 1")
    v = complex(u) * np.exp(1j * phi)
    bloch = (float(v.real), float(v.imag), float(abs(u) ** 2 - 1))
    return ReducedState(complex(u), float(phi), bloch)


def _segment(f: QfiTrace, a: float, b: float):
    """Samples of F restricted to [a, b] with linearly interpolated endpoints."""
    t = f.t
    if a < t[0] - _COVER_TOL or b > t[-1] + _COVER_TOL or not b > a:
        raise RangeError(f"interval [{a:g}, {b:g}] not covered by grid [{t[0]:g}, {t[-1]:g}]")
    inner = (t > a) & (t < b)
    ts = np.concatenate(([a], t[inner], [b]))
    fs = np.concatenate(([np.interp(a, t, f.f)], f.f[inner], [np.interp(b, t, f.f)]))
    return ts, fs


def late_time_average(f: QfiTrace, t1: float = DEFAULT_WINDOW[0], t2: float = DEFAULT_WINDOW[1]) -> float:
    ts, fs = _segment(f, t1, t2)
    return float(np.trapezoid(fs, ts) / (t2 - t1))


def window_kernel(x, t1: float, t2: float):
    """Time average of cos(x t) over [t1, t2]."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) * max(abs(t1), abs(t2)) < 1e-8
    safe = np.where(small, 1.0, x)
    k = (np.sin(safe * t2) - np.sin(safe * t1)) / (safe * (t2 - t1))
    return np.where(small, 1.0, k)


def spectral_window_average(spec: SpectralData, t1: float = DEFAULT_WINDOW[0], t2: float = DEFAULT_WINDOW[1]) -> float:
    """Late-time average of |u|^2 evaluated from the spectrum, without time sampling.

    |u(t)|^2 = sum_ab w_a w_b cos((E_a - E_b) t), so the window average weights
    each pair by the kernel of the energy difference.
    """
    e, w = spec.energies, spec.weights
    keep = w > 0
    e, w = e[keep], w[keep]
    total = 0.0
    step = 1024
    for s in range(0, e.size, step):
        diff = e[s : s + step, None] - e[None, :]
        total += float(w[s : s + step] @ window_kernel(diff, t1, t2) @ w)
    return total


class Retention(NamedTuple):
    time: float
    capped: bool


def retention_time(f: QfiTrace, eta: float = DEFAULT_RETENTION_ETA, t_max: float = DEFAULT_HORIZON) -> Retention:
    """First time F drops below eta, linearly interpolated; capped at t_max otherwise."""
    if not 0 < eta < 1:
        raise DomainError("eta must lie in (0, 1)")
    t, F = f.t, f.f
    if t_max > t[-1] + _COVER_TOL:
        raise RangeError(f"t_max={t_max:g} beyond grid end {t[-1]:g}")
    upto = t <= t_max + _COVER_TOL
    t, F = t[upto], F[upto]
    below = np.flatnonzero(F < eta)
    if below.size == 0:
        return Retention(float(t_max), True)
    n = below[0]
    if n == 0:
        return Retention(float(t[0]), False)
    fa, fb = F[n - 1], F[n]
    tc = t[n - 1] + (fa - eta) / (fa - fb) * (t[n] - t[n - 1])
    return Retention(float(tc), False)


def useful_window(
    f: QfiTrace, eta: float = DEFAULT_WINDOW_ETA, t_cut: float = DEFAULT_T_CUT, T: float = DEFAULT_HORIZON
) -> float:
    """Measure of {t in [t_cut, T] : F(t) >= eta} on the piecewise-linear interpolant."""
    ts, fs = _segment(f, t_cut, T)
    a, b = fs[:-1], fs[1:]
    dt = np.diff(ts)
    above_a, above_b = a >= eta, b >= eta
    length = np.where(above_a & above_b, dt, 0.0)
    mixed = above_a != above_b
    with np.errstate(divide="ignore", invalid="ignore"):
        frac = (eta - a) / (b - a)
    # rising segment keeps the part after the crossing, falling the part before
    part = np.where(above_b, 1 - frac, frac) * dt
    length = np.where(mixed, part, length)
    return float(min(length.sum(), T - t_cut))


def numerical_bound_state(
    spec: SpectralData, bands: BandStructure, edge_margin: float = DEFAULT_EDGE_MARGIN
) -> tuple[BoundStateInfo, float]:
    """In-gap residue and energy from a finite-chain spectrum.

    Returns the bound-state summary and the total emitter weight sitting
    outside the outer band edges.
    """
    e, w = spec.energies, spec.weights
    gap = np.abs(e) < bands.inner_edge - edge_margin
    if not gap.any():
        raise NoBoundStateError("no eigenvalue inside the central gap")
    z = float(w[gap].sum())
    e_bs = float(e[gap][np.argmax(w[gap])])
    outer = float(w[np.abs(e) > bands.outer_edge + edge_margin].sum())
    info = BoundStateInfo(omega_bs=e_bs, z_bs=z, delta_edge=bands.inner_edge - abs(e_bs))
    return info, outer


@dataclass(frozen=True)
class DiagnosticsReport:
    f_bar: float
    t_eta: float
    t_eta_capped: bool
    w_eta: float
    eta: float = DEFAULT_RETENTION_ETA
    eta_window: float = DEFAULT_WINDOW_ETA
    t1: float = DEFAULT_WINDOW[0]
    t2: float = DEFAULT_WINDOW[1]
    t_cut: float = DEFAULT_T_CUT
    T: float = DEFAULT_HORIZON


def diagnose(
    f: QfiTrace,
    eta: float = DEFAULT_RETENTION_ETA,
    t1: float = DEFAULT_WINDOW[0],
    t2: float = DEFAULT_WINDOW[1],
    t_cut: float = DEFAULT_T_CUT,
    T: float = DEFAULT_HORIZON,
    eta_window: float = DEFAULT_WINDOW_ETA,
) -> DiagnosticsReport:
    ret = retention_time(f, eta, T)
    return DiagnosticsReport(
        f_bar=late_time_average(f, t1, t2),
        t_eta=ret.time,
        t_eta_capped=ret.capped,
        w_eta=useful_window(f, eta_window, t_cut, T),
        eta=eta,
        eta_window=eta_window,
        t1=t1,
        t2=t2,
        t_cut=t_cut,
        T=T,
    )


def same_ordering(a, b, tol: float = 1e-9) -> bool:
    """True when no pair of points is strictly ordered one way in ``a`` and the other in ``b``.

    Ties (within tol) are compatible with either order, so capped retention
    times do not count as reversals.
    """
    a, b = np.asarray(a, float), np.asarray(b, float)
    for i, j in itertools.combinations(range(a.size), 2):
        da, db = a[i] - a[j], b[i] - b[j]
        if (da > tol and db < -tol) or (da < -tol and db > tol):
            return False
    return True


def orderings_consistent(columns, tol: float = 1e-9) -> bool:
    columns = [np.asarray(c, float) for c in columns]
    return all(same_ordering(x, y, tol) for x, y in itertools.combinations(columns, 2))
