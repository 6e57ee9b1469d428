"""Emitter survival amplitude from exact diagonalization or emitter-seeded Lanczos."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import DimensionGuardError, InvalidParameterError
from .lattice import HamiltonianMatrix

DENSE_DIM_LIMIT = 20000
BREAKDOWN_TOL = 1e-12
DEFAULT_DT = 0.05


@dataclass(frozen=True)
class SpectralData:
    """Eigen/Ritz energies with their emitter weights |<e|psi_a>|^2."""

    energies: np.ndarray
    weights: np.ndarray
    method: str = "exact"
    krylov_dim: int | None = None
    breakdown: bool = False

    def __post_init__(self):
        e = np.asarray(self.energies, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if e.shape != w.shape or e.ndim != 1:
            raise InvalidParameterError("energies and weights must be 1-D arrays of equal length")
        if not np.all(np.isfinite(e)):
            raise InvalidParameterError("energies must be finite")
        e.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "energies", e)
        object.__setattr__(self, "weights", w)

    def __len__(self):
        return self.energies.size

    @property
    def total_weight(self) -> float:
        return float(self.weights.sum())

    @property
    def label(self) -> str:
        return self.method if self.krylov_dim is None else f"{self.method}({self.krylov_dim})"


@dataclass(frozen=True)
class TimeGrid:
    t_start: float
    t_end: float
    n_steps: int

    def __post_init__(self):
        if self.t_start < 0:
            raise InvalidParameterError("t_start must be nonnegative")
        if not self.t_end > self.t_start:
            raise InvalidParameterError("t_end must exceed t_start")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidParameterError("n_steps must be a positive integer")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @classmethod
    def from_spacing(cls, t_end: float, dt: float = DEFAULT_DT, t_start: float = 0.0) -> TimeGrid:
        if dt <= 0:
            raise InvalidParameterError("dt must be positive")
        n = int(round((t_end - t_start) / dt))
        return cls(t_start, t_end, max(n, 1))

    @property
    def spacing(self) -> float:
        return (self.t_end - self.t_start) / self.n_steps

    @property
    def samples(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.n_steps + 1)

    def __len__(self):
        return self.n_steps + 1


@dataclass(frozen=True)
class AmplitudeTrace:
    grid: TimeGrid
    u: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def t(self) -> np.ndarray:
        return self.grid.samples

    @property
    def qfi(self) -> np.ndarray:
        return np.abs(self.u) ** 2


def eigendecompose(H: HamiltonianMatrix) -> SpectralData:
    """Full dense diagonalization; returns every eigenvalue with its emitter weight."""
    if H.dim > DENSE_DIM_LIMIT:
        raise DimensionGuardError(f"dim={H.dim} exceeds dense limit {DENSE_DIM_LIMIT}")
    energies, vecs = sla.eigh(H.toarray())
    weights = vecs[H.emitter_index] ** 2
    return SpectralData(energies, weights, method="exact")


def lanczos(H: HamiltonianMatrix, m: int, tol: float = BREAKDOWN_TOL):
    """Emitter-seeded Lanczos with full reorthogonalization.

    Returns ``(alpha, beta, breakdown)`` where ``alpha`` has length k <= m and
    ``beta`` the k - 1 off-diagonal couplings of the tridiagonal matrix.
    ``breakdown`` is True if a residual norm below ``tol`` ended the run early.
    """
    if not 1 <= m <= H.dim:
        raise InvalidParameterError(f"Krylov dimension m={m} outside [1, {H.dim}]")
    A = H.matrix
    V = np.zeros((m, H.dim))
    V[0, H.emitter_index] = 1.0
    alpha = np.zeros(m)
    beta = np.zeros(max(m - 1, 0))
    breakdown = False
    k = m
    for j in range(m):
        w = A @ V[j]
        alpha[j] = V[j] @ w
        if j == m - 1:
            break
        basis = V[: j + 1]
        # two Gram-Schmidt passes against the whole Krylov basis
        w -= basis.T @ (basis @ w)
        w -= basis.T @ (basis @ w)
        b = np.linalg.norm(w)
        if b < tol:
            breakdown = True
            k = j + 1
            break
        beta[j] = b
        V[j + 1] = w / b
    return alpha[:k], beta[: k - 1], breakdown


def lanczos_spectral(H: HamiltonianMatrix, m: int, tol: float = BREAKDOWN_TOL) -> SpectralData:
    """Ritz values and squared first components of the tridiagonal eigenvectors."""
    alpha, beta, breakdown = lanczos(H, m, tol)
    if alpha.size == 1:
        theta, S = alpha.copy(), np.ones((1, 1))
    else:
        theta, S = sla.eigh_tridiagonal(alpha, beta)
    return SpectralData(theta, S[0] ** 2, method="krylov", krylov_dim=m, breakdown=breakdown)


def survival_amplitude(spec: SpectralData, grid: TimeGrid, chunk: int = 512) -> AmplitudeTrace:
    """u(t) = sum_a w_a exp(-i E_a t) on every grid sample."""
    t = grid.samples
    u = np.empty(t.size, dtype=complex)
    for start in range(0, t.size, chunk):
        tt = t[start : start + chunk]
        u[start : start + chunk] = np.exp(-1j * np.outer(tt, spec.energies)) @ spec.weights
    return AmplitudeTrace(grid, u, meta={"method": spec.label, "breakdown": spec.breakdown})


def spectrum(H: HamiltonianMatrix, method: str = "exact", m: int | None = None) -> SpectralData:
    if method == "exact":
        return eigendecompose(H)
    if method == "krylov":
        if m is None:
            raise InvalidParameterError("krylov method needs a Krylov dimension m")
        return lanczos_spectral(H, min(m, H.dim))
    raise InvalidParameterError(f"unknown method {method!r}")


def write_trace_csv(trace: AmplitudeTrace, path) -> None:
    """CSV with header ``t,re_u,im_u,qfi``; floats in shortest round-trip form."""
    t = trace.t
    f = trace.qfi
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "re_u", "im_u", "qfi"])
        for n in range(t.size):
            writer.writerow(
                [repr(float(t[n])), repr(float(trace.u[n].real)), repr(float(trace.u[n].imag)), repr(float(f[n]))]
            )


def read_trace_csv(path) -> AmplitudeTrace:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    t = data[:, 0]
    grid = TimeGrid(float(t[0]), float(t[-1]), t.size - 1)
    return AmplitudeTrace(grid, data[:, 1] + 1j * data[:, 2])
