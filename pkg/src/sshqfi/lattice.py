"""Single-excitation Hamiltonian of an emitter locally coupled to an open SSH chain.

Basis ordering is fixed: the emitter level first, then the unit cells from
``n = -L`` to ``n = L`` with the A site before the B site::

    index 0           -> |e>
    index 1 + 2(n+L)  -> A_n
    index 2 + 2(n+L)  -> B_n

Energies are in units of J and times in units of 1/J.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameterError, RecurrenceWarning

EMITTER_INDEX = 0
_VMAX_GRID = 20001


@dataclass(frozen=True)
class ModelParams:
    """One simulation instance: hopping J, dimerization d, coupling g, detuning delta, half-length L."""

    d: float
    g: float
    delta: float = 0.0
    L: int = 500
    J: float = 1.0

    def __post_init__(self):
        for name in ("d", "g", "delta", "J"):
            if not math.isfinite(getattr(self, name)):
                raise InvalidParameterError(f"{name} must be finite")
        if self.J <= 0:
            raise InvalidParameterError(f"J must be positive, got {self.J}")
        if abs(self.d) > 1:
            raise InvalidParameterError(f"|d| must not exceed 1, got {self.d}")
        if self.g < 0:
            raise InvalidParameterError(f"g must be nonnegative, got {self.g}")
        if int(self.L) != self.L or self.L < 0:
            raise InvalidParameterError(f"L must be a nonnegative integer, got {self.L}")
        object.__setattr__(self, "L", int(self.L))

    @property
    def dim(self) -> int:
        return 4 * self.L + 3

    @property
    def n_cells(self) -> int:
        return 2 * self.L + 1

    @property
    def delta_norm(self) -> float:
        """Detuning measured in units of the inner band edge 2J|d| (nan when d = 0)."""
        edge = 2 * self.J * abs(self.d)
        return self.delta / edge if edge > 0 else math.nan

    def replace(self, **changes) -> ModelParams:
        fields = dict(d=self.d, g=self.g, delta=self.delta, L=self.L, J=self.J)
        fields.update(changes)
        return ModelParams(**fields)


@dataclass(frozen=True)
class HamiltonianMatrix:
    matrix: sp.csr_matrix
    params: ModelParams
    emitter_index: int = EMITTER_INDEX

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    def toarray(self) -> np.ndarray:
        return self.matrix.toarray()

    def n_bonds(self) -> int:
        """Number of stored off-diagonal couplings (upper triangle)."""
        upper = sp.triu(self.matrix, k=1)
        return int(np.count_nonzero(upper.data))


@dataclass(frozen=True)
class BandStructure:
    inner_edge: float
    outer_edge: float

    @property
    def gap_width(self) -> float:
        return 2 * self.inner_edge

    def in_gap(self, omega, margin: float = 0.0):
        return np.abs(omega) < self.inner_edge - margin


def site_index(cell: int, sublattice: str, L: int) -> int:
    if not -L <= cell <= L:
        raise InvalidParameterError(f"cell {cell} outside [-{L}, {L}]")
    offset = {"A": 1, "B": 2}[sublattice]
    return offset + 2 * (cell + L)


def build_hamiltonian(params: ModelParams) -> HamiltonianMatrix:
    """Assemble the real symmetric single-excitation Hamiltonian in CSR format."""
    L, J, d = params.L, params.J, params.d
    cells = np.arange(-L, L + 1)
    a_sites = 1 + 2 * (cells + L)
    b_sites = a_sites + 1

    rows = [np.array([EMITTER_INDEX]), a_sites, b_sites[:-1]]
    cols = [np.array([site_index(0, "A", L)]), b_sites, a_sites[1:]]
    vals = [
        np.array([params.g], dtype=float),
        np.full(a_sites.size, J * (1 + d)),
        np.full(a_sites.size - 1, J * (1 - d)),
    ]
    r = np.concatenate(rows)
    c = np.concatenate(cols)
    v = np.concatenate(vals)

    # Assemble upper triangle plus its transpose so that H == H.T holds bitwise.
    upper = sp.coo_matrix((v, (r, c)), shape=(params.dim, params.dim))
    diag = sp.coo_matrix(
        (np.array([params.delta], dtype=float), ([EMITTER_INDEX], [EMITTER_INDEX])),
        shape=(params.dim, params.dim),
    )
    H = (upper + upper.T + diag).tocsr()
    H.eliminate_zeros()
    H.sort_indices()
    return HamiltonianMatrix(H, params)


def dispersion(k, J: float = 1.0, d: float = 0.0):
    """Upper and lower SSH band energies ``(omega_plus, omega_minus)`` at wavenumber k."""
    k = np.asarray(k, dtype=float)
    wp = 2 * J * np.sqrt(np.cos(k / 2) ** 2 + d**2 * np.sin(k / 2) ** 2)
    return wp, -wp


def dispersion_bonds(k, J: float = 1.0, d: float = 0.0):
    """Same bands written with the intra/intercell hoppings J(1 +- d)."""
    k = np.asarray(k, dtype=float)
    j1, j2 = J * (1 + d), J * (1 - d)
    wp = np.sqrt(np.maximum(j1**2 + j2**2 + 2 * j1 * j2 * np.cos(k), 0.0))
    return wp, -wp


def band_edges(J: float = 1.0, d: float = 0.0) -> BandStructure:
    if J <= 0:
        raise InvalidParameterError(f"J must be positive, got {J}")
    return BandStructure(inner_edge=2 * J * abs(d), outer_edge=2 * J)


def max_group_velocity(J: float = 1.0, d: float = 0.0, n_k: int = _VMAX_GRID) -> float:
    """Largest |d omega_plus / dk| on a uniform k-grid over [-pi, pi], in cells per 1/J."""
    if n_k < 10_000:
        raise InvalidParameterError("group velocity grid needs at least 1e4 points")
    k = np.linspace(-np.pi, np.pi, n_k)
    # d/dk of 2J sqrt(cos^2 + d^2 sin^2) = -J (1 - d^2) sin k / (2 sqrt(...))
    root = np.sqrt(np.cos(k / 2) ** 2 + d**2 * np.sin(k / 2) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        slope = J * (1 - d**2) * np.sin(k) / (2 * root)
    # d = 0 leaves a removable 0/0 at k = +-pi where the slope tends to J.
    slope = np.where(root > 0, slope, J * (1 - d**2))
    return float(np.max(np.abs(slope)))


def recurrence_horizon(params: ModelParams) -> float:
    """Conservative time below which the open chain behaves like the infinite lattice."""
    if params.L < 1:
        raise InvalidParameterError("recurrence horizon needs L >= 1")
    return 0.9 * params.L / max_group_velocity(params.J, params.d)


def check_horizon(params: ModelParams, t_max: float, stacklevel: int = 2) -> bool:
    """Warn (RecurrenceWarning) and return False when t_max exceeds the horizon."""
    horizon = recurrence_horizon(params) if params.L >= 1 else 0.0
    if t_max > horizon:
        warnings.warn(
            f"t_max={t_max:g} exceeds recurrence horizon {horizon:.4g} for L={params.L}",
            RecurrenceWarning,
            stacklevel=stacklevel + 1,
        )
        return False
    return True


def write_matrix(H: HamiltonianMatrix, path) -> None:
    """Dump the upper triangle as ``i j value`` lines under a ``# dim=N`` header."""
    upper = sp.triu(H.matrix, k=0).tocoo()
    order = np.lexsort((upper.col, upper.row))
    lines = [f"# dim={H.dim}"]
    for n in order:
        lines.append(f"{upper.row[n]} {upper.col[n]} {float(upper.data[n]):.17g}")
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix(path) -> sp.csr_matrix:
    text = Path(path).read_text().splitlines()
    header = text[0].strip()
    if not header.startswith("# dim="):
        raise ValueError(f"missing dim header in {path}")
    dim = int(header.split("=", 1)[1])
    triples = np.loadtxt(text[1:], ndmin=2) if len(text) > 1 else np.empty((0, 3))
    i = triples[:, 0].astype(int)
    j = triples[:, 1].astype(int)
    v = triples[:, 2]
    upper = sp.coo_matrix((v, (i, j)), shape=(dim, dim))
    strict = sp.triu(upper, k=1)
    return (upper + strict.T).tocsr()
