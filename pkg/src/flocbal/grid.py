"""Partition of the size axis and piecewise-constant densities on it."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .quadrature import mapped_rule

DEFAULT_QUAD_ORDER = 4
SPACINGS = ("uniform", "geometric", "explicit")


class ProjectionWarning(UserWarning):
    pass


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class LambdaGrid:
    """Cells [edges[i], edges[i+1]) covering [lambda_min, lambda_max].

    The last cell is closed on the right so that lambda_max has a bin.
    """

    edges: np.ndarray
    spacing: str = "explicit"

    def __post_init__(self):
        edges = _frozen(self.edges)
        if edges.ndim != 1 or edges.size < 2:
            raise ValueError("a grid needs at least two edges")
        if not np.all(np.isfinite(edges)):
            raise ValueError("grid edges must be finite")
        if edges[0] <= 0.0:
            raise ValueError(f"lambda_min must be > 0, got {edges[0]}")
        if np.any(np.diff(edges) <= 0.0):
            raise ValueError("grid edges must be strictly increasing")
        if self.spacing not in SPACINGS:
            raise ValueError(f"unknown spacing {self.spacing!r}")
        object.__setattr__(self, "edges", edges)

    @property
    def n_cells(self) -> int:
        return self.edges.size - 1

    @property
    def lambda_min(self) -> float:
        return float(self.edges[0])

    @property
    def lambda_max(self) -> float:
        return float(self.edges[-1])

    @property
    def lo(self) -> np.ndarray:
        return self.edges[:-1]

    @property
    def hi(self) -> np.ndarray:
        return self.edges[1:]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def bin_index(self, lam):
        """Index of the cell holding each size; -1 outside [lambda_min, lambda_max]."""
        lam = np.asarray(lam, dtype=float)
        idx = np.searchsorted(self.edges, lam, side="right") - 1
        idx = np.where(lam == self.edges[-1], self.n_cells - 1, idx)
        idx = np.where((lam < self.edges[0]) | (lam > self.edges[-1]), -1, idx)
        return idx if idx.ndim else int(idx)

    def nodes(self, order: int = DEFAULT_QUAD_ORDER):
        """Per-cell Gauss-Legendre nodes and weights, shape (I, order)."""
        return mapped_rule(self.lo, self.hi, order)

    def cell_average(self, fn, order: int = DEFAULT_QUAD_ORDER) -> np.ndarray:
        x, w = self.nodes(order)
        # dividing by the weight sum keeps the average of a constant exact
        return np.sum(fn(x) * w, axis=1) / np.sum(w, axis=1)

    def __eq__(self, other):
        if not isinstance(other, LambdaGrid):
            return NotImplemented
        return np.array_equal(self.edges, other.edges)

    def __hash__(self):
        return hash(self.edges.tobytes())


def make_grid(lambda_min: float, lambda_max: float, n_cells: int,
              spacing: str = "geometric") -> LambdaGrid:
    if not lambda_min > 0.0:
        raise ValueError(f"lambda_min must be > 0, got {lambda_min}")
    if not lambda_max > lambda_min:
        raise ValueError(f"lambda_max ({lambda_max}) must exceed lambda_min ({lambda_min})")
    if int(n_cells) != n_cells or n_cells < 1:
        raise ValueError(f"number of cells must be a positive integer, got {n_cells}")
    n_cells = int(n_cells)
    if spacing == "uniform":
        edges = np.linspace(lambda_min, lambda_max, n_cells + 1)
    elif spacing == "geometric":
        ratio = (lambda_max / lambda_min) ** (1.0 / n_cells)
        edges = lambda_min * ratio ** np.arange(n_cells + 1)
    else:
        raise ValueError(f"spacing must be 'uniform' or 'geometric', got {spacing!r}")
    edges[0], edges[-1] = lambda_min, lambda_max
    return LambdaGrid(edges, spacing)


@dataclass(frozen=True, eq=False)
class BinDensity:
    """Mass density rho (mass / volume / length) constant on every cell."""

    grid: LambdaGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = _frozen(self.values)
        if values.shape != (self.grid.n_cells,):
            raise ValueError(
                f"expected {self.grid.n_cells} bin values, got shape {values.shape}")
        if np.any(values < 0.0) or not np.all(np.isfinite(values)):
            raise ValueError("bin densities must be finite and nonnegative")
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: LambdaGrid) -> "BinDensity":
        return cls(grid, np.zeros(grid.n_cells))

    def __call__(self, lam):
        idx = self.grid.bin_index(lam)
        return np.where(np.asarray(idx) >= 0, self.values[np.maximum(idx, 0)], 0.0)

    def with_values(self, values) -> "BinDensity":
        return BinDensity(self.grid, values)


def project(rho_fn, grid: LambdaGrid, quad_order: int = DEFAULT_QUAD_ORDER) -> BinDensity:
    """Cell averages of `rho_fn`; negative averages are clipped with a warning."""
    avg = grid.cell_average(rho_fn, quad_order)
    bad = avg < 0.0
    if np.any(bad):
        warnings.warn(f"{int(bad.sum())} cell averages were negative and clipped to 0",
                      ProjectionWarning, stacklevel=2)
        avg = np.where(bad, 0.0, avg)
    return BinDensity(grid, avg)


def total_mass(rho: BinDensity) -> float:
    return float(np.dot(rho.grid.widths, rho.values))


def inverse_mass_integrals(grid: LambdaGrid, d: float, N_d: float) -> np.ndarray:
    """Exact per-cell integrals of 1/m(lambda) for the power law m = N_d lambda^d."""
    lo, hi = grid.lo, grid.hi
    if d == 1.0:
        return np.log(hi / lo) / N_d
    return (lo ** (1.0 - d) - hi ** (1.0 - d)) / ((d - 1.0) * N_d)


def number_total(rho: BinDensity, kernels) -> float:
    """Particle number density: the integral of rho / m over the axis."""
    return float(np.dot(rho.values, inverse_mass_integrals(rho.grid, kernels.d, kernels.N_d)))


def weighted_mass(rho: BinDensity, f, quad_order: int = DEFAULT_QUAD_ORDER) -> float:
    fbar = rho.grid.cell_average(f, quad_order)
    return float(np.dot(rho.grid.widths * fbar, rho.values))
