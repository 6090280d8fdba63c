"""Prescribed fluid field and the scalar closures derived from it."""
from __future__ import annotations

import csv
from dataclasses import astuple, dataclass, fields
from pathlib import Path

import numpy as np

C_MU_TILDE = 90.0
CSV_HEADER = ("z", "u", "v", "w", "S", "T", "k", "eps", "pH", "O")
_NONNEGATIVE = ("S", "k", "eps", "pH", "O")


@dataclass(frozen=True)
class FluidField:
    """Velocity (m/s), salinity (psu), temperature (degC), turbulence energy
    (m2/s2), dissipation (m2/s3), pH and organic matter (kg/m3) at one point."""

    u: float = 0.0
    v: float = 0.0
    w: float = 0.0
    S: float = 0.0
    T: float = 0.0
    k: float = 0.0
    eps: float = 0.0
    pH: float = 0.0
    O: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            val = float(getattr(self, f.name))
            if not np.isfinite(val):
                raise ValueError(f"fluid component {f.name} must be finite, got {val}")
            object.__setattr__(self, f.name, val)
        for name in _NONNEGATIVE:
            if getattr(self, name) < 0.0:
                raise ValueError(f"fluid component {name} must be >= 0, got {getattr(self, name)}")
        if self.T + 273.15 < 0.0:
            raise ValueError(f"temperature below absolute zero: {self.T} degC")

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)


@dataclass(frozen=True, eq=False)
class ColumnField:
    z_nodes: np.ndarray
    fields: tuple[FluidField, ...]

    def __post_init__(self):
        z = np.array(self.z_nodes, dtype=float)
        z.setflags(write=False)
        if z.ndim != 1 or z.size < 1:
            raise ValueError("a column needs at least one node")
        if np.any(np.diff(z) <= 0.0):
            raise ValueError("z_nodes must be strictly increasing from the bed upward")
        if z[0] < 0.0:
            raise ValueError("z_nodes must lie above the bed (z >= 0)")
        flds = tuple(self.fields)
        if len(flds) != z.size:
            raise ValueError(f"{z.size} nodes but {len(flds)} fluid records")
        object.__setattr__(self, "z_nodes", z)
        object.__setattr__(self, "fields", flds)

    def __len__(self):
        return len(self.fields)

    def component(self, name: str) -> np.ndarray:
        return np.array([getattr(f, name) for f in self.fields])

    @property
    def is_uniform(self) -> bool:
        return all(f == self.fields[0] for f in self.fields)


def uniform_field(values: FluidField, z_nodes) -> ColumnField:
    z = np.asarray(z_nodes, dtype=float)
    return ColumnField(z, (values,) * z.size)


def read_column_csv(path) -> ColumnField:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(h.strip() for h in next(reader))
        if header != CSV_HEADER:
            raise ValueError(f"{path}: expected header {','.join(CSV_HEADER)}, got {','.join(header)}")
        rows = [[float(x) for x in row] for row in reader if row]
    z = [r[0] for r in rows]
    return ColumnField(np.array(z), tuple(FluidField(*r[1:]) for r in rows))


def write_column_csv(path, column: ColumnField) -> None:
    with open(Path(path), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for z, f in zip(column.z_nodes, column.fields):
            writer.writerow([repr(float(z)), *(repr(x) for x in f.as_tuple())])


def eddy_viscosity(F: FluidField, c_mu_tilde: float = C_MU_TILDE) -> float:
    """Turbulent viscosity c_mu_tilde * k^2 / eps (m2/s)."""
    if F.eps <= 0.0:
        raise ValueError("eddy viscosity is singular for eps = 0")
    return c_mu_tilde * F.k ** 2 / F.eps


def sigma_eq(F: FluidField, sigma0: float, c_k: float = 0.0) -> float:
    """Equilibrium size spread, shrinking as turbulence grows: sigma0 / (1 + c_k k)."""
    if sigma0 <= 0.0:
        raise ValueError("sigma0 must be > 0")
    if c_k < 0.0:
        raise ValueError("c_k must be >= 0")
    return sigma0 / (1.0 + c_k * F.k)
