"""Vertical settling and turbulent diffusion of every size bin, split with the reaction step."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .discrete import CoeffTable, euler_advance
from .fluid import ColumnField, eddy_viscosity
from .grid import LambdaGrid

CFL_SAFETY = 0.9
MAX_SUBSTEPS = 10 ** 6


class TransportError(RuntimeError):
    """Stability sub-stepping would exceed MAX_SUBSTEPS."""


@dataclass(frozen=True)
class SettlingLaw:
    """w0 (lam / lam_ref)^exponent * max(0, 1 - r / r_gel)^hindrance_power."""

    w0: float
    exponent: float = 2.0
    r_gel: float = 1.0
    hindrance_power: float = 1.0
    lambda_ref: float = 1.0

    def __post_init__(self):
        if self.w0 < 0.0:
            raise ValueError("w0 must be >= 0")
        if self.r_gel <= 0.0:
            raise ValueError("r_gel must be > 0")
        if self.lambda_ref <= 0.0:
            raise ValueError("lambda_ref must be > 0")
        if self.exponent < 0.0 or self.hindrance_power < 0.0:
            raise ValueError("exponent and hindrance_power must be >= 0")


def settling_velocity(law: SettlingLaw, lam, r):
    """Downward fall speed (m/s) of size lam at suspended mass density r."""
    lam = np.asarray(lam, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise ValueError("suspended mass density must be >= 0")
    free = law.w0 * (lam / law.lambda_ref) ** law.exponent
    hind = np.maximum(0.0, 1.0 - r / law.r_gel) ** law.hindrance_power
    out = free * hind
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class ColumnState:
    """rho[c, i]: density of bin i in vertical cell c; deposited[i]: mass per area on the bed."""

    grid: LambdaGrid
    z_edges: np.ndarray
    rho: np.ndarray
    deposited: np.ndarray = None
    time: float = 0.0
    redirected: float = 0.0

    def __post_init__(self):
        z = np.array(self.z_edges, dtype=float)
        if z.ndim != 1 or z.size < 2 or np.any(np.diff(z) <= 0.0) or z[0] != 0.0:
            raise ValueError("z_edges must increase strictly from the bed at z = 0")
        rho = np.array(self.rho, dtype=float)
        if rho.shape != (z.size - 1, self.grid.n_cells):
            raise ValueError(f"rho must have shape {(z.size - 1, self.grid.n_cells)}, got {rho.shape}")
        if np.any(rho < 0.0) or not np.all(np.isfinite(rho)):
            raise ValueError("column densities must be finite and >= 0")
        dep = np.zeros(self.grid.n_cells) if self.deposited is None else np.array(self.deposited, dtype=float)
        if dep.shape != (self.grid.n_cells,) or np.any(dep < 0.0):
            raise ValueError("deposited must be a nonnegative per-bin vector")
        for name, arr in (("z_edges", z), ("rho", rho), ("deposited", dep)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_z(self) -> int:
        return self.z_edges.size - 1

    @property
    def dz(self) -> np.ndarray:
        return np.diff(self.z_edges)

    @property
    def z_centers(self) -> np.ndarray:
        return 0.5 * (self.z_edges[:-1] + self.z_edges[1:])

    def concentration(self) -> np.ndarray:
        """Suspended mass density r at each vertical cell."""
        return self.rho @ self.grid.widths

    def suspended(self) -> float:
        return float(np.dot(self.dz, self.concentration()))

    def budget(self) -> float:
        return self.suspended() + float(self.deposited.sum())


def uniform_column(grid: LambdaGrid, depth: float, n_z: int, values) -> ColumnState:
    z = np.linspace(0.0, depth, n_z + 1)
    return ColumnState(grid, z, np.tile(np.asarray(values, dtype=float), (n_z, 1)))


def _viscosity(fields: ColumnField, c_mu_tilde: float) -> np.ndarray:
    # a quiescent node (k = 0) does not diffuse, whatever eps is
    return np.array([0.0 if f.k == 0.0 else eddy_viscosity(f, c_mu_tilde) for f in fields.fields])


def transport_step(state: ColumnState, fields: ColumnField, law: SettlingLaw, dt: float,
                   nu_multiplier=None, c_mu_tilde: float = 90.0) -> ColumnState:
    """Explicit finite-volume settling (upwind) and diffusion (central) of each bin.

    Surface: no flux. Bed: diffusion closed, settling outflow absorbed into `deposited`.
    """
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    if len(fields) != state.n_z:
        raise ValueError(f"{len(fields)} fluid nodes for {state.n_z} vertical cells")
    I = state.grid.n_cells
    mult = np.ones(I) if nu_multiplier is None else np.broadcast_to(np.asarray(nu_multiplier, float), (I,))
    dz = state.dz
    gap = np.diff(state.z_centers)                              # centre spacing at interior faces
    w = fields.component("w")
    nu = _viscosity(fields, c_mu_tilde)[:, None] * mult[None, :]   # (z, i)
    nu_face = 0.5 * (nu[:-1] + nu[1:])
    lam = state.grid.midpoints

    # fall speed only decreases with r, so the free fall speed bounds every substep
    v_bound = np.abs(w)[:, None] + settling_velocity(law, lam, np.zeros(1))[None, :]
    diff_bound = np.zeros_like(nu)
    if state.n_z > 1:
        diff_bound[:-1] += nu_face / gap[:, None]
        diff_bound[1:] += nu_face / gap[:, None]
    rate = np.max((v_bound + diff_bound) / dz[:, None]) if v_bound.size else 0.0
    n_sub = max(1, math.ceil(dt * rate / CFL_SAFETY)) if rate > 0.0 else 1
    if n_sub > MAX_SUBSTEPS:
        raise TransportError(f"transport needs {n_sub} substeps (limit {MAX_SUBSTEPS})")
    h = dt / n_sub

    rho = state.rho.copy()
    deposited = state.deposited.copy()
    widths = state.grid.widths
    for _ in range(n_sub):
        r = rho @ widths
        vel = w[:, None] - settling_velocity(law, lam[None, :], r[:, None])   # upward positive
        flux = np.zeros((state.n_z + 1, I))                                  # upward flux at faces
        if state.n_z > 1:
            vf = 0.5 * (vel[:-1] + vel[1:])
            flux[1:-1] = np.where(vf > 0.0, vf * rho[:-1], vf * rho[1:])
            flux[1:-1] -= nu_face * (rho[1:] - rho[:-1]) / gap[:, None]
        flux[0] = np.minimum(vel[0], 0.0) * rho[0]
        rho = rho - h * (flux[1:] - flux[:-1]) / dz[:, None]
        if np.any(rho < 0.0):
            rho = np.where(rho < 0.0, np.where(rho > -1e-14 * rho.max(), 0.0, rho), rho)
            if np.any(rho < 0.0):
                raise TransportError("transport produced negative densities")
        deposited = deposited - h * flux[0] * widths
    return replace(state, rho=rho, deposited=deposited, time=state.time + dt)


def split_step(state: ColumnState, tables, fields: ColumnField, law: SettlingLaw, dt: float,
               nu_multiplier=None) -> ColumnState:
    """Transport over dt, then one reaction step at every vertical cell."""
    moved = transport_step(state, fields, law, dt, nu_multiplier)
    if isinstance(tables, CoeffTable):
        tables = [tables] * state.n_z
    if len(tables) != state.n_z:
        raise ValueError(f"{len(tables)} tables for {state.n_z} vertical cells")
    rho = moved.rho.copy()
    redirected = 0.0
    for c, tab in enumerate(tables):
        if tab.grid != state.grid:
            raise ValueError("coefficient table grid differs from the column grid")
        rho[c], _, leak = euler_advance(tab, rho[c], dt)
        redirected += leak * state.dz[c]
    return replace(moved, rho=rho, redirected=state.redirected + redirected)
