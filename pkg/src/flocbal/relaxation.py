"""Relaxation of the size distribution toward a Gamma-shaped equilibrium."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .grid import DEFAULT_QUAD_ORDER, BinDensity, LambdaGrid, total_mass
from .quadrature import mapped_rule


@dataclass(frozen=True)
class RelaxParams:
    T_eq: float
    lambda_min: float
    sigma: float
    weight: Optional[Callable] = None

    def __post_init__(self):
        if not self.T_eq > 0.0:
            raise ValueError(f"T_eq must be > 0, got {self.T_eq}")
        if not self.sigma > 0.0:
            raise ValueError(f"sigma must be > 0, got {self.sigma}")


def d_eq(lam, lambda_min: float, sigma: float):
    """Equilibrium probability density ((lam - lambda_min) / sigma^2) exp(-(lam - lambda_min) / sigma).

    Zero below lambda_min; mode at lambda_min + sigma; unit integral.
    """
    x = (np.asarray(lam, dtype=float) - lambda_min) / sigma
    out = np.where(x > 0.0, x * np.exp(-np.maximum(x, 0.0)) / sigma, 0.0)
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=128)
def _projected_deq(grid: LambdaGrid, lambda_min: float, sigma: float, order: int) -> np.ndarray:
    # clip cells at lambda_min so the kink there is integrated exactly
    lo = np.maximum(grid.lo, lambda_min)
    x, w = mapped_rule(lo, np.maximum(grid.hi, lo), order)
    cell = np.sum(d_eq(x, lambda_min, sigma) * w, axis=1) / grid.widths
    total = float(np.dot(grid.widths, cell))
    if total <= 0.0:
        raise ValueError("equilibrium distribution has no mass on this grid")
    cell = cell / total
    cell.setflags(write=False)
    return cell


def projected_deq(grid: LambdaGrid, lambda_min: float, sigma: float,
                  order: int = DEFAULT_QUAD_ORDER) -> np.ndarray:
    """Cell averages of `d_eq`, rescaled so that sum(widths * D) == 1."""
    return _projected_deq(grid, float(lambda_min), float(sigma), int(order))


def _weight_averages(grid: LambdaGrid, f, order: int) -> np.ndarray:
    x, _ = grid.nodes(order)
    if np.any(np.asarray(f(x)) <= 0.0):
        raise ValueError("weight function must be positive on the whole grid")
    fbar = grid.cell_average(f, order)
    if np.any(fbar <= 0.0):
        raise ValueError("weight function must be positive on the whole grid")
    return fbar


def _relax_rhs(params: RelaxParams, grid: LambdaGrid, order: int):
    D = projected_deq(grid, params.lambda_min, params.sigma, order)
    widths = grid.widths
    rate = 1.0 / params.T_eq
    if params.weight is None:
        def rhs(values):
            return -rate * (values - np.dot(widths, values) * D)
    else:
        fbar = _weight_averages(grid, params.weight, order)
        fw = widths * fbar
        target = D / fbar

        def rhs(values):
            return -rate * (values - np.dot(fw, values) * target)
    return rhs


def g_relax(rho: BinDensity, params: RelaxParams, order: int = DEFAULT_QUAD_ORDER) -> np.ndarray:
    """Mass-conserving relaxation rate -(rho - M D_eq) / T_eq, per cell."""
    return _relax_rhs(RelaxParams(params.T_eq, params.lambda_min, params.sigma), rho.grid, order)(rho.values)


def g_relax_weighted(rho: BinDensity, params: RelaxParams,
                     order: int = DEFAULT_QUAD_ORDER) -> np.ndarray:
    """Relaxation toward (W / f) D_eq, where W = int rho f is left unchanged.

    f enters through its cell averages, which keeps W identical to
    `weighted_mass` on piecewise-constant densities.
    """
    if params.weight is None:
        raise ValueError("g_relax_weighted needs params.weight")
    return _relax_rhs(params, rho.grid, order)(rho.values)


def exact_relax(rho0: BinDensity, params: RelaxParams, t: float,
                order: int = DEFAULT_QUAD_ORDER) -> BinDensity:
    """Closed-form solution of the unweighted relaxation at time t."""
    if t < 0.0:
        raise ValueError("t must be >= 0")
    if t == 0.0:
        return rho0
    D = projected_deq(rho0.grid, params.lambda_min, params.sigma, order)
    eq = total_mass(rho0) * D
    return rho0.with_values(eq + (rho0.values - eq) * math.exp(-t / params.T_eq))


def integrate_relax(rho0: BinDensity, params: RelaxParams, t_end: float, dt: float,
                    scheme: str = "rk4", order: int = DEFAULT_QUAD_ORDER) -> BinDensity:
    """March d rho/dt = G with fixed steps; the last step is shortened to hit t_end.

    Uses the weighted operator when `params.weight` is set.
    """
    if not dt > 0.0:
        raise ValueError("dt must be > 0")
    if t_end < 0.0:
        raise ValueError("t_end must be >= 0")
    if scheme not in ("euler", "rk4"):
        raise ValueError(f"unknown scheme {scheme!r}")
    if scheme == "euler" and dt > 2.0 * params.T_eq:
        raise ValueError(f"explicit Euler is unstable for dt > 2 T_eq ({dt} > {2 * params.T_eq})")
    rhs = _relax_rhs(params, rho0.grid, order)
    y = np.array(rho0.values)
    n_full = int(math.floor(t_end / dt * (1.0 + 1e-12)))
    steps = [dt] * n_full
    rest = t_end - n_full * dt
    if rest > 1e-12 * dt:
        steps.append(rest)
    for h in steps:
        if scheme == "euler":
            y = y + h * rhs(y)
        else:
            k1 = rhs(y)
            k2 = rhs(y + 0.5 * h * k1)
            k3 = rhs(y + 0.5 * h * k2)
            k4 = rhs(y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if np.any(y < 0.0):
        neg = y.min()
        if neg < -1e-14 * max(np.abs(y).max(), 1e-300):
            raise ValueError(f"relaxation lost positivity (min {neg:.3e}); reduce dt")
        y = np.maximum(y, 0.0)
    return rho0.with_values(y)
