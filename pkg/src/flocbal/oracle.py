"""Independent references for the sectional scheme: a dense ODE solve and a particle simulation."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .discrete import CoeffTable, gbar_terms
from .fluid import FluidField
from .grid import BinDensity, inverse_mass_integrals, number_total
from .kernels import KernelSet


class OracleError(RuntimeError):
    pass


def dense_ode_oracle(tab: CoeffTable, rho0: BinDensity, t_end: float, tol: float = 1e-10) -> BinDensity:
    """Integrate d rho/dt = Gbar(rho) with adaptive Dormand-Prince 4(5) at rtol = atol = tol * scale."""
    if rho0.grid != tab.grid:
        raise ValueError("density and table grids differ")
    if t_end < 0.0:
        raise ValueError("t_end must be >= 0")
    y0 = np.array(rho0.values, dtype=float)
    if t_end == 0.0:
        return rho0
    scale = max(float(np.max(np.abs(y0))), np.finfo(float).tiny)
    sol = solve_ivp(lambda t, y: gbar_terms(tab, y).total, (0.0, t_end), y0, method="RK45",
                    rtol=tol, atol=tol * scale)
    if sol.status != 0:
        raise OracleError(f"ODE oracle failed: {sol.message}")
    y = sol.y[:, -1]
    # solver roundoff may dip a few ulps below zero in empty bins
    floor = -10.0 * tol * scale
    if np.any(y < floor):
        raise OracleError(f"ODE oracle went negative (min {y.min():.3e})")
    return rho0.with_values(np.maximum(y, 0.0))


@dataclass
class MCResult:
    density: BinDensity
    n_initial: int
    n_final: int
    v_eff: float
    events_aggregation: int
    events_fragmentation: int
    rejected: int

    @property
    def number_density(self) -> float:
        return self.n_final / self.v_eff

    def lines(self) -> list[str]:
        return [f"particles: {self.n_initial} -> {self.n_final}",
                f"V_eff = N0 / integral(rho0/m) = {self.v_eff:.6e}",
                f"events: {self.events_aggregation} aggregation, {self.events_fragmentation} fragmentation,"
                f" {self.rejected} rejected proposals"]


def sample_sizes(rho: BinDensity, ks: KernelSet, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n sizes from the number density rho/m of a piecewise-constant rho."""
    grid = rho.grid
    weights = rho.values * inverse_mass_integrals(grid, ks.d, ks.N_d)
    total = weights.sum()
    if total <= 0.0:
        raise ValueError("cannot sample particles from an empty density")
    cell = rng.choice(grid.n_cells, size=n, p=weights / total)
    lo, hi = grid.lo[cell], grid.hi[cell]
    u = rng.random(n)
    if ks.d == 1.0:
        return lo * (hi / lo) ** u
    e = 1.0 - ks.d
    return (lo ** e + u * (hi ** e - lo ** e)) ** (1.0 / e)


def particle_mc_run(ks: KernelSet, F: FluidField, N: int, rho0: BinDensity, t_end: float,
                    seed: int = 0, max_events: int = 10 ** 8) -> MCResult:
    """Marcus-Lushnikov stochastic simulation of aggregation and fragmentation.

    Each simulated particle is one particle of a control volume V_eff = N / integral(rho0/m),
    so a pair (p, q) merges at rate B_a / V_eff and a particle breaks at rate B_f. Events are
    proposed from constant majorants and thinned. Aggregation majorants assume B_a
    nondecreasing in both sizes, which holds for every built-in family; a violated majorant
    raises.
    """
    if N < 2:
        raise ValueError("need at least two particles")
    if not hasattr(ks.daughter, "sample"):
        raise OracleError("daughter distribution has no sampler")
    rng = np.random.default_rng(seed)
    n0 = number_total(rho0, ks)
    v_eff = N / n0
    cap = 2 * N + 16
    lam = np.empty(cap)
    lam[:N] = sample_sizes(rho0, ks, N, rng)
    n = N
    has_agg, has_frag = ks.has_aggregation, ks.has_fragmentation
    biggest = float(lam[:n].max())
    a_max = float(ks.B_a(F, biggest, biggest)) if has_agg else 0.0
    f_max = float(np.max(ks.B_f(F, lam[:n]))) if has_frag else 0.0
    t = 0.0
    n_agg = n_frag = rejected = 0
    while n_agg + n_frag + rejected < max_events:
        rate_a = a_max * n * (n - 1) / (2.0 * v_eff) if n > 1 else 0.0
        rate_f = f_max * n
        total = rate_a + rate_f
        if total <= 0.0:
            break
        if not np.isfinite(total):
            raise OracleError("event rate overflow")
        t += rng.exponential(1.0 / total)
        if t > t_end:
            break
        if rng.random() * total < rate_a:
            p = int(rng.integers(n))
            q = int(rng.integers(n - 1))
            q += q >= p
            b = float(ks.B_a(F, lam[p], lam[q]))
            if b > a_max * (1.0 + 1e-12):
                raise OracleError("aggregation majorant violated; kernel not monotone")
            if rng.random() * a_max >= b:
                rejected += 1
                continue
            new = float(ks.agg_size(lam[p], lam[q]))
            lam[min(p, q)] = new
            lam[max(p, q)] = lam[n - 1]
            n -= 1
            n_agg += 1
            if new > biggest:
                biggest = new
                a_max = float(ks.B_a(F, biggest, biggest))
                if has_frag:
                    f_max = max(f_max, float(ks.B_f(F, new)))
        else:
            p = int(rng.integers(n))
            b = float(ks.B_f(F, lam[p]))
            if rng.random() * f_max >= b:
                rejected += 1
                continue
            small = float(ks.daughter.sample(lam[p], rng.random(), ks))
            large = float(ks.frag_complement(lam[p], small))
            if n >= cap:
                lam = np.concatenate([lam, np.empty(cap)])
                cap *= 2
            lam[p] = large
            lam[n] = small
            n += 1
            n_frag += 1
    else:
        raise OracleError(f"event budget {max_events} exhausted before t_end")
    return MCResult(histogram(lam[:n], ks, rho0.grid, v_eff, like=rho0), N, n, v_eff,
                    n_agg, n_frag, rejected)


def histogram(sizes, ks: KernelSet, grid, v_eff: float, like: BinDensity | None = None) -> BinDensity:
    """Bin mass density of a particle ensemble; sizes past lambda_max count in the top bin."""
    sizes = np.asarray(sizes, dtype=float)
    idx = grid.bin_index(np.minimum(sizes, grid.lambda_max))
    if np.any(idx < 0):
        raise ValueError("particle below lambda_min")
    mass = np.bincount(idx, weights=ks.mass_of(sizes), minlength=grid.n_cells)
    values = mass / (v_eff * grid.widths)
    return like.with_values(values) if like is not None else BinDensity(grid, values)


def particle_mc_oracle(ks: KernelSet, F: FluidField, N: int, rho0: BinDensity, t_end: float,
                       seed: int = 0) -> BinDensity:
    return particle_mc_run(ks, F, N, rho0, t_end, seed).density
