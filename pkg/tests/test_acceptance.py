"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with `pytest tests/test_acceptance.py -v`; the lines are repeated in
the terminal summary.
"""
import filecmp
import time
from pathlib import Path

import numpy as np
import pytest

from flocbal.aggfrag import ContinuousDensity, mass_balance
from flocbal.bioagg import BioParams, aggregate_length, f_bio, mass_bio, weight_function
from flocbal.cli import run
from flocbal.column import SettlingLaw, split_step, transport_step, uniform_column
from flocbal.discrete import check_conservation, euler_step, precompute
from flocbal.fluid import FluidField, uniform_field
from flocbal.grid import BinDensity, make_grid, number_total, project, total_mass, weighted_mass
from flocbal.kernels import AGGREGATION_FAMILIES, DAUGHTER_FAMILIES, FRAGMENTATION_FAMILIES, make_kernels, validate
from flocbal.oracle import dense_ode_oracle, particle_mc_run
from flocbal.quadrature import QuadSpec, adaptive_gl
from flocbal.relaxation import RelaxParams, d_eq, exact_relax, integrate_relax

from conftest import ACCEPTANCE_LINES

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def verdict(n, ok, detail):
    line = f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    assert ok, line


def test_criterion_01_relaxation_closed_form():
    g = make_grid(5.0, 45.0, 128, "uniform")
    p = RelaxParams(T_eq=600.0, lambda_min=5.0, sigma=3.0)
    rho0 = project(lambda x: np.exp(-0.5 * ((x - 25.0) / 3.0) ** 2), g)
    t0 = time.perf_counter()
    num = integrate_relax(rho0, p, 5 * p.T_eq, p.T_eq / 100, "rk4")
    elapsed = time.perf_counter() - t0
    ref = exact_relax(rho0, p, 5 * p.T_eq)
    err = np.max(np.abs(num.values - ref.values)) / np.max(np.abs(ref.values))
    drift = abs(total_mass(num) / total_mass(rho0) - 1.0)
    verdict(1, err <= 1e-8 and drift <= 1e-12 and elapsed < 1.0,
            f"max rel err {err:.2e} (<=1e-8), mass drift {drift:.2e} (<=1e-12), {elapsed:.3f}s (<1s)")


def test_criterion_02_weighted_invariant():
    g = make_grid(5.0, 45.0, 128, "uniform")
    f = weight_function(BioParams(5.0, 1.0, 1.0, 0.4))
    p = RelaxParams(T_eq=600.0, lambda_min=5.0, sigma=3.0, weight=f)
    rho0 = project(lambda x: np.exp(-0.5 * ((x - 25.0) / 3.0) ** 2), g)
    w0 = weighted_mass(rho0, f)
    rho = rho0
    worst = 0.0
    for _ in range(5):
        rho = integrate_relax(rho, p, p.T_eq, p.T_eq / 100, "rk4")
        worst = max(worst, abs(weighted_mass(rho, f) / w0 - 1.0))
    verdict(2, worst <= 1e-10, f"weighted mass drift {worst:.2e} over 5 T_eq (<=1e-10)")


def test_criterion_03_biological_additivity():
    rng = np.random.default_rng(3)
    worst1 = 0.0
    for _ in range(1000):
        lmin = rng.uniform(0.5, 10.0)
        p = BioParams(lmin, rng.uniform(0.0, 5.0), rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0), 1.0)
        a, b = lmin + rng.exponential(10.0, size=2)
        c = aggregate_length(p, a, b)
        lhs = f_bio(p, c) * mass_bio(p, c)
        rhs = f_bio(p, a) * mass_bio(p, a) + f_bio(p, b) * mass_bio(p, b)
        worst1 = max(worst1, abs(lhs - rhs) / abs(rhs))
    worst_d = 0.0
    for d in (2.0, 3.0):
        for _ in range(200):
            lmin = rng.uniform(0.5, 10.0)
            p = BioParams(lmin, rng.uniform(0.0, 5.0), rng.uniform(0.1, 3.0), rng.uniform(0.0, 3.0), d)
            a, b = lmin + rng.exponential(10.0, size=2)
            c = aggregate_length(p, a, b)
            lhs = f_bio(p, c) * mass_bio(p, c)
            rhs = f_bio(p, a) * mass_bio(p, a) + f_bio(p, b) * mass_bio(p, b)
            worst_d = max(worst_d, abs(lhs - rhs) / abs(rhs))
    verdict(3, worst1 <= 1e-14 and worst_d <= 1e-10,
            f"d=1 worst {worst1:.2e} (<=1e-14) on 1000 draws; d in {{2,3}} worst {worst_d:.2e} (<=1e-10)")


def test_criterion_04_equilibrium_profile():
    ok = True
    parts = []
    for lmin, sigma in ((5.0, 1.0), (5.0, 3.0)):
        total = adaptive_gl(lambda x: d_eq(x, lmin, sigma), lmin, lmin + 40 * sigma, tol=1e-13)
        g = make_grid(lmin, lmin + 40 * sigma, 400, "uniform")
        x, _ = g.nodes(4)
        x = np.sort(x.ravel())
        k = int(np.argmax(d_eq(x, lmin, sigma)))
        gap = max(x[min(k + 1, x.size - 1)] - x[k], x[k] - x[max(k - 1, 0)])
        mode_ok = abs(x[k] - (lmin + sigma)) <= gap
        norm_ok = abs(total - 1.0) <= 1e-10
        ok &= mode_ok and norm_ok
        parts.append(f"({lmin:g},{sigma:g}): |int-1|={abs(total - 1):.1e}, mode node {x[k]:.4f} vs {lmin + sigma:g}")
    verdict(4, ok, "; ".join(parts))


def test_criterion_05_kernel_structure():
    F = FluidField(T=10.0, k=0.01, eps=1e-2)
    failures = []
    worst_n = worst_t = 0.0
    count = 0
    for d in (1.0, 2.0, 3.0):
        g = make_grid(1.0, 20.0, 24)
        for a in AGGREGATION_FAMILIES:
            for f in FRAGMENTATION_FAMILIES:
                for e in DAUGHTER_FAMILIES:
                    ks = make_kernels(1.0, d, 1.0, aggregation=a, fragmentation=f, daughter=e)
                    rep = validate(ks, F, g, norm_tol=1e-10, tilde_tol=1e-8)
                    count += 1
                    worst_n = max(worst_n, rep.max_normalization_error)
                    worst_t = max(worst_t, rep.max_tilde_normalization_error)
                    if not rep.ok:
                        failures.append(f"{a}/{f}/{e}/d={d:g}")
    verdict(5, not failures,
            f"{count} family combinations, failures {failures or 'none'}, "
            f"max B_e norm err {worst_n:.1e} (<=1e-10), max tilde err {worst_t:.1e} (<=1e-8)")


@pytest.mark.parametrize("d", [1.0, 3.0])
def test_criterion_06_continuous_conservation(d):
    F = FluidField(T=10.0, k=0.01, eps=1e-2)
    lmin, lmax = 1.0, 8.0
    top = lmax / 2 ** (1 / d)
    rho = ContinuousDensity(lambda x: (x - lmin) ** 2 * (top - x) ** 2 * (x <= top), lmin, lmax, (top,))
    quad = QuadSpec(tol=1e-8)
    worst = 0.0
    cases = (("none", "constant"), ("constant", "none"), ("sum", "power"))
    for agg, frag in cases:
        ks = make_kernels(lmin, d, 1.0, aggregation=agg, fragmentation=frag,
                          daughter="uniform" if d == 1.0 else "uniform_volume")
        worst = max(worst, abs(mass_balance(ks, F, rho, quad)))
    verdict(6, worst <= 10 * quad.tol,
            f"d={d:g}: worst |int G| {worst:.2e} over frag-only/agg-only/mixed (<= {10 * quad.tol:.0e})")


def test_criterion_07_discrete_conservation():
    F = FluidField(T=10.0, k=0.01, eps=1e-2)
    g = make_grid(1.0, 16.0, 64)
    ks = make_kernels(1.0, 2.3, 1.0, aggregation="sum", fragmentation="power",
                      fragmentation_params={"k_f": 1.0, "p": 0.7})
    t0 = time.perf_counter()
    corrected = check_conservation(precompute(ks, F, g, 4, "corrected"), 100, 11).max_relative_residual
    elapsed = time.perf_counter() - t0
    raw = [check_conservation(precompute(ks, F, g, q, "raw"), 100, 11).max_relative_residual for q in (1, 2, 4)]
    ok = corrected <= 1e-12 and raw[0] > raw[1] > raw[2] and elapsed < 5.0
    verdict(7, ok, f"corrected {corrected:.1e} (<=1e-12) in {elapsed:.2f}s (<5s); raw by order 1/2/4: "
                   + ", ".join(f"{r:.1e}" for r in raw))


def test_criterion_08_constant_kernel_number_decay():
    F = FluidField()
    g = make_grid(1.0, 1000.0, 128, "geometric")
    beta0 = 1.0
    ks = make_kernels(1.0, 1.0, 1.0, aggregation="constant", aggregation_params={"beta0": beta0})
    tab = precompute(ks, F, g, 4, "corrected")
    rho = project(lambda x: np.exp(-(x - 1.0)), g)
    n0, m0 = number_total(rho, ks), total_mass(rho)
    dt = 0.01 / (beta0 * n0)
    t, worst = 0.0, 0.0
    while True:
        rho = euler_step(tab, rho, dt)
        t += dt
        n = number_total(rho, ks)
        worst = max(worst, abs(n / (n0 / (1 + beta0 * n0 * t / 2)) - 1.0))
        if n / n0 <= 0.5:
            break
    drift = abs(total_mass(rho) / m0 - 1.0)
    verdict(8, worst <= 0.01 and drift <= 1e-10,
            f"max |N/N_exact - 1| {worst:.2e} (<=1e-2) down to N/N0=0.5, mass drift {drift:.1e} (<=1e-10)")


def test_criterion_09_oracle_equivalence():
    rng = np.random.default_rng(9)
    F = FluidField(T=10.0, k=1e-3, eps=1e-4)
    g = make_grid(1.0, 6.0, 8)
    ks = make_kernels(1.0, 2.0, 1.0, aggregation="sum",
                      aggregation_params={"beta0": float(rng.uniform(0.05, 0.2))},
                      fragmentation="power",
                      fragmentation_params={"k_f": float(rng.uniform(0.5, 1.5)), "p": float(rng.uniform(0.5, 2.0))})
    tab = precompute(ks, F, g, 4, "corrected")
    rho0 = BinDensity(g, rng.random(8))
    t_end = 2.0
    ref = dense_ode_oracle(tab, rho0, t_end, 1e-12).values
    errs = []
    for n in (800, 1600, 3200):
        rho = rho0
        for _ in range(n):
            rho = euler_step(tab, rho, t_end / n)
        errs.append(np.max(np.abs(rho.values - ref)) / np.max(np.abs(ref)))
    orders = [np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])]
    verdict(9, min(orders) >= 0.9 and errs[-1] <= 1e-4,
            f"errors {', '.join(f'{e:.2e}' for e in errs)}, observed orders "
            f"{orders[0]:.3f}, {orders[1]:.3f} (>=0.9), finest {errs[-1]:.1e} (<=1e-4)")


def test_criterion_10_particle_cross_check():
    F = FluidField()
    g = make_grid(1.0, 64.0, 128)
    ks = make_kernels(1.0, 1.0, 1.0, aggregation="constant", aggregation_params={"beta0": 1.0})
    rho0 = project(lambda x: np.exp(-(x - 1.0)), g)
    t_end = 2.0 / number_total(rho0, ks)
    t0 = time.perf_counter()
    mc = particle_mc_run(ks, F, 100_000, rho0, t_end, seed=2024).density
    elapsed = time.perf_counter() - t0
    tab = precompute(ks, F, g, 4, "corrected")
    det = rho0
    for _ in range(400):
        det = euler_step(tab, det, t_end / 400)
    # four coarse geometric bins keep a few thousand particles in every bin that matters
    coarse = make_grid(1.0, 64.0, 4)
    idx = coarse.bin_index(g.midpoints)

    def fractions(r):
        m = np.bincount(idx, weights=r.values * g.widths, minlength=4)
        return m / m.sum()

    fd, fm = fractions(det), fractions(mc)
    big = fd >= 0.02
    dev = np.max(np.abs(fm[big] / fd[big] - 1.0))
    verdict(10, dev <= 0.05 and elapsed < 30.0,
            f"max binwise deviation {dev:.2%} (<=5%) over {big.sum()} bins holding >=2% of mass, MC {elapsed:.1f}s (<30s)")


def test_criterion_11_column_budget_and_front():
    g = make_grid(1.0, 8.0, 16)
    F = FluidField(T=10.0, k=1e-3, eps=1e-4)
    state = uniform_column(g, 10.0, 20, np.where(g.midpoints < 3.0, 1.0, 0.0))
    fields = uniform_field(F, state.z_centers)
    law = SettlingLaw(1e-3, 2.0, r_gel=100.0, hindrance_power=1.0, lambda_ref=1.0)
    ks = make_kernels(1.0, 1.0, 1.0, aggregation="constant", aggregation_params={"beta0": 1e-2},
                      fragmentation="power", fragmentation_params={"k_f": 1e-3, "p": 1.0})
    tab = precompute(ks, F, g, 4, "corrected")
    b0 = state.budget()
    for _ in range(1000):
        state = split_step(state, tab, fields, law, 10.0)
    drift = abs(state.budget() / b0 - 1.0)

    one = make_grid(1.0, 2.0, 1)
    col = uniform_column(one, 1.0, 400, [1.0])
    still = uniform_field(FluidField(), col.z_centers)
    w_s = 1e-3
    t_end = 300.0
    col = transport_step(col, still, SettlingLaw(w_s, 0.0, r_gel=1e9), t_end)
    c, z = col.rho[:, 0], col.z_centers
    k = int(np.nonzero(c < 0.5)[0][0])
    z_front = z[k - 1] + (0.5 - c[k - 1]) * (z[k] - z[k - 1]) / (c[k] - c[k - 1])
    speed = (1.0 - z_front) / t_end
    err = abs(speed / w_s - 1.0)
    verdict(11, drift <= 1e-9 and err <= 0.05,
            f"budget drift {drift:.1e} over 1000 split steps (<=1e-9), front speed {speed:.4e} vs {w_s:.0e} ({err:.2%}, <=5%)")


def test_criterion_12_determinism(tmp_path):
    same = True
    checked = 0
    for cfg in sorted(SCENARIOS.glob("*.toml")):
        a, b = tmp_path / f"{cfg.stem}_a", tmp_path / f"{cfg.stem}_b"
        assert run(cfg, a) == 0 and run(cfg, b) == 0
        files = sorted(p.name for p in a.glob("*.csv"))
        match, mismatch, errors = filecmp.cmpfiles(a, b, files, shallow=False)
        same &= not mismatch and not errors and files == sorted(p.name for p in b.glob("*.csv"))
        checked += len(files)
    verdict(12, same and checked > 0, f"{checked} CSV files byte-identical across two runs of each scenario")
