import numpy as np
import pytest

from flocbal.discrete import precompute
from flocbal.fluid import FluidField
from flocbal.grid import make_grid, number_total, project, total_mass
from flocbal.kernels import make_kernels
from flocbal.oracle import (OracleError, dense_ode_oracle, histogram, particle_mc_oracle,
                            particle_mc_run, sample_sizes)

F = FluidField()
TURB = FluidField(k=1e-3, eps=1e-2)   # power-law breakup scales with sqrt(eps)
GRID = make_grid(1.0, 16.0, 8)


@pytest.fixture(scope="module")
def mixed_table():
    ks = make_kernels(1.0, 1.0, aggregation="sum", aggregation_params={"beta0": 0.2},
                      fragmentation="power", fragmentation_params={"k_f": 0.1, "p": 1.0})
    return precompute(ks, TURB, GRID, 4, "corrected")


@pytest.fixture(scope="module")
def rho0():
    return project(lambda x: np.exp(-0.5 * (x - 1.0)), GRID)


def test_zero_kernels_return_input_exactly(rho0):
    ks = make_kernels(1.0, aggregation="none", fragmentation="none")
    out = dense_ode_oracle(precompute(ks, F, GRID), rho0, 50.0)
    np.testing.assert_array_equal(out.values, rho0.values)


def test_tolerance_ladder_converges(mixed_table, rho0):
    outs = [dense_ode_oracle(mixed_table, rho0, 20.0, tol).values for tol in (1e-6, 1e-9, 1e-12)]
    gaps = [np.max(np.abs(outs[0] - outs[1])), np.max(np.abs(outs[1] - outs[2]))]
    assert gaps[1] < gaps[0]


def test_dense_oracle_conserves_mass(mixed_table, rho0):
    out = dense_ode_oracle(mixed_table, rho0, 20.0, 1e-10)
    assert total_mass(out) == pytest.approx(total_mass(rho0), rel=1e-10)


def test_dense_oracle_input_checks(mixed_table, rho0):
    with pytest.raises(ValueError):
        dense_ode_oracle(mixed_table, rho0, -1.0)
    assert dense_ode_oracle(mixed_table, rho0, 0.0) is rho0
    with pytest.raises(ValueError):
        dense_ode_oracle(mixed_table, project(np.ones_like, make_grid(1.0, 16.0, 9)), 1.0)


def test_sampled_sizes_follow_number_density(rho0):
    ks = make_kernels(1.0)
    sizes = sample_sizes(rho0, ks, 200_000, np.random.default_rng(4))
    assert sizes.min() >= 1.0 and sizes.max() <= 16.0
    counts = np.bincount(GRID.bin_index(sizes), minlength=GRID.n_cells)
    weights = rho0.values * np.log(GRID.hi / GRID.lo)
    expect = 200_000 * weights / weights.sum()
    assert np.all(np.abs(counts - expect) <= 5.0 * np.sqrt(expect) + 1.0)


def test_mc_zero_kernels_is_initial_histogram(rho0):
    ks = make_kernels(1.0, aggregation="none", fragmentation="none")
    res = particle_mc_run(ks, F, 5000, rho0, 10.0, seed=11)
    sizes = sample_sizes(rho0, ks, 5000, np.random.default_rng(11))
    again = histogram(sizes, ks, GRID, res.v_eff)
    np.testing.assert_array_equal(res.density.values, again.values)
    assert res.n_final == 5000 and res.events_aggregation == res.events_fragmentation == 0


def test_mc_v_eff_calibration(rho0):
    ks = make_kernels(1.0, aggregation="none", fragmentation="none")
    res = particle_mc_run(ks, F, 20_000, rho0, 1.0, seed=1)
    assert res.v_eff == pytest.approx(20_000 / number_total(rho0, ks), rel=1e-15)
    assert res.number_density == pytest.approx(number_total(rho0, ks), rel=1e-15)
    # the mass estimate is unbiased; 20k particles put it within a few percent
    assert total_mass(res.density) == pytest.approx(total_mass(rho0), rel=0.03)


def test_mc_conserves_particle_mass(rho0):
    ks = make_kernels(1.0, aggregation="sum", aggregation_params={"beta0": 0.05},
                      fragmentation="power", fragmentation_params={"k_f": 2.0})
    res = particle_mc_run(ks, TURB, 5000, rho0, 5.0, seed=3)
    start = histogram(sample_sizes(rho0, ks, 5000, np.random.default_rng(3)), ks, GRID, res.v_eff)
    assert res.events_aggregation > 0 and res.events_fragmentation > 0
    assert total_mass(res.density) == pytest.approx(total_mass(start), rel=1e-12)


def test_mc_constant_kernel_number_decay_and_seeds(rho0):
    beta0, N = 1.0, 100_000
    ks = make_kernels(1.0, aggregation="constant", aggregation_params={"beta0": beta0})
    n0 = number_total(rho0, ks)
    t_end = 1.0 / (beta0 * n0)                       # halfway to N/N0 = 1/2
    runs = [particle_mc_run(ks, F, N, rho0, t_end, seed=s) for s in (5, 6)]
    expect = N / (1.0 + beta0 * n0 * t_end / 2.0)
    for r in runs:
        # coalescence counts are sub-Poisson, so sqrt(expect) bounds sigma
        assert abs(r.n_final - expect) <= 3.0 * np.sqrt(expect)
    a, b = (r.density.values for r in runs)
    assert not np.array_equal(a, b)
    assert runs[0].n_final != runs[1].n_final
    assert abs(runs[0].n_final - runs[1].n_final) <= 3.0 * np.sqrt(2.0 * expect)


def test_mc_deterministic_given_seed(rho0):
    ks = make_kernels(1.0, aggregation="constant", fragmentation="constant",
                      fragmentation_params={"k_f": 0.05})
    a = particle_mc_oracle(ks, F, 2000, rho0, 3.0, seed=8)
    b = particle_mc_oracle(ks, F, 2000, rho0, 3.0, seed=8)
    np.testing.assert_array_equal(a.values, b.values)


def test_mc_event_budget(rho0):
    ks = make_kernels(1.0, aggregation="constant")
    with pytest.raises(OracleError):
        particle_mc_run(ks, F, 1000, rho0, 1e9, max_events=50)
    with pytest.raises(ValueError):
        particle_mc_run(ks, F, 1, rho0, 1.0)
