"""Population balance of cohesive-sediment flocs: relaxation, aggregation and
fragmentation operators, a mass-conserving sectional scheme, and a vertical column."""
from .aggfrag import ContinuousDensity, g_continuous, g_terms, mass_balance, truncation_leak
from .bioagg import BioParams, aggregate_length, f_bio, f_bio_approx, mass_bio, n_of_lambda, theta
from .column import ColumnState, SettlingLaw, settling_velocity, split_step, transport_step, uniform_column
from .discrete import (CoeffTable, apply_gbar, check_conservation, euler_step, load_table,
                       precompute, save_table)
from .fluid import ColumnField, FluidField, eddy_viscosity, sigma_eq, uniform_field
from .grid import (BinDensity, LambdaGrid, make_grid, number_total, project, total_mass,
                   weighted_mass)
from .kernels import KernelSet, make_kernels, validate
from .oracle import dense_ode_oracle, particle_mc_oracle
from .quadrature import QuadSpec
from .relaxation import RelaxParams, d_eq, exact_relax, g_relax, g_relax_weighted, integrate_relax

__version__ = "0.1.0"
