# %% [markdown]
# Relaxation toward the equilibrium size profile
#
# A narrow Gaussian of flocs is pulled toward the Gamma-shaped equilibrium
# profile. The plain operator keeps total mass; the weighted one keeps the
# bio-weighted mass instead.

# %%
import numpy as np

from flocbal import (BinDensity, RelaxParams, exact_relax, integrate_relax, make_grid, project,
                     total_mass, weighted_mass)
from flocbal.bioagg import BioParams, weight_function
from flocbal.relaxation import projected_deq

grid = make_grid(5.0, 45.0, 64, "uniform")
rho0 = project(lambda x: np.exp(-0.5 * ((x - 20.0) / 2.0) ** 2), grid)
params = RelaxParams(T_eq=600.0, lambda_min=5.0, sigma=3.0)
target = total_mass(rho0) * projected_deq(grid, 5.0, 3.0)

# %%
# RK4 against the closed-form exponential approach
print(f"{'t (s)':>8} {'|rho - eq|_max':>16} {'rk4 error':>12}")
rho = rho0
for t in np.arange(0.0, 3001.0, 500.0):
    if t > 0:
        rho = integrate_relax(rho, params, 500.0, 10.0)
    exact = exact_relax(rho0, params, t)
    print(f"{t:8.0f} {np.max(np.abs(rho.values - target)):16.4e} "
          f"{np.max(np.abs(rho.values - exact.values)):12.2e}")
print("mass drift:", abs(total_mass(rho) / total_mass(rho0) - 1.0))

# %%
# Weighted relaxation: the invariant is the bio-weighted mass
f = weight_function(BioParams(5.0, 1.0, 1.0, 0.4))
weighted = RelaxParams(600.0, 5.0, 3.0, weight=f)
rho_w = integrate_relax(rho0, weighted, 3000.0, 10.0)
print("weighted mass before/after:", weighted_mass(rho0, f), weighted_mass(rho_w, f))
print("plain mass before/after:   ", total_mass(rho0), total_mass(rho_w))
