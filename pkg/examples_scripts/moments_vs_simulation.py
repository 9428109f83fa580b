"""Monte Carlo second moment of the parabolic Anderson model against 1 + H(t).

Usage: python moments_vs_simulation.py [n_paths]
"""

import sys

import numpy as np

from fracshe.kernel_k import h_closed_form
from fracshe.model import GridSpec, ModelParams
from fracshe.moments import InitialMeasure
from fracshe.simulator import RhoSpec, SimConfig, simulate

n_paths = int(sys.argv[1]) if len(sys.argv) > 1 else 2000
lam = 0.5
params = ModelParams(2.0, lam=lam, lip_upper=lam, lip_lower=lam)
grid = GridSpec(0.25, 2.0, 8, 4.0, 129)
em = simulate(params, InitialMeasure.lebesgue(), SimConfig(grid, n_paths, 42, RhoSpec.linear(lam)))

mid = grid.nx // 2
exact = 1 + h_closed_form(params, grid.t, lam)
m, se = em.moment_fields[2].values[:, mid], em.stderr_fields[2].values[:, mid]
print(f"{n_paths} paths, x = 0")
print("    t    E u^2 (MC)   +- SE      exact")
for row in zip(grid.t, m, se, exact):
    print("{:5.2f}  {:10.5f}  {:8.5f}  {:9.5f}".format(*row))
print(f"worst deviation in standard errors: {np.max(np.abs(m - exact) / se):.2f}")
