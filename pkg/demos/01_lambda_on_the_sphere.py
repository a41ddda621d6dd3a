"""λ on the round sphere and on nearby conformal metrics.

Run with ``python demos/01_lambda_on_the_sphere.py``.
"""

# %%
import numpy as np

from entropy_lab import entropy, sphere
from entropy_lab.sphere import ConformalMetric

grid = sphere.default_grid(32)
print(f"grid: {grid.n_nodes} Gauss-Legendre nodes, l_max = {grid.l_max}")

# %% The round metric: the minimizer is f = 0 and λ = 8π.
g0 = ConformalMetric.sphere(grid)
prof = entropy.solve_minimizer(g0)
print(f"round: lambda = {prof.lam:.15f}  (8 pi = {8 * np.pi:.15f}), multiplier = {prof.multiplier}")

# %% Squash the sphere along its axis. λ drops below 8π, quadratically in
# the amplitude, and the minimizer picks up the shape of the perturbation.
print("\n amplitude    lambda            8pi - lambda   deficit/amp^2   max|f|")
for amp in (0.02, 0.05, 0.1, 0.2):
    g = ConformalMetric.sphere(grid, amp * sphere.zonal_mode(grid, 2, normalized=False)).normalized()
    p = entropy.solve_minimizer(g)
    gap = 8 * np.pi - p.lam
    print(f" {amp:8.3f}  {p.lam:.12f}  {gap:.6e}   {gap / amp**2:10.5f}   {np.max(np.abs(p.f.values)):.3e}")

# %% Same check on the product of two round spheres: λ = 64π².
prod = entropy.solve_minimizer(ConformalMetric.product(sphere.default_grid(16)))
print(f"\nproduct: lambda = {prod.lam:.12f}  (64 pi^2 = {64 * np.pi**2:.12f})")

# %% The minimizer equation defect on the discrete space and at the nodes.
g = ConformalMetric.sphere(grid, 0.1 * sphere.zonal_mode(grid, 3, normalized=False))
p = entropy.solve_minimizer(g)
print(f"\nP3 perturbation: residual = {p.residual:.2e}, nodal residual = {p.nodal_residual:.2e}, "
      f"iterations = {p.iterations}")
