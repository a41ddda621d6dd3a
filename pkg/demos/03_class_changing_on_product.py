"""Changing the Kähler class on S²×S².

Shrinking one factor while growing the other keeps the total volume fixed
and increases λ. The round product is therefore not a local maximum of λ
among all metrics, even though it is one within its Kähler class.
"""

# %%
import numpy as np

from entropy_lab import entropy, sphere, variation
from entropy_lab.sphere import ConformalMetric

grid = sphere.default_grid(16)
g = ConformalMetric.product(grid)
theta = variation.traceless_class_direction(1.0, -1.0, a=2.0, metric=g)
print(f"direction: form coefficients {theta.form}, meta {theta.meta}")

rep = variation.second_variation_general(g, theta, normalization="riemannian")
print(f"second variation: analytic {rep.analytic:.8f}, fd {rep.oracle:.8f}, "
      f"256 pi^2 = {256 * np.pi**2:.8f}")

# %% Along the path the factors have areas 4π e^{±2a}; λ follows
# 32π²(e^{2a} + e^{-2a}).
print("\n     a     lambda(solver)     closed form")
for a in (0.0, 0.05, 0.1, 0.2, 0.4):
    lam = entropy.solve_minimizer(theta.path(g, a)).lam
    print(f"{a:6.2f}  {lam:16.10f}  {32 * np.pi**2 * (np.exp(2 * a) + np.exp(-2 * a)):16.10f}")

# %% Adding potential directions on each factor only lowers the value.
psi = (grid.basis[:, 2], grid.basis[:, 3])
mixed = variation.second_variation_general(g, theta, psi=psi, normalization="riemannian")
print(f"\nwith potentials: {mixed.analytic:.6f} (theta part {mixed.extra['theta_part']:.6f}, "
      f"potential part {mixed.extra['potential_part']:.6f}), fd {mixed.oracle:.6f}")
