"""The estimators reproduce classical stochastic calculus on Brownian paths.

Two checks on a sampled Brownian motion: the regularized bracket approaches
t, and the forward integral of W against itself approaches the closed form
(W_T^2 - T)/2 of the corresponding stochastic integral.
"""

import numpy as np

from dirichlet_reg import (
    BrownianMotion,
    SeedSpec,
    TimeGrid,
    covariation_eps,
    forward_integral_eps,
    simulate_path,
)

grid = TimeGrid(T=1.0, n_steps=10_000)
eps = 1e-3

print(f"dt = {grid.dt}, eps = {eps}, 20 paths\n")
print("path   sup |[W,W]-t|   |fwd - (W_T^2-T)/2|")
bracket_sups, fwd_errs = [], []
for i in range(20):
    W = simulate_path(BrownianMotion(sigma=1.0), grid, SeedSpec(42, i))
    bracket = covariation_eps(W, W, eps)
    sup = np.max(np.abs(bracket - grid.times()))
    fwd = forward_integral_eps(W, W, eps)
    closed_form = (W.values[-1] ** 2 - 1.0) / 2.0
    err = abs(fwd[-1] - closed_form)
    bracket_sups.append(sup)
    fwd_errs.append(err)
    print(f"{i:4d}   {sup:12.5f}   {err:16.5f}")

print(f"\nmedians: bracket {np.median(bracket_sups):.5f}, forward integral {np.median(fwd_errs):.5f}")
