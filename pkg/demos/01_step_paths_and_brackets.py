"""Exact bracket arithmetic on deterministic jump paths.

On pure step paths the eps-regularized covariation is exact once eps drops
below the smallest gap between jumps: every jump contributes the product of
its sizes, and the continuous component of the bracket vanishes identically.
"""

import numpy as np

from dirichlet_reg import (
    CadlagPath,
    TimeGrid,
    covariation_eps,
    default_schedule,
    qv_decompose,
)

grid = TimeGrid(T=1.0, n_steps=10_000)


def step_path(jumps):
    values = np.zeros(grid.n_nodes)
    for i, size in jumps.items():
        values[i:] += size
    return CadlagPath.from_jumps(grid, values, jumps)


X = step_path({1000: 1.5, 4000: -2.0, 8000: 0.5})
Y = step_path({1000: 2.0, 4000: 1.0, 6500: 3.0})

print("jumps of X:", dict(zip(X.jump_indices * grid.dt, X.jump_sizes)))
print("jumps of Y:", dict(zip(Y.jump_indices * grid.dt, Y.jump_sizes)))

shared_product_sum = 1.5 * 2.0 + (-2.0) * 1.0
print(f"\nsum of shared jump products: {shared_product_sum}")
for m in (128, 32, 4, 1):
    val = covariation_eps(X, Y, m * grid.dt)[-1]
    print(f"  [X,Y]^eps(T) at eps={m}*dt: {val:+.15f}")

dec = qv_decompose(X, default_schedule(grid))
print("\nbracket split of X at T:")
print(f"  continuous part: {dec.continuous[-1]:.3e}  (identically zero)")
print(f"  jump part:       {dec.jump[-1]:.6f}  (= 1.5^2 + 2^2 + 0.5^2 = {1.5**2 + 4 + 0.25})")
