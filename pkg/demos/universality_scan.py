"""Scaled kernel ratios against the sinc law.

For the free operator the ratio converges like 1/L.  For the cosine
potential at the middle of the lowest band the error at moderate lengths is
dominated by how much S_L drifts along the diagonal over an O(1/L) window,
so we print that drift next to the sup error.
"""

import math

from halfline.floquet import density_of_states, find_bands
from halfline.potential import LogDecay, free, mathieu
from halfline.universality import convergence_table, offset_grid

grid = offset_grid(2.0, 9)

rep = convergence_table(free(), 1.0, grid, [1e2, 1e3, 1e4])
print("free operator at xi0 = 1")
for L in rep.L_list:
    print(f"  L = {L:7.0f}  sup error {rep.sup_error[L]:.3e}")
print(f"  strictly decreasing: {rep.strictly_decreasing()}")

bs = find_bands(mathieu(), 1.0)
l, r = bs.bands[0]
xi0 = 0.5 * (l + r)
rho = float(density_of_states(bs, xi0))
P = 2 * math.pi
for label, spec in (("cos x", mathieu()), ("cos x + 1/(1+x)", mathieu(perturbation=LogDecay(1.0)))):
    rep = convergence_table(spec, xi0, grid, [100 * P, 500 * P, 2000 * P], bands=bs, rho0=rho, stretch_eps=())
    print(f"\n{label} at xi0 = {xi0:.6f}, rho = {rho:.4f}")
    for L in rep.L_list:
        print(f"  {L / P:5.0f} periods  sup error {rep.sup_error[L]:.4f}  diagonal drift {rep.moving_diagonal[L]:.4f}")
