"""Eigenvalue spacing of the truncated problem on [0, L].

Zeros of u'(xi, L) (Neumann at L) and y(xi, L) (Dirichlet) in xi are the
eigenvalues of the box.  Scaled by L times the density of states, their
spacing tends to one.
"""

import math

from halfline.clock import clock_experiment
from halfline.floquet import density_of_states, find_bands
from halfline.potential import free, mathieu

for L in (1e2, 1e3, 1e4):
    rep = clock_experiment(free(), L, 1.0, 5, "dirichlet")
    print(f"free, L = {L:6.0f}: max deviation {rep.max_deviation:.4f}")

bs = find_bands(mathieu(), 1.0)
l, r = bs.bands[0]
xi0 = 0.5 * (l + r)
rho = float(density_of_states(bs, xi0))
L = 500 * 2 * math.pi
for bc in ("neumann", "dirichlet"):
    rep = clock_experiment(mathieu(), L, xi0, 5, bc, bands=bs, rho_star=rho)
    spacings = ", ".join(f"{s:.4f}" for s in rep.scaled_spacings)
    print(f"\ncos x, 500 periods, {bc}: max deviation {rep.max_deviation:.2e}")
    print(f"  scaled spacings: {spacings}")
