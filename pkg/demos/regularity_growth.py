"""Growth of the integral of u^2 in and out of the spectrum.

Inside a band the solution stays bounded on average, so log of the integral
grows like log L and the fitted slope against L is near zero.  In a gap the
solution grows exponentially and the slope is twice the Lyapunov exponent.
"""

import numpy as np

from halfline.floquet import find_bands
from halfline.potential import free, kronig_penney
from halfline.regularity import bound_holds, growth_exponent, high_energy_bound_check

kp = kronig_penney(1.0, 1.0, 2.0)
(l0, r0), (l1, r1) = find_bands(kp, 4.0).bands[:2]
lengths = np.geomspace(100.0, 1000.0, 8)

for label, spec, xi in (
    ("Kronig-Penney mid-band", kp, 0.5 * (l0 + r0)),
    ("Kronig-Penney mid-gap", kp, 0.5 * (r0 + l1)),
    ("free, below spectrum", free(), -1.0),
    ("free, in spectrum", free(), 1.0),
):
    g = growth_exponent(spec, xi, lengths)
    print(f"{label:24s} xi = {xi:8.5f}  slope {g.slope:.4e} +- {g.slope_ci:.1e}  exponential: {g.exponential}")

lhs, rhs = high_energy_bound_check(kp, 200.0, 100.0)
print(f"\nhigh-energy bound at xi = 200: max |u| = {lhs:.4f} <= {rhs:.4f}: {bound_holds(lhs, rhs)}")
