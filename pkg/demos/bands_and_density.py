"""Band structure and density of states of two periodic backgrounds.

The cosine potential has narrow low bands that widen quickly; the
Kronig-Penney step potential has a closed-form discriminant, which we use
to cross-check the numerical band edges.  The density of states is the
derivative of the unwrapped Floquet phase divided by pi times the period.
"""

import math

import numpy as np

from halfline.floquet import density_of_states, discriminant, find_bands, floquet_phase
from halfline.potential import kronig_penney, mathieu


def kp_discriminant(xi, v0=1.0, w=1.0, b=1.0):
    q, k = np.sqrt(complex(xi - v0)), np.sqrt(complex(xi))
    val = 2 * np.cos(q * w) * np.cos(k * b) - (k * k + q * q) * (np.sin(q * w) / q) * (np.sin(k * b) / k)
    return val.real


for name, spec, xi_max in (("cos x", mathieu(), 6.5), ("Kronig-Penney", kronig_penney(1.0, 1.0, 2.0), 42.0)):
    bs = find_bands(spec, xi_max)
    print(f"\n{name}: bands below {xi_max}")
    for n, (l, r) in enumerate(bs.bands):
        if r >= xi_max:
            print(f"  band {n}: starts at {l:.6f}, cut off by the scan limit")
            continue
        mid = 0.5 * (l + r)
        gain = floquet_phase(bs, r) - floquet_phase(bs, l)
        print(f"  band {n}: [{l:10.6f}, {r:10.6f}]  phase gain / pi = {gain / math.pi:.8f}"
              f"  rho(mid) = {float(density_of_states(bs, mid)):.5f}")

# The step potential gives an exact check on the integrator.
xs = np.linspace(0.3, 12.0, 7)
num = discriminant(kronig_penney(1.0, 1.0, 2.0), xs)
ref = np.array([kp_discriminant(x) for x in xs])
print(f"\nKronig-Penney discriminant vs closed form: max diff {np.max(np.abs(num - ref)):.2e}")
