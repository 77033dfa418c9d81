"""Eigenvalues of the operator truncated to [0, L] and their clock spacing.

With a Dirichlet condition at L the eigenvalues are the zeros of
xi -> y(xi, L); with a Neumann condition they are the zeros of u'(xi, L).
Near a reference energy xi* the spacing should approach 1 / (L rho(xi*)).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RangeError, ResolutionWarning
from .floquet import BandStructure, floquet_phase
from .potential import Free, PotentialSpec
from .propagate import IntegratorConfig, propagate

__all__ = [
    "ClockReport",
    "boundary_function",
    "eigenvalues_in_window",
    "clock_report",
    "clock_experiment",
]

BOUNDARY_CONDITIONS = ("neumann", "dirichlet")


@dataclass(frozen=True)
class ClockReport:
    L: float
    xi_star: float
    bc: str
    rho: float
    zeros: tuple[float, ...]
    indices: tuple[int, ...]
    scaled_spacings: tuple[float, ...]
    max_deviation: float

    @property
    def spacings(self) -> tuple[float, ...]:
        return tuple(s / (self.L * self.rho) for s in self.scaled_spacings)


def _check_bc(bc: str) -> str:
    bc = bc.lower()
    if bc not in BOUNDARY_CONDITIONS:
        raise DomainError(f"boundary condition must be one of {BOUNDARY_CONDITIONS}, got {bc!r}")
    return bc


def boundary_function(spec: PotentialSpec, xi, L: float, bc: str = "neumann",
                      cfg: IntegratorConfig | None = None):
    """u'(xi, L) for Neumann, y(xi, L) for Dirichlet."""
    bc = _check_bc(bc)
    st = propagate(spec, xi, L, cfg, deriv=0)
    return st.uprime if bc == "neumann" else st.y


def _max_density(spec, window, bands, samples=33):
    """Largest density of states over the window (bounds the zero count per unit energy)."""
    lo, hi = window
    if isinstance(spec.base, Free):
        if not lo > spec.energy_shift:
            raise DomainError(f"window {window} reaches the bottom of the free spectrum")
        return 1.0 / (2.0 * np.pi * math.sqrt(lo - spec.energy_shift))
    if bands is None:
        raise DomainError("a band structure is required for a periodic background")
    xs = np.linspace(lo, hi, samples)
    idx = bands.band_index(xs)
    for k0, k1 in zip(idx, idx[1:]):
        if k1 != k0 and not bands.closed[k0]:
            raise DomainError(f"window {window} crosses the open gap above band {k0}")
    th = floquet_phase(bands, xs)
    slope = np.diff(th) / np.diff(xs)
    return float(slope.max() / (np.pi * bands.period))


def _refine(f, lo, hi, flo, fhi, tol, maxiter=60):
    """Vectorized Illinois iteration on sign-change brackets, stopped at width ``tol``.

    Each bracket shrinks until its width is below ``tol`` or the secant
    point lands within tol/4 of the previous one.  The last iterate is
    returned, or the bracket midpoint if no iterate was needed.
    """
    lo, hi, flo, fhi = lo.copy(), hi.copy(), flo.copy(), fhi.copy()
    side = np.zeros(lo.size, dtype=int)
    x_prev = np.full(lo.size, np.nan)
    active = np.ones(lo.size, dtype=bool)
    for _ in range(maxiter):
        active &= (hi - lo) > tol
        if not active.any():
            break
        ia = np.nonzero(active)[0]
        x = (lo[ia] * fhi[ia] - hi[ia] * flo[ia]) / (fhi[ia] - flo[ia])
        x = np.clip(x, lo[ia], hi[ia])
        fx = f(x)
        left = np.sign(fx) == np.sign(flo[ia])
        # root in [x, hi]: move lo; halve the stale end value if lo moved twice
        il, ir = ia[left], ia[~left]
        lo[il], flo[il] = x[left], fx[left]
        fhi[il] = np.where(side[il] == -1, 0.5 * fhi[il], fhi[il])
        side[il] = -1
        hi[ir], fhi[ir] = x[~left], fx[~left]
        flo[ir] = np.where(side[ir] == 1, 0.5 * flo[ir], flo[ir])
        side[ir] = 1
        done = np.abs(x - x_prev[ia]) < 0.25 * tol
        x_prev[ia] = x
        hit = fx == 0
        lo[ia[hit]] = hi[ia[hit]] = x[hit]
        active[ia[done | hit]] = False
    inside = (x_prev >= lo) & (x_prev <= hi)
    return np.where(inside, x_prev, 0.5 * (lo + hi))


def eigenvalues_in_window(spec: PotentialSpec, L: float, window, bc: str = "neumann",
                          cfg: IntegratorConfig | None = None, bands: BandStructure | None = None,
                          rho: float | None = None) -> np.ndarray:
    """Ordered zeros of the boundary function inside ``window``.

    The scan spacing is one tenth of the smallest expected eigenvalue
    spacing 1 / (L rho); each sign change is refined by a bracketed secant
    (Illinois) iteration to 1e-6 / (L rho).  A local minimum of |F| without a sign change raises a
    :class:`ResolutionWarning` naming the subinterval.
    """
    bc = _check_bc(bc)
    lo, hi = float(window[0]), float(window[1])
    if not hi > lo:
        raise DomainError(f"empty window {window}")
    if not L > 0:
        raise DomainError("L must be positive")
    rho_max = _max_density(spec, (lo, hi), bands) if rho is None else rho
    if bands is not None and not isinstance(spec.base, Free):
        bands.band_index(np.array([lo, hi]))
    dx = 1.0 / (10.0 * L * rho_max)
    n = max(2, int(math.ceil((hi - lo) / dx)) + 1)
    grid = np.linspace(lo, hi, n)

    def F(x):
        return np.atleast_1d(boundary_function(spec, x, L, bc, cfg))

    vals = F(grid)
    s = np.sign(vals)
    exact = np.nonzero(vals == 0.0)[0]
    change = np.nonzero(s[:-1] * s[1:] < 0)[0]
    absv = np.abs(vals)
    scale = absv.max()
    if n >= 3:
        inner = np.arange(1, n - 1)
        dip = inner[(absv[inner] < absv[inner - 1]) & (absv[inner] < absv[inner + 1])
                    & (s[inner - 1] == s[inner]) & (s[inner] == s[inner + 1])
                    & (absv[inner] < 0.1 * scale)]
        for i in dip:
            warnings.warn(
                f"possible double root of the {bc} boundary function in [{grid[i - 1]}, {grid[i + 1]}]",
                ResolutionWarning, stacklevel=2,
            )
    tol = 1e-6 / (L * rho_max)
    roots = np.empty(0)
    if change.size:
        roots = _refine(F, grid[change], grid[change + 1], vals[change], vals[change + 1], tol)
    return np.unique(np.concatenate([roots, grid[exact]]))


def clock_report(zeros, rho_star: float, L: float, xi_star: float, n_range: int,
                 bc: str = "neumann") -> ClockReport:
    """Scaled spacings L (xi_{n+1} - xi_n) rho* for |n| <= n_range.

    xi_0 is the smallest zero >= xi*, so xi_{-1} < xi* <= xi_0.
    """
    z = np.asarray(zeros, dtype=float)
    if z.size > 1 and np.any(np.diff(z) <= 0):
        raise DomainError("zeros must be strictly increasing")
    if not rho_star > 0:
        raise DomainError("density must be positive")
    i0 = int(np.searchsorted(z, xi_star, side="left"))
    below, above = i0, z.size - i0
    need = n_range + 2
    if below < need or above < need:
        raise RangeError(
            f"need {need} zeros on each side of xi*={xi_star}, found {below} below and {above} above; "
            "widen the window"
        )
    ns = np.arange(-n_range, n_range + 1)
    gaps = z[i0 + ns + 1] - z[i0 + ns]
    scaled = L * gaps * rho_star
    return ClockReport(
        L=float(L),
        xi_star=float(xi_star),
        bc=_check_bc(bc),
        rho=float(rho_star),
        zeros=tuple(float(v) for v in z[i0 - n_range:i0 + n_range + 2]),
        indices=tuple(int(n) for n in range(-n_range, n_range + 2)),
        scaled_spacings=tuple(float(v) for v in scaled),
        max_deviation=float(np.max(np.abs(scaled - 1.0))),
    )


def clock_experiment(spec: PotentialSpec, L: float, xi_star: float, n_range: int = 5, bc: str = "neumann",
                     cfg: IntegratorConfig | None = None, bands: BandStructure | None = None,
                     rho_star: float | None = None) -> ClockReport:
    """Zeros around xi* in a window of about 2 (n_range + 4) expected spacings, then the report."""
    from .universality import reference_density

    if rho_star is None:
        rho_star = reference_density(spec, xi_star, bands, cfg)
    half = (n_range + 4) / (L * rho_star)
    window = (xi_star - half, xi_star + half)
    zeros = eigenvalues_in_window(spec, L, window, bc, cfg, bands)
    return clock_report(zeros, rho_star, L, xi_star, n_range, bc)
