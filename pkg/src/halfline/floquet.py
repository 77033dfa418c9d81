"""Band structure, Floquet phase and density of states of the periodic background.

The discriminant is the trace of the one-period monodromy matrix; bands are
where |Delta| <= 2.  Band edges are located by bisection on Delta = +-2 inside
the monotone pieces of Delta, which are delimited by the zeros of dDelta/dxi.
Locating the critical points explicitly is what makes closed gaps (Delta
touching +-2 without crossing) visible at all.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, EdgeProximityError, ResolutionError
from .potential import PotentialSpec
from .propagate import IntegratorConfig, monodromy, step_bound

__all__ = [
    "BandStructure",
    "discriminant",
    "discriminant_derivative",
    "find_bands",
    "floquet_phase",
    "density_of_states",
    "dos_table",
]

CLOSED_GAP_WIDTH = 1e-8
EDGE_TOLERANCE = 1e-8


def discriminant(spec: PotentialSpec, xi, cfg: IntegratorConfig | None = None):
    """Delta(xi) = u_p(xi, P) + y_p'(xi, P)."""
    return monodromy(spec, xi, cfg, deriv=0).trace


def discriminant_derivative(spec: PotentialSpec, xi, cfg: IntegratorConfig | None = None):
    """(Delta, dDelta/dxi) from the variational monodromy."""
    mono = monodromy(spec, xi, cfg, deriv=1)
    return mono.trace, mono.dtrace


@dataclass(frozen=True)
class BandStructure:
    spec: PotentialSpec
    period: float
    bands: tuple[tuple[float, float], ...]
    closed: tuple[bool, ...]
    truncated: bool
    xi_max: float
    edge_tolerance: float = EDGE_TOLERANCE
    cfg: IntegratorConfig = field(default_factory=IntegratorConfig)
    phase_xi: np.ndarray = field(default=None, compare=False, repr=False)
    phase_theta: np.ndarray = field(default=None, compare=False, repr=False)

    @property
    def edges(self) -> np.ndarray:
        return np.array(self.bands)

    def gaps(self) -> list[tuple[int, float, float]]:
        """(n, r_n, l_{n+1}) for each gap above band n, closed ones included."""
        return [(n, self.bands[n][1], self.bands[n + 1][0]) for n in range(len(self.bands) - 1)]

    def open_gap_width(self, n: int) -> float:
        if n + 1 >= len(self.bands):
            return math.nan
        return self.bands[n + 1][0] - self.bands[n][1]

    def _locate(self, xa):
        lo = self.edges[:, 0] - self.edge_tolerance
        hi = self.edges[:, 1] + self.edge_tolerance
        idx = np.searchsorted(lo, xa, side="right") - 1
        ok = (idx >= 0) & (xa <= hi[np.clip(idx, 0, None)])
        return idx, ok

    def band_index(self, xi) -> np.ndarray:
        """Index of the band containing each xi (edges count as inside)."""
        xa = np.atleast_1d(np.asarray(xi, dtype=float))
        idx, ok = self._locate(xa)
        if not np.all(ok):
            bad = float(xa[~ok][0])
            k = int(idx[~ok][0])
            if k < 0:
                raise DomainError(f"xi={bad} lies below the spectrum (first band starts at {self.bands[0][0]})")
            if k + 1 >= len(self.bands):
                raise DomainError(f"xi={bad} lies above the scanned range (xi_max={self.xi_max})")
            raise DomainError(
                f"xi={bad} lies in the gap between band {k} {self.bands[k]} and band {k + 1} {self.bands[k + 1]}"
            )
        return idx

    def contains(self, xi) -> np.ndarray:
        return self._locate(np.atleast_1d(np.asarray(xi, dtype=float)))[1]

    def edge_is_open(self, n: int, side: str) -> bool:
        """Whether the left/right edge of band n borders an open gap."""
        if side == "left":
            return n == 0 or not self.closed[n - 1]
        if n == len(self.bands) - 1:
            return True
        return not self.closed[n]

    def band_width(self, n: int) -> float:
        l, r = self.bands[n]
        return r - l


def _bisect(f, lo, hi, flo, maxiter=200):
    """Vectorized bisection for sign changes of f on [lo, hi]; returns final brackets."""
    lo, hi, flo = lo.copy(), hi.copy(), flo.copy()
    if lo.size == 0:
        return lo, hi
    for _ in range(maxiter):
        mid = 0.5 * (lo + hi)
        active = (mid > lo) & (mid < hi)
        if not np.any(active):
            break
        fm = f(mid[active])
        left = np.sign(fm) == np.sign(flo[active])
        ia = np.nonzero(active)[0]
        lo[ia[left]] = mid[ia[left]]
        flo[ia[left]] = fm[left]
        hi[ia[~left]] = mid[ia[~left]]
    return lo, hi


def find_bands(spec: PotentialSpec, xi_max: float, scan_step: float | None = None,
               xi_min: float | None = None, cfg: IntegratorConfig | None = None,
               phase_points: int = 65) -> BandStructure:
    """Locate all bands of the periodic background below ``xi_max``."""
    if not spec.is_periodic:
        raise DomainError("band structure needs a periodic base")
    cfg = cfg or IntegratorConfig()
    bg = spec.background()
    P = spec.period
    floor = bg.min_background() - 1.0 if xi_min is None else float(xi_min)
    if not xi_max > floor:
        raise DomainError(f"xi_max={xi_max} must exceed the scan floor {floor}")
    if scan_step is None:
        scan_step = min(0.01, (math.pi / P) ** 2 / 50.0)
    n = int(math.ceil((xi_max - floor) / scan_step))
    grid = np.linspace(floor, xi_max, n + 1)
    # one step size for every evaluation so that Delta is a single function of xi
    h = step_bound(bg, xi_max) / cfg.refine if cfg.step is None else cfg.step / cfg.refine
    fcfg = IntegratorConfig(step=h, refine=1)

    def delta(x):
        return discriminant(bg, x, fcfg)

    def ddelta(x):
        return discriminant_derivative(bg, x, fcfg)[1]

    D, dD = discriminant_derivative(bg, grid, fcfg)
    if abs(D[0]) <= 2:
        raise DomainError(f"scan floor {floor} is inside the spectrum; pass a lower xi_min")

    # critical points of Delta
    sc = np.nonzero(np.sign(dD[:-1]) * np.sign(dD[1:]) < 0)[0]
    exact = dD == 0
    lo, hi = _bisect(ddelta, grid[sc], grid[sc + 1], dD[sc])
    crit = np.sort(np.concatenate([0.5 * (lo + hi), grid[exact]]))

    # monotonicity check between scan points without a critical point
    has_crit = np.zeros(n, bool)
    has_crit[sc] = True
    has_crit[np.clip(np.nonzero(exact)[0] - 1, 0, n - 1)] = True
    has_crit[np.clip(np.nonzero(exact)[0], 0, n - 1)] = True
    dDelta = np.diff(D)
    noise = 1e-10 * (1.0 + np.abs(D[:-1]))
    bad = (~has_crit) & (np.abs(dDelta) > noise) & (np.sign(dDelta) != np.sign(dD[:-1]))
    if np.any(bad):
        k = int(np.nonzero(bad)[0][0])
        raise ResolutionError(
            f"discriminant not resolved on [{grid[k]}, {grid[k + 1]}]: a band or gap is narrower "
            f"than scan_step={scan_step}; use a finer scan"
        )

    seg = np.concatenate([[floor], crit, [xi_max]])
    Dseg = delta(seg)
    Dseg[0], Dseg[-1] = D[0], D[-1]
    inside = np.abs(Dseg[1:-1]) < 2.0 - 1e-9
    if np.any(inside):
        c = float(crit[inside][0])
        raise ResolutionError(f"critical point of the discriminant inside a band at xi={c}")

    # roots of Delta = +-2 on each monotone segment: dict (segment, level) -> root
    roots = {}
    for level in (2.0, -2.0):
        f0, f1 = Dseg[:-1] - level, Dseg[1:] - level
        idx = np.nonzero(np.sign(f0) * np.sign(f1) < 0)[0]
        lo, hi = _bisect(lambda x: delta(x) - level, seg[idx], seg[idx + 1], f0[idx])
        flo = delta(lo) - level if lo.size else lo
        for k, a, b, fa in zip(idx, lo, hi, flo):
            # keep the endpoint on the band side (|Delta| <= 2)
            in_band_lo = (fa <= 0) if level > 0 else (fa >= 0)
            roots[(int(k), level)] = float(a if in_band_lo else b)
        for k in np.nonzero((f1 == 0))[0]:
            roots[(int(k), level)] = float(seg[k + 1])

    # classify gaps at the critical points
    edges = []
    double = set()
    used = set()
    for j, c in enumerate(crit):
        level = 2.0 if Dseg[j + 1] > 0 else -2.0
        left = roots.get((j, level))
        right = roots.get((j + 1, level))
        if left is not None and right is not None and right - left >= CLOSED_GAP_WIDTH:
            continue
        # closed gap: Delta touches +-2 at c
        for key, r in (((j, level), left), ((j + 1, level), right)):
            if r is not None and abs(r - c) < max(CLOSED_GAP_WIDTH, 1e-6 * scan_step):
                used.add(key)
        double.add(float(c))
    for key, r in roots.items():
        if key not in used:
            edges.append(r)
    for c in double:
        edges.extend([c, c])
    edges.sort()

    truncated = len(edges) % 2 == 1
    if truncated:
        edges.append(float(xi_max))
    bands = tuple((edges[2 * k], edges[2 * k + 1]) for k in range(len(edges) // 2))
    if not bands:
        raise DomainError(f"no band found below xi_max={xi_max}")
    closed = tuple(bands[k][1] == bands[k + 1][0] for k in range(len(bands) - 1))

    lefts = np.array([b[0] for b in bands])
    Dl = delta(lefts)
    expect = np.where(np.arange(len(bands)) % 2 == 0, 2.0, -2.0)
    if np.any(np.abs(Dl - expect) > 1e-6):
        k = int(np.nonzero(np.abs(Dl - expect) > 1e-6)[0][0])
        raise ResolutionError(f"band {k} starting at {lefts[k]} has inconsistent discriminant {Dl[k]}")

    bs = BandStructure(bg, P, bands, closed, truncated, float(xi_max), cfg=fcfg)
    t = np.linspace(0.0, 1.0, phase_points)
    pxi = np.concatenate([l + (r - l) * t for l, r in bands])
    object.__setattr__(bs, "phase_xi", pxi)
    object.__setattr__(bs, "phase_theta", floquet_phase(bs, pxi))
    return bs


def floquet_phase(bs: BandStructure, xi):
    """Unwrapped global Floquet phase Theta(xi), continuous and increasing.

    On band n with local phase phi = arccos(Delta/2) in [0, pi], Theta is
    n*pi + phi for even n and (n+1)*pi - phi for odd n.
    """
    n = bs.band_index(xi)
    D = np.atleast_1d(discriminant(bs.spec, np.atleast_1d(np.asarray(xi, float)), bs.cfg))
    phi = np.arccos(np.clip(0.5 * D, -1.0, 1.0))
    theta = np.where(n % 2 == 0, n * np.pi + phi, (n + 1) * np.pi - phi)
    return float(theta[0]) if np.ndim(xi) == 0 else theta


def _rho_step(bs: BandStructure, n: int) -> float:
    return 1e-4 * bs.band_width(n)


def density_of_states(bs: BandStructure, xi):
    """rho(xi) = Theta'(xi) / (pi P) by centred differences of the phase."""
    xa = np.atleast_1d(np.asarray(xi, dtype=float))
    idx = bs.band_index(xa)
    h = np.array([_rho_step(bs, int(k)) for k in idx])
    for x, k, hk in zip(xa, idx, h):
        l, r = bs.bands[k]
        if (x - l < 10 * hk and bs.edge_is_open(int(k), "left")) or (
            r - x < 10 * hk and bs.edge_is_open(int(k), "right")
        ):
            raise EdgeProximityError(
                f"xi={x} is within {10 * hk:.3g} of an open edge of band {int(k)} [{l}, {r}]"
            )
    up = floquet_phase(bs, xa + h)
    dn = floquet_phase(bs, xa - h)
    rho = (up - dn) / (2.0 * h) / (np.pi * bs.period)
    return float(rho[0]) if np.ndim(xi) == 0 else rho


def dos_table(bs: BandStructure, points_per_band: int = 50):
    """Rows (xi, Theta, rho) on interior points of every complete band."""
    rows = []
    for n, (l, r) in enumerate(bs.bands):
        if bs.truncated and n == len(bs.bands) - 1:
            continue
        m = 20 * _rho_step(bs, n)
        xs = np.linspace(l + m, r - m, points_per_band)
        rows.append(np.column_stack([xs, floquet_phase(bs, xs), density_of_states(bs, xs)]))
    return np.vstack(rows) if rows else np.empty((0, 3))
