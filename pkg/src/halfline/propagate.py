"""Fundamental solutions of -phi'' + V phi = xi phi and their xi-derivatives.

The first-order system Y' = A(x) Y with A = [[0, 1], [V - xi, 0]] is
advanced with the two-point Gauss fourth-order Magnus scheme.  Because A is
traceless, each step propagator exp(Omega) has determinant one, so the
Wronskian u y' - u' y stays at 1 up to rounding no matter how long the
interval.  Where V is constant on a step (free and piecewise-constant
backgrounds, with steps split at the breakpoints) the step is exact.

Energy derivatives are carried as jets (E, dE/dxi, d2E/dxi2) of every step
propagator and combined with the product rule, which is the variational
equation w'' = (V - xi) w - u integrated by the same scheme.

All routines are vectorized over an array of energies.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError, IntegrationOverflowError
from .potential import PotentialSpec, evaluate

__all__ = [
    "IntegratorConfig",
    "SolutionState",
    "Monodromy",
    "Trace",
    "propagate",
    "monodromy",
    "solution_trace",
    "step_bound",
    "make_grid",
    "trace_on_nodes",
    "simpson_nodes",
]

OVERFLOW_LIMIT = 1e150
_CHUNK_ELEMENTS = 1 << 16
_G1 = 0.5 - math.sqrt(3.0) / 6.0
_G2 = 0.5 + math.sqrt(3.0) / 6.0
_COMM = math.sqrt(3.0) / 12.0


@dataclass(frozen=True)
class IntegratorConfig:
    """Fixed-step fourth-order integration settings.

    ``step`` of None selects a quarter of the policy bound from
    :func:`step_bound` (at the bound itself the endpoint error of u is about
    1e-7 relative over a few dozen periods, too coarse for Christoffel-Darboux
    differences); ``refine`` divides whatever step is in force.  ``max_samples`` caps the
    number of retained grid points times energies in traces.
    """

    step: float | None = None
    richardson_check: bool = False
    refine: int = 1
    max_samples: int = 20_000_000
    order: int = 4

    def __post_init__(self):
        if self.step is not None and not self.step > 0:
            raise ConfigError(f"step must be positive, got {self.step!r}")
        if self.refine < 1:
            raise ConfigError("refine must be a positive integer")
        if self.order != 4:
            raise ConfigError("method order is fixed at 4")


@dataclass
class SolutionState:
    """Neumann solution u, Dirichlet solution y and their xi-derivatives at x.

    Fields are scalars for scalar ``xi`` and arrays otherwise.  Second
    xi-derivatives are only present when requested (``deriv=2``).
    """

    x: float
    xi: np.ndarray
    u: np.ndarray
    uprime: np.ndarray
    y: np.ndarray
    yprime: np.ndarray
    du_dxi: np.ndarray | None = None
    duprime_dxi: np.ndarray | None = None
    dy_dxi: np.ndarray | None = None
    dyprime_dxi: np.ndarray | None = None
    d2u_dxi2: np.ndarray | None = None
    d2uprime_dxi2: np.ndarray | None = None
    richardson_error: np.ndarray | None = None

    @property
    def wronskian(self):
        return self.u * self.yprime - self.uprime * self.y


@dataclass
class Monodromy:
    """One-period transfer matrix of (phi, phi') for the periodic background."""

    xi: np.ndarray
    period: float
    matrix: np.ndarray
    dmatrix: np.ndarray

    @property
    def trace(self):
        return self.matrix[..., 0, 0] + self.matrix[..., 1, 1]

    @property
    def dtrace(self):
        return self.dmatrix[..., 0, 0] + self.dmatrix[..., 1, 1]

    @property
    def det(self):
        m = self.matrix
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]


@dataclass
class Trace:
    """Samples of the fundamental matrix (and derivatives) on a uniform grid."""

    x: np.ndarray
    xi: np.ndarray
    jet: tuple

    @property
    def u(self):
        return self.jet[0][..., 0, 0]

    @property
    def uprime(self):
        return self.jet[0][..., 1, 0]

    @property
    def y(self):
        return self.jet[0][..., 0, 1]

    @property
    def yprime(self):
        return self.jet[0][..., 1, 1]

    @property
    def du_dxi(self):
        return self.jet[1][..., 0, 0]

    @property
    def wronskian(self):
        m = self.jet[0]
        return m[..., 0, 0] * m[..., 1, 1] - m[..., 1, 0] * m[..., 0, 1]


# ---------------------------------------------------------------- step policy


def step_bound(spec: PotentialSpec, xi_max: float) -> float:
    """Largest admissible step: min(P/200, 0.1 / sqrt(max(xi, 1) + sup|V|))."""
    h = 0.1 / math.sqrt(max(float(xi_max), 1.0) + spec.sup_abs())
    if spec.is_periodic:
        h = min(h, spec.period / 200.0)
    return h


DEFAULT_STEP_FRACTION = 0.25


def _resolve_step(spec, xi, cfg: IntegratorConfig) -> float:
    bound = step_bound(spec, np.max(xi))
    if cfg.step is None:
        h = DEFAULT_STEP_FRACTION * bound
    else:
        if cfg.step > bound * (1 + 1e-12):
            raise ConfigError(
                f"step {cfg.step:g} exceeds the resolution bound {bound:g} for xi <= {np.max(xi):g}"
            )
        h = cfg.step
    return h / cfg.refine


def make_grid(length: float, h: float, multiple: int = 4) -> int:
    """Number of uniform steps covering ``length`` with spacing <= h, rounded up to ``multiple``."""
    n = max(1, int(math.ceil(length / h - 1e-9)))
    return multiple * int(math.ceil(n / multiple))


# ---------------------------------------------------------------- jets


_TAYLOR_TERMS = 10  # |z| < 0.5: the next term is below 1e-22 relative


def _series(zs, deriv):
    c = s = sz = szz = 0.0
    for n in range(_TAYLOR_TERMS, -1, -1):
        c = c * zs + 1.0 / math.factorial(2 * n)
        s = s * zs + 1.0 / math.factorial(2 * n + 1)
        if deriv >= 1 and n >= 1:
            sz = sz * zs + n / math.factorial(2 * n + 1)
        if deriv >= 2 and n >= 2:
            szz = szz * zs + n * (n - 1) / math.factorial(2 * n + 1)
    return c, s, sz, szz


def _closed(zb, deriv):
    neg = zb < 0
    t = np.sqrt(np.abs(zb))
    cb = np.where(neg, np.cos(t), np.cosh(np.where(neg, 0.0, t)))
    sb = np.where(neg, np.sin(t), np.sinh(np.where(neg, 0.0, t))) / t
    szb = (cb - sb) / (2.0 * zb) if deriv >= 1 else 0.0
    szzb = (0.5 * sb - 3.0 * szb) / (2.0 * zb) if deriv >= 2 else 0.0
    return cb, sb, szb, szzb


def _cs(z, deriv=2):
    """C = cosh(sqrt z), S = sinh(sqrt z)/sqrt z and dS/dz, d2S/dz2 (entire in z).

    Derivatives above ``deriv`` are returned as 0.
    """
    small = np.abs(z) < 0.5
    if small.all():
        return _series(z, deriv)
    if not small.any():
        return _closed(z, deriv)
    out = [np.zeros_like(z) for _ in range(4)]
    for o, v in zip(out, _series(z[small], deriv)):
        o[small] = v
    big = ~small
    for o, v in zip(out, _closed(z[big], deriv)):
        o[big] = v
    return tuple(out)


def _piece_jets(V1, V2, h, xi, deriv):
    """Magnus propagators over pieces of length h; shape (npieces, nxi, 2, 2)."""
    h = h[:, None]
    abar = 0.5 * (V1 + V2)[:, None] - xi[None, :]
    gam = (_COMM * h * h) * (V1 - V2)[:, None]
    z = gam * gam + h * h * abar
    C, S, Sz, Szz = _cs(z, deriv)
    shape = z.shape + (2, 2)
    E = np.empty(shape)
    E[..., 0, 0] = C + S * gam
    E[..., 0, 1] = S * h
    E[..., 1, 0] = S * h * abar
    E[..., 1, 1] = C - S * gam
    jet = [E]
    if deriv >= 1:
        dz = -(h * h)
        dE = np.empty(shape)
        dE[..., 0, 0] = dz * (0.5 * S + Sz * gam)
        dE[..., 0, 1] = dz * Sz * h
        dE[..., 1, 0] = dz * Sz * h * abar - S * h
        dE[..., 1, 1] = dz * (0.5 * S - Sz * gam)
        jet.append(dE)
    if deriv >= 2:
        dz2 = h**4
        d2E = np.empty(shape)
        d2E[..., 0, 0] = dz2 * (0.5 * Sz + Szz * gam)
        d2E[..., 0, 1] = dz2 * Szz * h
        d2E[..., 1, 0] = dz2 * Szz * h * abar + 2.0 * h**3 * Sz
        d2E[..., 1, 1] = dz2 * (0.5 * Sz - Szz * gam)
        jet.append(d2E)
    return tuple(jet)


def _compose(a, b):
    """Jet of a @ b (``a`` acts after ``b``)."""
    out = [a[0] @ b[0]]
    if len(a) > 1:
        out.append(a[1] @ b[0] + a[0] @ b[1])
    if len(a) > 2:
        out.append(a[2] @ b[0] + 2.0 * (a[1] @ b[1]) + a[0] @ b[2])
    return tuple(out)


def _identity_jet(shape, deriv):
    eye = np.zeros(shape + (2, 2))
    eye[..., 0, 0] = eye[..., 1, 1] = 1.0
    return (eye,) + tuple(np.zeros(shape + (2, 2)) for _ in range(deriv))


def _tree_reduce(jet):
    """Ordered product p[n-1] ... p[0] along axis 0."""
    while jet[0].shape[0] > 1:
        n = jet[0].shape[0]
        if n % 2:
            pad = _identity_jet(jet[0].shape[1:-2], len(jet) - 1)
            jet = tuple(np.concatenate([j, p[None]]) for j, p in zip(jet, pad))
        jet = _compose(tuple(j[1::2] for j in jet), tuple(j[0::2] for j in jet))
    return tuple(j[0] for j in jet)


def _prefix_scan(jet):
    """Inclusive prefix products P[k] = p[k] ... p[0] along axis 0."""
    jet = tuple(j.copy() for j in jet)
    n = jet[0].shape[0]
    s = 1
    while s < n:
        upd = _compose(tuple(j[s:] for j in jet), tuple(j[:-s] for j in jet))
        for j, u in zip(jet, upd):
            j[s:] = u
        s *= 2
    return jet


# ---------------------------------------------------------------- pieces


def _pieces(spec: PotentialSpec, nodes: np.ndarray):
    """Split the intervals between ``nodes`` at potential breakpoints.

    Returns (left, length, owner) where ``owner`` is the index of the
    interval between consecutive nodes that each piece belongs to.
    """
    x0, x1 = nodes[0], nodes[-1]
    bps = spec.breakpoints_in(x0, x1)
    if bps.size:
        h = np.min(np.diff(nodes))
        # drop breakpoints that coincide with a node
        pos = np.searchsorted(nodes, bps)
        near = np.zeros(bps.shape, bool)
        lo = np.clip(pos - 1, 0, nodes.size - 1)
        hi = np.clip(pos, 0, nodes.size - 1)
        near |= np.abs(nodes[lo] - bps) < 1e-12 * max(h, 1.0)
        near |= np.abs(nodes[hi] - bps) < 1e-12 * max(h, 1.0)
        bps = bps[~near]
    if bps.size:
        pts = np.concatenate([nodes, bps])
        order = np.argsort(pts, kind="stable")
        pts = pts[order]
    else:
        pts = nodes
    left = pts[:-1]
    length = np.diff(pts)
    owner = np.searchsorted(nodes, left, side="right") - 1
    return left, length, owner


def _piece_jets_for(spec, left, length, xi, deriv):
    V1 = evaluate(spec, left + _G1 * length)
    V2 = evaluate(spec, left + _G2 * length)
    return _piece_jets(np.atleast_1d(V1), np.atleast_1d(V2), length, xi, deriv)


def _check_finite(M, xi, L):
    bad = ~np.isfinite(M).all(axis=(-2, -1)) | (np.abs(M).max(axis=(-2, -1)) > OVERFLOW_LIMIT)
    if np.any(bad):
        where = np.asarray(xi)[bad]
        raise IntegrationOverflowError(
            f"solution exceeded {OVERFLOW_LIMIT:.0e} at xi={where[0]!r}, L={L!r}"
        )


def _endpoint_jet(spec, xi, x0, x1, nodes, deriv):
    """Product of all step propagators between nodes, chunked over pieces."""
    left, length, _ = _pieces(spec, nodes)
    m = xi.size
    chunk = max(1, _CHUNK_ELEMENTS // m)
    state = _identity_jet((m,), deriv)
    # overflow is detected and reported by _check_finite, not by numpy warnings
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(0, left.size, chunk):
            pj = _piece_jets_for(spec, left[s:s + chunk], length[s:s + chunk], xi, deriv)
            state = _compose(_tree_reduce(pj), state)
            _check_finite(state[0], xi, x1)
    return state


def _nodes(spec, x0, x1, h, exact):
    if exact:
        return np.concatenate([[x0], spec.breakpoints_in(x0, x1), [x1]])
    n = make_grid(x1 - x0, h)
    return x0 + (x1 - x0) * np.arange(n + 1) / n


def _state_from_jet(jet, xi, L, scalar, rich=None):
    def pick(arr):
        return arr[0] if scalar else arr

    M = jet[0]
    st = SolutionState(
        x=L, xi=pick(xi),
        u=pick(M[:, 0, 0]), uprime=pick(M[:, 1, 0]),
        y=pick(M[:, 0, 1]), yprime=pick(M[:, 1, 1]),
    )
    if len(jet) > 1:
        D = jet[1]
        st.du_dxi, st.duprime_dxi = pick(D[:, 0, 0]), pick(D[:, 1, 0])
        st.dy_dxi, st.dyprime_dxi = pick(D[:, 0, 1]), pick(D[:, 1, 1])
    if len(jet) > 2:
        D2 = jet[2]
        st.d2u_dxi2, st.d2uprime_dxi2 = pick(D2[:, 0, 0]), pick(D2[:, 1, 0])
    if rich is not None:
        st.richardson_error = pick(rich)
    return st


def _as_energies(xi):
    xa = np.atleast_1d(np.asarray(xi, dtype=float))
    if xa.ndim != 1 or not np.all(np.isfinite(xa)):
        raise DomainError("energies must be finite")
    return xa, np.ndim(xi) == 0


def propagate(spec: PotentialSpec, xi, L: float, cfg: IntegratorConfig | None = None,
              deriv: int = 1) -> SolutionState:
    """State of the fundamental solutions at x = L.

    ``xi`` may be a scalar or a 1-d array of energies.  ``deriv`` (0, 1 or 2)
    selects how many xi-derivatives are carried.  Piecewise-constant
    potentials are propagated exactly from breakpoint to breakpoint.
    """
    cfg = cfg or IntegratorConfig()
    if not L >= 0:
        raise DomainError(f"L must be >= 0, got {L!r}")
    xa, scalar = _as_energies(xi)
    h = _resolve_step(spec, xa, cfg)
    if L == 0:
        return _state_from_jet(_identity_jet((xa.size,), deriv), xa, 0.0, scalar)
    exact = spec.is_piecewise_constant
    jet = _endpoint_jet(spec, xa, 0.0, L, _nodes(spec, 0.0, L, h, exact), deriv)
    rich = None
    if cfg.richardson_check:
        if exact:
            rich = np.zeros(xa.size)
        else:
            fine = _endpoint_jet(spec, xa, 0.0, L, _nodes(spec, 0.0, L, h / 2, False), deriv)
            rich = np.abs(fine[0][:, 0, 0] - jet[0][:, 0, 0]) / 15.0
            jet = fine
    return _state_from_jet(jet, xa, float(L), scalar, rich)


def monodromy(spec: PotentialSpec, xi, cfg: IntegratorConfig | None = None, deriv: int = 1) -> Monodromy:
    """Transfer matrix over one period of the background p + shift.

    Columns are (u_p, u_p') and (y_p, y_p') at x = P.  The perturbation is
    ignored.
    """
    if not spec.is_periodic:
        raise DomainError("monodromy requires a periodic base")
    cfg = cfg or IntegratorConfig()
    bg = spec.background()
    xa, scalar = _as_energies(xi)
    h = _resolve_step(bg, xa, cfg)
    P = spec.period
    jet = _endpoint_jet(bg, xa, 0.0, P, _nodes(bg, 0.0, P, h, bg.is_piecewise_constant), max(deriv, 0))
    M = jet[0][0] if scalar else jet[0]
    dM = (jet[1][0] if scalar else jet[1]) if deriv >= 1 else np.zeros_like(M)
    return Monodromy(xi=xa[0] if scalar else xa, period=P, matrix=M, dmatrix=dM)


def solution_trace(spec: PotentialSpec, xi, L: float, cfg: IntegratorConfig | None = None,
                   deriv: int = 0, x0: float = 0.0, init=None, n_steps: int | None = None) -> Trace:
    """All grid samples of the fundamental matrix on [x0, L], spacing = step.

    ``init`` is an optional starting jet at ``x0`` (identity at 0 by
    default); ``n_steps`` overrides the grid size.  Output arrays have shape
    (nsamples, nxi, ...).
    """
    cfg = cfg or IntegratorConfig()
    if not L >= x0:
        raise DomainError(f"L must be >= {x0}, got {L!r}")
    xa, _ = _as_energies(xi)
    if L == x0:
        init = init if init is not None else _identity_jet((xa.size,), deriv)
        return Trace(np.array([float(x0)]), xa, tuple(j[None] for j in init))
    h = _resolve_step(spec, xa, cfg)
    n = n_steps or make_grid(L - x0, h)
    nodes = x0 + (L - x0) * np.arange(n + 1) / n
    return trace_on_nodes(spec, xa, nodes, deriv, init, cfg)


def trace_on_nodes(spec: PotentialSpec, xi, nodes: np.ndarray, deriv: int = 0, init=None,
                   cfg: IntegratorConfig | None = None) -> Trace:
    """Fundamental matrix jets at arbitrary increasing ``nodes``."""
    cfg = cfg or IntegratorConfig()
    xa, _ = _as_energies(xi)
    m = xa.size
    nodes = np.asarray(nodes, dtype=float)
    if np.any(np.diff(nodes) <= 0):
        raise DomainError("trace nodes must be strictly increasing")
    if nodes.size * m > cfg.max_samples:
        raise ConfigError(
            f"trace of {nodes.size * m} samples exceeds max_samples={cfg.max_samples}; "
            "reduce L or the energy batch"
        )
    if init is None:
        init = _identity_jet((m,), deriv)
    n = nodes.size - 1
    out = [np.empty((n + 1, m, 2, 2)) for _ in init]
    for o, j in zip(out, init):
        o[0] = j
    if n == 0:
        return Trace(nodes, xa, tuple(out))
    left, length, owner = _pieces(spec, nodes)
    state = init
    chunk = max(1, _CHUNK_ELEMENTS // m)
    pstart = np.searchsorted(owner, np.arange(n + 1))
    with np.errstate(over="ignore", invalid="ignore"):
        for s in range(0, n, chunk):
            e = min(n, s + chunk)
            ps, pe = pstart[s], pstart[e]
            pj = _piece_jets_for(spec, left[ps:pe], length[ps:pe], xa, deriv)
            steps = _merge_pieces(pj, owner[ps:pe] - s, e - s)
            pref = _prefix_scan(steps)
            samples = _compose(pref, tuple(j[None] for j in state))
            for o, smp in zip(out, samples):
                o[s + 1:e + 1] = smp
            state = tuple(smp[-1] for smp in samples)
            _check_finite(state[0], xa, nodes[e])
    return Trace(nodes, xa, tuple(out))


def simpson_nodes(spec: PotentialSpec, x0: float, x1: float, n_steps: int):
    """Nodes and weights of piecewise Simpson on [x0, x1].

    Panels are the ``n_steps`` uniform steps further split at breakpoints of
    V, so no panel straddles a discontinuity; each panel contributes its two
    ends and its midpoint.
    """
    grid = x0 + (x1 - x0) * np.arange(n_steps + 1) / n_steps
    bps = spec.breakpoints_in(x0, x1)
    if bps.size:
        tol = 1e-12 * max(1.0, x1 - x0)
        pos = np.clip(np.searchsorted(grid, bps), 1, grid.size - 1)
        keep = (np.abs(grid[pos] - bps) > tol) & (np.abs(grid[pos - 1] - bps) > tol)
        grid = np.sort(np.concatenate([grid, bps[keep]]))
    ell = np.diff(grid)
    nodes = np.empty(2 * grid.size - 1)
    nodes[0::2] = grid
    nodes[1::2] = grid[:-1] + 0.5 * ell
    w = np.zeros(nodes.size)
    w[0:-1:2] += ell / 6.0
    w[1::2] += 4.0 * ell / 6.0
    w[2::2] += ell / 6.0
    return nodes, w


def _merge_pieces(pj, owner, nsteps):
    """Combine consecutive pieces belonging to the same step."""
    if owner.size == nsteps:
        return pj
    first = np.searchsorted(owner, np.arange(nsteps))
    count = np.diff(np.append(first, owner.size))
    steps = tuple(j[first].copy() for j in pj)
    for k in range(1, int(count.max())):
        sel = np.nonzero(count > k)[0]
        nxt = tuple(j[first[sel] + k] for j in pj)
        cur = tuple(s[sel] for s in steps)
        for s, v in zip(steps, _compose(nxt, cur)):
            s[sel] = v
    return steps
