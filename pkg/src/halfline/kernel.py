"""The reproducing kernel S_L(xi, beta) = int_0^L u(xi, t) u(beta, t) dt.

Three evaluation routes are provided and cross-checked in the tests:

* quadrature of sampled solutions (piecewise Simpson with one Richardson
  step),
* the Christoffel-Darboux quotient
  (u(a, L) u'(b, L) - u(b, L) u'(a, L)) / (a - b) from endpoint states,
* on the diagonal, u' du/dxi - du'/dxi u from the variational solution.

Near the diagonal the quotient cancels catastrophically, so for
``|a - b| < 1e-6 (1 + |a|)`` it is replaced by the diagonal value plus the
first-order Taylor term, both taken at the smaller energy so the result is
exactly symmetric.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .errors import DomainError, OrderingError
from .potential import PotentialSpec, free
from .propagate import (
    IntegratorConfig,
    SolutionState,
    _resolve_step,
    make_grid,
    propagate,
    simpson_nodes,
    trace_on_nodes,
)

__all__ = [
    "KernelValue",
    "SpectralWeightModel",
    "MeasureKernel",
    "ReproduceResult",
    "near_diagonal_threshold",
    "kernel_quadrature",
    "kernel_quadrature_matrix",
    "kernel_cd",
    "kernel_diagonal",
    "kernel_matrix",
    "kernel_row",
    "christoffel_function",
    "lubinsky_gap",
    "lubinsky_holds",
    "reproduce_check",
    "reproduce_outside",
    "pin_weight_constant",
]

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class KernelValue:
    xi: float
    beta: float
    L: float
    value: float
    method: str
    err_estimate: float


def near_diagonal_threshold(xi):
    return 1e-6 * (1.0 + np.abs(xi))


def _check_L(L):
    if not L > 0:
        raise DomainError(f"kernel needs L > 0, got {L!r}")


# ---------------------------------------------------------------- endpoint formulas


def _diag_from_state(st: SolutionState):
    a = st.uprime * st.du_dxi
    b = st.duprime_dxi * st.u
    return a - b, 4 * _EPS * (np.abs(a) + np.abs(b))


def _diag_slope(st: SolutionState):
    """d/dxi S_L(xi, xi) / 2 = dS_L(xi, beta)/dbeta at beta = xi."""
    return 0.5 * (st.uprime * st.d2u_dxi2 - st.d2uprime_dxi2 * st.u)


def _pair_values(st: SolutionState, i, j):
    """S_L for index pairs (i, j) of energies in one propagated state."""
    xi = np.atleast_1d(st.xi)
    u, up = np.atleast_1d(st.u), np.atleast_1d(st.uprime)
    diag, diag_err = _diag_from_state(st)
    diag, diag_err = np.atleast_1d(diag), np.atleast_1d(diag_err)
    lo = np.where(xi[i] <= xi[j], i, j)
    hi = np.where(xi[i] <= xi[j], j, i)
    d = xi[lo] - xi[hi]
    near = np.abs(d) < near_diagonal_threshold(xi[lo])
    num1 = u[lo] * up[hi]
    num2 = u[hi] * up[lo]
    with np.errstate(divide="ignore", invalid="ignore"):
        cd = (num1 - num2) / d
        cd_err = 4 * _EPS * (np.abs(num1) + np.abs(num2)) / np.abs(d)
    val = np.where(near, 0.0, cd)
    err = np.where(near, 0.0, cd_err)
    method = np.where(near, "diagonal-variational", "christoffel-darboux")
    if np.any(near):
        slope = np.atleast_1d(_diag_slope(st)) if st.d2u_dxi2 is not None else np.zeros_like(diag)
        taylor = diag[lo] + (xi[hi] - xi[lo]) * slope[lo]
        val = np.where(near, taylor, val)
        err = np.where(near, diag_err[lo], err)
    return val, err, method


def kernel_row(spec: PotentialSpec, xi: float, zetas, L: float, cfg: IntegratorConfig | None = None):
    """Vector S_L(xi, zeta_j) from one propagation."""
    _check_L(L)
    z = np.atleast_1d(np.asarray(zetas, dtype=float))
    st = propagate(spec, np.concatenate([[xi], z]), L, cfg, deriv=2)
    j = np.arange(1, z.size + 1)
    val, _, _ = _pair_values(st, np.zeros_like(j), j)
    return val


def kernel_matrix(spec: PotentialSpec, energies, L: float, cfg: IntegratorConfig | None = None):
    """Full matrix S_L(e_i, e_j) by the endpoint formulas (one propagation)."""
    _check_L(L)
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    st = propagate(spec, e, L, cfg, deriv=2)
    i, j = np.meshgrid(np.arange(e.size), np.arange(e.size), indexing="ij")
    val, _, _ = _pair_values(st, i.ravel(), j.ravel())
    return val.reshape(e.size, e.size)


def kernel_cd(spec: PotentialSpec, xi: float, beta: float, L: float,
              cfg: IntegratorConfig | None = None) -> KernelValue:
    """Christoffel-Darboux evaluation; dispatches to the diagonal formula when xi == beta."""
    _check_L(L)
    if xi == beta:
        kv = kernel_diagonal(spec, xi, L, cfg)
        return KernelValue(xi, beta, L, kv.value, "diagonal-variational", kv.err_estimate)
    lo, hi = min(xi, beta), max(xi, beta)
    cfg = cfg or IntegratorConfig()
    st = propagate(spec, np.array([lo, hi]), L, cfg, deriv=2)
    val, err, method = _pair_values(st, np.array([0]), np.array([1]))
    value, err = float(val[0]), float(err[0])
    if cfg.richardson_check:
        fine = propagate(spec, np.array([lo, hi]), L, IntegratorConfig(
            step=cfg.step, refine=2 * cfg.refine, max_samples=cfg.max_samples), deriv=2)
        fval = float(_pair_values(fine, np.array([0]), np.array([1]))[0][0])
        err += abs(fval - value) / 15.0
        value = fval
    return KernelValue(xi, beta, L, value, str(method[0]), err)


def kernel_diagonal(spec: PotentialSpec, xi: float, L: float,
                    cfg: IntegratorConfig | None = None) -> KernelValue:
    """S_L(xi, xi) = u'(xi, L) du/dxi(xi, L) - du'/dxi(xi, L) u(xi, L)."""
    _check_L(L)
    cfg = cfg or IntegratorConfig()
    st = propagate(spec, float(xi), L, cfg, deriv=1)
    value, err = _diag_from_state(st)
    value, err = float(value), float(err)
    if cfg.richardson_check:
        fine = propagate(spec, float(xi), L, IntegratorConfig(
            step=cfg.step, refine=2 * cfg.refine, max_samples=cfg.max_samples), deriv=1)
        fval = float(_diag_from_state(fine)[0])
        err += abs(fval - value) / 15.0
        value = fval
    return KernelValue(xi, xi, L, value, "diagonal-variational", err)


# ---------------------------------------------------------------- quadrature


def _simpson_gram(spec, energies, L, n_steps, cfg):
    nodes, w = simpson_nodes(spec, 0.0, L, n_steps)
    tr = trace_on_nodes(spec, energies, nodes, 0, cfg=cfg)
    U = tr.u
    return (U * w[:, None]).T @ U


def kernel_quadrature_matrix(spec: PotentialSpec, energies, L: float,
                             cfg: IntegratorConfig | None = None):
    """Gram matrix int_0^L u(e_i) u(e_j) dt and its refinement error estimate.

    Simpson on the integrator grid (h) and on the doubled grid (2h) are
    combined by one Richardson step; the estimate is |S_h - S_2h| / 15.
    """
    _check_L(L)
    cfg = cfg or IntegratorConfig()
    e = np.atleast_1d(np.asarray(energies, dtype=float))
    n = make_grid(L, _resolve_step(spec, e, cfg))
    fine = _simpson_gram(spec, e, L, n, cfg)
    coarse = _simpson_gram(spec, e, L, n // 2, cfg)
    diff = (fine - coarse) / 15.0
    return fine + diff, np.abs(diff)


def kernel_quadrature(spec: PotentialSpec, xi: float, beta: float, L: float,
                      cfg: IntegratorConfig | None = None) -> KernelValue:
    _check_L(L)
    S, err = kernel_quadrature_matrix(spec, np.array([xi, beta]), L, cfg)
    return KernelValue(xi, beta, L, float(S[0, 1]), "quadrature", float(err[0, 1]))


def christoffel_function(spec: PotentialSpec, xi: float, L: float,
                         cfg: IntegratorConfig | None = None) -> float:
    """lambda_L(xi) = 1 / S_L(xi, xi).

    This is the minimum of the L2(mu) norm over the kernel space subject to
    Q(xi) = 1, attained by Q = S_L(., xi) / S_L(xi, xi).
    """
    if not L > 0:
        raise DomainError("Christoffel function needs L > 0")
    return 1.0 / kernel_diagonal(spec, xi, L, cfg).value


# ---------------------------------------------------------------- measure pairs


@dataclass(frozen=True)
class MeasureKernel:
    """Kernel evaluator for the scaled spectral measure ``scale * mu``.

    Scaling the measure by s divides u by sqrt(s), so every kernel value is
    divided by s.
    """

    spec: PotentialSpec
    scale: float = 1.0
    cfg: IntegratorConfig | None = None

    def __post_init__(self):
        if not self.scale > 0:
            raise OrderingError("measure scale must be positive")

    def __call__(self, xi: float, beta: float, L: float) -> float:
        return kernel_cd(self.spec, xi, beta, L, self.cfg).value / self.scale

    def values(self, energies, L: float):
        return kernel_matrix(self.spec, energies, L, self.cfg) / self.scale


def lubinsky_gap(S_mu: Callable, S_mustar: Callable, xi: float, beta: float, L: float):
    """Both sides of |S - S*| / S(xi,xi) <= sqrt(S(b,b)/S(xi,xi)) sqrt(1 - S*(xi,xi)/S(xi,xi)).

    When both evaluators are :class:`MeasureKernel` of the same operator the
    ordering mu <= mu* is checked (scale ratio >= 1).
    """
    if isinstance(S_mu, MeasureKernel) and isinstance(S_mustar, MeasureKernel):
        if S_mu.spec != S_mustar.spec:
            raise OrderingError("only scalar multiples of one spectral measure are supported")
        if S_mustar.scale < S_mu.scale:
            raise OrderingError(
                f"mu* = {S_mustar.scale / S_mu.scale:g} * mu does not dominate mu (need s >= 1)"
            )
    sxx = S_mu(xi, xi, L)
    sbb = S_mu(beta, beta, L)
    sxb = S_mu(xi, beta, L)
    star_xb = S_mustar(xi, beta, L)
    star_xx = S_mustar(xi, xi, L)
    lhs = abs(sxb - star_xb) / sxx
    rhs = math.sqrt(sbb / sxx) * math.sqrt(max(0.0, 1.0 - star_xx / sxx))
    return lhs, rhs


def lubinsky_holds(lhs: float, rhs: float, atol: float = 1e-12) -> bool:
    return lhs <= rhs + atol


# ---------------------------------------------------------------- reproducing property


@dataclass(frozen=True)
class SpectralWeightModel:
    """Free Neumann spectral density w(xi) = c_w / sqrt(xi) on (0, inf)."""

    c_w: float
    kind: str = "free-neumann"

    def __post_init__(self):
        if self.kind != "free-neumann":
            raise DomainError(f"unsupported weight model {self.kind!r}")
        if not self.c_w > 0:
            raise DomainError("c_w must be positive")

    def __call__(self, xi):
        return self.c_w / np.sqrt(xi)


@dataclass(frozen=True)
class ReproduceResult:
    residual: float
    integral: float
    target: float
    tail_estimate: float


def _reproducing_integral(xi, x, L, xi_max, cfg, dk=None):
    """2 int_0^K S_L(xi, k^2) cos(k x) dk with K = sqrt(xi_max) (weight constant 1)."""
    K = math.sqrt(xi_max)
    if dk is None:
        dk = min(0.005, 2 * math.pi / (L + x) / 40.0)
    n = 2 * int(math.ceil(K / dk / 2))
    k = np.linspace(0.0, K, n + 1)
    S = kernel_row(free(), xi, k * k, L, cfg)
    f = 2.0 * S * np.cos(k * x)
    return float(simpson(f, x=k))


def _tail_bound(c_w, xi, x, L, xi_max):
    K = math.sqrt(xi_max)
    gap = abs(L - x)
    if gap == 0 or K <= math.sqrt(xi):
        return math.inf
    return 4.0 * c_w / ((K - math.sqrt(xi)) * gap)


def reproduce_check(weight: SpectralWeightModel, xi: float, x: float, L: float, xi_max: float,
                    cfg: IntegratorConfig | None = None) -> ReproduceResult:
    """Residual of int_0^xi_max S_L(xi, z) cos(sqrt(z) x) w(z) dz against cos(sqrt(xi) x).

    The substitution z = k**2 turns the integrand into the smooth
    oscillatory 2 c_w S_L(xi, k^2) cos(k x), integrated by composite Simpson.
    ``tail_estimate`` bounds the part of the integral beyond ``xi_max``
    (first integration-by-parts term).
    """
    if not 0 <= x < L:
        raise DomainError(f"reproduce_check needs 0 <= x < L, got x={x!r}, L={L!r}; "
                          "use reproduce_outside for x > L")
    if not xi_max > xi:
        raise DomainError("xi_max must exceed xi")
    integral = weight.c_w * _reproducing_integral(xi, x, L, xi_max, cfg)
    target = math.cos(math.sqrt(xi) * x)
    return ReproduceResult(abs(integral - target), integral, target,
                           _tail_bound(weight.c_w, xi, x, L, xi_max))


def reproduce_outside(weight: SpectralWeightModel, xi: float, x: float, L: float, xi_max: float,
                      cfg: IntegratorConfig | None = None) -> ReproduceResult:
    """Same integral for x > L, where the reproduced function vanishes."""
    if not x > L:
        raise DomainError(f"reproduce_outside needs x > L, got x={x!r}, L={L!r}")
    if not xi_max > xi:
        raise DomainError("xi_max must exceed xi")
    integral = weight.c_w * _reproducing_integral(xi, x, L, xi_max, cfg)
    return ReproduceResult(abs(integral), integral, 0.0,
                           _tail_bound(weight.c_w, xi, x, L, xi_max))


def pin_weight_constant(xi: float, L: float, xi_max: float, x_samples=None,
                        cfg: IntegratorConfig | None = None) -> float:
    """Least-squares c_w making the reproducing identity hold at ``x_samples`` in (0, L)."""
    if x_samples is None:
        x_samples = np.linspace(0.25 * L, 0.75 * L, 21)
    xs = np.asarray(x_samples, dtype=float)
    if np.any(xs >= L) or np.any(xs < 0):
        raise DomainError("pinning samples must lie in [0, L)")
    I = np.array([_reproducing_integral(xi, x, L, xi_max, cfg) for x in xs])
    t = np.cos(math.sqrt(xi) * xs)
    return float(I @ t / (I @ I))
