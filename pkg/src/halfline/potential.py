"""Declarative potentials V(x) = p(x) + q(x) + shift on the half-line.

The periodic background ``p`` is one of three bases, the perturbation ``q``
is drawn from families whose running average of ``|q|`` provably tends to
zero, and a constant energy shift is added on top.  Everything is immutable,
so a spec can be hashed, serialized into a config file and shared between
workers.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import ConfigError, DomainError

__all__ = [
    "Free",
    "TrigPeriodic",
    "PiecewisePeriodic",
    "PowerDecay",
    "LogDecay",
    "PotentialSpec",
    "evaluate",
    "periodic_part",
    "perturbation_part",
    "average_decay",
    "mathieu",
    "kronig_penney",
    "free",
]


@dataclass(frozen=True)
class Free:
    """Zero background.  ``period`` may be declared to view it as periodic."""

    period: float | None = None

    def __post_init__(self):
        if self.period is not None and not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period!r}")


@dataclass(frozen=True)
class TrigPeriodic:
    """p(x) = sum_k a_k cos(2 pi k x / P) + sum_k b_k sin(2 pi k x / P).

    ``cos_coeffs[0]`` is the constant term; ``sin_coeffs[k-1]`` multiplies
    the k-th sine harmonic.
    """

    cos_coeffs: tuple[float, ...]
    period: float
    sin_coeffs: tuple[float, ...] = ()

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period!r}")
        object.__setattr__(self, "cos_coeffs", tuple(float(c) for c in self.cos_coeffs))
        object.__setattr__(self, "sin_coeffs", tuple(float(c) for c in self.sin_coeffs))
        if not self.cos_coeffs and not self.sin_coeffs:
            raise ConfigError("trigonometric base needs at least one coefficient")


@dataclass(frozen=True)
class PiecewisePeriodic:
    """Piecewise-constant periodic background (Kronig-Penney type).

    ``values[i]`` holds on ``[breakpoints[i], breakpoints[i+1])`` and the last
    value runs up to ``period``.  The first breakpoint must be 0.
    """

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]
    period: float

    def __post_init__(self):
        if not self.period > 0:
            raise ConfigError(f"period must be positive, got {self.period!r}")
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        if len(bp) != len(vals) or not bp:
            raise ConfigError("breakpoints and values must be non-empty and of equal length")
        if bp[0] != 0.0:
            raise ConfigError("first breakpoint must be 0")
        if any(b1 <= b0 for b0, b1 in zip(bp, bp[1:])) or bp[-1] >= self.period:
            raise ConfigError("breakpoints must be strictly increasing within [0, period)")
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)


@dataclass(frozen=True)
class PowerDecay:
    """q(x) = amplitude * (1 + x)**(-exponent)."""

    amplitude: float
    exponent: float

    def __post_init__(self):
        if not self.exponent > 0:
            raise ConfigError(f"exponent must be positive, got {self.exponent!r}")


@dataclass(frozen=True)
class LogDecay:
    """q(x) = amplitude / (1 + x); its integral grows only logarithmically."""

    amplitude: float


Base = Union[Free, TrigPeriodic, PiecewisePeriodic]
Perturbation = Union[PowerDecay, LogDecay, None]


@dataclass(frozen=True)
class PotentialSpec:
    base: Base = field(default_factory=Free)
    perturbation: Perturbation = None
    energy_shift: float = 0.0

    def __post_init__(self):
        if not isinstance(self.base, (Free, TrigPeriodic, PiecewisePeriodic)):
            raise ConfigError(f"unsupported base {self.base!r}")
        if self.perturbation is not None and not isinstance(
            self.perturbation, (PowerDecay, LogDecay)
        ):
            raise ConfigError(
                f"unsupported perturbation {self.perturbation!r}; only decaying families are allowed"
            )

    @property
    def period(self) -> float | None:
        return self.base.period

    @property
    def is_periodic(self) -> bool:
        return self.base.period is not None

    @property
    def is_piecewise_constant(self) -> bool:
        """True when V is constant between breakpoints (exact transfer matrices apply)."""
        return self.perturbation is None and isinstance(self.base, (Free, PiecewisePeriodic))

    @property
    def is_free(self) -> bool:
        return isinstance(self.base, Free) and self.perturbation is None and self.energy_shift == 0

    def background(self) -> "PotentialSpec":
        """The periodic operator obtained by dropping the perturbation."""
        return PotentialSpec(self.base, None, self.energy_shift)

    def sup_abs(self) -> float:
        """Upper bound on sup |V|, used by the step policy."""
        b = self.base
        if isinstance(b, TrigPeriodic):
            s = sum(abs(c) for c in b.cos_coeffs) + sum(abs(c) for c in b.sin_coeffs)
        elif isinstance(b, PiecewisePeriodic):
            s = max(abs(v) for v in b.values)
        else:
            s = 0.0
        if self.perturbation is not None:
            s += abs(self.perturbation.amplitude)
        return s + abs(self.energy_shift)

    def breakpoints_in(self, x0: float, x1: float) -> np.ndarray:
        """Discontinuities of V strictly inside (x0, x1)."""
        b = self.base
        if not isinstance(b, PiecewisePeriodic):
            return np.empty(0)
        P = b.period
        j0 = int(np.floor(x0 / P))
        j1 = int(np.ceil(x1 / P))
        cells = np.arange(j0, j1 + 1, dtype=float)[:, None] * P
        pts = (cells + np.asarray(b.breakpoints)[None, :]).ravel()
        return np.sort(pts[(pts > x0) & (pts < x1)])

    def min_background(self) -> float:
        """Approximate minimum of p + shift over one period."""
        b = self.base
        if isinstance(b, PiecewisePeriodic):
            return min(b.values) + self.energy_shift
        if isinstance(b, TrigPeriodic):
            x = np.linspace(0.0, b.period, 4097)
            return float(np.min(_trig(b, x))) + self.energy_shift
        return self.energy_shift


def _trig(b: TrigPeriodic, x):
    t = 2.0 * np.pi * np.mod(x, b.period) / b.period
    out = np.zeros_like(t)
    for k, a in enumerate(b.cos_coeffs):
        if a:
            out = out + a * np.cos(k * t)
    for k, s in enumerate(b.sin_coeffs, start=1):
        if s:
            out = out + s * np.sin(k * t)
    return out


def periodic_part(spec: PotentialSpec, x):
    """p(x), computed through x mod P."""
    x = np.asarray(x, dtype=float)
    b = spec.base
    if isinstance(b, TrigPeriodic):
        return _trig(b, x)
    if isinstance(b, PiecewisePeriodic):
        r = np.mod(x, b.period)
        idx = np.searchsorted(b.breakpoints, r, side="right") - 1
        return np.asarray(b.values)[np.clip(idx, 0, len(b.values) - 1)]
    return np.zeros_like(x)


def perturbation_part(spec: PotentialSpec, x):
    x = np.asarray(x, dtype=float)
    q = spec.perturbation
    if q is None:
        return np.zeros_like(x)
    if isinstance(q, PowerDecay):
        return q.amplitude * (1.0 + x) ** (-q.exponent)
    return q.amplitude / (1.0 + x)


def evaluate(spec: PotentialSpec, x):
    """V(x) = p(x) + q(x) + shift for scalar or array ``x >= 0``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or not np.all(np.isfinite(xa)):
        raise DomainError("potential is defined for finite x >= 0 only")
    v = periodic_part(spec, xa) + perturbation_part(spec, xa) + spec.energy_shift
    return float(v) if np.ndim(x) == 0 else v


def average_decay(spec: PotentialSpec, x: float, step: float | None = None) -> float:
    """Running average (1/x) * int_0^x |q(t)| dt by composite Simpson.

    The default grid spacing is the integrator's (0.1 / sqrt(1 + sup|V|)),
    refined so that at least 2000 panels cover ``[0, x]``.
    """
    if not x > 0:
        raise DomainError(f"average_decay needs x > 0, got {x!r}")
    if spec.perturbation is None:
        return 0.0
    from scipy.integrate import simpson

    h = step if step is not None else 0.1 / np.sqrt(1.0 + spec.sup_abs())
    n = max(2000, int(np.ceil(x / h)))
    n += n % 2
    t = np.linspace(0.0, x, n + 1)
    return float(simpson(np.abs(perturbation_part(spec, t)), x=t) / x)


def free(period: float | None = None) -> PotentialSpec:
    return PotentialSpec(Free(period))


def mathieu(amplitude: float = 1.0, perturbation: Perturbation = None, shift: float = 0.0) -> PotentialSpec:
    """p(x) = amplitude * cos(x) with period 2 pi."""
    return PotentialSpec(TrigPeriodic((0.0, amplitude), 2.0 * np.pi), perturbation, shift)


def kronig_penney(v0: float, width: float, period: float, perturbation: Perturbation = None) -> PotentialSpec:
    """V = v0 on [0, width), 0 on [width, period), repeated."""
    return PotentialSpec(PiecewisePeriodic((0.0, width), (v0, 0.0), period), perturbation)
