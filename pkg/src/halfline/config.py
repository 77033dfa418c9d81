"""INI experiment configs: parsing, validation and canonical serialization.

Four sections are recognised::

    [potential]     base, period, cos_coeffs, sin_coeffs, breakpoints, values,
                    perturbation, perturbation_amplitude, perturbation_exponent,
                    energy_shift, shift_to_spectrum_bottom
    [integrator]    step, refine, richardson_check, max_samples
    [experiment]    kind plus the keys of that kind (see EXPERIMENT_KEYS)
    [output]        directory, format, precision

Unknown sections or keys are errors.  Energies in ``[experiment]`` may be
written as ``mid-band:N`` to mean the midpoint of band N of the periodic
background.
"""
from __future__ import annotations

import configparser
import hashlib
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .potential import Free, LogDecay, PiecewisePeriodic, PotentialSpec, PowerDecay, TrigPeriodic
from .propagate import IntegratorConfig

__all__ = ["ExperimentConfig", "EXPERIMENT_KEYS", "load_config", "parse_config", "parse_list"]

POTENTIAL_KEYS = {
    "base", "period", "cos_coeffs", "sin_coeffs", "breakpoints", "values", "perturbation",
    "perturbation_amplitude", "perturbation_exponent", "energy_shift", "shift_to_spectrum_bottom",
}
INTEGRATOR_KEYS = {"step", "refine", "richardson_check", "max_samples"}
OUTPUT_KEYS = {"directory", "format", "precision"}

# required keys first, then optional keys with their documented defaults
EXPERIMENT_KEYS = {
    "bands": ({"xi_max"}, {"scan_step": None}),
    "dos": ({"xi_max"}, {"points_per_band": "50"}),
    "kernel": ({"energies", "lengths"}, {"methods": "christoffel-darboux, quadrature"}),
    "universality": ({"xi0", "lengths"}, {"offset_bound": "2", "offset_points": "9", "max_error": None}),
    "clock": ({"xi_star", "length"}, {"n_range": "5", "boundary": "both", "max_deviation": None}),
    "regularity": ({"energies", "lengths"}, {}),
    "free-check": (set(), {}),
}
KINDS = tuple(EXPERIMENT_KEYS)


@dataclass(frozen=True)
class ExperimentConfig:
    potential: PotentialSpec
    integrator: IntegratorConfig
    kind: str
    params: dict
    output_dir: str = "."
    fmt: str = "csv"
    precision: int = 17
    shift_to_bottom: bool = False
    text: str = field(default="", compare=False)

    @property
    def sha256(self) -> str:
        return hashlib.sha256(self.text.encode()).hexdigest()


def parse_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(section, key, text):
    try:
        return tuple(float(t) for t in parse_list(text))
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: expected a comma-separated list of numbers ({exc})") from None


def _float(section, key, text):
    try:
        return float(text)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: expected a number, got {text!r}") from None


def _bool(section, key, text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: expected a boolean, got {text!r}")


def _check_keys(cp, section, allowed):
    if not cp.has_section(section):
        return {}
    items = dict(cp.items(section))
    unknown = sorted(set(items) - set(allowed))
    if unknown:
        raise ConfigError(f"[{section}] unknown key(s): {', '.join(unknown)}")
    return items


def _potential(items) -> tuple[PotentialSpec, bool]:
    s = "potential"
    base_kind = items.get("base", "free").strip().lower()
    period = _float(s, "period", items["period"]) if "period" in items else None
    if base_kind == "free":
        base = Free(period)
    elif base_kind == "trig":
        if period is None:
            raise ConfigError("[potential] period is required for a trig base")
        base = TrigPeriodic(_floats(s, "cos_coeffs", items.get("cos_coeffs", "")), period,
                            _floats(s, "sin_coeffs", items.get("sin_coeffs", "")))
    elif base_kind == "piecewise":
        if period is None:
            raise ConfigError("[potential] period is required for a piecewise base")
        for key in ("breakpoints", "values"):
            if key not in items:
                raise ConfigError(f"[potential] {key} is required for a piecewise base")
        base = PiecewisePeriodic(_floats(s, "breakpoints", items["breakpoints"]),
                                 _floats(s, "values", items["values"]), period)
    else:
        raise ConfigError(f"[potential] base must be free, trig or piecewise, got {base_kind!r}")
    pert_kind = items.get("perturbation", "none").strip().lower()
    amp = _float(s, "perturbation_amplitude", items.get("perturbation_amplitude", "1"))
    if pert_kind == "none":
        pert = None
    elif pert_kind == "log":
        pert = LogDecay(amp)
    elif pert_kind == "power":
        if "perturbation_exponent" not in items:
            raise ConfigError("[potential] perturbation_exponent is required for a power perturbation")
        pert = PowerDecay(amp, _float(s, "perturbation_exponent", items["perturbation_exponent"]))
    else:
        raise ConfigError(f"[potential] perturbation must be none, log or power, got {pert_kind!r}")
    shift = _float(s, "energy_shift", items.get("energy_shift", "0"))
    to_bottom = _bool(s, "shift_to_spectrum_bottom", items.get("shift_to_spectrum_bottom", "false"))
    if to_bottom and base.period is None:
        raise ConfigError("[potential] shift_to_spectrum_bottom needs a periodic base")
    return PotentialSpec(base, pert, shift), to_bottom


def _integrator(items) -> IntegratorConfig:
    s = "integrator"
    kw = {}
    if "step" in items:
        kw["step"] = _float(s, "step", items["step"])
    if "refine" in items:
        kw["refine"] = int(_float(s, "refine", items["refine"]))
    if "richardson_check" in items:
        kw["richardson_check"] = _bool(s, "richardson_check", items["richardson_check"])
    if "max_samples" in items:
        kw["max_samples"] = int(_float(s, "max_samples", items["max_samples"]))
    return IntegratorConfig(**kw)


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse INI text.  ``kind`` (from a subcommand) fills or must match [experiment] kind."""
    cp = configparser.ConfigParser(interpolation=None, default_section="__none__",
                                   inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    unknown = sorted(set(cp.sections()) - {"potential", "integrator", "experiment", "output"})
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(unknown)}")
    spec, to_bottom = _potential(_check_keys(cp, "potential", POTENTIAL_KEYS))
    integ = _integrator(_check_keys(cp, "integrator", INTEGRATOR_KEYS))

    exp = dict(cp.items("experiment")) if cp.has_section("experiment") else {}
    declared = exp.pop("kind", None)
    if kind is not None and declared is not None and declared.strip() != kind:
        raise ConfigError(f"[experiment] kind = {declared} does not match subcommand {kind!r}")
    kind = kind or (declared.strip() if declared else None)
    if kind not in EXPERIMENT_KEYS:
        raise ConfigError(f"[experiment] kind must be one of {', '.join(KINDS)}, got {kind!r}")
    required, optional = EXPERIMENT_KEYS[kind]
    extra = sorted(set(exp) - required - set(optional))
    if extra:
        raise ConfigError(f"[experiment] unknown key(s) for {kind}: {', '.join(extra)}")
    missing = sorted(required - set(exp))
    if missing:
        raise ConfigError(f"[experiment] missing key(s) for {kind}: {', '.join(missing)}")
    params = {k: v for k, v in optional.items() if v is not None}
    params.update(exp)

    out = _check_keys(cp, "output", OUTPUT_KEYS)
    fmt = out.get("format", "csv").strip().lower()
    if fmt not in ("csv", "json"):
        raise ConfigError(f"[output] format must be csv or json, got {fmt!r}")
    precision = int(_float("output", "precision", out.get("precision", "17")))
    if not 1 <= precision <= 17:
        raise ConfigError("[output] precision must be between 1 and 17")

    resolved = configparser.ConfigParser(interpolation=None, default_section="__none__")
    for sec in ("potential", "integrator"):
        resolved[sec] = dict(cp.items(sec)) if cp.has_section(sec) else {}
    resolved["experiment"] = {"kind": kind, **dict(sorted(params.items()))}
    resolved["output"] = {"format": fmt, "precision": str(precision)}
    buf = io.StringIO()
    resolved.write(buf)
    return ExperimentConfig(spec, integ, kind, params, out.get("directory", "."), fmt, precision,
                            to_bottom, buf.getvalue().strip())


def load_config(path: str, kind: str | None = None) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, kind)
