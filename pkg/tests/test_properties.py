import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from halfline.clock import clock_report
from halfline.config import parse_config
from halfline.kernel import MeasureKernel, kernel_cd, kernel_diagonal, lubinsky_gap, lubinsky_holds
from halfline.potential import LogDecay, PotentialSpec, TrigPeriodic, evaluate, free, mathieu, periodic_part
from halfline.propagate import propagate
from halfline.regularity import log_norms
from halfline.universality import free_limit, sinc_reference

SETTINGS = settings(max_examples=25, deadline=None)
energies = st.floats(0.5, 10.0)
lengths = st.floats(1.0, 50.0)


@SETTINGS
@given(energies, energies, lengths)
def test_cd_symmetry(xi, beta, L):
    spec = mathieu(perturbation=LogDecay(0.5))
    assert kernel_cd(spec, xi, beta, L).value == kernel_cd(spec, beta, xi, L).value


@SETTINGS
@given(energies, energies, lengths)
def test_free_kernel_closed_form(xi, beta, L):
    got = kernel_cd(free(), xi, beta, L).value
    ref = float(oracles.free_kernel(xi, beta, L))
    assert abs(got - ref) <= 1e-8 * (1 + abs(ref))


@SETTINGS
@given(st.floats(-2.0, 10.0), st.floats(1e-3, 40.0))
def test_diagonal_positive(xi, L):
    assert kernel_diagonal(mathieu(), xi, L).value > 0


@SETTINGS
@given(st.sampled_from([1.0, 2.0, 10.0]), energies, energies, lengths)
def test_scaling_law_and_lubinsky(s, xi, beta, L):
    S, Ss = MeasureKernel(free()), MeasureKernel(free(), s)
    assert np.array_equal(Ss.values([xi, beta], L), S.values([xi, beta], L) / s)
    lhs, rhs = lubinsky_gap(S, Ss, xi, beta, L)
    assert lubinsky_holds(lhs, rhs)


@SETTINGS
@given(st.floats(0.1, 100.0), st.floats(0.5, 1e4))
def test_wronskian_free(xi, L):
    w = propagate(free(), xi, L, deriv=0).wronskian
    assert abs(float(w) - 1.0) <= 1e-8


@SETTINGS
@given(st.floats(0.1, 100.0), st.floats(0.5, 300.0))
def test_wronskian_periodic(xi, L):
    # inside gaps u and y grow exponentially; rounding then scales with u y'
    s = propagate(mathieu(), xi, L, deriv=0)
    scale = abs(float(s.u * s.yprime)) + abs(float(s.uprime * s.y))
    assert abs(float(s.wronskian) - 1.0) <= 1e-8 * max(1.0, 1e-4 * scale)


@SETTINGS
@given(st.floats(0.1, 20.0), st.floats(-3.0, 3.0))
def test_sinc_at_equal_offsets(rho, a):
    assert sinc_reference(rho, a, a) == 1.0
    assert free_limit(1.0 + rho, a, a) == 1.0


@SETTINGS
@given(st.floats(0.1, 5.0), st.floats(0.1, 10.0), st.floats(-2.0, 2.0), st.integers(1, 6))
def test_clock_toy_spacing(rho, L, start, n_range):
    zeros = start + np.arange(-n_range - 3, n_range + 4) / (L * rho)
    rep = clock_report(zeros, rho, L, start, n_range)
    assert rep.max_deviation < 1e-9


@SETTINGS
@given(st.floats(-1.0, 4.0), st.lists(st.floats(1.0, 80.0), min_size=2, max_size=6, unique=True))
def test_log_norms_nondecreasing(xi, Ls):
    got = log_norms(mathieu(), xi, sorted(Ls))
    assert np.all(np.diff(got) >= 0)


@SETTINGS
@given(st.floats(0.5, 10.0), st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=3), st.floats(0.0, 30.0))
def test_periodicity(P, coeffs, x):
    spec = PotentialSpec(TrigPeriodic(tuple(coeffs), P))
    assert abs(periodic_part(spec, x + P) - periodic_part(spec, x)) <= 1e-12 * (1 + sum(map(abs, coeffs)))


@SETTINGS
@given(st.floats(0.5, 10.0), st.lists(st.floats(-3.0, 3.0), min_size=1, max_size=3),
       st.sampled_from(["none", "log", "power"]), st.floats(0.1, 2.0))
def test_config_round_trip(P, coeffs, pert, amp):
    text = (
        "[potential]\nbase = trig\n"
        f"period = {P!r}\ncos_coeffs = {', '.join(map(repr, coeffs))}\n"
        f"perturbation = {pert}\n"
        + (f"perturbation_amplitude = {amp!r}\nperturbation_exponent = 1.5\n" if pert != "none" else "")
        + "[experiment]\nkind = bands\nxi_max = 5\n"
    )
    cfg = parse_config(text)
    again = parse_config(cfg.text)
    assert again.potential == cfg.potential and again.sha256 == cfg.sha256
    xs = np.linspace(0, 3 * P, 7)
    assert np.array_equal(evaluate(again.potential, xs), evaluate(cfg.potential, xs))


def test_free_kernel_symmetric_grid():
    xs = np.linspace(0.5, 10, 6)
    for a in xs:
        for b in xs:
            assert math.isclose(kernel_cd(free(), a, b, 10.0).value, kernel_cd(free(), b, a, 10.0).value)
