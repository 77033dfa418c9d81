import math

import numpy as np
import pytest

from halfline.errors import ConfigError, DomainError, IntegrationOverflowError
from halfline.potential import PotentialSpec, Free, free, kronig_penney, mathieu, LogDecay
from halfline.propagate import (
    IntegratorConfig,
    monodromy,
    propagate,
    simpson_nodes,
    solution_trace,
    step_bound,
)


def test_free_closed_form():
    xi = np.array([0.25, 1.0, 7.3])
    st = propagate(free(), xi, 10.0, deriv=2)
    k = np.sqrt(xi)
    assert np.allclose(st.u, np.cos(10 * k), atol=1e-13)
    assert np.allclose(st.uprime, -k * np.sin(10 * k), atol=1e-13)
    assert np.allclose(st.y, np.sin(10 * k) / k, atol=1e-13)
    # du/dxi of cos(sqrt(xi) L)
    assert np.allclose(st.du_dxi, -np.sin(10 * k) * 10 / (2 * k), atol=1e-12)


def test_below_spectrum_cosh():
    st = propagate(free(), -1.0, 5.0)
    assert st.u == pytest.approx(math.cosh(5.0), rel=1e-13)
    assert st.uprime == pytest.approx(math.sinh(5.0), rel=1e-13)


def test_zero_energy_free():
    st = propagate(free(), 0.0, 3.0)
    assert st.u == pytest.approx(1.0)
    assert st.y == pytest.approx(3.0)


def test_constant_potential_is_exact_on_smooth_path():
    # a trig base with only the constant term goes through the Magnus path
    from halfline.potential import TrigPeriodic

    spec = PotentialSpec(TrigPeriodic((1.0,), 1.0))
    st = propagate(spec, 5.0, 7.0)
    assert st.u == pytest.approx(math.cos(2.0 * 7.0), abs=1e-12)


def test_wronskian_long_range():
    spec = mathieu()
    st = propagate(spec, np.linspace(-0.37, -0.35, 6), 500 * 2 * math.pi, deriv=2)
    assert np.max(np.abs(st.wronskian - 1.0)) < 1e-8


def test_xi_derivatives_match_finite_differences():
    spec = mathieu(perturbation=LogDecay(0.5))
    xi, L, h = 0.7, 25.0, 1e-5
    st = propagate(spec, np.array([xi - h, xi, xi + h]), L, deriv=2)
    fd1 = (st.u[2] - st.u[0]) / (2 * h)
    fd2 = (st.u[2] - 2 * st.u[1] + st.u[0]) / h**2
    assert st.du_dxi[1] == pytest.approx(fd1, rel=1e-6)
    assert st.d2u_dxi2[1] == pytest.approx(fd2, rel=1e-4)


def test_fourth_order_convergence():
    spec = mathieu()
    vals = [propagate(spec, 0.7, 30.0, IntegratorConfig(refine=r)).u for r in (1, 2, 4)]
    d1, d2 = abs(vals[0] - vals[1]), abs(vals[1] - vals[2])
    assert 10 < d1 / d2 < 22


def test_richardson_estimate_reported():
    st = propagate(mathieu(), 0.7, 30.0, IntegratorConfig(richardson_check=True))
    assert st.richardson_error is not None and st.richardson_error < 1e-7


def test_piecewise_exact_matches_refined_magnus():
    spec = kronig_penney(1.0, 1.0, 2.0)
    a = propagate(spec, 5.0, 20.0)
    b = propagate(spec, 5.0, 20.0, IntegratorConfig(refine=8))
    assert a.u == pytest.approx(b.u, abs=1e-12)


def test_step_policy():
    spec = mathieu()
    assert step_bound(spec, 1.0) == pytest.approx(min(2 * math.pi / 200, 0.1 / math.sqrt(2.0)))
    with pytest.raises(ConfigError):
        propagate(spec, 1.0, 10.0, IntegratorConfig(step=1.0))


def test_trace_matches_endpoint():
    spec = mathieu(perturbation=LogDecay(1.0))
    tr = solution_trace(spec, [-0.36, 1.2], 30.0, deriv=1)
    st = propagate(spec, [-0.36, 1.2], 30.0, deriv=1)
    assert np.allclose(tr.u[-1], st.u, atol=1e-12)
    assert np.allclose(tr.du_dxi[-1], st.du_dxi, atol=1e-10)
    assert tr.x[0] == 0.0 and tr.x[-1] == 30.0


def test_simpson_nodes_respect_breakpoints():
    spec = kronig_penney(1.0, 0.7, 2.0)
    nodes, w = simpson_nodes(spec, 0.0, 4.0, 10)
    assert w.sum() == pytest.approx(4.0)
    for bp in (0.7, 2.7):
        assert np.min(np.abs(nodes - bp)) < 1e-12


def test_monodromy_needs_period():
    with pytest.raises(DomainError):
        monodromy(free(), 1.0)
    M = monodromy(free(math.pi), 1.0)
    assert M.trace == pytest.approx(2 * math.cos(math.pi), abs=1e-13)
    assert M.det == pytest.approx(1.0, abs=1e-13)


def test_overflow_raises():
    with pytest.raises(IntegrationOverflowError):
        propagate(free(), -4.0, 400.0)


def test_negative_length_rejected():
    with pytest.raises(DomainError):
        propagate(free(), 1.0, -1.0)
