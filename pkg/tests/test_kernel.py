import math

import numpy as np
import pytest

import oracles
from halfline.errors import DomainError, OrderingError
from halfline.kernel import (
    MeasureKernel,
    SpectralWeightModel,
    christoffel_function,
    kernel_cd,
    kernel_diagonal,
    kernel_matrix,
    kernel_quadrature,
    kernel_quadrature_matrix,
    lubinsky_gap,
    lubinsky_holds,
    pin_weight_constant,
    reproduce_check,
    reproduce_outside,
)
from halfline.potential import LogDecay, free, kronig_penney, mathieu


def test_free_diagonal_value():
    v = kernel_diagonal(free(), 1.0, 10.0)
    assert v.value == pytest.approx(5 + math.sin(20) / 4, rel=1e-12)
    assert v.value == pytest.approx(5.22824, abs=5e-6)
    assert v.method == "diagonal-variational"


def test_free_offdiagonal_value():
    expected = math.sin(-10) / (-2) + math.sin(30) / 6
    assert expected == pytest.approx(-0.4367, abs=5e-5)
    assert kernel_cd(free(), 1.0, 4.0, 10.0).value == pytest.approx(expected, rel=1e-12)
    assert kernel_quadrature(free(), 1.0, 4.0, 10.0).value == pytest.approx(expected, rel=1e-8)


def test_cd_dispatches_on_diagonal():
    a = kernel_cd(mathieu(), 0.7, 0.7, 20.0)
    b = kernel_diagonal(mathieu(), 0.7, 20.0)
    assert a.method == "diagonal-variational" and a.value == b.value


def test_cd_symmetric_exactly():
    spec = mathieu(perturbation=LogDecay(1.0))
    assert kernel_cd(spec, 0.6, 0.8, 40.0).value == kernel_cd(spec, 0.8, 0.6, 40.0).value


def test_near_diagonal_branch_is_accurate():
    L = 10.0
    for d in (1e-12, 1e-9, 1e-7):
        v = kernel_cd(free(), 2.0, 2.0 + d, L)
        assert v.method == "diagonal-variational"
        assert v.value == pytest.approx(float(oracles.free_kernel(2.0, 2.0 + d, L)), rel=1e-11)
    v = kernel_cd(free(), 2.0, 2.0 + 1e-5, L)
    assert v.method == "christoffel-darboux"


@pytest.mark.parametrize("spec", [mathieu(), mathieu(perturbation=LogDecay(1.0)), kronig_penney(1.0, 1.0, 2.0)])
def test_methods_agree(spec):
    e = np.array([0.62, 0.75, 0.9, 1.5, 2.1])
    cd = kernel_matrix(spec, e, 60.0)
    quad, err = kernel_quadrature_matrix(spec, e, 60.0)
    assert np.max(np.abs(cd - quad) / (1 + np.abs(quad))) < 1e-6
    assert np.all(err <= 1e-6 * (1 + np.abs(quad)))


def test_positivity_and_christoffel():
    assert kernel_diagonal(mathieu(), -0.36, 0.5).value > 0
    lam = christoffel_function(free(), 1.0, 10.0)
    assert lam == pytest.approx(0.191269, abs=5e-7)
    lams = [christoffel_function(mathieu(), 0.7, L) for L in (10.0, 20.0, 40.0)]
    assert lams[0] > lams[1] > lams[2]
    assert christoffel_function(free(), 1.0, 1e4) * 1e4 == pytest.approx(2.0, rel=1e-3)


def test_zero_length_rejected():
    with pytest.raises(DomainError):
        christoffel_function(free(), 1.0, 0.0)
    with pytest.raises(DomainError):
        kernel_quadrature(free(), 1.0, 2.0, 0.0)


def test_short_length_tends_to_zero():
    assert abs(kernel_quadrature(mathieu(), 0.5, 1.0, 1e-3).value) < 2e-3


def test_lubinsky_examples():
    S1, S2 = MeasureKernel(free()), MeasureKernel(free(), 2.0)
    lhs, rhs = lubinsky_gap(S1, S2, 1.0, 1.0, 10.0)
    assert lhs == pytest.approx(0.5) and rhs == pytest.approx(math.sqrt(0.5))
    lhs, rhs = lubinsky_gap(S1, S1, 1.0, 4.0, 10.0)
    assert lhs == 0.0 and rhs == 0.0
    lhs, rhs = lubinsky_gap(S1, S2, 1.0, 4.0, 10.0)
    s11, s44, s14 = (float(oracles.free_kernel(a, b, 10.0)) for a, b in ((1, 1), (4, 4), (1, 4)))
    assert lhs == pytest.approx(abs(s14) / (2 * s11), rel=1e-10)
    assert rhs == pytest.approx(math.sqrt(s44 / s11) * math.sqrt(0.5), rel=1e-10)
    assert lubinsky_holds(lhs, rhs)


def test_lubinsky_ordering_violation():
    with pytest.raises(OrderingError):
        lubinsky_gap(MeasureKernel(free(), 2.0), MeasureKernel(free(), 1.0), 1.0, 2.0, 5.0)


def test_scaling_law_exact():
    S = MeasureKernel(mathieu())
    S3 = MeasureKernel(mathieu(), 3.0)
    e = [0.62, 0.8]
    assert np.array_equal(S3.values(e, 20.0), S.values(e, 20.0) / 3.0)


def test_weight_constant_is_one_over_pi():
    c = pin_weight_constant(1.0, 10.0, 400.0)
    assert c == pytest.approx(1 / math.pi, rel=1e-3)


def test_reproducing_property():
    w = SpectralWeightModel(1 / math.pi)
    r = reproduce_check(w, 1.0, 2.0, 10.0, 400.0)
    assert r.residual <= 5e-2
    assert r.target == pytest.approx(math.cos(2.0))
    r2 = reproduce_check(w, 1.0, 2.0, 10.0, 800.0)
    assert r2.residual <= r.residual + r.tail_estimate
    out = reproduce_outside(w, 1.0, 12.0, 10.0, 400.0)
    assert out.residual <= 5e-2 and out.target == 0.0


def test_reproduce_domain():
    w = SpectralWeightModel(1.0)
    with pytest.raises(DomainError):
        reproduce_check(w, 1.0, 12.0, 10.0, 400.0)
    with pytest.raises(DomainError):
        reproduce_outside(w, 1.0, 2.0, 10.0, 400.0)
    with pytest.raises(DomainError):
        SpectralWeightModel(-1.0)
