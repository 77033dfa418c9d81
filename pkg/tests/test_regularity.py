import math

import numpy as np
import pytest

import oracles
from halfline.errors import DomainError
from halfline.potential import Free, PotentialSpec, free, kronig_penney, mathieu
from halfline.regularity import bound_holds, growth_exponent, high_energy_bound_check, log_norms

LS = np.geomspace(100.0, 1000.0, 8)


def test_log_norms_free_closed_form():
    got = log_norms(free(), 1.0, LS)
    assert np.allclose(got, np.log([oracles.free_diagonal(1.0, L) for L in LS]), atol=1e-8)


def test_log_norms_below_spectrum_no_overflow():
    got = log_norms(free(), -1.0, [50.0, 500.0, 1000.0])
    ref = [oracles.free_log_norm_below(-1.0, L) for L in (50.0, 500.0, 1000.0)]
    assert np.allclose(got, ref, rtol=1e-9)


def test_log_norms_nondecreasing():
    got = log_norms(mathieu(), 0.7, np.linspace(1.0, 200.0, 40))
    assert np.all(np.diff(got) >= 0)


def test_free_slope_matches_closed_form():
    g = growth_exponent(free(), 1.0, LS)
    ref = np.log([oracles.free_diagonal(1.0, L) for L in LS])
    k = LS.size - LS.size // 2
    ref_slope = np.polyfit(LS[-k:], ref[-k:], 1)[0]
    assert g.slope == pytest.approx(ref_slope, abs=1e-9)
    assert not g.exponential


def test_below_spectrum_slope_two():
    g = growth_exponent(free(), -1.0, LS)
    assert g.slope == pytest.approx(2.0, rel=1e-6)
    assert g.exponential


def test_kronig_penney_dichotomy():
    kp = kronig_penney(1.0, 1.0, 2.0)
    band = growth_exponent(kp, 0.5 * (0.479207835956 + 2.643754324781), LS)
    gap = growth_exponent(kp, 0.5 * (2.643754324781 + 3.280108723938), LS)
    assert band.slope <= 1e-2 and not band.exponential
    assert gap.slope >= 0.1 and gap.exponential


def test_growth_input_validation():
    with pytest.raises(DomainError):
        growth_exponent(free(), 1.0, [100.0, 200.0, 300.0])
    with pytest.raises(DomainError):
        growth_exponent(free(), 1.0, [100.0, 200.0, 300.0, 400.0])


def test_high_energy_bound_examples():
    lhs, rhs = high_energy_bound_check(free(), 4.0, 10.0)
    assert lhs == pytest.approx(1.0) and rhs >= 1.0 and bound_holds(lhs, rhs)
    lhs, rhs = high_energy_bound_check(PotentialSpec(Free(), None, 1.0), 100.0, 10.0)
    assert lhs == pytest.approx(1.0, abs=1e-9)
    assert rhs == pytest.approx(math.e, rel=1e-9)
    lhs, rhs = high_energy_bound_check(mathieu(), 100.0, 50.0)
    assert bound_holds(lhs, rhs) and rhs > 2 * lhs


def test_high_energy_bound_domain():
    with pytest.raises(DomainError):
        high_energy_bound_check(free(), -1.0, 10.0)
