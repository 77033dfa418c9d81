import math

import numpy as np
import pytest

import oracles
from halfline.errors import DomainError, EdgeProximityError
from halfline.floquet import (
    density_of_states,
    discriminant,
    dos_table,
    find_bands,
    floquet_phase,
)
from halfline.potential import free, kronig_penney, mathieu


@pytest.fixture(scope="module")
def mathieu_bands():
    return find_bands(mathieu(), 6.5)


@pytest.fixture(scope="module")
def kp_bands():
    return find_bands(kronig_penney(1.0, 1.0, 2.0), 42.0)


def test_oracles_reproduce_frozen_values():
    kp = oracles.kp_band_edges(8)
    assert np.allclose(kp, np.ravel(oracles.KP_BANDS), atol=1e-11)
    assert np.allclose(oracles.mathieu_bands(5), oracles.MATHIEU_BANDS, atol=1e-14)


def test_mathieu_edges_against_characteristic_values(mathieu_bands):
    got = np.array(mathieu_bands.bands[:5])
    assert np.allclose(got, oracles.MATHIEU_BANDS, atol=1e-7)
    assert not any(mathieu_bands.closed[:4])


def test_kronig_penney_edges_against_dispersion_relation(kp_bands):
    got = np.array(kp_bands.bands[:4])
    assert np.allclose(got, oracles.KP_BANDS, atol=1e-10)


def test_discriminant_matches_closed_form():
    xs = np.array([0.3, 1.7, 5.0, 12.5])
    got = discriminant(kronig_penney(1.0, 1.0, 2.0), xs)
    assert np.allclose(got, [oracles.kp_discriminant(x) for x in xs], atol=1e-11)


def test_free_periodic_view_has_closed_gaps():
    bs = find_bands(free(math.pi), 9.5)
    assert np.allclose(np.array(bs.bands[:3]), [(0, 1), (1, 4), (4, 9)], atol=1e-7)
    assert all(bs.closed[:2])
    assert floquet_phase(bs, 0.25) == pytest.approx(math.pi / 2, abs=1e-9)
    assert floquet_phase(bs, 2.25) == pytest.approx(1.5 * math.pi, abs=1e-9)


def test_free_density_closed_form():
    bs = find_bands(free(1.0), 25.0)
    xs = np.linspace(0.5, 20.0, 25)
    assert np.allclose(density_of_states(bs, xs), oracles.free_density(xs), atol=1e-8)


def test_phase_gains_pi_per_band(mathieu_bands, kp_bands):
    for bs in (mathieu_bands, kp_bands):
        for l, r in bs.bands[:4]:
            assert floquet_phase(bs, r) - floquet_phase(bs, l) == pytest.approx(math.pi, abs=1e-6)


def test_phase_monotone_and_density_positive(mathieu_bands):
    l, r = mathieu_bands.bands[1]
    xs = np.linspace(l + 1e-3, r - 1e-3, 40)
    th = floquet_phase(mathieu_bands, xs)
    assert np.all(np.diff(th) > 0)
    assert np.all(density_of_states(mathieu_bands, xs) > 0)


def test_gap_and_edge_errors(mathieu_bands):
    l0, r0 = mathieu_bands.bands[0]
    with pytest.raises(DomainError, match="gap"):
        mathieu_bands.band_index(0.0)
    with pytest.raises(DomainError, match="below"):
        mathieu_bands.band_index(-2.0)
    with pytest.raises(EdgeProximityError):
        density_of_states(mathieu_bands, r0 - 1e-9)


def test_dos_table_shape(kp_bands):
    t = dos_table(kp_bands, 10)
    assert t.shape[1] == 3 and t.shape[0] >= 30
    assert np.all(np.diff(t[:, 1]) > 0)


def test_mid_band_density_of_first_mathieu_band(mathieu_bands):
    l, r = mathieu_bands.bands[0]
    rho = density_of_states(mathieu_bands, 0.5 * (l + r))
    # the discriminant is almost linear across this narrow band, so the phase
    # is an arccos of a linear function and rho(mid) = 2 / (pi P width)
    assert rho == pytest.approx(2.0 / (math.pi * 2 * math.pi * (r - l)), rel=2e-2)
