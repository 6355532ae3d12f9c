import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, special

from oamqkd import hilbert
from oamqkd.hilbert import AnnulusSpec, Basis, Dimension, RadialProfileSet

ODD_D = st.sampled_from([3, 5, 7, 9, 15])


def test_dimension_rejects_even_and_nonpositive():
    for bad in (0, -3, 4, 8):
        with pytest.raises(ValueError):
            Dimension(bad)
    assert Dimension(7).N == 3
    assert list(Dimension(7).indices) == [-3, -2, -1, 0, 1, 2, 3]


def test_position_out_of_range():
    with pytest.raises(IndexError):
        Dimension(7).position(4)
    with pytest.raises(IndexError):
        hilbert.oam_state(-4, 7)


def test_state_vector_normalisation_enforced():
    with pytest.raises(ValueError):
        hilbert.StateVector(Dimension(3), np.array([1, 1, 0]))


def test_oam_state_is_standard_basis_vector():
    s = hilbert.oam_state(2, 7)
    assert s.amplitude(2) == 1
    assert np.count_nonzero(s.amplitudes) == 1


def test_ang_state_equal_amplitudes():
    s = hilbert.ang_state(0, 7)
    np.testing.assert_allclose(np.abs(s.amplitudes), 1 / np.sqrt(7), atol=1e-15)
    np.testing.assert_allclose(s.amplitudes, 1 / np.sqrt(7), atol=1e-15)


def test_overlap_dimension_mismatch():
    with pytest.raises(ValueError):
        hilbert.overlap(hilbert.oam_state(0, 3), hilbert.oam_state(0, 5))


def test_same_basis_measurement_is_deterministic():
    for b in Basis:
        p = hilbert.detection_probabilities(hilbert.basis_state(b, 1, 7), b)
        expected = np.zeros(7)
        expected[1 + 3] = 1
        np.testing.assert_allclose(p, expected, atol=1e-12)


def test_d3_ang_matches_hand_written_dft():
    w = np.exp(2j * np.pi / 3)
    ell = np.array([-1, 0, 1])
    for n in (-1, 0, 1):
        np.testing.assert_allclose(hilbert.ang_state(n, 3).amplitudes, w ** (n * ell) / np.sqrt(3), atol=1e-15)


@given(ODD_D)
@settings(max_examples=20, deadline=None)
def test_mutual_unbiasedness(d):
    assert hilbert.verify_mub(d) < 1e-12


@given(ODD_D)
@settings(max_examples=20, deadline=None)
def test_ang_gram_is_identity(d):
    m = hilbert.basis_matrix(Basis.ANG, d)
    np.testing.assert_allclose(m.conj() @ m.T, np.eye(d), atol=1e-12)


@given(ODD_D, st.data())
@settings(max_examples=40, deadline=None)
def test_mismatched_basis_gives_uniform_outcomes(d, data):
    N = (d - 1) // 2
    idx = data.draw(st.integers(-N, N))
    sent_basis = data.draw(st.sampled_from(list(Basis)))
    p = hilbert.detection_probabilities(hilbert.basis_state(sent_basis, idx, d), Basis(1 - sent_basis))
    np.testing.assert_allclose(p, 1 / d, atol=1e-12)


@given(ODD_D, st.integers(0, 2**32 - 1))
@settings(max_examples=30, deadline=None)
def test_born_probabilities_sum_to_one(d, seed):
    rng = np.random.default_rng(seed)
    v = rng.normal(size=d) + 1j * rng.normal(size=d)
    state = hilbert.StateVector(Dimension(d), v / np.linalg.norm(v))
    for b in Basis:
        assert abs(hilbert.detection_probabilities(state, b).sum() - 1) < 1e-12


# -- annulus detection ----------------------------------------------------------


def _lg_profiles(d, grid):
    """Normalised p=0 Laguerre-Gauss radial amplitudes with unit waist."""
    rows = []
    for ell in Dimension(d).indices:
        L = abs(ell)
        rows.append(np.sqrt(2 / (np.pi * special.factorial(L))) * (np.sqrt(2) * grid) ** L * np.exp(-grid ** 2))
    return np.array(rows)


def _lg_fraction(L, a, b):
    # power of |LG_0^L|^2 between radii a and b
    return special.gammainc(L + 1, 2 * b * b) - special.gammainc(L + 1, 2 * a * a)


def test_radial_weights_integrate_polynomials_exactly():
    grid = np.linspace(0, 2, 11)
    w = hilbert.radial_weights(grid, AnnulusSpec(0.0, 2.0))
    assert abs(w.sum() - 2) < 1e-14
    assert abs(w @ grid - 2) < 1e-14
    # interior edges between nodes: linear integrand stays exact
    w = hilbert.radial_weights(grid, AnnulusSpec(0.33, 1.71))
    assert abs(w @ (3 * grid + 1) - ((1.5 * 1.71**2 + 1.71) - (1.5 * 0.33**2 + 0.33))) < 1e-13


def test_radial_weights_reject_annulus_outside_grid():
    with pytest.raises(ValueError):
        hilbert.radial_weights(np.linspace(0, 1, 5), AnnulusSpec(0.5, 2.0))


def test_annulus_spec_validation():
    with pytest.raises(ValueError):
        AnnulusSpec(1.0, 0.5)
    with pytest.raises(ValueError):
        AnnulusSpec(-0.1, 0.5)


@pytest.mark.parametrize("a,b", [(0.0, 6.0), (0.4, 1.1), (0.9, 2.5)])
def test_oam_annulus_matches_incomplete_gamma(a, b):
    d = 5
    grid = np.linspace(0, 6, 20001)
    prof = RadialProfileSet(Dimension(d), grid, _lg_profiles(d, grid))
    expected = np.mean([_lg_fraction(abs(ell), a, b) for ell in Dimension(d).indices])
    assert abs(hilbert.annulus_probability_oam(prof, AnnulusSpec(a, b)) - expected) < 1e-6


def test_ang_annulus_matches_direct_double_integral_d3():
    d, a, b = 3, 0.3, 1.4
    grid = np.linspace(0, 6, 20001)
    prof = RadialProfileSet(Dimension(d), grid, _lg_profiles(d, grid))
    ells = Dimension(d).indices

    def lg(L, r):
        return np.sqrt(2 / (np.pi * special.factorial(L))) * (np.sqrt(2) * r) ** L * np.exp(-r * r)

    total = 0.0
    for n in ells:
        def density(phi, r, n=n):
            field = sum(lg(abs(l), r) * np.exp(1j * l * phi) * np.exp(2j * np.pi * n * l / d) for l in ells)
            return abs(field) ** 2 / d * r
        val, _ = integrate.dblquad(density, a, b, 0, 2 * np.pi, epsabs=1e-11, epsrel=1e-11)
        total += val
    assert abs(hilbert.annulus_probability_ang(prof, AnnulusSpec(a, b)) - total / d) < 1e-6


def test_ang_requires_enough_azimuthal_samples():
    rng = np.random.default_rng(0)
    prof = hilbert.random_profile_set(7, rng)
    with pytest.raises(ValueError):
        hilbert.annulus_probability_ang(prof, AnnulusSpec(0.1, 1.0), azimuthal_points=27)


def test_profiles_shape_checked():
    with pytest.raises(ValueError):
        RadialProfileSet(Dimension(3), np.linspace(0, 1, 5), np.zeros((3, 4)))
    with pytest.raises(ValueError):
        RadialProfileSet(Dimension(3), np.array([0, 1, 1, 2.0]), np.zeros((3, 4)))


def test_identical_profiles_give_equal_probabilities():
    grid = np.linspace(0, 5, 500)
    row = grid * np.exp(-grid ** 2)
    prof = RadialProfileSet(Dimension(7), grid, np.tile(row, (7, 1)))
    ann = AnnulusSpec(0.2, 1.3)
    assert abs(hilbert.annulus_probability_ang(prof, ann) - hilbert.annulus_probability_oam(prof, ann)) < 1e-12


def test_zero_width_region_probability_zero():
    rng = np.random.default_rng(1)
    prof = hilbert.random_profile_set(5, rng)
    ann = AnnulusSpec(2.0, 2.0 + 1e-13)
    assert abs(hilbert.annulus_probability_oam(prof, ann)) < 1e-9


@given(st.integers(0, 2**32 - 1), ODD_D)
@settings(max_examples=25, deadline=None)
def test_annulus_identity_property(seed, d):
    rng = np.random.default_rng(seed)
    prof = hilbert.random_profile_set(d, rng, points=200)
    ann = hilbert.random_annulus(prof.grid, rng)
    assert abs(hilbert.annulus_probability_ang(prof, ann) - hilbert.annulus_probability_oam(prof, ann)) < 1e-9
