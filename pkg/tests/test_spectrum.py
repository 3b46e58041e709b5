import math

import numpy as np
import pytest

from schmidtbench.exceptions import (
    DomainError,
    InvalidGainError,
    InvalidSpectrumError,
)
from schmidtbench.spectrum import (
    SchmidtSpectrum,
    g2_auto,
    g2_cross,
    gain_transform,
    geometric_spectrum,
    normalize,
    predict_correlations,
    schmidt_number,
    schmidt_number_from_g2,
    spatial_schmidt_number,
    tensor_spectrum,
)


@pytest.mark.parametrize(
    "raw, expected",
    [([2, 2], [0.5, 0.5]), ([1], [1.0]), ([3, 1], [0.75, 0.25])],
)
def test_normalize(raw, expected):
    spectrum = normalize(raw)
    np.testing.assert_allclose(spectrum.weights, expected, rtol=1e-15)


def test_normalize_sorts_and_trims():
    spectrum = normalize([1e-14, 0.25, 0.0, 0.75])
    np.testing.assert_allclose(spectrum.weights, [0.75, 0.25])

    kept = normalize([1e-14, 0.25, 0.0, 0.75], cutoff=0)
    assert len(kept) == 3


@pytest.mark.parametrize("raw", [[], [0, 0], [1, -0.1], [1, np.nan]])
def test_normalize_invalid(raw):
    with pytest.raises(InvalidSpectrumError):
        normalize(raw)


def test_spectrum_invariants():
    with pytest.raises(InvalidSpectrumError):
        SchmidtSpectrum(np.array([0.5, 0.4]))

    with pytest.raises(InvalidSpectrumError):
        SchmidtSpectrum(np.array([0.25, 0.75]))

    spectrum = SchmidtSpectrum(np.array([0.75, 0.25]))
    with pytest.raises(ValueError):
        spectrum.weights[0] = 1.0


def test_gain_transform_single_mode():
    state = gain_transform(normalize([1]), 7.3)
    np.testing.assert_array_equal(state.weights, [1.0])
    assert state.total_photons == pytest.approx(math.sinh(7.3) ** 2)
    assert state.total_photons == pytest.approx(5.48e5, rel=1e-3)


@pytest.mark.parametrize("gain", [1e-3, 1.0, 7.3, 50.0])
def test_gain_transform_flat_fixed_point(gain):
    state = gain_transform(normalize([1, 1]), gain)
    np.testing.assert_allclose(state.weights, [0.5, 0.5], rtol=1e-14)


def test_gain_transform_low_gain_limit():
    state = gain_transform(normalize([0.6, 0.4]), 1e-4)
    np.testing.assert_allclose(state.weights, [0.6, 0.4], atol=1e-6)


def test_gain_transform_no_overflow():
    state = gain_transform(normalize([0.5, 0.3, 0.2]), 1e4)
    assert np.all(np.isfinite(state.weights))
    assert state.weights.sum() == pytest.approx(1.0, abs=1e-12)
    assert state.total_photons == math.inf
    assert schmidt_number(state) == pytest.approx(1.0)


@pytest.mark.parametrize("gain", [0, -1.0, math.inf, math.nan])
def test_gain_transform_invalid_gain(gain):
    with pytest.raises(InvalidGainError):
        gain_transform(normalize([1]), gain)


def test_gain_concentrates_modes():
    rng = np.random.default_rng(17)
    gains = np.linspace(0.5, 20.0, 12)
    for _ in range(20):
        spectrum = normalize(rng.random(rng.integers(2, 30)))
        numbers = [schmidt_number(gain_transform(spectrum, g)) for g in gains]
        assert np.all(np.diff(numbers) < 0)
        for g in gains:
            weights = gain_transform(spectrum, g).weights
            assert abs(weights.sum() - 1.0) <= 1e-12
            assert np.all(np.diff(weights) <= 0)


@pytest.mark.parametrize(
    "weights, expected", [([1.0], 1.0), ([0.5, 0.5], 2.0), ([0.75, 0.25], 1.6)]
)
def test_schmidt_number(weights, expected):
    assert schmidt_number(weights) == pytest.approx(expected, rel=1e-14)


def test_schmidt_number_rejects_unnormalized():
    with pytest.raises(InvalidSpectrumError):
        schmidt_number([0.5, 0.6])


@pytest.mark.parametrize(
    "K, expected", [(1, 2.0), (19.2, 1.052), (3.1, 1.3226)]
)
def test_g2_auto(K, expected):
    assert g2_auto(K) == pytest.approx(expected, abs=1e-4)


def test_g2_auto_domain():
    with pytest.raises(DomainError):
        g2_auto(0.5)


def test_g2_cross():
    assert g2_cross(1, 1) == pytest.approx(3.0)
    assert g2_cross(1, 1e12) == pytest.approx(2.0 + 1e-12, rel=1e-15)
    assert g2_cross(19.2, 1000) == pytest.approx(1.05213, abs=1e-5)

    with pytest.raises(DomainError):
        g2_cross(1, 0)


def test_tensor_spectrum():
    joint = tensor_spectrum(normalize([1]), normalize([1]))
    np.testing.assert_array_equal(joint.weights, [1.0])

    joint = tensor_spectrum(normalize([1, 1]), normalize([1, 1]))
    np.testing.assert_allclose(joint.weights, [0.25] * 4)
    assert joint.schmidt_number == pytest.approx(4.0)
    assert joint.label == "joint"


def test_tensor_spectrum_product_identity():
    spatial = geometric_spectrum(6.2, label="spatial")
    temporal = geometric_spectrum(3.1)
    joint = tensor_spectrum(spatial, temporal)
    expected = spatial.schmidt_number * temporal.schmidt_number
    assert joint.schmidt_number == pytest.approx(expected, rel=1e-9)
    assert joint.schmidt_number == pytest.approx(19.22, rel=1e-9)


def test_geometric_spectrum():
    spectrum = geometric_spectrum(3.1)
    assert spectrum.schmidt_number == pytest.approx(3.1, rel=1e-9)
    assert spectrum.label == "temporal"
    assert len(geometric_spectrum(1)) == 1

    with pytest.raises(DomainError):
        geometric_spectrum(0.9)


def test_predict_correlations():
    state = gain_transform(normalize([1, 1]), 2.0)
    prediction = predict_correlations(state, temporal_K=3.1)
    assert prediction.schmidt_number == pytest.approx(6.2)
    assert prediction.spatial_schmidt_number == pytest.approx(2.0)
    assert prediction.g2_auto == pytest.approx(1 + 1 / 6.2)
    assert prediction.g2_cross > prediction.g2_auto
    assert prediction.photons_per_mode == pytest.approx(
        state.total_photons / 6.2
    )


def test_schmidt_number_from_g2():
    K, error = schmidt_number_from_g2(1.052, 0.001)
    assert K == pytest.approx(19.23, abs=0.01)
    assert error == pytest.approx(0.37, abs=0.01)

    with pytest.raises(DomainError):
        schmidt_number_from_g2(1.0)


def test_spatial_schmidt_number():
    spatial, error = spatial_schmidt_number(19.2, 0.4, 3.1, 0.1)
    assert spatial == pytest.approx(6.19, abs=0.01)
    assert error == pytest.approx(0.24, abs=0.01)

    with pytest.raises(DomainError):
        spatial_schmidt_number(19.2, 0.4, 0.5)
