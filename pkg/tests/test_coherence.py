import math

import numpy as np
import pytest

from schmidtbench.coherence import (
    SQUARE,
    ApertureSpec,
    aperture_mask,
    coherence_matrix,
    filtered_g2,
)
from schmidtbench.exceptions import DomainError
from schmidtbench.kernel import (
    KernelParams,
    build_kernel,
    centered_grid,
    decompose,
    product_basis,
)
from schmidtbench.spectrum import gain_transform, schmidt_number


@pytest.fixture(scope="module")
def basis():
    params = KernelParams(phase_matching_width_um=115.0 / 4.0)
    _, signal, _ = decompose(build_kernel(params), max_modes=6)
    return product_basis(signal)


@pytest.fixture(scope="module")
def gained(basis):
    return gain_transform(basis.spectrum, 2.0)


@pytest.fixture
def grid():
    return centered_grid(256, 5.0)


def test_circular_mask_area(grid):
    aperture = ApertureSpec(diameter_mm=0.4)
    ix, iy, mask = aperture_mask(grid, grid, aperture)
    area = mask.sum() * 5.0**2
    assert area == pytest.approx(math.pi * 200.0**2, rel=0.01)
    assert mask.max() == 1.0
    assert mask.min() >= 0.0


def test_square_mask_is_exact(grid):
    aperture = ApertureSpec(diameter_mm=0.1235, shape=SQUARE)
    _, _, mask = aperture_mask(grid, grid, aperture)
    assert mask.sum() * 5.0**2 == pytest.approx(123.5**2, rel=1e-12)


def test_mask_offset(grid):
    aperture = ApertureSpec(diameter_mm=0.1, center_um=(200.0, -100.0))
    ix, iy, mask = aperture_mask(grid, grid, aperture)
    x = np.average(grid[ix], weights=mask.sum(axis=1))
    y = np.average(grid[iy], weights=mask.sum(axis=0))
    assert x == pytest.approx(200.0, abs=0.5)
    assert y == pytest.approx(-100.0, abs=0.5)


@pytest.mark.parametrize(
    "kwargs",
    [{"diameter_mm": 0}, {"diameter_mm": 1.0, "shape": "hexagon"}],
)
def test_invalid_aperture(kwargs):
    with pytest.raises(DomainError):
        ApertureSpec(**kwargs)


def test_no_aperture(basis, gained):
    coherence = coherence_matrix(basis, gained)
    expected = np.sort(gained.weights * gained.total_photons)[::-1]
    np.testing.assert_allclose(
        coherence.eigenvalues,
        expected,
        rtol=1e-7,
        atol=1e-12 * gained.total_photons,
    )
    assert coherence.transmitted_fraction == pytest.approx(1.0, rel=1e-9)

    prediction = filtered_g2(basis, gained, temporal_K=3.1)
    K = schmidt_number(gained.weights)
    assert prediction.spatial_schmidt_number == pytest.approx(K, rel=1e-9)
    assert prediction.g2_auto == pytest.approx(1 + 1 / (3.1 * K), rel=1e-9)
    assert not prediction.low_signal


def test_wide_aperture_transmits_everything(basis, gained):
    open_beam = filtered_g2(basis, gained)
    wide = filtered_g2(basis, gained, ApertureSpec(diameter_mm=10.0))
    assert wide.transmitted_fraction == pytest.approx(1.0, abs=1e-9)
    assert wide.g2_auto == pytest.approx(open_beam.g2_auto, rel=1e-9)


def test_trace_grows_with_diameter(basis, gained):
    traces = [
        coherence_matrix(basis, gained, ApertureSpec(diameter_mm=d)).trace
        for d in (0.02, 0.05, 0.1, 0.2, 0.5)
    ]
    assert np.all(np.diff(traces) > 0)
    assert traces[-1] <= gained.total_photons * (1 + 1e-9)


def test_small_aperture_reduces_mode_number(basis, gained):
    open_beam = filtered_g2(basis, gained)
    pinhole = filtered_g2(basis, gained, ApertureSpec(diameter_mm=0.01))
    assert pinhole.spatial_schmidt_number < open_beam.spatial_schmidt_number
    assert pinhole.g2_auto > open_beam.g2_auto
    assert pinhole.g2_auto <= 2.0


def test_coherence_is_hermitian(basis, gained):
    aperture = ApertureSpec(diameter_mm=0.08, center_um=(20.0, 0.0))
    coherence = coherence_matrix(basis, gained, aperture)
    matrix = coherence.matrix
    np.testing.assert_array_equal(matrix, matrix.conj().T)
    assert np.all(coherence.eigenvalues >= 0)
    assert coherence.eigenvalues.sum() == pytest.approx(
        coherence.trace, rel=1e-9
    )


def test_mismatched_weights(basis):
    other = gain_transform(
        product_basis(decompose(build_kernel(KernelParams()), 2)[1]).spectrum,
        1.0,
    )
    with pytest.raises(DomainError):
        coherence_matrix(basis, other)


def test_overflowing_photon_number(basis):
    with pytest.raises(DomainError):
        coherence_matrix(basis, gain_transform(basis.spectrum, 1e3))
