"""Aperture filtering of multimode thermal light through the first-order
coherence matrix in the Schmidt basis."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from schmidtbench.exceptions import ComputationError, DomainError
from schmidtbench.spectrum import (
    TAIL_CUTOFF,
    CorrelationPrediction,
    g2_auto,
    g2_cross,
    normalize,
    schmidt_number,
)
from schmidtbench.utils import wrap_exceptions

logger = logging.getLogger(__name__)

CIRCULAR = "circular"
SQUARE = "square"
SHAPES = (CIRCULAR, SQUARE)

UM_PER_MM = 1e3

SUPERSAMPLING = 8

HERMITIAN_TOLERANCE = 1e-10
PSD_TOLERANCE = 1e-10
LOW_SIGNAL_FRACTION = 1e-9


@dataclass(frozen=True)
class ApertureSpec:
    diameter_mm: float
    center_um: tuple = (0.0, 0.0)
    shape: str = CIRCULAR

    def __post_init__(self):
        if not self.diameter_mm > 0:
            raise DomainError("aperture diameter must be positive")
        if self.shape not in SHAPES:
            raise DomainError(f"unknown aperture shape {self.shape!r}")
        cx, cy = self.center_um
        object.__setattr__(self, "center_um", (float(cx), float(cy)))

    @property
    def radius_um(self):
        return self.diameter_mm * UM_PER_MM / 2.0


@dataclass(frozen=True, eq=False)
class CoherenceMatrix:
    """Hermitian positive semi-definite matrix ``C_mn`` of the detected
    field in the truncated Schmidt basis; its trace is the mean number of
    transmitted photons."""

    matrix: np.ndarray
    eigenvalues: np.ndarray
    total_photons: float

    @property
    def trace(self):
        return float(np.real(np.trace(self.matrix)))

    @property
    def transmitted_fraction(self):
        return self.trace / self.total_photons

    def effective_spectrum(self, *, cutoff=TAIL_CUTOFF):
        if not self.eigenvalues.max() > 0:
            return normalize([1.0])
        return normalize(self.eigenvalues, label="spatial", cutoff=cutoff)


def _window(grid, centre, half_width):
    step = grid[1] - grid[0]
    return np.flatnonzero(np.abs(grid - centre) <= half_width + step)


def _square_coverage(cells, step, centre, side):
    lower = np.maximum(cells - step / 2, centre - side / 2)
    upper = np.minimum(cells + step / 2, centre + side / 2)
    return np.clip(upper - lower, 0.0, None) / step


def aperture_mask(grid_x, grid_y, aperture):
    """Fractional cell coverage of an aperture on a rectangular grid.

    Returns ``(ix, iy, mask)`` where ``ix`` and ``iy`` index the grid
    window around the aperture and ``mask[i, j]`` is the covered fraction
    of cell ``(ix[i], iy[j])``. Cells crossed by a circular edge are
    supersampled.
    """
    cx, cy = aperture.center_um
    radius = aperture.radius_um
    ix = _window(grid_x, cx, radius)
    iy = _window(grid_y, cy, radius)
    x, y = grid_x[ix], grid_y[iy]
    step = float(grid_x[1] - grid_x[0])

    if aperture.shape == SQUARE:
        side = 2 * radius
        mask = np.outer(
            _square_coverage(x, step, cx, side),
            _square_coverage(y, step, cy, side),
        )
        return ix, iy, mask

    distance = np.hypot(*np.meshgrid(x - cx, y - cy, indexing="ij"))
    half_diagonal = step / math.sqrt(2)
    mask = (distance + half_diagonal <= radius).astype(float)
    edge = np.abs(distance - radius) < half_diagonal
    rows, cols = np.nonzero(edge)
    if len(rows):
        fractions = (np.arange(SUPERSAMPLING) + 0.5) / SUPERSAMPLING
        offsets = (fractions - 0.5) * step
        sub_x = (x[rows] - cx)[:, None, None] + offsets[None, :, None]
        sub_y = (y[cols] - cy)[:, None, None] + offsets[None, None, :]
        inside = sub_x**2 + sub_y**2 <= radius**2
        mask[rows, cols] = inside.mean(axis=(1, 2))
    return ix, iy, mask


def _overlaps(basis, aperture):
    """``<Psi_m|P|Psi_n>`` for the 2-D product modes of ``basis``."""
    axis = basis.axis
    modes, grid, step = axis.modes, axis.grid, axis.step
    count = len(axis)
    ix, iy, mask = aperture_mask(grid, grid, aperture)

    ux, uy = modes[:, ix], modes[:, iy]
    fx = (ux.conj()[:, None, :] * ux[None, :, :]).reshape(count**2, -1)
    fy = (uy.conj()[:, None, :] * uy[None, :, :]).reshape(count**2, -1)
    # table[(a, c), (b, d)] = sum_xy conj(psi_a psi_b) P psi_c psi_d
    table = (fx @ mask @ fy.T) * step**2
    table = table.reshape(count, count, count, count).transpose(0, 2, 1, 3)
    table = table.reshape(count**2, count**2)

    flat = basis.pairs[:, 0] * count + basis.pairs[:, 1]
    return table[np.ix_(flat, flat)]


def _gram(basis):
    """``<Psi_m|Psi_n>`` over the whole plane."""
    gram = basis.axis.gram()
    first, second = basis.pairs[:, 0], basis.pairs[:, 1]
    return gram[np.ix_(first, first)] * gram[np.ix_(second, second)]


@wrap_exceptions
def coherence_matrix(basis, gained, aperture=None):
    """Build ``C_mn = sqrt(w_m w_n) N <Psi_m|P|Psi_n>``.

    ``basis`` is a :class:`~schmidtbench.kernel.ProductBasis` and
    ``gained`` the gained state of its spectrum, index-aligned with it.
    Without an aperture ``P`` is the identity and the overlaps are the
    Gram matrix of the (possibly propagated) modes.
    """
    if len(gained.weights) != len(basis):
        raise DomainError(
            f"{len(gained.weights)} weights for a basis of {len(basis)} modes"
        )
    if not math.isfinite(gained.total_photons):
        raise DomainError("total photon number overflows a double")

    total = gained.total_photons
    amplitudes = np.sqrt(gained.weights)
    if aperture is None:
        overlaps = _gram(basis)
    else:
        overlaps = _overlaps(basis, aperture)
    matrix = total * amplitudes[:, None] * overlaps * amplitudes[None, :]

    scale = max(float(np.abs(matrix).max()), np.finfo(float).tiny)
    asymmetry = float(np.abs(matrix - matrix.conj().T).max()) / scale
    if asymmetry > HERMITIAN_TOLERANCE:
        raise ComputationError(
            f"coherence matrix is not Hermitian (deviation {asymmetry:.2e})"
        )
    matrix = (matrix + matrix.conj().T) / 2

    eigenvalues = scipy.linalg.eigvalsh(matrix)[::-1]
    if eigenvalues[-1] < -PSD_TOLERANCE * max(eigenvalues[0], 0.0):
        raise ComputationError(
            f"coherence matrix has a negative eigenvalue {eigenvalues[-1]:.3e}"
        )
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return CoherenceMatrix(matrix, eigenvalues, total)


def prediction_from_coherence(coherence, temporal_K=1.0):
    trace = coherence.trace
    fraction = coherence.transmitted_fraction
    low_signal = fraction < LOW_SIGNAL_FRACTION
    if low_signal:
        logger.warning(
            "only %.3e of the light passes the aperture; the prediction "
            "rests on a near-zero signal",
            fraction,
        )

    spatial_K = schmidt_number(coherence.effective_spectrum().weights)
    total_K = spatial_K * temporal_K
    photons_per_mode = trace / total_K
    cross = (
        g2_cross(total_K, photons_per_mode)
        if photons_per_mode > 0
        else math.inf
    )
    return CorrelationPrediction(
        schmidt_number=total_K,
        g2_auto=g2_auto(total_K),
        g2_cross=cross,
        photons_per_mode=photons_per_mode,
        spatial_schmidt_number=spatial_K,
        transmitted_fraction=fraction,
        low_signal=low_signal,
    )


def filtered_g2(basis, gained, aperture=None, temporal_K=1.0):
    """Auto-correlation of the detected beam behind an optional aperture.

    The transmitted light is thermal in the eigenmodes of the coherence
    matrix, so its spatial mode number is the Schmidt number of the
    normalized eigenvalues; the temporal modes multiply it.
    """
    coherence = coherence_matrix(basis, gained, aperture)
    return prediction_from_coherence(coherence, temporal_K)
