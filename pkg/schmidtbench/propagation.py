"""Transport of Schmidt modes through the 2f-2f collection optics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.fft

from schmidtbench.exceptions import AliasingError, DomainError
from schmidtbench.kernel import ARBITRARY_Z, CRYSTAL_OUTPUT, centered_grid
from schmidtbench.utils import wrap_exceptions

logger = logging.getLogger(__name__)

UM_PER_CM = 1e4

# Aliasing detector: energy within EDGE_POINTS of either boundary, relative
# to the mode energy.
EDGE_POINTS = 2
EDGE_TOLERANCE = 1e-4

# Grid sizing targets, far stricter than the detector above.
GUARD_FRACTION = 0.1
GUARD_TOLERANCE = 1e-10
BAND_TOLERANCE = 1e-12

MAX_POINTS = 2**18

_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class OpticalLayout:
    """A thin lens of focal length ``f`` placed ``lens_position_cm`` after
    the crystal output, observed between its focal plane and the image
    plane of the crystal. All positions are measured from the crystal."""

    focal_length_cm: float = 15.0
    lens_position_cm: float | None = None
    detection_range_cm: tuple | None = None

    def __post_init__(self):
        if not self.focal_length_cm > 0:
            raise DomainError("focal_length_cm must be positive")
        if self.lens_position_cm is None:
            object.__setattr__(
                self, "lens_position_cm", 2.0 * self.focal_length_cm
            )
        if not self.lens_position_cm > 0:
            raise DomainError("lens_position_cm must be positive")
        if self.detection_range_cm is None:
            lens, f = self.lens_position_cm, self.focal_length_cm
            object.__setattr__(
                self, "detection_range_cm", (lens + f, lens + 2.0 * f)
            )

        start, stop = self.detection_range_cm
        object.__setattr__(
            self, "detection_range_cm", (float(start), float(stop))
        )
        if not start < stop:
            raise DomainError("detection range endpoints must be ordered")
        if start <= self.lens_position_cm:
            raise DomainError("the detection range must lie after the lens")

    @property
    def focal_plane_cm(self):
        return self.lens_position_cm + self.focal_length_cm

    @property
    def image_plane_cm(self):
        """Plane conjugate to the crystal output (2f past a lens at 2f)."""
        f, lens = self.focal_length_cm, self.lens_position_cm
        if lens == f:
            return math.inf
        return lens + 1.0 / (1.0 / f - 1.0 / lens)

    def contains(self, z_cm):
        start, stop = self.detection_range_cm
        return start - _RANGE_SLACK <= z_cm <= stop + _RANGE_SLACK

    def positions(self, count):
        start, stop = self.detection_range_cm
        return np.linspace(start, stop, count)


def _pad(modes, points):
    current = modes.shape[1]
    if points == current:
        return modes.copy()

    offset = (points - current) // 2
    padded = np.zeros((len(modes), points), dtype=complex)
    padded[:, offset : offset + current] = modes
    return padded


def _free_space(fields, step, distance, wavenumber):
    """Paraxial free-space step with the angular-spectrum band limit.

    Returns the propagated fields and the largest fraction of mode energy
    that fell outside the band limit.
    """
    if distance == 0:
        return fields, 0.0

    points = fields.shape[1]
    q = 2 * np.pi * scipy.fft.fftfreq(points, d=step)
    wavelength = 2 * np.pi / wavenumber
    length = points * step
    f_limit = 1.0 / (wavelength * math.hypot(2.0 * distance / length, 1.0))
    inside = np.abs(q) <= 2 * np.pi * f_limit

    spectrum = scipy.fft.fft(fields, axis=1)
    power = np.abs(spectrum) ** 2
    lost = power[:, ~inside].sum(axis=1) / power.sum(axis=1)

    transfer = np.where(
        inside, np.exp(-1j * distance * q**2 / (2 * wavenumber)), 0
    )
    return scipy.fft.ifft(spectrum * transfer, axis=1), float(lost.max())


def _lens(fields, grid, focal_length, wavenumber):
    return fields * np.exp(-1j * wavenumber * grid**2 / (2 * focal_length))


def _edge_fraction(fields, width):
    power = np.abs(fields) ** 2
    edges = power[:, :width].sum(axis=1) + power[:, -width:].sum(axis=1)
    return float((edges / power.sum(axis=1)).max())


def _rms_widths(modes, grid, step):
    power = np.abs(modes) ** 2
    x_rms = np.sqrt((power * grid**2).sum(axis=1) / power.sum(axis=1))

    q = 2 * np.pi * scipy.fft.fftfreq(modes.shape[1], d=step)
    spectral = np.abs(scipy.fft.fft(modes, axis=1)) ** 2
    q_rms = np.sqrt((spectral * q**2).sum(axis=1) / spectral.sum(axis=1))
    return float(x_rms.max()), float(q_rms.max())


def _initial_points(basis, distances, wavenumber):
    # Minkowski bound on the beam size at the lens: |A| x_rms + |B| q_rms / k
    # with A = 1 and B = distance to the lens.
    x_rms, q_rms = _rms_widths(basis.modes, basis.grid, basis.step)
    half_extent = 8.0 * (x_rms + max(distances) * q_rms / wavenumber)
    needed = int(math.ceil(2 * half_extent / basis.step))
    points = len(basis.grid)
    while points < needed:
        points *= 2
    return points


def _transport(basis, points, layout, z_cm, wavenumber):
    step = basis.step
    grid = centered_grid(points, step)
    to_lens = layout.lens_position_cm * UM_PER_CM
    after_lens = (z_cm - layout.lens_position_cm) * UM_PER_CM
    focal_length = layout.focal_length_cm * UM_PER_CM
    guard = max(EDGE_POINTS, int(GUARD_FRACTION * points))

    fields = _pad(basis.modes, points)
    fields, lost_first = _free_space(fields, step, to_lens, wavenumber)
    guard_first = _edge_fraction(fields, guard)
    fields = _lens(fields, grid, focal_length, wavenumber)
    fields, lost_second = _free_space(fields, step, after_lens, wavenumber)
    guard_second = _edge_fraction(fields, guard)

    converged = (
        max(lost_first, lost_second) <= BAND_TOLERANCE
        and max(guard_first, guard_second) <= GUARD_TOLERANCE
    )
    return fields, grid, converged


@wrap_exceptions
def propagate(basis, layout, z_detect_cm, *, max_points=MAX_POINTS):
    """Carry crystal-output modes through the 2f-2f layout.

    The modes cross ``lens_position_cm`` of free space, a thin lens and the
    remaining ``z_detect_cm - lens_position_cm``. Each step uses the
    paraxial transfer function with the angular-spectrum band limit; the
    grid keeps its spacing and is zero-padded until both the band limit
    and the grid boundary hold the mode energy.
    """
    if basis.plane != CRYSTAL_OUTPUT:
        raise DomainError("propagation starts from the crystal output plane")
    if not layout.contains(z_detect_cm):
        start, stop = layout.detection_range_cm
        raise DomainError(
            f"detection plane {z_detect_cm} cm outside [{start}, {stop}] cm"
        )

    wavenumber = 2 * np.pi / basis.wavelength_um
    distances = (
        layout.lens_position_cm * UM_PER_CM,
        (z_detect_cm - layout.lens_position_cm) * UM_PER_CM,
    )
    points = min(_initial_points(basis, distances, wavenumber), max_points)
    while True:
        fields, grid, converged = _transport(
            basis, points, layout, z_detect_cm, wavenumber
        )
        if converged or points * 2 > max_points:
            break
        points *= 2

    logger.debug("propagated to z = %s cm on %d points", z_detect_cm, points)
    edge = _edge_fraction(fields, EDGE_POINTS)
    if edge > EDGE_TOLERANCE:
        raise AliasingError(
            f"{edge:.2e} of the mode energy reached the grid boundary at "
            f"z = {z_detect_cm} cm with {points} points"
        )

    metadata = dict(basis.metadata)
    metadata.update(
        {
            "points": points,
            "focal_length_cm": layout.focal_length_cm,
            "lens_position_cm": layout.lens_position_cm,
        }
    )
    return replace(
        basis,
        modes=fields,
        grid=grid,
        plane=ARBITRARY_Z,
        z_cm=float(z_detect_cm),
        metadata=metadata,
    )


def _rms(profile, grid):
    total = profile.sum()
    centre = (profile * grid).sum() / total
    return math.sqrt((profile * (grid - centre) ** 2).sum() / total)


def fedorov_ratio(signal, idler, weights=None):
    """Ratio of the single-beam to the conditional rms width.

    The single-beam profile is ``sum_n w_n |psi_n(x)|^2``; the conditional
    profile is the signal intensity given an idler photon on the optical
    axis, ``|sum_n sqrt(w_n) psi_n(x) phi_n(0)|^2``. Both bases must sit
    in the same plane on the same grid.
    """
    if signal.modes.shape != idler.modes.shape:
        raise DomainError("signal and idler bases must share the grid")

    weights = signal.weights if weights is None else np.asarray(weights)
    if len(weights) != len(signal):
        raise DomainError("weights must be index-aligned with the modes")

    grid = signal.grid
    single = (weights[:, None] * np.abs(signal.modes) ** 2).sum(axis=0)
    axis = len(grid) // 2
    conditional = np.abs(
        (np.sqrt(weights) * idler.modes[:, axis]) @ signal.modes
    ) ** 2
    return _rms(single, grid) / _rms(conditional, grid)
