"""Two-photon transverse amplitude, its Schmidt decomposition and the mode
bases that carry the decomposition through the optics."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import fsspec
import numpy as np
import scipy.fft
import scipy.linalg

from schmidtbench.exceptions import DomainError, ResolutionError
from schmidtbench.spectrum import TAIL_CUTOFF, SchmidtSpectrum, normalize
from schmidtbench.utils import dump_json_line, format_float, wrap_exceptions

logger = logging.getLogger(__name__)

GAUSSIAN_APPROX = "gaussian_approx"
SINC_EXACT = "sinc_exact"
MODELS = (GAUSSIAN_APPROX, SINC_EXACT)

# Gaussian that matches sinc(b x^2) at the 1/e point of its envelope.
SINC_GAUSSIAN_FACTOR = 0.193

MIN_POINTS_PER_WIDTH = 8

CRYSTAL_OUTPUT = "crystal_output"
ARBITRARY_Z = "arbitrary_z"

DEFAULT_MODES_PER_AXIS = 16


@dataclass(frozen=True)
class KernelParams:
    """Physical parameters of the biphoton kernel.

    ``pump_waist_um`` is the 1/e field radius of the pump (half of the
    230 um intensity diameter quoted for the experiment), and the crystal
    length is the effective length of the two-crystal amplifier. When
    ``phase_matching_width_um`` is None it is derived from the crystal
    length; calibration replaces it with a fitted value.
    """

    pump_waist_um: float = 115.0
    signal_wavelength_nm: float = 709.0
    pump_wavelength_nm: float = 355.0
    crystal_length_mm: float = 10.0
    pump_refractive_index: float = 1.70
    model: str = GAUSSIAN_APPROX
    phase_matching_width_um: float | None = None

    def __post_init__(self):
        for name in (
            "pump_waist_um",
            "signal_wavelength_nm",
            "pump_wavelength_nm",
            "crystal_length_mm",
            "pump_refractive_index",
        ):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be strictly positive")
        if self.model not in MODELS:
            raise DomainError(f"unknown phase matching model {self.model!r}")
        if (
            self.phase_matching_width_um is not None
            and not self.phase_matching_width_um > 0
        ):
            raise DomainError("phase_matching_width_um must be positive")

    @property
    def pump_width(self):
        return self.pump_waist_um

    @property
    def pump_wavenumber(self):
        """Pump wavenumber inside the crystal, rad/um."""
        wavelength_um = self.pump_wavelength_nm * 1e-3
        return 2 * math.pi * self.pump_refractive_index / wavelength_um

    @property
    def signal_wavenumber(self):
        """Signal wavenumber in air, rad/um."""
        return 2 * math.pi / (self.signal_wavelength_nm * 1e-3)

    @property
    def correlation_width(self):
        """Width ``sigma_c`` of the phase-matching factor, um."""
        if self.phase_matching_width_um is not None:
            return self.phase_matching_width_um

        length_um = self.crystal_length_mm * 1e3
        return math.sqrt(
            SINC_GAUSSIAN_FACTOR * length_um / self.pump_wavenumber
        )

    @property
    def width_ratio(self):
        return self.pump_width / self.correlation_width

    def with_correlation_width(self, width):
        return replace(self, phase_matching_width_um=float(width))


@dataclass(frozen=True)
class GridSpec:
    points: int = 512
    extent_um: float | None = None
    modes_per_axis: int = DEFAULT_MODES_PER_AXIS

    def __post_init__(self):
        if self.points < 2 or self.points % 2:
            raise DomainError("grid points must be an even number >= 2")
        if self.extent_um is not None and not self.extent_um > 0:
            raise DomainError("grid extent must be positive")
        if self.modes_per_axis < 1:
            raise DomainError("modes_per_axis must be at least 1")

    def extent_for(self, params):
        if self.extent_um is not None:
            return self.extent_um
        # 8x the 1/e half width (2 sigma) of the wider kernel factor.
        return 16.0 * max(params.pump_width, params.correlation_width)

    def coordinates(self, params):
        extent = self.extent_for(params)
        step = extent / self.points
        return centered_grid(self.points, step)


def centered_grid(points, step):
    # x = 0 sits at index points // 2, so zero padding keeps the axis.
    return (np.arange(points) - points // 2) * step


@dataclass(frozen=True, eq=False)
class BiphotonKernel:
    grid: np.ndarray
    amplitude: np.ndarray
    params: KernelParams

    @property
    def step(self):
        return float(self.grid[1] - self.grid[0])


@dataclass(frozen=True, eq=False)
class ModeBasis:
    """Orthonormal 1-D transverse modes sampled on a uniform grid.

    ``modes`` has shape ``(count, points)``. ``z_cm`` is the distance from
    the crystal output face along the optical axis.
    """

    modes: np.ndarray
    grid: np.ndarray
    spectrum: SchmidtSpectrum
    wavelength_um: float
    plane: str = CRYSTAL_OUTPUT
    z_cm: float = 0.0
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.modes)

    @property
    def step(self):
        return float(self.grid[1] - self.grid[0])

    @property
    def weights(self):
        return self.spectrum.weights

    def gram(self):
        return (self.modes.conj() @ self.modes.T) * self.step

    def to_csv(self, path):
        """Write the modes as a CSV matrix: the grid column, then the real
        and imaginary part of every mode."""
        header = ["x_um"]
        for index in range(len(self)):
            header += [f"mode{index}_re", f"mode{index}_im"]

        provenance = {
            "plane": self.plane,
            "wavelength_um": self.wavelength_um,
            "weights": self.weights,
            "z_cm": self.z_cm,
        }
        with fsspec.open(path, "w", newline="") as stream:
            stream.write("# " + dump_json_line(provenance) + "\n")
            stream.write(",".join(header) + "\n")
            for row, x in enumerate(self.grid):
                values = [format_float(x)]
                for mode in self.modes[:, row]:
                    values.append(format_float(mode.real))
                    values.append(format_float(mode.imag))
                stream.write(",".join(values) + "\n")


@dataclass(frozen=True, eq=False)
class ProductBasis:
    """2-D transverse basis built from the same 1-D modes on both axes.

    ``pairs[k] == (a, b)`` names the 2-D mode ``psi_a(x) psi_b(y)`` whose
    weight is ``spectrum.weights[k]``; pairs are ordered by weight so the
    2-D spectrum and the basis stay index-aligned.
    """

    axis: ModeBasis
    pairs: np.ndarray
    spectrum: SchmidtSpectrum

    def __len__(self):
        return len(self.pairs)

    @property
    def z_cm(self):
        return self.axis.z_cm


def _check_resolution(step, params):
    scales = (
        ("pump waist", params.pump_width),
        ("phase-matching width", params.correlation_width),
    )
    for scale, width in scales:
        # The 1/e full width of exp(-u^2 / (4 sigma^2)) is 4 sigma.
        points = 4.0 * width / step
        if points < MIN_POINTS_PER_WIDTH:
            raise ResolutionError(scale, points, MIN_POINTS_PER_WIDTH)


def build_kernel(params, grid_spec=None):
    """Sample the normalized near-field two-photon amplitude of one axis.

    For the ``gaussian_approx`` model the amplitude is

        A(x_s, x_i) ~ exp(-(x_s + x_i)^2 / (4 sp^2) - (x_s - x_i)^2 / (4 sc^2))

    which is the Fourier transform of the angular form
    exp(-(q_s + q_i)^2 sp^2 / 4) exp(-(q_s - q_i)^2 sc^2 / 4). The
    ``sinc_exact`` model samples the angular form with the exact
    sinc(L (q_s - q_i)^2 / (4 k_p)) phase matching and transforms it to the
    crystal output plane.
    """
    grid_spec = grid_spec or GridSpec()
    grid = grid_spec.coordinates(params)
    step = float(grid[1] - grid[0])
    _check_resolution(step, params)

    if params.model == GAUSSIAN_APPROX:
        amplitude = _gaussian_kernel(grid, params)
    else:
        amplitude = _sinc_kernel(grid, step, params)

    if not np.all(np.isfinite(amplitude)):
        raise DomainError("kernel amplitude is not finite on the grid")

    norm = math.sqrt(float(np.sum(np.abs(amplitude) ** 2))) * step
    return BiphotonKernel(grid=grid, amplitude=amplitude / norm, params=params)


def _gaussian_kernel(grid, params):
    xs, xi = np.meshgrid(grid, grid, indexing="ij")
    sp, sc = params.pump_width, params.correlation_width
    return np.exp(
        -((xs + xi) ** 2) / (4 * sp**2) - (xs - xi) ** 2 / (4 * sc**2)
    )


def _sinc_kernel(grid, step, params):
    points = len(grid)
    q = scipy.fft.fftshift(2 * np.pi * scipy.fft.fftfreq(points, d=step))
    qs, qi = np.meshgrid(q, q, indexing="ij")
    length_um = params.crystal_length_mm * 1e3
    mismatch = length_um * (qs - qi) ** 2 / (4 * params.pump_wavenumber)
    angular = np.exp(-((qs + qi) ** 2) * params.pump_width**2 / 4) * np.sinc(
        mismatch / np.pi
    )
    shifted = scipy.fft.ifftshift(angular)
    near = scipy.fft.fftshift(scipy.fft.ifft2(shifted))
    return near


def mehler_spectrum(ratio, count=None, *, cutoff=TAIL_CUTOFF):
    """Closed-form Schmidt weights of the double-Gaussian kernel.

    ``ratio`` is sigma_p / sigma_c (or its inverse, the spectrum is the
    same); the weights are geometric, ``(1 - t) t**n`` with
    ``t = ((r - 1) / (r + 1))**2``. With ``count`` the first ``count``
    weights are returned renormalized; otherwise the series runs to the
    tail cutoff.
    """
    if not ratio > 0:
        raise DomainError(f"width ratio must be positive, got {ratio}")

    t = ((ratio - 1.0) / (ratio + 1.0)) ** 2
    if t == 0:
        return np.ones(1)

    if count is None:
        count = int(math.ceil(math.log(cutoff) / math.log(t))) + 1
    weights = (1.0 - t) * t ** np.arange(count)
    return weights / weights.sum()


def _fix_phases(left, right):
    # Make the largest component of each left mode real and positive.
    peaks = np.argmax(np.abs(left), axis=1)
    values = left[np.arange(len(left)), peaks]
    phases = values / np.abs(values)
    return left / phases[:, None], right * phases[:, None]


@wrap_exceptions
def decompose(kernel, max_modes=None, *, cutoff=TAIL_CUTOFF):
    """Schmidt-decompose a kernel by singular-value decomposition.

    Returns the spectrum and the signal and idler bases at the crystal
    output plane. Truncation happens at ``max_modes`` or at the relative
    tail cutoff, whichever comes first; the kept weights are renormalized.
    """
    step = kernel.step
    amplitude = kernel.amplitude
    try:
        u, s, vh = scipy.linalg.svd(amplitude, lapack_driver="gesdd")
    except scipy.linalg.LinAlgError:
        logger.debug("gesdd did not converge, retrying with gesvd")
        u, s, vh = scipy.linalg.svd(amplitude, lapack_driver="gesvd")

    raw = (s * step) ** 2
    keep = int(np.count_nonzero(raw >= cutoff * raw[0]))
    if max_modes is not None:
        keep = min(keep, int(max_modes))

    residual = math.sqrt(max(float(raw[keep:].sum()), 0.0))
    logger.debug(
        "decomposed kernel: %d modes kept, truncation residual %.3e",
        keep,
        residual,
    )

    spectrum = normalize(raw[:keep], label="spatial", cutoff=0.0)
    signal = u[:, :keep].T / math.sqrt(step)
    idler = vh[:keep] / math.sqrt(step)
    signal, idler = _fix_phases(signal, idler)

    wavelength_um = kernel.params.signal_wavelength_nm * 1e-3
    metadata = {
        "truncation_residual": residual,
        "width_ratio": kernel.params.width_ratio,
        "correlation_width_um": kernel.params.correlation_width,
    }
    bases = [
        ModeBasis(
            modes=modes,
            grid=kernel.grid,
            spectrum=spectrum,
            wavelength_um=wavelength_um,
            metadata=dict(metadata),
        )
        for modes in (signal, idler)
    ]
    return spectrum, bases[0], bases[1]


def reconstruct(spectrum, signal, idler):
    amplitudes = np.sqrt(spectrum.weights)
    return (signal.modes.T * amplitudes) @ idler.modes


def product_basis(basis, *, cutoff=0.0):
    """Outer product of a 1-D basis with itself, ordered by weight."""
    weights = np.outer(basis.weights, basis.weights).ravel()
    # A stable sort keeps equal-weight pairs in row-major order.
    order = np.argsort(-weights, kind="stable")
    if cutoff > 0:
        order = order[weights[order] >= cutoff * weights[order[0]]]

    count = len(basis)
    pairs = np.stack([order // count, order % count], axis=1)
    sorted_weights = weights[order]
    spectrum = SchmidtSpectrum(
        sorted_weights / sorted_weights.sum(), label="spatial"
    )
    return ProductBasis(axis=basis, pairs=pairs, spectrum=spectrum)
