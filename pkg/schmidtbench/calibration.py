"""Gain calibration against pump power and kernel calibration against a
target spatial Schmidt number."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
import scipy.optimize

from schmidtbench.exceptions import (
    CalibrationError,
    DomainError,
    ResolutionError,
)
from schmidtbench.kernel import (
    GAUSSIAN_APPROX,
    MIN_POINTS_PER_WIDTH,
    SINC_GAUSSIAN_FACTOR,
    GridSpec,
    build_kernel,
    decompose,
    mehler_spectrum,
)
from schmidtbench.spectrum import (
    _log_sinh_squared,
    gain_transform,
    normalize,
    schmidt_number,
)

logger = logging.getLogger(__name__)

MAX_FIT_RESIDUAL = 0.2
KERNEL_TOLERANCE = 0.005

# Parametric gains the power fit may explore.
GAIN_BOUNDS = (1e-3, 50.0)
COARSE_POINTS = 400

# calibrate_kernel searches sigma_c on [sigma_p / 100, sigma_p]; the Schmidt
# number only depends on the ratio, so sigma_c > sigma_p mirrors this branch.
MIN_WIDTH_FRACTION = 0.01


@dataclass(frozen=True)
class GainCalibration:
    """``G = c * sqrt(P)`` with ``P`` in mW."""

    proportionality: float
    fit_residual: float = 0.0
    amplitude: float = float("nan")
    points: int = 1

    def __post_init__(self):
        if not self.proportionality > 0:
            raise DomainError("gain proportionality must be positive")

    @classmethod
    def from_reference(cls, pump_power_mW, gain):
        """One-point calibration from a known gain at a known power."""
        if not pump_power_mW > 0 or not gain > 0:
            raise DomainError("reference power and gain must be positive")
        return cls(proportionality=gain / math.sqrt(pump_power_mW))

    def gain_at(self, pump_power_mW):
        if not pump_power_mW > 0:
            raise DomainError("pump power must be positive")
        return self.proportionality * math.sqrt(pump_power_mW)


def _profile(c, roots, signals):
    """Closed-form amplitude and mean squared relative residual for ``c``."""
    log_shape = _log_sinh_squared(c * roots) - np.log(signals)
    peak = log_shape.max()
    shape = np.exp(log_shape - peak)
    scaled = shape.sum() / np.dot(shape, shape)
    mean_square = float(np.mean((1.0 - scaled * shape) ** 2))
    return scaled * math.exp(-peak), mean_square


def calibrate_gain(power_points):
    """Fit ``mean_signal = A sinh^2(c sqrt(P))`` to measured points.

    Residuals are relative, so points spanning orders of magnitude weigh
    alike. ``A`` has a closed form for every ``c``; ``c`` is found on a
    coarse logarithmic grid and refined by a bounded scalar search.
    """
    points = np.asarray(power_points, dtype=float)
    if points.ndim != 2 or points.shape[1] != 2:
        raise DomainError("expected (pump_power_mW, mean_signal) pairs")
    if len(points) < 3:
        raise DomainError(
            f"gain calibration needs at least 3 points, got {len(points)}"
        )
    powers, signals = points[:, 0], points[:, 1]
    if np.any(powers <= 0) or np.any(signals <= 0):
        raise DomainError("pump powers and signals must be positive")

    roots = np.sqrt(powers)
    low = GAIN_BOUNDS[0] / roots.max()
    high = GAIN_BOUNDS[1] / roots.min()
    grid = np.geomspace(low, high, COARSE_POINTS)
    scores = [_profile(c, roots, signals)[1] for c in grid]
    best = int(np.argmin(scores))
    bracket = (grid[max(best - 1, 0)], grid[min(best + 1, len(grid) - 1)])

    found = scipy.optimize.minimize_scalar(
        lambda c: _profile(c, roots, signals)[1],
        bounds=bracket,
        method="bounded",
        options={"xatol": 1e-12 * bracket[1]},
    )
    c = float(found.x)
    amplitude, mean_square = _profile(c, roots, signals)
    residual = math.sqrt(mean_square)
    logger.debug(
        "gain fit: c = %.6g, A = %.6g, residual %.3e", c, amplitude, residual
    )
    if residual > MAX_FIT_RESIDUAL:
        raise CalibrationError(
            f"gain fit did not converge, relative residual {residual:.3f}",
            residual=residual,
        )

    logger.info("gain calibration: G = %.6g * sqrt(P / mW)", c)
    return GainCalibration(
        proportionality=c,
        fit_residual=residual,
        amplitude=float(amplitude),
        points=len(points),
    )


def axis_weights(params, grid_spec=None):
    """Low-gain Schmidt weights of one transverse axis, truncated to the
    grid's modes per axis.

    The Gaussian model uses the closed-form spectrum; the sinc model is
    sampled and decomposed.
    """
    grid_spec = grid_spec or GridSpec()
    count = grid_spec.modes_per_axis
    if params.model == GAUSSIAN_APPROX:
        return mehler_spectrum(params.width_ratio, count)

    spectrum, _, _ = decompose(build_kernel(params, grid_spec), count)
    return spectrum.weights


def planar_spectrum(axis):
    """2-D spectrum of a transverse plane with identical axes."""
    return normalize(np.outer(axis, axis).ravel(), label="spatial", cutoff=0)


def spatial_schmidt_at_gain(params, gain, grid_spec=None):
    planar = planar_spectrum(axis_weights(params, grid_spec))
    return schmidt_number(gain_transform(planar, gain))


def _with_width(params, width):
    params = params.with_correlation_width(width)
    if params.model == GAUSSIAN_APPROX:
        return params
    # The sinc model is set by the crystal length; keep both consistent.
    length_um = width**2 * params.pump_wavenumber / SINC_GAUSSIAN_FACTOR
    return replace(params, crystal_length_mm=length_um * 1e-3)


def _lower_width(params, grid_spec):
    lower = MIN_WIDTH_FRACTION * params.pump_width
    if params.model == GAUSSIAN_APPROX:
        return lower
    # A sampled kernel must resolve the correlation width.
    extent = grid_spec.extent_for(replace(params, phase_matching_width_um=1))
    step = extent / grid_spec.points
    return max(lower, 1.0001 * MIN_POINTS_PER_WIDTH * step / 4.0)


def calibrate_kernel(target_Ks, at_gain, kernel, grid_spec=None):
    """Adjust the phase-matching width so that the 2-D spatial Schmidt
    number at gain ``at_gain`` equals ``target_Ks``.

    Returns ``kernel`` with the fitted width (and, for the sinc model, the
    matching effective crystal length). A target of exactly 1 returns the
    rank-one kernel ``sigma_c = sigma_p``.
    """
    if not target_Ks >= 1:
        raise DomainError(
            f"target Schmidt number must be >= 1, got {target_Ks}"
        )
    if not at_gain > 0:
        raise DomainError(f"calibration gain must be positive, got {at_gain}")

    grid_spec = grid_spec or GridSpec()
    upper = kernel.pump_width
    if target_Ks == 1:
        return _with_width(kernel, upper)

    def mismatch(log_width):
        params = _with_width(kernel, math.exp(log_width))
        value = spatial_schmidt_at_gain(params, at_gain, grid_spec)
        logger.debug(
            "sigma_c = %.6g um -> K_s = %.6g", math.exp(log_width), value
        )
        return value - target_Ks

    lower = _lower_width(kernel, grid_spec)
    bounds = (math.log(lower), math.log(upper))
    try:
        low_end = mismatch(bounds[0])
    except ResolutionError as exc:
        raise CalibrationError(str(exc)) from exc
    if low_end < 0:
        raise CalibrationError(
            f"K_s = {target_Ks} is out of reach: at most "
            f"{low_end + target_Ks:.4g} for sigma_c >= {lower:.4g} um "
            f"with {grid_spec.modes_per_axis} modes per axis",
            residual=abs(low_end) / target_Ks,
        )

    log_width = scipy.optimize.brentq(mismatch, *bounds, xtol=1e-12)
    fitted = _with_width(kernel, math.exp(log_width))
    achieved = spatial_schmidt_at_gain(fitted, at_gain, grid_spec)
    residual = abs(achieved / target_Ks - 1.0)
    if residual > KERNEL_TOLERANCE:
        raise CalibrationError(
            f"kernel calibration reached K_s = {achieved:.4g} "
            f"for a target of {target_Ks}",
            residual=residual,
        )

    logger.info(
        "kernel calibration: sigma_c = %.6g um (ratio %.4g) gives K_s = %.6g",
        fitted.correlation_width,
        fitted.width_ratio,
        achieved,
    )
    return fitted
