"""Schmidt spectra, the parametric-gain transformation and the closed-form
correlation functions of multimode bright squeezed vacuum."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from schmidtbench.exceptions import (
    DomainError,
    InvalidGainError,
    InvalidSpectrumError,
)

logger = logging.getLogger(__name__)

# Weights below this fraction of the largest one are dropped; such a mode
# adds less than 1e-24 to the purity sum.
TAIL_CUTOFF = 1e-12

NORMALIZATION_TOLERANCE = 1e-12

# Above this argument sinh^2(x) is replaced by its exponential asymptote,
# sinh(x) itself overflows a double near x = 710.
_LOG_SPACE_THRESHOLD = 350.0

LABELS = ("spatial", "temporal", "joint")


def _as_weights(raw):
    weights = np.array(raw, dtype=float).ravel()
    if weights.size == 0:
        raise InvalidSpectrumError("a spectrum needs at least one weight")
    if not np.all(np.isfinite(weights)):
        raise InvalidSpectrumError("spectrum weights must be finite")
    if np.any(weights < 0):
        raise InvalidSpectrumError("spectrum weights must be non-negative")
    return weights


@dataclass(frozen=True, eq=False)
class SchmidtSpectrum:
    """Ordered low-gain Schmidt weights, normalized to unit sum.

    Instances are normally created with :func:`normalize`; the constructor
    only validates.
    """

    weights: np.ndarray
    label: str = "spatial"

    def __post_init__(self):
        weights = _as_weights(self.weights)
        if abs(weights.sum() - 1.0) > NORMALIZATION_TOLERANCE:
            raise InvalidSpectrumError(
                f"weights sum to {weights.sum()!r}, expected 1"
            )
        if np.any(weights[1:] > weights[:-1] * (1 + 1e-12)):
            raise InvalidSpectrumError("weights must be sorted non-increasing")

        weights.setflags(write=False)
        object.__setattr__(self, "weights", weights)

    def __len__(self):
        return len(self.weights)

    @property
    def schmidt_number(self):
        return schmidt_number(self.weights)


@dataclass(frozen=True, eq=False)
class GainedState:
    """The broadband-mode weights of bright squeezed vacuum at gain ``G``."""

    gain: float
    weights: np.ndarray
    total_photons: float
    source: SchmidtSpectrum

    def __len__(self):
        return len(self.weights)

    @property
    def schmidt_number(self):
        return schmidt_number(self.weights)

    @property
    def spectrum(self):
        return SchmidtSpectrum(self.weights, label=self.source.label)


@dataclass(frozen=True)
class CorrelationPrediction:
    schmidt_number: float
    g2_auto: float
    g2_cross: float
    photons_per_mode: float
    spatial_schmidt_number: float = float("nan")
    transmitted_fraction: float = 1.0
    low_signal: bool = False


def normalize(raw_weights, *, label="spatial", cutoff=TAIL_CUTOFF):
    """Sort, trim and normalize raw Schmidt weights.

    Parameters
    ----------
    raw_weights: array_like
        Non-negative weights, any order, any overall scale.
    label: str
        Free-form tag carried along ("spatial", "temporal", "joint").
    cutoff: float
        Weights below ``cutoff`` times the largest weight are dropped.
        Zero keeps every strictly positive weight.
    """
    weights = _as_weights(raw_weights)
    peak = weights.max()
    if peak <= 0:
        raise InvalidSpectrumError("spectrum has no positive weight")

    weights = np.sort(weights)[::-1]
    keep = weights > 0 if cutoff <= 0 else weights >= cutoff * peak
    weights = weights[keep]
    return SchmidtSpectrum(weights / weights.sum(), label=label)


def _log_sinh_squared(x):
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _LOG_SPACE_THRESHOLD
    out[small] = 2.0 * np.log(np.sinh(x[small]))
    large = x[~small]
    out[~small] = 2.0 * large - 2.0 * math.log(2.0)
    return out


def gain_transform(spectrum, gain):
    """Apply the parametric gain to a low-gain spectrum.

    Each mode carries sinh^2(sqrt(w) * G) photons; the returned weights are
    those photon numbers normalized by their total ``N``. The evaluation is
    done in log space so that no intermediate overflows.
    """
    if not gain > 0 or not math.isfinite(gain):
        raise InvalidGainError(f"gain must be positive and finite, got {gain}")

    amplitudes = np.sqrt(spectrum.weights) * gain
    log_photons = _log_sinh_squared(amplitudes)
    log_total = logsumexp(log_photons)
    weights = np.exp(log_photons - log_total)
    weights /= weights.sum()

    total = math.exp(log_total) if log_total < 709 else math.inf
    return GainedState(
        gain=float(gain),
        weights=weights,
        total_photons=total,
        source=spectrum,
    )


def schmidt_number(weights):
    """Effective number of modes, ``1 / sum(w**2)``."""
    if isinstance(weights, (SchmidtSpectrum, GainedState)):
        weights = weights.weights

    weights = _as_weights(weights)
    if abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidSpectrumError(
            f"weights sum to {weights.sum()!r}, expected 1"
        )
    return 1.0 / float(np.dot(weights, weights))


def g2_auto(schmidt_number):
    if not schmidt_number >= 1 - 1e-12:
        raise DomainError(f"Schmidt number must be >= 1, got {schmidt_number}")
    return 1.0 + 1.0 / schmidt_number


def g2_cross(schmidt_number, photons_per_mode):
    if not photons_per_mode > 0:
        raise DomainError(
            f"photons per mode must be positive, got {photons_per_mode}"
        )
    return g2_auto(schmidt_number) + 1.0 / (photons_per_mode * schmidt_number)


def tensor_spectrum(spatial, temporal, *, cutoff=0.0):
    """Joint spectrum of independent spatial and temporal structure.

    By default no tail is trimmed, which keeps
    ``K(joint) == K(spatial) * K(temporal)`` to rounding error.
    """
    joint = np.outer(spatial.weights, temporal.weights).ravel()
    return normalize(joint, label="joint", cutoff=cutoff)


def geometric_spectrum(
    schmidt_number, *, label="temporal", cutoff=TAIL_CUTOFF
):
    """Thermal-like spectrum ``(1 - t) t**n`` whose Schmidt number is
    ``(1 + t) / (1 - t)``."""
    if not schmidt_number >= 1:
        raise DomainError(f"Schmidt number must be >= 1, got {schmidt_number}")
    if schmidt_number == 1:
        return SchmidtSpectrum(np.ones(1), label=label)

    ratio = (schmidt_number - 1.0) / (schmidt_number + 1.0)
    count = int(math.ceil(math.log(cutoff) / math.log(ratio))) + 1
    weights = (1.0 - ratio) * ratio ** np.arange(count)
    return normalize(weights, label=label, cutoff=cutoff)


def predict_correlations(state, temporal_K=1.0):
    spatial_K = schmidt_number(state.weights)
    total_K = spatial_K * temporal_K
    photons_per_mode = state.total_photons / total_K
    return CorrelationPrediction(
        schmidt_number=total_K,
        g2_auto=g2_auto(total_K),
        g2_cross=g2_cross(total_K, photons_per_mode),
        photons_per_mode=photons_per_mode,
        spatial_schmidt_number=spatial_K,
    )


def schmidt_number_from_g2(g2, std_error=0.0):
    """Invert ``g2 = 1 + 1/K``; returns ``(K, error of K)``."""
    excess = g2 - 1.0
    if not excess > 0:
        raise DomainError(
            f"g2 must exceed 1 to define a mode number, got {g2}"
        )
    return 1.0 / excess, std_error / excess**2


def spatial_schmidt_number(K, K_error, temporal_K, temporal_error=0.0):
    """Split ``K = K_t * K_s``; relative errors add in quadrature."""
    if not temporal_K >= 1:
        raise DomainError(
            f"temporal Schmidt number must be >= 1, got {temporal_K}"
        )

    spatial = K / temporal_K
    relative = math.hypot(K_error / K, temporal_error / temporal_K)
    return spatial, spatial * relative
