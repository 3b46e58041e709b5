"""Monte-Carlo twin-beam statistics behind a virtual Hanbury Brown-Twiss
interferometer and the g2 estimator."""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field

import fsspec
import numpy as np

from schmidtbench.exceptions import (
    DegenerateBatchError,
    DomainError,
    InvalidSpectrumError,
    OverflowGuardError,
)
from schmidtbench.pools import SerialWorkerPool
from schmidtbench.utils import (
    MODE_CHUNK,
    PULSE_BLOCK,
    dump_json_line,
    format_float,
)

logger = logging.getLogger(__name__)

DEFAULT_PULSES = 30000
DEFAULT_BLOCKS = 100

# Largest mean photon number per mode the discrete sampler accepts.
MAX_MODE_MEAN = 2**31

# Draw roles: every (seed, role, block) triple owns an independent stream.
INTENSITY = 0
NOISE_ARM_1 = 1
NOISE_ARM_2 = 2
PUMP_JITTER = 3
SIGNAL_PHOTONS = 4
SPLITTER = 5
DETECT_ARM_1 = 6
DETECT_ARM_2 = 7


@dataclass(frozen=True)
class SamplerConfig:
    pulses: int = DEFAULT_PULSES
    seed: int = 0
    detector_efficiency: tuple = (1.0, 1.0)
    splitting_ratio: float = 0.5
    electronic_noise_rms: float = 0.0
    pump_jitter_rms: float = 0.0
    blocks: int = DEFAULT_BLOCKS

    def __post_init__(self):
        efficiency = self.detector_efficiency
        if isinstance(efficiency, (int, float)):
            efficiency = (efficiency, efficiency)
        efficiency = tuple(float(value) for value in efficiency)
        object.__setattr__(self, "detector_efficiency", efficiency)

        if self.pulses < 2:
            raise DomainError("at least two pulses are needed")
        if not 0 <= self.seed < 2**64:
            raise DomainError("seed must be an unsigned 64-bit integer")
        if len(efficiency) != 2 or not all(0 < eta <= 1 for eta in efficiency):
            raise DomainError("detector efficiencies must lie in (0, 1]")
        if not 0 < self.splitting_ratio < 1:
            raise DomainError("splitting ratio must lie in (0, 1)")
        if self.electronic_noise_rms < 0 or self.pump_jitter_rms < 0:
            raise DomainError("noise and jitter levels must be non-negative")
        if self.blocks < 2:
            raise DomainError("the jackknife needs at least two blocks")


@dataclass(frozen=True, eq=False)
class PulseBatch:
    s1: np.ndarray
    s2: np.ndarray
    mode_count: int
    config: SamplerConfig = field(default_factory=SamplerConfig)

    def __post_init__(self):
        if self.s1.shape != self.s2.shape or self.s1.ndim != 1:
            raise DomainError("both arms need one signal per pulse")

    def __len__(self):
        return len(self.s1)

    def to_csv(self, path):
        """Two-column CSV with the sampler config as a leading comment."""
        provenance = asdict(self.config)
        provenance["mode_count"] = self.mode_count
        with fsspec.open(path, "w", newline="") as stream:
            stream.write("# " + dump_json_line(provenance) + "\n")
            stream.write("s1,s2\n")
            for a, b in zip(self.s1, self.s2):
                stream.write(f"{format_float(a)},{format_float(b)}\n")


@dataclass(frozen=True)
class G2Estimate:
    value: float
    std_error: float
    pulses_used: int


def stream(seed, role, block):
    """Counter-based generator for one pulse block and one draw role."""
    sequence = np.random.SeedSequence(seed, spawn_key=(role, block))
    return np.random.Generator(np.random.Philox(sequence))


def _blocks(pulses):
    starts = range(0, pulses, PULSE_BLOCK)
    return [
        (index, min(PULSE_BLOCK, pulses - start))
        for index, start in enumerate(starts)
    ]


def _validate(weights, total_photons):
    weights = np.asarray(weights, dtype=float)
    if weights.ndim != 1 or weights.size == 0:
        raise InvalidSpectrumError("weights must be a non-empty 1-D array")
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
        raise InvalidSpectrumError(
            "weights must be non-negative with unit sum"
        )
    if not total_photons > 0 or not math.isfinite(total_photons):
        raise DomainError("total photon number must be positive and finite")
    return weights


def _jitter(config, block, size):
    if config.pump_jitter_rms == 0:
        return None
    draws = stream(config.seed, PUMP_JITTER, block).standard_normal(size)
    return np.clip(1.0 + config.pump_jitter_rms * draws, 0.0, None)


def detector_response(ideal_signal, config, noise_draw, arm=0):
    """Analog pin-diode readout: efficiency-scaled signal plus Gaussian
    electronic noise, clamped at zero.

    ``noise_draw`` is a :class:`numpy.random.Generator`; ``ideal_signal``
    may be a scalar or an array of per-pulse signals.
    """
    ideal = np.asarray(ideal_signal, dtype=float)
    if np.any(ideal < 0):
        raise DomainError("ideal signals must be non-negative")

    signal = config.detector_efficiency[arm] * ideal
    if config.electronic_noise_rms > 0:
        noise = noise_draw.standard_normal(ideal.shape)
        signal = np.clip(
            signal + config.electronic_noise_rms * noise, 0.0, None
        )
    if signal.ndim == 0:
        return float(signal)
    return signal


def _intensities(means, config, block, size):
    rng = stream(config.seed, INTENSITY, block)
    intensity = np.zeros(size)
    for start in range(0, len(means), MODE_CHUNK):
        chunk = means[start : start + MODE_CHUNK]
        draws = rng.standard_exponential((size, len(chunk)))
        intensity += draws @ chunk

    jitter = _jitter(config, block, size)
    if jitter is not None:
        intensity *= jitter
    return intensity


def sample_single_beam(weights, total_photons, config, *, pool=None):
    """Continuous thermal model of one beam split onto two detectors.

    Every mode carries an exponentially distributed intensity with mean
    ``w_n * N``; the beam is split with ratio ``T`` and each arm goes
    through :func:`detector_response`.
    """
    weights = _validate(weights, total_photons)
    means = weights * total_photons
    pool = pool or SerialWorkerPool()
    ratio = config.splitting_ratio

    def run_block(item):
        block, size = item
        intensity = _intensities(means, config, block, size)
        s1 = detector_response(
            ratio * intensity,
            config,
            stream(config.seed, NOISE_ARM_1, block),
            0,
        )
        s2 = detector_response(
            (1 - ratio) * intensity,
            config,
            stream(config.seed, NOISE_ARM_2, block),
            1,
        )
        return s1, s2

    parts = pool.map(run_block, _blocks(config.pulses))
    s1 = np.concatenate([part[0] for part in parts])
    s2 = np.concatenate([part[1] for part in parts])
    return PulseBatch(s1=s1, s2=s2, mode_count=len(weights), config=config)


def _photon_numbers(means, config, block, size):
    rng = stream(config.seed, SIGNAL_PHOTONS, block)
    jitter = _jitter(config, block, size)
    photons = np.zeros(size, dtype=np.int64)
    for start in range(0, len(means), MODE_CHUNK):
        chunk = means[None, start : start + MODE_CHUNK]
        if jitter is not None:
            chunk = chunk * jitter[:, None]
        # Bose-Einstein counts: numpy's geometric law starts at one.
        chunk = np.broadcast_to(chunk, (size, chunk.shape[1]))
        probability = 1.0 / (1.0 + chunk)
        photons += (rng.geometric(probability) - 1).sum(axis=1)
    return photons


def sample_twin_beams(weights, total_photons, config, *, pool=None):
    """Discrete photon-number model of the signal and idler beams.

    Each mode holds a Bose-Einstein number of photons with mean
    ``w_n * N``, copied exactly into signal and idler. Returns the signal
    beam split in the HBT interferometer and the signal-idler pair, both
    after independent binomial detection.
    """
    weights = _validate(weights, total_photons)
    means = weights * total_photons
    if means.max() > MAX_MODE_MEAN:
        raise OverflowGuardError(
            f"mean of {means.max():.3e} photons per mode is beyond the "
            "discrete sampler; use the continuous single-beam model"
        )

    pool = pool or SerialWorkerPool()
    eta_1, eta_2 = config.detector_efficiency

    def run_block(item):
        block, size = item
        photons = _photon_numbers(means, config, block, size)
        split = stream(config.seed, SPLITTER, block).binomial(
            photons, config.splitting_ratio
        )
        detect_1 = stream(config.seed, DETECT_ARM_1, block)
        detect_2 = stream(config.seed, DETECT_ARM_2, block)
        arm_1 = detect_1.binomial(split, eta_1)
        arm_2 = detect_2.binomial(photons - split, eta_2)
        signal = detect_1.binomial(photons, eta_1)
        idler = detect_2.binomial(photons, eta_2)
        return arm_1, arm_2, signal, idler

    parts = pool.map(run_block, _blocks(config.pulses))
    columns = [
        np.concatenate([part[index] for part in parts]).astype(float)
        for index in range(4)
    ]
    count = len(weights)
    hbt = PulseBatch(columns[0], columns[1], count, config)
    cross = PulseBatch(columns[2], columns[3], count, config)
    return hbt, cross


def _ratio(products, first, second, pulses):
    return (products / pulses) / ((first / pulses) * (second / pulses))


def estimate_g2(batch, blocks=None):
    """``<S1 S2> / (<S1> <S2>)`` with a delete-one jackknife error over
    contiguous pulse blocks."""
    pulses = len(batch)
    if pulses < 2:
        raise DegenerateBatchError("at least two pulses are needed")

    s1, s2 = batch.s1, batch.s2
    first, second = s1.sum(), s2.sum()
    if not first > 0 or not second > 0:
        raise DegenerateBatchError("an arm has zero mean signal")

    products = np.dot(s1, s2)
    value = float(_ratio(products, first, second, pulses))

    blocks = min(blocks or batch.config.blocks, pulses)
    edges = np.linspace(0, pulses, blocks + 1).astype(int)
    block_first = np.add.reduceat(s1, edges[:-1])
    block_second = np.add.reduceat(s2, edges[:-1])
    block_products = np.add.reduceat(s1 * s2, edges[:-1])
    sizes = np.diff(edges)

    remaining_first = first - block_first
    remaining_second = second - block_second
    if np.any(remaining_first <= 0) or np.any(remaining_second <= 0):
        logger.warning(
            "a jackknife replicate has an empty arm, the error is undefined"
        )
        return G2Estimate(value=value, std_error=math.inf, pulses_used=pulses)

    replicates = _ratio(
        products - block_products,
        remaining_first,
        remaining_second,
        pulses - sizes,
    )
    spread = replicates - replicates.mean()
    variance = (blocks - 1) / blocks * float(np.dot(spread, spread))
    return G2Estimate(
        value=value, std_error=math.sqrt(variance), pulses_used=pulses
    )
