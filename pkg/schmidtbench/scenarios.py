"""Runnable scenarios: gain, aperture and position scans, a single virtual
HBT point, and their CSV emission."""

from __future__ import annotations

import json
import logging
import math
import posixpath
from dataclasses import astuple, dataclass, field, fields, replace
from datetime import datetime, timezone
from functools import cached_property

import fsspec
import numpy as np

from schmidtbench.calibration import (
    GainCalibration,
    calibrate_gain,
    calibrate_kernel,
)
from schmidtbench.coherence import coherence_matrix, prediction_from_coherence
from schmidtbench.config import (
    APERTURE_SCAN,
    DISCRETE,
    GAIN_SCAN,
    HBT_POINT,
    POSITION_SCAN,
)
from schmidtbench.exceptions import DomainError, OutputError
from schmidtbench.hbt import estimate_g2, sample_single_beam, sample_twin_beams
from schmidtbench.kernel import build_kernel, decompose, product_basis
from schmidtbench.pools import make_pool
from schmidtbench.propagation import propagate
from schmidtbench.spectrum import (
    TAIL_CUTOFF,
    gain_transform,
    geometric_spectrum,
    predict_correlations,
    schmidt_number_from_g2,
    spatial_schmidt_number,
    tensor_spectrum,
)
from schmidtbench.utils import dump_json_line, format_float

logger = logging.getLogger(__name__)

MAGIC = "# schmidtbench scan: "
GENERATED = "# generated: "

CONTROL_NAMES = {
    GAIN_SCAN: "gain",
    APERTURE_SCAN: "diameter_mm",
    POSITION_SCAN: "z_cm",
    HBT_POINT: "gain",
}
CONTROL_LABELS = {
    GAIN_SCAN: "parametric gain G",
    APERTURE_SCAN: "aperture diameter (mm)",
    POSITION_SCAN: "detection position (cm)",
    HBT_POINT: "parametric gain G",
}

# Spawn-key role for per-point sampler seeds.
SCAN_POINT = 100


@dataclass(frozen=True)
class ScanRow:
    control_value: float
    g2_analytic: float
    g2_montecarlo: float
    std_error: float
    K_effective: float
    transmitted_power_fraction: float


COLUMNS = tuple(column.name for column in fields(ScanRow))


@dataclass(frozen=True, eq=False)
class ScanResult:
    kind: str
    rows: tuple
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))

    def __len__(self):
        return len(self.rows)

    @property
    def header(self):
        return (CONTROL_NAMES[self.kind],) + COLUMNS[1:]

    def column(self, name):
        index = COLUMNS.index(name)
        return np.array([astuple(row)[index] for row in self.rows])


def point_seed(seed, index):
    """Sampler seed of scan point ``index``, independent of scheduling."""
    sequence = np.random.SeedSequence(seed, spawn_key=(SCAN_POINT, index))
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


class ScenarioRunner:
    """Resolves the calibrations of a :class:`ScenarioConfig` once and
    evaluates its scan points, in parallel when the pool allows it."""

    def __init__(self, config, *, pool=None, workers=None):
        self.config = config
        self._owns_pool = pool is None
        self.pool = pool if pool is not None else make_pool(workers)

    def close(self):
        if self._owns_pool:
            self.pool.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()

    @cached_property
    def gain_calibration(self):
        spec = self.config.gain_calibration
        if spec is None:
            return None
        if spec.points is not None:
            return calibrate_gain(spec.points)
        return GainCalibration.from_reference(
            spec.reference_power_mW, spec.reference_gain
        )

    @cached_property
    def gain(self):
        if self.config.gain is not None:
            return float(self.config.gain)
        return self.gain_calibration.gain_at(self.config.pump_power_mW)

    @cached_property
    def kernel_params(self):
        spec = self.config.kernel_calibration
        if spec is None:
            return self.config.kernel
        at_gain = spec.at_gain if spec.at_gain is not None else self.gain
        return calibrate_kernel(
            spec.target_schmidt_number,
            at_gain,
            self.config.kernel,
            self.config.grid,
        )

    @cached_property
    def basis(self):
        """2-D Schmidt basis of the signal beam at the crystal output."""
        kernel = build_kernel(self.kernel_params, self.config.grid)
        _, signal, _ = decompose(kernel, self.config.grid.modes_per_axis)
        return product_basis(signal)

    @cached_property
    def temporal(self):
        return geometric_spectrum(self.config.temporal_schmidt_number)

    def gained(self, gain=None):
        return gain_transform(self.basis.spectrum, gain or self.gain)

    def propagated(self, z_cm):
        axis = propagate(self.basis.axis, self.config.layout, z_cm)
        return replace(self.basis, axis=axis)

    def metadata(self, **extra):
        params = self.kernel_params
        calibration = self.gain_calibration
        metadata = {
            "name": self.config.name,
            "config": self.config.resolved(),
            "seed": self.config.sampler.seed,
            "gain": self.gain,
            "correlation_width_um": params.correlation_width,
            "width_ratio": params.width_ratio,
            "spatial_schmidt_number": self.gained().schmidt_number,
            "temporal_schmidt_number": self.config.temporal_schmidt_number,
            "gain_proportionality": (
                calibration.proportionality if calibration else None
            ),
            "gain_fit_residual": (
                calibration.fit_residual if calibration else None
            ),
        }
        metadata.update(extra)
        return metadata

    def _monte_carlo(self, spatial, total_photons, index):
        if not total_photons > 0:
            return math.nan, math.nan

        joint = tensor_spectrum(spatial, self.temporal, cutoff=TAIL_CUTOFF)
        sampler = replace(
            self.config.sampler,
            seed=point_seed(self.config.sampler.seed, index),
        )
        batch = sample_single_beam(joint.weights, total_photons, sampler)
        estimate = estimate_g2(batch)
        return estimate.value, estimate.std_error

    def _row(self, control, prediction, spatial, total, index, monte_carlo):
        if monte_carlo:
            g2_mc, error = self._monte_carlo(spatial, total, index)
        else:
            g2_mc, error = math.nan, math.nan
        return ScanRow(
            control_value=float(control),
            g2_analytic=prediction.g2_auto,
            g2_montecarlo=g2_mc,
            std_error=error,
            K_effective=prediction.schmidt_number,
            transmitted_power_fraction=prediction.transmitted_fraction,
        )

    def _filtered_row(self, control, basis, gained, aperture, index, mc):
        coherence = coherence_matrix(basis, gained, aperture)
        prediction = prediction_from_coherence(
            coherence, self.config.temporal_schmidt_number
        )
        return self._row(
            control,
            prediction,
            coherence.effective_spectrum(),
            coherence.trace,
            index,
            mc,
        )

    def _prepare(self):
        # Resolve the cached state before any worker thread touches it.
        return self.basis, self.temporal, self.gain

    def gain_scan(self):
        scan = self.config.scan
        self._prepare()
        gains = np.linspace(scan.min_gain, scan.max_gain, scan.steps)

        def run_point(item):
            index, gain = item
            gained = self.gained(gain)
            prediction = predict_correlations(
                gained, self.config.temporal_schmidt_number
            )
            logger.info("gain %.4g: g2 = %.6f", gain, prediction.g2_auto)
            return self._row(
                gain,
                prediction,
                gained.spectrum,
                gained.total_photons,
                index,
                scan.monte_carlo,
            )

        rows = self.pool.map(run_point, list(enumerate(gains)))
        return ScanResult(GAIN_SCAN, rows, self.metadata())

    def aperture_scan(self):
        scan = self.config.scan
        self._prepare()
        z_cm = scan.z_cm or self.config.layout.focal_plane_cm
        basis = self.propagated(z_cm)
        gained = self.gained()

        def run_point(item):
            index, aperture = item
            row = self._filtered_row(
                aperture.diameter_mm,
                basis,
                gained,
                aperture,
                index,
                scan.monte_carlo,
            )
            logger.info(
                "aperture %.4g mm: g2 = %.6f",
                aperture.diameter_mm,
                row.g2_analytic,
            )
            return row

        rows = self.pool.map(run_point, list(enumerate(scan.apertures())))
        return ScanResult(APERTURE_SCAN, rows, self.metadata(z_cm=z_cm))

    def position_scan(self):
        scan = self.config.scan
        self._prepare()
        positions = scan.positions(self.config.layout)
        gained = self.gained()

        def run_point(item):
            index, z_cm = item
            row = self._filtered_row(
                z_cm,
                self.propagated(z_cm),
                gained,
                scan.aperture,
                index,
                scan.monte_carlo,
            )
            logger.info("z = %.4g cm: g2 = %.6f", z_cm, row.g2_analytic)
            return row

        rows = self.pool.map(run_point, list(enumerate(positions)))
        return ScanResult(POSITION_SCAN, rows, self.metadata())

    def hbt_point(self):
        scan = self.config.scan
        gained = self.gained()
        prediction = predict_correlations(
            gained, self.config.temporal_schmidt_number
        )
        joint = tensor_spectrum(
            gained.spectrum, self.temporal, cutoff=TAIL_CUTOFF
        )
        sampler = self.config.sampler
        extra = {"model": scan.model}

        if scan.model == DISCRETE:
            batch, cross = sample_twin_beams(
                joint.weights, gained.total_photons, sampler, pool=self.pool
            )
            cross_estimate = estimate_g2(cross)
            extra["cross_correlation"] = {
                "g2_analytic": prediction.g2_cross,
                "g2_montecarlo": cross_estimate.value,
                "std_error": cross_estimate.std_error,
            }
        else:
            batch = sample_single_beam(
                joint.weights, gained.total_photons, sampler, pool=self.pool
            )

        if scan.pulses_out:
            batch.to_csv(scan.pulses_out)

        estimate = estimate_g2(batch)
        row = ScanRow(
            control_value=self.gain,
            g2_analytic=prediction.g2_auto,
            g2_montecarlo=estimate.value,
            std_error=estimate.std_error,
            K_effective=prediction.schmidt_number,
            transmitted_power_fraction=1.0,
        )
        extra["inferred"] = _inferred_mode_numbers(
            estimate, self.config.temporal_schmidt_number
        )
        return ScanResult(HBT_POINT, [row], self.metadata(**extra))

    def run(self):
        return getattr(self, self.config.kind)()


def _inferred_mode_numbers(estimate, temporal_K):
    """K and K_s read back from a measured g2, or None when g2 <= 1."""
    if not estimate.value > 1.0:
        return None
    K, K_error = schmidt_number_from_g2(estimate.value, estimate.std_error)
    K_s, K_s_error = spatial_schmidt_number(K, K_error, temporal_K)
    return {
        "schmidt_number": K,
        "schmidt_number_error": K_error,
        "spatial_schmidt_number": K_s,
        "spatial_schmidt_number_error": K_s_error,
    }


def _run(config, expected, **kwargs):
    if config.kind != expected:
        raise DomainError(f"config holds a {config.kind}, not a {expected}")
    with ScenarioRunner(config, **kwargs) as runner:
        return runner.run()


def run_gain_scan(config, **kwargs):
    return _run(config, GAIN_SCAN, **kwargs)


def run_aperture_scan(config, **kwargs):
    return _run(config, APERTURE_SCAN, **kwargs)


def run_position_scan(config, **kwargs):
    return _run(config, POSITION_SCAN, **kwargs)


def run_hbt_point(config, **kwargs):
    return _run(config, HBT_POINT, **kwargs)


def write_scan(result, stream, *, timestamp=None):
    """Write ``result`` as CSV behind a comment block.

    The first line names the scan kind, the second carries the metadata as
    one JSON line, the third the generation time. Everything except that
    third line is a pure function of the result.
    """
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    stream.write(MAGIC + result.kind + "\n")
    stream.write("# " + dump_json_line(result.metadata) + "\n")
    stream.write(GENERATED + timestamp + "\n")
    stream.write(",".join(result.header) + "\n")
    for row in result.rows:
        values = (format_float(value) for value in astuple(row))
        stream.write(",".join(values) + "\n")


def emit(result, path, *, timestamp=None):
    try:
        with fsspec.open(path, "w", newline="") as stream:
            write_scan(result, stream, timestamp=timestamp)
    except OSError as exc:
        raise OutputError(f"{path}: cannot write scan ({exc})") from exc
    return path


def read_scan(path):
    try:
        with fsspec.open(path, "r") as stream:
            lines = stream.read().splitlines()
    except OSError as exc:
        raise OutputError(f"{path}: cannot read scan ({exc})") from exc

    if not lines or not lines[0].startswith(MAGIC):
        raise DomainError(f"{path}: not a schmidtbench scan file")
    kind = lines[0][len(MAGIC) :]
    metadata = json.loads(lines[1][2:])

    body = [line for line in lines[2:] if not line.startswith("#")]
    rows = [
        ScanRow(*(float(value) for value in line.split(",")))
        for line in body[1:]
        if line
    ]
    return ScanResult(kind, rows, metadata)


def write_gnuplot(result, csv_path):
    """Write a gnuplot script next to ``csv_path`` that plots the analytic
    curve and the Monte-Carlo points with their error bars."""
    base, _ = posixpath.splitext(csv_path)
    script_path = base + ".gp"
    data = posixpath.basename(csv_path)
    title = result.metadata.get("name") or result.kind

    script = "\n".join(
        [
            "set datafile separator ','",
            "set key autotitle columnhead",
            f"set title '{title}'",
            f"set xlabel '{CONTROL_LABELS[result.kind]}'",
            "set ylabel 'g^{(2)}'",
            f"plot '{data}' using 1:2 with linespoints title 'analytic', \\",
            f"     '{data}' using 1:3:4 with yerrorbars title 'Monte-Carlo'",
            "",
        ]
    )
    try:
        with fsspec.open(script_path, "w") as stream:
            stream.write(script)
    except OSError as exc:
        raise OutputError(
            f"{script_path}: cannot write script ({exc})"
        ) from exc
    return script_path
