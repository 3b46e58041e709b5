import json
import textwrap
from pathlib import Path

import pytest

from schmidtbench.coherence import ApertureSpec
from schmidtbench.config import (
    APERTURE_SCAN,
    DISCRETE,
    GAIN_SCAN,
    HBT_POINT,
    POSITION_SCAN,
    GainScan,
    load_config,
    parse_config,
)
from schmidtbench.exceptions import ConfigError

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def make_config(tmpdir, source):
    path = tmpdir / "scenario.json"
    with open(path, "w") as stream:
        stream.write(textwrap.dedent(source))

    return load_config(str(path))


def test_config(tmpdir):
    config = make_config(
        tmpdir,
        """
    {
        "name": "a quick look",
        "kernel": {"pump_waist_um": 100.0, "model": "sinc_exact"},
        "layout": {"focal_length_cm": 10.0},
        "sampler": {"pulses": 1000, "seed": 7, "detector_efficiency": 0.8},
        "gain": 5.0,
        "scan": {"gain_scan": {"min_gain": 1.0, "max_gain": 5.0, "steps": 5}}
    }
    """,
    )

    assert config.name == "a quick look"
    assert config.kind == GAIN_SCAN
    assert config.scan == GainScan(1.0, 5.0, 5)
    assert config.kernel.pump_waist_um == 100.0
    assert config.kernel.signal_wavelength_nm == 709.0
    assert config.layout.image_plane_cm == pytest.approx(40.0)
    assert config.sampler.detector_efficiency == (0.8, 0.8)
    assert config.gain == 5.0
    assert config.temporal_schmidt_number == 3.1


def test_config_calibrated_position_scan(tmpdir):
    config = make_config(
        tmpdir,
        """
    {
        "pump_power_mW": 20.5,
        "gain_calibration": {"points": [[5, 1.0], [10, 4.0], [20, 30.0]]},
        "kernel_calibration": {"target_schmidt_number": 6.18},
        "scan": {
            "position_scan": {
                "points": 4,
                "aperture": {"diameter_mm": 1.0, "center_um": [10, 0]}
            }
        }
    }
    """,
    )

    assert config.kind == POSITION_SCAN
    assert config.gain is None
    assert config.gain_calibration.points == (
        (5.0, 1.0),
        (10.0, 4.0),
        (20.0, 30.0),
    )
    assert config.kernel_calibration.at_gain is None
    assert config.scan.aperture == ApertureSpec(1.0, (10.0, 0.0))
    assert config.scan.positions(config.layout) == [45.0, 50.0, 55.0, 60.0]


@pytest.mark.parametrize(
    "document, fragment",
    [
        ({"gain": 1.0}, "'scan' is a required property"),
        (
            {"gain": 1.0, "scan": {"hbt_point": {}}, "colour": "red"},
            "Additional properties",
        ),
        (
            {"scan": {"hbt_point": {}}},
            "is not valid under any of the given schemas",
        ),
        (
            {"gain": 1.0, "pump_power_mW": 2.0, "scan": {"hbt_point": {}}},
            "valid under each of",
        ),
        (
            {"pump_power_mW": 2.0, "scan": {"hbt_point": {}}},
            "'gain_calibration' is a dependency of 'pump_power_mW'",
        ),
        (
            {"gain": -1.0, "scan": {"hbt_point": {}}},
            "gain",
        ),
        (
            {"gain": 1.0, "scan": {"hbt_point": {}, "gain_scan": {}}},
            "scan",
        ),
        (
            {"gain": 1.0, "scan": {"hbt_point": {"model": "quantum"}}},
            "scan/hbt_point/model",
        ),
    ],
)
def test_schema_errors(document, fragment):
    with pytest.raises(ConfigError) as excinfo:
        parse_config(document)
    assert excinfo.value.problems
    assert fragment in str(excinfo.value)


@pytest.mark.parametrize(
    "scan",
    [
        {"gain_scan": {"min_gain": 5.0, "max_gain": 1.0, "steps": 3}},
        {"aperture_scan": {"diameters_mm": [1.0, 0.5]}},
        {"position_scan": {"z_cm": [50.0, 50.0]}},
        {"position_scan": {"z_cm": [10.0, 20.0]}},
        {"aperture_scan": {"diameters_mm": [0.5], "z_cm": 5.0}},
    ],
)
def test_semantic_errors(scan):
    with pytest.raises(ConfigError):
        parse_config({"gain": 1.0, "scan": scan})


def test_layout_errors():
    document = {
        "gain": 1.0,
        "layout": {"focal_length_cm": 15.0, "detection_range_cm": [10, 20]},
        "scan": {"hbt_point": {}},
    }
    with pytest.raises(ConfigError):
        parse_config(document)


def test_invalid_json(tmpdir):
    with pytest.raises(ConfigError):
        make_config(tmpdir, "{ not json")


def test_missing_file(tmpdir):
    with pytest.raises(ConfigError):
        load_config(str(tmpdir / "missing.json"))


def test_overrides():
    config = parse_config({"gain": 1.0, "scan": {"hbt_point": {}}})
    assert config.with_overrides() is config

    changed = config.with_overrides(seed=99, pulses=1234)
    assert changed.sampler.seed == 99
    assert changed.sampler.pulses == 1234
    assert config.sampler.seed == 0

    with pytest.raises(ConfigError):
        config.with_overrides(pulses=1)


def test_resolved_round_trips():
    config = parse_config(
        {
            "gain": 2.0,
            "scan": {"hbt_point": {"model": DISCRETE}},
        }
    )
    document = json.loads(json.dumps(config.resolved()))

    assert document["scan"] == {
        HBT_POINT: {"model": DISCRETE, "pulses_out": None}
    }
    assert document["kernel"]["pump_waist_um"] == 115.0
    assert document["grid"]["modes_per_axis"] == 16
    assert document["sampler"]["blocks"] == 100
    assert document["temporal_schmidt_number"] == 3.1


@pytest.mark.parametrize(
    "path", sorted(SCENARIOS.glob("*.json")), ids=lambda path: path.stem
)
def test_shipped_scenarios(path):
    config = load_config(str(path))
    assert config.pump_power_mW == 20.5
    assert config.gain_calibration.reference_gain == 7.3
    assert config.kernel_calibration.target_schmidt_number == 6.18
    assert config.kind in (GAIN_SCAN, APERTURE_SCAN, POSITION_SCAN, HBT_POINT)
