import json

import pytest

from schmidtbench.cli import EXIT_CONFIG, EXIT_FAILURE, EXIT_OK, main
from schmidtbench.scenarios import MAGIC, read_scan

BASE = {
    "name": "cli scenario",
    "gain": 7.3,
    "kernel_calibration": {"target_schmidt_number": 6.18},
    "sampler": {"pulses": 1000, "seed": 5},
}


def write_config(tmp_path, scan, **changes):
    document = dict(BASE, scan=scan, **changes)
    document = {k: v for k, v in document.items() if v is not None}
    path = tmp_path / "scenario.json"
    path.write_text(json.dumps(document))
    return str(path)


@pytest.fixture
def gain_config(tmp_path):
    return write_config(
        tmp_path,
        {"gain_scan": {"min_gain": 6.0, "max_gain": 7.0, "steps": 3}},
    )


def test_decompose_defaults(capsys):
    assert main(["decompose"]) == EXIT_OK

    summary = json.loads(capsys.readouterr().out)
    assert len(summary["weights"]) == 16
    assert summary["width_ratio"] == pytest.approx(14.4, abs=0.2)
    assert summary["schmidt_number_2d"] == pytest.approx(
        summary["schmidt_number_1d"] ** 2, rel=1e-9
    )


def test_decompose_writes_modes(tmp_path, gain_config, capsys):
    out = str(tmp_path / "modes.csv")
    assert main(["decompose", "--config", gain_config, "--out", out]) == 0

    summary = json.loads(capsys.readouterr().out)
    with open(out) as stream:
        stream.readline()
        header = stream.readline().strip().split(",")
    assert len(header) == 1 + 2 * len(summary["weights"])


def test_calibrate(tmp_path, capsys):
    config = write_config(
        tmp_path,
        {"hbt_point": {}},
        gain=None,
        pump_power_mW=20.5,
        gain_calibration={
            "reference_power_mW": 20.5,
            "reference_gain": 7.3,
        },
    )
    assert main(["calibrate", "--config", config]) == EXIT_OK
    payload = json.loads(capsys.readouterr().out)
    assert payload["gain"] == pytest.approx(7.3)
    assert payload["gain_proportionality"] == pytest.approx(
        1.6123, abs=1e-4
    )
    assert payload["spatial_schmidt_number"] == pytest.approx(
        6.18, rel=5e-3
    )


def test_scan_to_stdout(gain_config, capsys):
    assert main(["scan-gain", "--config", gain_config]) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == MAGIC + "gain_scan"
    assert len(lines) == 4 + 3


def test_scan_outputs(tmp_path, gain_config):
    out = str(tmp_path / "gain.csv")
    argv = ["scan-gain", "--config", gain_config, "--out", out, "--gnuplot"]
    assert main(argv + ["--seed", "9", "--pulses", "500"]) == EXIT_OK

    result = read_scan(out)
    assert len(result) == 3
    assert result.metadata["seed"] == 9
    assert result.metadata["config"]["sampler"]["pulses"] == 500
    assert (tmp_path / "gain.gp").exists()


def test_scan_is_reproducible(tmp_path, gain_config):
    outputs = []
    for workers in ("1", "2"):
        out = tmp_path / f"run{workers}.csv"
        argv = ["scan-gain", "--config", gain_config, "--out", str(out)]
        assert main(argv + ["--workers", workers]) == EXIT_OK
        lines = out.read_text().splitlines()
        # The third line holds the generation time.
        outputs.append(lines[:2] + lines[3:])

    assert outputs[0] == outputs[1]


def test_config_errors(tmp_path, gain_config):
    assert main(["scan-gain"]) == EXIT_CONFIG
    assert main(["hbt", "--config", gain_config]) == EXIT_CONFIG
    assert main(["scan-gain", "--config", gain_config, "--gnuplot"]) == 2
    assert (
        main(["scan-gain", "--config", gain_config, "--workers", "0"])
        == EXIT_CONFIG
    )
    assert (
        main(["scan-gain", "--config", gain_config, "--pulses", "1"])
        == EXIT_CONFIG
    )

    broken = tmp_path / "broken.json"
    broken.write_text("{")
    assert main(["scan-gain", "--config", str(broken)]) == EXIT_CONFIG
    missing = str(tmp_path / "missing.json")
    assert main(["calibrate", "--config", missing]) == EXIT_CONFIG


@pytest.mark.parametrize(
    "command, scan",
    [
        ("scan-position", {"position_scan": {"z_cm": [10.0, 20.0]}}),
        (
            "scan-aperture",
            {"aperture_scan": {"diameters_mm": [0.5], "z_cm": 5.0}},
        ),
    ],
)
def test_planes_outside_detection_range(tmp_path, command, scan):
    config = write_config(tmp_path, scan)
    assert main([command, "--config", config]) == EXIT_CONFIG


def test_numerical_failures(tmp_path):
    config = write_config(
        tmp_path,
        {"hbt_point": {}},
        kernel_calibration={"target_schmidt_number": 1e6},
    )
    assert main(["hbt", "--config", config]) == EXIT_FAILURE


def test_output_failure(tmp_path, gain_config):
    blocker = tmp_path / "file.txt"
    blocker.write_text("")
    out = str(blocker / "gain.csv")
    assert (
        main(["scan-gain", "--config", gain_config, "--out", out])
        == EXIT_FAILURE
    )


def test_invalid_seed():
    with pytest.raises(SystemExit):
        main(["decompose", "--seed", "-1"])
