import argparse
import logging
import sys

import fsspec

from schmidtbench.config import (
    APERTURE_SCAN,
    GAIN_SCAN,
    HBT_POINT,
    POSITION_SCAN,
    load_config,
)
from schmidtbench.exceptions import (
    ConfigError,
    OutputError,
    SchmidtBenchError,
)
from schmidtbench.kernel import GridSpec, KernelParams, build_kernel, decompose
from schmidtbench.scenarios import (
    ScenarioRunner,
    emit,
    write_gnuplot,
    write_scan,
)
from schmidtbench.spectrum import normalize, schmidt_number
from schmidtbench.utils import WORKERS_ENV, dump_json_line, resolve_workers

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_FAILURE = 3

SCAN_COMMANDS = {
    "scan-gain": GAIN_SCAN,
    "scan-aperture": APERTURE_SCAN,
    "scan-position": POSITION_SCAN,
    "hbt": HBT_POINT,
}


def _seed(value):
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit int")
    return seed


def create_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument(
        "--config", help="Scenario JSON file (any fsspec URL)."
    )
    common.add_argument(
        "--seed", type=_seed, help="Override the sampler seed."
    )
    common.add_argument("--out", help="Output path; stdout when omitted.")
    common.add_argument(
        "--pulses", type=int, help="Override the number of sampled pulses."
    )
    common.add_argument(
        "--workers",
        type=int,
        help=f"Worker threads (default: ${WORKERS_ENV}, else 1).",
    )
    common.add_argument(
        "--gnuplot",
        action="store_true",
        help="Also write a gnuplot script next to the CSV.",
    )
    common.add_argument(
        "--verbosity",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="WARNING",
        help="Logging verbosity.",
    )

    parser = argparse.ArgumentParser(
        prog="schmidtbench",
        description="Schmidt-mode simulator for high-gain parametric "
        "down-conversion and its g2 measurements.",
    )
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser(
        "decompose",
        parents=[common],
        help="Schmidt-decompose the configured kernel.",
    )
    commands.add_parser(
        "calibrate",
        parents=[common],
        help="Resolve the gain and kernel calibrations.",
    )
    for name, kind in SCAN_COMMANDS.items():
        commands.add_parser(
            name, parents=[common], help=f"Run a {kind} scenario."
        )
    return parser


def _load(args):
    if args.config is None:
        raise ConfigError(f"{args.command} needs --config")
    config = load_config(args.config)
    return config.with_overrides(seed=args.seed, pulses=args.pulses)


def _write_json(payload, out):
    text = dump_json_line(payload) + "\n"
    if out is None:
        sys.stdout.write(text)
        return
    try:
        with fsspec.open(out, "w") as stream:
            stream.write(text)
    except OSError as exc:
        raise OutputError(f"{out}: cannot write ({exc})") from exc


def _decompose(args):
    if args.config is None:
        params, grid = KernelParams(), GridSpec()
    else:
        config = _load(args)
        with ScenarioRunner(config, workers=1) as runner:
            params, grid = runner.kernel_params, config.grid

    spectrum, signal, _ = decompose(
        build_kernel(params, grid), grid.modes_per_axis
    )
    weights = spectrum.weights
    planar = normalize((weights[:, None] * weights).ravel(), cutoff=0)
    if args.out is not None:
        try:
            signal.to_csv(args.out)
        except OSError as exc:
            raise OutputError(
                f"{args.out}: cannot write modes ({exc})"
            ) from exc
    summary = {
        "schmidt_number_1d": schmidt_number(weights),
        "schmidt_number_2d": schmidt_number(planar.weights),
        "weights": weights,
        "width_ratio": params.width_ratio,
        "correlation_width_um": params.correlation_width,
        "truncation_residual": signal.metadata["truncation_residual"],
    }
    # --out holds the mode CSV; the summary always goes to stdout.
    _write_json(summary, None)
    return EXIT_OK


def _calibrate(args):
    config = _load(args)
    with ScenarioRunner(config, workers=1) as runner:
        calibration = runner.gain_calibration
        params = runner.kernel_params
        payload = {
            "gain": runner.gain,
            "gain_proportionality": (
                calibration.proportionality if calibration else None
            ),
            "gain_fit_residual": (
                calibration.fit_residual if calibration else None
            ),
            "correlation_width_um": params.correlation_width,
            "width_ratio": params.width_ratio,
            "spatial_schmidt_number": runner.gained().schmidt_number,
        }
    _write_json(payload, args.out)
    return EXIT_OK


def _scan(args):
    if args.gnuplot and args.out is None:
        raise ConfigError("--gnuplot needs --out")

    config = _load(args)
    expected = SCAN_COMMANDS[args.command]
    if config.kind != expected:
        raise ConfigError(
            f"{args.command} needs a {expected} block, "
            f"{args.config} holds a {config.kind}"
        )
    try:
        workers = resolve_workers(args.workers)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    logger.info("running %s from %s", config.kind, args.config)
    with ScenarioRunner(config, workers=workers) as runner:
        result = runner.run()

    if args.out is None:
        write_scan(result, sys.stdout)
        return EXIT_OK

    emit(result, args.out)
    if args.gnuplot:
        write_gnuplot(result, args.out)
    return EXIT_OK


COMMANDS = {"decompose": _decompose, "calibrate": _calibrate}
COMMANDS.update(dict.fromkeys(SCAN_COMMANDS, _scan))


def main(argv=None):
    args = create_parser().parse_args(argv)
    logging.basicConfig(
        level=args.verbosity,
        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s",
    )
    logging.getLogger("schmidtbench").setLevel(args.verbosity)

    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        logger.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except SchmidtBenchError as exc:
        logger.error("%s: %s", type(exc).__name__, exc)
        return EXIT_FAILURE
