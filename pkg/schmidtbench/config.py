import json
from dataclasses import asdict, dataclass, field, replace

import fsspec
import jsonschema

from schmidtbench.coherence import SHAPES, ApertureSpec
from schmidtbench.exceptions import ConfigError, DomainError
from schmidtbench.hbt import SamplerConfig
from schmidtbench.kernel import MODELS, GridSpec, KernelParams
from schmidtbench.propagation import OpticalLayout

DEFAULT_TEMPORAL_SCHMIDT_NUMBER = 3.1

GAIN_SCAN = "gain_scan"
APERTURE_SCAN = "aperture_scan"
POSITION_SCAN = "position_scan"
HBT_POINT = "hbt_point"
SCAN_KINDS = (GAIN_SCAN, APERTURE_SCAN, POSITION_SCAN, HBT_POINT)

CONTINUOUS = "continuous"
DISCRETE = "discrete"

_POSITIVE = {"type": "number", "exclusiveMinimum": 0}
_NON_NEGATIVE = {"type": "number", "minimum": 0}
_PAIR = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}
_APERTURE = {
    "type": "object",
    "properties": {
        "diameter_mm": _POSITIVE,
        "center_um": _PAIR,
        "shape": {"enum": list(SHAPES)},
    },
    "required": ["diameter_mm"],
    "additionalProperties": False,
}

SCHEMA = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "schmidtbench scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "kernel": {
            "type": "object",
            "properties": {
                "pump_waist_um": _POSITIVE,
                "signal_wavelength_nm": _POSITIVE,
                "pump_wavelength_nm": _POSITIVE,
                "crystal_length_mm": _POSITIVE,
                "pump_refractive_index": _POSITIVE,
                "model": {"enum": list(MODELS)},
                "phase_matching_width_um": {
                    "oneOf": [_POSITIVE, {"type": "null"}]
                },
            },
            "additionalProperties": False,
        },
        "grid": {
            "type": "object",
            "properties": {
                "points": {"type": "integer", "minimum": 2},
                "extent_um": {"oneOf": [_POSITIVE, {"type": "null"}]},
                "modes_per_axis": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "layout": {
            "type": "object",
            "properties": {
                "focal_length_cm": _POSITIVE,
                "lens_position_cm": _POSITIVE,
                "detection_range_cm": _PAIR,
            },
            "additionalProperties": False,
        },
        "sampler": {
            "type": "object",
            "properties": {
                "pulses": {"type": "integer", "minimum": 2},
                "seed": {
                    "type": "integer",
                    "minimum": 0,
                    "maximum": 2**64 - 1,
                },
                "detector_efficiency": {
                    "oneOf": [
                        {"type": "number"},
                        {
                            "type": "array",
                            "items": {"type": "number"},
                            "minItems": 2,
                            "maxItems": 2,
                        },
                    ]
                },
                "splitting_ratio": {
                    "type": "number",
                    "exclusiveMinimum": 0,
                    "exclusiveMaximum": 1,
                },
                "electronic_noise_rms": _NON_NEGATIVE,
                "pump_jitter_rms": _NON_NEGATIVE,
                "blocks": {"type": "integer", "minimum": 2},
            },
            "additionalProperties": False,
        },
        "gain": _POSITIVE,
        "pump_power_mW": _POSITIVE,
        "gain_calibration": {
            "type": "object",
            "properties": {
                "reference_power_mW": _POSITIVE,
                "reference_gain": _POSITIVE,
                "points": {
                    "type": "array",
                    "items": {
                        "type": "array",
                        "items": _POSITIVE,
                        "minItems": 2,
                        "maxItems": 2,
                    },
                },
            },
            "oneOf": [
                {"required": ["reference_power_mW", "reference_gain"]},
                {"required": ["points"]},
            ],
            "additionalProperties": False,
        },
        "kernel_calibration": {
            "type": "object",
            "properties": {
                "target_schmidt_number": {"type": "number", "minimum": 1},
                "at_gain": _POSITIVE,
            },
            "required": ["target_schmidt_number"],
            "additionalProperties": False,
        },
        "temporal_schmidt_number": {"type": "number", "minimum": 1},
        "scan": {
            "type": "object",
            "properties": {
                GAIN_SCAN: {
                    "type": "object",
                    "properties": {
                        "min_gain": _POSITIVE,
                        "max_gain": _POSITIVE,
                        "steps": {"type": "integer", "minimum": 1},
                        "monte_carlo": {"type": "boolean"},
                    },
                    "required": ["min_gain", "max_gain", "steps"],
                    "additionalProperties": False,
                },
                APERTURE_SCAN: {
                    "type": "object",
                    "properties": {
                        "diameters_mm": {
                            "type": "array",
                            "items": _POSITIVE,
                            "minItems": 1,
                        },
                        "z_cm": _POSITIVE,
                        "shape": {"enum": list(SHAPES)},
                        "center_um": _PAIR,
                        "monte_carlo": {"type": "boolean"},
                    },
                    "required": ["diameters_mm"],
                    "additionalProperties": False,
                },
                POSITION_SCAN: {
                    "type": "object",
                    "properties": {
                        "z_cm": {
                            "type": "array",
                            "items": _POSITIVE,
                            "minItems": 1,
                        },
                        "points": {"type": "integer", "minimum": 1},
                        "aperture": {
                            "oneOf": [_APERTURE, {"type": "null"}]
                        },
                        "monte_carlo": {"type": "boolean"},
                    },
                    "oneOf": [
                        {"required": ["z_cm"]},
                        {"required": ["points"]},
                    ],
                    "additionalProperties": False,
                },
                HBT_POINT: {
                    "type": "object",
                    "properties": {
                        "model": {"enum": [CONTINUOUS, DISCRETE]},
                        "pulses_out": {"type": "string"},
                    },
                    "additionalProperties": False,
                },
            },
            "minProperties": 1,
            "maxProperties": 1,
            "additionalProperties": False,
        },
    },
    "required": ["scan"],
    "oneOf": [{"required": ["gain"]}, {"required": ["pump_power_mW"]}],
    "dependencies": {"pump_power_mW": ["gain_calibration"]},
    "additionalProperties": False,
}


@dataclass(frozen=True)
class GainScan:
    min_gain: float
    max_gain: float
    steps: int
    monte_carlo: bool = True

    def __post_init__(self):
        if self.min_gain > self.max_gain:
            raise DomainError("gain_scan: min_gain exceeds max_gain")
        if self.steps > 1 and self.min_gain == self.max_gain:
            raise DomainError("gain_scan: an empty range needs steps = 1")


@dataclass(frozen=True)
class ApertureScan:
    diameters_mm: tuple
    z_cm: float = None
    shape: str = "circular"
    center_um: tuple = (0.0, 0.0)
    monte_carlo: bool = True

    def __post_init__(self):
        diameters = tuple(float(value) for value in self.diameters_mm)
        if list(diameters) != sorted(set(diameters)):
            raise DomainError(
                "aperture_scan: diameters must be strictly increasing"
            )
        object.__setattr__(self, "diameters_mm", diameters)
        object.__setattr__(self, "center_um", tuple(self.center_um))

    def apertures(self):
        return [
            ApertureSpec(diameter, self.center_um, self.shape)
            for diameter in self.diameters_mm
        ]


@dataclass(frozen=True)
class PositionScan:
    z_cm: tuple = None
    points: int = None
    aperture: ApertureSpec = None
    monte_carlo: bool = True

    def __post_init__(self):
        if self.z_cm is not None:
            z_cm = tuple(float(value) for value in self.z_cm)
            if list(z_cm) != sorted(set(z_cm)):
                raise DomainError(
                    "position_scan: positions must be strictly increasing"
                )
            object.__setattr__(self, "z_cm", z_cm)
        elif self.points is None:
            raise DomainError("position_scan needs z_cm or points")

    def positions(self, layout):
        if self.z_cm is not None:
            for z in self.z_cm:
                if not layout.contains(z):
                    start, stop = layout.detection_range_cm
                    raise DomainError(
                        f"position_scan: {z} cm outside [{start}, {stop}] cm"
                    )
            return list(self.z_cm)
        return [float(z) for z in layout.positions(self.points)]


@dataclass(frozen=True)
class HbtPoint:
    model: str = CONTINUOUS
    pulses_out: str = None


@dataclass(frozen=True)
class GainCalibrationSpec:
    reference_power_mW: float = None
    reference_gain: float = None
    points: tuple = None

    def __post_init__(self):
        if self.points is not None:
            points = tuple(tuple(float(v) for v in p) for p in self.points)
            object.__setattr__(self, "points", points)


@dataclass(frozen=True)
class KernelCalibrationSpec:
    target_schmidt_number: float
    at_gain: float = None


@dataclass(frozen=True)
class ScenarioConfig:
    scan: object
    kernel: KernelParams = field(default_factory=KernelParams)
    grid: GridSpec = field(default_factory=GridSpec)
    layout: OpticalLayout = field(default_factory=OpticalLayout)
    sampler: SamplerConfig = field(default_factory=SamplerConfig)
    gain: float = None
    pump_power_mW: float = None
    gain_calibration: GainCalibrationSpec = None
    kernel_calibration: KernelCalibrationSpec = None
    temporal_schmidt_number: float = DEFAULT_TEMPORAL_SCHMIDT_NUMBER
    name: str = ""

    def __post_init__(self):
        if (self.gain is None) == (self.pump_power_mW is None):
            raise DomainError("set exactly one of gain and pump_power_mW")
        if self.pump_power_mW is not None and self.gain_calibration is None:
            raise DomainError("pump_power_mW needs a gain_calibration block")
        if isinstance(self.scan, PositionScan):
            self.scan.positions(self.layout)
        elif isinstance(self.scan, ApertureScan) and self.scan.z_cm:
            if not self.layout.contains(self.scan.z_cm):
                start, stop = self.layout.detection_range_cm
                raise DomainError(
                    f"aperture_scan: {self.scan.z_cm} cm outside "
                    f"[{start}, {stop}] cm"
                )

    @property
    def kind(self):
        return _KINDS[type(self.scan)]

    def with_overrides(self, *, seed=None, pulses=None):
        changes = {}
        if seed is not None:
            changes["seed"] = seed
        if pulses is not None:
            changes["pulses"] = pulses
        if not changes:
            return self
        try:
            return replace(self, sampler=replace(self.sampler, **changes))
        except DomainError as exc:
            raise ConfigError("invalid override", [str(exc)]) from exc

    def resolved(self):
        """The fully defaulted config as a JSON-ready mapping."""
        document = asdict(self)
        document["scan"] = {self.kind: document["scan"]}
        return document


_KINDS = {
    GainScan: GAIN_SCAN,
    ApertureScan: APERTURE_SCAN,
    PositionScan: POSITION_SCAN,
    HbtPoint: HBT_POINT,
}
_SCANS = {kind: cls for cls, kind in _KINDS.items()}


def validate(document):
    validator = jsonschema.Draft7Validator(SCHEMA)
    problems = sorted(
        validator.iter_errors(document), key=lambda error: list(error.path)
    )
    if problems:
        raise ConfigError(
            "config does not match the schema",
            [
                "/".join(str(part) for part in error.path)
                + ": "
                + error.message
                for error in problems
            ],
        )


def _scan(block):
    (kind, options), = block.items()
    options = dict(options)
    if kind == POSITION_SCAN and options.get("aperture") is not None:
        options["aperture"] = ApertureSpec(**options["aperture"])
    return _SCANS[kind](**options)


def parse_config(document):
    validate(document)

    try:
        return ScenarioConfig(
            scan=_scan(document["scan"]),
            kernel=KernelParams(**document.get("kernel", {})),
            grid=GridSpec(**document.get("grid", {})),
            layout=OpticalLayout(**document.get("layout", {})),
            sampler=SamplerConfig(**document.get("sampler", {})),
            gain=document.get("gain"),
            pump_power_mW=document.get("pump_power_mW"),
            gain_calibration=(
                GainCalibrationSpec(**document["gain_calibration"])
                if "gain_calibration" in document
                else None
            ),
            kernel_calibration=(
                KernelCalibrationSpec(**document["kernel_calibration"])
                if "kernel_calibration" in document
                else None
            ),
            temporal_schmidt_number=document.get(
                "temporal_schmidt_number", DEFAULT_TEMPORAL_SCHMIDT_NUMBER
            ),
            name=document.get("name", ""),
        )
    except DomainError as exc:
        raise ConfigError("invalid config", [str(exc)]) from exc


def load_config(path):
    try:
        with fsspec.open(path, "r") as stream:
            document = json.load(stream)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read config ({exc})") from exc
    return parse_config(document)
