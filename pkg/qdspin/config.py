from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Type

import numpy as np
from jsonschema import Draft202012Validator
from rich.console import Console

from .constants import (
    DEFAULT_V_BI,
    DEFAULT_W_I_NM,
    SCENARIOS,
    SCHEMA_ID,
)
from .errors import ConfigError, ParameterError, QuantityError
from .models import CwDriveConfig, CwLineConfig, QuantumDotParams, SpectrumConfig
from .rates import ExpRateLaw, RateTable
from .units import (
    Energy,
    Field,
    FssSlope,
    Intensity,
    Quantity,
    Rate,
    Time,
    Voltage,
    DiodeGeometry,
)

console = Console()


def set_quiet(quiet: bool) -> None:
    console.quiet = quiet


def get_default_output_dir() -> Path:
    return Path(os.getenv("QDSPIN_OUTPUT_DIR", "./results")).expanduser().resolve()


def _env_float(name: str, default: float) -> float:
    raw = os.getenv(name)
    if raw is None or raw == "":
        return default
    try:
        return float(raw)
    except ValueError as e:
        raise ConfigError(f"environment variable {name}={raw!r} is not a number") from e


def get_default_geometry() -> DiodeGeometry:
    """Diode geometry from QDSPIN_V_BI / QDSPIN_W_I_NM, falling back to the built-in values."""
    try:
        return DiodeGeometry(
            v_bi=Voltage(_env_float("QDSPIN_V_BI", DEFAULT_V_BI)),
            w_i_nm=_env_float("QDSPIN_W_I_NM", DEFAULT_W_I_NM),
        )
    except (ParameterError, QuantityError) as e:
        raise ConfigError(f"diode geometry from environment: {e}") from e


# Schema
def _units(cls: Type[Quantity]) -> List[str]:
    return [cls.unit, *cls.aliases]


def _quantity(units: List[str], minimum: Optional[float] = None) -> Dict[str, Any]:
    value: Dict[str, Any] = {"type": "number"}
    if minimum is not None:
        value["minimum"] = minimum
    return {
        "type": "object",
        "properties": {"value": value, "unit": {"enum": units}},
        "required": ["value", "unit"],
        "additionalProperties": False,
    }


ENERGY = _quantity(_units(Energy))
ENERGY_POS = _quantity(_units(Energy), 0)
RATE = _quantity(_units(Rate), 0)
TIME = _quantity(_units(Time), 0)
FIELD = _quantity(_units(Field))
SLOPE = _quantity(_units(FssSlope))
INTENSITY = _quantity(_units(Intensity), 0)
VOLTAGE = _quantity(_units(Voltage))
LENGTH_NM = _quantity(["nm"], 0)
ANGLE = _quantity(["deg"])

DOT_FIELDS = {
    "fss": (ENERGY, Energy),
    "gamma_e": (RATE, Rate),
    "gamma_h": (RATE, Rate),
    "gamma_r": (RATE, Rate),
    "chi_e": (SLOPE, FssSlope),
    "e_ref": (FIELD, Field),
    "trion_binding": (ENERGY, Energy),
    "t2_star": (TIME, Time),
}

DOT_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "name": {"type": "string"},
        **{k: v[0] for k, v in DOT_FIELDS.items()},
    },
    "additionalProperties": False,
    "if": {"not": {"required": ["preset"]}},
    "then": {"required": ["fss", "gamma_e", "gamma_h"]},
}

DRIVE_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "name": {"type": "string"},
        "polarization": {"enum": ["H", "V"]},
        "delta_cw_zero": ENERGY,
        "a_dipole": _quantity(["meV^2 um^2/W", "meV^2·µm^2/W"], 0),
        "k_screen": _quantity(["eV um^2/W", "eV·µm^2/W"]),
    },
    "additionalProperties": False,
    "if": {"not": {"required": ["preset"]}},
    "then": {"required": ["polarization", "delta_cw_zero", "a_dipole", "k_screen"]},
}

SWEEP_SCHEMA = {
    "type": "object",
    "properties": {
        "unit": {"type": "string"},
        "start": {"type": "number"},
        "stop": {"type": "number"},
        "num": {"type": "integer", "minimum": 1},
        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1},
    },
    "required": ["unit"],
    "additionalProperties": False,
}

ANCHOR_SCHEMA = {
    "type": "array",
    "minItems": 2,
    "maxItems": 2,
    "items": {
        "type": "object",
        "properties": {"field": FIELD, "rate": RATE},
        "required": ["field", "rate"],
        "additionalProperties": False,
    },
}

RATES_SCHEMA = {
    "type": "object",
    "properties": {
        "preset": {"type": "string"},
        "rows": {
            "type": "array",
            "minItems": 2,
            "items": {
                "type": "object",
                "properties": {
                    "field": FIELD,
                    "bias": VOLTAGE,
                    "gamma_e": RATE,
                    "gamma_h": RATE,
                },
                "required": ["gamma_e", "gamma_h"],
                "oneOf": [{"required": ["field"]}, {"required": ["bias"]}],
                "additionalProperties": False,
            },
        },
        "generator": {
            "type": "object",
            "properties": {
                "electron": ANCHOR_SCHEMA,
                "hole": ANCHOR_SCHEMA,
                "fields": SWEEP_SCHEMA,
            },
            "required": ["electron", "hole", "fields"],
            "additionalProperties": False,
        },
    },
    "additionalProperties": False,
}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "scenario": {"enum": SCENARIOS},
        "dots": {"type": "array", "items": DOT_SCHEMA, "minItems": 1},
        "reference_rates": {
            "type": "object",
            "properties": {"gamma_e": RATE, "gamma_h": RATE, "gamma_r": RATE},
            "required": ["gamma_e"],
            "additionalProperties": False,
        },
        "drives": {"type": "array", "items": DRIVE_SCHEMA, "minItems": 1},
        "rates": RATES_SCHEMA,
        "diode": {
            "type": "object",
            "properties": {"v_bi": VOLTAGE, "w_i": LENGTH_NM},
            "additionalProperties": False,
        },
        "sweep": SWEEP_SCHEMA,
        "intensities": SWEEP_SCHEMA,
        "noise": {
            "type": "object",
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "level": {"type": "number", "minimum": 0},
                "trials": {"type": "integer", "minimum": 1},
            },
            "additionalProperties": False,
        },
        "spectrum": {
            "type": "object",
            "properties": {
                "pulse_fwhm": ENERGY_POS,
                "trion_binding": ENERGY,
                "probe_delay": TIME,
                "noise_sigma": {"type": "number", "minimum": 0},
                "pc_scale": {"type": "number", "exclusiveMinimum": 0},
                "x0_dip": {"type": "number"},
                "detuning_step": ENERGY_POS,
            },
            "additionalProperties": False,
        },
        "cw_line": {
            "type": "object",
            "properties": {
                "fss": ENERGY,
                "linewidth": ENERGY_POS,
                "waveplate_zero": ANGLE,
                "e_v": ENERGY,
                "amplitude": {"type": "number", "exclusiveMinimum": 0},
                "noise_sigma": {"type": "number", "minimum": 0},
                "span": ENERGY_POS,
                "step": ENERGY_POS,
                "angles": SWEEP_SCHEMA,
            },
            "required": ["fss"],
            "additionalProperties": False,
        },
        "fit": {
            "type": "object",
            "properties": {
                "model": {"type": "string"},
                "data": {"type": "string"},
                "x_column": {"type": "string"},
                "y_column": {"type": "string"},
                "sigma_column": {"type": "string"},
            },
            "required": ["model", "data"],
            "additionalProperties": False,
        },
        "oracle_points": {"type": "integer", "minimum": 0},
        "verify": {"type": "boolean"},
        "output": {
            "type": "object",
            "properties": {
                "dir": {"type": "string"},
                "stem": {"type": "string", "minLength": 1},
                "svg": {"type": "boolean"},
                "format": {"enum": ["csv", "json"]},
            },
            "additionalProperties": False,
        },
    },
    "required": ["schema", "scenario"],
    "additionalProperties": False,
}

_VALIDATOR = Draft202012Validator(CONFIG_SCHEMA)


def _pointer(parts) -> str:
    return "".join(f"/{str(p).replace('~', '~0').replace('/', '~1')}" for p in parts)


def validate_document(doc: Dict[str, Any]) -> None:
    """Validate a config document against the schema.

    Raises:
        ConfigError: With the JSON pointer of the first offending element; for a
            missing field the pointer names the field itself
    """
    errors = sorted(_VALIDATOR.iter_errors(doc), key=lambda e: (_pointer(e.absolute_path), e.message))
    if not errors:
        return
    err = errors[0]
    parts = list(err.absolute_path)
    if err.validator == "required" and isinstance(err.instance, dict):
        missing = [k for k in err.validator_value if k not in err.instance]
        if missing:
            parts.append(missing[0])
            raise ConfigError(f"missing required field {missing[0]!r}", _pointer(parts))
    if err.validator == "additionalProperties" and isinstance(err.instance, dict):
        allowed = set(err.schema.get("properties", {}))
        extra = sorted(k for k in err.instance if k not in allowed)
        if extra:
            parts.append(extra[0])
            raise ConfigError(f"unknown key {extra[0]!r}", _pointer(parts))
    raise ConfigError(err.message, _pointer(parts))


# Presets
def load_presets() -> Dict[str, Any]:
    text = resources.files("qdspin").joinpath("data/presets.json").read_text(encoding="utf-8")
    return json.loads(text)


def default_scenario_document(scenario: str) -> Dict[str, Any]:
    if scenario not in SCENARIOS:
        raise ConfigError(f"unknown scenario {scenario!r}", "/scenario")
    text = resources.files("qdspin").joinpath(f"data/scenarios/{scenario}.json").read_text(encoding="utf-8")
    return json.loads(text)


def config_sha256(doc: Dict[str, Any]) -> str:
    canonical = json.dumps(doc, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


# Parsed configuration
@dataclass
class ScenarioConfig:
    scenario: str
    document: Dict[str, Any]
    sha256: str
    dots: List[QuantumDotParams] = field(default_factory=list)
    reference_rates: Optional[Tuple[Rate, Rate, Rate]] = None
    drives: List[CwDriveConfig] = field(default_factory=list)
    rates: Optional[RateTable] = None
    geometry: DiodeGeometry = field(default_factory=DiodeGeometry)
    sweep: Optional[np.ndarray] = None
    sweep_unit: Optional[str] = None
    intensities: Optional[np.ndarray] = None
    seed: int = 0
    noise_level: float = 0.0
    trials: int = 1
    spectrum: SpectrumConfig = field(default_factory=SpectrumConfig)
    cw_line: Optional[CwLineConfig] = None
    angles: Optional[np.ndarray] = None
    fit: Optional[Dict[str, Any]] = None
    oracle_points: int = 0
    verify: bool = False
    output_dir: Path = field(default_factory=get_default_output_dir)
    stem: str = ""
    svg: bool = True
    fmt: str = "csv"
    base_dir: Path = field(default_factory=Path.cwd)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "scenario": self.scenario,
            "config_sha256": self.sha256,
            "seed": self.seed,
            "noise_level": self.noise_level,
            "output_dir": str(self.output_dir),
            "stem": self.stem,
            "format": self.fmt,
            "verify": self.verify,
        }


def _q(block: Dict[str, Any], cls: Type[Quantity], path: str) -> Quantity:
    if not cls.accepts_unit(block["unit"]):
        raise ConfigError(f"unit {block['unit']!r} is not {cls.unit}", f"{path}/unit")
    try:
        return cls(block["value"])
    except QuantityError as e:
        raise ConfigError(str(e), f"{path}/value") from e


def _merge_preset(block: Dict[str, Any], table: Dict[str, Any], path: str) -> Dict[str, Any]:
    if "preset" not in block:
        return dict(block)
    name = block["preset"]
    if name not in table:
        raise ConfigError(f"unknown preset {name!r}", f"{path}/preset")
    merged = {k: v for k, v in table[name].items() if not k.startswith("_")}
    merged.update({k: v for k, v in block.items() if k != "preset"})
    merged.setdefault("name", name)
    return merged


def parse_dot(block: Dict[str, Any], presets: Dict[str, Any], path: str) -> QuantumDotParams:
    merged = _merge_preset(block, presets.get("dots", {}), path)
    kwargs: Dict[str, Any] = {}
    for key, (_, cls) in DOT_FIELDS.items():
        if key in merged:
            kwargs["fss_zero" if key == "fss" else key] = _q(merged[key], cls, f"{path}/{key}")
    for key in ("fss_zero", "gamma_e", "gamma_h"):
        if key not in kwargs:
            name = "fss" if key == "fss_zero" else key
            raise ConfigError(f"missing required field {name!r}", f"{path}/{name}")
    try:
        return QuantumDotParams(name=merged.get("name", "qd"), **kwargs)
    except ParameterError as e:
        raise ConfigError(str(e), path) from e


def parse_drive(block: Dict[str, Any], presets: Dict[str, Any], path: str) -> CwDriveConfig:
    merged = _merge_preset(block, presets.get("drives", {}), path)
    try:
        return CwDriveConfig(
            polarization=merged["polarization"],
            delta_cw_zero=_q(merged["delta_cw_zero"], Energy, f"{path}/delta_cw_zero"),
            a_dipole=float(merged["a_dipole"]["value"]),
            k_screen=float(merged["k_screen"]["value"]),
            name=merged.get("name", "cw"),
        )
    except KeyError as e:
        raise ConfigError(f"missing required field {e.args[0]!r}", f"{path}/{e.args[0]}") from e
    except ParameterError as e:
        raise ConfigError(str(e), path) from e


def parse_sweep(block: Dict[str, Any], path: str) -> np.ndarray:
    if "values" in block:
        if any(k in block for k in ("start", "stop", "num")):
            raise ConfigError("give either values or start/stop/num", path)
        values = np.asarray(block["values"], dtype=float)
    else:
        missing = [k for k in ("start", "stop", "num") if k not in block]
        if missing:
            raise ConfigError(f"missing required field {missing[0]!r}", f"{path}/{missing[0]}")
        values = np.linspace(block["start"], block["stop"], block["num"])
    if values.size > 1 and not (np.all(np.diff(values) > 0) or np.all(np.diff(values) < 0)):
        raise ConfigError("sweep values must be strictly monotone", path)
    return values


def expect_sweep_unit(cfg: ScenarioConfig, cls: Type[Quantity]) -> None:
    if cfg.sweep_unit is not None and not cls.accepts_unit(cfg.sweep_unit):
        raise ConfigError(f"sweep unit {cfg.sweep_unit!r} must be {cls.unit}", "/sweep/unit")


def parse_rates(block: Dict[str, Any], presets: Dict[str, Any], geom: DiodeGeometry, path: str) -> RateTable:
    if "preset" in block:
        table = presets.get("rates", {})
        if block["preset"] not in table:
            raise ConfigError(f"unknown preset {block['preset']!r}", f"{path}/preset")
        block = {**table[block["preset"]], **{k: v for k, v in block.items() if k != "preset"}}
        block = {k: v for k, v in block.items() if not k.startswith("_")}
    try:
        if "rows" in block:
            rows = []
            for i, row in enumerate(block["rows"]):
                r = {
                    "gamma_e": _q(row["gamma_e"], Rate, f"{path}/rows/{i}/gamma_e").value,
                    "gamma_h": _q(row["gamma_h"], Rate, f"{path}/rows/{i}/gamma_h").value,
                }
                if "field" in row:
                    r["field"] = _q(row["field"], Field, f"{path}/rows/{i}/field").value
                else:
                    r["bias"] = _q(row["bias"], Voltage, f"{path}/rows/{i}/bias").value
                rows.append(r)
            return RateTable.from_rows(rows, geom)
        if "generator" in block:
            gen = block["generator"]
            laws = {}
            for carrier in ("electron", "hole"):
                anchors = [
                    (
                        _q(a["field"], Field, f"{path}/generator/{carrier}/{i}/field").value,
                        _q(a["rate"], Rate, f"{path}/generator/{carrier}/{i}/rate").value,
                    )
                    for i, a in enumerate(gen[carrier])
                ]
                laws[carrier] = ExpRateLaw.from_anchors(anchors)
            fields = parse_sweep(gen["fields"], f"{path}/generator/fields")
            return RateTable.from_laws(laws["electron"], laws["hole"], fields)
    except ParameterError as e:
        raise ConfigError(str(e), path) from e
    raise ConfigError("rates need rows, generator or preset", path)


def parse_document(doc: Dict[str, Any], base_dir: Optional[Path] = None) -> ScenarioConfig:
    """Validate and convert a config document into typed records."""
    validate_document(doc)
    presets = load_presets()
    cfg = ScenarioConfig(scenario=doc["scenario"], document=doc, sha256=config_sha256(doc))
    cfg.base_dir = base_dir or Path.cwd()

    geom = get_default_geometry()
    if "diode" in doc:
        d = doc["diode"]
        try:
            geom = DiodeGeometry(
                v_bi=_q(d["v_bi"], Voltage, "/diode/v_bi") if "v_bi" in d else geom.v_bi,
                w_i_nm=float(d["w_i"]["value"]) if "w_i" in d else geom.w_i_nm,
            )
        except ParameterError as e:
            raise ConfigError(str(e), "/diode") from e
    cfg.geometry = geom

    cfg.dots = [parse_dot(b, presets, f"/dots/{i}") for i, b in enumerate(doc.get("dots", []))]
    cfg.drives = [parse_drive(b, presets, f"/drives/{i}") for i, b in enumerate(doc.get("drives", []))]
    if "reference_rates" in doc:
        rr = doc["reference_rates"]
        zero = {"value": 0.0, "unit": Rate.unit}
        cfg.reference_rates = (
            _q(rr["gamma_e"], Rate, "/reference_rates/gamma_e"),
            _q(rr.get("gamma_h", zero), Rate, "/reference_rates/gamma_h"),
            _q(rr.get("gamma_r", zero), Rate, "/reference_rates/gamma_r"),
        )
    if "rates" in doc:
        cfg.rates = parse_rates(doc["rates"], presets, geom, "/rates")
    if "sweep" in doc:
        cfg.sweep = parse_sweep(doc["sweep"], "/sweep")
        cfg.sweep_unit = doc["sweep"]["unit"]
    if "intensities" in doc:
        if doc["intensities"]["unit"] not in _units(Intensity):
            raise ConfigError("intensities must be in kW/cm^2", "/intensities/unit")
        cfg.intensities = parse_sweep(doc["intensities"], "/intensities")

    noise = doc.get("noise", {})
    cfg.seed = int(noise.get("seed", 0))
    cfg.noise_level = float(noise.get("level", 0.0))
    cfg.trials = int(noise.get("trials", 1))

    sp = doc.get("spectrum", {})
    try:
        spectrum = SpectrumConfig(rng_seed=cfg.seed)
        updates: Dict[str, Any] = {}
        for key, cls in (
            ("pulse_fwhm", Energy),
            ("trion_binding", Energy),
            ("probe_delay", Time),
            ("detuning_step", Energy),
        ):
            if key in sp:
                updates[key] = _q(sp[key], cls, f"/spectrum/{key}")
        for key in ("noise_sigma", "pc_scale", "x0_dip"):
            if key in sp:
                updates[key] = float(sp[key])
        cfg.spectrum = replace(spectrum, **updates)
    except ParameterError as e:
        raise ConfigError(str(e), "/spectrum") from e

    if "cw_line" in doc:
        cw = doc["cw_line"]
        try:
            kwargs: Dict[str, Any] = {"fss": _q(cw["fss"], Energy, "/cw_line/fss"), "rng_seed": cfg.seed}
            for key in ("linewidth", "e_v", "span", "step"):
                if key in cw:
                    kwargs[key] = _q(cw[key], Energy, f"/cw_line/{key}")
            if "waveplate_zero" in cw:
                kwargs["waveplate_zero"] = float(cw["waveplate_zero"]["value"])
            for key in ("amplitude", "noise_sigma"):
                if key in cw:
                    kwargs[key] = float(cw[key])
            cfg.cw_line = CwLineConfig(**kwargs)
        except ParameterError as e:
            raise ConfigError(str(e), "/cw_line") from e
        if "angles" in cw:
            if cw["angles"]["unit"] != "deg":
                raise ConfigError("angles must be in deg", "/cw_line/angles/unit")
            cfg.angles = parse_sweep(cw["angles"], "/cw_line/angles")

    cfg.fit = doc.get("fit")
    cfg.oracle_points = int(doc.get("oracle_points", 0))
    cfg.verify = bool(doc.get("verify", False))

    out = doc.get("output", {})
    if "dir" in out:
        out_dir = Path(out["dir"]).expanduser()
        cfg.output_dir = (out_dir if out_dir.is_absolute() else cfg.base_dir / out_dir).resolve()
    cfg.stem = out.get("stem", cfg.scenario)
    cfg.svg = bool(out.get("svg", True))
    cfg.fmt = out.get("format", "csv")
    return cfg


def read_document(path: Path) -> Dict[str, Any]:
    """Read a config file as a JSON object without validating it.

    Raises:
        ConfigError: On invalid JSON
        OSError: If the file cannot be read
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e.msg} (line {e.lineno})") from e
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    return doc


def load_config(path: Path) -> ScenarioConfig:
    """Read, validate and parse a scenario config file.

    Raises:
        ConfigError: On invalid JSON or schema violations
        OSError: If the file cannot be read
    """
    path = Path(path)
    return parse_document(read_document(path), base_dir=path.parent.resolve())


def load_default_config(scenario: str) -> ScenarioConfig:
    return parse_document(default_scenario_document(scenario))
