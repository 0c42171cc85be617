"""
Configuration service.

This module parses and emits experiment configuration files and manages
user settings stored in ~/.cellsearch/settings.json

Available methods:
- parse_config(text): Parse an INI experiment configuration into an ExperimentSpec.
- emit_config(spec): Write an ExperimentSpec in canonical linear form.
- load_config_file(path): Parse a configuration file from disk.
- load_settings(): Load user settings from disk.
- save_settings(settings): Save user settings to disk.
- get_default_settings(): Get default user settings.
- update_settings(updates): Update user settings with key-value pairs.

Configuration sections:
- [experiment]: preset, sweep, engines, trials, seed, output and scheme list.
- [system]: SystemParams fields; sinr_threshold_db, p_bs_control_dbm and
  p_bs_data_dbm are accepted in place of their linear keys.
- [frame]: FrameTiming fields.
- [search]: Scheme options (stage-1 beams, NLOS links, data codebook oversampling).

Settings keys:
- output_dir: Last directory results were written to; presets and
  default sweeps write there when --out is not given.
- workers: Default number of worker processes.
"""
import configparser
import json
import logging
import re
from dataclasses import fields, replace
from pathlib import Path
from typing import Callable, Dict, Optional

from models.errors import ConfigError
from models.experiment import ExperimentSpec
from models.system import FrameTiming, SystemParams
from utils.units import db_to_linear, dbm_to_watts

logger = logging.getLogger(__name__)

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s\[][^=:]*?)\s*[=:]")

_DB_KEYS = {
    "sinr_threshold_db": ("sinr_threshold", lambda text: float(db_to_linear(float(text)))),
    "p_bs_control_dbm": ("p_bs_control", lambda text: float(dbm_to_watts(float(text)))),
    "p_bs_data_dbm": ("p_bs_data", lambda text: float(dbm_to_watts(float(text)))),
}

_EXPERIMENT_KEYS = (
    "preset", "sweep_parameter", "sweep_values", "engines", "trials", "seed",
    "output_path", "schemes", "antenna", "models", "metric", "rate_convention",
    "packet_bits", "k_cycles",
)
_SEARCH_KEYS = ("stage1_beamwidth", "stage1_active_elements", "nlos_enabled", "oversampling")

_ENGINE_ALIASES = {"mc": "monte_carlo"}


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("true", "yes", "on", "1"):
        return True
    if value in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_int(text: str) -> int:
    value = float(text)
    if not value.is_integer():
        raise ValueError(f"not an integer: {text!r}")
    return int(value)


def _parse_optional_int(text: str) -> Optional[int]:
    if text.strip().lower() in ("", "none"):
        return None
    return _parse_int(text)


def _parse_list(text: str) -> tuple[str, ...]:
    return tuple(item.strip() for item in text.split(",") if item.strip())


def _parse_floats(text: str) -> tuple[float, ...]:
    return tuple(float(item) for item in _parse_list(text))


def _parse_engines(text: str) -> tuple[str, ...]:
    return tuple(_ENGINE_ALIASES.get(e, e) for e in _parse_list(text))


def _converter(annotation) -> Callable[[str], object]:
    text = str(annotation)
    if "Optional" in text or "None" in text:
        return _parse_optional_int
    if annotation is bool or text == "bool":
        return _parse_bool
    if annotation is int or text == "int":
        return _parse_int
    if annotation is float or text == "float":
        return float
    return str


_EXPERIMENT_CONVERTERS: Dict[str, Callable[[str], object]] = {
    "preset": str.strip,
    "sweep_parameter": str.strip,
    "sweep_values": _parse_floats,
    "engines": _parse_engines,
    "trials": _parse_int,
    "seed": _parse_int,
    "output_path": str.strip,
    "schemes": _parse_list,
    "antenna": str.strip,
    "models": _parse_list,
    "metric": str.strip,
    "rate_convention": str.strip,
    "packet_bits": float,
    "k_cycles": _parse_int,
    "stage1_beamwidth": float,
    "stage1_active_elements": _parse_int,
    "nlos_enabled": _parse_bool,
    "oversampling": _parse_int,
}


def _key_lines(text: str) -> Dict[tuple[str, str], int]:
    """Map (section, key) to the 1-based line defining it."""
    lines = {}
    section = None
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped[0] in "#;":
            continue
        match = _SECTION.match(line)
        if match:
            section = match.group(1).strip().lower()
            lines.setdefault((section, ""), number)
            continue
        match = _KEY.match(line)
        if match and section is not None:
            lines.setdefault((section, match.group(1).strip().lower()), number)
    return lines


def _blame(message: str, keys: list[tuple[str, str]]) -> tuple[str, str]:
    """First configured key named in a validation message."""
    for section, key in keys:
        name = _DB_KEYS[key][0] if key in _DB_KEYS else key
        if re.search(rf"\b{re.escape(name)}\b", message):
            return section, key
    return keys[0] if keys else ("", "")


def parse_config(text: str) -> ExperimentSpec:
    """
    Parse an experiment configuration.

    Omitted keys take their defaults; an empty text gives the default
    custom experiment.

    Args:
        text: INI text with [experiment], [system], [frame] and [search] sections.

    Returns:
        Validated ExperimentSpec with linear-scale values.

    Raises:
        ConfigError: For syntax errors, unknown sections or keys, malformed
            values and invariant violations, naming the key and its line.
    """
    lines = _key_lines(text)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text)
    except configparser.Error as e:
        line = getattr(e, "lineno", None)
        key = getattr(e, "option", None) or getattr(e, "section", None) or "config"
        raise ConfigError(str(key), str(e).splitlines()[0], line) from e

    sections = {
        "experiment": _EXPERIMENT_KEYS,
        "system": tuple(SystemParams.field_names()) + tuple(_DB_KEYS),
        "frame": tuple(f.name for f in fields(FrameTiming)),
        "search": _SEARCH_KEYS,
    }
    values: Dict[str, Dict[str, object]] = {name: {} for name in sections}
    seen: list[tuple[str, str]] = []
    system_types = {f.name: _converter(f.type) for f in fields(SystemParams)}
    frame_types = {f.name: _converter(f.type) for f in fields(FrameTiming)}

    for section in parser.sections():
        name = section.strip().lower()
        if name not in sections:
            raise ConfigError(section, "unknown section", lines.get((name, "")))
        for key, raw in parser.items(section):
            line = lines.get((name, key))
            if key not in sections[name]:
                raise ConfigError(key, f"unknown key in [{name}]", line)
            if name == "system":
                convert = _DB_KEYS[key][1] if key in _DB_KEYS else system_types[key]
            elif name == "frame":
                convert = frame_types[key]
            else:
                convert = _EXPERIMENT_CONVERTERS[key]
            try:
                value = convert(raw)
            except ValueError as e:
                raise ConfigError(key, f"invalid value {raw!r}: {e}", line) from e
            if key in _DB_KEYS:
                linear = _DB_KEYS[key][0]
                if linear in values["system"]:
                    raise ConfigError(key, f"conflicts with {linear}", line)
                key = linear
            elif name == "system" and key in values["system"]:
                raise ConfigError(key, "given both in linear and dB form", line)
            values[name][key] = value
            seen.append((name, key))

    try:
        params = SystemParams(**values["system"])
        frame = FrameTiming(**values["frame"])
        spec = ExperimentSpec(params=params, frame=frame, **values["experiment"], **values["search"])
    except (TypeError, ValueError) as e:
        section, key = _blame(str(e), seen)
        raise ConfigError(key or "config", str(e), lines.get((section, key))) from e

    logger.debug("parsed configuration: preset=%s, %d keys", spec.preset, len(seen))
    return spec


def _format(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if value is None:
        return "none"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


def emit_config(spec: ExperimentSpec) -> str:
    """
    Write an experiment specification as configuration text.

    Every key is written in linear form with full float precision, so
    parse_config(emit_config(spec)) == spec.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {key: _format(getattr(spec, key)) for key in _EXPERIMENT_KEYS}
    parser["system"] = {name: _format(getattr(spec.params, name)) for name in SystemParams.field_names()}
    parser["frame"] = {f.name: _format(getattr(spec.frame, f.name)) for f in fields(FrameTiming)}
    parser["search"] = {key: _format(getattr(spec, key)) for key in _SEARCH_KEYS}

    lines = []
    for section in parser.sections():
        lines.append(f"[{section}]")
        lines.extend(f"{key} = {value}" for key, value in parser.items(section))
        lines.append("")
    return "\n".join(lines)


def load_config_file(path: str) -> ExperimentSpec:
    """
    Parse a configuration file.

    Raises:
        ConfigError: If the file is invalid.
        IOError: If the file cannot be read.
    """
    config_path = Path(path)
    try:
        text = config_path.read_text(encoding="utf-8")
    except OSError as e:
        raise IOError(f"Failed to read configuration {config_path}: {e}")
    return parse_config(text)


def with_overrides(spec: ExperimentSpec, **overrides) -> ExperimentSpec:
    """Copy of spec with experiment-level overrides (None values ignored)."""
    updates = {k: v for k, v in overrides.items() if v is not None}
    return replace(spec, **updates) if updates else spec


def _get_settings_dir() -> Path:
    """
    Get the settings directory path.

    Returns:
        Path to ~/.cellsearch directory.
    """
    settings_dir = Path.home() / ".cellsearch"
    settings_dir.mkdir(parents=True, exist_ok=True)
    return settings_dir


def _get_settings_file() -> Path:
    return _get_settings_dir() / "settings.json"


def get_default_settings() -> Dict:
    """
    Get default user settings.

    Returns:
        Dictionary with default settings.
    """
    return {
        "output_dir": None,
        "workers": 1,
    }


def load_settings() -> Dict:
    """
    Load user settings from disk.

    Returns:
        Dictionary with settings. Returns defaults if the file doesn't exist
        or cannot be read.
    """
    settings_file = _get_settings_file()

    if not settings_file.exists():
        return get_default_settings()

    try:
        with settings_file.open("r", encoding="utf-8") as f:
            settings = json.load(f)
            default = get_default_settings()
            default.update(settings)
            return default
    except (json.JSONDecodeError, IOError):
        logger.warning("unreadable settings file %s; using defaults", settings_file)
        return get_default_settings()


def save_settings(settings: Dict):
    """
    Save user settings to disk.

    Raises:
        IOError: If unable to write the settings file.
    """
    settings_file = _get_settings_file()

    try:
        with settings_file.open("w", encoding="utf-8") as f:
            json.dump(settings, f, indent=2, ensure_ascii=False)
    except IOError as e:
        raise IOError(f"Failed to save settings: {str(e)}")


def update_settings(updates: Dict):
    """Update user settings with provided key-value pairs."""
    settings = load_settings()
    settings.update(updates)
    save_settings(settings)
