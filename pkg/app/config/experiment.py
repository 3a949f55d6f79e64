"""
Experiment config files.

Flat `key = value` lines at the top (no header needed), plus optional
sections:

    [tariff]
    105 = 1.0 0.5 0      # bus = rate max_rate_change sensitivity

    [genattack]
    101 = 2.0            # generator id = attack cost
"""
from configparser import ConfigParser, Error as ConfigParserError
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional
import logging

from pydantic import ValidationError

from app.models.experiment import ExperimentConfig, SweepParameter
from app.utils.exceptions import ConfigException

logger = logging.getLogger(__name__)

_ALIASES = {
    "case": "main_case",
    "attach": "attachments",
    "resource": "resource_fraction",
    "mgload": "microgrid_load_total",
    "out": "out_dir",
}
_LISTS = {"attachments", "sweep"}


def _split(raw: str) -> List[str]:
    return [tok for tok in raw.replace(",", " ").split() if tok]


def parse_experiment_config(text: str, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    parser = ConfigParser(inline_comment_prefixes=("#", ";"))
    if not text.lstrip().startswith("["):
        text = "[experiment]\n" + text
    try:
        parser.read_string(text)
    except ConfigParserError as e:
        raise ConfigException(f"malformed config: {e}")

    data: Dict[str, Any] = {}
    sweep_values: Dict[str, List[float]] = {}
    if parser.has_section("experiment"):
        for key, raw in parser.items("experiment"):
            key = _ALIASES.get(key, key)
            if key.startswith("sweep_"):
                sweep_values[key[len("sweep_"):]] = [float(v) for v in _split(raw)]
            elif key in _LISTS:
                data[key] = _split(raw)
            else:
                data[key] = raw.strip()
    if sweep_values:
        data["sweep_values"] = sweep_values

    if parser.has_section("tariff"):
        tariff = {}
        for bus, raw in parser.items("tariff"):
            cols = _split(raw)
            if len(cols) != 3:
                raise ConfigException(f"[tariff] {bus}: expected 'rate max_rate_change sensitivity'")
            tariff[bus] = {"rate": cols[0], "max_rate_change": cols[1], "sensitivity": cols[2]}
        data["tariff"] = tariff

    if parser.has_section("genattack"):
        data["genattack"] = dict(parser.items("genattack"))

    for key, value in (overrides or {}).items():
        if value is not None:
            data[key] = value

    try:
        return ExperimentConfig(**data)
    except (ValidationError, ValueError) as e:
        raise ConfigException(f"invalid experiment config: {e}")


def load_experiment_config(path: Optional[str] = None, overrides: Optional[Mapping[str, Any]] = None) -> ExperimentConfig:
    if path is None:
        return parse_experiment_config("", overrides)
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as e:
        raise ConfigException(f"cannot read config {p}: {e}")
    logger.info(f"Loaded experiment config from {p}")
    return parse_experiment_config(text, overrides)


def sweep_names() -> List[str]:
    return [p.value for p in SweepParameter]
