import dataclasses
import json
import logging
import os
from typing import Any, Dict, Optional, Type

from jsonschema import validate
from jsonschema.exceptions import ValidationError

from src.aec.agc import AgcConfig
from src.aec.mdf import MdfConfig
from src.aec.omlsa import OmlsaConfig
from src.aec.pipeline import PipelineConfig
from src.aec.res import ResConfig
from src.aec.tde import BankGeometry
from src.data.synthesis import SynthConfig
from src.utils.exceptions import ConfigError

logger = logging.getLogger(__name__)

CONFIG_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "config")


def schema_path_for(config_file: str) -> str:
    """config/foo.json -> config/foo_schema.json, falling back to the bundled schema of the same name."""
    stem, ext = os.path.splitext(config_file)
    local = f"{stem}_schema{ext}"
    if os.path.exists(local):
        return local
    return os.path.join(CONFIG_DIR, f"{os.path.basename(stem)}_schema{ext}")


def validate_config(config_file: str, schema_file: Optional[str] = None) -> Dict[str, Any]:
    """
    Validates a JSON configuration file against a JSON schema and returns its content.

    Raises:
        ConfigError: missing file, invalid JSON or schema violation.
    """
    schema_file = schema_file or schema_path_for(config_file)
    try:
        with open(config_file, 'r') as f:
            config_data = json.load(f)
        with open(schema_file, 'r') as f:
            schema = json.load(f)
        validate(instance=config_data, schema=schema)
    except FileNotFoundError as e:
        raise ConfigError(f"File not found: {e.filename}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in {config_file} or {schema_file}: {e}") from e
    except ValidationError as e:
        where = "/".join(str(p) for p in e.absolute_path) or "<root>"
        raise ConfigError(f"Configuration validation failed for {config_file} at {where}: {e.message}") from e
    logger.debug(f"Configuration file '{config_file}' is valid.")
    return config_data


def from_dict(cls: Type, values: Optional[Dict[str, Any]], base: Any = None):
    """Dataclass instance with `values` laid over `base` (or the class defaults); unknown keys are rejected."""
    base = base if base is not None else cls()
    values = values or {}
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(values) - names)
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} keys: {unknown}")
    merged = {}
    for f in dataclasses.fields(cls):
        value = values.get(f.name, getattr(base, f.name))
        if isinstance(getattr(base, f.name), tuple) and isinstance(value, list):
            value = tuple(value)
        merged[f.name] = value
    return cls(**merged)


def pipeline_config_from_dict(config: Dict[str, Any]) -> PipelineConfig:
    """Build a PipelineConfig from the sections of `aec_config.json`."""
    tde = dict(config.get("tde", {}))
    hold = tde.pop("hold_frames", PipelineConfig.hold_frames)
    pipeline = dict(config.get("pipeline", {}))
    cfg = PipelineConfig(
        hold_frames=hold,
        geometry=from_dict(BankGeometry, tde),
        mdf=from_dict(MdfConfig, config.get("mdf")),
        res=from_dict(ResConfig, config.get("res")),
        omlsa=from_dict(OmlsaConfig, config.get("omlsa")),
        agc_params=from_dict(AgcConfig, config.get("agc")),
    )
    cfg = from_dict(PipelineConfig, pipeline, base=cfg)
    cfg.validate()
    return cfg


def load_pipeline_config(config_file: Optional[str] = None) -> PipelineConfig:
    if config_file is None:
        return PipelineConfig()
    return pipeline_config_from_dict(validate_config(config_file))


def load_synth_config(config_file: Optional[str] = None) -> SynthConfig:
    if config_file is None:
        return SynthConfig()
    data = validate_config(config_file)
    cfg = from_dict(SynthConfig, data.get("synthesis"))
    cfg.validate()
    return cfg


def dump_defaults() -> Dict[str, Any]:
    """Every configurable default, grouped the way the config files group them."""
    from src.training.trainer import TrainConfig

    pipeline = PipelineConfig()
    return {
        "aec": {
            "dsp": {"sample_rate": 16000, "frame_size": pipeline.geometry.frame_size},
            "mdf": dataclasses.asdict(pipeline.mdf),
            "tde": {**dataclasses.asdict(pipeline.geometry), "hold_frames": pipeline.hold_frames},
            "res": dataclasses.asdict(pipeline.res),
            "omlsa": dataclasses.asdict(pipeline.omlsa),
            "agc": dataclasses.asdict(pipeline.agc_params),
            "pipeline": {"stage": pipeline.stage, "agc": pipeline.agc,
                         "tde_model": pipeline.tde_model, "res_model": pipeline.res_model},
        },
        "data": {"synthesis": dataclasses.asdict(SynthConfig())},
        "training": {"training_params": dataclasses.asdict(TrainConfig())},
    }


if __name__ == '__main__':
    for name in ("aec_config", "data_config", "training_config"):
        validate_config(os.path.join(CONFIG_DIR, f"{name}.json"))
        print(f"Configuration file '{name}.json' is valid.")
