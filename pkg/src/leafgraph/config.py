"""Declarative pipeline configuration: TOML file + CLI overrides.

A config file holds ``[model]``, ``[paths]``, ``[split]``, ``[augment]`` and
``[service]`` tables; every field is optional and falls back to the dataclass
default.  Each CLI run echoes its effective configuration (seed included)
into the output directory for provenance.
"""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

try:
    import tomllib  # Python >= 3.11
except ModuleNotFoundError:  # pragma: no cover - depends on interpreter
    import tomli as tomllib

from .errors import DataError, UsageError
from .images import AugmentSpec
from .models import ModelConfig

SEED_ENV = "LEAFGRAPH_SEED"


@dataclass
class PipelineConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    manifest: str | None = None
    store: str | None = None
    image_dir: str | None = None
    graph_cache: str | None = None
    checkpoint: str | None = None
    out_dir: str = "out"
    split_fractions: tuple[float, float, float] = (0.8, 0.1, 0.1)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    host: str = "127.0.0.1"
    port: int = 8840
    seed_explicit: bool = False  # seed came from file or CLI, not the default


def _apply_table(obj, table: dict, name: str):
    valid = {f.name for f in fields(obj)}
    for key, value in table.items():
        if key not in valid:
            raise UsageError(f"unknown config key {name}.{key}")
        if isinstance(value, list):
            value = tuple(value)
        setattr(obj, key, value)


def load_config(path=None) -> PipelineConfig:
    cfg = PipelineConfig()
    if path is None:
        return cfg
    try:
        raw = tomllib.loads(Path(path).read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise DataError(f"bad config file {path}: {exc}") from exc
    model_kwargs = {k: (tuple(v) if isinstance(v, list) else v)
                    for k, v in raw.get("model", {}).items()}
    valid = {f.name for f in fields(ModelConfig)}
    for key in model_kwargs:
        if key not in valid:
            raise UsageError(f"unknown config key model.{key}")
    cfg.model = ModelConfig(**model_kwargs)
    cfg.seed_explicit = "seed" in model_kwargs
    paths = raw.get("paths", {})
    for key in paths:
        if key not in ("manifest", "store", "image_dir", "graph_cache",
                       "checkpoint", "out_dir"):
            raise UsageError(f"unknown config key paths.{key}")
        setattr(cfg, key, paths[key])
    if "split" in raw:
        frac = raw["split"].get("fractions")
        if frac is not None:
            if len(frac) != 3:
                raise DataError("split.fractions needs 3 entries")
            cfg.split_fractions = tuple(float(f) for f in frac)
    if "augment" in raw:
        spec = AugmentSpec()
        _apply_table(spec, raw["augment"], "augment")
        spec.__post_init__()
        cfg.augment = spec
    if "service" in raw:
        svc = raw["service"]
        cfg.host = svc.get("host", cfg.host)
        cfg.port = int(svc.get("port", cfg.port))
        for key in svc:
            if key not in ("host", "port"):
                raise UsageError(f"unknown config key service.{key}")
    return cfg


def resolve_seed(cfg: PipelineConfig, cli_seed: int | None) -> None:
    """Seed precedence: CLI flag > config file > LEAFGRAPH_SEED > default."""
    if cli_seed is not None:
        cfg.model.seed = cli_seed
        cfg.seed_explicit = True
    elif not cfg.seed_explicit and os.environ.get(SEED_ENV):
        try:
            cfg.model.seed = int(os.environ[SEED_ENV])
        except ValueError as exc:
            raise DataError(f"{SEED_ENV} must be an integer") from exc
        cfg.seed_explicit = True


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int, float)):
        return repr(v)
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'


def echo_config(cfg: PipelineConfig, out_dir, command: str) -> Path:
    """Write the effective configuration to <out_dir>/effective-config.toml."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = [f'command = "{command}"', ""]
    lines.append("[model]")
    for key, value in asdict(cfg.model).items():
        lines.append(f"{key} = {_toml_value(value)}")
    lines.append("")
    lines.append("[paths]")
    for key in ("manifest", "store", "image_dir", "graph_cache", "checkpoint",
                "out_dir"):
        value = getattr(cfg, key)
        if value is not None:
            lines.append(f"{key} = {_toml_value(value)}")
    lines.append("")
    lines.append("[split]")
    lines.append(f"fractions = {_toml_value(cfg.split_fractions)}")
    lines.append("")
    lines.append("[augment]")
    for key, value in asdict(cfg.augment).items():
        lines.append(f"{key} = {_toml_value(value)}")
    lines.append("")
    lines.append("[service]")
    lines.append(f"host = {_toml_value(cfg.host)}")
    lines.append(f"port = {cfg.port}")
    path = out_dir / "effective-config.toml"
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
