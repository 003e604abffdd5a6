"""Configuration for bintpl.

Configuration lives in one TOML file whose sections mirror the models below.
Command-line flags override file values, which override the defaults. The
defaults are the detection constants: K=100 neighbors, 200 retrieved units,
cosine 0.8 for pairing, 3 common edges for basic-feature candidates and the
basic-feature matching rules (0.5 / 100 / 0.1 / 20).
"""

import logging
import tomllib
from pathlib import Path
from typing import Any, Dict, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from bintpl.errors import ConfigurationError

logger = logging.getLogger(__name__)


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid")


class PathsConfig(_Section):
    """Default artifact locations (all optional)."""
    db: Optional[Path] = None
    model: Optional[Path] = None
    corpus: Optional[Path] = None


class RetrievalConfig(_Section):
    """Knobs of the function retrieval channel and the FCG filter."""
    k: int = Field(100, gt=0, description="Neighbors retrieved per target function")
    unit_cap: int = Field(200, gt=0, description="Units passed from retrieval to the filter")
    channel_a_min_edges: int = Field(3, gt=0, description="Common edges a basic-feature candidate needs")
    channel_b_min_edges: int = Field(1, gt=0, description="Common edges a retrieval candidate needs")
    pair_threshold: float = Field(0.8, gt=0.0, lt=1.0, description="Cosine a pair must exceed")
    retrieval_pair_threshold: float = Field(
        0.8, gt=-1.0, lt=1.0,
        description="Cosine a retrieval hit must exceed to be carried as a pair into the filter",
    )
    retrieval_pair_margin: float = Field(
        0.0, ge=0.0, lt=2.0,
        description="How far below a target function's best database cosine a hit may fall and still be carried as a pair",
    )


class BasicRules(_Section):
    """Basic-feature matching rules; every comparison is strict."""
    string_proportion: float = Field(0.5, ge=0.0, le=1.0)
    weight_sum: float = Field(100.0, ge=0.0)
    weight_proportion: float = Field(0.1, ge=0.0, le=1.0)
    export_count: int = Field(20, ge=0)


class VanillaRules(_Section):
    """Plain overlap rules of the vanilla basic-feature baseline; strict comparisons."""
    feature_count: int = Field(15, ge=0, description="Common strings plus exported names")
    feature_proportion: float = Field(0.2, ge=0.0, le=1.0, description="Common features / unit features")


class StringConfig(_Section):
    """String literal extraction and weighting."""
    min_length: int = Field(5, gt=0)
    weight_cap: float = Field(50.0, gt=0.0)
    special_multiplier: float = Field(2.0, gt=0.0)


class EmbeddingConfig(_Section):
    """Embedding network dimensions and training hyperparameters."""
    embedding_dim: int = Field(64, gt=0)
    iterations: int = Field(5, ge=0)
    learning_rate: float = Field(1e-3, gt=0.0)
    batch_size: int = Field(32, gt=0)
    epochs: int = Field(20, gt=0)
    validation_fraction: float = Field(0.2, gt=0.0, lt=1.0)


class VersionDistanceConfig(_Section):
    """Per-component weights of the version distance."""
    major: float = Field(10.0, ge=0.0)
    minor: float = Field(1.0, ge=0.0)
    patch: float = Field(0.1, ge=0.0)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.major, self.minor, self.patch)


class Config(_Section):
    """Top-level configuration."""
    paths: PathsConfig = Field(default_factory=PathsConfig)
    retrieval: RetrievalConfig = Field(default_factory=RetrievalConfig)
    basic_rules: BasicRules = Field(default_factory=BasicRules)
    vanilla_rules: VanillaRules = Field(default_factory=VanillaRules)
    strings: StringConfig = Field(default_factory=StringConfig)
    embedding: EmbeddingConfig = Field(default_factory=EmbeddingConfig)
    version_distance: VersionDistanceConfig = Field(default_factory=VersionDistanceConfig)
    seed: int = 0
    output_format: Literal["json", "text"] = "json"
    channels: Literal["basic", "fr", "both"] = "both"
    basic_matching: Literal["rules", "vanilla"] = "rules"
    use_fcg_filter: bool = True
    workers: int = Field(1, gt=0)
    timeout_mins: float = Field(30.0, gt=0.0)


def _validation_paths(error: ValidationError) -> list[str]:
    return [
        ".".join(str(part) for part in item["loc"]) + f": {item['msg']}"
        for item in error.errors()
    ]


def load_config(path: Optional[Union[str, Path]] = None) -> Config:
    """Load configuration from a TOML file, or return defaults.

    Args:
        path: Path to a TOML file, or None for defaults

    Returns:
        Validated Config

    Raises:
        ConfigurationError: If the file is unreadable, not TOML, or has
            unknown keys / invalid values
    """
    if path is None:
        return Config()

    path = Path(path)
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except FileNotFoundError as e:
        raise ConfigurationError(f"Config file not found: {path}") from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigurationError(f"Config file {path} is not valid TOML: {e}") from e

    try:
        config = Config.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(
            f"Invalid config {path}:\n  " + "\n  ".join(_validation_paths(e))
        ) from e

    logger.debug(f"Loaded config from {path}")
    return config


def with_overrides(config: Config, **overrides: Any) -> Config:
    """Return a copy of config with top-level overrides applied and validated.

    None values are ignored, so unset command-line flags leave the file value.
    """
    updates: Dict[str, Any] = {k: v for k, v in overrides.items() if v is not None}
    if not updates:
        return config
    try:
        return Config.model_validate({**config.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigurationError(
            "Invalid override:\n  " + "\n  ".join(_validation_paths(e))
        ) from e
