"""Pipeline configuration: built-in defaults, TOML config file, flag overrides.

Precedence is flag > config file > built-in default, per field. Built-in
defaults: alpha 0.7, k 50, top_n 5, window 3, stride 2, child_first ranking
with max-child aggregation, rewrite temperature 0.2, generation temperature
0.7 with 4096 max tokens.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .conversation import (
    GENERATION_MAX_TOKENS,
    GENERATION_TEMPERATURE,
    REWRITE_TEMPERATURE,
    TextProviderConfig,
)
from .embedding import EmbedderConfig
from .index import HybridConfig
from .ranking import DEFAULT_PARENT_TEXT_BUDGET, RankingConfig, STRATEGIES

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

DEFAULT_SNAPSHOT = "snapshot.json.gz"


def _default_rewrite_config() -> TextProviderConfig:
    return TextProviderConfig(kind="stub", temperature=REWRITE_TEMPERATURE, max_tokens=256)


def _default_generation_config() -> TextProviderConfig:
    return TextProviderConfig(
        kind="stub", temperature=GENERATION_TEMPERATURE, max_tokens=GENERATION_MAX_TOKENS
    )


@dataclass
class PipelineConfig:
    window: int = 3
    stride: int = 2
    include_title: bool = False
    alpha: float = 0.7
    k: int = 50
    strategy: str = "child_first"
    top_n: int = 5
    parent_text_budget: int = DEFAULT_PARENT_TEXT_BUDGET
    snapshot: str = DEFAULT_SNAPSHOT
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    rescorer: EmbedderConfig | None = None
    rewrite: TextProviderConfig = field(default_factory=_default_rewrite_config)
    generation: TextProviderConfig = field(default_factory=_default_generation_config)

    def validate(self) -> None:
        if self.window < 1 or not 1 <= self.stride <= self.window:
            raise ValueError("chunking requires window >= 1 and 1 <= stride <= window")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must be in [0, 1]")
        if self.k < 1 or self.top_n < 1:
            raise ValueError("k and top_n must be >= 1")
        self.embedder.validate()
        if self.rescorer is not None:
            self.rescorer.validate()
        self.rewrite.validate()
        self.generation.validate()

    def hybrid_config(self) -> HybridConfig:
        return HybridConfig(alpha=self.alpha, k=self.k)

    def ranking_config(self, rescorer=None) -> RankingConfig:
        return RankingConfig(
            strategy=self.strategy,
            top_n=self.top_n,
            rescorer=rescorer,
            parent_text_budget=self.parent_text_budget,
        )

    def override(self, **overrides) -> "PipelineConfig":
        """Return a copy with every non-None override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        config = replace(self, **changes)
        config.validate()
        return config


_SECTION_KEYS = {
    "chunking": {"window", "stride", "include_title"},
    "hybrid": {"alpha", "k"},
    "ranking": {"strategy", "top_n", "parent_text_budget"},
    "output": {"snapshot"},
}
_PROVIDER_SECTIONS = {"embedder", "rescorer", "rewrite", "generation"}


def _dataclass_from_table(cls, table: dict, section: str):
    known = {f.name for f in fields(cls)}
    unknown = set(table) - known
    if unknown:
        raise ValueError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    return cls(**table)


def load_config(path: str | Path) -> PipelineConfig:
    """Parse a TOML config file; keys not set fall back to built-in defaults."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    unknown_sections = set(data) - set(_SECTION_KEYS) - _PROVIDER_SECTIONS
    if unknown_sections:
        raise ValueError(f"unknown config section(s): {sorted(unknown_sections)}")

    flat: dict = {}
    for section, allowed in _SECTION_KEYS.items():
        table = data.get(section, {})
        unknown = set(table) - allowed
        if unknown:
            raise ValueError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
        flat.update(table)

    config = PipelineConfig(**flat)
    if "embedder" in data:
        config.embedder = _dataclass_from_table(EmbedderConfig, data["embedder"], "embedder")
    if "rescorer" in data:
        config.rescorer = _dataclass_from_table(EmbedderConfig, data["rescorer"], "rescorer")
    if "rewrite" in data:
        table = dict(data["rewrite"])
        table.setdefault("temperature", REWRITE_TEMPERATURE)
        table.setdefault("max_tokens", 256)
        config.rewrite = _dataclass_from_table(TextProviderConfig, table, "rewrite")
    if "generation" in data:
        config.generation = _dataclass_from_table(TextProviderConfig, data["generation"], "generation")
    config.validate()
    return config
