"""TOML configuration with one table per module; command-line flags win."""
from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .errors import ConfigError
from .evaluator.reward import CommandProfile, RewardWeights
from .evaluator.sim import SimConfig
from .ingest import SYMMETRY_THRESHOLD, DEFAULT_CANDIDATES

SECTIONS = ("sim", "reward", "evolution", "ingestion")
INGESTION_KEYS = {"endpoint", "candidates", "symmetry_threshold", "timeout", "workers"}


@dataclass
class Settings:
    sim: SimConfig = field(default_factory=SimConfig)
    weights: RewardWeights = field(default_factory=RewardWeights)
    command: CommandProfile = field(default_factory=CommandProfile)
    evolution: dict = field(default_factory=dict)
    ingestion: dict = field(default_factory=lambda: {"candidates": DEFAULT_CANDIDATES,
                                                     "symmetry_threshold": SYMMETRY_THRESHOLD})

    def with_evolution(self, **overrides) -> "Settings":
        """Flags override file values; None means the flag was not given."""
        evo = dict(self.evolution)
        evo.update({k: v for k, v in overrides.items() if v is not None})
        return replace(self, evolution=evo)


def parse_settings(doc: dict) -> Settings:
    unknown = set(doc) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    try:
        sim = SimConfig.from_dict(doc.get("sim", {}))
        reward = dict(doc.get("reward", {}))
        command = CommandProfile.from_dict(reward.pop("command", {}))
        weights = RewardWeights.from_dict(reward)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad config value: {exc}") from exc
    ingestion = {"candidates": DEFAULT_CANDIDATES, "symmetry_threshold": SYMMETRY_THRESHOLD}
    extra = set(doc.get("ingestion", {})) - INGESTION_KEYS
    if extra:
        raise ConfigError(f"unknown ingestion settings: {sorted(extra)}")
    ingestion.update(doc.get("ingestion", {}))
    evolution = dict(doc.get("evolution", {}))
    for key in ("command", "sim", "weights"):
        if key in evolution:
            raise ConfigError(f"put {key} settings in their own table, not under [evolution]")
    return Settings(sim, weights, command, evolution, ingestion)


def load_settings(path=None) -> Settings:
    if path is None:
        return Settings()
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        doc = tomllib.loads(path.read_text())
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path} is not valid TOML: {exc}") from exc
    return parse_settings(doc)
