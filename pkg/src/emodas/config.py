"""Pipeline configuration: one JSON object controlling every stage.

Any subset of keys may appear in the config file; the rest fall back to the
defaults below. The sha256 checksum of the resolved config is stamped into
every artifact so results can always be traced back to the exact settings
that produced them. The only environment override is EMODAS_RESOURCE_DIR
for the parser resource directory.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigurationError, InputDataError
from .features import MASKS
from .mlp import TrainConfig
from .parser import default_resource_dir
from .seeding import derive_seed
from .stats import TIPPING_POINTS

ENV_RESOURCE_DIR = "EMODAS_RESOURCE_DIR"


def _default_tipping() -> dict[str, float]:
    return dict(TIPPING_POINTS)


@dataclass
class PipelineConfig:
    min_count: int = 2
    similarity_threshold: float = 0.5
    folds: int = 4
    repeats: int = 10
    feature_mask: str = "ALL_EXCEPT_FEAR"
    entropy_pairs: str = "consecutive"  # or "all_pairs"
    median_mode: str = "low"  # position-weight median convention
    master_seed: int = 0
    learning_rate: float = 1e-3
    epochs: int = 500
    batch_size: int = 16
    optimizer: str = "adam"
    weight_decay: float = 0.0
    dropout_rate: float = 0.2
    hidden_layers: list[int] = field(default_factory=lambda: [25, 25])
    tipping_points: dict[str, float] = field(default_factory=_default_tipping)
    resource_dir: str | None = None

    def validate(self) -> "PipelineConfig":
        if self.min_count < 1:
            raise ConfigurationError("min_count must be at least 1")
        if not 0.0 < self.similarity_threshold <= 1.0:
            raise ConfigurationError("similarity_threshold must be in (0, 1]")
        if self.folds < 2:
            raise ConfigurationError("folds must be at least 2")
        if self.repeats < 1:
            raise ConfigurationError("repeats must be at least 1")
        if self.feature_mask not in MASKS:
            raise ConfigurationError(
                f"unknown feature_mask {self.feature_mask!r}; "
                f"valid: {', '.join(sorted(MASKS))}"
            )
        if self.entropy_pairs not in ("consecutive", "all_pairs"):
            raise ConfigurationError(
                "entropy_pairs must be 'consecutive' or 'all_pairs'"
            )
        if self.median_mode not in ("low", "mean"):
            raise ConfigurationError("median_mode must be 'low' or 'mean'")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.epochs < 1 or self.batch_size < 1:
            raise ConfigurationError("epochs and batch_size must be at least 1")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigurationError("optimizer must be 'adam' or 'sgd'")
        if self.weight_decay < 0:
            raise ConfigurationError("weight_decay must be non-negative")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigurationError("dropout_rate must be in [0, 1)")
        if not self.hidden_layers or any(
            int(h) != h or h < 1 for h in self.hidden_layers
        ):
            raise ConfigurationError("hidden_layers must be positive integers")
        expected = {"depression", "anxiety", "stress"}
        if set(self.tipping_points) != expected:
            raise ConfigurationError(
                f"tipping_points must have exactly the keys {sorted(expected)}"
            )
        return self

    def to_dict(self) -> dict:
        return asdict(self)

    def checksum(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def seed_for(self, stage: str) -> int:
        """Per-stage seed derived from the master seed."""
        return derive_seed(self.master_seed, stage)

    def train_config(self, seed: int = 0) -> TrainConfig:
        return TrainConfig(
            learning_rate=self.learning_rate,
            epochs=self.epochs,
            batch_size=self.batch_size,
            optimizer=self.optimizer,
            weight_decay=self.weight_decay,
            seed=seed,
        )

    def resolve_resource_dir(self) -> Path:
        """Config value, then EMODAS_RESOURCE_DIR, then the bundled toy set."""
        if self.resource_dir:
            return Path(self.resource_dir)
        env = os.environ.get(ENV_RESOURCE_DIR)
        if env:
            return Path(env)
        return default_resource_dir()


def load_config(path: str | None = None) -> PipelineConfig:
    """Read a JSON config file; unknown keys are rejected, missing keys
    default. ``None`` gives the all-defaults config."""
    if path is None:
        return PipelineConfig().validate()
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise InputDataError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(raw, dict):
        raise InputDataError(f"{path}: config must be a JSON object")
    known = {f for f in PipelineConfig.__dataclass_fields__}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown config keys: {', '.join(unknown)}"
        )
    return PipelineConfig(**raw).validate()
