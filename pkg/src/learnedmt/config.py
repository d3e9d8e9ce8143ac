"""Flat run configuration, read from a JSON object.

Defaults: Adam, batch 16, layer and feed-forward dropout 0.1, margin 1.0,
learning rates 3e-5/1e-5, one frozen estimator epoch, seed 3, toy encoder
width.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, fields
from pathlib import Path

from .encoder import EncoderConfig
from .estimator import EstimatorConfig
from .ranker import RankerConfig
from .rng import DEFAULT_SEED


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    seed: int = DEFAULT_SEED
    encoder: str = "transformer"
    vocab_size: int = 8192
    d: int = 32
    k: int = 4
    heads: int = 4
    ff: int = 128
    encoder_dropout: float = 0.1
    layer_dropout: float = 0.1
    epochs: int = 3
    batch_size: int = 16
    # estimator
    hidden: tuple[int, int] | None = None
    ff_dropout: float = 0.1
    frozen_epochs: int = 1
    lr_head: float = 3e-5
    lr_encoder: float = 1e-5
    include_source: bool = False
    # ranker
    margin: float = 1.0
    lr: float = 1e-5
    use_source: bool = True
    # data
    train_path: str | None = None
    test_path: str | None = None

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            kind=self.encoder, vocab_size=self.vocab_size, d=self.d, k=self.k,
            heads=self.heads, ff=self.ff, dropout=self.encoder_dropout, seed=self.seed,
        )

    def estimator_config(self) -> EstimatorConfig:
        return EstimatorConfig(
            encoder=self.encoder_config(), hidden=self.hidden, ff_dropout=self.ff_dropout,
            layer_dropout=self.layer_dropout, epochs=self.epochs,
            frozen_epochs=self.frozen_epochs, lr_head=self.lr_head, lr_encoder=self.lr_encoder,
            batch_size=self.batch_size, include_source=self.include_source,
        )

    def ranker_config(self) -> RankerConfig:
        return RankerConfig(
            encoder=self.encoder_config(), layer_dropout=self.layer_dropout, margin=self.margin,
            lr=self.lr, epochs=self.epochs, batch_size=self.batch_size, use_source=self.use_source,
        )

    @classmethod
    def from_dict(cls, values: dict) -> RunConfig:
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(values) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
        values = dict(values)
        if values.get("hidden") is not None:
            values["hidden"] = tuple(values["hidden"])
        try:
            cfg = cls(**values)
            cfg.estimator_config()
            cfg.ranker_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None
        return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        values = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from None
    if not isinstance(values, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    return RunConfig.from_dict(values)
