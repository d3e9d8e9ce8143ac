"""Regression head over pooled source/hypothesis/reference embeddings.

The three segments go through the same encoder and layer attention; their
sentence embeddings are combined into

    [h; r; h*s; h*r; |h-s|; |h-r|]

and a two-hidden-layer tanh network predicts the quality score. Training
minimises mean squared error with the encoder frozen for the first epoch(s).
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, DimensionError, ParamGroup, Tensor
from .data import EvalTuple
from .encoder import EncoderConfig, Segments, build_encoder
from .pooling import LayerAttention, sentence_embedding
from .rng import stream

log = logging.getLogger(__name__)

# the scalar output layer starts small so early predictions sit near zero
OUTPUT_INIT_GAIN = 0.1


@dataclass
class EstimatorConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    hidden: tuple[int, int] | None = None
    ff_dropout: float = 0.1
    layer_dropout: float = 0.1
    epochs: int = 3
    frozen_epochs: int = 1
    lr_head: float = 3e-5
    lr_encoder: float = 1e-5
    batch_size: int = 16
    include_source: bool = False

    def __post_init__(self):
        if self.hidden is None:
            d = self.encoder.d
            self.hidden = (round(9 * d), round(4.5 * d))
        self.hidden = tuple(int(h) for h in self.hidden)
        if len(self.hidden) != 2 or min(self.hidden) <= 0:
            raise ValueError(f"hidden widths must be two positive ints, got {self.hidden}")
        if self.batch_size < 1 or self.epochs < 0 or self.frozen_epochs < 0:
            raise ValueError("batch_size must be >= 1 and epoch counts >= 0")

    @property
    def seed(self) -> int:
        return self.encoder.seed

    def to_dict(self) -> dict:
        out = asdict(self)
        out["hidden"] = list(self.hidden)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> EstimatorConfig:
        d = dict(d)
        d["encoder"] = EncoderConfig(**d["encoder"])
        return cls(**d)


RegressorConfig = EstimatorConfig


def combine_features(h: Tensor, s: Tensor, r: Tensor, include_source: bool = False) -> Tensor:
    """``[h; r; h*s; h*r; |h-s|; |h-r|]``, with ``s`` after ``h`` if requested."""
    if not (h.shape == s.shape == r.shape) or h.shape[0] != 1:
        raise DimensionError(f"embedding shapes differ: {h.shape}, {s.shape}, {r.shape}")
    blocks = [h, s, r] if include_source else [h, r]
    blocks += [ad.mul(h, s), ad.mul(h, r), ad.abs(ad.sub(h, s)), ad.abs(ad.sub(h, r))]
    return ad.concat(blocks, axis=1)


def mse(preds: Tensor, targets: Sequence[float]) -> Tensor:
    diff = ad.sub(preds, ad.constant(np.asarray(targets, dtype=np.float64).reshape(preds.shape)))
    return ad.reduce_mean(ad.mul(diff, diff))


@dataclass
class TrainingLog:
    epochs: list[dict] = field(default_factory=list)
    batch_orders: list[list[int]] = field(default_factory=list)

    @property
    def losses(self) -> list[float]:
        return [e["loss"] for e in self.epochs]


class Estimator:
    kind = "estimator"

    def __init__(self, config: EstimatorConfig | None = None):
        self.config = config = config or EstimatorConfig()
        enc = config.encoder
        self.encoder = build_encoder(enc)
        self.pool = LayerAttention.init(enc.k + 1, config.layer_dropout)
        self.segments = Segments(enc.vocab_size)
        rng = stream(config.seed, "init/head")
        width = (7 if config.include_source else 6) * enc.d
        dims = [width, *config.hidden, 1]
        self.head: list[tuple[Tensor, Tensor]] = []
        for i, (fan_in, fan_out) in enumerate(zip(dims[:-1], dims[1:])):
            std = fan_in**-0.5 * (OUTPUT_INIT_GAIN if i == len(dims) - 2 else 1.0)
            w = Tensor(rng.normal(0.0, std, (fan_in, fan_out)), requires_grad=True)
            b = Tensor(np.zeros((1, fan_out)), requires_grad=True)
            self.head.append((w, b))
        self.optimizer = Adam()

    # parameters ---------------------------------------------------------

    def encoder_params(self) -> list[tuple[str, Tensor]]:
        return self.encoder.named_params() + self.pool.named_params()

    def head_params(self) -> list[tuple[str, Tensor]]:
        named = []
        for i, (w, b) in enumerate(self.head):
            named += [(f"ff{i}.w", w), (f"ff{i}.b", b)]
        return named

    def named_params(self) -> list[tuple[str, Tensor]]:
        return self.encoder_params() + self.head_params()

    def param_groups(self, frozen: bool = False) -> list[ParamGroup]:
        cfg = self.config
        return [
            ParamGroup("encoder", [p for _, p in self.encoder_params()], cfg.lr_encoder, frozen),
            ParamGroup("head", [p for _, p in self.head_params()], cfg.lr_head),
        ]

    # forward ------------------------------------------------------------

    def embed(self, text: str, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        stack = self.encoder.encode(self.segments(text), train, rng)
        return sentence_embedding(stack, self.pool, train, rng)

    def regress(self, features: Tensor, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
        x = features
        last = len(self.head) - 1
        for i, (w, b) in enumerate(self.head):
            x = ad.add_row(ad.matmul(x, w), b)
            if i < last:
                x = ad.dropout(ad.tanh(x), self.config.ff_dropout, rng, train)
        return x

    def forward(self, src: str, hyp: str, ref: str, train: bool = False,
                rng: np.random.Generator | None = None, frozen_encoder: bool = False) -> Tensor:
        if frozen_encoder:
            with ad.no_grad():
                h, s, r = (self.embed(t, train, rng) for t in (hyp, src, ref))
        else:
            h, s, r = (self.embed(t, train, rng) for t in (hyp, src, ref))
        x = combine_features(h, s, r, self.config.include_source)
        return self.regress(x, train, rng)

    def loss(self, batch: Sequence[EvalTuple], train: bool = False,
             rng: np.random.Generator | None = None, frozen_encoder: bool = False) -> Tensor:
        preds = ad.concat(
            [self.forward(t.src, t.hyp, t.ref, train, rng, frozen_encoder) for t in batch], axis=0
        )
        return mse(preds, [t.score for t in batch])

    # training -----------------------------------------------------------

    def train(self, data: Sequence[EvalTuple]) -> TrainingLog:
        if not data:
            raise ValueError("cannot train on an empty dataset")
        cfg = self.config
        shuffle_rng = stream(cfg.seed, "shuffle")
        dropout_rng = stream(cfg.seed, "dropout")
        params = [p for _, p in self.named_params()]
        history = TrainingLog()
        for epoch in range(cfg.epochs):
            frozen = epoch < cfg.frozen_epochs
            groups = self.param_groups(frozen=frozen)
            order = shuffle_rng.permutation(len(data)).tolist()
            history.batch_orders.append(order)
            sq_err, seen = 0.0, 0
            for lo in range(0, len(order), cfg.batch_size):
                batch = [data[i] for i in order[lo:lo + cfg.batch_size]]
                ad.zero_grad(params)
                loss = self.loss(batch, True, dropout_rng, frozen_encoder=frozen)
                ad.backward(loss)
                self.optimizer.step(groups)
                sq_err += loss.item() * len(batch)
                seen += len(batch)
            ad.zero_grad(params)
            history.epochs.append({"epoch": epoch, "frozen": frozen, "loss": sq_err / seen})
            log.info("estimator epoch %d frozen=%s mse=%.6f", epoch, frozen, sq_err / seen)
        return history

    # inference ----------------------------------------------------------

    def predict_one(self, src: str, hyp: str, ref: str) -> float:
        with ad.no_grad():
            return self.forward(src, hyp, ref).item()

    def predict(self, items: Sequence[EvalTuple | tuple[str, str, str]], threads: int = 1) -> list[float]:
        triples = [(t.src, t.hyp, t.ref) if isinstance(t, EvalTuple) else tuple(t) for t in items]
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(lambda t: self.predict_one(*t), triples))
        return [self.predict_one(*t) for t in triples]
