"""Triplet-margin translation ranker.

Source and reference embeddings act as anchors: training pushes the better
hypothesis at least ``margin`` closer to each anchor than the worse one. At
inference a single hypothesis is scored by the harmonic mean of its distances
to the two anchors, mapped to ``1 / (1 + f)``.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Adam, ParamGroup, Tensor
from .data import RankQuadruple
from .encoder import EncoderConfig, Segments, build_encoder
from .estimator import TrainingLog
from .pooling import LayerAttention, sentence_embedding
from .rng import stream

log = logging.getLogger(__name__)


@dataclass
class RankerConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    layer_dropout: float = 0.1
    margin: float = 1.0
    lr: float = 1e-5
    epochs: int = 3
    batch_size: int = 16
    use_source: bool = True

    def __post_init__(self):
        if self.margin <= 0:
            raise ValueError(f"margin must be positive, got {self.margin}")
        if self.batch_size < 1 or self.epochs < 0:
            raise ValueError("batch_size must be >= 1 and epochs >= 0")

    @property
    def seed(self) -> int:
        return self.encoder.seed

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> RankerConfig:
        d = dict(d)
        d["encoder"] = EncoderConfig(**d["encoder"])
        return cls(**d)


def harmonic_distance(d_ref: float, d_src: float) -> float:
    """Harmonic mean of the two anchor distances; 0 when both are 0."""
    if d_ref < 0 or d_src < 0:
        raise ValueError("distances must be nonnegative")
    total = d_ref + d_src
    if total == 0.0:
        return 0.0
    return 2.0 * d_ref * d_src / total


def similarity(f: float) -> float:
    if f < 0:
        raise ValueError(f"distance must be nonnegative, got {f}")
    return 1.0 / (1.0 + f)


def hinge(d_pos: Tensor, d_neg: Tensor, margin: float) -> Tensor:
    """``max(0, d_pos - d_neg + margin)``."""
    return ad.relu(ad.add(ad.sub(d_pos, d_neg), ad.constant([[margin]])))


def triplet_margin(s: Tensor | None, better: Tensor, worse: Tensor, r: Tensor,
                   margin: float) -> Tensor:
    """Sum of the source- and reference-anchored hinge terms.

    With ``s`` set to None only the reference anchor contributes.
    """
    loss = hinge(ad.euclid(r, better), ad.euclid(r, worse), margin)
    if s is not None:
        loss = ad.add(hinge(ad.euclid(s, better), ad.euclid(s, worse), margin), loss)
    return loss


class Ranker:
    kind = "ranker"

    def __init__(self, config: RankerConfig | None = None):
        self.config = config = config or RankerConfig()
        self.encoder = build_encoder(config.encoder)
        self.pool = LayerAttention.init(config.encoder.k + 1, config.layer_dropout)
        self.segments = Segments(config.encoder.vocab_size)
        self.optimizer = Adam()

    def named_params(self) -> list[tuple[str, Tensor]]:
        return self.encoder.named_params() + self.pool.named_params()

    def param_groups(self) -> list[ParamGroup]:
        return [ParamGroup("encoder", [p for _, p in self.named_params()], self.config.lr)]

    def embed(self, text: str, train: bool = False, rng: np.random.Generator | None = None) -> Tensor:
        stack = self.encoder.encode(self.segments(text), train, rng)
        return sentence_embedding(stack, self.pool, train, rng)

    def triplet_loss(self, quad: RankQuadruple, train: bool = False,
                     rng: np.random.Generator | None = None) -> Tensor:
        hp = self.embed(quad.better, train, rng)
        hn = self.embed(quad.worse, train, rng)
        r = self.embed(quad.ref, train, rng)
        s = self.embed(quad.src, train, rng) if self.config.use_source else None
        return triplet_margin(s, hp, hn, r, self.config.margin)

    def loss(self, batch: Sequence[RankQuadruple], train: bool = False,
             rng: np.random.Generator | None = None) -> Tensor:
        losses = [self.triplet_loss(q, train, rng) for q in batch]
        return ad.reduce_mean(ad.concat(losses, axis=0))

    def train(self, data: Sequence[RankQuadruple]) -> TrainingLog:
        if not data:
            raise ValueError("cannot train on an empty dataset")
        cfg = self.config
        shuffle_rng = stream(cfg.seed, "shuffle")
        dropout_rng = stream(cfg.seed, "dropout")
        params = [p for _, p in self.named_params()]
        groups = self.param_groups()
        history = TrainingLog()
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(len(data)).tolist()
            history.batch_orders.append(order)
            total = 0.0
            for lo in range(0, len(order), cfg.batch_size):
                batch = [data[i] for i in order[lo:lo + cfg.batch_size]]
                ad.zero_grad(params)
                loss = self.loss(batch, True, dropout_rng)
                ad.backward(loss)
                self.optimizer.step(groups)
                total += loss.item() * len(batch)
            ad.zero_grad(params)
            history.epochs.append({"epoch": epoch, "frozen": False, "loss": total / len(data)})
            log.info("ranker epoch %d triplet=%.6f", epoch, total / len(data))
        return history

    # inference ----------------------------------------------------------

    def _embeddings(self, texts: Sequence[str], threads: int = 1) -> dict[str, np.ndarray]:
        unique = list(dict.fromkeys(texts))

        def one(text):
            with ad.no_grad():
                return self.embed(text).values

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                vecs = list(pool.map(one, unique))
        else:
            vecs = [one(t) for t in unique]
        return dict(zip(unique, vecs))

    @staticmethod
    def _dist(u: np.ndarray, v: np.ndarray) -> float:
        with ad.no_grad():
            return ad.euclid(ad.constant(u), ad.constant(v)).item()

    def inference_distance(self, src: str, hyp: str, ref: str) -> float:
        emb = self._embeddings([src, hyp, ref])
        return harmonic_distance(self._dist(emb[ref], emb[hyp]), self._dist(emb[src], emb[hyp]))

    def score(self, triples: Sequence[tuple[str, str, str]], threads: int = 1) -> list[float]:
        """Similarity in (0, 1] for each ``(src, hyp, ref)``, order preserved."""
        emb = self._embeddings([t for tr in triples for t in tr], threads)
        out = []
        for src, hyp, ref in triples:
            f = harmonic_distance(self._dist(emb[ref], emb[hyp]), self._dist(emb[src], emb[hyp]))
            out.append(similarity(f))
        return out

    def score_reference_only(self, pairs: Sequence[tuple[str, str]], threads: int = 1) -> list[float]:
        """Similarity from the reference distance alone, for ``(hyp, ref)`` pairs."""
        emb = self._embeddings([t for pr in pairs for t in pr], threads)
        return [similarity(self._dist(emb[ref], emb[hyp])) for hyp, ref in pairs]

    def predict(self, triples: Sequence[tuple[str, str, str]], threads: int = 1) -> list[float]:
        if self.config.use_source:
            return self.score(triples, threads)
        return self.score_reference_only([(h, r) for _, h, r in triples], threads)
