"""Tokenisation and multi-layer sentence encoders.

An encoder maps a token sequence to a :class:`LayerStack`: one ``n x d``
matrix per layer, layer 0 being the embedding output and layer ``l`` the
output of transformer block ``l``. Two encoders share that contract:

* :class:`TransformerEncoder` - a small pre-norm transformer trained from
  scratch, standing in for a pretrained multilingual model;
* :class:`HashedEncoder` - fixed random embeddings with no trainable state,
  used as an oracle baseline.
"""

from __future__ import annotations

import re
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rng import DEFAULT_SEED, stream

BOS_ID = 0
EOS_ID = 1
_RESERVED = 2

_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


class EmptyInputError(ValueError):
    pass


def words(text: str) -> list[str]:
    """Lowercased word and punctuation tokens of ``text``."""
    return _TOKEN_RE.findall(text.lower())


def hash_token(token: str, vocab_size: int) -> int:
    """FNV-1a over UTF-8 bytes, folded into the non-reserved id range."""
    h = _FNV_OFFSET
    for byte in token.encode("utf-8"):
        h = ((h ^ byte) * _FNV_PRIME) & _MASK64
    return _RESERVED + h % (vocab_size - _RESERVED)


@dataclass(frozen=True)
class TokenSeq:
    tokens: tuple[int, ...]
    surface: str

    def __len__(self) -> int:
        return len(self.tokens)


def tokenize(text: str, vocab_size: int = 8192) -> TokenSeq:
    toks = words(text)
    if not toks:
        raise EmptyInputError("cannot tokenize empty text")
    ids = (BOS_ID, *(hash_token(t, vocab_size) for t in toks), EOS_ID)
    return TokenSeq(ids, text)


@dataclass
class LayerStack:
    layers: list[Tensor]

    @property
    def depth(self) -> int:
        """Number of transformer blocks (``len(layers) - 1``)."""
        return len(self.layers) - 1

    @property
    def shape(self) -> tuple[int, int]:
        return self.layers[0].shape


@dataclass
class EncoderConfig:
    kind: str = "transformer"
    vocab_size: int = 8192
    d: int = 32
    k: int = 4
    heads: int = 4
    ff: int = 128
    dropout: float = 0.1
    seed: int = DEFAULT_SEED

    def __post_init__(self) -> None:
        if self.kind not in ("transformer", "hashed"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.k < 1:
            raise ValueError("encoder depth k must be >= 1")
        if self.d % self.heads:
            raise ValueError(f"d={self.d} is not divisible by heads={self.heads}")
        if self.vocab_size <= _RESERVED:
            raise ValueError("vocab_size too small")

    def to_dict(self) -> dict:
        return asdict(self)


def sinusoidal_positions(n: int, d: int) -> np.ndarray:
    pos = np.arange(n)[:, None]
    i = np.arange(d)[None, :]
    angle = pos / np.power(10000.0, (2 * (i // 2)) / d)
    return np.where(i % 2 == 0, np.sin(angle), np.cos(angle))


@dataclass
class _Block:
    ln1_g: Tensor
    ln1_b: Tensor
    wq: Tensor
    wk: Tensor
    wv: Tensor
    wo: Tensor
    bo: Tensor
    ln2_g: Tensor
    ln2_b: Tensor
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    @classmethod
    def init(cls, d: int, ff: int, rng: np.random.Generator) -> _Block:
        def lin(fan_in, fan_out):
            return Tensor(rng.normal(0.0, fan_in**-0.5, (fan_in, fan_out)), requires_grad=True)

        def row(width, value=0.0):
            return Tensor(np.full((1, width), value), requires_grad=True)

        return cls(
            ln1_g=row(d, 1.0), ln1_b=row(d),
            wq=lin(d, d), wk=lin(d, d), wv=lin(d, d), wo=lin(d, d), bo=row(d),
            ln2_g=row(d, 1.0), ln2_b=row(d),
            w1=lin(d, ff), b1=row(ff), w2=lin(ff, d), b2=row(d),
        )

    def params(self) -> list[tuple[str, Tensor]]:
        return list(vars(self).items())


class TransformerEncoder:
    def __init__(self, config: EncoderConfig):
        self.config = config
        rng = stream(config.seed, "init/encoder")
        self.embedding = Tensor(rng.normal(0.0, 1.0, (config.vocab_size, config.d)), requires_grad=True)
        self.blocks = [_Block.init(config.d, config.ff, rng) for _ in range(config.k)]

    def named_params(self) -> list[tuple[str, Tensor]]:
        named = [("embedding", self.embedding)]
        for i, block in enumerate(self.blocks):
            named.extend((f"block{i}.{n}", p) for n, p in block.params())
        return named

    def _attention(self, x: Tensor, b: _Block) -> Tensor:
        cfg = self.config
        dh = cfg.d // cfg.heads
        q, k, v = ad.matmul(x, b.wq), ad.matmul(x, b.wk), ad.matmul(x, b.wv)
        heads = []
        for h in range(cfg.heads):
            lo, hi = h * dh, (h + 1) * dh
            qh, kh, vh = (ad.slice_cols(t, lo, hi) for t in (q, k, v))
            scores = ad.scale(ad.matmul(qh, ad.transpose(kh)), dh**-0.5)
            heads.append(ad.matmul(ad.softmax_rows(scores), vh))
        return ad.add_row(ad.matmul(ad.concat(heads, axis=1), b.wo), b.bo)

    def encode(self, seq: TokenSeq, train: bool = False,
               rng: np.random.Generator | None = None) -> LayerStack:
        cfg = self.config
        n = len(seq)
        x = ad.add(ad.take_rows(self.embedding, seq.tokens),
                   ad.constant(sinusoidal_positions(n, cfg.d)))
        layers = [x]
        for b in self.blocks:
            h = self._attention(ad.layer_norm(x, b.ln1_g, b.ln1_b), b)
            x = ad.add(x, ad.dropout(h, cfg.dropout, rng, train))
            h = ad.layer_norm(x, b.ln2_g, b.ln2_b)
            h = ad.add_row(ad.matmul(ad.gelu(ad.add_row(ad.matmul(h, b.w1), b.b1)), b.w2), b.b2)
            x = ad.add(x, ad.dropout(h, cfg.dropout, rng, train))
            layers.append(x)
        return LayerStack(layers)


class HashedEncoder:
    """Seeded random embedding per token id, copied to every layer."""

    def __init__(self, config: EncoderConfig):
        self.config = config
        rng = stream(config.seed, "init/hashed")
        self.table = rng.normal(0.0, 1.0, (config.vocab_size, config.d))

    def named_params(self) -> list[tuple[str, Tensor]]:
        return []

    def encode(self, seq: TokenSeq, train: bool = False,
               rng: np.random.Generator | None = None) -> LayerStack:
        base = self.table[list(seq.tokens)]
        return LayerStack([ad.constant(base.copy()) for _ in range(self.config.k + 1)])


def encode_hashed(seq: TokenSeq, config: EncoderConfig | None = None) -> LayerStack:
    return HashedEncoder(config or EncoderConfig(kind="hashed")).encode(seq)


def build_encoder(config: EncoderConfig) -> TransformerEncoder | HashedEncoder:
    if config.kind == "hashed":
        return HashedEncoder(config)
    return TransformerEncoder(config)


@dataclass
class Segments:
    """Tokenised segments cached by surface text."""

    vocab_size: int
    cache: dict[str, TokenSeq] = field(default_factory=dict)

    def __call__(self, text: str) -> TokenSeq:
        seq = self.cache.get(text)
        if seq is None:
            seq = self.cache[text] = tokenize(text, self.vocab_size)
        return seq
