"""Layer-wise attention over an encoder's layers, then mean pooling over tokens."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import DimensionError, Tensor
from .encoder import LayerStack


@dataclass
class LayerAttention:
    """Trainable layer mixture ``mu * sum_l softmax(alpha)_l * layer_l``.

    ``alpha`` starts at zero (uniform mixture) and ``mu`` at one. In training
    mode each layer is dropped with probability ``dropout_p`` by masking its
    ``alpha`` entry out of the softmax.
    """

    alpha: Tensor
    mu: Tensor
    dropout_p: float = 0.1

    @classmethod
    def init(cls, n_layers: int, dropout_p: float = 0.1) -> LayerAttention:
        if not 0.0 <= dropout_p < 1.0:
            raise ValueError(f"layer dropout must be in [0, 1), got {dropout_p}")
        return cls(
            alpha=Tensor(np.zeros((1, n_layers)), requires_grad=True),
            mu=Tensor(np.ones((1, 1)), requires_grad=True),
            dropout_p=dropout_p,
        )

    @property
    def n_layers(self) -> int:
        return self.alpha.shape[1]

    def named_params(self) -> list[tuple[str, Tensor]]:
        return [("pool.alpha", self.alpha), ("pool.mu", self.mu)]

    def draw_mask(self, rng: np.random.Generator) -> np.ndarray:
        # an all-dropped draw is rejected and redrawn
        while True:
            keep = rng.random(self.n_layers) >= self.dropout_p
            if keep.any():
                return keep


def pool_layers(stack: LayerStack, att: LayerAttention, train: bool = False,
                rng: np.random.Generator | None = None) -> Tensor:
    """Mix the layers of ``stack`` into one ``n x d`` token matrix."""
    if len(stack.layers) != att.n_layers:
        raise DimensionError(
            f"layer attention sized for {att.n_layers} layers, stack has {len(stack.layers)}"
        )
    mask = None
    if train and att.dropout_p > 0.0:
        mask = att.draw_mask(rng)
    weights = ad.softmax(att.alpha, mask)
    mixed = None
    for i, layer in enumerate(stack.layers):
        if mask is not None and not mask[i]:
            continue
        term = ad.scale(layer, ad.slice_cols(weights, i, i + 1))
        mixed = term if mixed is None else ad.add(mixed, term)
    return ad.scale(mixed, att.mu)


def average_pool(tokens: Tensor) -> Tensor:
    """Column-wise mean over token rows: a ``1 x d`` sentence embedding."""
    return ad.reduce_mean(tokens, axis=0)


def sentence_embedding(stack: LayerStack, att: LayerAttention, train: bool = False,
                       rng: np.random.Generator | None = None) -> Tensor:
    return average_pool(pool_layers(stack, att, train, rng))
