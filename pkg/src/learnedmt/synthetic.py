"""Synthetic corpora for desk-scale training experiments.

Sentences are drawn from a closed vocabulary of placeholder words, so every
property of interest (which hypothesis is better, how much it overlaps the
reference) is known by construction.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .data import EvalTuple, RankQuadruple
from .rng import stream


def vocabulary(size: int = 400, prefix: str = "w") -> list[str]:
    return [f"{prefix}{i}" for i in range(size)]


def _sentence(rng: np.random.Generator, vocab: list[str], length: int) -> list[str]:
    return [vocab[i] for i in rng.choice(len(vocab), size=length, replace=False)]


def _noise(rng: np.random.Generator, tokens: list[str], vocab: list[str], rate: float) -> list[str]:
    out = list(tokens)
    n_swap = int(round(rate * len(out)))
    for pos in rng.choice(len(out), size=n_swap, replace=False):
        out[pos] = vocab[rng.integers(len(vocab))]
    return out


def translate(tokens: list[str]) -> list[str]:
    """Toy source language: a fixed word-for-word relabelling."""
    return ["s" + t for t in tokens]


def unigram_f1(hyp: str, ref: str) -> float:
    h, r = Counter(hyp.split()), Counter(ref.split())
    match = sum((h & r).values())
    if match == 0:
        return 0.0
    p, rec = match / sum(h.values()), match / sum(r.values())
    return 2 * p * rec / (p + rec)


def ranking_corpus(n: int, seed: int = 3, length: int = 10, noise: float = 0.2,
                   lps: tuple[str, ...] = ("xx-yy",), vocab_size: int = 400) -> list[RankQuadruple]:
    """Better = noised copy of the reference, worse = a shuffled unrelated sentence."""
    rng = stream(seed, "synthetic/ranking")
    vocab = vocabulary(vocab_size)
    out = []
    for i in range(n):
        ref = _sentence(rng, vocab, length)
        better = _noise(rng, ref, vocab, noise)
        worse = _sentence(rng, vocab, length)
        rng.shuffle(worse)
        lp = lps[i % len(lps)]
        out.append(RankQuadruple(
            " ".join(translate(ref)), " ".join(better), " ".join(worse), " ".join(ref),
            lp=lp, seg_id=str(i), sys_better="sysA", sys_worse="sysB",
        ))
    return out


def source_only_corpus(n: int, seed: int = 3, length: int = 10, noise: float = 0.2,
                       lps: tuple[str, ...] = ("aa-en", "bb-en"),
                       vocab_size: int = 400) -> list[RankQuadruple]:
    """Pairs that only the source can order.

    The source shares its words with the better hypothesis (a noised copy);
    the worse one is an unrelated sentence. The reference is a further
    unrelated sentence, so it is equally uninformative about both.
    """
    rng = stream(seed, "synthetic/source-only")
    vocab = vocabulary(vocab_size)
    out = []
    for i in range(n):
        src = _sentence(rng, vocab, length)
        better = _noise(rng, src, vocab, noise)
        worse = _sentence(rng, vocab, length)
        ref = _sentence(rng, vocab, length)
        lp = lps[i % len(lps)]
        out.append(RankQuadruple(
            " ".join(src), " ".join(better), " ".join(worse), " ".join(ref),
            lp=lp, seg_id=str(i), sys_better="sysA", sys_worse="sysB",
        ))
    return out


def overlap_corpus(n: int, seed: int = 3, length: int = 10,
                   vocab_size: int = 400) -> list[EvalTuple]:
    """Hypotheses with a uniformly drawn share of reference words replaced.

    The target is the unigram F1 between hypothesis and reference.
    """
    rng = stream(seed, "synthetic/overlap")
    vocab = vocabulary(vocab_size)
    out = []
    for _ in range(n):
        ref = _sentence(rng, vocab, length)
        hyp = _noise(rng, ref, vocab, float(rng.uniform(0.0, 1.0)))
        h, r = " ".join(hyp), " ".join(ref)
        out.append(EvalTuple(" ".join(translate(ref)), h, r, unigram_f1(h, r)))
    return out
