"""Targets derived from human judgements: HTER, MQM and DA relative ranks."""

from __future__ import annotations

import itertools
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence

from .data import DataError, DASegment, EvalTuple, MQMRow, PostEditTuple, RankQuadruple

MAX_SHIFT_SIZE = 10
MAX_SHIFT_DIST = 50
MAX_SHIFT_ITERS = 50

MQM_WEIGHTS = {"minor": 1, "major": 5, "critical": 10}
DARR_THRESHOLD = 25.0


# --------------------------------------------------------------------------
# TER


def edit_distance(hyp: Sequence[str], ref: Sequence[str]) -> int:
    """Word-level Levenshtein distance with unit costs."""
    prev = list(range(len(ref) + 1))
    for i, h in enumerate(hyp, 1):
        cur = [i]
        for j, r in enumerate(ref, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (h != r)))
        prev = cur
    return prev[-1]


def _ref_ngrams(ref: Sequence[str]) -> set[tuple[str, ...]]:
    grams = set()
    for n in range(1, MAX_SHIFT_SIZE + 1):
        for j in range(len(ref) - n + 1):
            grams.add(tuple(ref[j:j + n]))
    return grams


def _best_shift(hyp: list[str], ref: list[str], current: int,
                grams: set[tuple[str, ...]]) -> tuple[int, list[str]] | None:
    best: tuple[int, list[str]] | None = None
    for i in range(len(hyp)):
        for size in range(1, min(MAX_SHIFT_SIZE, len(hyp) - i) + 1):
            block = hyp[i:i + size]
            if tuple(block) not in grams:
                break  # longer blocks starting at i cannot match either
            rest = hyp[:i] + hyp[i + size:]
            for dest in range(len(rest) + 1):
                if dest == i or abs(dest - i) > MAX_SHIFT_DIST:
                    continue
                moved = rest[:dest] + block + rest[dest:]
                cost = edit_distance(moved, ref)
                if cost < current and (best is None or cost < best[0]):
                    best = (cost, moved)
    return best


def ter_edits(hyp: Sequence[str], ref: Sequence[str], shifts: bool = True) -> tuple[int, int]:
    """``(number of shifts, remaining edit distance)`` after greedy shifting."""
    hyp, ref = list(hyp), list(ref)
    cost = edit_distance(hyp, ref)
    n_shifts = 0
    if shifts:
        grams = _ref_ngrams(ref)
        while n_shifts < MAX_SHIFT_ITERS and cost > 0:
            found = _best_shift(hyp, ref, cost, grams)
            if found is None:
                break
            cost, hyp = found
            n_shifts += 1
    return n_shifts, cost


def ter(hypothesis: str | Sequence[str], target: str | Sequence[str], shifts: bool = True) -> float:
    """Translation edit rate of ``hypothesis`` against ``target``.

    Texts are split on whitespace. Shifts move a contiguous block that occurs
    in the target; each costs one edit and is taken only if it lowers the
    edit distance.
    """
    hyp = hypothesis.split() if isinstance(hypothesis, str) else list(hypothesis)
    tgt = target.split() if isinstance(target, str) else list(target)
    if not tgt:
        raise ValueError("TER target is empty")
    n_shifts, cost = ter_edits(hyp, tgt, shifts)
    return (n_shifts + cost) / len(tgt)


def hter_dataset(tuples: Iterable[PostEditTuple], shifts: bool = True) -> list[EvalTuple]:
    return [EvalTuple(t.src, t.hyp, t.ref, ter(t.hyp, t.pe, shifts)) for t in tuples]


# --------------------------------------------------------------------------
# MQM


@dataclass(frozen=True)
class MQMAnnotation:
    minor: int
    major: int
    critical: int
    length: int

    def __post_init__(self):
        if min(self.minor, self.major, self.critical) < 0:
            raise ValueError("error counts must be nonnegative")
        if self.length < 1:
            raise ValueError("sentence length must be >= 1")


def mqm_score(ann: MQMAnnotation) -> float:
    """``100 - (minor + 5*major + 10*critical) / (length * 100)``."""
    penalty = (MQM_WEIGHTS["minor"] * ann.minor + MQM_WEIGHTS["major"] * ann.major
               + MQM_WEIGHTS["critical"] * ann.critical)
    return 100.0 - penalty / (ann.length * 100.0)


def normalize_mqm(raw: float) -> float:
    return max(0.0, raw / 100.0)


def mqm_dataset(rows: Iterable[MQMRow]) -> list[EvalTuple]:
    """Normalised MQM targets; sentence length is the hypothesis token count."""
    out = []
    for row in rows:
        ann = MQMAnnotation(row.minor, row.major, row.critical, max(1, len(row.hyp.split())))
        out.append(EvalTuple(row.src, row.hyp, row.ref, normalize_mqm(mqm_score(ann))))
    return out


# --------------------------------------------------------------------------
# DA -> DARR


def _natural(key: str):
    return (0, int(key), "") if key.isdigit() else (1, 0, key)


def darr_convert(segments: Iterable[DASegment], threshold: float = DARR_THRESHOLD) -> list[RankQuadruple]:
    """Relative-ranking pairs from DA scores.

    For every pair of systems on the same segment whose DA scores differ by
    strictly more than ``threshold``, emit the higher-scored hypothesis as the
    better one. Output is ordered by language pair, segment id, then system
    pair.
    """
    groups: dict[tuple[str, str], dict[str, DASegment]] = defaultdict(dict)
    for seg in segments:
        systems = groups[(seg.lp, seg.seg_id)]
        if seg.system in systems:
            raise DataError(f"duplicate DA row for segment {seg.seg_id!r} system {seg.system!r}")
        systems[seg.system] = seg

    pairs = []
    for lp, seg_id in sorted(groups, key=lambda k: (k[0], _natural(k[1]))):
        systems = groups[(lp, seg_id)]
        for a, b in itertools.combinations(sorted(systems), 2):
            x, y = systems[a], systems[b]
            if not math.fabs(x.da - y.da) > threshold:
                continue
            hi, lo = (x, y) if x.da > y.da else (y, x)
            if hi.hyp == lo.hyp:
                continue  # identical outputs carry no ranking signal
            pairs.append(RankQuadruple(
                src=hi.src, better=hi.hyp, worse=lo.hyp, ref=hi.ref,
                lp=lp, seg_id=seg_id, sys_better=hi.system, sys_worse=lo.system,
            ))
    return pairs
