"""Segment-level meta-evaluation against DA relative ranks, plus lexical baselines."""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .data import DASegment, DataError, RankQuadruple, write_tsv

Triple = tuple[str, str, str]
BatchMetric = Callable[[Sequence[Triple]], Sequence[float]]

TOP_N = (10, 8, 6, 4)


@dataclass(frozen=True)
class ScoredPair:
    pair: RankQuadruple
    better_score: float
    worse_score: float

    def __post_init__(self):
        if not (math.isfinite(self.better_score) and math.isfinite(self.worse_score)):
            raise ValueError("metric scores must be finite")


@dataclass(frozen=True)
class TauResult:
    concordant: int
    discordant: int

    @property
    def pairs(self) -> int:
        return self.concordant + self.discordant

    @property
    def tau(self) -> float:
        return (self.concordant - self.discordant) / self.pairs


def kendall_tau_like(pairs: Iterable[ScoredPair | tuple[float, float]]) -> TauResult:
    """Concordant iff the better hypothesis scores strictly higher; ties are discordant."""
    conc = disc = 0
    for p in pairs:
        better, worse = (p.better_score, p.worse_score) if isinstance(p, ScoredPair) else p
        if better > worse:
            conc += 1
        else:
            disc += 1
    if conc + disc == 0:
        raise ValueError("kendall_tau_like needs at least one pair")
    return TauResult(conc, disc)


# --------------------------------------------------------------------------
# top-N system slicing


def system_ranking_from_da(segments: Iterable[DASegment]) -> dict[str, list[str]]:
    """Systems per language pair ordered by mean DA score, best first."""
    sums: dict[str, dict[str, list[float]]] = defaultdict(lambda: defaultdict(list))
    for s in segments:
        sums[s.lp][s.system].append(s.da)
    return {
        lp: sorted(systems, key=lambda name: (-sum(systems[name]) / len(systems[name]), name))
        for lp, systems in sums.items()
    }


def system_ranking_from_darr(pairs: Iterable[RankQuadruple]) -> dict[str, list[str]]:
    """Fallback ranking by fraction of relative-ranking pairs won."""
    wins: dict[str, Counter] = defaultdict(Counter)
    games: dict[str, Counter] = defaultdict(Counter)
    for p in pairs:
        wins[p.lp][p.sys_better] += 1
        games[p.lp][p.sys_better] += 1
        games[p.lp][p.sys_worse] += 1
    return {
        lp: sorted(games[lp], key=lambda s: (-wins[lp][s] / games[lp][s], s))
        for lp in games
    }


def topn_subset(pairs: Sequence[ScoredPair], ranking: Sequence[str], n: int) -> list[ScoredPair]:
    """Keep pairs whose two systems both rank within the top ``n``."""
    if n < 2:
        raise ValueError(f"top-n slicing needs n >= 2, got {n}")
    known = set(ranking)
    top = set(ranking[:n])
    out = []
    for sp in pairs:
        for system in (sp.pair.sys_better, sp.pair.sys_worse):
            if system not in known:
                raise DataError(f"system {system!r} missing from the ranking")
        if sp.pair.sys_better in top and sp.pair.sys_worse in top:
            out.append(sp)
    return out


# --------------------------------------------------------------------------
# lexical baselines


def _ngrams(tokens: Sequence[str], n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def sentence_bleu(hypothesis: str, reference: str, max_n: int = 4) -> float:
    """Sentence BLEU with add-one smoothing on the 2..max_n gram precisions."""
    hyp, ref = hypothesis.split(), reference.split()
    if not ref:
        raise ValueError("BLEU reference is empty")
    if not hyp:
        return 0.0
    log_p = 0.0
    for n in range(1, max_n + 1):
        h, r = _ngrams(hyp, n), _ngrams(ref, n)
        match = sum(min(c, r[g]) for g, c in h.items())
        total = max(len(hyp) - n + 1, 0)
        if n == 1:
            if match == 0:
                return 0.0
            log_p += math.log(match / total)
        else:
            log_p += math.log((match + 1) / (total + 1))
    bp = 1.0 if len(hyp) > len(ref) else math.exp(1.0 - len(ref) / len(hyp))
    return bp * math.exp(log_p / max_n)


def chrf(hypothesis: str, reference: str, n: int = 6, beta: float = 2.0) -> float:
    """Character n-gram F-beta (whitespace ignored), averaged over orders 1..n.

    Orders for which neither side has any n-gram are skipped.
    """
    hyp = "".join(hypothesis.split())
    ref = "".join(reference.split())
    if not ref:
        raise ValueError("chrF reference is empty")
    b2 = beta * beta
    scores = []
    for order in range(1, n + 1):
        h, r = _ngrams(hyp, order), _ngrams(ref, order)
        h_total, r_total = sum(h.values()), sum(r.values())
        if h_total == 0 and r_total == 0:
            continue
        match = sum(min(c, r[g]) for g, c in h.items())
        if match == 0:
            scores.append(0.0)
            continue
        p, rec = match / h_total, match / r_total
        scores.append((1 + b2) * p * rec / (b2 * p + rec))
    return sum(scores) / len(scores)


def segment_metric(fn: Callable[[str, str], float]) -> BatchMetric:
    """Lift a ``fn(hyp, ref)`` baseline to the batch-metric interface."""
    return lambda triples: [fn(h, r) for _, h, r in triples]


def lookup_metric(table: Mapping[Triple, float]) -> BatchMetric:
    """Serve precomputed scores keyed by ``(src, hyp, ref)``."""
    def score(triples):
        try:
            return [table[t] for t in triples]
        except KeyError as exc:
            raise DataError(f"no score for segment {exc.args[0]!r}") from None
    return score


# --------------------------------------------------------------------------
# reports


@dataclass
class LangPairReport:
    lp: str
    result: TauResult
    top: dict[int, TauResult] = field(default_factory=dict)


@dataclass
class EvalReport:
    rows: dict[str, LangPairReport] = field(default_factory=dict)

    def tau(self, lp: str, top: int | None = None) -> float:
        row = self.rows[lp]
        return (row.result if top is None else row.top[top]).tau

    def records(self) -> list[tuple[str, str, int, int, float]]:
        out = []
        for lp in sorted(self.rows):
            row = self.rows[lp]
            out.append((lp, "all", row.result.concordant, row.result.discordant, row.result.tau))
            for n in sorted(row.top, reverse=True):
                r = row.top[n]
                out.append((lp, f"top{n}", r.concordant, r.discordant, r.tau))
        return out

    def write_tsv(self, path: str | Path) -> None:
        write_tsv(path, ("lp", "subset", "concordant", "discordant", "tau"), self.records())

    def format_table(self) -> str:
        header = f"{'lp':<10}{'subset':<8}{'conc':>8}{'disc':>8}{'tau':>9}"
        lines = [header, "-" * len(header)]
        for lp, subset, c, d, tau in self.records():
            lines.append(f"{lp:<10}{subset:<8}{c:>8d}{d:>8d}{tau:>9.4f}")
        return "\n".join(lines)


def score_pairs(metric: BatchMetric, darr: Sequence[RankQuadruple]) -> list[ScoredPair]:
    triples: dict[Triple, None] = {}
    for p in darr:
        triples.setdefault((p.src, p.better, p.ref))
        triples.setdefault((p.src, p.worse, p.ref))
    keys = list(triples)
    scores = dict(zip(keys, metric(keys)))
    return [
        ScoredPair(p, float(scores[(p.src, p.better, p.ref)]), float(scores[(p.src, p.worse, p.ref)]))
        for p in darr
    ]


def evaluate_scored(scored: Sequence[ScoredPair], top_n: Sequence[int] = (),
                    rankings: Mapping[str, Sequence[str]] | None = None) -> EvalReport:
    by_lp: dict[str, list[ScoredPair]] = defaultdict(list)
    for sp in scored:
        by_lp[sp.pair.lp].append(sp)
    report = EvalReport()
    for lp in sorted(by_lp):
        pairs = by_lp[lp]
        row = LangPairReport(lp, kendall_tau_like(pairs))
        if top_n:
            if rankings is None or lp not in rankings:
                raise DataError(f"no system ranking for language pair {lp!r}")
            for n in top_n:
                subset = topn_subset(pairs, rankings[lp], n)
                if subset:
                    row.top[n] = kendall_tau_like(subset)
        report.rows[lp] = row
    return report


def evaluate_metric(metric: BatchMetric, darr: Sequence[RankQuadruple], top_n: Sequence[int] = (),
                    rankings: Mapping[str, Sequence[str]] | None = None) -> EvalReport:
    """Score both hypotheses of every pair and aggregate per language pair.

    ``rankings`` orders systems per language pair for the top-N slices; when
    omitted it falls back to relative-ranking win rates.
    """
    if top_n and rankings is None:
        rankings = system_ranking_from_darr(darr)
    return evaluate_scored(score_pairs(metric, darr), top_n, rankings)

