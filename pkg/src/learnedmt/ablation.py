"""Paired training runs that isolate the contribution of the source segment."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

from .data import EvalTuple, RankQuadruple, write_tsv
from .estimator import Estimator, EstimatorConfig
from .metrics import EvalReport, evaluate_metric, kendall_tau_like
from .ranker import Ranker, RankerConfig


@dataclass
class SourceAblation:
    reference_only: EvalReport
    full: EvalReport
    batch_orders_match: bool

    def delta(self, lp: str) -> float:
        return self.full.tau(lp) - self.reference_only.tau(lp)

    def records(self) -> list[tuple]:
        out = []
        ref_rows = {(r[0], r[1]): r for r in self.reference_only.records()}
        for lp, subset, c, d, tau in self.full.records():
            tau_ref = ref_rows[(lp, subset)][4]
            out.append((lp, subset, c, d, tau, tau_ref, tau - tau_ref))
        return out

    def write_tsv(self, path: str | Path) -> None:
        write_tsv(
            path,
            ("lp", "subset", "concordant", "discordant", "tau", "tau_ref_only", "delta_tau"),
            self.records(),
        )


def run_source_ablation(train: Sequence[RankQuadruple], test: Sequence[RankQuadruple],
                        config: RankerConfig, ablate: bool = True, threads: int = 1,
                        top_n: Sequence[int] = ()) -> SourceAblation:
    """Train a reference-only and a source+reference ranker from one seed.

    With ``ablate=False`` both arms use the source, a self-comparison whose
    deltas must all be zero.
    """
    arms = {}
    orders = {}
    for name, use_source in (("reference_only", not ablate), ("full", True)):
        model = Ranker(dataclasses.replace(config, use_source=use_source))
        orders[name] = model.train(train).batch_orders
        arms[name] = evaluate_metric(lambda t, m=model: m.predict(t, threads), test, top_n)
    return SourceAblation(arms["reference_only"], arms["full"],
                          orders["reference_only"] == orders["full"])


def regression_tau(preds: Sequence[float], gold: Sequence[float]):
    """Tau-like agreement over all tuple pairs whose gold scores differ."""
    pairs = []
    for i in range(len(gold)):
        for j in range(i + 1, len(gold)):
            if gold[i] == gold[j]:
                continue
            hi, lo = (i, j) if gold[i] > gold[j] else (j, i)
            pairs.append((preds[hi], preds[lo]))
    return kendall_tau_like(pairs)


@dataclass
class EstimatorVariantRow:
    mse_base: float
    mse_with_source: float
    tau_base: float
    tau_with_source: float
    batch_orders_match: bool

    @property
    def delta_mse(self) -> float:
        return self.mse_with_source - self.mse_base

    @property
    def delta_tau(self) -> float:
        return self.tau_with_source - self.tau_base


def run_estimator_source_variant(train: Sequence[EvalTuple], test: Sequence[EvalTuple],
                                 config: EstimatorConfig, threads: int = 1) -> EstimatorVariantRow:
    """Compare the 6d feature vector against the variant that also carries ``s``."""
    gold = [t.score for t in test]
    stats = {}
    for flag in (False, True):
        model = Estimator(dataclasses.replace(config, include_source=flag))
        orders = model.train(train).batch_orders
        preds = model.predict(test, threads)
        err = sum((p - y) ** 2 for p, y in zip(preds, gold)) / len(gold)
        stats[flag] = (err, regression_tau(preds, gold).tau, orders)
    return EstimatorVariantRow(
        mse_base=stats[False][0], mse_with_source=stats[True][0],
        tau_base=stats[False][1], tau_with_source=stats[True][1],
        batch_orders_match=stats[False][2] == stats[True][2],
    )
