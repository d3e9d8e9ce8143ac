import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnedmt.data import DASegment, DataError, RankQuadruple
from learnedmt.metrics import (
    ScoredPair, chrf, evaluate_metric, evaluate_scored, kendall_tau_like, lookup_metric,
    segment_metric, sentence_bleu, system_ranking_from_da, system_ranking_from_darr, topn_subset,
)


def _pair(i=0, lp="de-en", sb="A", sw="B"):
    return RankQuadruple(f"src {i}", f"good {i}", f"bad {i}", f"ref {i}",
                         lp=lp, seg_id=str(i), sys_better=sb, sys_worse=sw)


def _scored(b, w, **kw):
    return ScoredPair(_pair(**kw), b, w)


def test_tau_examples():
    assert kendall_tau_like([(2, 1)] * 4).tau == 1.0
    assert kendall_tau_like([(2, 1)] * 3 + [(0, 1)]).tau == 0.5
    res = kendall_tau_like([(2, 1), (3, 1), (1, 1), (0, 1)])
    assert (res.concordant, res.discordant, res.tau) == (2, 2, 0.0)


def test_tau_empty():
    with pytest.raises(ValueError):
        kendall_tau_like([])


def recount(pairs):
    c = sum(1 for b, w in pairs if b > w)
    d = sum(1 for b, w in pairs if not b > w)
    return c, d


score = st.integers(-5, 5).map(float)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(score, score), min_size=1, max_size=200))
def test_tau_matches_recount_and_bounds(pairs):
    res = kendall_tau_like(pairs)
    assert (res.concordant, res.discordant) == recount(pairs)
    assert -1.0 <= res.tau <= 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(score, score).filter(lambda p: p[0] != p[1]), min_size=1, max_size=100))
def test_tau_negation_without_ties(pairs):
    neg = [(-b, -w) for b, w in pairs]
    assert kendall_tau_like(neg).tau == -kendall_tau_like(pairs).tau


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(-3, 3)), min_size=1, max_size=100))
def test_tau_invariant_under_increasing_transform(pairs):
    f = lambda x: x**3 + 2 * x  # noqa: E731
    a = kendall_tau_like(pairs)
    b = kendall_tau_like([(f(x), f(y)) for x, y in pairs])
    assert (a.concordant, a.discordant) == (b.concordant, b.discordant)


def test_scored_pair_rejects_nan():
    with pytest.raises(ValueError):
        _scored(float("nan"), 1.0)


# top-N ----------------------------------------------------------------------


def test_topn_keeps_pairs_inside_top():
    ranking = ["A", "B", "C", "D"]
    pairs = [_scored(1, 0, sb="A", sw="B"), _scored(1, 0, sb="A", sw="D"), _scored(1, 0, sb="C", sw="B")]
    assert topn_subset(pairs, ranking, 2) == pairs[:1]
    assert topn_subset(pairs, ranking, 3) == [pairs[0], pairs[2]]
    assert topn_subset(pairs, ranking, 4) == pairs


def test_topn_validation():
    with pytest.raises(ValueError):
        topn_subset([], ["A", "B"], 1)
    with pytest.raises(DataError):
        topn_subset([_scored(1, 0, sb="A", sw="Z")], ["A", "B"], 2)


def test_system_ranking_from_da_uses_mean():
    segs = [DASegment("de-en", "1", "A", "s", "h", "r", 50.0),
            DASegment("de-en", "2", "A", "s", "h", "r", 70.0),
            DASegment("de-en", "1", "B", "s", "h", "r", 80.0),
            DASegment("de-en", "1", "C", "s", "h", "r", 10.0)]
    assert system_ranking_from_da(segs) == {"de-en": ["B", "A", "C"]}


def test_system_ranking_from_darr_uses_win_rate():
    darr = [_pair(0, sb="A", sw="B"), _pair(1, sb="A", sw="C"), _pair(2, sb="B", sw="C")]
    assert system_ranking_from_darr(darr) == {"de-en": ["A", "B", "C"]}


# baselines ------------------------------------------------------------------


def test_bleu_examples():
    assert sentence_bleu("the cat sat on the mat", "the cat sat on the mat") == 1.0
    assert sentence_bleu("a b c d e", "v w x y z") < 0.05
    # all clipped precisions are 1, so only the brevity penalty remains
    assert sentence_bleu("a b c d", "a b c d e") == pytest.approx(math.exp(1 - 5 / 4), abs=1e-15)


def test_bleu_hand_computed():
    # p1 = 3/4, p2 = (1+1)/(3+1), p3 = (0+1)/(2+1), p4 = (0+1)/(1+1); c = r
    expected = math.exp((math.log(3 / 4) + math.log(2 / 4) + math.log(1 / 3) + math.log(1 / 2)) / 4)
    assert sentence_bleu("a b x c", "a b y c") == pytest.approx(expected, abs=1e-15)


@given(st.lists(st.sampled_from("abcdef"), min_size=1, max_size=10),
       st.lists(st.sampled_from("abcdef"), min_size=1, max_size=10))
def test_bleu_and_chrf_bounded(h, r):
    hyp, ref = " ".join(h), " ".join(r)
    assert 0.0 <= sentence_bleu(hyp, ref) <= 1.0 + 1e-12
    assert 0.0 <= chrf(hyp, ref) <= 1.0 + 1e-12


def test_chrf_examples():
    assert chrf("hello world", "hello world") == pytest.approx(1.0)
    assert chrf("abc", "xyz") == 0.0
    assert chrf("hello", "hello there") < 1.0


def test_chrf_single_order_hand_computed():
    # unigrams: hyp {a:2, b:1}, ref {a:1, b:1, c:1} -> match 2, P = 2/3, R = 2/3
    assert chrf("aab", "abc", n=1, beta=2) == pytest.approx(2 / 3, abs=1e-15)


# evaluate -------------------------------------------------------------------


def test_evaluate_metric_groups_by_language_pair():
    darr = [_pair(0, lp="de-en"), _pair(1, lp="de-en"), _pair(2, lp="en-fi")]
    table = {}
    for p in darr:
        table[(p.src, p.better, p.ref)] = 1.0
        table[(p.src, p.worse, p.ref)] = 0.0 if p.lp == "de-en" else 2.0
    report = evaluate_metric(lookup_metric(table), darr)
    assert report.tau("de-en") == 1.0 and report.tau("en-fi") == -1.0
    assert report.rows["de-en"].result.pairs == 2


def test_evaluate_metric_missing_score():
    with pytest.raises(DataError):
        evaluate_metric(lookup_metric({}), [_pair()])


def test_evaluate_topn_identity_when_n_covers_all_systems():
    rng = np.random.default_rng(0)
    systems = ["A", "B", "C", "D"]
    darr = []
    for i in range(30):
        a, b = rng.choice(4, size=2, replace=False)
        darr.append(_pair(i, sb=systems[a], sw=systems[b]))
    metric = lambda triples: [float(rng.normal()) for _ in triples]  # noqa: E731
    report = evaluate_metric(metric, darr, top_n=(4, 2), rankings={"de-en": systems})
    row = report.rows["de-en"]
    assert row.top[4] == row.result
    assert row.top[2].pairs <= row.result.pairs


def test_segment_metric_baseline_rows():
    darr = [RankQuadruple("s", "the cat sat", "dog ran far", "the cat sat", lp="x-y")]
    report = evaluate_metric(segment_metric(sentence_bleu), darr)
    assert report.tau("x-y") == 1.0


def test_report_tsv_and_table(tmp_path):
    scored = [_scored(1, 0), _scored(0, 1)]
    report = evaluate_scored(scored)
    report.write_tsv(tmp_path / "r.tsv")
    lines = (tmp_path / "r.tsv").read_text().splitlines()
    assert lines[0] == "lp\tsubset\tconcordant\tdiscordant\ttau"
    assert lines[1] == "de-en\tall\t1\t1\t0.0"
    assert "de-en" in report.format_table()
