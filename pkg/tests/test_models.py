import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from learnedmt import autodiff as ad
from learnedmt.autodiff import DimensionError, Tensor
from learnedmt.data import EvalTuple, RankQuadruple
from learnedmt.encoder import EncoderConfig
from learnedmt.estimator import Estimator, EstimatorConfig, combine_features, mse
from learnedmt.ranker import Ranker, RankerConfig, harmonic_distance, similarity, triplet_margin
from learnedmt.synthetic import overlap_corpus, ranking_corpus

TINY = EncoderConfig(d=8, k=2, heads=2, ff=16, vocab_size=257)


def tiny_estimator(**kw):
    return Estimator(EstimatorConfig(encoder=TINY, **kw))


def tiny_ranker(**kw):
    return Ranker(RankerConfig(encoder=TINY, **kw))


# estimator ------------------------------------------------------------------


def test_combine_features_hand_example():
    h, s, r = Tensor([1.0, 2.0]), Tensor([1.0, 1.0]), Tensor([0.0, 2.0])
    out = combine_features(h, s, r).values[0].tolist()
    assert out == [1, 2, 0, 2, 1, 2, 0, 4, 0, 1, 1, 0]


def test_combine_features_self_agreement():
    rng = np.random.default_rng(0)
    h = Tensor(rng.normal(size=(1, 5)))
    s = Tensor(rng.normal(size=(1, 5)))
    out = combine_features(h, s, h).values[0]
    d = 5
    assert np.array_equal(out[3 * d:4 * d], h.values[0] ** 2)
    assert not out[5 * d:].any()


@given(st.integers(1, 12))
def test_combine_features_width(d):
    v = Tensor(np.ones((1, d)))
    assert combine_features(v, v, v).shape == (1, 6 * d)
    assert combine_features(v, v, v, include_source=True).shape == (1, 7 * d)


def test_combine_features_width_mismatch():
    with pytest.raises(DimensionError):
        combine_features(Tensor(np.ones((1, 3))), Tensor(np.ones((1, 4))), Tensor(np.ones((1, 3))))


def test_estimator_hidden_widths_scale_with_d():
    assert EstimatorConfig(encoder=EncoderConfig(d=32)).hidden == (288, 144)
    assert EstimatorConfig(encoder=EncoderConfig(d=768, heads=12)).hidden == (6912, 3456)
    est = tiny_estimator()
    assert est.head[0][0].shape == (48, 72)


def test_estimator_forward_deterministic_and_finite():
    est = tiny_estimator()
    a = est.predict_one("ein Satz", "a sentence", "one sentence")
    assert np.isfinite(a)
    assert a == est.predict_one("ein Satz", "a sentence", "one sentence")


def test_estimator_duplicate_prediction():
    est = tiny_estimator()
    t = EvalTuple("quelle", "hyp text", "ref text", 0.3)
    a, b = est.predict([t, t])
    assert a == b


def test_mse_matches_hand_residuals():
    preds = Tensor([[0.1], [0.7], [-0.4]])
    y = [0.0, 1.0, 0.5]
    expected = ((0.1 - 0.0) ** 2 + (0.7 - 1.0) ** 2 + (-0.4 - 0.5) ** 2) / 3
    assert abs(mse(preds, y).item() - expected) <= 1e-12


def test_estimator_gradient_check():
    est = tiny_estimator()
    batch = overlap_corpus(2, seed=1)
    params = [p for _, p in est.named_params()]
    report = ad.grad_check_params(lambda: est.loss(batch), params, step=1e-5, tol=1e-3,
                                  max_probes=150, rng=np.random.default_rng(0))
    assert report.passed, report


def test_estimator_frozen_epoch_keeps_encoder_bit_identical():
    est = tiny_estimator(epochs=1)
    enc_before = {n: p.values.copy() for n, p in est.encoder_params()}
    head_before = {n: p.values.copy() for n, p in est.head_params()}
    log = est.train(overlap_corpus(20, seed=2))
    assert log.epochs[0]["frozen"]
    for n, p in est.encoder_params():
        assert np.array_equal(p.values, enc_before[n]), n
    assert any(not np.array_equal(p.values, head_before[n]) for n, p in est.head_params())


def test_estimator_unfreezes_after_first_epoch():
    est = tiny_estimator(epochs=2, lr_encoder=1e-3)
    alpha0 = est.pool.alpha.values.copy()
    emb0 = est.encoder.embedding.values.copy()
    log = est.train(overlap_corpus(20, seed=2))
    assert [e["frozen"] for e in log.epochs] == [True, False]
    assert not np.array_equal(est.pool.alpha.values, alpha0)
    assert not np.array_equal(est.encoder.embedding.values, emb0)


def test_estimator_training_mse_decreases():
    est = tiny_estimator(epochs=6, lr_head=1e-3, lr_encoder=3e-4)
    log = est.train(overlap_corpus(64, seed=5))
    assert log.losses[-1] < log.losses[0]


def test_estimator_learns_constant_target():
    data = [EvalTuple(f"s{i}", f"h {i}", f"r {i}", 0.5) for i in range(64)]
    est = Estimator(EstimatorConfig(encoder=EncoderConfig(kind="hashed", d=8, k=2, heads=2),
                                    epochs=20, lr_head=1e-2, lr_encoder=1e-3))
    log = est.train(data)
    assert log.losses[-1] < 0.01


def test_estimator_empty_dataset():
    with pytest.raises(ValueError):
        tiny_estimator().train([])


def test_estimator_threaded_predict_matches_serial():
    est = tiny_estimator()
    data = overlap_corpus(6, seed=9)
    assert est.predict(data, threads=3) == est.predict(data)


# ranker ---------------------------------------------------------------------


def _vec(*xs):
    return Tensor([list(xs)])


def test_triplet_margin_examples():
    s = r = hp = _vec(0.0, 0.0)
    hn = _vec(2.0, 0.0)
    assert triplet_margin(s, hp, hn, r, 1.0).item() == 0.0
    same = _vec(0.3, -0.1)
    assert triplet_margin(_vec(1.0, 1.0), same, same, _vec(2.0, 0.0), 1.0).item() == 2.0
    assert triplet_margin(None, same, same, _vec(2.0, 0.0), 1.0).item() == 1.0


def test_triplet_loss_identical_encodings_costs_two_margins():
    rk = tiny_ranker(margin=1.0)
    quad = RankQuadruple("quelle", "Hello world", "hello   world", "the reference")
    assert rk.triplet_loss(quad).item() == pytest.approx(2.0, abs=1e-12)


vectors = st.lists(st.floats(-3, 3), min_size=3, max_size=3).map(lambda v: _vec(*v))


@settings(max_examples=100, deadline=None)
@given(vectors, vectors, vectors, vectors, st.floats(0.1, 2.0))
def test_triplet_margin_properties(s, hp, hn, r, eps):
    loss = triplet_margin(s, hp, hn, r, eps).item()
    assert loss >= 0.0
    d = lambda a, b: float(np.linalg.norm(a.values - b.values))  # noqa: E731
    satisfied = d(s, hn) - d(s, hp) >= eps and d(r, hn) - d(r, hp) >= eps
    if satisfied:
        assert loss == pytest.approx(0.0, abs=1e-12)
        assert triplet_margin(s, hn, hp, r, eps).item() >= 2 * eps - 1e-12
    if loss == 0.0:
        assert d(s, hn) - d(s, hp) >= eps - 1e-12 and d(r, hn) - d(r, hp) >= eps - 1e-12


def test_ranker_gradient_check():
    rk = tiny_ranker()
    batch = ranking_corpus(2, seed=4)
    params = [p for _, p in rk.named_params()]
    report = ad.grad_check_params(lambda: rk.loss(batch), params, step=1e-5, tol=1e-3,
                                  max_probes=150, rng=np.random.default_rng(1))
    assert report.passed, report


def test_harmonic_distance_examples():
    assert harmonic_distance(2.5, 2.5) == 2.5
    assert harmonic_distance(0.0, 5.0) == 0.0
    assert harmonic_distance(3.0, 6.0) == 4.0
    assert harmonic_distance(0.0, 0.0) == 0.0
    with pytest.raises(ValueError):
        harmonic_distance(-1.0, 1.0)


def test_similarity_examples():
    assert similarity(0.0) == 1.0
    assert similarity(1.0) == 0.5
    assert similarity(4.0) == 0.2
    with pytest.raises(ValueError):
        similarity(-0.1)


@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=20))
def test_similarity_is_antitone(fs):
    sims = [similarity(f) for f in sorted(fs)]
    assert all(a >= b for a, b in zip(sims, sims[1:]))


@given(st.lists(st.integers(0, 4000).map(lambda i: i / 8), min_size=2, max_size=20, unique=True))
def test_similarity_reverses_distance_order(fs):
    sims = [similarity(f) for f in fs]
    assert list(np.argsort(sims)) == list(np.argsort(fs)[::-1])


def test_ranker_score_composes_distance_and_similarity():
    rk = tiny_ranker()
    triple = ("quelle phrase", "a hypothesis", "the reference")
    f = rk.inference_distance(*triple)
    assert rk.score([triple]) == [similarity(f)]
    assert 0.0 < rk.score([triple])[0] <= 1.0


def test_ranker_reference_only_score():
    rk = tiny_ranker()
    emb = rk._embeddings(["a hypothesis", "the reference"])
    d = float(np.linalg.norm(emb["a hypothesis"] - emb["the reference"]))
    (score,) = rk.score_reference_only([("a hypothesis", "the reference")])
    assert score == pytest.approx(1.0 / (1.0 + d), abs=1e-12)
    ref_only = tiny_ranker(use_source=False)
    assert ref_only.predict([("x", "a hypothesis", "the reference")]) == [score]


def test_ranker_order_preserved_and_threads():
    rk = tiny_ranker()
    triples = [(q.src, q.better, q.ref) for q in ranking_corpus(5, seed=2)]
    serial = rk.score(triples)
    assert rk.score(triples, threads=3) == serial
    assert rk.score(triples[::-1]) == serial[::-1]


def test_ranker_training_has_no_frozen_epoch():
    rk = tiny_ranker(epochs=1, lr=1e-3)
    emb0 = rk.encoder.embedding.values.copy()
    log = rk.train(ranking_corpus(16, seed=3))
    assert [e["frozen"] for e in log.epochs] == [False]
    assert not np.array_equal(rk.encoder.embedding.values, emb0)
    (group,) = rk.param_groups()
    assert group.lr == 1e-3 and not group.frozen


def test_ranker_defaults():
    cfg = RankerConfig()
    assert (cfg.margin, cfg.lr, cfg.batch_size, cfg.layer_dropout) == (1.0, 1e-5, 16, 0.1)
    with pytest.raises(ValueError):
        RankerConfig(margin=0.0)


def test_ranker_empty_dataset():
    with pytest.raises(ValueError):
        tiny_ranker().train([])
