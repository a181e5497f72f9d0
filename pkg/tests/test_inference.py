"""Candidate enumeration and the segmentation decoder against a brute-force oracle."""
from __future__ import annotations

import math

import numpy as np
import pytest

from dsner.corpus import Sentence, SpanRef, TypeList
from dsner.embeddings import EmbeddingTable
from dsner.inference import (
    PROB_FLOOR,
    CandidateSet,
    Partition,
    candidate_count,
    dp_forward,
    dp_partition,
    generate_candidates,
    label_spans,
    predict_corpus,
    predict_sentence,
)
from dsner.model import SpanClassifier, StaticEmbeddingEncoder

TYPES = TypeList(("X", "Y", "None"))


def _spans(n, m):
    return [SpanRef(i, j) for i in range(1, n + 1) for j in range(i, min(i + m - 1, n) + 1)]


def _cands_from_none(n, m, none):
    rows = {}
    for span in _spans(n, m):
        p = none[(span.i, span.j)]
        rows[span] = np.array([(1 - p) * 0.7, (1 - p) * 0.3, p])
    return CandidateSet(n, m, rows)


def _random_cands(rng, n, m):
    return CandidateSet(n, m, {span: rng.dirichlet(np.ones(3)) for span in _spans(n, m)})


# -- counting ----------------------------------------------------------------------


def test_candidate_count_examples():
    assert candidate_count(10, 5) == 40
    assert candidate_count(3, 5) == 6
    assert candidate_count(1, 5) == 1
    assert candidate_count(5, 1) == 5


def test_candidate_count_matches_enumeration():
    for n in range(1, 13):
        for m in range(1, 7):
            assert candidate_count(n, m) == len(_spans(n, m)), (n, m)


def test_candidate_count_rejects_nonpositive():
    with pytest.raises(ValueError):
        candidate_count(0, 5)
    with pytest.raises(ValueError):
        candidate_count(5, 0)


# -- candidate sets -----------------------------------------------------------------


def test_candidate_set_validates_row_count():
    rows = {SpanRef(1, 1): np.array([0.5, 0.3, 0.2])}
    with pytest.raises(ValueError, match="candidate rows"):
        CandidateSet(2, 1, rows)


def test_candidate_set_validates_distributions():
    rows = {SpanRef(1, 1): np.array([0.9, 0.9, 0.9])}
    with pytest.raises(ValueError, match="not a distribution"):
        CandidateSet(1, 1, rows)
    rows = {SpanRef(1, 1): np.array([1.5, -0.3, -0.2])}
    with pytest.raises(ValueError):
        CandidateSet(1, 1, rows)


def test_candidate_set_rejects_overlong_span():
    rows = {SpanRef(1, 1): np.array([0.0, 0.0, 1.0]), SpanRef(1, 2): np.array([0.0, 0.0, 1.0])}
    with pytest.raises(ValueError):
        CandidateSet(2, 1, rows | {SpanRef(2, 2): np.array([0.0, 0.0, 1.0])})


def test_none_prob_reads_last_slot():
    cands = _cands_from_none(1, 1, {(1, 1): 0.25})
    assert cands.none_prob(SpanRef(1, 1)) == 0.25


# -- partitions ---------------------------------------------------------------------


def test_partition_validation():
    Partition((SpanRef(1, 2), SpanRef(3, 3)), -1.0)
    with pytest.raises(ValueError):
        Partition((), 0.0)
    with pytest.raises(ValueError):
        Partition((SpanRef(2, 3),), 0.0)
    with pytest.raises(ValueError):
        Partition((SpanRef(1, 2), SpanRef(4, 5)), 0.0)
    with pytest.raises(ValueError):
        Partition((SpanRef(1, 3), SpanRef(2, 4)), 0.0)


# -- decoder ------------------------------------------------------------------------


def test_single_token_objective():
    cands = _cands_from_none(1, 5, {(1, 1): 0.3})
    part = dp_partition(cands)
    assert part.spans == (SpanRef(1, 1),)
    assert part.objective == pytest.approx(math.log(0.3), abs=1e-12)


def test_two_token_merge_preferred():
    cands = _cands_from_none(2, 5, {(1, 1): 0.9, (2, 2): 0.8, (1, 2): 0.1})
    part = dp_partition(cands)
    assert part.spans == (SpanRef(1, 2),)
    assert part.objective == pytest.approx(math.log(0.1), abs=1e-12)


def test_two_token_split_preferred():
    cands = _cands_from_none(2, 5, {(1, 1): 0.1, (2, 2): 0.1, (1, 2): 0.9})
    part = dp_partition(cands)
    assert part.spans == (SpanRef(1, 1), SpanRef(2, 2))
    assert part.objective == pytest.approx(2 * math.log(0.1), abs=1e-12)


def test_tie_prefers_earliest_start():
    # ln(p) + ln(1.0) == ln(p) exactly, so both partitions tie; the span
    # starting earlier must win.
    cands = _cands_from_none(2, 5, {(1, 1): 0.5, (2, 2): 1.0, (1, 2): 0.5})
    assert dp_partition(cands).spans == (SpanRef(1, 2),)


def test_zero_probability_is_floored():
    cands = _cands_from_none(1, 1, {(1, 1): 0.0})
    part = dp_partition(cands)
    assert math.isfinite(part.objective)
    assert part.objective == pytest.approx(math.log(PROB_FLOOR), abs=1e-9)


def test_max_words_limits_span_length():
    none = {(1, 1): 0.9, (2, 2): 0.9, (1, 2): 0.001}
    merged = dp_partition(_cands_from_none(2, 2, dict(none)))
    assert merged.spans == (SpanRef(1, 2),)
    split = dp_partition(_cands_from_none(2, 1, {(1, 1): 0.9, (2, 2): 0.9}))
    assert split.spans == (SpanRef(1, 1), SpanRef(2, 2))


def _brute_partitions(n, m):
    if n == 0:
        yield []
        return
    for length in range(1, min(m, n) + 1):
        start = n - length + 1
        for rest in _brute_partitions(start - 1, m):
            yield rest + [SpanRef(start, n)]


def _brute_best(cands):
    best_obj, best_spans = math.inf, None
    for spans in _brute_partitions(cands.n_tokens, cands.max_words):
        obj = sum(math.log(max(cands.none_prob(s), PROB_FLOOR)) for s in spans)
        if obj < best_obj:
            best_obj, best_spans = obj, spans
    return best_obj, best_spans


def test_decoder_matches_brute_force():
    rng = np.random.default_rng(42)
    for _ in range(50):
        n = int(rng.integers(1, 9))
        m = int(rng.integers(1, 5))
        cands = _random_cands(rng, n, m)
        part = dp_partition(cands)
        oracle_obj, oracle_spans = _brute_best(cands)
        assert part.objective == pytest.approx(oracle_obj, abs=1e-9)
        # Continuous probabilities make the optimum unique, so spans match too.
        assert list(part.spans) == oracle_spans


def test_iteration_count_is_closed_form():
    rng = np.random.default_rng(7)
    for n, m in ((1, 1), (1, 5), (4, 2), (10, 5), (12, 3), (6, 9)):
        cands = _random_cands(rng, n, m)
        assert dp_forward(cands).iterations == candidate_count(n, m), (n, m)


def test_prefix_stability():
    # best[k] only depends on the first k tokens, so truncating the sentence
    # must reproduce the table prefix.
    rng = np.random.default_rng(3)
    cands = _random_cands(rng, 9, 3)
    trace = dp_forward(cands)
    for k in range(1, 10):
        sub = CandidateSet(k, 3, {s: r for s, r in cands.rows.items() if s.j <= k})
        assert dp_forward(sub).best[k] == pytest.approx(trace.best[k], abs=1e-12)


def test_decoder_is_deterministic():
    rng = np.random.default_rng(11)
    cands = _random_cands(rng, 7, 4)
    a = dp_partition(cands)
    b = dp_partition(cands)
    assert a.spans == b.spans
    assert a.objective == b.objective


# -- labeling -----------------------------------------------------------------------


def test_label_spans_drops_none_argmax():
    rows = {
        SpanRef(1, 1): np.array([0.7, 0.1, 0.2]),
        SpanRef(2, 2): np.array([0.1, 0.2, 0.7]),
    }
    cands = CandidateSet(2, 1, rows)
    part = Partition((SpanRef(1, 1), SpanRef(2, 2)), 0.0)
    assert label_spans(part, cands, TYPES) == [(SpanRef(1, 1), 0)]


def test_label_spans_tie_takes_lowest_type_index():
    rows = {SpanRef(1, 1): np.array([0.4, 0.4, 0.2])}
    cands = CandidateSet(1, 1, rows)
    part = Partition((SpanRef(1, 1),), 0.0)
    assert label_spans(part, cands, TYPES) == [(SpanRef(1, 1), 0)]


def test_label_spans_all_none_gives_empty():
    rows = {
        SpanRef(1, 1): np.array([0.1, 0.2, 0.7]),
        SpanRef(2, 2): np.array([0.3, 0.3, 0.4]),
    }
    cands = CandidateSet(2, 1, rows)
    part = Partition((SpanRef(1, 1), SpanRef(2, 2)), 0.0)
    assert label_spans(part, cands, TYPES) == []


# -- model-driven decode ---------------------------------------------------------------


def _tiny_model(seed=0):
    rng = np.random.default_rng(19)
    words = ("a", "b", "c", "d")
    table = EmbeddingTable(4, {w: rng.normal(size=4) for w in words})
    enc = StaticEmbeddingEncoder(table, 3)
    return SpanClassifier(enc, TYPES, attn_dim=2, seed=seed)


def test_generate_candidates_counts_and_rows():
    model = _tiny_model()
    s = Sentence(("a", "b", "c", "d"), doc_id="t")
    cands = generate_candidates(s, model, 2)
    assert len(cands.rows) == candidate_count(4, 2)
    for span, row in cands.rows.items():
        assert span.length <= 2
        assert np.allclose(row, model.predict_span(s, span), atol=1e-12)


def test_generate_candidates_caps_max_words():
    model = _tiny_model()
    s = Sentence(("a", "b"), doc_id="t")
    cands = generate_candidates(s, model, 10)
    assert len(cands.rows) == 3


def test_predict_sentence_sorted_disjoint():
    model = _tiny_model(seed=8)
    s = Sentence(("a", "c", "b", "d", "a"), doc_id="t")
    pred = predict_sentence(s, model, 3)
    last_end = 0
    for span, label in pred:
        assert span.i > last_end
        assert 1 <= span.i <= span.j <= 5
        assert label != TYPES.none_index
        last_end = span.j


def test_all_none_model_predicts_nothing():
    from dsner.annotate import AnnotatedSentence, WeightedSpan
    from dsner.model import TrainConfig, train

    model = _tiny_model()
    none_w = np.array([0.0, 0.0, 1.0])
    data = [
        AnnotatedSentence(
            Sentence(tuple(t), doc_id="t"),
            [],
            [WeightedSpan(SpanRef(i, i), none_w) for i in range(1, len(t) + 1)],
        )
        for t in (("a", "b"), ("c", "d"), ("b", "c", "a"))
    ]
    train(model, data, TrainConfig(learning_rate=0.05, epochs=25, tokens_per_batch=50))
    for t in (("a", "b"), ("d", "c", "a")):
        assert predict_sentence(Sentence(tuple(t), doc_id="t"), model, 3) == []


def test_predict_corpus_aligns():
    model = _tiny_model()
    sents = [Sentence(("a", "b"), doc_id="t"), Sentence(("c",), doc_id="t")]
    preds = predict_corpus(sents, model, 2)
    assert len(preds) == 2
