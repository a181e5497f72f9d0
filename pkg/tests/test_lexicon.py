"""Headword extraction, dictionary extension, and the annotation-weight ramp."""
from __future__ import annotations

import math
import random

import numpy as np
import pytest

from dsner.corpus import TypeList
from dsner.embeddings import EmbeddingTable
from dsner.lexicon import (
    DictEntry,
    ExtConfig,
    ExtDictEntry,
    annotation_weight,
    extend_dictionary,
    frequent_headwords,
    headword,
    load_dictionary,
    load_extended,
    load_phrases,
    save_extended,
)

TYPES = TypeList(("Disease", "Chemical", "None"))
DIS, CHEM = 0, 1


# -- headword ------------------------------------------------------------------


def test_headword_before_preposition():
    assert headword(["cancer", "of", "the", "liver"]) == "cancer"


def test_headword_last_word():
    assert headword(["liver", "cancer"]) == "cancer"
    assert headword(["tumor"]) == "tumor"


def test_headword_leading_preposition_falls_back():
    assert headword(["of", "note"]) == "note"


def test_headword_first_preposition_wins():
    assert headword(["loss", "of", "function", "in", "mice"]) == "loss"


def test_headword_empty_phrase():
    with pytest.raises(ValueError):
        headword([])


# -- annotation weight -----------------------------------------------------------


def test_weight_is_one_at_exact_similarity():
    for theta1, theta2 in [(1.0, -0.5), (3.0, 2.0), (0.0, 0.0)]:
        cfg = ExtConfig(theta1=theta1, theta2=theta2)
        assert annotation_weight(1.0, cfg) == 1.0


def test_weight_matches_sigmoid_values():
    cfg = ExtConfig(theta1=1.0, theta2=-0.5)
    assert annotation_weight(0.4, cfg) == pytest.approx(0.47502, abs=1e-5)
    assert annotation_weight(0.9, cfg) == pytest.approx(0.59869, abs=1e-5)
    assert annotation_weight(0.5, cfg) == pytest.approx(1 / (1 + math.e**0), abs=1e-12)


def test_weight_rejects_out_of_range():
    cfg = ExtConfig()
    for s in (0.0, -0.2, 1.0001):
        with pytest.raises(ValueError):
            annotation_weight(s, cfg)


def test_weight_monotone_in_similarity():
    cfg = ExtConfig(theta1=1.0, theta2=-0.5)
    grid = np.linspace(0.01, 1.0, 100)
    values = [annotation_weight(float(s), cfg) for s in grid]
    assert all(b >= a for a, b in zip(values, values[1:]))


# -- extension: hand-traced examples ---------------------------------------------


def _cancer_world():
    # "cancer" similar to itself only; "aspirin"/"skin" off in their own corner.
    table = EmbeddingTable(
        3,
        {
            "cancer": np.array([1.0, 0.0, 0.0]),
            "aspirin": np.array([0.0, 1.0, 0.0]),
            "skin": np.array([0.0, 0.0, 1.0]),
        },
    )
    d = [
        DictEntry(("liver", "cancer"), DIS),
        DictEntry(("lung", "cancer"), DIS),
        DictEntry(("appendix", "cancer"), DIS),
        DictEntry(("aspirin",), CHEM),
    ]
    return table, d


def test_extension_adds_matching_phrase():
    table, d = _cancer_world()
    cfg = ExtConfig(tau1=2, tau2=0.8)
    out = extend_dictionary(d, [("skin", "cancer")], cfg, table)
    assert ExtDictEntry(("skin", "cancer"), DIS, 1.0) in out
    originals = [e for e in out if e.similarity == 1.0 and e.mention != ("skin", "cancer")]
    assert len(originals) == 4
    assert len(out) == 5


def test_extension_respects_frequency_threshold():
    table, d = _cancer_world()
    cfg = ExtConfig(tau1=5, tau2=0.8)
    out = extend_dictionary(d, [("skin", "cancer")], cfg, table)
    assert len(out) == 4
    assert all(e.similarity == 1.0 for e in out)


def test_extension_empty_phrases_copies_dictionary():
    table, d = _cancer_world()
    out = extend_dictionary(d, [], ExtConfig(tau1=1, tau2=0.5), table)
    assert sorted((e.mention, e.type_index) for e in out) == sorted(
        (e.mention, e.type_index) for e in d
    )
    assert all(e.similarity == 1.0 for e in out)


def test_extension_ties_keep_all_types():
    table = EmbeddingTable(2, {"blade": np.array([1.0, 0.0]), "steel": np.array([0.0, 1.0])})
    d = [
        DictEntry(("long", "blade"), DIS),
        DictEntry(("short", "blade"), CHEM),
    ]
    out = extend_dictionary(d, [("steel", "blade")], ExtConfig(tau1=1, tau2=0.5), table)
    added = {(e.mention, e.type_index, e.similarity) for e in out if e.mention == ("steel", "blade")}
    assert added == {(("steel", "blade"), DIS, 1.0), (("steel", "blade"), CHEM, 1.0)}


def test_extension_skips_oov_headword():
    table, d = _cancer_world()
    out = extend_dictionary(d, [("zz", "mystery"),], ExtConfig(tau1=1, tau2=0.1), table)
    assert all(e.mention != ("zz", "mystery") for e in out)


def test_frequent_headwords_strictness():
    table, d = _cancer_world()
    assert frequent_headwords(d, ExtConfig(tau1=2), table) == {"cancer"}
    assert frequent_headwords(d, ExtConfig(tau1=3), table) == set()
    assert frequent_headwords(d, ExtConfig(tau1=3, strict_tau1=False), table) == {"cancer"}


# -- extension: properties on random worlds ---------------------------------------


def _random_world(rng: random.Random):
    dim = 4
    nprng = np.random.default_rng(rng.randrange(1 << 30))
    words = [f"h{k}" for k in range(6)] + [f"m{k}" for k in range(6)]
    table = EmbeddingTable(dim, {w: nprng.normal(size=dim) for w in words})
    entries = [
        DictEntry((rng.choice(words[6:]), rng.choice(words[:6])), rng.randrange(2))
        for _ in range(rng.randint(4, 14))
    ]
    phrases = [
        (rng.choice(words[6:]), rng.choice(words[:6])) for _ in range(rng.randint(0, 8))
    ]
    return table, entries, phrases


def test_extension_properties_random():
    rng = random.Random(42)
    for _ in range(60):
        table, entries, phrases = _random_world(rng)
        cfg = ExtConfig(tau1=rng.randint(1, 4), tau2=rng.choice([0.1, 0.3, 0.5]))
        out = extend_dictionary(entries, phrases, cfg, table)

        # Originals present with similarity exactly 1.
        pairs = {(e.mention, e.type_index) for e in out if e.similarity == 1.0}
        for entry in entries:
            assert (entry.mention, entry.type_index) in pairs

        original_mentions = {e.mention for e in entries}
        by_mention: dict[tuple, set[float]] = {}
        for e in out:
            assert 0.0 < e.similarity <= 1.0
            by_mention.setdefault(e.mention, set()).add(e.similarity)
            if e.mention not in original_mentions:
                assert e.similarity >= cfg.tau2
        # One similarity value per mention.
        for sims in by_mention.values():
            assert len(sims) == 1

        # Raising tau2 can only drop the arg-max match, so it prunes at the
        # (mention, type) level.  Raising tau1 can shift the arg-max to a
        # different entry (the old best headword falls out of the frequent
        # set), so only the set of covered mentions is guaranteed to shrink.
        tight_tau2 = extend_dictionary(
            entries, phrases, ExtConfig(tau1=cfg.tau1, tau2=min(1.0, cfg.tau2 + 0.2)), table
        )
        assert {(e.mention, e.type_index) for e in tight_tau2} <= {
            (e.mention, e.type_index) for e in out
        }
        tight_tau1 = extend_dictionary(
            entries, phrases, ExtConfig(tau1=cfg.tau1 + 1, tau2=cfg.tau2), table
        )
        assert {e.mention for e in tight_tau1} <= {e.mention for e in out}


# -- file formats ----------------------------------------------------------------


def test_dictionary_tsv_round_trip(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("liver cancer\tDisease\naspirin\tChemical\n")
    entries = load_dictionary(p, TYPES)
    assert entries == [
        DictEntry(("liver", "cancer"), DIS),
        DictEntry(("aspirin",), CHEM),
    ]


def test_dictionary_rejects_bad_rows(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("no tab here\n")
    with pytest.raises(ValueError, match=":1"):
        load_dictionary(p, TYPES)
    p.write_text("x\tNotAType\n")
    with pytest.raises(ValueError):
        load_dictionary(p, TYPES)


def test_extended_tsv_round_trip(tmp_path):
    entries = [
        ExtDictEntry(("skin", "cancer"), DIS, 0.931234567),
        ExtDictEntry(("aspirin",), CHEM, 1.0),
    ]
    p = tmp_path / "e.tsv"
    save_extended(entries, TYPES, p)
    text = p.read_text()
    assert "0.931235" in text  # six decimals
    back = load_extended(p, TYPES)
    assert [(e.mention, e.type_index) for e in back] == [(e.mention, e.type_index) for e in entries]
    assert back[0].similarity == pytest.approx(0.931235, abs=1e-9)


def test_load_phrases_skips_blanks(tmp_path):
    p = tmp_path / "p.txt"
    p.write_text("skin cancer\n\nbone marrow edema\n")
    assert load_phrases(p) == [("skin", "cancer"), ("bone", "marrow", "edema")]
