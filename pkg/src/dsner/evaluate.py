"""Entity-level scoring: micro precision / recall / F1, per-type tables, and a
breakdown by whether gold mentions are reachable from the dictionary.

A prediction counts as correct only when both boundaries and the type match a
gold span exactly.  All aggregates are recomputed from raw TP/FP/FN counts,
never averaged from sub-scores.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .corpus import Sentence, SpanRef, TypeList
from .lexicon import DictEntry

Prediction = list[tuple[SpanRef, int]]


@dataclass
class EvalReport:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    per_type: dict[str, "EvalReport"] = field(default_factory=dict)
    in_dict: "EvalReport | None" = None
    out_of_dict: "EvalReport | None" = None

    def as_dict(self) -> dict:
        out = {
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
        }
        if self.per_type:
            out["per_type"] = {name: rep.as_dict() for name, rep in self.per_type.items()}
        if self.in_dict is not None:
            out["in_dict"] = self.in_dict.as_dict()
        if self.out_of_dict is not None:
            out["out_of_dict"] = self.out_of_dict.as_dict()
        return out


def _report(tp: int, fp: int, fn: int, empty_precision_one: bool) -> EvalReport:
    if tp + fp > 0:
        precision = tp / (tp + fp)
    else:
        precision = 1.0 if empty_precision_one else 0.0
    recall = tp / (tp + fn) if tp + fn > 0 else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
    return EvalReport(tp, fp, fn, precision, recall, f1)


def _gold_of(sentence: Sentence, index: int) -> list[tuple[SpanRef, int]]:
    if sentence.gold is None:
        raise ValueError(f"sentence {index} has no gold annotations")
    return sentence.gold


def _count(
    predictions: Sequence[Prediction], gold: Sequence[Prediction]
) -> tuple[int, int, int]:
    tp = fp = fn = 0
    for pred, ref in zip(predictions, gold):
        pred_set = set(pred)
        ref_set = set(ref)
        tp += len(pred_set & ref_set)
        fp += len(pred_set - ref_set)
        fn += len(ref_set - pred_set)
    return tp, fp, fn


def evaluate(
    predictions: Sequence[Prediction],
    sentences: Sequence[Sentence],
    types: TypeList,
    *,
    empty_precision_one: bool = False,
) -> EvalReport:
    """Micro-averaged exact-match scores with a per-type breakdown."""
    if len(predictions) != len(sentences):
        raise ValueError(
            f"got {len(predictions)} prediction lists for {len(sentences)} sentences"
        )
    gold = [_gold_of(s, idx) for idx, s in enumerate(sentences)]
    report = _report(*_count(predictions, gold), empty_precision_one)
    for label_index, label in enumerate(types.predefined):
        pred_t = [[p for p in pred if p[1] == label_index] for pred in predictions]
        gold_t = [[g for g in ref if g[1] == label_index] for ref in gold]
        report.per_type[label] = _report(*_count(pred_t, gold_t), empty_precision_one)
    return report


# -- dictionary-coverage breakdown --------------------------------------------


def mention_in_dictionary(
    mention: Sequence[str], dict_tokens: frozenset[str], case_fold: bool = False
) -> bool:
    """True when the mention shares at least one token with some dictionary entry.

    This is the membership predicate behind the in/out-of-dictionary split; a
    full-sequence hit implies a shared token, so the single check covers both.
    Alternative readings (substring match, headword match) would slot in here.
    """
    tokens = [t.lower() for t in mention] if case_fold else list(mention)
    return any(t in dict_tokens for t in tokens)


def dictionary_token_set(entries: Sequence[DictEntry], case_fold: bool = False) -> frozenset[str]:
    tokens: set[str] = set()
    for entry in entries:
        for word in entry.mention:
            tokens.add(word.lower() if case_fold else word)
    return frozenset(tokens)


def id_ood_split(
    sentences: Sequence[Sentence],
    entries: Sequence[DictEntry],
    *,
    case_fold: bool = False,
) -> tuple[list[Prediction], list[Prediction]]:
    """Split every gold mention into dictionary-reachable and unreachable sets.

    Returns per-sentence gold lists (in_dict, out_of_dict); their union is the
    full gold set and they never share a mention.
    """
    dict_tokens = dictionary_token_set(entries, case_fold)
    in_dict: list[Prediction] = []
    out_of_dict: list[Prediction] = []
    for idx, sentence in enumerate(sentences):
        inside: Prediction = []
        outside: Prediction = []
        for span, label in _gold_of(sentence, idx):
            mention = sentence.tokens[span.i - 1 : span.j]
            if mention_in_dictionary(mention, dict_tokens, case_fold):
                inside.append((span, label))
            else:
                outside.append((span, label))
        in_dict.append(inside)
        out_of_dict.append(outside)
    return in_dict, out_of_dict


def _evaluate_subset(
    predictions: Sequence[Prediction],
    subset_gold: Sequence[Prediction],
    empty_precision_one: bool,
) -> EvalReport:
    # Only predictions overlapping a subset mention compete within the subset;
    # the rest belong to the other side of the split.
    kept: list[Prediction] = []
    for pred, ref in zip(predictions, subset_gold):
        kept.append([p for p in pred if any(p[0].overlaps(g[0]) for g in ref)])
    return _report(*_count(kept, subset_gold), empty_precision_one)


def evaluate_id_ood(
    predictions: Sequence[Prediction],
    sentences: Sequence[Sentence],
    entries: Sequence[DictEntry],
    types: TypeList,
    *,
    case_fold: bool = False,
    empty_precision_one: bool = False,
) -> EvalReport:
    """Full report plus sub-reports over dictionary-reachable and novel mentions."""
    report = evaluate(predictions, sentences, types, empty_precision_one=empty_precision_one)
    in_dict, out_of_dict = id_ood_split(sentences, entries, case_fold=case_fold)
    report.in_dict = _evaluate_subset(predictions, in_dict, empty_precision_one)
    report.out_of_dict = _evaluate_subset(predictions, out_of_dict, empty_precision_one)
    return report
