"""Distantly supervised named entity recognition from dictionaries.

The pipeline extends an entity dictionary with similar phrases, pseudo-
annotates raw text with confidence weights, trains a span-type classifier,
and decodes each sentence as its best non-overlapping span partition.
"""
from .annotate import (
    AnnotatedSentence,
    WeightedSpan,
    annotate,
    annotate_corpus,
    annotation_quality,
    load_annotated,
    sample_training_spans,
    save_annotated,
)
from .corpus import (
    CorpusError,
    Sentence,
    SpanRef,
    TypeList,
    bio_to_spans,
    load_corpus,
    spans_to_bio,
    write_predictions,
)
from .embeddings import EmbeddingError, EmbeddingTable, load_embeddings
from .evaluate import EvalReport, evaluate, evaluate_id_ood, id_ood_split
from .inference import (
    CandidateSet,
    Partition,
    candidate_count,
    dp_partition,
    generate_candidates,
    label_spans,
    predict_corpus,
    predict_sentence,
)
from .lexicon import (
    DictEntry,
    ExtConfig,
    ExtDictEntry,
    annotation_weight,
    extend_dictionary,
    headword,
    load_dictionary,
    load_extended,
    load_phrases,
    save_extended,
)
from .model import (
    Encoder,
    SpanClassifier,
    StaticEmbeddingEncoder,
    TrainConfig,
    TrainingDiverged,
    load_checkpoint,
    make_batches,
    save_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AnnotatedSentence",
    "CandidateSet",
    "CorpusError",
    "DictEntry",
    "EmbeddingError",
    "EmbeddingTable",
    "Encoder",
    "EvalReport",
    "ExtConfig",
    "ExtDictEntry",
    "Partition",
    "Sentence",
    "SpanClassifier",
    "SpanRef",
    "StaticEmbeddingEncoder",
    "TrainConfig",
    "TrainingDiverged",
    "TypeList",
    "WeightedSpan",
    "annotate",
    "annotate_corpus",
    "annotation_quality",
    "annotation_weight",
    "bio_to_spans",
    "candidate_count",
    "dp_partition",
    "evaluate",
    "evaluate_id_ood",
    "extend_dictionary",
    "generate_candidates",
    "headword",
    "id_ood_split",
    "label_spans",
    "load_annotated",
    "load_checkpoint",
    "load_corpus",
    "load_dictionary",
    "load_embeddings",
    "load_extended",
    "load_phrases",
    "make_batches",
    "predict_corpus",
    "predict_sentence",
    "sample_training_spans",
    "save_annotated",
    "save_checkpoint",
    "save_extended",
    "spans_to_bio",
    "train",
    "write_predictions",
]
