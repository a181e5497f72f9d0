"""Span-type classifier: pluggable token encoder, three-way attention pooling over
left context / span / right context, type-embedding softmax, and Adam training.

All tensors are float64 numpy arrays and every gradient is exact backpropagation;
there is no autograd dependency.  Hidden rows for a sentence of N tokens are laid
out as <sos>, token_1 .. token_N, <eos> (N + 2 rows), so the three parts of any
span <i, j> with 1 <= i <= j <= N are guaranteed non-empty.
"""
from __future__ import annotations

import json
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .annotate import AnnotatedSentence
from .corpus import Sentence, SpanRef, TypeList
from .embeddings import EmbeddingTable


class TrainingDiverged(RuntimeError):
    """Raised when the loss becomes non-finite during training."""


@dataclass
class TrainConfig:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    clip_norm: float = 5.0
    epochs: int = 50
    tokens_per_batch: int = 1000
    seed: int = 0
    adam_eps: float = 1e-8

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.clip_norm <= 0 or self.tokens_per_batch < 1:
            raise ValueError("invalid training configuration")


def _uniform(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int) -> np.ndarray:
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Encoder(ABC):
    """Maps a token sequence to hidden rows for <sos> + tokens + <eos>.

    Implementations own their trainable tensors; `init_params` must return them
    as a dict whose arrays are updated in place by the optimizer.  Alternative
    encoders (recurrent, contextual, character-level) plug in here without any
    change to attention, loss, or inference code.
    """

    name: str
    dim: int

    @abstractmethod
    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]: ...

    @abstractmethod
    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        """Return hidden rows, shape (len(tokens) + 2, dim)."""

    @abstractmethod
    def backward(
        self, tokens: Sequence[str], hidden: np.ndarray, grad_hidden: np.ndarray, grads: dict[str, np.ndarray]
    ) -> None:
        """Accumulate parameter gradients given d(loss)/d(hidden)."""

    @abstractmethod
    def state(self) -> tuple[dict, dict[str, np.ndarray]]:
        """(json-safe metadata, arrays) for checkpointing."""


class StaticEmbeddingEncoder(Encoder):
    """Baseline encoder: h_t = tanh(P e_t + b) over frozen pre-trained vectors.

    Out-of-vocabulary tokens share a trained unknown vector; the <sos>/<eos>
    vectors are trained as well.  The pre-trained rows themselves receive no
    gradient.
    """

    name = "static"

    def __init__(self, table: EmbeddingTable, dim: int):
        words = table.words()
        self.dim = dim
        self.emb_dim = table.dim
        self.case_fold = table.case_fold
        self.vocab = {w: r for r, w in enumerate(words)}
        self._words = words
        self.emb = np.vstack([table.lookup(w) for w in words]) if words else np.zeros((0, table.dim))
        self.params: dict[str, np.ndarray] = {}

    def _fold(self, word: str) -> str:
        return word.lower() if self.case_fold else word

    def init_params(self, rng: np.random.Generator) -> dict[str, np.ndarray]:
        e, d = self.emb_dim, self.dim
        self.params = {
            "enc.proj": _uniform(rng, (d, e), e),
            "enc.bias": np.zeros(d),
            "enc.unk": _uniform(rng, (e,), e),
            "enc.sos": _uniform(rng, (e,), e),
            "enc.eos": _uniform(rng, (e,), e),
        }
        return self.params

    def _input_rows(self, tokens: Sequence[str]) -> np.ndarray:
        p = self.params
        rows = np.empty((len(tokens) + 2, self.emb_dim))
        rows[0] = p["enc.sos"]
        rows[-1] = p["enc.eos"]
        for t, tok in enumerate(tokens, start=1):
            row = self.vocab.get(self._fold(tok))
            rows[t] = self.emb[row] if row is not None else p["enc.unk"]
        return rows

    def encode(self, tokens: Sequence[str]) -> np.ndarray:
        p = self.params
        return np.tanh(self._input_rows(tokens) @ p["enc.proj"].T + p["enc.bias"])

    def backward(self, tokens, hidden, grad_hidden, grads) -> None:
        dpre = grad_hidden * (1.0 - hidden * hidden)
        grads["enc.proj"] += dpre.T @ self._input_rows(tokens)
        grads["enc.bias"] += dpre.sum(axis=0)
        dinput = dpre @ self.params["enc.proj"]
        grads["enc.sos"] += dinput[0]
        grads["enc.eos"] += dinput[-1]
        for t, tok in enumerate(tokens, start=1):
            if self._fold(tok) not in self.vocab:
                grads["enc.unk"] += dinput[t]

    def state(self) -> tuple[dict, dict[str, np.ndarray]]:
        meta = {"dim": self.dim, "emb_dim": self.emb_dim, "case_fold": self.case_fold}
        arrays = {"vocab": np.array(self._words), "emb": self.emb, **self.params}
        return meta, arrays

    @classmethod
    def from_state(cls, meta: dict, arrays: dict[str, np.ndarray]) -> "StaticEmbeddingEncoder":
        words = [str(w) for w in arrays["vocab"]]
        table = EmbeddingTable(
            int(meta["emb_dim"]),
            {w: arrays["emb"][r] for r, w in enumerate(words)},
            case_fold=bool(meta["case_fold"]),
        )
        enc = cls(table, int(meta["dim"]))
        enc.params = {k: np.array(arrays[k]) for k in ("enc.proj", "enc.bias", "enc.unk", "enc.sos", "enc.eos")}
        return enc


ENCODERS: dict[str, type] = {StaticEmbeddingEncoder.name: StaticEmbeddingEncoder}

_PARTS = ("attn_q_lc", "attn_q_c", "attn_q_rc")


def _softmax(x: np.ndarray) -> np.ndarray:
    z = np.exp(x - x.max())
    return z / z.sum()


class SpanClassifier:
    """Produces p(type | span, sentence) and exact gradients of the weighted loss."""

    def __init__(self, encoder: Encoder, types: TypeList, attn_dim: int = 64, seed: int = 0):
        self.encoder = encoder
        self.types = types
        self.attn_dim = attn_dim
        d, k = encoder.dim, attn_dim
        rng = np.random.default_rng(seed)
        self.params: dict[str, np.ndarray] = dict(encoder.init_params(rng))
        self.params["attn_w"] = _uniform(rng, (k, d), d)
        for name in _PARTS:
            self.params[name] = _uniform(rng, (k,), k)
        self.params["type_emb"] = _uniform(rng, (len(types), 3 * d), 3 * d)

    # -- forward pieces ----------------------------------------------------

    def encode(self, sentence: Sentence) -> np.ndarray:
        return self.encoder.encode(sentence.tokens)

    def _part_slices(self, span: SpanRef, n_rows: int) -> tuple[slice, slice, slice]:
        i, j = span.i, span.j
        if j > n_rows - 2:
            raise ValueError(f"span <{i}, {j}> exceeds sentence length {n_rows - 2}")
        return slice(0, i), slice(i, j + 1), slice(j + 1, n_rows)

    def _represent(self, hidden: np.ndarray, scores: np.ndarray, span: SpanRef):
        """m = concat of attention-pooled part vectors; also returns softmax caches."""
        d = self.encoder.dim
        m = np.empty(3 * d)
        caches = []
        for z, sl in enumerate(self._part_slices(span, hidden.shape[0])):
            a = _softmax(scores[sl] @ self.params[_PARTS[z]])
            m[z * d : (z + 1) * d] = a @ hidden[sl]
            caches.append((sl, a))
        return m, caches

    def span_representation(self, hidden: np.ndarray, span: SpanRef) -> np.ndarray:
        scores = np.tanh(hidden @ self.params["attn_w"].T)
        return self._represent(hidden, scores, span)[0]

    def type_distribution(self, m: np.ndarray) -> np.ndarray:
        logits = self.params["type_emb"] @ m
        return _softmax(logits)

    def predict_spans(self, sentence: Sentence, spans: Sequence[SpanRef]) -> np.ndarray:
        """Probability rows for many spans of one sentence, sharing the encoding."""
        hidden = self.encode(sentence)
        scores = np.tanh(hidden @ self.params["attn_w"].T)
        out = np.empty((len(spans), len(self.types)))
        for r, span in enumerate(spans):
            m, _ = self._represent(hidden, scores, span)
            out[r] = self.type_distribution(m)
        return out

    def predict_span(self, sentence: Sentence, span: SpanRef, max_words: int | None = None) -> np.ndarray:
        if max_words is not None and span.length > max_words:
            raise ValueError(f"span of {span.length} words exceeds the {max_words}-word limit")
        return self.predict_spans(sentence, [span])[0]

    # -- loss and gradients --------------------------------------------------

    def zero_grads(self) -> dict[str, np.ndarray]:
        return {name: np.zeros_like(p) for name, p in self.params.items()}

    def loss(self, batch: Sequence[AnnotatedSentence], with_grads: bool = True):
        """Weighted cross-entropy J = -sum_spans sum_types w_l log p(l | span).

        Returns (J, grads); grads is None when ``with_grads`` is false.
        """
        if not batch:
            raise ValueError("empty batch")
        p = self.params
        d = self.encoder.dim
        grads = self.zero_grads() if with_grads else None
        total = 0.0

        for ann in batch:
            spans = list(ann.positives) + list(ann.negatives)
            if not spans:
                continue
            hidden = self.encoder.encode(ann.sentence.tokens)
            scores = np.tanh(hidden @ p["attn_w"].T)
            d_hidden = np.zeros_like(hidden)
            d_scores = np.zeros_like(scores)

            for ws in spans:
                m, caches = self._represent(hidden, scores, ws.span)
                logits = p["type_emb"] @ m
                log_z = logits.max()
                log_z += np.log(np.exp(logits - log_z).sum())
                log_probs = logits - log_z
                w = ws.weights
                total += -float(w @ log_probs)
                if not with_grads:
                    continue

                probs = np.exp(log_probs)
                d_logits = -w + w.sum() * probs
                grads["type_emb"] += np.outer(d_logits, m)
                d_m = p["type_emb"].T @ d_logits
                for z, (sl, a) in enumerate(caches):
                    g = d_m[z * d : (z + 1) * d]
                    part_h = hidden[sl]
                    d_a = part_h @ g
                    d_t = a * (d_a - a @ d_a)
                    d_hidden[sl] += np.outer(a, g)
                    grads[_PARTS[z]] += scores[sl].T @ d_t
                    d_scores[sl] += np.outer(d_t, p[_PARTS[z]])

            if with_grads:
                d_pre = d_scores * (1.0 - scores * scores)
                grads["attn_w"] += d_pre.T @ hidden
                d_hidden += d_pre @ p["attn_w"]
                self.encoder.backward(ann.sentence.tokens, hidden, d_hidden, grads)

        if not np.isfinite(total):
            raise TrainingDiverged(f"non-finite loss {total}")
        return total, grads


# -- optimization ------------------------------------------------------------


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm."""
    total = float(np.sqrt(sum(float((g * g).sum()) for g in grads.values())))
    if total > max_norm:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class Adam:
    def __init__(self, params: dict[str, np.ndarray], cfg: TrainConfig):
        self.cfg = cfg
        self.step_count = 0
        self.m = {name: np.zeros_like(p) for name, p in params.items()}
        self.v = {name: np.zeros_like(p) for name, p in params.items()}

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.cfg
        self.step_count += 1
        bc1 = 1.0 - cfg.beta1**self.step_count
        bc2 = 1.0 - cfg.beta2**self.step_count
        for name, p in params.items():
            g = grads[name]
            m = self.m[name]
            v = self.v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            p -= cfg.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + cfg.adam_eps)


def make_batches(data: Sequence[AnnotatedSentence], tokens_per_batch: int) -> list[list[AnnotatedSentence]]:
    """Group whole sentences until the token budget is hit (always >= 1 per batch)."""
    batches: list[list[AnnotatedSentence]] = []
    current: list[AnnotatedSentence] = []
    budget = 0
    for ann in data:
        n = len(ann.sentence)
        if current and budget + n > tokens_per_batch:
            batches.append(current)
            current, budget = [], 0
        current.append(ann)
        budget += n
    if current:
        batches.append(current)
    return batches


def train(
    model: SpanClassifier,
    data: Sequence[AnnotatedSentence],
    cfg: TrainConfig,
    dev: Sequence[AnnotatedSentence] | None = None,
) -> list[float]:
    """Adam training with global-norm clipping and token-budget batches.

    Updates the model in place and returns per-epoch training losses.  When a
    dev set is given, the parameters from the best dev-loss epoch are restored
    at the end.  Deterministic for a fixed config seed.
    """
    if not data:
        raise ValueError("empty training set")
    rng = np.random.default_rng(cfg.seed)
    optimizer = Adam(model.params, cfg)
    order = np.arange(len(data))
    history: list[float] = []
    best_dev = np.inf
    best_snapshot: dict[str, np.ndarray] | None = None

    for _ in range(cfg.epochs):
        rng.shuffle(order)
        epoch_loss = 0.0
        for batch in make_batches([data[idx] for idx in order], cfg.tokens_per_batch):
            loss, grads = model.loss(batch)
            clip_gradients(grads, cfg.clip_norm)
            optimizer.step(model.params, grads)
            epoch_loss += loss
        history.append(epoch_loss)
        if dev is not None:
            dev_loss = sum(
                model.loss(batch, with_grads=False)[0] for batch in make_batches(dev, cfg.tokens_per_batch)
            )
            if dev_loss < best_dev:
                best_dev = dev_loss
                best_snapshot = {name: p.copy() for name, p in model.params.items()}

    if best_snapshot is not None:
        for name, p in model.params.items():
            p[...] = best_snapshot[name]
    return history


# -- checkpointing -----------------------------------------------------------

CHECKPOINT_VERSION = 1


def save_checkpoint(model: SpanClassifier, path: str | Path) -> None:
    enc_meta, enc_arrays = model.encoder.state()
    meta = {
        "version": CHECKPOINT_VERSION,
        "encoder": model.encoder.name,
        "encoder_meta": enc_meta,
        "labels": list(model.types.labels),
        "attn_dim": model.attn_dim,
    }
    arrays = {f"encoder__{k}": v for k, v in enc_arrays.items()}
    arrays["attn_w"] = model.params["attn_w"]
    for name in _PARTS:
        arrays[name] = model.params[name]
    arrays["type_emb"] = model.params["type_emb"]
    np.savez(path, meta=np.array(json.dumps(meta)), **arrays)


def load_checkpoint(path: str | Path) -> SpanClassifier:
    with np.load(path, allow_pickle=False) as data:
        meta = json.loads(str(data["meta"][()]))
        if meta.get("version") != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {meta.get('version')!r}")
        encoder_cls = ENCODERS.get(meta["encoder"])
        if encoder_cls is None:
            raise ValueError(f"unknown encoder {meta['encoder']!r}")
        enc_arrays = {k.split("__", 1)[1]: data[k] for k in data.files if k.startswith("encoder__")}
        encoder = encoder_cls.from_state(meta["encoder_meta"], enc_arrays)
        types = TypeList(tuple(meta["labels"]))
        model = SpanClassifier(encoder, types, attn_dim=int(meta["attn_dim"]), seed=0)
        # Constructing the classifier re-initialized the encoder; put the
        # checkpointed tensors back.
        encoder.params = {k: np.array(enc_arrays[k]) for k in encoder.params}
        model.params = dict(encoder.params)
        model.params["attn_w"] = np.array(data["attn_w"])
        for name in _PARTS:
            model.params[name] = np.array(data[name])
        model.params["type_emb"] = np.array(data["type_emb"])
    return model
