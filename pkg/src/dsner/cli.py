"""Command-line pipeline: dictionary extension, pseudo-annotation, negative
sampling, training, prediction, and scoring.

Every subcommand accepts flags, an optional TOML config file (flags win), and
writes a JSON run manifest (input hashes, resolved config, seed, versions)
next to its primary output.  Exit codes: 0 success, 1 bad usage or config,
2 runtime failure.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from .annotate import annotate_corpus, annotation_quality, load_annotated, sample_training_spans, save_annotated
from .corpus import TypeList, load_corpus, write_predictions
from .embeddings import load_embeddings
from .evaluate import evaluate, evaluate_id_ood
from .inference import predict_corpus
from .lexicon import (
    DictEntry,
    ExtConfig,
    ExtDictEntry,
    extend_dictionary,
    load_dictionary,
    load_extended,
    load_phrases,
    save_extended,
)
from .model import SpanClassifier, StaticEmbeddingEncoder, TrainConfig, load_checkpoint, save_checkpoint, train


class UsageError(Exception):
    """Bad flags or config; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # argparse would exit 2
        raise UsageError(f"{self.prog}: {message}")


# -- config file ---------------------------------------------------------------


def _apply_config(parser: _Parser, subparsers: dict[str, _Parser], path: str) -> None:
    """Load a TOML file and install it as parser defaults (flags still win).

    Scalar keys at the top level apply to every subcommand that has the
    matching destination; a table named after a subcommand applies to it only.
    Unknown keys are rejected.
    """
    try:
        with open(path, "rb") as fh:
            config = tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc

    dests = {name: {a.dest for a in sub._actions} for name, sub in subparsers.items()}
    for key, value in config.items():
        if isinstance(value, dict):
            if key not in subparsers:
                raise UsageError(f"config table [{key}] does not name a subcommand")
            for inner, inner_value in value.items():
                if inner not in dests[key]:
                    raise UsageError(f"config key {key}.{inner} is not a {key} option")
                subparsers[key].set_defaults(**{inner: inner_value})
        else:
            hit = False
            for name, sub in subparsers.items():
                if key in dests[name]:
                    sub.set_defaults(**{key: value})
                    hit = True
            if not hit:
                raise UsageError(f"config key {key} matches no subcommand option")


# -- manifest ------------------------------------------------------------------


def _sha256(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def _write_manifest(args: argparse.Namespace, inputs: dict[str, str | None], **extra) -> None:
    config = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in ("func", "command", "config") and not callable(v)
    }
    canonical = json.dumps(config, sort_keys=True, default=str)
    manifest = {
        "command": args.command,
        "inputs": {
            name: {"path": path, "sha256": _sha256(path)}
            for name, path in inputs.items()
            if path is not None
        },
        "config": config,
        "config_sha256": hashlib.sha256(canonical.encode()).hexdigest(),
        "seed": getattr(args, "seed", None),
        "versions": {
            "dsner": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
        },
        **extra,
    }
    out = Path(str(args.out) + ".manifest.json")
    out.write_text(json.dumps(manifest, indent=2, sort_keys=True, default=str) + "\n", encoding="utf-8")


# -- shared helpers --------------------------------------------------------------


def _types_from_args(args: argparse.Namespace) -> TypeList:
    if not getattr(args, "types", None):
        raise UsageError(f"{args.command}: --types is required (comma-separated pre-defined types)")
    labels = [t.strip() for t in args.types.split(",") if t.strip()]
    if not labels:
        raise UsageError("--types must list at least one type")
    return TypeList.with_none(labels, args.none_label)


def _infer_types(dict_path: str, none_label: str) -> TypeList:
    """Pre-defined types from a dictionary TSV, sorted for stability."""
    seen: set[str] = set()
    with open(dict_path, encoding="utf-8") as fh:
        for line in fh:
            parts = line.rstrip("\n").split("\t")
            if len(parts) >= 2 and parts[1].strip():
                seen.add(parts[1].strip())
    if not seen:
        raise UsageError(f"no types found in {dict_path}")
    return TypeList.with_none(sorted(seen), none_label)


def _load_any_dictionary(path: str, types: TypeList) -> list[ExtDictEntry]:
    """Accept either a plain mention/type TSV or an extended one with similarity."""
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                has_sim = len(line.rstrip("\n").split("\t")) >= 3
                break
        else:
            return []
    if has_sim:
        return load_extended(path, types)
    return [ExtDictEntry(e.mention, e.type_index, 1.0) for e in load_dictionary(path, types)]


def _ext_config(args: argparse.Namespace) -> ExtConfig:
    return ExtConfig(tau1=args.tau1, tau2=args.tau2, theta1=args.theta1, theta2=args.theta2)


# -- subcommands -----------------------------------------------------------------


def _cmd_extend_dict(args: argparse.Namespace) -> int:
    types = _types_from_args(args) if args.types else _infer_types(args.dict, args.none_label)
    entries = load_dictionary(args.dict, types)
    phrases = load_phrases(args.phrases)
    table = load_embeddings(args.emb, case_fold=not args.no_case_fold)
    extended = extend_dictionary(entries, phrases, _ext_config(args), table)
    save_extended(extended, types, args.out)
    _write_manifest(args, {"dict": args.dict, "phrases": args.phrases, "emb": args.emb})
    print(f"wrote {len(extended)} entries ({len(entries)} original) to {args.out}")
    return 0


def _cmd_annotate(args: argparse.Namespace) -> int:
    types = _types_from_args(args)
    sentences = load_corpus(args.corpus, fmt=args.format, types=types)
    entries = _load_any_dictionary(args.dict, types)
    annotated = annotate_corpus(sentences, entries, _ext_config(args), types, case_fold=args.case_fold)
    save_annotated(annotated, args.out, types=types)
    n_spans = sum(len(a.positives) for a in annotated)
    _write_manifest(args, {"corpus": args.corpus, "dict": args.dict})
    print(f"annotated {len(annotated)} sentences with {n_spans} spans to {args.out}")
    return 0


def _cmd_sample(args: argparse.Namespace) -> int:
    types = _types_from_args(args)
    annotated = load_annotated(args.annotated, types=types)
    sampled = sample_training_spans(annotated, args.max_words, args.ratio, args.seed, types)
    save_annotated(sampled, args.out, types=types)
    n_neg = sum(len(a.negatives) for a in sampled)
    _write_manifest(args, {"annotated": args.annotated})
    print(f"sampled {n_neg} negative spans to {args.out}")
    return 0


def _cmd_train(args: argparse.Namespace) -> int:
    types = _types_from_args(args)
    data = load_annotated(args.annotated, types=types)
    dev = load_annotated(args.dev, types=types) if args.dev else None
    table = load_embeddings(args.emb, case_fold=not args.no_case_fold)
    encoder = StaticEmbeddingEncoder(table, args.dim)
    model = SpanClassifier(encoder, types, attn_dim=args.attn_dim, seed=args.seed)
    cfg = TrainConfig(
        learning_rate=args.lr,
        beta1=args.beta1,
        beta2=args.beta2,
        clip_norm=args.clip,
        epochs=args.epochs,
        tokens_per_batch=args.tokens_per_batch,
        seed=args.seed,
    )
    history = train(model, data, cfg, dev)
    save_checkpoint(model, args.out)
    inputs = {"annotated": args.annotated, "emb": args.emb, "dev": args.dev}
    _write_manifest(args, inputs, train_loss=history)
    print(f"trained {cfg.epochs} epochs, final loss {history[-1]:.4f}, saved {args.out}")
    return 0


def _cmd_predict(args: argparse.Namespace) -> int:
    model = load_checkpoint(args.model)
    sentences = load_corpus(args.corpus, fmt=args.format, types=model.types)
    predictions = predict_corpus(sentences, model, args.max_words)
    write_predictions(sentences, predictions, args.out, types=model.types)
    n_spans = sum(len(p) for p in predictions)
    _write_manifest(args, {"model": args.model, "corpus": args.corpus})
    print(f"predicted {n_spans} spans over {len(sentences)} sentences to {args.out}")
    return 0


def _format_report(report, types: TypeList) -> str:
    rows = [("overall", report)] + [(name, report.per_type[name]) for name in types.predefined]
    if report.in_dict is not None:
        rows.append(("in-dict", report.in_dict))
    if report.out_of_dict is not None:
        rows.append(("out-of-dict", report.out_of_dict))
    width = max(len(name) for name, _ in rows)
    lines = [f"{'':<{width}}  {'P':>7} {'R':>7} {'F1':>7} {'TP':>6} {'FP':>6} {'FN':>6}"]
    for name, rep in rows:
        lines.append(
            f"{name:<{width}}  {rep.precision:>7.4f} {rep.recall:>7.4f} {rep.f1:>7.4f}"
            f" {rep.tp:>6} {rep.fp:>6} {rep.fn:>6}"
        )
    return "\n".join(lines)


def _cmd_eval(args: argparse.Namespace) -> int:
    types = _types_from_args(args)
    gold = load_corpus(args.gold, fmt=args.format, types=types)
    pred_sentences = load_corpus(args.pred, types=types)
    if len(pred_sentences) != len(gold):
        raise ValueError(f"{len(pred_sentences)} predictions for {len(gold)} gold sentences")
    for k, (p, g) in enumerate(zip(pred_sentences, gold)):
        if p.tokens != g.tokens:
            raise ValueError(f"sentence {k + 1}: predictions and gold disagree on tokens")
    predictions = [s.gold or [] for s in pred_sentences]
    if args.dict:
        entries = [DictEntry(e.mention, e.type_index) for e in _load_any_dictionary(args.dict, types)]
        report = evaluate_id_ood(
            predictions, gold, entries, types,
            case_fold=args.case_fold, empty_precision_one=args.empty_precision_one,
        )
    else:
        report = evaluate(predictions, gold, types, empty_precision_one=args.empty_precision_one)
    print(json.dumps(report.as_dict(), indent=2, sort_keys=True) if args.json else _format_report(report, types))
    return 0


def _cmd_quality(args: argparse.Namespace) -> int:
    types = _types_from_args(args)
    annotated = load_annotated(args.annotated, types=types)
    precision, recall = annotation_quality(annotated)
    if args.json:
        print(json.dumps({"precision": precision, "recall": recall}, sort_keys=True))
    else:
        print(f"annotation precision {precision:.4f}, recall {recall:.4f}")
    return 0


# -- parser ---------------------------------------------------------------------


def _add_types(sub: _Parser, required_hint: bool = True) -> None:
    sub.add_argument("--types", help="comma-separated pre-defined type names" + ("" if required_hint else " (default: inferred from the dictionary)"))
    sub.add_argument("--none-label", default="None", help="name of the non-entity type")


def _add_ext_params(sub: _Parser) -> None:
    sub.add_argument("--tau1", type=int, default=5, help="headword frequency threshold")
    sub.add_argument("--tau2", type=float, default=0.4, help="cosine similarity threshold")
    sub.add_argument("--theta1", type=float, default=1.0, help="weight ramp scale")
    sub.add_argument("--theta2", type=float, default=-0.5, help="weight ramp offset")


def build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="dsner", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"dsner {__version__}")
    parser.add_argument("--config", help="TOML config file; command-line flags override it")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    subs: dict[str, _Parser] = {}

    sub = subs["extend-dict"] = commands.add_parser("extend-dict", help="type unlabeled phrases by headword similarity")
    sub.add_argument("--dict", required=True, help="mention/type TSV")
    sub.add_argument("--phrases", required=True, help="candidate phrases, one per line")
    sub.add_argument("--emb", required=True, help="word embeddings, text format")
    sub.add_argument("--out", required=True)
    sub.add_argument("--no-case-fold", action="store_true", help="match embeddings case-sensitively")
    _add_ext_params(sub)
    _add_types(sub, required_hint=False)
    sub.set_defaults(func=_cmd_extend_dict)

    sub = subs["annotate"] = commands.add_parser("annotate", help="pseudo-annotate a corpus with a dictionary")
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--dict", required=True, help="plain or extended dictionary TSV")
    sub.add_argument("--out", required=True)
    sub.add_argument("--format", choices=("jsonl", "conll"), default="jsonl")
    sub.add_argument("--case-fold", action="store_true", help="match mentions case-insensitively")
    _add_ext_params(sub)
    _add_types(sub)
    sub.set_defaults(func=_cmd_annotate)

    sub = subs["sample"] = commands.add_parser("sample", help="add sampled negative spans to an annotated corpus")
    sub.add_argument("--annotated", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--max-words", type=int, default=5, help="max span length in words")
    sub.add_argument("--ratio", type=float, default=5.0, help="negatives per positive")
    sub.add_argument("--seed", type=int, default=0)
    _add_types(sub)
    sub.set_defaults(func=_cmd_sample)

    sub = subs["train"] = commands.add_parser("train", help="train the span classifier")
    sub.add_argument("--annotated", required=True, help="annotated corpus with negatives")
    sub.add_argument("--dev", help="annotated dev corpus for best-epoch selection")
    sub.add_argument("--emb", required=True)
    sub.add_argument("--out", required=True, help="model checkpoint (.npz)")
    sub.add_argument("--dim", type=int, default=50, help="encoder hidden size")
    sub.add_argument("--attn-dim", type=int, default=32, help="attention projection size")
    sub.add_argument("--lr", type=float, default=0.001)
    sub.add_argument("--beta1", type=float, default=0.9)
    sub.add_argument("--beta2", type=float, default=0.999)
    sub.add_argument("--clip", type=float, default=5.0, help="global gradient-norm cap")
    sub.add_argument("--epochs", type=int, default=50)
    sub.add_argument("--tokens-per-batch", type=int, default=1000)
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--no-case-fold", action="store_true")
    _add_types(sub)
    sub.set_defaults(func=_cmd_train)

    sub = subs["predict"] = commands.add_parser("predict", help="decode a corpus with a trained model")
    sub.add_argument("--model", required=True)
    sub.add_argument("--corpus", required=True)
    sub.add_argument("--out", required=True)
    sub.add_argument("--format", choices=("jsonl", "conll"), default="jsonl")
    sub.add_argument("--max-words", type=int, default=5)
    sub.set_defaults(func=_cmd_predict)

    sub = subs["eval"] = commands.add_parser("eval", help="score predictions against gold")
    sub.add_argument("--pred", required=True, help="prediction file (corpus schema)")
    sub.add_argument("--gold", required=True)
    sub.add_argument("--format", choices=("jsonl", "conll"), default="jsonl", help="gold file format")
    sub.add_argument("--dict", help="dictionary TSV; adds in/out-of-dictionary breakdown")
    sub.add_argument("--case-fold", action="store_true")
    sub.add_argument("--empty-precision-one", action="store_true", help="score empty prediction sets as precision 1")
    sub.add_argument("--json", action="store_true")
    _add_types(sub)
    sub.set_defaults(func=_cmd_eval)

    sub = subs["quality"] = commands.add_parser("quality", help="precision/recall of pseudo-annotation against gold")
    sub.add_argument("--annotated", required=True)
    sub.add_argument("--json", action="store_true")
    _add_types(sub)
    sub.set_defaults(func=_cmd_quality)

    return parser, subs


def _peek_config(argv: list[str]) -> str | None:
    for pos, arg in enumerate(argv):
        if arg == "--config":
            if pos + 1 >= len(argv):
                raise UsageError("--config needs a file argument")
            return argv[pos + 1]
        if arg.startswith("--config="):
            return arg.split("=", 1)[1]
    return None


def cli_main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    parser, subs = build_parser()
    try:
        # Config values become parser defaults, so explicit flags override them.
        config_path = _peek_config(argv)
        if config_path is not None:
            _apply_config(parser, subs, config_path)
        args = parser.parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit:
        raise
    except Exception as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
