"""Command-line interface: train, predict, evaluate, diagnose, synth."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import fields

from . import __version__, corpus, metrics
from .categorizer import (CATEGORIES, STOP_WORDS, SpanFeatures,
                          categorize_features, pronoun_groups)
from .checkpoint import load_checkpoint, save_checkpoint
from .corpus import CorpusError, Span, document_from_sentences, parse_conll2012, parse_jsonl
from .inference import clustering_from_gold, predict
from .model import CorefModel
from .numerics import check_gradients
from .synthdata import SynthSpec, generate
from .training import TrainConfig, document_loss, load_config, train


class CliError(RuntimeError):
    pass


def worker_count() -> int:
    """Worker cap from LINGMESS_THREADS; 0 or unset means serial."""
    raw = os.environ.get("LINGMESS_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as err:
        raise CliError(f"LINGMESS_THREADS must be an integer, got {raw!r}") from err
    if n < 0:
        raise CliError("LINGMESS_THREADS must be >= 0")
    return n


def read_corpus(path: str, fmt: str = "auto") -> list[corpus.Document]:
    if fmt == "auto":
        fmt = "conll" if path.endswith((".conll", ".v4_gold_conll")) else "jsonl"
    with open(path, "rb") as fh:
        if fmt == "conll":
            return parse_conll2012(fh)
        return parse_jsonl(fh)


def _add_config_flags(parser: argparse.ArgumentParser):
    for f in fields(TrainConfig):
        flag = "--" + f.name.replace("_", "-")
        kind = type(getattr(TrainConfig(), f.name))
        parser.add_argument(flag, type=kind, default=None,
                            help=f"override config key {f.name}")


def build_train_config(args) -> TrainConfig:
    cfg = load_config(args.config) if args.config else TrainConfig()
    overrides = {}
    for f in fields(TrainConfig):
        value = getattr(args, f.name, None)
        if value is not None:
            overrides[f.name] = value
    if overrides:
        cfg = TrainConfig.from_dict({**cfg.to_dict(), **overrides})
    return cfg


def cmd_train(args) -> int:
    docs = read_corpus(args.train, args.format)
    cfg = build_train_config(args)
    log_fh = open(args.log, "w", encoding="utf-8") if args.log else None
    start = time.monotonic()

    def log_fn(entry):
        if log_fh:
            log_fh.write(json.dumps(
                {**entry, "wall_time": time.monotonic() - start}) + "\n")

    try:
        model, _ = train(docs, cfg, log_fn=log_fn)
    finally:
        if log_fh:
            log_fh.close()
    save_checkpoint(args.out, model)
    return 0


def cmd_predict(args) -> int:
    model = load_checkpoint(args.model)
    docs = read_corpus(args.input, args.format)
    with open(args.out, "w", encoding="utf-8") as fh:
        for doc in docs:
            clustering = predict(doc, model)
            clusters = sorted(
                sorted((s.start, s.end) for s in cluster)
                for cluster in clustering.clusters)
            obj = {
                "doc_key": doc.doc_key,
                "sentences": doc.sentences(),
                "clusters": [[[s, e] for s, e in c] for c in clusters],
            }
            if doc.gold_clusters:
                gold = sorted(sorted((s.start, s.end) for s in c)
                              for c in doc.gold_clusters)
                obj["gold_clusters"] = [[[s, e] for s, e in c] for c in gold]
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
    return 0


def _clusterings(docs) -> list:
    return [clustering_from_gold(d) for d in docs]


def cmd_evaluate(args) -> int:
    gold_docs = read_corpus(args.gold, "jsonl")
    pred_docs = read_corpus(args.pred, "jsonl")
    gold_keys = {d.doc_key for d in gold_docs}
    pred_keys = {d.doc_key for d in pred_docs}
    if gold_keys != pred_keys:
        missing = sorted(gold_keys ^ pred_keys)
        raise CliError(f"doc_key mismatch between gold and pred: {missing}")
    key = _clusterings(gold_docs)
    response = _clusterings(pred_docs)
    report = metrics.evaluate_clusterings(key, response)
    if args.model:
        model = load_checkpoint(args.model)
        report.per_category = metrics.pairwise_by_category(gold_docs, model)
    out = report.to_json()
    if args.compare:
        cmp_docs = read_corpus(args.compare, "jsonl")
        cmp_keys = {d.doc_key for d in cmp_docs}
        if cmp_keys != gold_keys:
            raise CliError(
                f"doc_key mismatch with --compare: {sorted(gold_keys ^ cmp_keys)}")
        f1_a = metrics.per_document_conll_f1(key, response)
        f1_b = metrics.per_document_conll_f1(key, _clusterings(cmp_docs))
        out["p_value"] = metrics.permutation_test(
            f1_a, f1_b, resamples=args.resamples, seed=args.seed)
    print(json.dumps(out, indent=2, sort_keys=True))
    print(report.format_table(), file=sys.stderr)
    return 0


def tables_json() -> str:
    obj = {
        "pronoun_groups": {str(gid): list(words)
                           for gid, words in pronoun_groups().items()},
        "stop_words": sorted(STOP_WORDS),
    }
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _phrase_pair_doc(c_tokens: list[str], q_tokens: list[str]):
    doc = document_from_sentences(
        "route", [c_tokens, q_tokens], [])
    c = Span(0, len(c_tokens) - 1)
    q = Span(len(c_tokens), len(c_tokens) + len(q_tokens) - 1)
    return doc, c, q


GRADCHECK_SENTENCES = [["Anna", "Smith", "slept", "."],
                       ["She", "woke", "up", "."]]
GRADCHECK_CLUSTERS = [[(0, 1), (4, 4)]]


def gradcheck_config() -> TrainConfig:
    return TrainConfig(d_emb=4, d_enc=4, d_hidden=4, top_lambda=1.0,
                       max_span_width=3, seed=7, epochs=1)


def run_gradcheck(eps: float = 2e-4) -> float:
    from .encoder import build_vocab
    doc = document_from_sentences("gradcheck", GRADCHECK_SENTENCES,
                                  GRADCHECK_CLUSTERS)
    cfg = gradcheck_config()
    model = CorefModel(cfg, build_vocab([doc], cfg.min_count))

    def loss_and_grad(store):
        store.zero_grads()
        loss, _ = document_loss(doc, model)
        return loss

    return check_gradients(loss_and_grad, model.store, eps)


def cmd_diagnose(args) -> int:
    if args.subcommand == "dump-tables":
        sys.stdout.write(tables_json())
        return 0
    if args.subcommand == "route":
        doc, c, q = _phrase_pair_doc(args.c.split(), args.q.split())
        category = categorize_features(SpanFeatures(c, doc),
                                       SpanFeatures(q, doc))
        print(json.dumps({"category": category.value}))
        return 0
    if args.subcommand == "score-pair":
        from .scorers import pair_score
        from .corpus import MentionPair
        model = load_checkpoint(args.model)
        docs = read_corpus(args.input, args.format)
        matches = [d for d in docs if d.doc_key == args.doc_key]
        if not matches:
            raise CliError(f"doc_key {args.doc_key!r} not found in {args.input}")
        doc = matches[0]
        state = model.forward(doc, spans=[])
        pair = MentionPair(Span(*args.candidate), Span(*args.query))
        breakdown = pair_score(pair, state.enc.X, doc, model.mention_head,
                               model.shared_head, model.expert_heads,
                               router=model.router(doc))
        print(json.dumps(breakdown.to_json(), indent=2))
        return 0
    if args.subcommand == "gradcheck":
        err = run_gradcheck()
        print(json.dumps({"max_relative_error": err}))
        return 0
    raise CliError(f"unknown diagnose subcommand {args.subcommand!r}")


def cmd_synth(args) -> int:
    docs = generate(SynthSpec(n_docs=args.n_docs, seed=args.seed))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(corpus.serialize_jsonl(docs))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lingmess",
        description="Multi-expert coreference resolution at desk scale.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write a checkpoint")
    p.add_argument("--train", required=True, help="training corpus path")
    p.add_argument("--format", default="auto", choices=["auto", "jsonl", "conll"])
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--log", default=None, help="JSONL per-epoch loss log")
    p.add_argument("--config", default=None, help="config file (JSON or key=value)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="predict coreference clusters")
    p.add_argument("--model", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--format", default="auto", choices=["auto", "jsonl", "conll"])
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("evaluate", help="score predictions against gold")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--compare", default=None,
                   help="second prediction file for a permutation test")
    p.add_argument("--model", default=None,
                   help="checkpoint for the per-category pairwise diagnostic")
    p.add_argument("--resamples", type=int, default=10000)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("diagnose", help="routing and gradient diagnostics")
    dsub = p.add_subparsers(dest="subcommand", required=True)
    d = dsub.add_parser("dump-tables", help="pronoun groups and stop words")
    d.set_defaults(func=cmd_diagnose)
    d = dsub.add_parser("route", help="category of a phrase pair")
    d.add_argument("--c", required=True, help="candidate phrase (space-separated)")
    d.add_argument("--q", required=True, help="query phrase (space-separated)")
    d.set_defaults(func=cmd_diagnose)
    d = dsub.add_parser("score-pair", help="score breakdown for one pair")
    d.add_argument("--model", required=True)
    d.add_argument("--input", required=True)
    d.add_argument("--format", default="auto", choices=["auto", "jsonl", "conll"])
    d.add_argument("--doc-key", required=True)
    d.add_argument("--candidate", type=int, nargs=2, required=True,
                   metavar=("START", "END"))
    d.add_argument("--query", type=int, nargs=2, required=True,
                   metavar=("START", "END"))
    d.set_defaults(func=cmd_diagnose)
    d = dsub.add_parser("gradcheck", help="finite-difference gradient check")
    d.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("synth", help="generate the synthetic corpus")
    p.add_argument("--n-docs", type=int, required=True)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        worker_count()  # validate the env var early; execution is serial
        return args.func(args)
    except (CliError, CorpusError, OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
