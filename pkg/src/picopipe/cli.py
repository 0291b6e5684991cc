"""Command-line front end.

Subcommands cover every pipeline stage: train-pico, train-dner, embed-graph,
predict, eval-pico, eval-dner, eval-mapping, serve. Results go to stdout,
logs (including the resolved configuration and seed) to stderr. Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from typing import List, Optional

import numpy as np

from . import __version__, corpus, dner, evalmetrics, fixtures, kgraph, mapping, pico


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _print_config(args: argparse.Namespace) -> None:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    _log(f"[picopipe {__version__}] {args.command}: " + json.dumps(resolved, default=str))


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    p.add_argument("--data-dir", default=".", help="directory for outputs and state")


def _resolve(args: argparse.Namespace, path: Optional[str]) -> Optional[str]:
    if path is None:
        return None
    if os.path.isabs(path) or os.path.exists(path):
        return path
    return os.path.join(args.data_dir, path)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_train_pico(args: argparse.Namespace) -> int:
    dataset = pico.load_pico_dataset(_resolve(args, args.data))
    _log(f"loaded {len(dataset.items)} sentences, histogram {dataset.histogram()}")
    if args.valid:
        train_ds, valid_ds = dataset, pico.load_pico_dataset(_resolve(args, args.valid), "valid")
    else:
        train_ds, valid_ds = pico.stratified_split(dataset, args.split, args.seed)
        _log(f"split {len(train_ds.items)}/{len(valid_ds.items)} at ratio {args.split}")
    vocab = corpus.build_vocabulary(
        (t for toks, _ in train_ds.items for t in toks), min_count=args.min_count
    )
    model = pico.init_pico_model(vocab, variant=args.variant, word_dim=args.word_dim,
                                 hidden=args.hidden, seed=args.seed)
    cfg = pico.PicoTrainConfig(epochs=args.epochs, lr=args.lr, batch_size=args.batch_size,
                               dropout=args.dropout, patience=args.patience)
    model, history = pico.train_pico(model, train_ds, valid_ds, cfg, seed=args.seed)
    for h in history:
        _log(json.dumps(h))
    out = _resolve(args, args.out)
    model.save(out)
    metrics = pico.evaluate_pico(model, valid_ds if valid_ds.items else train_ds)
    print(evalmetrics.format_report(metrics["per_class"], "sentence classification"))
    print(f"macro_f1={metrics['macro_f1']:.6f} accuracy={metrics['accuracy']:.6f}")
    _log(f"saved checkpoint to {out}")
    return 0


def cmd_train_dner(args: argparse.Namespace) -> int:
    train = corpus.load_bio_corpus(_resolve(args, args.train))
    _log(f"train corpus: {train.stats()}")
    valid = corpus.load_bio_corpus(_resolve(args, args.valid)) if args.valid else None
    if valid:
        _log(f"valid corpus: {valid.stats()}")
    graph = graph_emb = None
    if args.graph and args.graph_emb:
        graph = kgraph.load_graph(_resolve(args, args.graph))
        graph_emb = kgraph.load_embeddings(_resolve(args, args.graph_emb))
    cfg = dner.DnerConfig(
        word_dim=args.word_dim, hidden=args.hidden,
        char_variant=None if args.char == "none" else args.char,
        use_graph=graph_emb is not None, head=args.head, hard_bio=args.hard_bio,
        dropout=args.dropout, batch_size=args.batch_size, lr=args.lr,
        epochs=args.epochs, patience=args.patience, min_count=args.min_count,
    )
    model, history = dner.train_dner(train, valid, cfg, seed=args.seed,
                                     graph=graph, graph_emb=graph_emb)
    for h in history:
        _log(json.dumps(h))
    out = _resolve(args, args.out)
    model.save(out)
    if valid:
        metrics = dner.evaluate_dner(model, valid)
        print(evalmetrics.format_report({"entity": metrics["counts"]}, "entity extraction"))
        print(f"token_accuracy={metrics['token_accuracy']:.6f}")
    _log(f"saved checkpoint to {out}")
    return 0


def cmd_embed_graph(args: argparse.Namespace) -> int:
    graph = kgraph.load_graph(_resolve(args, args.graph), english_only=args.english_only)
    _log(f"graph: {len(graph.labels)} nodes")
    cfg = kgraph.WalkConfig(
        walk_length=args.walk_length, walks_per_node=args.walks_per_node,
        window=args.window, dim=args.dim, negatives=args.negatives,
        epochs=args.epochs, lr=args.lr, seed=args.seed,
    )
    emb = kgraph.train_graph_embeddings(graph, cfg)
    for i, loss in enumerate(emb.epoch_losses):
        _log(f"epoch {i}: loss {loss:.6f}")
    out = _resolve(args, args.out)
    kgraph.save_embeddings(out, emb)
    if args.export_text:
        kgraph.export_embeddings(_resolve(args, args.export_text), graph, emb)
    print(f"trained {len(emb.node_ids)} x {emb.dim} embeddings -> {out}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    doc = corpus.read_document_file(_resolve(args, args.document), doc_id=args.doc_id)
    pico_model = pico.PicoModel.load(_resolve(args, args.pico))
    dner_model = dner.DnerModel.load(_resolve(args, args.dner))
    if args.graph and args.graph_emb:
        graph = kgraph.load_graph(_resolve(args, args.graph))
        emb = kgraph.load_embeddings(_resolve(args, args.graph_emb))
        dner_model.attach_graph(graph, emb)
    rules = mapping.builtin_rules() if args.rules is None else mapping.load_rules(_resolve(args, args.rules))
    cfg = mapping.MappingConfig(lam=args.lam)

    pico.classify_document(pico_model, doc)
    p_entities, o_entities = mapping.map_document(doc, dner_model, rules, cfg)

    for sent in doc.sentences:
        probs = " ".join(f"{p:.3f}" for p in sent.pico_probs)
        print(f"sentence {sent.index}\t{sent.pico_label}\t[{probs}]\t{sent.text}")
    for label, ents in (("P", p_entities), ("O", o_entities)):
        print(f"{label} entities ({len(ents)}):")
        for e in ents:
            rid = e.rule_id or "-"
            print(f"  {e.surface}\t(sentence {e.span.sentence_index}, "
                  f"score_p={e.score_p:.4f}, score_o={e.score_o:.4f}, rule={rid})")
    if args.dump:
        spans = [e.span for e in p_entities + o_entities]
        with open(_resolve(args, args.dump), "w", encoding="utf-8") as fh:
            fh.write(dner.format_predictions(doc.id, spans))
        _log(f"wrote prediction dump to {args.dump}")
    return 0


def cmd_eval_pico(args: argparse.Namespace) -> int:
    model = pico.PicoModel.load(_resolve(args, args.model))
    dataset = pico.load_pico_dataset(_resolve(args, args.data))
    metrics = pico.evaluate_pico(model, dataset)
    print(evalmetrics.format_report(metrics["per_class"], "sentence classification"))
    print(f"macro_f1={metrics['macro_f1']:.6f} accuracy={metrics['accuracy']:.6f}")
    return 0


def cmd_eval_dner(args: argparse.Namespace) -> int:
    gold = corpus.load_bio_corpus(_resolve(args, args.gold))
    if args.model:
        model = dner.DnerModel.load(_resolve(args, args.model))
        metrics = dner.evaluate_dner(model, gold)
        print(evalmetrics.format_report({"entity": metrics["counts"]}, "entity extraction"))
        print(f"token_accuracy={metrics['token_accuracy']:.6f}")
        return 0
    if not args.pred:
        raise ValueError("provide either --model or --pred")
    with open(_resolve(args, args.pred), encoding="utf-8") as fh:
        predictions = dner.parse_predictions(fh.read())
    gold_spans = []
    for idx, (tokens, tags) in enumerate(gold.sentences):
        gold_spans.extend(dner.decode_spans(tokens, tags, idx))
    pred_spans = [span for _, span in predictions]
    counts = evalmetrics.entity_counts(gold_spans, pred_spans)
    print(evalmetrics.format_report({"entity": counts}, "entity extraction"))
    return 0


def _load_mapped_file(path: str) -> List[tuple]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t")
            if len(parts) != 2 or parts[0] not in ("P", "O"):
                raise ValueError(f"{path}:{lineno}: expected `P|O<TAB>surface`")
            out.append((parts[1], parts[0]))
    return out


def cmd_eval_mapping(args: argparse.Namespace) -> int:
    gold = _load_mapped_file(_resolve(args, args.gold))
    pred = _load_mapped_file(_resolve(args, args.pred))
    report = evalmetrics.mapping_recall(gold, pred)
    for cls in ("P", "O"):
        r = report[cls]
        print(f"class={cls} recall={r['recall']:.6f} found={r['found']} gold={r['gold']} "
              f"precision_advisory={r['precision_advisory']:.6f}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from .service import create_app, load_config
    from .service.state import ServiceConfig

    if args.config:
        config = load_config(_resolve(args, args.config))
    else:
        config = ServiceConfig(
            data_dir=args.data_dir,
            pico_checkpoint=_resolve(args, args.pico) or "",
            dner_checkpoint=_resolve(args, args.dner) or "",
            graph_path=_resolve(args, args.graph),
            graph_embeddings=_resolve(args, args.graph_emb),
            port=args.port, retrain_threshold=args.retrain_threshold,
            lam=args.lam, seed=args.seed,
        )
    app = create_app(config)
    import uvicorn

    _log(f"serving on port {config.port}, data dir {config.data_dir}")
    uvicorn.run(app, host=args.host, port=config.port, log_level="warning")
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="picopipe",
        description="Step-wise PICO evidence extraction: classify sentences, tag disease "
                    "entities, map entities to P/O.",
    )
    parser.add_argument("--version", action="version", version=f"picopipe {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-pico", help="train the sentence classifier")
    p.add_argument("--data", required=True, help="LABEL<TAB>text dataset")
    p.add_argument("--valid", help="optional separate validation file")
    p.add_argument("--split", type=float, default=0.7, help="train fraction when no --valid")
    p.add_argument("--out", required=True, help="output checkpoint path")
    p.add_argument("--variant", choices=("cnn", "bilstm"), default="bilstm")
    p.add_argument("--word-dim", type=int, default=100)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.0)
    p.add_argument("--patience", type=int, default=5)
    p.add_argument("--min-count", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_train_pico)

    p = sub.add_parser("train-dner", help="train the disease tagger")
    p.add_argument("--train", required=True, help="BIO training corpus")
    p.add_argument("--valid", help="BIO validation corpus")
    p.add_argument("--out", required=True)
    p.add_argument("--char", choices=("cnn", "lstm", "none"), default="cnn")
    p.add_argument("--head", choices=("crf", "softmax"), default="crf")
    p.add_argument("--hard-bio", action="store_true",
                   help="forbid O->I and START->I transitions")
    p.add_argument("--graph", help="graph file for knowledge features")
    p.add_argument("--graph-emb", help="trained graph-embedding checkpoint")
    p.add_argument("--word-dim", type=int, default=100)
    p.add_argument("--hidden", type=int, default=100)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--lr", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--dropout", type=float, default=0.25)
    p.add_argument("--patience", type=int, default=0)
    p.add_argument("--min-count", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_train_dner)

    p = sub.add_parser("embed-graph", help="train knowledge-graph node embeddings")
    p.add_argument("--graph", required=True)
    p.add_argument("--out", required=True, help="embedding checkpoint path")
    p.add_argument("--export-text", help="also write the text export format")
    p.add_argument("--dim", type=int, default=64)
    p.add_argument("--walk-length", type=int, default=32)
    p.add_argument("--walks-per-node", type=int, default=10)
    p.add_argument("--window", type=int, default=5)
    p.add_argument("--negatives", type=int, default=5)
    p.add_argument("--epochs", type=int, default=5)
    p.add_argument("--lr", type=float, default=0.005)
    p.add_argument("--english-only", action="store_true")
    _add_common(p)
    p.set_defaults(func=cmd_embed_graph)

    p = sub.add_parser("predict", help="analyze one document file")
    p.add_argument("document", help="text file: first line title, rest abstract")
    p.add_argument("--pico", required=True, help="sentence classifier checkpoint")
    p.add_argument("--dner", required=True, help="tagger checkpoint")
    p.add_argument("--graph")
    p.add_argument("--graph-emb")
    p.add_argument("--rules", help="rule file (default: built-in rules)")
    p.add_argument("--lam", type=float, default=0.5, help="classifier weight in score fusion")
    p.add_argument("--doc-id", default=None)
    p.add_argument("--dump", help="write the prediction dump to this path")
    _add_common(p)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval-pico", help="evaluate a sentence classifier")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval_pico)

    p = sub.add_parser("eval-dner", help="evaluate entity extraction")
    p.add_argument("--gold", required=True, help="BIO gold corpus")
    p.add_argument("--model", help="tagger checkpoint to run on the gold corpus")
    p.add_argument("--pred", help="prediction dump to score instead of a model")
    _add_common(p)
    p.set_defaults(func=cmd_eval_dner)

    p = sub.add_parser("eval-mapping", help="recall report for mapped entities")
    p.add_argument("--gold", required=True, help="`P|O<TAB>surface` file")
    p.add_argument("--pred", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_eval_mapping)

    p = sub.add_parser("serve", help="run the review service")
    p.add_argument("--config", help="JSON config file (see README)")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8321)
    p.add_argument("--pico")
    p.add_argument("--dner")
    p.add_argument("--graph")
    p.add_argument("--graph-emb")
    p.add_argument("--retrain-threshold", type=int, default=20)
    p.add_argument("--lam", type=float, default=0.5)
    _add_common(p)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _print_config(args)
    try:
        return args.func(args)
    except (ValueError, OSError, KeyError) as exc:
        _log(f"error: {exc}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
