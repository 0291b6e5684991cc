"""Stage two: BIO disease tagging over the P- and O-labeled sentences.

Token features are the concatenation of a trainable word embedding, an
optional character-encoder output, and an optional frozen knowledge-graph
vector (zeros when the token is not in the graph). A bidirectional LSTM
produces per-token emission scores consumed by either a per-token softmax or
a linear-chain CRF head. Decoded BIO runs become entity spans.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import checkpoint, crf, evalmetrics, seqmodels
from .corpus import BIO_TAGS, BioCorpus, Document, Sentence, Vocabulary, build_vocabulary
from .kgraph import KnowledgeGraph, NodeEmbeddings, lookup_embedding
from .numerics import OptimizerState, Params, adam_step, softmax_cross_entropy
from .rng import Rng

TAG_INDEX = {t: i for i, t in enumerate(BIO_TAGS)}
NUM_TAGS = len(BIO_TAGS)


@dataclass
class EntitySpan:
    """A contiguous token span decoded from BIO tags.

    `start`/`end` index tokens (end exclusive); `surface` is the space-joined
    covered text; `pico_probs` is copied from the host sentence when the span
    came out of a classified document.
    """

    sentence_index: int
    start: int
    end: int
    surface: str
    pico_probs: Optional[np.ndarray] = None
    assigned: Optional[str] = None

    def key(self) -> Tuple[int, int, int]:
        return (self.sentence_index, self.start, self.end)


@dataclass
class DnerConfig:
    word_dim: int = 100
    hidden: int = 100
    char_variant: Optional[str] = "cnn"   # "cnn" | "lstm" | None
    char_dim: int = 30
    use_graph: bool = False
    head: str = "crf"                     # "crf" | "softmax"
    hard_bio: bool = False
    dropout: float = 0.25
    batch_size: int = 32
    lr: float = 1e-3
    epochs: int = 50
    patience: int = 0
    min_count: int = 1

    def char_out_dim(self) -> int:
        if self.char_variant == "cnn":
            return seqmodels.CHAR_CNN_FILTERS
        if self.char_variant == "lstm":
            return 2 * seqmodels.CHAR_LSTM_HIDDEN
        if self.char_variant is None:
            return 0
        raise ValueError(f"unknown char encoder variant {self.char_variant!r}")


@dataclass
class DnerModel:
    config: DnerConfig
    vocab: Vocabulary
    word_emb: np.ndarray
    lstm: Params                           # keys fwd.* / bwd.*
    head_w: np.ndarray                     # (K, 2*hidden)
    head_b: np.ndarray                     # (K,)
    char_params: Optional[Params] = None
    transitions: Optional[np.ndarray] = None
    graph: Optional[KnowledgeGraph] = None
    graph_emb: Optional[NodeEmbeddings] = None

    @property
    def graph_dim(self) -> int:
        if not self.config.use_graph:
            return 0
        if self.graph_emb is not None:
            return self.graph_emb.dim
        return 0

    @property
    def feature_dim(self) -> int:
        return self.config.word_dim + self.config.char_out_dim() + self.graph_dim

    def all_params(self) -> Params:
        out: Params = {"word_emb": self.word_emb}
        if self.char_params is not None:
            for k, v in self.char_params.items():
                out[f"char.{k}"] = v
        for k, v in self.lstm.items():
            out[f"lstm.{k}"] = v
        out["head.W"] = self.head_w
        out["head.b"] = self.head_b
        if self.transitions is not None:
            out["crf.transitions"] = self.transitions
        return out

    def set_params(self, params: Params) -> None:
        self.word_emb = params["word_emb"]
        if self.char_params is not None:
            self.char_params = {k[5:]: v for k, v in params.items() if k.startswith("char.")}
        self.lstm = {k[5:]: v for k, v in params.items() if k.startswith("lstm.")}
        self.head_w = params["head.W"]
        self.head_b = params["head.b"]
        if "crf.transitions" in params:
            self.transitions = params["crf.transitions"]

    def attach_graph(self, graph: KnowledgeGraph, embeddings: NodeEmbeddings) -> None:
        if not self.config.use_graph:
            raise ValueError("model was not configured with graph features")
        expected = self.lstm["fwd.W_i"].shape[1] - self.config.hidden
        got = self.config.word_dim + self.config.char_out_dim() + embeddings.dim
        if got != expected:
            raise ValueError(f"graph embedding dim {embeddings.dim} gives feature dim {got}, "
                             f"model expects {expected}")
        self.graph = graph
        self.graph_emb = embeddings

    def save(self, path: str) -> None:
        tensors = {f"dner.{k}": v for k, v in self.all_params().items()}
        meta = {
            "kind": "dner",
            "tags": list(BIO_TAGS),
            "config": asdict(self.config),
            "vocab": self.vocab.to_dict(),
            "graph_dim": self.graph_dim,
        }
        checkpoint.save_checkpoint(path, tensors, meta)

    @classmethod
    def load(cls, path: str) -> "DnerModel":
        tensors, meta = checkpoint.load_checkpoint(path)
        if meta.get("kind") != "dner":
            raise ValueError(f"{path}: not a tagger checkpoint")
        if tuple(meta["tags"]) != BIO_TAGS:
            raise ValueError(f"{path}: checkpoint tag order {meta['tags']} != {list(BIO_TAGS)}")
        cfg_dict = dict(meta["config"])
        config = DnerConfig(**cfg_dict)
        model = cls(
            config=config,
            vocab=Vocabulary.from_dict(meta["vocab"]),
            word_emb=tensors["dner.word_emb"],
            lstm={k[len("dner.lstm."):]: v for k, v in tensors.items() if k.startswith("dner.lstm.")},
            head_w=tensors["dner.head.W"],
            head_b=tensors["dner.head.b"],
            char_params={k[len("dner.char."):]: v for k, v in tensors.items()
                         if k.startswith("dner.char.")} or None,
            transitions=tensors.get("dner.crf.transitions"),
        )
        model._expected_graph_dim = int(meta.get("graph_dim", 0))  # type: ignore[attr-defined]
        return model


def init_dner_model(vocab: Vocabulary, config: DnerConfig, seed: int = 0,
                    graph: Optional[KnowledgeGraph] = None,
                    graph_emb: Optional[NodeEmbeddings] = None) -> DnerModel:
    rng = Rng(seed).split("dner-init")
    word_emb = seqmodels.xavier_uniform((vocab.n_words, config.word_dim), rng.split("emb"))
    char_params = None
    if config.char_variant == "cnn":
        char_params = seqmodels.init_char_cnn_params(vocab.n_chars, config.char_dim, rng.split("char"))
    elif config.char_variant == "lstm":
        char_params = seqmodels.init_char_lstm_params(vocab.n_chars, config.char_dim, rng.split("char"))

    graph_dim = 0
    if config.use_graph:
        if graph_emb is None:
            raise ValueError("use_graph requires trained graph embeddings")
        graph_dim = graph_emb.dim

    feat_dim = config.word_dim + config.char_out_dim() + graph_dim
    lstm: Params = {}
    for k, v in seqmodels.init_lstm_params(feat_dim, config.hidden, rng.split("fwd")).items():
        lstm[f"fwd.{k}"] = v
    for k, v in seqmodels.init_lstm_params(feat_dim, config.hidden, rng.split("bwd")).items():
        lstm[f"bwd.{k}"] = v
    head_w = seqmodels.xavier_uniform((NUM_TAGS, 2 * config.hidden), rng.split("head"))
    head_b = np.zeros(NUM_TAGS)
    transitions = None
    if config.head == "crf":
        transitions = crf.make_transitions(NUM_TAGS)
        if config.hard_bio:
            transitions = crf.apply_bio_constraint(transitions)
    model = DnerModel(config=config, vocab=vocab, word_emb=word_emb, lstm=lstm,
                      head_w=head_w, head_b=head_b, char_params=char_params,
                      transitions=transitions)
    if config.use_graph:
        model.graph = graph
        model.graph_emb = graph_emb
    return model


# ---------------------------------------------------------------------------
# Features and emissions
# ---------------------------------------------------------------------------

def assemble_features(model: DnerModel, tokens: Sequence[str]) -> Tuple[np.ndarray, list]:
    """Per-token feature vectors: word embedding, then the char-encoder output
    when enabled, then the graph vector (zeros when the surface is unknown)."""
    ids = [model.vocab.word_id(t) for t in tokens]
    parts = [model.word_emb[np.asarray(ids, dtype=np.int64)]]
    char_caches: list = []
    if model.char_params is not None:
        vecs = []
        for tok in tokens:
            cids = model.vocab.char_ids(tok)
            if model.config.char_variant == "cnn":
                vec, cache = seqmodels.char_cnn_forward(cids, model.char_params)
            else:
                vec, cache = seqmodels.char_lstm_forward(cids, model.char_params)
            vecs.append(vec)
            char_caches.append(cache)
        parts.append(np.vstack(vecs))
    if model.config.use_graph and model.graph is not None and model.graph_emb is not None:
        gdim = model.graph_emb.dim
        gvecs = np.zeros((len(tokens), gdim))
        for t, tok in enumerate(tokens):
            hit = lookup_embedding(model.graph, model.graph_emb, tok)
            if hit is not None:
                gvecs[t] = hit
        parts.append(gvecs)
    feats = np.hstack(parts)
    return feats, char_caches


def _emissions_forward(model: DnerModel, tokens: Sequence[str],
                       drop_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, dict]:
    feats, char_caches = assemble_features(model, tokens)
    if drop_mask is not None:
        feats = feats * drop_mask
    fwd = {k[4:]: v for k, v in model.lstm.items() if k.startswith("fwd.")}
    bwd = {k[4:]: v for k, v in model.lstm.items() if k.startswith("bwd.")}
    encoded, bicache = seqmodels.bilstm_forward(feats, fwd, bwd)
    emissions = encoded @ model.head_w.T + model.head_b
    cache = {
        "ids": np.asarray([model.vocab.word_id(t) for t in tokens], dtype=np.int64),
        "char_caches": char_caches, "encoded": encoded, "bicache": bicache,
        "fwd": fwd, "bwd": bwd, "drop_mask": drop_mask,
    }
    return emissions, cache


def _emissions_backward(model: DnerModel, d_em: np.ndarray, cache: dict, grads: Params) -> None:
    grads["head.W"] += d_em.T @ cache["encoded"]
    grads["head.b"] += d_em.sum(axis=0)
    d_encoded = d_em @ model.head_w
    dfeats, gf, gb = seqmodels.bilstm_backward(d_encoded, cache["bicache"], cache["fwd"], cache["bwd"])
    for k, v in gf.items():
        grads[f"lstm.fwd.{k}"] += v
    for k, v in gb.items():
        grads[f"lstm.bwd.{k}"] += v
    if cache["drop_mask"] is not None:
        dfeats = dfeats * cache["drop_mask"]
    word_dim = model.config.word_dim
    np.add.at(grads["word_emb"], cache["ids"], dfeats[:, :word_dim])
    if model.char_params is not None:
        char_dim = model.config.char_out_dim()
        dchar = dfeats[:, word_dim : word_dim + char_dim]
        for t, ccache in enumerate(cache["char_caches"]):
            if model.config.char_variant == "cnn":
                g = seqmodels.char_cnn_backward(dchar[t], ccache, model.char_params)
            else:
                g = seqmodels.char_lstm_backward(dchar[t], ccache, model.char_params)
            for k, v in g.items():
                grads[f"char.{k}"] += v
    # graph features are frozen inputs: no gradient flows into the node table


def sentence_loss_and_grads(model: DnerModel, tokens: Sequence[str], tag_ids: Sequence[int],
                            grads: Params, drop_mask: Optional[np.ndarray] = None) -> float:
    """Accumulate gradients for one sentence into `grads`; returns the loss
    (CRF negative log-likelihood or summed token cross-entropy)."""
    emissions, cache = _emissions_forward(model, tokens, drop_mask)
    if model.config.head == "crf":
        nll, d_em, d_tr = crf.crf_nll_and_grad(emissions, list(tag_ids), model.transitions)
        grads["crf.transitions"] += d_tr
        loss = nll
    else:
        loss = 0.0
        d_em = np.empty_like(emissions)
        for t, target in enumerate(tag_ids):
            l, d = softmax_cross_entropy(emissions[t], int(target))
            loss += l
            d_em[t] = d
    _emissions_backward(model, d_em, cache, grads)
    return float(loss)


def tag_sentence(model: DnerModel, tokens: Sequence[str]) -> List[str]:
    """BIO tags for one sentence: Viterbi under the CRF head, per-token argmax
    under the softmax head (ties to the lowest tag index)."""
    if not tokens:
        raise ValueError("cannot tag an empty sentence")
    emissions, _ = _emissions_forward(model, tokens)
    if model.config.head == "crf":
        trans = model.transitions
        if model.config.hard_bio:
            trans = crf.apply_bio_constraint(trans)
        path, _ = crf.viterbi_decode(emissions, trans)
    else:
        path = [int(np.argmax(row)) for row in emissions]
    return [BIO_TAGS[i] for i in path]


# ---------------------------------------------------------------------------
# Span codec
# ---------------------------------------------------------------------------

def decode_spans(tokens: Sequence[str], tags: Sequence[str], sentence_index: int = 0,
                 pico_probs: Optional[np.ndarray] = None) -> List[EntitySpan]:
    """Maximal B-initiated runs become spans. An I with no live span starts a
    new one (repair-to-B), which favors recall over dropping the tokens."""
    if len(tokens) != len(tags):
        raise ValueError(f"tokens ({len(tokens)}) and tags ({len(tags)}) differ in length")
    spans: List[EntitySpan] = []
    start: Optional[int] = None

    def close(end: int) -> None:
        nonlocal start
        if start is not None:
            spans.append(EntitySpan(
                sentence_index=sentence_index, start=start, end=end,
                surface=" ".join(tokens[start:end]),
                pico_probs=None if pico_probs is None else np.array(pico_probs),
            ))
            start = None

    for t, tag in enumerate(tags):
        if tag == "B":
            close(t)
            start = t
        elif tag == "I":
            if start is None:
                start = t  # repair: treat stray I as a new beginning
        elif tag == "O":
            close(t)
        else:
            raise ValueError(f"unknown tag {tag!r}")
    close(len(tags))
    return spans


def encode_tags(spans: Sequence[EntitySpan], length: int) -> List[str]:
    """Inverse of decode_spans for non-overlapping spans."""
    tags = ["O"] * length
    for span in sorted(spans, key=lambda s: s.start):
        if not 0 <= span.start < span.end <= length:
            raise ValueError(f"span ({span.start}, {span.end}) out of range for length {length}")
        if any(t != "O" for t in tags[span.start : span.end]):
            raise ValueError("overlapping spans cannot be encoded")
        tags[span.start] = "B"
        for i in range(span.start + 1, span.end):
            tags[i] = "I"
    return tags


# ---------------------------------------------------------------------------
# Training and document-level extraction
# ---------------------------------------------------------------------------

def evaluate_dner(model: DnerModel, corpus: BioCorpus) -> dict:
    """Entity-level exact-match P/R/F1 (primary) plus token accuracy."""
    counts = evalmetrics.Counts()
    tok_correct = 0
    tok_total = 0
    for idx, (tokens, gold_tags) in enumerate(corpus.sentences):
        pred_tags = tag_sentence(model, tokens)
        counts = counts + evalmetrics.entity_counts(
            decode_spans(tokens, gold_tags, idx), decode_spans(tokens, pred_tags, idx)
        )
        tok_correct += sum(g == p for g, p in zip(gold_tags, pred_tags))
        tok_total += len(gold_tags)
    p, r, f1 = evalmetrics.prf(counts)
    return {"precision": p, "recall": r, "f1": f1,
            "token_accuracy": tok_correct / tok_total if tok_total else 0.0,
            "counts": counts}


def train_dner(
    train: BioCorpus,
    valid: Optional[BioCorpus] = None,
    config: Optional[DnerConfig] = None,
    seed: int = 0,
    vocab: Optional[Vocabulary] = None,
    graph: Optional[KnowledgeGraph] = None,
    graph_emb: Optional[NodeEmbeddings] = None,
) -> Tuple[DnerModel, List[dict]]:
    """Mini-batch Adam over per-sentence losses; tracks entity-level F1 on the
    validation corpus per epoch and keeps the best parameters."""
    config = config or DnerConfig()
    if not train.sentences:
        raise ValueError("empty training corpus")
    if vocab is None:
        vocab = build_vocabulary(train.all_tokens(), min_count=config.min_count)
    model = init_dner_model(vocab, config, seed=seed, graph=graph, graph_emb=graph_emb)
    rng = Rng(seed).split("dner-train")
    params = {k: v.copy() for k, v in model.all_params().items()}
    state = OptimizerState(lr=config.lr)
    history: List[dict] = []
    best_f1 = -1.0
    best_params = None
    bad_epochs = 0

    encoded = [(tokens, [TAG_INDEX[t] for t in tags]) for tokens, tags in train.sentences]

    for epoch in range(config.epochs):
        order = list(range(len(encoded)))
        rng.split(f"shuffle-{epoch}").shuffle(order)
        epoch_loss = 0.0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start : batch_start + config.batch_size]
            model.set_params(params)
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            for idx in batch:
                tokens, tag_ids = encoded[idx]
                mask = None
                if config.dropout > 0:
                    keep = rng.split(f"drop-{epoch}-{idx}").random(
                        (len(tokens), model.feature_dim)) >= config.dropout
                    mask = keep / (1.0 - config.dropout)
                epoch_loss += sentence_loss_and_grads(model, tokens, tag_ids, grads, mask)
            scale = 1.0 / len(batch)
            grads = {k: v * scale for k, v in grads.items()}
            params, state = adam_step(params, grads, state)
        model.set_params(params)
        entry = {"epoch": epoch, "train_loss": epoch_loss / len(encoded)}
        if valid is not None and valid.sentences:
            metrics = evaluate_dner(model, valid)
            entry.update({"valid_f1": metrics["f1"],
                          "valid_token_accuracy": metrics["token_accuracy"]})
            if metrics["f1"] > best_f1:
                best_f1 = metrics["f1"]
                best_params = {k: v.copy() for k, v in params.items()}
                bad_epochs = 0
            else:
                bad_epochs += 1
                if config.patience and bad_epochs >= config.patience:
                    history.append(entry)
                    break
        history.append(entry)

    if best_params is not None:
        model.set_params(best_params)
    else:
        model.set_params(params)
    return model, history


DEFAULT_SCOPE = frozenset({"P", "O"})


def extract_from_document(doc: Document, model: DnerModel,
                          scope: frozenset = DEFAULT_SCOPE) -> List[EntitySpan]:
    """Tag and decode the sentences whose class label is in `scope`; each span
    copies its host sentence's class probabilities."""
    spans: List[EntitySpan] = []
    for sent in doc.sentences:
        if sent.pico_label not in scope:
            continue
        tokens = sent.token_texts
        if not tokens:
            continue
        tags = tag_sentence(model, tokens)
        spans.extend(decode_spans(tokens, tags, sent.index, pico_probs=sent.pico_probs))
    return spans


def format_predictions(doc_id: str, spans: Sequence[EntitySpan]) -> str:
    """Prediction dump: one `doc_id<TAB>sentence_idx<TAB>start<TAB>end<TAB>surface`
    line per entity."""
    return "".join(
        f"{doc_id}\t{s.sentence_index}\t{s.start}\t{s.end}\t{s.surface}\n" for s in spans
    )


def parse_predictions(text: str) -> List[Tuple[str, EntitySpan]]:
    out: List[Tuple[str, EntitySpan]] = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 tab-separated fields")
        doc_id, si, start, end, surface = parts
        out.append((doc_id, EntitySpan(int(si), int(start), int(end), surface)))
    return out
