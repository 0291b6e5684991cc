"""Stage one of the pipeline: classify every sentence of a document into
P, IC, O or N, keeping the full probability vector (the "soft" label) for the
downstream entity mapping.

Two interchangeable sentence encoders exist: a multi-width convolutional
classifier and a bidirectional LSTM whose final states feed an affine head.
"""

from __future__ import annotations

import copy
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import checkpoint, evalmetrics, seqmodels
from .corpus import PICO_CLASSES, Document, Vocabulary, tokenize
from .numerics import OptimizerState, Params, adam_step, softmax, softmax_cross_entropy
from .rng import Rng

CLASS_INDEX = {c: i for i, c in enumerate(PICO_CLASSES)}


@dataclass
class PicoDataset:
    items: List[Tuple[List[str], str]]
    split: str = "train"

    def histogram(self) -> Dict[str, int]:
        counts = Counter(label for _, label in self.items)
        return {c: counts.get(c, 0) for c in PICO_CLASSES}


def load_pico_dataset(path: str, split: str = "train") -> PicoDataset:
    """Parse `LABEL<TAB>sentence text` lines; unknown labels are reported with
    their line number."""
    items: List[Tuple[List[str], str]] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip():
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected `LABEL<TAB>text`")
            label, text = parts
            if label not in PICO_CLASSES:
                raise ValueError(f"{path}:{lineno}: unknown label {label!r}")
            tokens = tokenize(text)
            if not tokens:
                raise ValueError(f"{path}:{lineno}: empty sentence")
            items.append((tokens, label))
    if not items:
        raise ValueError(f"{path}: empty dataset")
    return PicoDataset(items=items, split=split)


def stratified_split(dataset: PicoDataset, ratio: float = 0.7, seed: int = 0) -> Tuple[PicoDataset, PicoDataset]:
    """Seeded per-class split so small corpora keep all classes in both parts."""
    rng = Rng(seed).split("pico-split")
    by_class: Dict[str, List[Tuple[List[str], str]]] = {c: [] for c in PICO_CLASSES}
    for item in dataset.items:
        by_class[item[1]].append(item)
    train: List[Tuple[List[str], str]] = []
    valid: List[Tuple[List[str], str]] = []
    for cls in PICO_CLASSES:
        items = by_class[cls]
        order = rng.permutation(len(items))
        cut = int(round(len(items) * ratio))
        train.extend(items[i] for i in order[:cut])
        valid.extend(items[i] for i in order[cut:])
    return PicoDataset(train, "train"), PicoDataset(valid, "valid")


@dataclass
class PicoTrainConfig:
    epochs: int = 50
    lr: float = 1e-3
    batch_size: int = 32
    shuffle: bool = True
    dropout: float = 0.0
    patience: int = 0            # 0 disables early stopping
    word_dim: int = 100
    hidden: int = 100
    min_count: int = 1
    class_weights: Optional[Dict[str, float]] = None


@dataclass
class PicoModel:
    variant: str                 # "cnn" | "bilstm"
    vocab: Vocabulary
    word_emb: np.ndarray
    head: Params
    hidden: int = 100

    @property
    def word_dim(self) -> int:
        return int(self.word_emb.shape[1])

    def all_params(self) -> Params:
        out: Params = {"word_emb": self.word_emb}
        for k, v in self.head.items():
            out[f"head.{k}"] = v
        return out

    def set_params(self, params: Params) -> None:
        self.word_emb = params["word_emb"]
        self.head = {k[len("head."):]: v for k, v in params.items() if k.startswith("head.")}

    def save(self, path: str) -> None:
        tensors = {"pico.word_emb": self.word_emb}
        for k, v in self.head.items():
            tensors[f"pico.{self.variant}.{k}"] = v
        checkpoint.save_checkpoint(path, tensors, meta={
            "kind": "pico",
            "variant": self.variant,
            "classes": list(PICO_CLASSES),
            "hidden": self.hidden,
            "vocab": self.vocab.to_dict(),
        })

    @classmethod
    def load(cls, path: str) -> "PicoModel":
        tensors, meta = checkpoint.load_checkpoint(path)
        if meta.get("kind") != "pico":
            raise ValueError(f"{path}: not a sentence-classifier checkpoint")
        if tuple(meta["classes"]) != PICO_CLASSES:
            raise ValueError(
                f"{path}: checkpoint class order {meta['classes']} != {list(PICO_CLASSES)}"
            )
        variant = meta["variant"]
        prefix = f"pico.{variant}."
        head = {k[len(prefix):]: v for k, v in tensors.items() if k.startswith(prefix)}
        return cls(
            variant=variant,
            vocab=Vocabulary.from_dict(meta["vocab"]),
            word_emb=tensors["pico.word_emb"],
            head=head,
            hidden=int(meta.get("hidden", 100)),
        )


def init_pico_model(
    vocab: Vocabulary, variant: str = "bilstm", word_dim: int = 100, hidden: int = 100,
    seed: int = 0,
) -> PicoModel:
    rng = Rng(seed).split("pico-init")
    word_emb = seqmodels.xavier_uniform((vocab.n_words, word_dim), rng.split("emb"))
    if variant == "cnn":
        head = seqmodels.init_sentence_cnn_params(word_dim, rng.split("cnn"))
    elif variant == "bilstm":
        head: Params = {}
        for k, v in seqmodels.init_lstm_params(word_dim, hidden, rng.split("fwd")).items():
            head[f"fwd.{k}"] = v
        for k, v in seqmodels.init_lstm_params(word_dim, hidden, rng.split("bwd")).items():
            head[f"bwd.{k}"] = v
        head["W_out"] = seqmodels.xavier_uniform((len(PICO_CLASSES), 2 * hidden), rng.split("out"))
        head["b_out"] = np.zeros(len(PICO_CLASSES))
    else:
        raise ValueError(f"unknown classifier variant {variant!r}")
    return PicoModel(variant=variant, vocab=vocab, word_emb=word_emb, head=head, hidden=hidden)


def _sentence_forward(model: PicoModel, word_ids: Sequence[int],
                      drop_mask: Optional[np.ndarray] = None) -> Tuple[np.ndarray, dict]:
    vecs = model.word_emb[np.asarray(word_ids, dtype=np.int64)]
    if drop_mask is not None:
        vecs = vecs * drop_mask
    if model.variant == "cnn":
        logits, cache = seqmodels.sentence_cnn_forward(vecs, model.head)
    else:
        fwd = {k[4:]: v for k, v in model.head.items() if k.startswith("fwd.")}
        bwd = {k[4:]: v for k, v in model.head.items() if k.startswith("bwd.")}
        summary, bicache = seqmodels.bilstm_final_forward(vecs, fwd, bwd)
        logits = model.head["W_out"] @ summary + model.head["b_out"]
        cache = {"bicache": bicache, "summary": summary, "fwd": fwd, "bwd": bwd}
    cache["word_ids"] = np.asarray(word_ids, dtype=np.int64)
    cache["drop_mask"] = drop_mask
    return logits, cache


def _sentence_backward(model: PicoModel, dlogits: np.ndarray, cache: dict, grads: Params) -> None:
    if model.variant == "cnn":
        head_view = {k[len("head."):]: v for k, v in grads.items() if k.startswith("head.")}
        dvecs, head_grads = seqmodels.sentence_cnn_backward(dlogits, cache, model.head)
        for k, v in head_grads.items():
            head_view[k] += v
    else:
        summary = cache["summary"]
        grads["head.W_out"] += np.outer(dlogits, summary)
        grads["head.b_out"] += dlogits
        dsummary = model.head["W_out"].T @ dlogits
        dvecs, gf, gb = seqmodels.bilstm_final_backward(dsummary, cache["bicache"],
                                                        cache["fwd"], cache["bwd"])
        for k, v in gf.items():
            grads[f"head.fwd.{k}"] += v
        for k, v in gb.items():
            grads[f"head.bwd.{k}"] += v
    if cache["drop_mask"] is not None:
        dvecs = dvecs * cache["drop_mask"]
    np.add.at(grads["word_emb"], cache["word_ids"], dvecs)


def classify_sentence(model: PicoModel, tokens: Sequence[str]) -> np.ndarray:
    """Probability vector over (P, IC, O, N) for one tokenized sentence."""
    ids = [model.vocab.word_id(t) for t in tokens]
    logits, _ = _sentence_forward(model, ids)
    return softmax(logits)


def classify_document(model: PicoModel, doc: Document) -> Document:
    """Fill pico_probs and pico_label on every sentence, in place.

    Classification is per sentence, so results are independent of document
    composition. Ties in the argmax go to the earlier class in (P, IC, O, N).
    """
    if not doc.sentences:
        raise ValueError(f"document {doc.id!r} has no sentences")
    for sent in doc.sentences:
        probs = classify_sentence(model, sent.token_texts)
        sent.pico_probs = probs
        sent.pico_label = PICO_CLASSES[int(np.argmax(probs))]
    return doc


def evaluate_pico(model: PicoModel, dataset: PicoDataset) -> dict:
    gold = [label for _, label in dataset.items]
    pred = [PICO_CLASSES[int(np.argmax(classify_sentence(model, toks)))]
            for toks, _ in dataset.items]
    per_class = {c: evalmetrics.sentence_counts(gold, pred, c) for c in PICO_CLASSES}
    f1s = [evalmetrics.prf(per_class[c])[2] for c in PICO_CLASSES]
    accuracy = sum(g == p for g, p in zip(gold, pred)) / len(gold)
    return {"per_class": per_class, "macro_f1": float(np.mean(f1s)), "accuracy": accuracy}


def train_pico(
    model: PicoModel,
    train: PicoDataset,
    valid: Optional[PicoDataset] = None,
    config: Optional[PicoTrainConfig] = None,
    seed: int = 0,
) -> Tuple[PicoModel, List[dict]]:
    """Minimize cross-entropy with Adam; track per-class metrics on the
    validation split each epoch and keep the best macro-F1 parameters."""
    config = config or PicoTrainConfig()
    rng = Rng(seed).split("pico-train")
    params = {k: v.copy() for k, v in model.all_params().items()}
    state = OptimizerState(lr=config.lr)
    best_f1 = -1.0
    best_params = None
    bad_epochs = 0
    history: List[dict] = []

    encoded = [([model.vocab.word_id(t) for t in toks], CLASS_INDEX[label], label)
               for toks, label in train.items]

    for epoch in range(config.epochs):
        order = list(range(len(encoded)))
        if config.shuffle:
            rng.split(f"shuffle-{epoch}").shuffle(order)
        epoch_loss = 0.0
        correct = 0
        for batch_start in range(0, len(order), config.batch_size):
            batch = order[batch_start : batch_start + config.batch_size]
            grads = {k: np.zeros_like(v) for k, v in params.items()}
            model.set_params(params)
            batch_loss = 0.0
            for idx in batch:
                ids, target, label = encoded[idx]
                mask = None
                if config.dropout > 0:
                    keep = rng.split(f"drop-{epoch}-{idx}").random((len(ids), model.word_dim)) >= config.dropout
                    mask = keep / (1.0 - config.dropout)
                logits, cache = _sentence_forward(model, ids, mask)
                loss, dlogits = softmax_cross_entropy(logits, target)
                weight = (config.class_weights or {}).get(label, 1.0)
                batch_loss += weight * loss
                if int(np.argmax(logits)) == target:
                    correct += 1
                _sentence_backward(model, weight * dlogits, cache, grads)
            scale = 1.0 / len(batch)
            grads = {k: v * scale for k, v in grads.items()}
            params, state = adam_step(params, grads, state)
            epoch_loss += batch_loss
        model.set_params(params)
        entry = {
            "epoch": epoch,
            "train_loss": epoch_loss / len(encoded),
            "train_accuracy": correct / len(encoded),
        }
        if valid is not None and valid.items:
            metrics = evaluate_pico(model, valid)
            entry["valid_macro_f1"] = metrics["macro_f1"]
            entry["valid_accuracy"] = metrics["accuracy"]
            if metrics["macro_f1"] > best_f1:
                best_f1 = metrics["macro_f1"]
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
