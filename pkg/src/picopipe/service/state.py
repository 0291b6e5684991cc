"""Durable service state.

Everything lives in one directory: document store (`docs/`), immutable base
analyses (`base/`), current corrected views (`views/`), the append-only
correction log (`corrections.log`), the rule store (`rules.json`), the model
registry (`registry.json`) and retrained checkpoints (`checkpoints/`).

Views are pure folds of corrections over base analyses: replaying the log
against the bases reproduces the stored view files byte for byte (the JSON
writer is canonical).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .. import dner, fixtures, kgraph, mapping, pico
from ..corpus import BioCorpus, make_document
from ..rng import Rng

VALID_KINDS = ("relabel_sentence", "delete_entity", "relabel_entity", "add_entity")
PICO_KINDS = ("relabel_sentence",)
DNER_KINDS = ("delete_entity", "relabel_entity", "add_entity")


class CorrectionError(ValueError):
    """Raised when a correction payload references nothing valid."""


@dataclass
class ServiceConfig:
    data_dir: str
    pico_checkpoint: str = ""
    dner_checkpoint: str = ""
    graph_path: Optional[str] = None
    graph_embeddings: Optional[str] = None
    port: int = 8321
    retrain_threshold: int = 20
    lam: float = 0.5
    seed: int = 0
    retrain_epochs: int = 30
    retrain_delay: float = 0.0   # test hook: keeps a retrain job running this long
    auto_rules: bool = False     # compile surface-exact rules from entity relabels
    seed_builtin_rules: bool = True
    pico_base_corpus: Optional[str] = None
    dner_base_corpus: Optional[str] = None


_ENV_KEYS = {
    "PICOPIPE_DATA_DIR": ("data_dir", str),
    "PICOPIPE_PICO": ("pico_checkpoint", str),
    "PICOPIPE_DNER": ("dner_checkpoint", str),
    "PICOPIPE_GRAPH": ("graph_path", str),
    "PICOPIPE_GRAPH_EMB": ("graph_embeddings", str),
    "PICOPIPE_PORT": ("port", int),
    "PICOPIPE_RETRAIN_THRESHOLD": ("retrain_threshold", int),
    "PICOPIPE_LAMBDA": ("lam", float),
    "PICOPIPE_SEED": ("seed", int),
}


def load_config(path: Optional[str] = None, env: Optional[dict] = None) -> ServiceConfig:
    """Config from a JSON file, overridden by PICOPIPE_* environment keys."""
    values: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            values.update(json.load(fh))
    env = env if env is not None else dict(os.environ)
    for key, (name, cast) in _ENV_KEYS.items():
        if key in env:
            values[name] = cast(env[key])
    if "data_dir" not in values:
        raise ValueError("service config requires data_dir")
    return ServiceConfig(**values)


def canonical_json_bytes(obj) -> bytes:
    return (json.dumps(obj, sort_keys=True, ensure_ascii=False, separators=(",", ":")) + "\n").encode("utf-8")


def _write_atomic(path: str, payload: bytes) -> None:
    tmp = path + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(payload)
    os.replace(tmp, path)


def _file_version(path: str) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            digest.update(chunk)
    return digest.hexdigest()[:12]


def _entity_id(sentence_index: int, start: int, end: int) -> str:
    return f"s{sentence_index}:{start}-{end}"


# ---------------------------------------------------------------------------
# Correction application (pure)
# ---------------------------------------------------------------------------

def _entity_lists(view: dict) -> Tuple[List[dict], List[dict]]:
    return view["entities_p"], view["entities_o"]


def _find_entity(view: dict, entity_id: str) -> Tuple[List[dict], int]:
    for lst in _entity_lists(view):
        for i, ent in enumerate(lst):
            if ent["id"] == entity_id:
                return lst, i
    raise CorrectionError(f"unknown entity {entity_id!r}")


def _sort_entities(view: dict) -> None:
    for lst in _entity_lists(view):
        lst.sort(key=lambda e: (e["sentence_index"], e["start"], e["end"]))


def apply_correction(view: dict, record: dict) -> dict:
    """Apply one correction record to a view, returning a new view dict."""
    view = json.loads(json.dumps(view))  # deep, JSON-faithful copy
    kind = record["kind"]
    payload = record.get("payload", {})
    if kind == "delete_entity":
        lst, i = _find_entity(view, payload.get("entity_id", ""))
        del lst[i]
    elif kind == "relabel_entity":
        new_label = payload.get("new_label")
        if new_label not in ("P", "O"):
            raise CorrectionError(f"entity label must be P or O, got {new_label!r}")
        lst, i = _find_entity(view, payload.get("entity_id", ""))
        ent = lst.pop(i)
        ent["label"] = new_label
        ent["corrected"] = True
        target = view["entities_p"] if new_label == "P" else view["entities_o"]
        target.append(ent)
    elif kind == "relabel_sentence":
        new_label = payload.get("new_label")
        if new_label not in ("P", "IC", "O", "N"):
            raise CorrectionError(f"sentence label must be one of P/IC/O/N, got {new_label!r}")
        idx = payload.get("sentence_index")
        sentences = view["sentences"]
        if not isinstance(idx, int) or not 0 <= idx < len(sentences):
            raise CorrectionError(f"sentence index {idx!r} out of range")
        sentences[idx]["pico_label"] = new_label
        sentences[idx]["corrected"] = True
        for lst in _entity_lists(view):
            for ent in lst:
                if ent["sentence_index"] == idx:
                    ent["stale"] = True  # fused scores used the old sentence label
    elif kind == "add_entity":
        idx = payload.get("sentence_index")
        start, end = payload.get("start"), payload.get("end")
        label = payload.get("label")
        if label not in ("P", "O"):
            raise CorrectionError(f"entity label must be P or O, got {label!r}")
        sentences = view["sentences"]
        if not isinstance(idx, int) or not 0 <= idx < len(sentences):
            raise CorrectionError(f"sentence index {idx!r} out of range")
        tokens = sentences[idx]["tokens"]
        if not (isinstance(start, int) and isinstance(end, int) and 0 <= start < end <= len(tokens)):
            raise CorrectionError(f"span ({start!r}, {end!r}) invalid for {len(tokens)} tokens")
        entity_id = _entity_id(idx, start, end)
        for lst in _entity_lists(view):
            for ent in lst:
                if ent["id"] == entity_id:
                    raise CorrectionError(f"entity {entity_id} already exists")
                if ent["sentence_index"] == idx and not (end <= ent["start"] or ent["end"] <= start):
                    raise CorrectionError(f"span overlaps existing entity {ent['id']}")
        target = view["entities_p"] if label == "P" else view["entities_o"]
        target.append({
            "id": entity_id, "sentence_index": idx, "start": start, "end": end,
            "surface": " ".join(tokens[start:end]), "label": label,
            "s1": None, "s2": None, "rule_vec": None, "rule_id": None,
            "score_p": None, "score_o": None, "stale": False, "corrected": True,
        })
    else:
        raise CorrectionError(f"unknown correction kind {kind!r}")
    _sort_entities(view)
    return view


def replay_views(data_dir: str) -> Dict[str, bytes]:
    """Rebuild every view from its base analysis plus the correction log.

    Returns doc_id -> canonical view bytes; comparing against the stored
    `views/*.json` files verifies the append-only log is the full history.
    """
    base_dir = os.path.join(data_dir, "base")
    views: Dict[str, dict] = {}
    for name in sorted(os.listdir(base_dir)):
        if name.endswith(".json"):
            with open(os.path.join(base_dir, name), encoding="utf-8") as fh:
                view = json.load(fh)
            views[view["doc_id"]] = view
    log_path = os.path.join(data_dir, "corrections.log")
    if os.path.exists(log_path):
        with open(log_path, encoding="utf-8") as fh:
            for line in fh:
                if not line.strip():
                    continue
                record = json.loads(line)
                doc_id = record["doc_id"]
                if doc_id in views:
                    views[doc_id] = apply_correction(views[doc_id], record)
    return {doc_id: canonical_json_bytes(view) for doc_id, view in views.items()}


# ---------------------------------------------------------------------------
# Live state
# ---------------------------------------------------------------------------

class ServiceState:
    def __init__(self, config: ServiceConfig):
        self.config = config
        self.data_dir = config.data_dir
        for sub in ("docs", "base", "views", "checkpoints"):
            os.makedirs(os.path.join(self.data_dir, sub), exist_ok=True)
        self._lock = threading.RLock()
        self._log_lock = threading.Lock()
        self._jobs: Dict[str, dict] = {}
        self._retraining: set = set()
        self._job_counter = 0
        self._models: Dict[str, Optional[Tuple[str, object]]] = {"pico": None, "dner": None, "graph": None}
        self._load_registry()
        self._load_rules()
        self._doc_counter = self._max_doc_number()
        self._correction_counter = self._count_corrections()

    # -- registry / models ---------------------------------------------------

    def _registry_path(self) -> str:
        return os.path.join(self.data_dir, "registry.json")

    def _load_registry(self) -> None:
        path = self._registry_path()
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                registry = json.load(fh)
        else:
            registry = {}
            if self.config.pico_checkpoint:
                registry["pico"] = {"path": self.config.pico_checkpoint}
            if self.config.dner_checkpoint:
                registry["dner"] = {"path": self.config.dner_checkpoint}
            if self.config.graph_embeddings:
                registry["graph"] = {"path": self.config.graph_embeddings}
        self._registry = registry
        self._activate_from_registry()
        self._save_registry()

    def _save_registry(self) -> None:
        _write_atomic(self._registry_path(), canonical_json_bytes(self._registry))

    def _activate_from_registry(self) -> None:
        graph = None
        if self.config.graph_path and os.path.exists(self.config.graph_path):
            graph = kgraph.load_graph(self.config.graph_path)
        for slot, entry in self._registry.items():
            path = entry.get("path", "")
            if not path or not os.path.exists(path):
                self._models[slot] = None
                continue
            version = entry.get("version") or _file_version(path)
            entry["version"] = version
            if slot == "pico":
                self._models["pico"] = (version, pico.PicoModel.load(path))
            elif slot == "dner":
                model = dner.DnerModel.load(path)
                self._models["dner"] = (version, model)
            elif slot == "graph":
                emb = kgraph.load_embeddings(path)
                self._models["graph"] = (version, (graph, emb))
        # attach graph features to the tagger when both sides are present
        if self._models.get("dner") and self._models.get("graph"):
            _, model = self._models["dner"]
            gversion, (g, emb) = self._models["graph"]
            if model.config.use_graph and g is not None:
                model.attach_graph(g, emb)

    def model_snapshot(self) -> dict:
        """Immutable view of the active models and rules for one request."""
        with self._lock:
            return {
                "pico": self._models["pico"],
                "dner": self._models["dner"],
                "graph": self._models["graph"],
                "rules": self._rules,
            }

    def versions(self) -> dict:
        with self._lock:
            return {slot: (entry[0] if entry else None) for slot, entry in self._models.items()}

    # -- rules ----------------------------------------------------------------

    def _rules_path(self) -> str:
        return os.path.join(self.data_dir, "rules.json")

    def _load_rules(self) -> None:
        path = self._rules_path()
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                raw = json.load(fh)
            self._rules = tuple(
                mapping.LinguisticRule(id=r["id"], target=r["target"], pattern=r["pattern"],
                                       enabled=r.get("enabled", True), origin=r.get("origin", "user"))
                for r in raw
            )
        else:
            self._rules = tuple(mapping.builtin_rules()) if self.config.seed_builtin_rules else ()
            self._save_rules()

    def _save_rules(self) -> None:
        raw = [{"id": r.id, "target": r.target, "pattern": r.pattern,
                "enabled": r.enabled, "origin": r.origin} for r in self._rules]
        _write_atomic(self._rules_path(), canonical_json_bytes(raw))

    def list_rules(self) -> List[dict]:
        with self._lock:
            return [{"id": r.id, "target": r.target, "pattern": r.pattern,
                     "enabled": r.enabled, "origin": r.origin} for r in self._rules]

    def add_rule(self, target: str, pattern: str, origin: str = "user") -> dict:
        rule = mapping.LinguisticRule(id="", target=target, pattern=pattern, origin=origin)
        with self._lock:
            if any(r.pattern == pattern for r in self._rules):
                raise FileExistsError(f"rule pattern already registered: {pattern!r}")
            n = sum(1 for r in self._rules if r.origin == origin)
            rule.id = {"user": "u", "auto": "a", "builtin": "b"}[origin] + f"{n + 1:02d}"
            self._rules = self._rules + (rule,)  # copy-on-write snapshot swap
            self._save_rules()
        return {"id": rule.id, "target": rule.target, "pattern": rule.pattern,
                "enabled": rule.enabled, "origin": rule.origin}

    def delete_rule(self, rule_id: str) -> None:
        with self._lock:
            kept = tuple(r for r in self._rules if r.id != rule_id)
            if len(kept) == len(self._rules):
                raise KeyError(rule_id)
            self._rules = kept
            self._save_rules()

    # -- documents and analyses ------------------------------------------------

    def _max_doc_number(self) -> int:
        best = 0
        for name in os.listdir(os.path.join(self.data_dir, "docs")):
            if name.startswith("p") and name.endswith(".json"):
                try:
                    best = max(best, int(name[1:-5]))
                except ValueError:
                    continue
        return best

    def new_doc_id(self) -> str:
        with self._lock:
            self._doc_counter += 1
            return f"p{self._doc_counter:04d}"

    def models_ready(self) -> bool:
        with self._lock:
            return self._models.get("pico") is not None and self._models.get("dner") is not None

    def analyze(self, doc_id: str, title: str, abstract: str, snapshot: dict) -> dict:
        """Run the full pipeline with a fixed model/rule snapshot."""
        pico_version, pico_model = snapshot["pico"]
        dner_version, dner_model = snapshot["dner"]
        graph_version = snapshot["graph"][0] if snapshot["graph"] else None
        doc = make_document(doc_id, title, abstract)
        pico.classify_document(pico_model, doc)
        cfg = mapping.MappingConfig(lam=self.config.lam)
        p_entities, o_entities = mapping.map_document(doc, dner_model, snapshot["rules"], cfg)
        fallback_used = bool(
            (p_entities or o_entities)
            and all(doc.sentences[e.span.sentence_index].pico_label in ("IC", "N")
                    for e in p_entities + o_entities)
        )

        def entity_dict(e: mapping.MappedEntity) -> dict:
            return {
                "id": _entity_id(e.span.sentence_index, e.span.start, e.span.end),
                "sentence_index": e.span.sentence_index,
                "start": e.span.start, "end": e.span.end, "surface": e.span.surface,
                "s1": e.s1, "s2": e.s2, "rule_vec": list(e.rule_vec), "rule_id": e.rule_id,
                "score_p": e.score_p, "score_o": e.score_o, "label": e.final_label,
                "stale": False, "corrected": False,
            }

        view = {
            "doc_id": doc_id, "title": title, "abstract": abstract,
            "sentences": [
                {
                    "index": s.index, "text": s.text, "tokens": s.token_texts,
                    "pico_label": s.pico_label,
                    "pico_probs": [float(p) for p in s.pico_probs],
                    "corrected": False,
                }
                for s in doc.sentences
            ],
            "entities_p": [entity_dict(e) for e in p_entities],
            "entities_o": [entity_dict(e) for e in o_entities],
            "model_versions": {"pico": pico_version, "dner": dner_version, "graph": graph_version},
            "lambda": self.config.lam,
            "fallback_used": fallback_used,
        }
        _sort_entities(view)
        return view

    def store_document(self, doc_id: str, title: str, abstract: str, view: dict) -> None:
        doc_payload = canonical_json_bytes({"doc_id": doc_id, "title": title, "abstract": abstract})
        _write_atomic(os.path.join(self.data_dir, "docs", f"{doc_id}.json"), doc_payload)
        _write_atomic(os.path.join(self.data_dir, "base", f"{doc_id}.json"), canonical_json_bytes(view))
        _write_atomic(os.path.join(self.data_dir, "views", f"{doc_id}.json"), canonical_json_bytes(view))

    def get_view(self, doc_id: str) -> Optional[dict]:
        path = os.path.join(self.data_dir, "views", f"{doc_id}.json")
        if not os.path.exists(path):
            return None
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)

    # -- corrections -------------------------------------------------------------

    def _count_corrections(self) -> int:
        path = os.path.join(self.data_dir, "corrections.log")
        if not os.path.exists(path):
            return 0
        with open(path, encoding="utf-8") as fh:
            return sum(1 for line in fh if line.strip())

    def record_correction(self, doc_id: str, kind: str, payload: dict) -> Tuple[int, dict]:
        """Validate against the current view, append to the log, persist the
        updated view. Single serialized writer."""
        if kind not in VALID_KINDS:
            raise CorrectionError(f"unknown correction kind {kind!r}")
        with self._log_lock:
            view = self.get_view(doc_id)
            if view is None:
                raise KeyError(doc_id)
            record = {
                "id": self._correction_counter + 1,
                "doc_id": doc_id,
                "kind": kind,
                "payload": payload,
                "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
                "applied": True,
            }
            new_view = apply_correction(view, record)  # raises CorrectionError on bad refs
            log_path = os.path.join(self.data_dir, "corrections.log")
            with open(log_path, "ab") as fh:
                fh.write(canonical_json_bytes(record))
            self._correction_counter = record["id"]
            _write_atomic(os.path.join(self.data_dir, "views", f"{doc_id}.json"),
                          canonical_json_bytes(new_view))
        if self.config.auto_rules and kind == "relabel_entity":
            surface = None
            for lst in _entity_lists(new_view):
                for ent in lst:
                    if ent["id"] == payload.get("entity_id"):
                        surface = ent["surface"]
            if surface:
                marker = "population" if payload["new_label"] == "P" else "outcome"
                try:
                    self.add_rule(payload["new_label"], f"<{marker}:{surface}>", origin="auto")
                except FileExistsError:
                    pass
        return record["id"], new_view

    def corrections(self, slot: Optional[str] = None) -> List[dict]:
        path = os.path.join(self.data_dir, "corrections.log")
        records: List[dict] = []
        if os.path.exists(path):
            with open(path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        records.append(json.loads(line))
        if slot == "pico":
            records = [r for r in records if r["kind"] in PICO_KINDS]
        elif slot == "dner":
            records = [r for r in records if r["kind"] in DNER_KINDS]
        return records

    # -- retraining ---------------------------------------------------------------

    def job_status(self, job_id: str) -> Optional[dict]:
        with self._lock:
            job = self._jobs.get(job_id)
            return dict(job) if job else None

    def start_retrain(self, slot: str) -> str:
        if slot not in ("pico", "dner"):
            raise ValueError(f"retrainable slots are pico and dner, got {slot!r}")
        applicable = self.corrections(slot)
        if len(applicable) < self.config.retrain_threshold:
            raise PermissionError(
                json.dumps({"count": len(applicable), "threshold": self.config.retrain_threshold})
            )
        with self._lock:
            if slot in self._retraining:
                raise FileExistsError(f"retrain already running for slot {slot!r}")
            self._retraining.add(slot)
            self._job_counter += 1
            job_id = f"job-{self._job_counter:04d}"
            self._jobs[job_id] = {"job_id": job_id, "slot": slot, "status": "running",
                                  "started": time.time()}
        thread = threading.Thread(target=self._run_retrain, args=(job_id, slot), daemon=True)
        thread.start()
        return job_id

    def _run_retrain(self, job_id: str, slot: str) -> None:
        try:
            if self.config.retrain_delay > 0:
                time.sleep(self.config.retrain_delay)
            if slot == "pico":
                version, path = self._retrain_pico()
            else:
                version, path = self._retrain_dner()
            with self._lock:
                self._registry[slot] = {"path": path, "version": version}
                self._save_registry()
                self._activate_from_registry()
                self._jobs[job_id].update(status="succeeded", new_version=version,
                                          finished=time.time())
        except Exception as exc:  # job failures are reported, not raised
            with self._lock:
                self._jobs[job_id].update(status="failed", error=str(exc), finished=time.time())
        finally:
            with self._lock:
                self._retraining.discard(slot)

    def _retrain_pico(self) -> Tuple[str, str]:
        snapshot = self.model_snapshot()
        if snapshot["pico"] is None:
            raise RuntimeError("no active sentence classifier to retrain")
        _, active = snapshot["pico"]
        if self.config.pico_base_corpus:
            base = pico.load_pico_dataset(self.config.pico_base_corpus)
        else:
            base = fixtures.synthetic_pico_dataset(40, seed=self.config.seed)
        items = list(base.items)
        seen = {}
        for record in self.corrections("pico"):
            payload = record["payload"]
            seen[(record["doc_id"], payload["sentence_index"])] = payload["new_label"]
        for (doc_id, sentence_index), label in sorted(seen.items()):
            view = self.get_view(doc_id)
            if view and 0 <= sentence_index < len(view["sentences"]):
                items.append((view["sentences"][sentence_index]["tokens"], label))
        dataset = pico.PicoDataset(items=items)
        from ..corpus import build_vocabulary

        vocab = build_vocabulary(t for toks, _ in items for t in toks)
        model = pico.init_pico_model(vocab, variant=active.variant,
                                     word_dim=active.word_dim, hidden=active.hidden,
                                     seed=self.config.seed)
        cfg = pico.PicoTrainConfig(epochs=self.config.retrain_epochs)
        model, _ = pico.train_pico(model, dataset, config=cfg, seed=self.config.seed)
        path = os.path.join(self.data_dir, "checkpoints", f"pico-{int(time.time()*1000)}.ckpt")
        model.save(path)
        return _file_version(path), path

    def _retrain_dner(self) -> Tuple[str, str]:
        snapshot = self.model_snapshot()
        if snapshot["dner"] is None:
            raise RuntimeError("no active tagger to retrain")
        _, active = snapshot["dner"]
        if self.config.dner_base_corpus:
            from ..corpus import load_bio_corpus

            base = load_bio_corpus(self.config.dner_base_corpus)
        else:
            base = fixtures.synthetic_bio_corpus(50, seed=self.config.seed)
        sentences = list(base.sentences)
        corrected_docs = sorted({r["doc_id"] for r in self.corrections("dner")})
        for doc_id in corrected_docs:
            view = self.get_view(doc_id)
            if not view:
                continue
            by_sentence: Dict[int, List[dner.EntitySpan]] = {}
            for lst in _entity_lists(view):
                for ent in lst:
                    by_sentence.setdefault(ent["sentence_index"], []).append(
                        dner.EntitySpan(ent["sentence_index"], ent["start"], ent["end"], ent["surface"])
                    )
            for sent in view["sentences"]:
                touched = sent["index"] in by_sentence or sent["pico_label"] in ("P", "O")
                if not touched or not sent["tokens"]:
                    continue
                tags = dner.encode_tags(by_sentence.get(sent["index"], []), len(sent["tokens"]))
                sentences.append((sent["tokens"], tags))
        corpus = BioCorpus(sentences=sentences)
        cfg = dner.DnerConfig(
            word_dim=active.config.word_dim, hidden=active.config.hidden,
            char_variant=active.config.char_variant, char_dim=active.config.char_dim,
            head=active.config.head, hard_bio=active.config.hard_bio,
            use_graph=active.config.use_graph,
            epochs=self.config.retrain_epochs,
        )
        model, _ = dner.train_dner(corpus, valid=None, config=cfg, seed=self.config.seed,
                                   graph=active.graph, graph_emb=active.graph_emb)
        path = os.path.join(self.data_dir, "checkpoints", f"dner-{int(time.time()*1000)}.ckpt")
        model.save(path)
        return _file_version(path), path
