"""Stage three: assign each extracted disease entity to P or O.

Each entity gets two soft scores from its host sentence's classifier output
(the P and O probabilities) and a rule vector from the linguistic rule set:
(1,0) when a P-rule covers the span, (0,1) for an O-rule, (0,0) otherwise.
The final score per side is the convex combination

    score = lambda * classifier_prob + (1 - lambda) * rule_indicator

and the larger side wins (tie goes to P). Surfaces claimed by both P and O
are collapsed to the single occurrence with the higher winning score. When
the P/O sentences of a document yield no entities at all, the extractor
falls back to the IC- and N-labeled sentences.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .corpus import Document, PICO_CLASSES
from .dner import DnerModel, EntitySpan, extract_from_document
from .evalmetrics import normalize_surface

MARKERS = ("<outcome>", "<population>")
_MARKER_RE = re.compile(r"<(outcome|population)(?::([^<>]+))?>")

P_INDEX = PICO_CLASSES.index("P")
O_INDEX = PICO_CLASSES.index("O")


class RulePatternError(ValueError):
    pass


@dataclass
class LinguisticRule:
    """A textual pattern with exactly one capture marker.

    The marker (`<outcome>` or `<population>`) names the window that must
    contain the entity span for the rule to fire; `<outcome:text>` restricts
    the window to an exact surface. Matching is case-insensitive over
    whitespace-normalized text.
    """

    id: str
    target: str                 # "P" | "O"
    pattern: str
    enabled: bool = True
    origin: str = "user"        # "builtin" | "user" | "auto"
    _regex: re.Pattern = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.target not in ("P", "O"):
            raise RulePatternError(f"rule target must be P or O, got {self.target!r}")
        self._regex = compile_rule_pattern(self.pattern)


def compile_rule_pattern(pattern: str) -> re.Pattern:
    """Validate and compile a rule pattern to a regex with a `window` group."""
    matches = list(_MARKER_RE.finditer(pattern))
    if len(matches) != 1:
        raise RulePatternError(
            f"pattern must contain exactly one <outcome>/<population> marker: {pattern!r}"
        )
    marker = matches[0]
    before = pattern[: marker.start()]
    after = pattern[marker.end() :]
    exact = marker.group(2)

    def literal(text: str) -> str:
        text = " ".join(text.lower().split())
        return r"\s+".join(re.escape(part) for part in text.split()) if text else ""

    if exact is not None:
        window = f"(?P<window>{literal(exact)})"
    elif after.strip():
        window = r"(?P<window>.+?)"
    else:
        window = r"(?P<window>.+)"

    lhs = literal(before)
    rhs = literal(after)
    regex = ""
    if lhs:
        regex += r"\b" + lhs + r"\s+"
    regex += window
    if rhs:
        regex += r"\s+" + rhs + r"\b"
    try:
        return re.compile(regex)
    except re.error as exc:  # pragma: no cover - escape() should prevent this
        raise RulePatternError(f"pattern does not compile: {pattern!r} ({exc})")


def _joined_text_and_offsets(tokens: Sequence[str]) -> Tuple[str, List[Tuple[int, int]]]:
    """Space-joined lowercase text plus each token's (start, end) char range."""
    offsets: List[Tuple[int, int]] = []
    pos = 0
    parts = []
    for tok in tokens:
        start = pos
        parts.append(tok.lower())
        pos += len(tok)
        offsets.append((start, pos))
        pos += 1  # single joining space
    return " ".join(parts), offsets


def rule_apply(rules: Sequence[LinguisticRule], tokens: Sequence[str],
               span: EntitySpan) -> Tuple[Tuple[int, int], Optional[str]]:
    """Rule evidence for one span: ((1,0), rule_id) if a P-rule's window covers
    it, ((0,1), rule_id) for an O-rule, ((0,0), None) otherwise.

    When rules of both targets cover the span, the more specific pattern (the
    longer literal text outside the marker) wins; an exact tie cancels to
    (0,0).
    """
    if not 0 <= span.start < span.end <= len(tokens):
        raise ValueError(f"span ({span.start}, {span.end}) outside sentence of {len(tokens)} tokens")
    text, offsets = _joined_text_and_offsets(tokens)
    span_start = offsets[span.start][0]
    span_end = offsets[span.end - 1][1]

    best: Dict[str, Tuple[int, str]] = {}
    for rule in rules:
        if not rule.enabled:
            continue
        for m in rule._regex.finditer(text):
            if m.start("window") <= span_start and span_end <= m.end("window"):
                size = len(_MARKER_RE.sub("", rule.pattern))
                if rule.target not in best or size > best[rule.target][0]:
                    best[rule.target] = (size, rule.id)
                break
    if "P" in best and "O" in best:
        if best["P"][0] == best["O"][0]:
            return (0, 0), None
        winner = "P" if best["P"][0] > best["O"][0] else "O"
    elif best:
        winner = next(iter(best))
    else:
        return (0, 0), None
    return ((1, 0) if winner == "P" else (0, 1)), best[winner][1]


@dataclass
class MappingConfig:
    lam: float = 0.5
    fallback: bool = True
    renormalize: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass
class MappedEntity:
    span: EntitySpan
    s1: float                   # classifier probability of P
    s2: float                   # classifier probability of O
    rule_vec: Tuple[int, int]
    score_p: float
    score_o: float
    final_label: str
    rule_id: Optional[str] = None

    @property
    def surface(self) -> str:
        return self.span.surface

    @property
    def winning_score(self) -> float:
        return self.score_p if self.final_label == "P" else self.score_o


def score_entity(span: EntitySpan, rule_vec: Tuple[int, int], config: MappingConfig,
                 rule_id: Optional[str] = None) -> MappedEntity:
    """Fuse the host sentence's (P, O) probabilities with the rule vector;
    the larger fused score decides the label, ties preferring P."""
    if span.pico_probs is None:
        raise ValueError(f"span {span.surface!r} carries no sentence probabilities")
    probs = np.asarray(span.pico_probs, dtype=np.float64)
    s1 = float(probs[P_INDEX])
    s2 = float(probs[O_INDEX])
    if config.renormalize:
        z = s1 + s2
        if z > 0:
            s1, s2 = s1 / z, s2 / z
    g_p, g_o = rule_vec
    score_p = config.lam * s1 + (1.0 - config.lam) * g_p
    score_o = config.lam * s2 + (1.0 - config.lam) * g_o
    final = "P" if score_p >= score_o else "O"
    return MappedEntity(span=span, s1=s1, s2=s2, rule_vec=tuple(rule_vec),
                        score_p=score_p, score_o=score_o, final_label=final,
                        rule_id=rule_id)


def resolve_intersections(entities: Sequence[MappedEntity]) -> List[MappedEntity]:
    """Collapse surfaces claimed by both P and O to one occurrence.

    For each normalized surface appearing under both labels, only the
    occurrence with the highest winning score survives (exact tie keeps the
    P-labeled one); surfaces under a single label pass through untouched.
    Output preserves input order. Idempotent.
    """
    by_surface: Dict[str, List[int]] = {}
    for i, ent in enumerate(entities):
        by_surface.setdefault(normalize_surface(ent.surface), []).append(i)
    drop: set = set()
    for surface, idxs in by_surface.items():
        labels = {entities[i].final_label for i in idxs}
        if len(labels) < 2:
            continue
        best = max(idxs, key=lambda i: (entities[i].winning_score,
                                        entities[i].final_label == "P",
                                        -i))
        drop.update(i for i in idxs if i != best)
    return [ent for i, ent in enumerate(entities) if i not in drop]


def map_document(
    doc: Document,
    model: DnerModel,
    rules: Sequence[LinguisticRule],
    config: Optional[MappingConfig] = None,
) -> Tuple[List[MappedEntity], List[MappedEntity]]:
    """Extract, score and partition a classified document's disease entities.

    Runs the tagger over P/O sentences; when that yields nothing and fallback
    is enabled, the IC- and N-labeled sentences are scanned instead. Returns
    (P entities, O entities) in document order after intersection resolution.
    """
    config = config or MappingConfig()
    spans = extract_from_document(doc, model, scope=frozenset({"P", "O"}))
    if not spans and config.fallback:
        spans = extract_from_document(doc, model, scope=frozenset({"IC", "N"}))
    mapped: List[MappedEntity] = []
    for span in spans:
        tokens = doc.sentences[span.sentence_index].token_texts
        rule_vec, rule_id = rule_apply(rules, tokens, span)
        mapped.append(score_entity(span, rule_vec, config, rule_id))
    resolved = resolve_intersections(mapped)
    p_entities = [e for e in resolved if e.final_label == "P"]
    o_entities = [e for e in resolved if e.final_label == "O"]
    return p_entities, o_entities


# ---------------------------------------------------------------------------
# Rule persistence
# ---------------------------------------------------------------------------

def load_rules(path: str, origin: str = "user", id_prefix: str = "r") -> List[LinguisticRule]:
    """Rule file: one `target<TAB>pattern` per line; `#` comments allowed."""
    rules: List[LinguisticRule] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected `target<TAB>pattern`")
            target, pattern = parts
            try:
                rules.append(LinguisticRule(id=f"{id_prefix}{len(rules)+1:02d}",
                                            target=target, pattern=pattern, origin=origin))
            except RulePatternError as exc:
                raise ValueError(f"{path}:{lineno}: {exc}")
    return rules


def save_rules(path: str, rules: Sequence[LinguisticRule]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rule in rules:
            fh.write(f"{rule.target}\t{rule.pattern}\n")


def builtin_rules() -> List[LinguisticRule]:
    """The bundled pattern family shipped with the package."""
    import importlib.resources as resources

    ref = resources.files("picopipe.data").joinpath("builtin_rules.tsv")
    with resources.as_file(ref) as path:
        return load_rules(str(path), origin="builtin", id_prefix="b")
