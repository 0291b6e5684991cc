"""Text ingestion: sentence splitting, tokenization, BIO corpus I/O,
vocabulary construction, and the Document/Sentence/Token containers that the
pipeline passes between stages.

All structures are immutable-by-convention after construction and safe for
concurrent reads.
"""

from __future__ import annotations

import string
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

PICO_CLASSES: Tuple[str, str, str, str] = ("P", "IC", "O", "N")
BIO_TAGS: Tuple[str, str, str] = ("B", "I", "O")

# Words whose trailing period never ends a sentence. Single letters (initials)
# are also suppressed.
_ABBREVIATIONS = {
    "vs", "e.g", "i.e", "etc", "cf", "ca", "approx", "al", "et al",
    "dr", "mr", "mrs", "ms", "prof", "st", "jr", "sr",
    "fig", "figs", "eq", "eqs", "ref", "refs", "no", "inc", "ltd",
}

_TERMINALS = ".!?"
_PUNCT = set(string.punctuation)


def _ends_with_abbreviation(text: str, punct_idx: int) -> bool:
    """True when the word ending at text[punct_idx] is on the stop list."""
    if text[punct_idx] != ".":
        return False
    i = punct_idx - 1
    while i >= 0 and (text[i].isalpha() or text[i] == "."):
        i -= 1
    word = text[i + 1 : punct_idx].lower().strip(".")
    if not word:
        return False
    return word in _ABBREVIATIONS or (len(word) == 1 and word.isalpha())


def split_sentences(text: str) -> List[str]:
    """Split raw text at '.', '!' or '?' followed by whitespace plus an
    uppercase letter (or end of text), never after a stop-list abbreviation.

    Joining the result recovers the input up to whitespace normalization.
    """
    sentences: List[str] = []
    start = 0
    i = 0
    n = len(text)
    while i < n:
        if text[i] not in _TERMINALS:
            i += 1
            continue
        run_end = i + 1
        while run_end < n and text[run_end] in _TERMINALS:
            run_end += 1
        after = run_end
        while after < n and text[after].isspace():
            after += 1
        at_end = after >= n
        upper_next = not at_end and after > run_end and text[after].isupper()
        if (at_end or upper_next) and not _ends_with_abbreviation(text, i):
            segment = text[start:run_end].strip()
            if segment:
                sentences.append(segment)
            start = after
            i = after
        else:
            i = run_end
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences


def tokenize(sentence: str) -> List[str]:
    """Whitespace split, then peel leading/trailing punctuation into their own
    tokens. Internal punctuation (hyphens, '=', ...) stays attached."""
    tokens: List[str] = []
    for chunk in sentence.split():
        lead: List[str] = []
        while chunk and chunk[0] in _PUNCT:
            lead.append(chunk[0])
            chunk = chunk[1:]
        trail: List[str] = []
        while chunk and chunk[-1] in _PUNCT:
            trail.append(chunk[-1])
            chunk = chunk[:-1]
        tokens.extend(lead)
        if chunk:
            tokens.append(chunk)
        tokens.extend(reversed(trail))
    return tokens


# ---------------------------------------------------------------------------
# Vocabulary
# ---------------------------------------------------------------------------

@dataclass
class Vocabulary:
    """Word and character id maps; id 0 is the unknown for both.

    Word lookups are lowercased; character ids preserve case (casing is a
    useful NER signal carried by the character encoder).
    """

    word_to_id: Dict[str, int]
    char_to_id: Dict[str, int]

    UNK = 0

    @property
    def n_words(self) -> int:
        return len(self.word_to_id) + 1

    @property
    def n_chars(self) -> int:
        return len(self.char_to_id) + 1

    def word_id(self, token: str) -> int:
        return self.word_to_id.get(token.lower(), self.UNK)

    def char_ids(self, token: str) -> List[int]:
        return [self.char_to_id.get(ch, self.UNK) for ch in token]

    def encode_token(self, text: str) -> "Token":
        return Token(text=text, char_ids=self.char_ids(text), word_id=self.word_id(text))

    def to_dict(self) -> dict:
        words = [w for w, _ in sorted(self.word_to_id.items(), key=lambda kv: kv[1])]
        chars = [c for c, _ in sorted(self.char_to_id.items(), key=lambda kv: kv[1])]
        return {"words": words, "chars": chars}

    @classmethod
    def from_dict(cls, d: dict) -> "Vocabulary":
        return cls(
            word_to_id={w: i + 1 for i, w in enumerate(d["words"])},
            char_to_id={c: i + 1 for i, c in enumerate(d["chars"])},
        )


def build_vocabulary(tokens: Iterable[str], min_count: int = 1, lowercase: bool = True) -> Vocabulary:
    """Deterministic vocabulary: ids assigned in first-occurrence order; words
    seen fewer than `min_count` times map to the unknown id 0."""
    if min_count < 1:
        raise ValueError("min_count must be >= 1")
    counts: Dict[str, int] = {}
    char_to_id: Dict[str, int] = {}
    for tok in tokens:
        key = tok.lower() if lowercase else tok
        counts[key] = counts.get(key, 0) + 1
        for ch in tok:
            if ch not in char_to_id:
                char_to_id[ch] = len(char_to_id) + 1
    word_to_id: Dict[str, int] = {}
    for word, c in counts.items():
        if c >= min_count:
            word_to_id[word] = len(word_to_id) + 1
    return Vocabulary(word_to_id=word_to_id, char_to_id=char_to_id)


# ---------------------------------------------------------------------------
# Documents
# ---------------------------------------------------------------------------

@dataclass
class Token:
    text: str
    char_ids: Optional[List[int]] = None
    word_id: Optional[int] = None


@dataclass
class Sentence:
    index: int
    text: str
    tokens: List[Token]
    pico_label: Optional[str] = None
    pico_probs: Optional[np.ndarray] = None

    @property
    def token_texts(self) -> List[str]:
        return [t.text for t in self.tokens]

    def validate_probs(self) -> None:
        if self.pico_probs is None:
            return
        p = np.asarray(self.pico_probs)
        if p.shape != (4,) or np.any(p < 0) or np.any(p > 1) or abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError(f"invalid class probabilities on sentence {self.index}: {p}")
        if self.pico_label is not None and self.pico_label != PICO_CLASSES[int(np.argmax(p))]:
            raise ValueError(
                f"sentence {self.index}: label {self.pico_label} != argmax of probabilities"
            )


@dataclass
class Document:
    id: str
    title: str
    abstract: str
    sentences: List[Sentence] = field(default_factory=list)


def make_document(doc_id: str, title: str, abstract: str,
                  vocab: Optional[Vocabulary] = None) -> Document:
    """Split title (leading sentences) then abstract into tokenized sentences.

    With a vocabulary, tokens carry word/char ids; otherwise ids stay unset
    until a model encodes them.
    """
    doc = Document(id=doc_id, title=title, abstract=abstract)
    idx = 0
    for source in (title, abstract):
        for raw in split_sentences(source):
            words = tokenize(raw)
            if not words:
                continue
            if vocab is not None:
                toks = [vocab.encode_token(w) for w in words]
            else:
                toks = [Token(text=w) for w in words]
            doc.sentences.append(Sentence(index=idx, text=raw, tokens=toks))
            idx += 1
    return doc


def read_document_file(path: str, doc_id: Optional[str] = None) -> Document:
    """UTF-8 document file: first line title, remainder abstract."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    title = lines[0] if lines else ""
    abstract = "\n".join(lines[1:]).strip()
    return make_document(doc_id or path, title, abstract)


# ---------------------------------------------------------------------------
# BIO corpora
# ---------------------------------------------------------------------------

@dataclass
class BioCorpus:
    """Token/tag pairs per sentence; tag set fixed to B, I, O."""

    sentences: List[Tuple[List[str], List[str]]]

    def stats(self) -> dict:
        n_tokens = sum(len(toks) for toks, _ in self.sentences)
        n_annotations = sum(tags.count("B") for _, tags in self.sentences)
        unique = {tok for toks, _ in self.sentences for tok in toks}
        return {
            "sentences": len(self.sentences),
            "tokens": n_tokens,
            "annotations": n_annotations,
            "unique_tokens": len(unique),
        }

    def all_tokens(self) -> Iterable[str]:
        for toks, _ in self.sentences:
            yield from toks


def load_bio_corpus(path: str) -> BioCorpus:
    """Parse `token<TAB>tag` lines; a blank line ends a sentence.

    Malformed lines and unknown tags are reported with their line number.
    """
    sentences: List[Tuple[List[str], List[str]]] = []
    toks: List[str] = []
    tags: List[str] = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n").rstrip("\r")
            if not line.strip():
                if toks:
                    sentences.append((toks, tags))
                    toks, tags = [], []
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected `token<TAB>tag`, got {line!r}")
            tok, tag = parts
            if tag not in BIO_TAGS:
                raise ValueError(f"{path}:{lineno}: unknown tag {tag!r} (expected B, I or O)")
            if not tok:
                raise ValueError(f"{path}:{lineno}: empty token")
            toks.append(tok)
            tags.append(tag)
    if toks:
        sentences.append((toks, tags))
    return BioCorpus(sentences=sentences)


def serialize_bio_corpus(corpus: BioCorpus) -> str:
    """Normalized text form: tab-separated lines, one blank line after each
    sentence. load(serialize(c)) round-trips exactly."""
    blocks = []
    for toks, tags in corpus.sentences:
        blocks.append("".join(f"{t}\t{g}\n" for t, g in zip(toks, tags)) + "\n")
    return "".join(blocks)
