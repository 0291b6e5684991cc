"""Synthetic fixture generators.

The original sentence-classification and entity-mapping corpora are private,
so the repo ships deterministic template generators instead: separable
sentence classes built from distinctive vocabulary, and BIO-tagged sentences
whose entities come from the bundled toy medical graph. Tests and the demo
paper below rely on these.
"""

from __future__ import annotations

from typing import List, Tuple

from .corpus import BioCorpus
from .pico import PicoDataset
from .rng import Rng

FIXTURE_DISEASES = [
    "stroke", "hypertension", "asthma", "migraine", "anemia", "obesity",
    "breast cancer", "lung cancer", "heart failure", "gastric cancer",
    "type 2 diabetes", "coronary heart disease", "chronic kidney disease",
    "atrial fibrillation", "myocardial infarction",
]

FIXTURE_DRUGS = ["metformin", "aspirin", "statin", "lisinopril", "warfarin", "insulin"]

_P_TEMPLATES = [
    "patients with {d} were enrolled in the study .",
    "we recruited adults with {d} from twelve centers .",
    "the cohort included participants with {d} at baseline .",
    "subjects with {d} were screened and followed .",
    "patients at risk of {d} were enrolled in the study .",
]
_IC_TEMPLATES = [
    "participants received {g} therapy daily .",
    "the intervention group was treated with {g} .",
    "patients were randomized to {g} or placebo .",
    "treatment consisted of {g} for six weeks .",
]
_O_TEMPLATES = [
    "the primary outcome was incidence of {d} .",
    "the model predicts risk of {d} .",
    "we measured progression to {d} at follow-up .",
    "risk of {d} was the main endpoint .",
]
_N_TEMPLATES = [
    "this is a retrospective analysis of registry data .",
    "statistical analysis was performed using standard software .",
    "the study protocol was approved by the ethics committee .",
    "data were collected from electronic health records .",
]


def synthetic_pico_dataset(n: int = 40, seed: int = 0) -> PicoDataset:
    """Balanced four-class sentence set, n/4 items per class."""
    rng = Rng(seed).split("pico-fixture")
    per_class = max(1, n // 4)
    items: List[Tuple[List[str], str]] = []
    for label, templates in (("P", _P_TEMPLATES), ("IC", _IC_TEMPLATES),
                             ("O", _O_TEMPLATES), ("N", _N_TEMPLATES)):
        for i in range(per_class):
            template = templates[i % len(templates)]
            d = FIXTURE_DISEASES[int(rng.integers(0, len(FIXTURE_DISEASES)))]
            g = FIXTURE_DRUGS[int(rng.integers(0, len(FIXTURE_DRUGS)))]
            text = template.format(d=d, g=g)
            items.append((text.split(), label))
    return PicoDataset(items=items, split="train")


_BIO_TEMPLATES = [
    # (prefix tokens, suffix tokens) around one disease slot
    (["patients", "with"], ["were", "enrolled", "in", "the", "study", "."]),
    (["the", "model", "predicts", "risk", "of"], ["."]),
    (["history", "of"], ["was", "recorded", "at", "baseline", "."]),
    (["participants", "developed"], ["during", "follow-up", "."]),
    (["incidence", "of"], ["increased", "with", "age", "."]),
    (["screening", "detected"], ["in", "many", "subjects", "."]),
    (["patients", "at", "risk", "of"], ["were", "enrolled", "in", "the", "study", "."]),
]
_BIO_EMPTY = [
    ["baseline", "characteristics", "were", "collected", "at", "entry", "."],
    ["the", "study", "lasted", "five", "years", "."],
    ["all", "models", "were", "validated", "externally", "."],
]


def synthetic_bio_corpus(n: int = 50, seed: int = 0) -> BioCorpus:
    """Sentences with gold BIO disease tags; roughly one in five has no
    entity, one in six carries two."""
    rng = Rng(seed).split("bio-fixture")
    sentences: List[Tuple[List[str], List[str]]] = []

    def entity(d: str) -> Tuple[List[str], List[str]]:
        toks = d.split()
        return toks, ["B"] + ["I"] * (len(toks) - 1)

    for i in range(n):
        if i % 5 == 4:
            toks = list(_BIO_EMPTY[i % len(_BIO_EMPTY)])
            sentences.append((toks, ["O"] * len(toks)))
            continue
        prefix, suffix = _BIO_TEMPLATES[i % len(_BIO_TEMPLATES)]
        d = FIXTURE_DISEASES[int(rng.integers(0, len(FIXTURE_DISEASES)))]
        etoks, etags = entity(d)
        toks = list(prefix) + etoks + list(suffix)
        tags = ["O"] * len(prefix) + etags + ["O"] * len(suffix)
        if i % 6 == 3:
            d2 = FIXTURE_DISEASES[int(rng.integers(0, len(FIXTURE_DISEASES)))]
            e2toks, e2tags = entity(d2)
            toks = toks[:-1] + ["and"] + e2toks + ["."]
            tags = tags[:-1] + ["O"] + e2tags + ["O"]
        sentences.append((toks, tags))
    return BioCorpus(sentences=sentences)


def fixture_paper() -> Tuple[str, str]:
    """A small demo paper whose sentences match the fixture templates, so
    fixture-trained models analyze it sensibly."""
    title = "Risk prediction of stroke in adults with hypertension."
    abstract = (
        "Patients with hypertension were enrolled in the study. "
        "Participants received statin therapy daily. "
        "The model predicts risk of stroke. "
        "Statistical analysis was performed using standard software."
    )
    return title, abstract


def write_pico_dataset(path: str, dataset: PicoDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tokens, label in dataset.items:
            fh.write(f"{label}\t{' '.join(tokens)}\n")


def write_bio_corpus(path: str, corpus: BioCorpus) -> None:
    from .corpus import serialize_bio_corpus

    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_bio_corpus(corpus))
