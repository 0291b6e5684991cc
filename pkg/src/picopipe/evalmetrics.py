"""Precision/recall/F1 at sentence level (per PICO class), entity level
(exact-span match), and recall-oriented mapped-entity reports.

Any zero denominator yields 0 for that metric, so degenerate fixtures never
produce NaNs.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, Iterable, List, Sequence, Tuple


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn) < 0:
            raise ValueError("counts must be non-negative")

    def __add__(self, other: "Counts") -> "Counts":
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)


def prf(counts: Counts) -> Tuple[float, float, float]:
    """(precision, recall, F1); a zero denominator makes that metric 0.

    F1 is the harmonic mean 2PR/(P+R), computed in the equivalent count form
    2tp/(2tp+fp+fn) so integral cases come out exact.
    """
    p = counts.tp / (counts.tp + counts.fp) if counts.tp + counts.fp else 0.0
    r = counts.tp / (counts.tp + counts.fn) if counts.tp + counts.fn else 0.0
    denom = 2 * counts.tp + counts.fp + counts.fn
    f1 = 2 * counts.tp / denom if p + r else 0.0
    return p, r, f1


def _span_key(span) -> tuple:
    if isinstance(span, tuple):
        return span
    return (span.sentence_index, span.start, span.end)


def entity_counts(gold_spans: Iterable, pred_spans: Iterable) -> Counts:
    """Exact-boundary matching on (sentence_index, start, end); each gold span
    matches at most one prediction (duplicates count as false positives)."""
    remaining = Counter(_span_key(s) for s in gold_spans)
    tp = fp = 0
    for span in pred_spans:
        key = _span_key(span)
        if remaining[key] > 0:
            remaining[key] -= 1
            tp += 1
        else:
            fp += 1
    fn = sum(remaining.values())
    return Counts(tp=tp, fp=fp, fn=fn)


def sentence_counts(gold_labels: Sequence[str], pred_labels: Sequence[str], cls: str) -> Counts:
    """One-vs-rest counts for a single class over aligned label sequences."""
    if len(gold_labels) != len(pred_labels):
        raise ValueError(f"label sequences differ in length: {len(gold_labels)} vs {len(pred_labels)}")
    c = Counts()
    for g, p in zip(gold_labels, pred_labels):
        if p == cls and g == cls:
            c.tp += 1
        elif p == cls and g != cls:
            c.fp += 1
        elif p != cls and g == cls:
            c.fn += 1
    return c


def normalize_surface(surface: str) -> str:
    return " ".join(surface.lower().split())


def mapping_recall(
    gold: Iterable[Tuple[str, str]], pred: Iterable[Tuple[str, str]]
) -> Dict[str, Dict[str, float]]:
    """Per-class recall for mapped entities, matched on (normalized surface,
    label). Precision is computed too but is advisory only: predictions have
    no accepted reference standard, recall is the number that matters.

    Input items are (surface, label) pairs or objects with .surface and
    .final_label.
    """

    def norm(items):
        out = []
        for it in items:
            if isinstance(it, tuple):
                surface, label = it
            else:
                surface, label = it.surface, it.final_label
            out.append((normalize_surface(surface), label))
        return out

    gold_n, pred_n = norm(gold), norm(pred)
    report: Dict[str, Dict[str, float]] = {}
    for cls in ("P", "O"):
        gset = {s for s, lab in gold_n if lab == cls}
        pset = {s for s, lab in pred_n if lab == cls}
        hit = len(gset & pset)
        report[cls] = {
            "recall": hit / len(gset) if gset else 0.0,
            "precision_advisory": hit / len(pset) if pset else 0.0,
            "gold": len(gset),
            "found": hit,
        }
    return report


def format_report(per_class: Dict[str, Counts], title: str = "") -> str:
    """Plain-text table plus a machine-readable key=value block per class."""
    lines: List[str] = []
    if title:
        lines.append(title)
    lines.append(f"{'class':<8} {'tp':>6} {'fp':>6} {'fn':>6} {'prec':>8} {'rec':>8} {'f1':>8}")
    kv: List[str] = []
    for cls, counts in per_class.items():
        p, r, f1 = prf(counts)
        lines.append(
            f"{cls:<8} {counts.tp:>6} {counts.fp:>6} {counts.fn:>6} {p:>8.4f} {r:>8.4f} {f1:>8.4f}"
        )
        kv.append(
            f"class={cls} tp={counts.tp} fp={counts.fp} fn={counts.fn} "
            f"precision={p:.6f} recall={r:.6f} f1={f1:.6f}"
        )
    return "\n".join(lines + kv)
