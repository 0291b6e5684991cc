"""picopipe: step-wise extraction of PICO evidence from paper titles/abstracts.

The pipeline runs in three stages: sentence-level PICO classification
(:mod:`picopipe.pico`), disease named-entity recognition over P/O sentences
(:mod:`picopipe.dner`), and fusion of classifier probabilities with
linguistic rules to assign each disease entity to P or O
(:mod:`picopipe.mapping`). Supporting layers live in :mod:`picopipe.numerics`,
:mod:`picopipe.seqmodels`, :mod:`picopipe.crf` and :mod:`picopipe.kgraph`;
the HTTP review service is :mod:`picopipe.service`.
"""

__version__ = "0.1.0"
