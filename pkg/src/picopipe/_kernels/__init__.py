"""Hot-loop kernels: linear-chain CRF dynamic programs and the skip-gram
negative-sampling epoch. Two interchangeable backends exist:

* ``picopipe._kernels._ckernels``: compiled Cython extension;
* ``picopipe._kernels.pure``:      pure NumPy, same algorithms and
  operation order.

The compiled backend is used when importable; set ``PICOPIPE_KERNELS=pure``
or ``PICOPIPE_KERNELS=cython`` to force a choice. ``benchmarks/bench_kernels.py``
compares the two.
"""

from __future__ import annotations

import os

from . import pure

_forced = os.environ.get("PICOPIPE_KERNELS", "").strip().lower()

if _forced == "pure":
    _impl = pure
    BACKEND = "pure"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        if _forced == "cython":
            raise ImportError(
                "PICOPIPE_KERNELS=cython but the compiled extension is not built; "
                "run `python setup.py build_ext --inplace`"
            )
        _impl = pure
        BACKEND = "pure"

crf_forward = _impl.crf_forward
crf_backward = _impl.crf_backward
viterbi = _impl.viterbi
sgns_epoch = _impl.sgns_epoch


def backends() -> dict:
    """Importable backends by name (for parity tests and benchmarks)."""
    out = {"pure": pure}
    try:
        from . import _ckernels  # type: ignore[attr-defined]

        out["cython"] = _ckernels
    except ImportError:
        pass
    return out
