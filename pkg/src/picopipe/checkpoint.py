"""Parameter checkpoint container.

Layout (see docs/checkpoint-format.md for the byte-level description):

    line 1:  b"PICOPIPE-CKPT v1\\n"            version header
    line 2:  8-byte little-endian uint64       header JSON length in bytes
    next:    UTF-8 JSON: {"meta": {...},
                          "tensors": [{"name": str, "shape": [int, ...]}, ...]}
    then:    per tensor, in index order, the raw little-endian float64
             payload in C (row-major) order.

`meta` carries model-level metadata (class order, tag order, vocabulary,
configuration) so a checkpoint is self-describing and exchangeable.
"""

from __future__ import annotations

import json
import struct
from typing import Any, Dict, Tuple

import numpy as np

MAGIC = b"PICOPIPE-CKPT v1\n"


def save_checkpoint(path: str, tensors: Dict[str, np.ndarray], meta: Dict[str, Any] | None = None) -> None:
    index = []
    payloads = []
    for name in sorted(tensors):
        arr = np.ascontiguousarray(tensors[name], dtype=np.float64)
        index.append({"name": name, "shape": list(arr.shape)})
        payloads.append(arr.astype("<f8").tobytes())
    header = json.dumps({"meta": meta or {}, "tensors": index}, ensure_ascii=False).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        for payload in payloads:
            fh.write(payload)


def load_checkpoint(path: str) -> Tuple[Dict[str, np.ndarray], Dict[str, Any]]:
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a picopipe checkpoint (bad magic)")
        (hlen,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(hlen).decode("utf-8"))
        tensors: Dict[str, np.ndarray] = {}
        for entry in header["tensors"]:
            shape = tuple(entry["shape"])
            count = int(np.prod(shape)) if shape else 1
            buf = fh.read(count * 8)
            if len(buf) != count * 8:
                raise ValueError(f"{path}: truncated payload for tensor {entry['name']!r}")
            tensors[entry["name"]] = np.frombuffer(buf, dtype="<f8").reshape(shape).astype(np.float64)
    return tensors, header.get("meta", {})
