"""Knowledge-graph node embeddings.

Loads an undirected node/edge/alias graph, generates truncated random walks,
and trains node vectors with skip-gram negative sampling over the walk
corpus (the walk list plays the role of a sentence, nodes the role of
words). Trained vectors are looked up by surface string during feature
assembly; a missing surface becomes a zero vector downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import _kernels
from .rng import Rng


@dataclass
class KnowledgeGraph:
    labels: Dict[int, str] = field(default_factory=dict)          # node id -> display label
    adjacency: Dict[int, List[int]] = field(default_factory=dict)  # symmetric neighbor lists
    aliases: Dict[str, int] = field(default_factory=dict)          # lowercased alias -> node id
    label_index: Dict[str, int] = field(default_factory=dict)      # lowercased label -> node id

    def add_node(self, node_id: int, label: str) -> None:
        self.labels[node_id] = label
        self.adjacency.setdefault(node_id, [])
        self.label_index[label.lower()] = node_id

    def add_edge(self, a: int, b: int) -> None:
        if a not in self.labels or b not in self.labels:
            raise ValueError(f"edge ({a}, {b}) references a missing node")
        if b not in self.adjacency[a]:
            self.adjacency[a].append(b)
        if a not in self.adjacency[b]:
            self.adjacency[b].append(a)

    def add_alias(self, node_id: int, alias: str) -> None:
        if node_id not in self.labels:
            raise ValueError(f"alias {alias!r} references missing node {node_id}")
        self.aliases[alias.lower()] = node_id

    def node_ids(self) -> List[int]:
        return sorted(self.labels)

    def neighbors(self, node_id: int) -> List[int]:
        return self.adjacency[node_id]


def load_graph(path: str, english_only: bool = False) -> KnowledgeGraph:
    """Read the sectioned graph file: `#nodes` (id<TAB>label<TAB>lang),
    `#edges` (id<TAB>id), `#aliases` (id<TAB>alias).

    With `english_only`, nodes whose language flag is not `en` are dropped
    along with their edges and aliases.
    """
    graph = KnowledgeGraph()
    dropped: set[int] = set()
    section = None
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line.strip() or line.startswith("//"):
                continue
            if line.startswith("#"):
                section = line.strip().lower()
                continue
            parts = line.split("\t")
            if section == "#nodes":
                if len(parts) != 3:
                    raise ValueError(f"{path}:{lineno}: expected id<TAB>label<TAB>lang")
                node_id, label, lang = int(parts[0]), parts[1], parts[2]
                if english_only and lang != "en":
                    dropped.add(node_id)
                    continue
                graph.add_node(node_id, label)
            elif section == "#edges":
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected id<TAB>id")
                a, b = int(parts[0]), int(parts[1])
                if a in dropped or b in dropped:
                    continue
                graph.add_edge(a, b)
            elif section == "#aliases":
                if len(parts) != 2:
                    raise ValueError(f"{path}:{lineno}: expected id<TAB>alias")
                node_id = int(parts[0])
                if node_id in dropped:
                    continue
                graph.add_alias(node_id, parts[1])
            else:
                raise ValueError(f"{path}:{lineno}: line outside any section")
    return graph


@dataclass
class WalkConfig:
    walk_length: int = 32
    walks_per_node: int = 10
    window: int = 5
    dim: int = 64
    negatives: int = 5
    epochs: int = 5
    lr: float = 0.005
    seed: int = 0

    def __post_init__(self) -> None:
        if self.walk_length < 2:
            raise ValueError("walk_length must be >= 2")
        if self.window < 1:
            raise ValueError("window must be >= 1")
        if self.dim < 1:
            raise ValueError("dim must be >= 1")


@dataclass
class NodeEmbeddings:
    vectors: np.ndarray          # (|V|, dim)
    node_ids: List[int]          # row order
    epoch_losses: List[float] = field(default_factory=list)

    def __post_init__(self) -> None:
        self._row: Dict[int, int] = {n: i for i, n in enumerate(self.node_ids)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def row(self, node_id: int) -> np.ndarray:
        return self.vectors[self._row[node_id]]


def random_walk(graph: KnowledgeGraph, start: int, length: int, rng: Rng) -> List[int]:
    """Uniform neighbor walk of at most `length` nodes, stopping early at a
    node with no neighbors."""
    if start not in graph.labels:
        raise ValueError(f"unknown start node {start}")
    walk = [start]
    current = start
    while len(walk) < length:
        nbrs = graph.neighbors(current)
        if not nbrs:
            break
        current = nbrs[int(rng.integers(0, len(nbrs)))]
        walk.append(current)
    return walk


def generate_walk_corpus(graph: KnowledgeGraph, config: WalkConfig) -> List[List[int]]:
    """`walks_per_node` rounds of walks, one per node per round, node start
    order reshuffled each round. Deterministic given config.seed."""
    if not graph.labels:
        raise ValueError("graph has no nodes")
    rng = Rng(config.seed).split("walks")
    walks: List[List[int]] = []
    for _ in range(config.walks_per_node):
        order = np.array(graph.node_ids())
        rng.shuffle(order)
        for start in order:
            walks.append(random_walk(graph, int(start), config.walk_length, rng))
    return walks


def _walk_pairs(walks: Sequence[Sequence[int]], window: int) -> Tuple[np.ndarray, np.ndarray]:
    centers: List[int] = []
    contexts: List[int] = []
    for walk in walks:
        n = len(walk)
        for i in range(n):
            lo = max(0, i - window)
            hi = min(n, i + window + 1)
            for j in range(lo, hi):
                if j == i:
                    continue
                centers.append(walk[i])
                contexts.append(walk[j])
    return np.asarray(centers, dtype=np.int64), np.asarray(contexts, dtype=np.int64)


def skipgram_train(
    walks: Sequence[Sequence[int]],
    config: WalkConfig,
    node_ids: Optional[Sequence[int]] = None,
) -> NodeEmbeddings:
    """Train node vectors by predicting walk context within +/-window against
    negative samples drawn from the walk-frequency^0.75 noise distribution.

    `node_ids` fixes the embedding row universe (defaults to the nodes seen in
    the walks); unvisited nodes keep their initialization. Mean loss per epoch
    is recorded in the result's `epoch_losses`.
    """
    if not walks:
        raise ValueError("empty walk corpus")
    seen = sorted({n for walk in walks for n in walk})
    ids = sorted(node_ids) if node_ids is not None else seen
    row_of = {n: i for i, n in enumerate(ids)}
    n_rows = len(ids)

    rng = Rng(config.seed).split("skipgram")
    emb = (rng.random((n_rows, config.dim)) - 0.5) / config.dim
    ctx = np.zeros((n_rows, config.dim))

    centers, contexts = _walk_pairs(walks, config.window)
    centers = np.array([row_of[n] for n in centers], dtype=np.int64)
    contexts = np.array([row_of[n] for n in contexts], dtype=np.int64)

    counts = np.zeros(n_rows)
    for walk in walks:
        for n in walk:
            counts[row_of[n]] += 1.0
    noise = counts**0.75
    noise = noise / noise.sum()

    losses: List[float] = []
    n_pairs = centers.shape[0]
    for epoch in range(config.epochs):
        neg_rng = rng.split(f"negatives-{epoch}")
        negatives = neg_rng.choice(n_rows, size=(n_pairs, config.negatives), p=noise).astype(np.int64)
        total = _kernels.sgns_epoch(emb, ctx, centers, contexts,
                                    np.ascontiguousarray(negatives), config.lr)
        losses.append(total / n_pairs)
    return NodeEmbeddings(vectors=emb, node_ids=list(ids), epoch_losses=losses)


def train_graph_embeddings(graph: KnowledgeGraph, config: WalkConfig) -> NodeEmbeddings:
    walks = generate_walk_corpus(graph, config)
    return skipgram_train(walks, config, node_ids=graph.node_ids())


def lookup_embedding(
    graph: KnowledgeGraph, embeddings: NodeEmbeddings, surface: str
) -> Optional[np.ndarray]:
    """Vector for a token or span string: lowercased exact match against node
    labels, then aliases; None when absent (callers substitute zeros)."""
    key = surface.lower().strip()
    node_id = graph.label_index.get(key)
    if node_id is None:
        node_id = graph.aliases.get(key)
    if node_id is None:
        return None
    return embeddings.row(node_id).copy()


def export_embeddings(path: str, graph: KnowledgeGraph, embeddings: NodeEmbeddings) -> None:
    """Text export: `<count> <dim>` header then one `label v1 .. vd` line per
    node; spaces inside labels become underscores."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{len(embeddings.node_ids)} {embeddings.dim}\n")
        for node_id in embeddings.node_ids:
            label = graph.labels[node_id].replace(" ", "_")
            vec = " ".join(f"{v:.6g}" for v in embeddings.row(node_id))
            fh.write(f"{label} {vec}\n")


def save_embeddings(path: str, embeddings: NodeEmbeddings) -> None:
    from .checkpoint import save_checkpoint

    save_checkpoint(
        path,
        {"graph.vectors": embeddings.vectors},
        meta={"kind": "graph-embeddings", "node_ids": list(embeddings.node_ids)},
    )


def load_embeddings(path: str) -> NodeEmbeddings:
    from .checkpoint import load_checkpoint

    tensors, meta = load_checkpoint(path)
    if meta.get("kind") != "graph-embeddings":
        raise ValueError(f"{path}: not a graph-embeddings checkpoint")
    return NodeEmbeddings(vectors=tensors["graph.vectors"], node_ids=[int(n) for n in meta["node_ids"]])
