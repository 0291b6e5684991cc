"""Graph loading, random walks, skip-gram training, surface lookup."""

import importlib.resources as resources

import numpy as np
import pytest

from picopipe import kgraph
from picopipe.kgraph import (
    KnowledgeGraph,
    WalkConfig,
    generate_walk_corpus,
    lookup_embedding,
    random_walk,
    skipgram_train,
)
from picopipe.rng import Rng


def toy_graph_path():
    ref = resources.files("picopipe.data").joinpath("toy_medical_graph.tsv")
    with resources.as_file(ref) as p:
        return str(p)


def two_cliques():
    g = KnowledgeGraph()
    for i in range(12):
        g.add_node(i, f"n{i}")
    for clique in (range(0, 6), range(6, 12)):
        clique = list(clique)
        for i in clique:
            for j in clique:
                if i < j:
                    g.add_edge(i, j)
    g.add_edge(0, 6)
    return g


class TestGraphFile:
    def test_load_toy_graph(self):
        g = kgraph.load_graph(toy_graph_path())
        assert len(g.labels) > 150
        # adjacency is symmetric
        for node, nbrs in g.adjacency.items():
            for n in nbrs:
                assert node in g.adjacency[n]

    def test_english_only_filter(self):
        full = kgraph.load_graph(toy_graph_path())
        en = kgraph.load_graph(toy_graph_path(), english_only=True)
        assert len(en.labels) < len(full.labels)
        assert all(lbl not in ("herzinfarkt",) for lbl in en.labels.values())

    def test_edge_to_missing_node_rejected(self):
        g = KnowledgeGraph()
        g.add_node(1, "a")
        with pytest.raises(ValueError):
            g.add_edge(1, 99)


class TestRandomWalk:
    def test_isolated_node(self):
        g = KnowledgeGraph()
        g.add_node(1, "lonely")
        assert random_walk(g, 1, 10, Rng(0)) == [1]

    def test_two_node_path_alternates(self):
        g = KnowledgeGraph()
        g.add_node(1, "a")
        g.add_node(2, "b")
        g.add_edge(1, 2)
        walk = random_walk(g, 1, 4, Rng(0))
        assert walk == [1, 2, 1, 2]

    def test_unknown_start_rejected(self):
        with pytest.raises(ValueError):
            random_walk(KnowledgeGraph(), 3, 5, Rng(0))

    def test_three_cycle_visit_frequencies(self):
        g = KnowledgeGraph()
        for i in range(3):
            g.add_node(i, f"c{i}")
        g.add_edge(0, 1)
        g.add_edge(1, 2)
        g.add_edge(2, 0)
        rng = Rng(123)
        counts = np.zeros(3)
        for k in range(10_000):
            walk = random_walk(g, k % 3, 32, rng)
            for node in walk:
                counts[node] += 1
        freqs = counts / counts.sum()
        np.testing.assert_allclose(freqs, 1 / 3, atol=0.02)

    def test_walks_are_valid_paths(self):
        g = two_cliques()
        rng = Rng(9)
        for start in g.node_ids():
            walk = random_walk(g, start, 32, rng)
            for a, b in zip(walk, walk[1:]):
                assert b in g.adjacency[a]


class TestWalkCorpus:
    def test_walk_count(self):
        g = KnowledgeGraph()
        for i in range(5):
            g.add_node(i, f"n{i}")
        for i in range(4):
            g.add_edge(i, i + 1)
        walks = generate_walk_corpus(g, WalkConfig(walks_per_node=10, seed=0))
        assert len(walks) == 50

    def test_determinism(self):
        g = two_cliques()
        cfg = WalkConfig(seed=3)
        assert generate_walk_corpus(g, cfg) == generate_walk_corpus(g, cfg)

    def test_token_budget(self):
        g = two_cliques()
        cfg = WalkConfig(walk_length=32, walks_per_node=10, seed=0)
        walks = generate_walk_corpus(g, cfg)
        total = sum(len(w) for w in walks)
        assert total <= len(g.labels) * 10 * 32

    def test_config_validation(self):
        with pytest.raises(ValueError):
            WalkConfig(walk_length=1)
        with pytest.raises(ValueError):
            WalkConfig(window=0)


class TestSkipgram:
    def test_zero_epochs_keeps_initialization(self):
        walks = [[0, 1, 0, 1]]
        cfg = WalkConfig(epochs=0, seed=5, dim=8)
        emb = skipgram_train(walks, cfg, node_ids=[0, 1])
        rng = Rng(5).split("skipgram")
        init = (rng.random((2, 8)) - 0.5) / 8
        np.testing.assert_array_equal(emb.vectors, init)
        assert emb.epoch_losses == []

    def test_repeated_walk_affinity_rises(self):
        walks = [[0, 1] * 16] * 10
        cfg = WalkConfig(epochs=5, seed=2, dim=16, window=2)
        emb0 = skipgram_train(walks, WalkConfig(epochs=0, seed=2, dim=16, window=2), node_ids=[0, 1])
        emb = skipgram_train(walks, cfg, node_ids=[0, 1])
        before = float(np.dot(emb0.vectors[0], emb0.vectors[1]))
        after = float(np.dot(emb.vectors[0], emb.vectors[1]))
        assert after > before

    def test_clique_separation_and_loss_decrease(self):
        g = two_cliques()
        cfg = WalkConfig(walk_length=32, walks_per_node=10, window=5, seed=7)
        emb = kgraph.train_graph_embeddings(g, cfg)
        v = emb.vectors / np.linalg.norm(emb.vectors, axis=1, keepdims=True)
        intra = np.mean([v[a] @ v[b]
                         for clique in (range(0, 6), range(6, 12))
                         for a in clique for b in clique if a < b])
        inter = np.mean([v[a] @ v[b] for a in range(0, 6) for b in range(6, 12)])
        assert intra > inter
        losses = emb.epoch_losses
        assert losses[-1] <= losses[0] * 0.95

    def test_unvisited_node_keeps_initialization(self):
        walks = [[0, 1, 0, 1]]
        cfg = WalkConfig(epochs=3, seed=4, dim=8)
        emb = skipgram_train(walks, cfg, node_ids=[0, 1, 2])
        init = (Rng(4).split("skipgram").random((3, 8)) - 0.5) / 8
        np.testing.assert_array_equal(emb.vectors[2], init[2])
        assert not np.array_equal(emb.vectors[0], init[0])


class TestLookup:
    def test_label_alias_and_missing(self):
        g = kgraph.load_graph(toy_graph_path())
        cfg = WalkConfig(epochs=0, seed=0, dim=12)
        emb = skipgram_train([[g.node_ids()[0], g.node_ids()[1]]], cfg, node_ids=g.node_ids())
        by_label = lookup_embedding(g, emb, "Breast Cancer")
        assert by_label is not None
        by_alias = lookup_embedding(g, emb, "breast carcinoma")
        np.testing.assert_array_equal(by_alias, by_label)
        assert lookup_embedding(g, emb, "definitely not a node") is None


class TestExport:
    def test_text_export_format(self, tmp_path):
        g = two_cliques()
        cfg = WalkConfig(epochs=1, seed=0, dim=4)
        emb = kgraph.train_graph_embeddings(g, cfg)
        out = tmp_path / "emb.txt"
        kgraph.export_embeddings(str(out), g, emb)
        lines = out.read_text().splitlines()
        assert lines[0] == "12 4"
        assert len(lines) == 13
        assert all(len(line.split()) == 5 for line in lines[1:])

    def test_checkpoint_round_trip(self, tmp_path):
        g = two_cliques()
        emb = kgraph.train_graph_embeddings(g, WalkConfig(epochs=1, seed=0, dim=4))
        path = str(tmp_path / "emb.ckpt")
        kgraph.save_embeddings(path, emb)
        loaded = kgraph.load_embeddings(path)
        np.testing.assert_array_equal(loaded.vectors, emb.vectors)
        assert loaded.node_ids == emb.node_ids
