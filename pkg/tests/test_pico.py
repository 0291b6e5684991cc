"""Sentence classifier: dataset I/O, classification contract, training."""

import numpy as np
import pytest

from picopipe import corpus, fixtures, pico
from picopipe.corpus import PICO_CLASSES, make_document
from picopipe.pico import (
    PicoDataset,
    PicoTrainConfig,
    classify_document,
    init_pico_model,
    load_pico_dataset,
    stratified_split,
    train_pico,
)


def small_vocab(dataset):
    return corpus.build_vocabulary(t for toks, _ in dataset.items for t in toks)


class TestDatasetIO:
    def test_histogram(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("P\tpatients enrolled\nIC\tdrug given\nO\toutcome seen\nN\tnothing here\n")
        ds = load_pico_dataset(str(path))
        assert ds.histogram() == {"P": 1, "IC": 1, "O": 1, "N": 1}

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "e.tsv"
        path.write_text("\n\n")
        with pytest.raises(ValueError, match="empty dataset"):
            load_pico_dataset(str(path))

    def test_unknown_label_reports_line(self, tmp_path):
        path = tmp_path / "d.tsv"
        path.write_text("P\tok\nQ\tnot a label\n")
        with pytest.raises(ValueError, match=":2:"):
            load_pico_dataset(str(path))

    def test_fixture_split_seventy_thirty(self):
        ds = fixtures.synthetic_pico_dataset(40, seed=0)
        assert len(ds.items) == 40
        train, valid = stratified_split(ds, ratio=0.7, seed=0)
        assert len(train.items) == 28
        assert len(valid.items) == 12
        # stratified: every class in both parts
        assert set(l for _, l in train.items) == set(PICO_CLASSES)
        assert set(l for _, l in valid.items) == set(PICO_CLASSES)


class TestClassification:
    def test_zero_head_gives_uniform_and_p_tiebreak(self):
        ds = fixtures.synthetic_pico_dataset(8, seed=0)
        model = init_pico_model(small_vocab(ds), variant="cnn", word_dim=8, seed=0)
        model.head = {k: np.zeros_like(v) for k, v in model.head.items()}
        doc = make_document("d", "Patients with stroke were enrolled.", "Another sentence here.")
        classify_document(model, doc)
        for sent in doc.sentences:
            np.testing.assert_allclose(sent.pico_probs, 0.25, atol=1e-12)
            assert sent.pico_label == "P"

    def test_probs_sum_to_one_and_label_is_argmax(self, tiny_pico_model):
        doc = make_document("d", *fixtures.fixture_paper())
        classify_document(tiny_pico_model, doc)
        for sent in doc.sentences:
            assert abs(float(np.sum(sent.pico_probs)) - 1.0) < 1e-6
            sent.validate_probs()

    def test_batch_composition_invariance(self, tiny_pico_model):
        title, abstract = fixtures.fixture_paper()
        full = make_document("d", title, abstract)
        classify_document(tiny_pico_model, full)
        alone = make_document("d2", "", full.sentences[2].text)
        classify_document(tiny_pico_model, alone)
        np.testing.assert_array_equal(alone.sentences[0].pico_probs,
                                      full.sentences[2].pico_probs)

    def test_empty_document_rejected(self, tiny_pico_model):
        doc = make_document("d", "", "")
        with pytest.raises(ValueError):
            classify_document(tiny_pico_model, doc)


class TestTraining:
    def test_initial_loss_near_log4(self):
        ds = fixtures.synthetic_pico_dataset(40, seed=1)
        model = init_pico_model(small_vocab(ds), variant="cnn", word_dim=16, seed=1)
        _, history = train_pico(model, ds, config=PicoTrainConfig(epochs=1, lr=1e-9), seed=1)
        assert abs(history[0]["train_loss"] - np.log(4.0)) < 0.05

    def test_overfits_fixture(self, tiny_pico_model, pico_fixture_dataset):
        metrics = pico.evaluate_pico(tiny_pico_model, pico_fixture_dataset)
        assert metrics["accuracy"] >= 0.95

    def test_duplicated_items_full_batch_identical_model(self):
        ds = fixtures.synthetic_pico_dataset(8, seed=3)
        doubled = PicoDataset(items=ds.items * 2)
        cfg = PicoTrainConfig(epochs=5, shuffle=False, batch_size=10_000)
        vocab = small_vocab(ds)
        m1, _ = train_pico(init_pico_model(vocab, "cnn", 12, seed=5), ds, config=cfg, seed=5)
        m2, _ = train_pico(init_pico_model(vocab, "cnn", 12, seed=5), doubled, config=cfg, seed=5)
        for k, v in m1.all_params().items():
            np.testing.assert_allclose(v, m2.all_params()[k], atol=1e-12)

    def test_reproducible_best_f1(self):
        ds = fixtures.synthetic_pico_dataset(16, seed=4)
        train, valid = stratified_split(ds, 0.7, seed=0)
        cfg = PicoTrainConfig(epochs=4)
        vocab = small_vocab(ds)
        runs = []
        for _ in range(2):
            _, hist = train_pico(init_pico_model(vocab, "cnn", 12, seed=9), train, valid, cfg, seed=9)
            runs.append([h.get("valid_macro_f1") for h in hist])
        assert runs[0] == runs[1]

    def test_bilstm_variant_trains(self):
        ds = fixtures.synthetic_pico_dataset(8, seed=6)
        model = init_pico_model(small_vocab(ds), variant="bilstm", word_dim=10, hidden=8, seed=6)
        model, hist = train_pico(model, ds, config=PicoTrainConfig(epochs=30, lr=5e-3), seed=6)
        assert pico.evaluate_pico(model, ds)["accuracy"] >= 0.9


class TestCheckpoint:
    def test_round_trip_and_class_order_guard(self, tiny_pico_model, tmp_path, monkeypatch):
        path = str(tmp_path / "pico.ckpt")
        tiny_pico_model.save(path)
        loaded = pico.PicoModel.load(path)
        ds = fixtures.synthetic_pico_dataset(8, seed=0)
        for toks, _ in ds.items:
            np.testing.assert_array_equal(
                pico.classify_sentence(tiny_pico_model, toks),
                pico.classify_sentence(loaded, toks),
            )
        # tampered class order must be refused
        from picopipe import checkpoint as ck
        tensors, meta = ck.load_checkpoint(path)
        meta["classes"] = ["O", "P", "IC", "N"]
        ck.save_checkpoint(path, tensors, meta)
        with pytest.raises(ValueError, match="class order"):
            pico.PicoModel.load(path)
