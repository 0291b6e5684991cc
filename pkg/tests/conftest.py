"""Shared fixtures: small fixture-trained models reused across test modules
(training them once per session keeps the suite fast)."""

from __future__ import annotations

import os

import pytest

from picopipe import corpus, dner, fixtures, pico


@pytest.fixture(scope="session")
def pico_fixture_dataset():
    return fixtures.synthetic_pico_dataset(40, seed=0)


@pytest.fixture(scope="session")
def bio_fixture_corpus():
    return fixtures.synthetic_bio_corpus(50, seed=0)


@pytest.fixture(scope="session")
def tiny_pico_model(pico_fixture_dataset):
    """Small CNN classifier overfit on the 40-sentence fixture."""
    vocab = corpus.build_vocabulary(t for toks, _ in pico_fixture_dataset.items for t in toks)
    model = pico.init_pico_model(vocab, variant="cnn", word_dim=24, hidden=16, seed=0)
    cfg = pico.PicoTrainConfig(epochs=60, lr=5e-3)
    model, _ = pico.train_pico(model, pico_fixture_dataset, config=cfg, seed=0)
    return model


@pytest.fixture(scope="session")
def tiny_dner_model(bio_fixture_corpus):
    """Small CRF tagger overfit on the 50-sentence fixture."""
    cfg = dner.DnerConfig(word_dim=24, hidden=16, char_variant=None, dropout=0.0,
                          epochs=60, lr=5e-3)
    model, _ = dner.train_dner(bio_fixture_corpus, valid=None, config=cfg, seed=0)
    return model


@pytest.fixture(scope="session")
def model_checkpoints(tmp_path_factory, tiny_pico_model, tiny_dner_model):
    path = tmp_path_factory.mktemp("ckpts")
    pico_path = str(path / "pico.ckpt")
    dner_path = str(path / "dner.ckpt")
    tiny_pico_model.save(pico_path)
    tiny_dner_model.save(dner_path)
    return {"pico": pico_path, "dner": dner_path}


def ncbi_dir() -> str | None:
    """Directory with train.bio/valid.bio/test.bio, when the user provides it."""
    path = os.environ.get("PICOPIPE_NCBI_DIR")
    if path and all(os.path.exists(os.path.join(path, f"{s}.bio")) for s in ("train", "valid", "test")):
        return path
    return None
