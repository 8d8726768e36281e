# SPDX-License-Identifier: Apache-2.0
import numpy as np
import pytest

import kane

SMALL = {"dim": 8, "head_dim": 8, "layers": 1, "epochs": 3, "negatives": 2}


def test_synthetic_dataset_stats():
    ds = kane.Dataset.synthetic(entities=20)
    stats = ds.stats()
    assert stats["entities"] == 20
    assert stats["train"] + stats["valid"] + stats["test"] == stats["relation_triples"]
    assert len(ds.entity_names) == 20
    assert len(ds.checksum) == 16


def test_train_evaluate_and_embeddings():
    ds = kane.Dataset.synthetic(entities=20)
    seen = []
    model = kane.train(ds, SMALL, on_epoch=lambda r: seen.append(r.epoch))
    assert seen == [1, 2, 3]
    assert len(model.history) == 3
    report = model.evaluate_completion(ds)
    assert 0.0 <= report["entity"]["hits_filtered"] <= 1.0
    assert report["entity"]["hits_filtered"] >= report["entity"]["hits_raw"]
    emb = model.embeddings(ds)
    assert emb.shape == (20, 8)
    assert np.all(np.isfinite(emb))
    raw = model.embeddings(ds, final=False)
    assert raw.shape == (20, 8)


def test_classification_and_round_trip(tmp_path):
    ds = kane.Dataset.synthetic(entities=20)
    model = kane.train(ds, {**SMALL, "task": "classification"})
    acc = model.evaluate_classification(ds)
    assert 0.0 <= acc <= 1.0
    model.save(str(tmp_path / "m.kane"))
    ds.save(str(tmp_path / "d.kgb"))
    again = kane.Model.load(str(tmp_path / "m.kane"))
    ds2 = kane.Dataset.load(str(tmp_path / "d.kgb"))
    assert ds2.checksum == ds.checksum
    assert again.config == model.config
    np.testing.assert_array_equal(again.embeddings(ds2), model.embeddings(ds))


def test_deterministic_training():
    ds = kane.Dataset.synthetic(entities=20)
    a = kane.train(ds, SMALL).embeddings(ds)
    b = kane.train(ds, SMALL).embeddings(ds)
    np.testing.assert_array_equal(a, b)


def test_from_tsv_and_errors():
    ds = kane.Dataset.from_tsv("a\tr\tb\nb\tr\tc\nc\tr\ta\na\tr\tc\n", 'a\tname\t"Alpha one"\n')
    assert ds.stats()["attributes"] == 1
    with pytest.raises(kane.ParseError):
        kane.Dataset.from_tsv("a\tr\n")
    with pytest.raises(kane.ConfigError):
        kane.train(ds, {"no_such_setting": 1})
    with pytest.raises(kane.KaneError):
        kane.Dataset.load("/nonexistent/bundle.kgb")


def test_cli_in_process(tmp_path):
    code, out, err = kane.run_cli(["gen-synth", "--out", str(tmp_path), "--entities", "15"])
    assert code == 0, err
    assert (tmp_path / "relations.tsv").exists()
    code, _, _ = kane.run_cli(["prepare", "--bogus"])
    assert code != 0


def test_default_settings():
    s = kane.default_settings()
    assert s["dim"] == "64" and s["heads"] == "2" and s["norm"] == "l1"
