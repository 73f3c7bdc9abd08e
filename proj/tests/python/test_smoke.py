"""End-to-end smoke tests for the python module."""

import json
import pathlib

import pytest

import emorec

SPEC = {
    "utterances_per_speaker": 8,
    "frame_feat_dim": 4,
    "word_vec_dim": 8,
    "min_words": 2,
    "max_words": 4,
    "min_frames_per_word": 2,
    "max_frames_per_word": 4,
    "max_silence": 1,
    "alpha": 0.5,
}


@pytest.fixture(scope="module")
def corpus_path(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.jsonl"
    info = emorec.generate_corpus(SPEC, seed=7, out_path=str(path))
    assert info["size"] == 80
    assert info["frame_dim"] == 4
    return path


def test_generation_is_deterministic(tmp_path, corpus_path):
    other = tmp_path / "again.jsonl"
    emorec.generate_corpus(SPEC, seed=7, out_path=str(other))
    assert other.read_bytes() == pathlib.Path(corpus_path).read_bytes()


def test_corpus_lines_are_json(corpus_path):
    with open(corpus_path) as fh:
        first = json.loads(fh.readline())
    assert {"id", "session", "speaker", "label", "frames"} <= set(first)


def test_train_eval_report_roundtrip(tmp_path, corpus_path):
    result = emorec.train_view(
        str(corpus_path),
        str(tmp_path / "run"),
        {
            "view": "H-MM-4",
            "mode": "single-view",
            "epochs": 2,
            "batch": 16,
            "hidden_dim": 3,
            "num_layers": 1,
            "dropout_p": 0.0,
            "lr": 1e-3,
            "seed": 5,
        },
    )
    assert len(result["log"]) == 2
    assert 0.0 <= result["best_val_ua"] <= 1.0

    scores = emorec.evaluate_checkpoint(
        result["checkpoint"], str(corpus_path), split="val", fold=0,
        stats=result["stats"],
    )
    assert scores["view"] == "H-MM-4"
    assert len(scores["confusion"]) == 4
    assert scores["samples"] == 8

    report = emorec.report_attention(
        result["checkpoint"], str(corpus_path), "s1_F1_u0", stats=result["stats"]
    )
    assert len(report["attention"]) == len(report["tokens"])
    assert abs(sum(report["attention"]) - 1.0) < 1e-9
    assert report["svg"].startswith("<svg")


def test_strip_lexical_contract(tmp_path, corpus_path):
    result = emorec.train_view(
        str(corpus_path),
        str(tmp_path / "aco"),
        {"view": "B-ACO-1", "epochs": 1, "batch": 16, "hidden_dim": 3,
         "num_layers": 1, "dropout_p": 0.0, "seed": 2},
    )
    scores = emorec.evaluate_checkpoint(
        result["checkpoint"], str(corpus_path), split="val", fold=0,
        stats=result["stats"], strip_lexical=True,
    )
    assert scores["samples"] == 8


def test_unweighted_accuracy():
    labels = ["anger", "happiness", "neutral", "sadness"]
    assert emorec.unweighted_accuracy(labels, labels)["ua"] == 1.0
    assert emorec.unweighted_accuracy(labels, ["anger"] * 4)["ua"] == 0.25


def test_gradient_check_demo():
    assert emorec.gradient_check_demo(seed=3) < 1e-6
