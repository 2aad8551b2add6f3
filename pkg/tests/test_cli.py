import json

import pytest

from deinterleave import io
from deinterleave.cli import build_parser, main


def _run(*argv):
    assert main([str(a) for a in argv]) == 0


def _files(d):
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def test_generate_viterbi_train_predict(tmp_path):
    data = tmp_path / "data"
    _run("generate", "--toy", "--seed", 3, "--sizes", "400,200,150", "--out", data)
    assert set(_files(data)) == {"params.json", "train.tsv", "valid.tsv", "test.tsv"}
    assert len(io.read_dataset(data / "test.tsv")) == 150

    vit = tmp_path / "vit"
    _run("viterbi", "--params", data / "params.json", "--data", data / "test.tsv", "--out", vit)
    metrics = json.loads((vit / "metrics.json").read_text())
    assert metrics["states"] == 32 and 0 <= metrics["accuracy"] <= 1 and metrics["log_prob"] < 0
    pred = io.read_dataset(vit / "predictions.tsv")
    assert len(pred) == 150 and not pred.has_hidden

    model = tmp_path / "model"
    _run("train", "--train", data / "train.tsv", "--valid", data / "valid.tsv",
         "--hidden", 8, "--max-epochs", 2, "--seed", 1, "--out", model)
    log = json.loads((model / "train_log.json").read_text())
    assert 1 <= len(log["epochs"]) <= 2

    out = tmp_path / "pred"
    _run("predict", "--checkpoint", model / "checkpoint.json", "--data", data / "test.tsv", "--out", out)
    assert "accuracy" in json.loads((out / "metrics.json").read_text())


def test_generate_case_is_reproducible(tmp_path):
    args = ("generate", "--case", 6, "--mode", "matrix", "--sizes", "100,50,50", "--seed", 2**64 - 1)
    _run(*args, "--out", tmp_path / "a")
    _run(*args, "--out", tmp_path / "b")
    assert _files(tmp_path / "a") == _files(tmp_path / "b")
    _run(*args[:-1], 5, "--out", tmp_path / "c")
    assert _files(tmp_path / "c") != _files(tmp_path / "a")


def test_withheld_hidden_columns(tmp_path):
    _run("generate", "--case", 1, "--sizes", "20,0,5", "--withhold-hidden", "--out", tmp_path)
    assert not io.read_dataset(tmp_path / "train.tsv").has_hidden
    assert len(io.read_dataset(tmp_path / "valid.tsv")) == 0


def test_state_limit_and_bad_files(tmp_path, capsys):
    _run("generate", "--case", 4, "--sizes", "10,10,10", "--out", tmp_path)
    with pytest.raises(Exception, match="limit"):
        main(["viterbi", "--params", str(tmp_path / "params.json"), "--data",
              str(tmp_path / "test.tsv"), "--limit", "100", "--out", str(tmp_path / "v")])
    (tmp_path / "bad.tsv").write_text("nonsense\n")
    code = main(["viterbi", "--params", str(tmp_path / "params.json"), "--data",
                 str(tmp_path / "bad.tsv"), "--out", str(tmp_path / "v")])
    assert code == 2


@pytest.mark.parametrize("argv", [
    ["generate", "--out", "x"],
    ["generate", "--toy", "--case", "1", "--out", "x"],
    ["generate", "--toy", "--seed", "-1", "--out", "x"],
    ["generate", "--toy", "--sizes", "1,2", "--out", "x"],
    ["reproduce-cases", "--out", "x"],
])
def test_argument_errors(argv):
    with pytest.raises(SystemExit):
        build_parser().parse_args(argv)
