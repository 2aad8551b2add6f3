import json

import numpy as np
import pytest

from deinterleave import io
from deinterleave.core import make_rng
from deinterleave.experiments import ExperimentReport, ResultRow
from deinterleave.interleaver import LabeledSequence, TurnScheduler, interleave
from deinterleave.rnn import RnnConfig, init_params
from deinterleave.synthgen import CaseSpec, ScenarioParams, gen_case, gen_toy

from conftest import random_scenario


def test_dataset_roundtrip(tmp_path):
    scen = gen_toy(make_rng(0))
    seq = interleave(scen.models, scen.sched, 50, make_rng(1))
    io.write_dataset(seq, tmp_path / "d.tsv")
    back = io.read_dataset(tmp_path / "d.tsv")
    assert back == seq and back.has_hidden


def test_dataset_withheld_columns(tmp_path):
    seq = LabeledSequence([1, 0, 1], [0, 1, 1], 2, 2, 2)
    io.write_dataset(seq, tmp_path / "d.tsv")
    text = (tmp_path / "d.tsv").read_text()
    assert text == "#deinterleave-v1 m=2 n=2 q=2 T=3\n0\t0\t1\t-\t-\n1\t1\t0\t-\t-\n2\t1\t1\t-\t-\n"
    back = io.read_dataset(tmp_path / "d.tsv")
    assert back == seq and not back.has_hidden


def test_empty_dataset(tmp_path):
    seq = LabeledSequence([], [], 2, 3, 1)
    io.write_dataset(seq, tmp_path / "e.tsv")
    back = io.read_dataset(tmp_path / "e.tsv")
    assert len(back) == 0 and (back.m, back.n, back.q) == (2, 3, 1)


@pytest.mark.parametrize(
    "body, where",
    [
        ("#deinterleave-v2 m=2 n=2 q=2 T=1\n0\t0\t0\t0\t1\n", "line 1"),
        ("", "line 1"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n", "T=2"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n1\t0\tx\t0\t1\n", "line 3"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n1\t2\t0\t0\t1\n", "line 3"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n1\t0\t0\t0\t3\n", "line 3"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n2\t0\t0\t0\t1\n", "line 3"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=1\n0\t0\t0\t0\n", "line 2"),
        ("#deinterleave-v1 m=2 n=2 q=2 T=2\n0\t0\t0\t0\t1\n1\t0\t0\t-\t-\n", "every line"),
    ],
)
def test_malformed_datasets(tmp_path, body, where):
    path = tmp_path / "bad.tsv"
    path.write_text(body)
    with pytest.raises(io.FormatError, match=where):
        io.read_dataset(path)


@pytest.mark.parametrize("seed", range(3))
def test_params_roundtrip(tmp_path, seed):
    rng = make_rng(seed)
    for scen in (
        gen_case(CaseSpec(6, mode="matrix"), rng),
        gen_toy(rng),
        ScenarioParams(*random_scenario(rng, 3, 4, 2, sparsity=0.3, mode="matrix")),
    ):
        io.save_params(scen, tmp_path / "p.json")
        back = io.load_params(tmp_path / "p.json")
        assert back == scen
        for a, b in zip(back.models, scen.models):
            assert a.transition.tobytes() == b.transition.tobytes()


def test_params_per_user_durations(tmp_path):
    rng = make_rng(4)
    models, sched = random_scenario(rng, 2, 3, 3, sparsity=0.0)
    scen = ScenarioParams(models, sched)
    d = io.params_to_dict(scen)
    assert np.asarray(d["pw"]).shape == (2, 3, 3)
    assert io.params_from_dict(d) == scen


def test_bad_params(tmp_path):
    d = io.params_to_dict(gen_toy(make_rng(0)))
    bad = dict(d, P=d["P"][:1])
    with pytest.raises(io.FormatError, match="shapes"):
        io.params_from_dict(bad)
    bad = dict(d, sched={"type": "shares", "values": [0.3, 0.3, 0.4]})
    with pytest.raises(io.FormatError, match="3 users"):
        io.params_from_dict(bad)
    rows = [[0.5, 0.6], [0.5, 0.5]]
    with pytest.raises(io.FormatError):
        io.params_from_dict(dict(d, P=[rows, rows]))
    (tmp_path / "p.json").write_text('{"m": 2,\n "n": }')
    with pytest.raises(io.FormatError, match="line 2"):
        io.load_params(tmp_path / "p.json")


@pytest.mark.parametrize("cell", ["simple", "lstm"])
def test_checkpoint_roundtrip(tmp_path, cell):
    cfg = RnnConfig(input_size=5, output_size=3, cell=cell, hidden_size=7, learning_rate=0.01)
    params = init_params(cfg, make_rng(0))
    io.save_checkpoint(params, cfg, tmp_path / "c.json", extra={"seed": 3})
    back, cfg2 = io.load_checkpoint(tmp_path / "c.json")
    assert cfg2 == cfg
    for k in params:
        assert back[k].tobytes() == params[k].tobytes()
    blob = json.loads((tmp_path / "c.json").read_text())
    assert blob["param_order"] == ["W_v", "W_h", "b", "W_u"] and blob["extra"] == {"seed": 3}


def test_checkpoint_rejects_wrong_shape(tmp_path):
    cfg = RnnConfig(input_size=2, output_size=2, cell="simple", hidden_size=2)
    io.save_checkpoint(init_params(cfg, make_rng(0)), cfg, tmp_path / "c.json")
    blob = json.loads((tmp_path / "c.json").read_text())
    blob["params"]["b"]["shape"] = [3]
    (tmp_path / "c.json").write_text(json.dumps(blob))
    with pytest.raises(io.FormatError, match="b"):
        io.load_checkpoint(tmp_path / "c.json")
    blob["version"] = 2
    (tmp_path / "c.json").write_text(json.dumps(blob))
    with pytest.raises(io.FormatError, match="version"):
        io.load_checkpoint(tmp_path / "c.json")


def test_report_roundtrip(tmp_path):
    rows = [ResultRow("Viterbi", [0.5, 0.75], 0.6, [0.6, 0.6], [[0, 0], [0, 1]])]
    rep = ExperimentReport("toy", 9, {"realizations": 2}, rows, wall_clock=1.5)
    io.save_report(rep, tmp_path / "r")
    back = io.load_report(tmp_path / "r" / "report.json")
    assert back.to_dict() == rep.to_dict()
    assert back.row("Viterbi").mean == 0.625 and back.row("Viterbi").std == 0.125
    assert "wall_clock" not in (tmp_path / "r" / "report.json").read_text()
    assert (tmp_path / "r" / "report.txt").read_text() == rep.render() + "\n"
