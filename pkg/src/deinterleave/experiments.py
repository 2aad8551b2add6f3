"""Reproduction runs: the toy Viterbi-vs-LSTM comparison and the sparsity cases.

Every realization draws from its own generator, derived from the master seed as
``SeedSequence(master_seed, spawn_key=(case, realization))`` (``case = 0`` for
the toy). Jobs are therefore independent and can run in any order or in
parallel without changing a single number.
"""
from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from deinterleave.ahmm import build_ahmm, viterbi
from deinterleave.core import make_rng
from deinterleave.interleaver import interleave
from deinterleave.metrics import accuracy, baseline_majority
from deinterleave.rnn import LabeledDataset, RnnConfig, predict_users, train
from deinterleave.synthgen import CaseSpec, gen_case, gen_toy

log = logging.getLogger(__name__)

TOY_SIZES = (6000, 3000, 1000)
CASE_SIZES = {"full": (60_000, 30_000), "desk": (12_000, 6_000)}
NOMINAL_BASELINE = {"shares": 0.6, "matrix": 0.5}
REFERENCE_CASES = {
    "shares": [1.0, 1.0, 0.63, 0.70, 0.62, 0.74, 0.65],
    "matrix": [1.0, 1.0, 0.77, 0.69, 0.67, 0.82, 0.78],
}


def job_rng(master_seed: int, case: int, realization: int) -> np.random.Generator:
    return make_rng(np.random.SeedSequence(master_seed, spawn_key=(case, realization)))


@dataclass
class ResultRow:
    """Accuracies of one method/configuration across realizations."""

    label: str
    accuracies: list[float]
    baseline: float
    baseline_accuracies: list[float] = field(default_factory=list)
    spawn_keys: list[list[int]] = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        # population formula (divide by N) over realization means
        return float(np.std(self.accuracies))

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "mean": self.mean,
            "std": self.std,
            "accuracies": list(self.accuracies),
            "baseline": self.baseline,
            "baseline_accuracies": list(self.baseline_accuracies),
            "spawn_keys": [list(k) for k in self.spawn_keys],
        }


@dataclass
class ExperimentReport:
    experiment: str
    master_seed: int
    settings: dict
    rows: list[ResultRow]
    wall_clock: float = float("nan")

    def row(self, label: str) -> ResultRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)

    def to_dict(self, include_timing: bool = False) -> dict:
        # wall-clock is left out by default so reruns are byte-identical
        d = {
            "experiment": self.experiment,
            "master_seed": self.master_seed,
            "settings": self.settings,
            "rows": [r.to_dict() for r in self.rows],
            "table": self.render(),
        }
        if include_timing:
            d["wall_clock"] = self.wall_clock
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        rows = [
            ResultRow(r["label"], r["accuracies"], r["baseline"],
                      r.get("baseline_accuracies", []), r.get("spawn_keys", []))
            for r in d["rows"]
        ]
        return cls(d["experiment"], d["master_seed"], d["settings"], rows,
                   d.get("wall_clock", float("nan")))

    def render(self) -> str:
        labels = [r.label for r in self.rows]
        width = max(8, *(len(s) for s in labels))
        head = f"{'':<16}" + "".join(f"{s:>{width + 2}}" for s in labels)
        mean = f"{'Mean Accuracy':<16}" + "".join(f"{r.mean:>{width + 2}.2f}" for r in self.rows)
        std = f"{'Std of Accuracy':<16}" + "".join(f"{r.std:>{width + 2}.2f}" for r in self.rows)
        base = self.rows[0].baseline if self.rows else float("nan")
        return "\n".join([
            f"{self.experiment} (seed {self.master_seed})",
            head, mean, std,
            f"baseline accuracy {base:.2f}",
        ])


def _lstm_config(n: int, m: int, overrides: dict | None) -> RnnConfig:
    return replace(RnnConfig(input_size=n, output_size=m), **(overrides or {}))


def _toy_job(args):
    seed, r, sizes, overrides = args
    rng = job_rng(seed, 0, r)
    scen = gen_toy(rng)
    tr, va, te = (interleave(scen.models, scen.sched, T, rng) for T in sizes)
    hmm = build_ahmm(scen.models, scen.sched)
    _, users, _ = viterbi(hmm, te.requests)
    vit_acc = accuracy(te.users, users)
    cfg = _lstm_config(scen.n, scen.m, overrides)
    result = train(LabeledDataset(tr, va, te), cfg, rng)
    lstm_acc = accuracy(te.users, predict_users(result.params, cfg, te.requests))
    base = baseline_majority(scen.sched)
    base_acc = accuracy(te.users, base(te.requests))
    log.info("toy realization %d: viterbi %.3f lstm %.3f", r, vit_acc, lstm_acc)
    return vit_acc, lstm_acc, base_acc


def _pool_map(fn, jobs, n_jobs: int):
    if n_jobs <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as ex:
        return list(ex.map(fn, jobs))


def run_toy(
    seed: int,
    realizations: int = 5,
    sizes=TOY_SIZES,
    lstm_overrides: dict | None = None,
    n_jobs: int = 1,
) -> ExperimentReport:
    """Viterbi (true parameters) versus LSTM on the two-page toy problem.

    Both methods are scored on the same held-out sequence of each realization.
    """
    start = time.perf_counter()
    jobs = [(seed, r, tuple(sizes), lstm_overrides) for r in range(realizations)]
    out = _pool_map(_toy_job, jobs, n_jobs)
    keys = [[0, r] for r in range(realizations)]
    base_accs = [o[2] for o in out]
    rows = [
        ResultRow("Viterbi", [o[0] for o in out], NOMINAL_BASELINE["shares"], base_accs, keys),
        ResultRow("LSTM", [o[1] for o in out], NOMINAL_BASELINE["shares"], base_accs, keys),
    ]
    settings = {"realizations": realizations, "sizes": list(sizes), "lstm": lstm_overrides or {}}
    report = ExperimentReport("toy", seed, settings, rows)
    report.wall_clock = time.perf_counter() - start
    log.info("toy experiment finished in %.1fs", report.wall_clock)
    return report


def _case_job(args):
    seed, case, r, mode, sizes, n_test, test_len, overrides = args
    rng = job_rng(seed, case, r)
    scen = gen_case(CaseSpec(case, mode=mode), rng)
    tr, va = (interleave(scen.models, scen.sched, T, rng) for T in sizes)
    empty = interleave(scen.models, scen.sched, 0, rng)
    cfg = _lstm_config(scen.n, scen.m, overrides)
    result = train(LabeledDataset(tr, va, empty), cfg, rng)
    base = baseline_majority(scen.sched)
    accs, base_accs = [], []
    for _ in range(n_test):
        te = interleave(scen.models, scen.sched, test_len, rng)
        accs.append(accuracy(te.users, predict_users(result.params, cfg, te.requests)))
        base_accs.append(accuracy(te.users, base(te.requests)))
    log.info("case %d realization %d (%s): %.3f after %d epochs",
             case, r, mode, np.mean(accs), len(result.log))
    return float(np.mean(accs)), float(np.mean(base_accs))


def run_cases(
    mode: str,
    seed: int,
    scale: str = "desk",
    cases=range(1, 8),
    realizations: int = 5,
    n_test: int = 100,
    test_len: int = 100,
    lstm_overrides: dict | None = None,
    n_jobs: int = 1,
) -> ExperimentReport:
    """LSTM accuracy on the sparsity cases (n=20, a=10, q=5).

    Each realization trains one network and scores it on ``n_test`` fresh
    sequences of ``test_len`` requests; its accuracy is their mean.
    """
    if mode not in NOMINAL_BASELINE:
        raise ValueError(f"unknown mode {mode!r}")
    if scale not in CASE_SIZES:
        raise ValueError(f"unknown scale {scale!r}")
    start = time.perf_counter()
    cases = list(cases)
    sizes = CASE_SIZES[scale]
    jobs = [
        (seed, c, r, mode, sizes, n_test, test_len, lstm_overrides)
        for c in cases
        for r in range(realizations)
    ]
    out = _pool_map(_case_job, jobs, n_jobs)
    rows = []
    for i, c in enumerate(cases):
        chunk = out[i * realizations : (i + 1) * realizations]
        rows.append(ResultRow(
            str(c),
            [o[0] for o in chunk],
            NOMINAL_BASELINE[mode],
            [o[1] for o in chunk],
            [[c, r] for r in range(realizations)],
        ))
    settings = {
        "mode": mode, "scale": scale, "cases": cases, "realizations": realizations,
        "train_val_sizes": list(sizes), "n_test": n_test, "test_len": test_len,
        "n": 20, "a": 10, "q": 5, "lstm": lstm_overrides or {},
    }
    report = ExperimentReport(f"cases-{mode}", seed, settings, rows)
    report.wall_clock = time.perf_counter() - start
    log.info("cases (%s, %s) finished in %.1fs", mode, scale, report.wall_clock)
    return report
