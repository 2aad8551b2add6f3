"""File formats: labeled datasets, scenario parameters, model checkpoints.

Dataset (UTF-8 text)::

    #deinterleave-v1 m=<m> n=<n> q=<q> T=<T>
    <t>\t<user>\t<request>\t<page>\t<duration>      (one line per slot, t from 0)

``page`` and ``duration`` are ``-`` when the hidden labels are withheld.

Parameters (JSON)::

    {"m", "n", "q", "P": [m x n x n], "pw": [n x q] or [m x n x q],
     "O": [m x n x n], "sched": {"type": "shares" | "matrix", "values": [...]}}

Floats are written with Python's shortest round-trip repr, so every value
reads back bit-identically.
"""
from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np

from deinterleave.core import UserModel
from deinterleave.interleaver import LabeledSequence, TurnScheduler
from deinterleave.rnn import PARAM_ORDER, RnnConfig, param_shapes
from deinterleave.synthgen import ScenarioParams

DATASET_MAGIC = "#deinterleave-v1"
CHECKPOINT_FORMAT = "deinterleave-checkpoint"
CHECKPOINT_VERSION = 1
_HEADER = re.compile(r"^#deinterleave-v1 m=(\d+) n=(\d+) q=(\d+) T=(\d+)$")


class FormatError(ValueError):
    """Malformed input file; the message carries the line (and column)."""


def write_dataset(seq: LabeledSequence, path) -> None:
    lines = [f"{DATASET_MAGIC} m={seq.m} n={seq.n} q={seq.q} T={len(seq)}"]
    hidden = seq.has_hidden
    for t in range(len(seq)):
        tail = f"{seq.pages[t]}\t{seq.durations[t]}" if hidden else "-\t-"
        lines.append(f"{t}\t{seq.users[t]}\t{seq.requests[t]}\t{tail}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def read_dataset(path) -> LabeledSequence:
    text = Path(path).read_text(encoding="utf-8")
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise FormatError(f"{path}: line 1: missing header")
    match = _HEADER.match(lines[0])
    if not match:
        raise FormatError(f"{path}: line 1: bad header {lines[0]!r}")
    m, n, q, T = map(int, match.groups())
    body = lines[1:]
    if len(body) != T:
        raise FormatError(f"{path}: header declares T={T} but found {len(body)} records")
    cols = np.zeros((T, 5), dtype=np.int64)
    hidden_flags = []
    for t, line in enumerate(body):
        lineno = t + 2
        fields = line.split("\t")
        if len(fields) != 5:
            raise FormatError(f"{path}: line {lineno}: expected 5 tab-separated fields, got {len(fields)}")
        hidden_flags.append(fields[3] == "-" and fields[4] == "-")
        for j, f in enumerate(fields):
            if j >= 3 and hidden_flags[-1]:
                continue
            try:
                cols[t, j] = int(f)
            except ValueError:
                raise FormatError(f"{path}: line {lineno}: field {j + 1} is not an integer: {f!r}") from None
        if cols[t, 0] != t:
            raise FormatError(f"{path}: line {lineno}: expected slot index {t}, got {cols[t, 0]}")
        if not 0 <= cols[t, 1] < m or not 0 <= cols[t, 2] < n:
            raise FormatError(f"{path}: line {lineno}: user or request out of range")
        if not hidden_flags[-1] and not (0 <= cols[t, 3] < n and 1 <= cols[t, 4] <= q):
            raise FormatError(f"{path}: line {lineno}: page or duration out of range")
    if hidden_flags and any(hidden_flags) and not all(hidden_flags):
        raise FormatError(f"{path}: hidden columns must be withheld on every line or none")
    withheld = all(hidden_flags)
    return LabeledSequence(
        cols[:, 2], cols[:, 1], m, n, q,
        None if withheld else cols[:, 3],
        None if withheld else cols[:, 4],
    )


def params_to_dict(scenario: ScenarioParams) -> dict:
    pws = [mod.duration_dist for mod in scenario.models]
    shared_pw = all(np.array_equal(pws[0], p) for p in pws[1:])
    sched = scenario.sched
    return {
        "m": scenario.m,
        "n": scenario.n,
        "q": scenario.q,
        "P": [mod.transition.tolist() for mod in scenario.models],
        "pw": pws[0].tolist() if shared_pw else [p.tolist() for p in pws],
        "O": [mod.output.tolist() for mod in scenario.models],
        "sched": {"type": sched.mode, "values": sched.values.tolist()},
    }


def params_from_dict(d: dict) -> ScenarioParams:
    try:
        m, n, q = int(d["m"]), int(d["n"]), int(d["q"])
        P = np.array(d["P"], dtype=float)
        O = np.array(d["O"], dtype=float)
        pw = np.array(d["pw"], dtype=float)
        if pw.ndim == 2:
            pw = np.broadcast_to(pw, (m,) + pw.shape)
        if P.shape != (m, n, n) or O.shape != (m, n, n) or pw.shape != (m, n, q):
            raise FormatError(
                f"array shapes P{P.shape} O{O.shape} pw{pw.shape} do not match m={m} n={n} q={q}"
            )
        models = [UserModel(P[u], pw[u], O[u]) for u in range(m)]
        sched = TurnScheduler(d["sched"]["type"], d["sched"]["values"])
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"invalid parameters: {exc}") from exc
    if sched.m != m:
        raise FormatError(f"scheduler is for {sched.m} users, expected {m}")
    return ScenarioParams(models, sched)


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _dump_json(obj, path, indent=None) -> None:
    Path(path).write_text(json.dumps(obj, indent=indent) + "\n", encoding="utf-8", newline="\n")


def save_params(scenario: ScenarioParams, path) -> None:
    _dump_json(params_to_dict(scenario), path)


def load_params(path) -> ScenarioParams:
    d = _load_json(path)
    try:
        return params_from_dict(d)
    except FormatError as exc:
        raise FormatError(f"{path}: {exc}") from exc


def save_checkpoint(params, config: RnnConfig, path, extra: dict | None = None) -> None:
    """Config plus flat row-major parameter arrays in ``PARAM_ORDER``."""
    blob = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "config": config.to_dict(),
        "param_order": list(PARAM_ORDER),
        "params": {
            k: {"shape": list(params[k].shape), "data": params[k].reshape(-1).tolist()}
            for k in PARAM_ORDER
        },
    }
    if extra:
        blob["extra"] = extra
    _dump_json(blob, path)


def load_checkpoint(path):
    """Returns ``(params, config)``."""
    blob = _load_json(path)
    if blob.get("format") != CHECKPOINT_FORMAT or blob.get("version") != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: not a version-{CHECKPOINT_VERSION} checkpoint")
    try:
        config = RnnConfig(**blob["config"])
        shapes = param_shapes(config)
        params = {}
        for k in PARAM_ORDER:
            entry = blob["params"][k]
            arr = np.array(entry["data"], dtype=float)
            if tuple(entry["shape"]) != shapes[k] or arr.size != np.prod(shapes[k]):
                raise FormatError(f"{path}: parameter {k} has wrong shape")
            params[k] = arr.reshape(shapes[k])
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{path}: invalid checkpoint: {exc}") from exc
    return params, config


def save_report(report, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    _dump_json(report.to_dict(), directory / "report.json", indent=1)
    (directory / "report.txt").write_text(report.render() + "\n", encoding="utf-8", newline="\n")


def load_report(path):
    from deinterleave.experiments import ExperimentReport

    return ExperimentReport.from_dict(_load_json(path))
