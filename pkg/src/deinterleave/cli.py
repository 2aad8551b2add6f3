"""Command line entry point: ``deinterleave <command> --seed S --out DIR``.

Commands
--------
generate          scenario parameters + train/valid/test dataset files
viterbi           decode a dataset with the exact augmented-HMM Viterbi
train             fit an RNN/LSTM labeler, write a checkpoint
predict           label a dataset with a checkpoint
reproduce-toy     Viterbi vs LSTM table on the toy problem
reproduce-cases   LSTM table over the seven sparsity cases

Every output file depends only on the inputs and ``--seed``; timings go to the
log on stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from deinterleave import io
from deinterleave.ahmm import build_ahmm, viterbi
from deinterleave.core import make_rng
from deinterleave.experiments import CASE_SIZES, TOY_SIZES, run_cases, run_toy
from deinterleave.interleaver import LabeledSequence, interleave
from deinterleave.metrics import accuracy
from deinterleave.rnn import LabeledDataset, RnnConfig, predict_users, train
from deinterleave.synthgen import CaseSpec, gen_case, gen_toy

log = logging.getLogger("deinterleave")


def _sizes(text: str) -> tuple[int, int, int]:
    parts = tuple(int(x) for x in text.split(","))
    if len(parts) != 3 or min(parts) < 0:
        raise argparse.ArgumentTypeError("expected three non-negative sizes: TRAIN,VALID,TEST")
    return parts


def _u64(text: str) -> int:
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _write_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=1) + "\n", encoding="utf-8", newline="\n")


def _write_predictions(seq: LabeledSequence, users, out: Path, extra: dict) -> dict:
    pred = LabeledSequence(seq.requests, users, seq.m, seq.n, seq.q)
    io.write_dataset(pred, out / "predictions.tsv")
    metrics = {"T": len(seq), **extra}
    if len(seq):
        metrics["accuracy"] = accuracy(seq.users, users)
    _write_json(metrics, out / "metrics.json")
    return metrics


def cmd_generate(args) -> None:
    rng = make_rng(args.seed)
    if args.toy:
        scen = gen_toy(rng)
        sizes = args.sizes or TOY_SIZES
    else:
        scen = gen_case(CaseSpec(args.case, n=args.n, a=args.a, q=args.q, mode=args.mode), rng)
        sizes = args.sizes or CASE_SIZES["desk"] + (2000,)
    io.save_params(scen, args.out / "params.json")
    for name, T in zip(("train", "valid", "test"), sizes):
        seq = interleave(scen.models, scen.sched, T, rng)
        if args.withhold_hidden:
            seq = LabeledSequence(seq.requests, seq.users, seq.m, seq.n, seq.q)
        io.write_dataset(seq, args.out / f"{name}.tsv")


def cmd_viterbi(args) -> None:
    scen = io.load_params(args.params)
    seq = io.read_dataset(args.data)
    hmm = build_ahmm(scen.models, scen.sched, limit=args.limit)
    _, users, log_prob = viterbi(hmm, seq.requests)
    m = _write_predictions(seq, users, args.out, {"log_prob": log_prob, "states": hmm.n_states})
    log.info("viterbi accuracy %.4f", m.get("accuracy", float("nan")))


def cmd_train(args) -> None:
    tr = io.read_dataset(args.train)
    va = io.read_dataset(args.valid) if args.valid else LabeledSequence([], [], tr.m, tr.n, tr.q)
    if args.params:
        scen = io.load_params(args.params)
        if (scen.m, scen.n) != (tr.m, tr.n):
            raise SystemExit("params and dataset disagree on (m, n)")
    cfg = RnnConfig(
        input_size=tr.n, output_size=tr.m, cell=args.cell, hidden_size=args.hidden,
        bptt_window=args.window, learning_rate=args.lr, max_epochs=args.max_epochs,
        patience=args.patience,
    )
    empty = LabeledSequence([], [], tr.m, tr.n, tr.q)
    result = train(LabeledDataset(tr, va, empty), cfg, make_rng(args.seed))
    io.save_checkpoint(result.params, cfg, args.out / "checkpoint.json",
                       extra={"best_epoch": result.best_epoch, "seed": args.seed})
    _write_json({"best_epoch": result.best_epoch,
                 "best_val_accuracy": result.best_val_accuracy,
                 "epochs": result.log}, args.out / "train_log.json")
    log.info("best epoch %d, validation accuracy %.4f", result.best_epoch, result.best_val_accuracy)


def cmd_predict(args) -> None:
    params, cfg = io.load_checkpoint(args.checkpoint)
    seq = io.read_dataset(args.data)
    if (seq.n, seq.m) != (cfg.input_size, cfg.output_size):
        raise SystemExit("checkpoint and dataset disagree on (n, m)")
    users = predict_users(params, cfg, seq.requests)
    m = _write_predictions(seq, users, args.out, {})
    log.info("accuracy %.4f", m.get("accuracy", float("nan")))


def _overrides(args) -> dict:
    return {"max_epochs": args.max_epochs} if args.max_epochs else {}


def cmd_reproduce_toy(args) -> None:
    report = run_toy(args.seed, realizations=args.realizations,
                     lstm_overrides=_overrides(args), n_jobs=args.jobs)
    io.save_report(report, args.out)
    print(report.render())


def cmd_reproduce_cases(args) -> None:
    report = run_cases(args.mode, args.seed, scale=args.scale, cases=args.cases,
                       realizations=args.realizations, lstm_overrides=_overrides(args),
                       n_jobs=args.jobs)
    io.save_report(report, args.out)
    print(report.render())


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="deinterleave", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def command(name, fn, help):
        sp = sub.add_parser(name, help=help)
        sp.add_argument("--seed", type=_u64, default=0)
        sp.add_argument("--out", type=Path, required=True)
        sp.set_defaults(func=fn)
        return sp

    g = command("generate", cmd_generate, "generate parameters and datasets")
    which = g.add_mutually_exclusive_group(required=True)
    which.add_argument("--toy", action="store_true")
    which.add_argument("--case", type=int, choices=range(1, 8))
    g.add_argument("--mode", choices=("shares", "matrix"), default="shares")
    g.add_argument("--n", type=int, default=20)
    g.add_argument("--a", type=int, default=10)
    g.add_argument("--q", type=int, default=5)
    g.add_argument("--sizes", type=_sizes, help="TRAIN,VALID,TEST lengths")
    g.add_argument("--withhold-hidden", action="store_true",
                   help="write '-' for the hidden page/duration columns")

    v = command("viterbi", cmd_viterbi, "exact Viterbi decoding")
    v.add_argument("--params", type=Path, required=True)
    v.add_argument("--data", type=Path, required=True)
    v.add_argument("--limit", type=int, default=100_000, help="maximum augmented state count")

    t = command("train", cmd_train, "train an RNN/LSTM labeler")
    t.add_argument("--train", type=Path, required=True)
    t.add_argument("--valid", type=Path)
    t.add_argument("--params", type=Path)
    t.add_argument("--cell", choices=("simple", "lstm"), default="lstm")
    t.add_argument("--hidden", type=int, default=64)
    t.add_argument("--window", type=int, default=50)
    t.add_argument("--lr", type=float, default=1e-3)
    t.add_argument("--max-epochs", type=int, default=50)
    t.add_argument("--patience", type=int, default=5)

    pr = command("predict", cmd_predict, "label a dataset with a checkpoint")
    pr.add_argument("--checkpoint", type=Path, required=True)
    pr.add_argument("--data", type=Path, required=True)

    for name, fn in (("reproduce-toy", cmd_reproduce_toy), ("reproduce-cases", cmd_reproduce_cases)):
        r = command(name, fn, f"{name.split('-')[1]} accuracy table")
        r.add_argument("--realizations", type=int, default=5)
        r.add_argument("--max-epochs", type=int, help="override the LSTM epoch cap")
        r.add_argument("--jobs", type=int, default=1, help="worker processes")
        if name == "reproduce-cases":
            r.add_argument("--mode", choices=("shares", "matrix"), required=True)
            r.add_argument("--scale", choices=("desk", "full"), default="desk")
            r.add_argument("--cases", type=int, nargs="+", default=list(range(1, 8)),
                           choices=range(1, 8))
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    args.out.mkdir(parents=True, exist_ok=True)
    try:
        args.func(args)
    except io.FormatError as exc:
        log.error("%s", exc)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
