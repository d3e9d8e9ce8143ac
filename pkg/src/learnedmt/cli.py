"""Command-line entry point: ``learnedmt <command> ...``.

Exit status is 0 on success, 1 on invalid data/config/checkpoint input and 2
on usage errors.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import checkpoint, data
from .ablation import run_source_ablation
from .config import ConfigError, RunConfig, load_config
from .estimator import Estimator
from .human_scores import DARR_THRESHOLD, darr_convert, hter_dataset, mqm_dataset
from .metrics import TOP_N, evaluate_metric, lookup_metric, system_ranking_from_da
from .ranker import Ranker

log = logging.getLogger("learnedmt")


class UsageError(Exception):
    pass


def _config(args) -> RunConfig:
    return load_config(args.config)


def _path(given: str | None, fallback: str | None, flag: str) -> str:
    path = given or fallback
    if path is None:
        raise UsageError(f"{flag} is required (or set it in --config)")
    return path


def cmd_train_estimator(args) -> None:
    cfg = _config(args)
    tuples = data.read_eval_tuples(_path(args.data, cfg.train_path, "--data"))
    model = Estimator(cfg.estimator_config())
    model.train(tuples)
    checkpoint.save(model, args.out)


def cmd_train_ranker(args) -> None:
    cfg = _config(args)
    pairs = data.read_darr(_path(args.data, cfg.train_path, "--data"))
    model = Ranker(cfg.ranker_config())
    model.train(pairs)
    checkpoint.save(model, args.out)


def cmd_score(args) -> None:
    model = checkpoint.load(args.model)
    triples = data.read_triples(args.data)
    if args.reference_only:
        if not isinstance(model, Ranker):
            raise data.DataError("--reference-only applies to ranker checkpoints")
        scores = model.score_reference_only([(h, r) for _, h, r in triples], args.threads)
    else:
        scores = model.predict(triples, args.threads)
    data.write_scores(args.out, (data.ScoredTriple(*t, s) for t, s in zip(triples, scores)))


def cmd_hter(args) -> None:
    tuples = hter_dataset(data.read_pe_tuples(args.data), shifts=not args.no_shifts)
    data.write_eval_tuples(args.out, tuples)


def cmd_mqm_score(args) -> None:
    tuples = mqm_dataset(data.read_mqm(args.data))
    data.write_eval_tuples(args.out, tuples)
    meta = {"sentence_length": "hypothesis whitespace token count",
            "normalization": "max(0, mqm / 100)"}
    Path(str(args.out) + ".meta.json").write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")


def cmd_darr_convert(args) -> None:
    pairs = darr_convert(data.read_da(args.data), args.threshold)
    data.write_darr(args.out, pairs)


def _top_n(text: str | None) -> tuple[int, ...]:
    if not text:
        return ()
    try:
        return tuple(int(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad --top-n list {text!r}") from None


def cmd_evaluate(args) -> None:
    table = {(s.src, s.hyp, s.ref): s.score for s in data.read_scores(args.scores)}
    darr = data.read_darr(args.darr)
    rankings = system_ranking_from_da(data.read_da(args.da)) if args.da else None
    report = evaluate_metric(lookup_metric(table), darr, args.top_n, rankings)
    report.write_tsv(args.out)
    print(report.format_table())


def cmd_ablate_source(args) -> None:
    cfg = _config(args)
    train = data.read_darr(_path(args.train, cfg.train_path, "--train"))
    test = data.read_darr(_path(args.test, cfg.test_path, "--test"))
    result = run_source_ablation(train, test, cfg.ranker_config(), threads=args.threads)
    result.write_tsv(args.out)
    for lp, subset, _, _, tau, tau_ref, delta in result.records():
        print(f"{lp}\t{subset}\tref-only={tau_ref:.4f}\tfull={tau:.4f}\tdelta={delta:+.4f}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--threads", type=int, default=1, help="scoring threads")
    common.add_argument("--log-level", default="WARNING",
                        choices=["DEBUG", "INFO", "WARNING", "ERROR"])

    parser = argparse.ArgumentParser(prog="learnedmt", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train-estimator", parents=[common], help="train a regression estimator")
    p.add_argument("--config")
    p.add_argument("--data", help="eval-tuple TSV (src hyp ref score)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_estimator)

    p = sub.add_parser("train-ranker", parents=[common], help="train a triplet ranker")
    p.add_argument("--config")
    p.add_argument("--data", help="DARR TSV")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train_ranker)

    p = sub.add_parser("score", parents=[common], help="score segments with a checkpoint")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True, help="triples, eval tuples or DARR TSV")
    p.add_argument("--out", required=True)
    p.add_argument("--reference-only", action="store_true")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("hter", parents=[common], help="HTER targets from post-edits")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--no-shifts", action="store_true")
    p.set_defaults(func=cmd_hter)

    p = sub.add_parser("mqm-score", parents=[common], help="normalised MQM targets")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_mqm_score)

    p = sub.add_parser("darr-convert", parents=[common], help="DA scores to relative ranks")
    p.add_argument("--data", required=True)
    p.add_argument("--threshold", type=float, default=DARR_THRESHOLD)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_darr_convert)

    p = sub.add_parser("evaluate", parents=[common], help="Kendall tau-like report")
    p.add_argument("--scores", required=True)
    p.add_argument("--darr", required=True)
    p.add_argument("--da", help="DA TSV used to rank systems for --top-n")
    p.add_argument("--top-n", type=_top_n, default=(), nargs="?", const=",".join(map(str, TOP_N)))
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate-source", parents=[common], help="reference-only vs full ranker")
    p.add_argument("--config")
    p.add_argument("--train")
    p.add_argument("--test")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_ablate_source)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (data.DataError, ConfigError, checkpoint.CheckpointError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
