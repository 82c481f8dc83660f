"""Command-line harness: single-article generation, sweeps, merges, debugging.

Subcommands:
  generate      decode one article and print the summary with its scores
  sweep         run a full (method x strength x decoding) experiment to CSV
  merge         join externally computed quality metrics into a report CSV
  expand-topic  print the vocabulary token set a topic expands to

Exit codes: 0 success, 1 usage or configuration error, 2 sweep completed
with per-row errors, 3 total failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import fixtures
from .decoding import GenerationConfig, generate
from .experiment import (
    Condition,
    CorpusFormatError,
    ExperimentConfig,
    MergeConflictError,
    load_corpus,
    merge_external_scores,
    run_sweep,
)
from .models import ToyModelFormatError, load_toy_model
from .reweight import ReweightConfig, build_chain
from .scoring import report_row, score_summary
from .topics import TopicModelFormatError, load_topic_model, topic_token_set

METHOD_NAMES = {
    "none": "none",
    "shift": "constant_shift",
    "scale": "factor_scaling",
    "threshold": "threshold_selection",
}

DEFAULTS = {
    "method": "none",
    "c": 0.0,
    "alpha": 1.0,
    "theta": 0.005,
    "beta": 0.0,
    "strategy": "greedy",
    "beams": 4,
    "top_k": 50,
    "top_p": 0.95,
    "min_tokens": 80,
    "max_tokens": 90,
    "seed": 0,
    "top_n": 25,
    "steered": "both",
    "limit": None,
}


class _Parser(argparse.ArgumentParser):
    """ArgumentParser that exits with code 1 on usage errors."""

    def error(self, message: str) -> None:  # type: ignore[override]
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _add_io_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--corpus", type=Path, default=None, help="corpus JSONL (default: shipped fixture)")
    parser.add_argument("--topics-file", type=Path, default=None, help="topic model JSON (default: shipped fixture)")
    parser.add_argument("--model", type=Path, default=None, help="toy model JSON (default: shipped fixture)")


def _add_condition_flags(parser: argparse.ArgumentParser, use_none_default: bool) -> None:
    d = (lambda _k: None) if use_none_default else DEFAULTS.get
    parser.add_argument("--method", choices=sorted(METHOD_NAMES), default=d("method"))
    parser.add_argument("--c", type=float, default=d("c"), help="shift constant")
    parser.add_argument("--alpha", type=float, default=d("alpha"), help="scaling factor")
    parser.add_argument("--theta", type=float, default=d("theta"), help="probability threshold")
    parser.add_argument("--beta", type=float, default=d("beta"), help="encouragement factor")
    parser.add_argument("--strategy", choices=("greedy", "sample", "beam"), default=d("strategy"))
    parser.add_argument("--beams", type=int, default=d("beams"))
    parser.add_argument("--top-k", type=int, default=d("top_k"))
    parser.add_argument("--top-p", type=float, default=d("top_p"))
    parser.add_argument("--min-tokens", type=int, default=d("min_tokens"))
    parser.add_argument("--max-tokens", type=int, default=d("max_tokens"))
    parser.add_argument("--seed", type=int, default=d("seed"))
    parser.add_argument("--top-n", type=int, default=d("top_n"), help="topic words to expand")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="topicsteer", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_gen = sub.add_parser("generate", help="decode one article and print summary + scores")
    _add_io_flags(p_gen)
    _add_condition_flags(p_gen, use_none_default=False)
    p_gen.add_argument("--article-id", default=None, help="article to use (default: first in corpus)")
    p_gen.add_argument("--topic", type=int, default=None, help="steered topic id (default: the article's tid1)")

    p_sweep = sub.add_parser("sweep", help="run a full experiment")
    _add_io_flags(p_sweep)
    _add_condition_flags(p_sweep, use_none_default=True)
    p_sweep.add_argument("--config", type=Path, default=None, help="experiment config JSON")
    p_sweep.add_argument("--out-dir", type=Path, default=None, help="output directory (default: ./sweep-out)")
    p_sweep.add_argument("--limit", type=int, default=None, help="articles limit")
    p_sweep.add_argument("--steered", choices=("tid1", "tid2", "both"), default=None)
    p_sweep.add_argument("--label", default=None, help="label for the flag-defined condition")

    p_merge = sub.add_parser("merge", help="join external scores into a report CSV")
    p_merge.add_argument("--report", type=Path, required=True)
    p_merge.add_argument("--external", type=Path, required=True)
    p_merge.add_argument("--out", type=Path, default=None, help="default: <report>.merged.csv")
    p_merge.add_argument("--rejects", type=Path, default=None, help="default: <report>.rejects.csv")

    p_expand = sub.add_parser("expand-topic", help="print a topic's token set")
    _add_io_flags(p_expand)
    p_expand.add_argument("--topic", type=int, required=True)
    p_expand.add_argument("--top-n", type=int, default=DEFAULTS["top_n"])

    return parser


def _fixture_default(value: Path | None, fallback: Path) -> Path:
    return value if value is not None else fallback


def _reweight_from(values: dict) -> ReweightConfig:
    return ReweightConfig(
        method=METHOD_NAMES[values["method"]],
        c=float(values["c"]),
        alpha=float(values["alpha"]),
        theta=float(values["theta"]),
        beta=float(values["beta"]),
    )


def _generation_from(values: dict, seed: int | None = None) -> GenerationConfig:
    return GenerationConfig(
        strategy=values["strategy"],
        top_k=int(values["top_k"]),
        top_p=float(values["top_p"]),
        num_beams=int(values["beams"]),
        max_new_tokens=int(values["max_tokens"]),
        min_new_tokens=int(values["min_tokens"]),
        seed=int(values["seed"] if seed is None else seed),
    )


def cmd_generate(args: argparse.Namespace) -> int:
    corpus = load_corpus(_fixture_default(args.corpus, fixtures.corpus_path()))
    topic_model = load_topic_model(_fixture_default(args.topics_file, fixtures.topic_model_path()))
    model = load_toy_model(_fixture_default(args.model, fixtures.toy_model_path()))
    if args.article_id is None:
        sample = corpus[0]
    else:
        matches = [s for s in corpus if s.article_id == args.article_id]
        if not matches:
            raise CorpusFormatError(f"article id {args.article_id!r} not found in corpus")
        sample = matches[0]
    steered_tid = sample.tid1 if args.topic is None else args.topic
    if steered_tid not in (sample.tid1, sample.tid2):
        raise CorpusFormatError(
            f"--topic {steered_tid} is not one of article {sample.article_id!r}'s topics "
            f"({sample.tid1}, {sample.tid2})"
        )
    values = vars(args)
    reweight = _reweight_from(values)
    gen_config = _generation_from(values)
    token_set = topic_token_set(steered_tid, topic_model, model.vocabulary, args.top_n)
    chain = build_chain(reweight, token_set)
    prefix = [model.vocabulary.bos_id, *model.vocabulary.encode_words(sample.article)]
    result = generate(model, prefix, chain, gen_config)
    condition = args.method if args.method != "none" else "baseline"
    report = score_summary(
        result,
        article_id=sample.article_id,
        condition=condition,
        steered_tid=steered_tid,
        topics=(sample.tid1, sample.tid2),
        references=(sample.ref1, sample.ref2),
        model=topic_model,
        vocab=model.vocabulary,
        top_n=args.top_n,
        token_sets={steered_tid: token_set},
    )
    record = result.to_record(model.vocabulary, gen_config)
    record["article_id"] = sample.article_id
    record["condition"] = condition
    record["steered_tid"] = steered_tid
    record["reweight"] = {"method": reweight.method, "c": reweight.c, "alpha": reweight.alpha,
                          "theta": reweight.theta, "beta": reweight.beta}
    record["scores"] = {k: v for k, v in report_row(report).items()
                        if k not in ("article_id", "condition", "steered_tid")}
    print(json.dumps(record, indent=2))
    return 0


def _resolve(flag_value, file_config: dict, key: str):
    if flag_value is not None:
        return flag_value
    if key in file_config:
        return file_config[key]
    return DEFAULTS.get(key)


def _conditions_from_config(entries: list, base: dict) -> list[Condition]:
    conditions = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise ValueError(f"conditions[{i}] must be an object")
        values = dict(base)
        values.update(entry)
        method = values["method"]
        if method not in METHOD_NAMES:
            raise ValueError(f"conditions[{i}]: unknown method {method!r}")
        label = str(values.get("label") or (method if method != "none" else "baseline"))
        conditions.append(
            Condition(label=label, reweight=_reweight_from(values), generation=_generation_from(values))
        )
    return conditions


def cmd_sweep(args: argparse.Namespace) -> int:
    file_config: dict = {}
    if args.config is not None:
        file_config = json.loads(Path(args.config).read_text(encoding="utf-8"))
        if not isinstance(file_config, dict):
            raise ValueError(f"{args.config}: config must be a JSON object")

    def resolve(key: str, flag=None):
        return _resolve(flag if flag is not None else getattr(args, key, None), file_config, key)

    base = {key: resolve(key) for key in
            ("method", "c", "alpha", "theta", "beta", "strategy", "beams",
             "top_k", "top_p", "min_tokens", "max_tokens", "seed", "top_n")}
    if base["method"] not in METHOD_NAMES:
        raise ValueError(f"unknown method {base['method']!r}")

    if "conditions" in file_config:
        conditions = _conditions_from_config(file_config["conditions"], base)
    else:
        label = args.label or file_config.get("label") or \
            (base["method"] if base["method"] != "none" else "baseline")
        conditions = [Condition(label=str(label), reweight=_reweight_from(base),
                                generation=_generation_from(base))]

    def path_of(key: str, flag_value, fallback: Path) -> Path:
        if flag_value is not None:
            return Path(flag_value)
        if key in file_config:
            return Path(file_config[key])
        return fallback

    config = ExperimentConfig(
        corpus_path=path_of("corpus", args.corpus, fixtures.corpus_path()),
        topics_path=path_of("topics_file", args.topics_file, fixtures.topic_model_path()),
        model_path=path_of("model", args.model, fixtures.toy_model_path()),
        out_dir=path_of("out_dir", args.out_dir, Path("sweep-out")),
        conditions=tuple(conditions),
        limit=_resolve(args.limit, file_config, "limit"),
        steered_policy=_resolve(args.steered, file_config, "steered"),
        master_seed=int(base["seed"]),
        top_n=int(base["top_n"]),
    )
    result = run_sweep(config)
    print(f"report:     {result.report_path}")
    print(f"aggregates: {result.aggregate_path}")
    print(f"manifest:   {result.manifest_path}")
    print(f"rows: {result.rows_total} ({result.rows_ok} ok, {result.rows_error} failed)")
    if result.rows_total and result.rows_ok == 0:
        return 3
    if result.rows_error:
        return 2
    return 0


def cmd_merge(args: argparse.Namespace) -> int:
    out = args.out if args.out is not None else args.report.with_suffix(".merged.csv")
    rejects = args.rejects if args.rejects is not None else args.report.with_suffix(".rejects.csv")
    result = merge_external_scores(args.report, args.external, out, rejects)
    print(f"merged:  {result.out_path} ({result.rows} rows, metrics: {', '.join(result.metrics) or 'none'})")
    print(f"rejects: {result.rejects_path} ({result.rejected_rows} rows)")
    return 0


def cmd_expand_topic(args: argparse.Namespace) -> int:
    topic_model = load_topic_model(_fixture_default(args.topics_file, fixtures.topic_model_path()))
    model = load_toy_model(_fixture_default(args.model, fixtures.toy_model_path()))
    token_set = topic_token_set(args.topic, topic_model, model.vocabulary, args.top_n)
    print(f"topic {args.topic}: {len(token_set)} tokens from top {args.top_n} words")
    for tid in token_set.sorted_ids():
        print(f"{tid}\t{model.vocabulary.tokens[tid]!r}\t{token_set.provenance[tid]}")
    return 0


_COMMANDS = {
    "generate": cmd_generate,
    "sweep": cmd_sweep,
    "merge": cmd_merge,
    "expand-topic": cmd_expand_topic,
}

_CONFIG_ERRORS = (
    CorpusFormatError,
    ToyModelFormatError,
    TopicModelFormatError,
    FileNotFoundError,
    json.JSONDecodeError,
    ValueError,
    KeyError,
)


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse exits for usage errors and --help
        return exc.code if isinstance(exc.code, int) else 1
    try:
        return _COMMANDS[args.command](args)
    except MergeConflictError as exc:
        print(f"topicsteer: merge failed: {exc}", file=sys.stderr)
        return 3
    except _CONFIG_ERRORS as exc:
        print(f"topicsteer: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # total failure
        print(f"topicsteer: unexpected failure: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
