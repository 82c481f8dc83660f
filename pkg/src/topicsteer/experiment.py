"""Sweep harness: run (method x strength x decoding) conditions over a corpus.

Each corpus sample carries two topic ids with one reference summary each.
A sweep generates one summary per (sample, condition, steered topic), scores
it, and writes a report CSV, a per-condition aggregate CSV, and a manifest.
Given the same config and master seed, outputs are byte-identical; only the
manifest carries a timestamp.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from statistics import mean, stdev

from .decoding import GenerationConfig, generate
from .models import load_toy_model
from .reweight import ReweightConfig, build_chain
from .scoring import REPORT_COLUMNS, format_score, report_row, score_summary, write_report_csv
from .topics import TopicTokenSet, load_topic_model, topic_token_set

__all__ = [
    "Condition",
    "CorpusFormatError",
    "CorpusSample",
    "ExperimentConfig",
    "MergeConflictError",
    "MergeResult",
    "SweepResult",
    "derive_seed",
    "load_corpus",
    "merge_external_scores",
    "run_sweep",
]

logger = logging.getLogger(__name__)

STEERED_POLICIES = ("tid1", "tid2", "both")


class CorpusFormatError(ValueError):
    """Raised when a corpus file does not conform to the JSON-lines format."""


class MergeConflictError(ValueError):
    """Raised when external score rows disagree on the same key."""


@dataclass(frozen=True)
class CorpusSample:
    """One article with its two most prominent topics and their references."""

    article_id: str
    article: str
    tid1: int
    tid2: int
    ref1: str
    ref2: str

    def __post_init__(self) -> None:
        if self.tid1 == self.tid2:
            raise ValueError(f"article {self.article_id!r}: tid1 and tid2 must differ")
        if not self.ref1 or not self.ref2:
            raise ValueError(f"article {self.article_id!r}: reference summaries must be non-empty")


def load_corpus(path: str | Path, limit: int | None = None) -> list[CorpusSample]:
    """Load JSON-lines corpus samples in file order, truncated to ``limit``."""
    path = Path(path)
    samples: list[CorpusSample] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                raw = json.loads(line)
            except json.JSONDecodeError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: not valid JSON: {exc}") from exc
            if not isinstance(raw, dict):
                raise CorpusFormatError(f"{path}:{lineno}: each line must be an object")
            missing = {"article_id", "article", "tid1", "tid2", "ref1", "ref2"} - set(raw)
            if missing:
                raise CorpusFormatError(f"{path}:{lineno}: missing keys {sorted(missing)}")
            article_id = str(raw["article_id"])
            if article_id in seen:
                raise CorpusFormatError(f"{path}:{lineno}: duplicate article_id {article_id!r}")
            seen.add(article_id)
            try:
                samples.append(
                    CorpusSample(
                        article_id=article_id,
                        article=str(raw["article"]),
                        tid1=int(raw["tid1"]),
                        tid2=int(raw["tid2"]),
                        ref1=str(raw["ref1"]),
                        ref2=str(raw["ref2"]),
                    )
                )
            except ValueError as exc:
                raise CorpusFormatError(f"{path}:{lineno}: {exc}") from exc
            if limit is not None and len(samples) >= limit:
                break
    return samples


@dataclass(frozen=True)
class Condition:
    """One experimental cell: a reweighting setting plus a decoding setting."""

    label: str
    reweight: ReweightConfig
    generation: GenerationConfig

    def __post_init__(self) -> None:
        if not self.label:
            raise ValueError("condition label must be non-empty")


@dataclass(frozen=True)
class ExperimentConfig:
    corpus_path: Path
    topics_path: Path
    model_path: Path
    out_dir: Path
    conditions: tuple[Condition, ...]
    limit: int | None = None
    steered_policy: str = "both"
    master_seed: int = 0
    top_n: int = 25

    def __post_init__(self) -> None:
        if not self.conditions:
            raise ValueError("at least one condition is required")
        labels = [c.label for c in self.conditions]
        if len(set(labels)) != len(labels):
            raise ValueError("condition labels must be unique")
        if self.steered_policy not in STEERED_POLICIES:
            raise ValueError(f"steered policy must be one of {STEERED_POLICIES}")
        if self.limit is not None and self.limit < 1:
            raise ValueError("articles limit must be >= 1")
        if self.top_n < 1:
            raise ValueError("top_n must be >= 1")

    def to_dict(self) -> dict:
        """Experiment identity for hashing; output location is not part of it."""
        return {
            "corpus_path": str(self.corpus_path),
            "topics_path": str(self.topics_path),
            "model_path": str(self.model_path),
            "conditions": [
                {
                    "label": c.label,
                    "reweight": asdict(c.reweight),
                    "generation": asdict(c.generation),
                }
                for c in self.conditions
            ],
            "limit": self.limit,
            "steered_policy": self.steered_policy,
            "master_seed": self.master_seed,
            "top_n": self.top_n,
        }


def derive_seed(master_seed: int, *parts: object) -> int:
    """Stable per-row seed from the master seed and row identity.

    Uses SHA-256 over the "\\x1f"-joined string forms, keeping determinism
    independent of execution order and platform.
    """
    text = "\x1f".join([str(master_seed), *[str(p) for p in parts]])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


@dataclass(frozen=True)
class SweepResult:
    report_path: Path
    aggregate_path: Path
    manifest_path: Path
    rows_total: int
    rows_ok: int
    rows_error: int


def _steered_tids(sample: CorpusSample, policy: str) -> list[int]:
    if policy == "tid1":
        return [sample.tid1]
    if policy == "tid2":
        return [sample.tid2]
    return [sample.tid1, sample.tid2]


def run_sweep(config: ExperimentConfig) -> SweepResult:
    """Run every (sample, condition, steered topic) cell and write CSV outputs.

    Per-row failures are recorded in the report's "error" column and do not
    stop the sweep. Rows are generated in corpus order, then condition order,
    then steered-topic order, with per-row seeds derived from the master seed
    and the row identity.
    """
    model = load_toy_model(config.model_path)
    topic_model = load_topic_model(config.topics_path)
    corpus = load_corpus(config.corpus_path, config.limit)
    vocab = model.vocabulary

    token_sets: dict[int, TopicTokenSet] = {}

    def get_token_set(tid: int) -> TopicTokenSet:
        if tid not in token_sets:
            token_sets[tid] = topic_token_set(tid, topic_model, vocab, config.top_n)
        return token_sets[tid]

    columns = list(REPORT_COLUMNS) + ["error"]
    rows: list[dict[str, str]] = []
    ok_reports = []
    per_condition: dict[str, int] = {c.label: 0 for c in config.conditions}
    for sample in corpus:
        prefix = [vocab.bos_id, *vocab.encode_words(sample.article)]
        for condition in config.conditions:
            for tid in _steered_tids(sample, config.steered_policy):
                per_condition[condition.label] += 1
                try:
                    chain = build_chain(condition.reweight, get_token_set(tid))
                    gen_config = replace(
                        condition.generation,
                        seed=derive_seed(config.master_seed, sample.article_id, condition.label, tid),
                    )
                    result = generate(model, prefix, chain, gen_config)
                    report = score_summary(
                        result,
                        article_id=sample.article_id,
                        condition=condition.label,
                        steered_tid=tid,
                        topics=(sample.tid1, sample.tid2),
                        references=(sample.ref1, sample.ref2),
                        model=topic_model,
                        vocab=vocab,
                        top_n=config.top_n,
                        token_sets=token_sets,
                    )
                except Exception as exc:  # recorded per row; the sweep continues
                    logger.warning(
                        "row failed: article=%s condition=%s tid=%s: %s",
                        sample.article_id, condition.label, tid, exc,
                    )
                    row = {column: "" for column in columns}
                    row.update(
                        article_id=sample.article_id,
                        condition=condition.label,
                        steered_tid=str(tid),
                        error=" ".join(str(exc).split()),
                    )
                    rows.append(row)
                    continue
                row = report_row(report)
                row["error"] = ""
                rows.append(row)
                ok_reports.append(row)

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    report_path = out_dir / "report.csv"
    aggregate_path = out_dir / "aggregates.csv"
    manifest_path = out_dir / "manifest.json"

    write_report_csv(rows, report_path, columns)
    _write_aggregates(ok_reports, config, aggregate_path)

    rows_error = sum(1 for r in rows if r["error"])
    expected = len(corpus) * len(config.conditions) * (2 if config.steered_policy == "both" else 1)
    manifest = {
        "created_at": datetime.now(timezone.utc).isoformat(),
        "config_hash": hashlib.sha256(
            json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":")).encode("utf-8")
        ).hexdigest(),
        "master_seed": config.master_seed,
        "config": config.to_dict(),
        "samples": len(corpus),
        "rows_expected": expected,
        "rows_written": len(rows),
        "rows_ok": len(rows) - rows_error,
        "rows_error": rows_error,
        "rows_per_condition": per_condition,
    }
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return SweepResult(
        report_path=report_path,
        aggregate_path=aggregate_path,
        manifest_path=manifest_path,
        rows_total=len(rows),
        rows_ok=len(rows) - rows_error,
        rows_error=rows_error,
    )


_METRIC_COLUMNS = ("lemma_t1", "token_t1", "dict_t1", "lemma_t2", "token_t2", "dict_t2", "rouge_l_f1")


def _write_aggregates(ok_rows: list[dict[str, str]], config: ExperimentConfig, path: Path) -> None:
    """Mean and sample standard deviation per (condition, steered topic)."""
    groups: dict[tuple[str, str], list[dict[str, str]]] = {}
    for row in ok_rows:
        groups.setdefault((row["condition"], row["steered_tid"]), []).append(row)
    columns = ["condition", "steered_tid", "n"]
    for metric in _METRIC_COLUMNS:
        columns += [f"{metric}_mean", f"{metric}_std"]
    out_rows = []
    for condition in config.conditions:
        keys = sorted(k for k in groups if k[0] == condition.label)
        for key in keys:
            rows = groups[key]
            record = {"condition": key[0], "steered_tid": key[1], "n": str(len(rows))}
            for metric in _METRIC_COLUMNS:
                values = [float(r[metric]) for r in rows]
                record[f"{metric}_mean"] = format_score(mean(values))
                record[f"{metric}_std"] = format_score(stdev(values) if len(values) > 1 else 0.0)
            out_rows.append(record)
    write_report_csv(out_rows, path, columns)


@dataclass(frozen=True)
class MergeResult:
    out_path: Path
    rejects_path: Path
    rows: int
    matched_values: int
    rejected_rows: int
    metrics: tuple[str, ...]


EXTERNAL_COLUMNS = ("article_id", "condition", "metric", "value")


def merge_external_scores(
    report_path: str | Path,
    external_path: str | Path,
    out_path: str | Path,
    rejects_path: str | Path,
) -> MergeResult:
    """Left-join externally computed metrics onto a report CSV.

    The external file has columns article_id, condition, metric, value; each
    metric becomes a column joined on (article_id, condition). External rows
    whose key matches no report row land in the rejects file. Two external
    rows for the same key and metric with different values are a conflict.
    """
    with open(report_path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        report_columns = list(reader.fieldnames or [])
        report_rows = list(reader)
    if not report_columns:
        raise CorpusFormatError(f"{report_path}: empty report")
    report_keys = {(row["article_id"], row["condition"]) for row in report_rows}

    values: dict[tuple[str, str, str], str] = {}
    rejected: list[dict[str, str]] = []
    with open(external_path, encoding="utf-8", newline="") as handle:
        reader = csv.DictReader(handle)
        missing = set(EXTERNAL_COLUMNS) - set(reader.fieldnames or [])
        if missing:
            raise CorpusFormatError(f"{external_path}: missing columns {sorted(missing)}")
        for row in reader:
            key = (row["article_id"], row["condition"], row["metric"])
            if not row["metric"]:
                raise CorpusFormatError(f"{external_path}: empty metric name for {key}")
            float(row["value"])  # must parse
            if key[:2] not in report_keys:
                rejected.append({c: row[c] for c in EXTERNAL_COLUMNS})
                continue
            if key in values and values[key] != row["value"]:
                raise MergeConflictError(
                    f"conflicting values for article={key[0]} condition={key[1]} metric={key[2]}: "
                    f"{values[key]} vs {row['value']}"
                )
            values[key] = row["value"]

    metrics = tuple(sorted({metric for (_a, _c, metric) in values}))
    merged_columns = report_columns + [m for m in metrics if m not in report_columns]
    merged_rows = []
    for row in report_rows:
        merged = dict(row)
        for metric in metrics:
            value = values.get((row["article_id"], row["condition"], metric))
            if value is not None:
                merged[metric] = value
        merged_rows.append(merged)
    write_report_csv(merged_rows, out_path, merged_columns)
    write_report_csv(rejected, rejects_path, list(EXTERNAL_COLUMNS))
    return MergeResult(
        out_path=Path(out_path),
        rejects_path=Path(rejects_path),
        rows=len(merged_rows),
        matched_values=len(values),
        rejected_rows=len(rejected),
        metrics=metrics,
    )
