"""Topical-focus and quality scoring for generated summaries.

Three topical scores measure how much of a topic's vocabulary a summary
uses (stem overlap, token-id overlap, and per-word topic posterior), and
ROUGE-L F1 measures overlap with a reference summary. Embedding-based
quality metrics are out of native scope; externally computed values ride
along in the report's ``external`` map and the CSV merge step.
"""

from __future__ import annotations

import csv
import logging
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .decoding import GenerationResult
from .models import Vocabulary
from .stemmer import stem
from .topics import TopicModel, TopicTokenSet, topic_token_set

__all__ = [
    "QualityScores",
    "REPORT_COLUMNS",
    "ScoreReport",
    "TopicalScores",
    "dict_topic_score",
    "lemma_topic_score",
    "report_row",
    "rouge_l_f1",
    "score_summary",
    "token_topic_score",
    "tokenize_words",
    "write_report_csv",
]

logger = logging.getLogger(__name__)

_WORD_RE = re.compile(r"[a-z0-9]+")


def tokenize_words(text: str) -> list[str]:
    """Lowercase word extraction; punctuation splits and is dropped."""
    return _WORD_RE.findall(text.lower())


@dataclass(frozen=True)
class TopicalScores:
    """The three topical-focus measures for one summary and one topic."""

    lemma_score: float
    token_score: float
    dict_score: float


@dataclass(frozen=True)
class QualityScores:
    rouge_l_f1: float
    external: Mapping[str, float] = field(default_factory=dict)


@dataclass(frozen=True)
class ScoreReport:
    """All scores for one (article, condition, steered topic) cell."""

    article_id: str
    condition: str
    steered_tid: int
    tid1: int
    tid2: int
    topical_tid1: TopicalScores
    topical_tid2: TopicalScores
    quality: QualityScores
    text: str

    def __post_init__(self) -> None:
        if not self.condition:
            raise ValueError("condition label must be non-empty")
        if self.tid1 == self.tid2:
            raise ValueError("tid1 and tid2 must be distinct")
        if self.steered_tid not in (self.tid1, self.tid2):
            raise ValueError("steered_tid must be tid1 or tid2")


def lemma_topic_score(
    summary: str,
    topic_id: int,
    model: TopicModel,
    top_n: int = 25,
    count_weighted: bool = False,
) -> float:
    """Weight mass of top-n topic words whose stem occurs in the summary.

    Each (word, weight) pair counts its full weight once when the stemmed
    word appears among the summary's stems, normalized by the total weight of
    the top-n words. With count_weighted=True a word instead contributes
    weight times the stem's occurrence frequency in the summary, which keeps
    the score in [0, 1] but rewards repetition.
    """
    pairs = model.top_words(topic_id, top_n)
    total = sum(weight for _word, weight in pairs)
    if total <= 0.0:
        return 0.0
    stems = [stem(w) for w in tokenize_words(summary)]
    if not stems:
        return 0.0
    if count_weighted:
        counts = Counter(stems)
        covered = sum(weight * counts[stem(word)] / len(stems) for word, weight in pairs)
    else:
        present = set(stems)
        covered = sum(weight for word, weight in pairs if stem(word) in present)
    return covered / total


def token_topic_score(summary_ids: Sequence[int], topic_set: TopicTokenSet | Iterable[int]) -> float:
    """Fraction of summary token positions whose id belongs to the topic set."""
    ids = list(summary_ids)
    if not ids:
        return 0.0
    members = getattr(topic_set, "token_ids", topic_set)
    members = members if isinstance(members, (set, frozenset)) else set(members)
    return sum(1 for t in ids if t in members) / len(ids)


def dict_topic_score(summary: str, topic_id: int, model: TopicModel) -> float:
    """Mean posterior of the target topic over in-dictionary summary words.

    For each summary word that appears in any topic's word list, the word's
    weights are normalized over the topics containing it; the score averages
    the target topic's share across those words. Words outside the dictionary
    are skipped; a summary with no in-dictionary words scores 0 (warned).
    """
    if topic_id not in model.topics:
        raise KeyError(f"unknown topic id {topic_id}")
    index = model.word_topic_weights
    shares: list[float] = []
    for word in tokenize_words(summary):
        weights = index.get(word)
        if weights is None:
            continue
        total = sum(weights.values())
        if total <= 0.0:
            continue
        shares.append(weights.get(topic_id, 0.0) / total)
    if not shares:
        logger.warning("dictionary score: no summary word found in the topic model dictionary")
        return 0.0
    return sum(shares) / len(shares)


def _lcs_length(a: Sequence[str], b: Sequence[str]) -> int:
    """Longest common subsequence via a rolling-row DP table."""
    if not a or not b:
        return 0
    previous = [0] * (len(b) + 1)
    for item in a:
        current = [0]
        for j, other in enumerate(b, start=1):
            if item == other:
                current.append(previous[j - 1] + 1)
            else:
                current.append(max(previous[j], current[j - 1]))
        previous = current
    return previous[-1]


def rouge_l_f1(candidate: str, reference: str) -> float:
    """ROUGE-L F1 over stemmed words of the two texts; empty input scores 0."""
    cand = [stem(w) for w in tokenize_words(candidate)]
    ref = [stem(w) for w in tokenize_words(reference)]
    if not cand or not ref:
        return 0.0
    lcs = _lcs_length(cand, ref)
    precision = lcs / len(cand)
    recall = lcs / len(ref)
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def score_summary(
    result: GenerationResult,
    article_id: str,
    condition: str,
    steered_tid: int,
    topics: tuple[int, int],
    references: tuple[str, str],
    model: TopicModel,
    vocab: Vocabulary,
    top_n: int = 25,
    token_sets: Mapping[int, TopicTokenSet] | None = None,
) -> ScoreReport:
    """Score one generated summary against both of its article's topics.

    ROUGE-L is computed against the reference summary of the steered topic.
    ``token_sets`` may supply prebuilt topic token sets (keyed by topic id)
    to avoid re-expanding topics per call.
    """
    tid1, tid2 = topics
    ref1, ref2 = references
    if not ref1 or not ref2:
        raise ValueError("both reference summaries must be non-empty")
    text = vocab.decode(result.tokens)
    content_ids = [t for t in result.tokens if not vocab.is_special(t)]

    def topical(tid: int) -> TopicalScores:
        if token_sets is not None and tid in token_sets:
            tset = token_sets[tid]
        else:
            tset = topic_token_set(tid, model, vocab, top_n)
        return TopicalScores(
            lemma_score=lemma_topic_score(text, tid, model, top_n),
            token_score=token_topic_score(content_ids, tset),
            dict_score=dict_topic_score(text, tid, model),
        )

    reference = ref1 if steered_tid == tid1 else ref2
    return ScoreReport(
        article_id=article_id,
        condition=condition,
        steered_tid=steered_tid,
        tid1=tid1,
        tid2=tid2,
        topical_tid1=topical(tid1),
        topical_tid2=topical(tid2),
        quality=QualityScores(rouge_l_f1=rouge_l_f1(text, reference)),
        text=text,
    )


REPORT_COLUMNS = (
    "article_id",
    "condition",
    "steered_tid",
    "lemma_t1",
    "token_t1",
    "dict_t1",
    "lemma_t2",
    "token_t2",
    "dict_t2",
    "rouge_l_f1",
)


def format_score(value: float) -> str:
    return format(float(value), ".12g")


def report_row(report: ScoreReport) -> dict[str, str]:
    """One CSV row per report, in REPORT_COLUMNS order plus external columns."""
    row = {
        "article_id": report.article_id,
        "condition": report.condition,
        "steered_tid": str(report.steered_tid),
        "lemma_t1": format_score(report.topical_tid1.lemma_score),
        "token_t1": format_score(report.topical_tid1.token_score),
        "dict_t1": format_score(report.topical_tid1.dict_score),
        "lemma_t2": format_score(report.topical_tid2.lemma_score),
        "token_t2": format_score(report.topical_tid2.token_score),
        "dict_t2": format_score(report.topical_tid2.dict_score),
        "rouge_l_f1": format_score(report.quality.rouge_l_f1),
    }
    for name in sorted(report.quality.external):
        row[name] = format_score(report.quality.external[name])
    return row


def write_report_csv(rows: Iterable[Mapping[str, str]], path: str | Path, columns: Sequence[str]) -> None:
    """Write rows with a fixed column order and unix newlines (byte-stable)."""
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.DictWriter(handle, fieldnames=list(columns), lineterminator="\n", restval="")
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
