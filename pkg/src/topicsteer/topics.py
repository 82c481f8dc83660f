"""Topic-word distributions and their expansion into vocabulary token sets.

A topic is an ordered list of (word, weight) pairs. To steer generation the
top N words of a topic are expanded into every surface variant (stem, lemma,
capitalization, leading space) that exactly matches a vocabulary token; the
resulting id set is what the reweighting methods act on.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Mapping

from .models import Vocabulary
from .stemmer import stem

__all__ = [
    "TopicModel",
    "TopicModelFormatError",
    "TopicTokenSet",
    "WordVariants",
    "expand_word",
    "load_lemma_dictionary",
    "load_topic_model",
    "topic_token_set",
]

logger = logging.getLogger(__name__)


class TopicModelFormatError(ValueError):
    """Raised when a topic-model file does not conform to the on-disk format."""


@dataclass(frozen=True)
class TopicModel:
    """Topics as weighted word lists, each sorted by descending weight."""

    topics: Mapping[int, tuple[tuple[str, float], ...]]

    @property
    def topic_count(self) -> int:
        return len(self.topics)

    def topic_ids(self) -> list[int]:
        return sorted(self.topics)

    def top_words(self, topic_id: int, top_n: int) -> tuple[tuple[str, float], ...]:
        if topic_id not in self.topics:
            raise KeyError(f"unknown topic id {topic_id}")
        if top_n < 1:
            raise ValueError("top_n must be >= 1")
        return self.topics[topic_id][:top_n]

    @cached_property
    def word_topic_weights(self) -> dict[str, dict[int, float]]:
        """Per-word map of the topics containing it and their weights."""
        index: dict[str, dict[int, float]] = {}
        for tid, words in self.topics.items():
            for word, weight in words:
                index.setdefault(word, {})[tid] = weight
        return index


@dataclass(frozen=True)
class WordVariants:
    """Surface forms of one topic word that may each be a vocabulary token."""

    word: str
    variants: frozenset[str]


@dataclass(frozen=True)
class TopicTokenSet:
    """Token ids representing one topic, with the word each id came from."""

    topic_id: int
    token_ids: frozenset[int]
    provenance: Mapping[int, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if set(self.provenance) != set(self.token_ids):
            raise ValueError("provenance must cover exactly the token ids in the set")

    def __len__(self) -> int:
        return len(self.token_ids)

    def sorted_ids(self) -> list[int]:
        return sorted(self.token_ids)


def load_topic_model(path: str | Path) -> TopicModel:
    """Load a topic model from JSON: {"topics": [{"id": int, "words": [[word, weight], ...]}]}.

    Words are lowercased, weights must be non-negative and finite, and each
    topic's list is re-sorted by descending weight (stable for ties).
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TopicModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("topics"), list):
        raise TopicModelFormatError(f"{path}: expected an object with a 'topics' array")
    topics: dict[int, tuple[tuple[str, float], ...]] = {}
    for entry in raw["topics"]:
        if not isinstance(entry, dict) or "id" not in entry or "words" not in entry:
            raise TopicModelFormatError(f"{path}: each topic needs 'id' and 'words'")
        tid = entry["id"]
        if not isinstance(tid, int) or isinstance(tid, bool):
            raise TopicModelFormatError(f"{path}: topic id {tid!r} must be an integer")
        if tid in topics:
            raise TopicModelFormatError(f"{path}: duplicate topic id {tid}")
        words_raw = entry["words"]
        if not isinstance(words_raw, list) or not words_raw:
            raise TopicModelFormatError(f"{path}: topic {tid} must list at least one word")
        seen: set[str] = set()
        pairs: list[tuple[str, float]] = []
        for item in words_raw:
            if not isinstance(item, (list, tuple)) or len(item) != 2:
                raise TopicModelFormatError(f"{path}: topic {tid} entries must be [word, weight] pairs")
            word, weight = item
            if not isinstance(word, str) or not word.strip():
                raise TopicModelFormatError(f"{path}: topic {tid} has an empty word")
            if isinstance(weight, bool) or not isinstance(weight, (int, float)):
                raise TopicModelFormatError(f"{path}: topic {tid} weight for {word!r} must be a number")
            weight = float(weight)
            if not math.isfinite(weight) or weight < 0.0:
                raise TopicModelFormatError(f"{path}: topic {tid} weight for {word!r} must be finite and >= 0")
            word = word.strip().lower()
            if word in seen:
                raise TopicModelFormatError(f"{path}: topic {tid} lists {word!r} twice")
            seen.add(word)
            pairs.append((word, weight))
        pairs.sort(key=lambda p: -p[1])
        topics[tid] = tuple(pairs)
    if not topics:
        raise TopicModelFormatError(f"{path}: no topics defined")
    return TopicModel(topics=topics)


def load_lemma_dictionary(path: str | Path) -> dict[str, str]:
    """Optional word -> lemma map; both sides lowercased."""
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise TopicModelFormatError(f"{path}: lemma dictionary must be a JSON object")
    lemmas: dict[str, str] = {}
    for word, lemma in raw.items():
        if not isinstance(lemma, str) or not word or not lemma:
            raise TopicModelFormatError(f"{path}: lemma entries must map word to non-empty string")
        lemmas[word.lower()] = lemma.lower()
    return lemmas


def _capitalize(word: str) -> str:
    return word[:1].upper() + word[1:]


def expand_word(word: str, lemmas: Mapping[str, str] | None = None) -> WordVariants:
    """All surface variants of a word that could appear as vocabulary tokens.

    Base forms are the word itself, its stem, and its lemma when a lemma
    dictionary supplies one that differs from the stem. Each base form also
    contributes a capitalized variant, and every variant additionally appears
    with one leading space.
    """
    if not word:
        raise ValueError("cannot expand an empty word")
    word = word.lower()
    bases = {word, stem(word)}
    if lemmas is not None:
        lemma = lemmas.get(word)
        if lemma:
            bases.add(lemma)
    forms = set(bases)
    forms.update(_capitalize(b) for b in bases)
    forms.update(" " + f for f in tuple(forms))
    return WordVariants(word=word, variants=frozenset(forms))


def topic_token_set(
    topic_id: int,
    model: TopicModel,
    vocab: Vocabulary,
    top_n: int = 25,
    lemmas: Mapping[str, str] | None = None,
) -> TopicTokenSet:
    """Expand a topic's top_n words into the matching vocabulary token ids.

    Matching is exact string equality against token strings; words whose
    variants match nothing contribute nothing. When two words produce the
    same token, the earlier (higher-weight) word keeps the provenance entry.
    """
    ids: set[int] = set()
    provenance: dict[int, str] = {}
    for word, _weight in model.top_words(topic_id, top_n):
        for variant in sorted(expand_word(word, lemmas).variants):
            tid = vocab.lookup(variant)
            if tid is not None and tid not in ids:
                ids.add(tid)
                provenance[tid] = word
    if not ids:
        logger.warning("topic %d: no top-%d word variant matches the vocabulary", topic_id, top_n)
    return TopicTokenSet(topic_id=topic_id, token_ids=frozenset(ids), provenance=provenance)
