"""Shipped synthetic fixtures: a steerable toy model, topics, and a corpus.

The files are generated deterministically by ``python -m
topicsteer.fixtures.build`` and committed; the accessors below return their
installed locations.
"""

from __future__ import annotations

from pathlib import Path

_DIR = Path(__file__).resolve().parent


def toy_model_path() -> Path:
    return _DIR / "toy_model.json"


def topic_model_path() -> Path:
    return _DIR / "topics.json"


def corpus_path() -> Path:
    return _DIR / "corpus.jsonl"
