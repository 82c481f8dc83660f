"""Next-token logits providers and the deterministic toy Markov model.

The decoding engine only ever talks to a provider through ``vocabulary`` and
``next_logits``; anything that satisfies :class:`LogitsProvider` can be
plugged in. The shipped provider is an order-1 Markov table over a small
vocabulary, which keeps every decoding path exactly reproducible and cheap
enough for brute-force oracles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

__all__ = [
    "LogitVector",
    "TokenSequence",
    "LogitsProvider",
    "ToyMarkovModel",
    "ToyModelFormatError",
    "Vocabulary",
    "load_toy_model",
    "log_softmax",
    "save_toy_model",
    "softmax",
]

# A logit vector is a float64 array of per-token scores, one entry per
# vocabulary token. Entries are finite when produced by a provider;
# -inf appears only after explicit masking inside the decoding engine.
LogitVector = np.ndarray

TokenSequence = Sequence[int]


class ToyModelFormatError(ValueError):
    """Raised when a toy-model file does not conform to the on-disk format."""


@dataclass(frozen=True)
class Vocabulary:
    """Dense token-id space with designated BOS and EOS entries."""

    tokens: tuple[str, ...]
    bos_id: int
    eos_id: int

    def __post_init__(self) -> None:
        if not self.tokens:
            raise ValueError("vocabulary must contain at least one token")
        if any(not isinstance(t, str) or not t for t in self.tokens):
            raise ValueError("token strings must be non-empty strings")
        if len(set(self.tokens)) != len(self.tokens):
            raise ValueError("token strings must be unique")
        for name, tid in (("bos", self.bos_id), ("eos", self.eos_id)):
            if not 0 <= tid < len(self.tokens):
                raise ValueError(f"{name} id {tid} out of range for size {len(self.tokens)}")
        if self.bos_id == self.eos_id:
            raise ValueError("BOS and EOS ids must differ")

    @classmethod
    def from_tokens(cls, tokens: Sequence[str], bos: str, eos: str) -> "Vocabulary":
        tokens = tuple(tokens)
        try:
            bos_id = tokens.index(bos)
            eos_id = tokens.index(eos)
        except ValueError:
            raise ValueError(f"BOS {bos!r} and EOS {eos!r} must both be vocabulary tokens") from None
        return cls(tokens=tokens, bos_id=bos_id, eos_id=eos_id)

    @property
    def size(self) -> int:
        return len(self.tokens)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {token: i for i, token in enumerate(self.tokens)}

    def lookup(self, token: str) -> int | None:
        """Id of an exactly matching token string, or None."""
        return self._index.get(token)

    def is_special(self, token_id: int) -> bool:
        return token_id in (self.bos_id, self.eos_id)

    def validate_ids(self, ids: TokenSequence) -> None:
        for tid in ids:
            if not 0 <= int(tid) < self.size:
                raise ValueError(f"token id {tid} out of range for vocabulary of size {self.size}")

    def encode_words(self, text: str) -> list[int]:
        """Exact-match word encoder used to build prefixes from fixture text.

        Splits on whitespace and, per word, looks up the leading-space form
        then the bare form; words matching neither are skipped. This is not a
        tokenizer: it only recovers ids for strings that are literally
        vocabulary tokens.
        """
        ids = []
        for word in text.split():
            tid = self.lookup(" " + word)
            if tid is None:
                tid = self.lookup(word)
            if tid is not None:
                ids.append(tid)
        return ids

    def decode(self, ids: TokenSequence, skip_special: bool = True) -> str:
        """Concatenate token strings (leading spaces separate words)."""
        self.validate_ids(ids)
        parts = [self.tokens[int(i)] for i in ids if not (skip_special and self.is_special(int(i)))]
        return "".join(parts).lstrip(" ")


@runtime_checkable
class LogitsProvider(Protocol):
    """Anything that maps a token prefix to one logit vector.

    Implementations must be safe for concurrent read-only queries and, for
    toy models, pure: the same prefix always yields the same vector. Real
    neural backends would adapt to this protocol; none ship here.
    """

    @property
    def vocabulary(self) -> Vocabulary: ...

    def next_logits(self, prefix: TokenSequence) -> LogitVector: ...


@dataclass(frozen=True, eq=False)
class ToyMarkovModel:
    """Order-1 Markov logits table: row i scores successors of token i."""

    vocabulary: Vocabulary
    table: np.ndarray

    def __post_init__(self) -> None:
        table = np.asarray(self.table, dtype=np.float64)
        expected = (self.vocabulary.size, self.vocabulary.size)
        if table.shape != expected:
            raise ValueError(f"table shape {table.shape} does not match vocabulary {expected}")
        if not np.isfinite(table).all():
            raise ValueError("toy model table must be finite")
        object.__setattr__(self, "table", table)

    def next_logits(self, prefix: TokenSequence) -> LogitVector:
        """Logits for the token after ``prefix``; only the last id matters."""
        ids = [int(t) for t in prefix]
        if not ids:
            raise ValueError("prefix must be non-empty")
        self.vocabulary.validate_ids(ids)
        return self.table[ids[-1]].copy()

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ToyMarkovModel):
            return NotImplemented
        return self.vocabulary == other.vocabulary and np.array_equal(self.table, other.table)


def softmax(scores: LogitVector) -> np.ndarray:
    """Probabilities from logits, stabilized by max subtraction.

    Entries of -inf (masked tokens) get probability exactly 0.
    """
    x = np.asarray(scores, dtype=np.float64)
    m = np.max(x)
    if not np.isfinite(m):
        raise ValueError("softmax requires at least one finite entry and no +inf/NaN")
    z = np.exp(x - m)
    return z / z.sum()


def log_softmax(scores: LogitVector) -> np.ndarray:
    """Log probabilities from logits; masked (-inf) entries stay -inf."""
    x = np.asarray(scores, dtype=np.float64)
    m = np.max(x)
    if not np.isfinite(m):
        raise ValueError("log_softmax requires at least one finite entry and no +inf/NaN")
    lse = m + math.log(np.exp(x - m).sum())
    return x - lse


def load_toy_model(path: str | Path) -> ToyMarkovModel:
    """Load a toy Markov model from its JSON file format.

    The format is an object with "tokens" (array of token strings), "bos" and
    "eos" (token strings), and "table" (map token string -> array of numbers,
    one row per token, each of vocabulary length).
    """
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ToyModelFormatError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ToyModelFormatError(f"{path}: top level must be an object")
    for key in ("tokens", "bos", "eos", "table"):
        if key not in raw:
            raise ToyModelFormatError(f"{path}: missing key {key!r}")
    tokens = raw["tokens"]
    if not isinstance(tokens, list) or not all(isinstance(t, str) for t in tokens):
        raise ToyModelFormatError(f"{path}: 'tokens' must be an array of strings")
    try:
        vocab = Vocabulary.from_tokens(tokens, bos=raw["bos"], eos=raw["eos"])
    except ValueError as exc:
        raise ToyModelFormatError(f"{path}: {exc}") from exc
    rows = raw["table"]
    if not isinstance(rows, dict):
        raise ToyModelFormatError(f"{path}: 'table' must be an object keyed by token string")
    unknown = set(rows) - set(vocab.tokens)
    if unknown:
        raise ToyModelFormatError(f"{path}: table rows for unknown tokens: {sorted(unknown)!r}")
    table = np.empty((vocab.size, vocab.size), dtype=np.float64)
    for tid, token in enumerate(vocab.tokens):
        row = rows.get(token)
        if row is None:
            raise ToyModelFormatError(f"{path}: missing table row for token {token!r}")
        if not isinstance(row, list) or len(row) != vocab.size:
            raise ToyModelFormatError(f"{path}: row for {token!r} must list {vocab.size} numbers")
        for j, value in enumerate(row):
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
                raise ToyModelFormatError(f"{path}: non-finite or non-numeric score for {token!r}[{j}]")
            table[tid, j] = float(value)
    return ToyMarkovModel(vocabulary=vocab, table=table)


def save_toy_model(model: ToyMarkovModel, path: str | Path) -> None:
    """Write a toy model in the JSON file format; round-trips with load."""
    vocab = model.vocabulary
    payload = {
        "tokens": list(vocab.tokens),
        "bos": vocab.tokens[vocab.bos_id],
        "eos": vocab.tokens[vocab.eos_id],
        "table": {token: model.table[tid].tolist() for tid, token in enumerate(vocab.tokens)},
    }
    Path(path).write_text(json.dumps(payload), encoding="utf-8")
