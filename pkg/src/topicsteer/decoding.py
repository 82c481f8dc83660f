"""Token generation from any logits provider: greedy, sampling, beam search.

Per-step pipeline, in fixed order: provider logits -> reweighting chain ->
EOS masking while below the minimum length -> top-k/top-p truncation ->
token selection. Reweighting runs before truncation on purpose: a boosted
token must be able to re-enter the candidate set even if the raw logits
placed it outside the top-k.

Determinism contract: greedy and beam search are fully deterministic; ties
go to the lower token id, then the lower beam index. Sampling uses a PCG64
generator seeded from the config and consumes exactly one uniform double per
emitted token, mapped through the inverse CDF in token-id order.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .models import LogitsProvider, LogitVector, TokenSequence, Vocabulary, log_softmax, softmax

__all__ = [
    "Beam",
    "GenerationConfig",
    "GenerationResult",
    "StepRecord",
    "generate",
    "generate_beam",
    "generate_greedy",
    "generate_sample",
    "truncate_top_k_top_p",
]

STRATEGIES = ("greedy", "sample", "beam")


@dataclass(frozen=True)
class GenerationConfig:
    """Decoding strategy, truncation, and length window.

    min_new_tokens is enforced by masking EOS until that many tokens exist;
    max_new_tokens is a hard stop. seed only affects the "sample" strategy.
    """

    strategy: str = "greedy"
    top_k: int = 50
    top_p: float = 0.95
    num_beams: int = 4
    max_new_tokens: int = 90
    min_new_tokens: int = 80
    seed: int = 0

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}; expected one of {STRATEGIES}")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0.0 < self.top_p <= 1.0:
            raise ValueError("top_p must lie in (0, 1]")
        if self.num_beams < 1:
            raise ValueError("num_beams must be >= 1")
        if self.min_new_tokens < 0 or self.max_new_tokens < 0:
            raise ValueError("token window must be non-negative")
        if self.min_new_tokens > self.max_new_tokens:
            raise ValueError("min_new_tokens must not exceed max_new_tokens")


@dataclass(frozen=True)
class StepRecord:
    """Logit of the chosen token before and after reweighting, one per step."""

    step: int
    token_id: int
    raw_logit: float
    steered_logit: float


@dataclass(frozen=True)
class GenerationResult:
    """Generated continuation (new tokens only) and its cumulative log prob."""

    tokens: tuple[int, ...]
    log_prob: float
    step_records: tuple[StepRecord, ...] | None = None

    def to_record(self, vocab: Vocabulary, config: GenerationConfig | None = None) -> dict:
        """JSON-serializable record: tokens, decoded text, log prob, config."""
        record = {
            "tokens": list(self.tokens),
            "text": vocab.decode(self.tokens),
            "log_prob": self.log_prob,
        }
        if config is not None:
            record["config"] = asdict(config)
        return record


@dataclass(frozen=True)
class Beam:
    """One beam-search hypothesis over new tokens."""

    sequence: tuple[int, ...]
    cumulative_log_prob: float
    finished: bool = False


def truncate_top_k_top_p(scores: LogitVector, top_k: int, top_p: float) -> np.ndarray:
    """Mask everything outside the top-k, then outside the top-p nucleus.

    Survivor order is descending score with ties kept in token-id order. The
    nucleus is the smallest prefix of survivors whose renormalized softmax
    mass reaches top_p; the highest-scoring token always survives. Masked
    entries are set to -inf.
    """
    if top_k < 1:
        raise ValueError("top_k must be >= 1")
    if not 0.0 < top_p <= 1.0:
        raise ValueError("top_p must lie in (0, 1]")
    x = np.asarray(scores, dtype=np.float64)
    order = np.argsort(-x, kind="stable")[: min(top_k, x.size)]
    kept = x[order]
    finite = np.isfinite(kept)
    if not finite.any():
        raise ValueError("cannot truncate a fully masked logit vector")
    order = order[finite]
    kept = kept[finite]
    if top_p < 1.0:
        probs = softmax(kept)
        cumulative = np.cumsum(probs)
        # token j survives if the mass strictly before it is < top_p
        nucleus = np.concatenate(([True], cumulative[:-1] < top_p))
        order = order[nucleus]
    out = np.full_like(x, -np.inf)
    out[order] = x[order]
    return out


def _validated_prefix(model: LogitsProvider, prefix: TokenSequence) -> list[int]:
    ids = [int(t) for t in prefix]
    if not ids:
        raise ValueError("prefix must be non-empty")
    model.vocabulary.validate_ids(ids)
    return ids


def _steered(chain, raw: np.ndarray) -> np.ndarray:
    return raw.copy() if chain is None else chain.apply(raw)


def _require(config: GenerationConfig, strategy: str) -> GenerationConfig:
    if config.strategy != strategy:
        raise ValueError(f"config.strategy is {config.strategy!r}, expected {strategy!r}")
    return config


def _sample_index(probs: np.ndarray, u: float) -> int:
    """Inverse-CDF draw in token-id order; zero-probability entries can't win."""
    cdf = np.cumsum(probs)
    idx = int(np.searchsorted(cdf, u, side="right"))
    if idx >= probs.size:
        idx = int(np.flatnonzero(probs > 0.0)[-1])
    return idx


def generate_greedy(
    model: LogitsProvider,
    prefix: TokenSequence,
    chain=None,
    config: GenerationConfig | None = None,
    trace: bool = False,
) -> GenerationResult:
    """Deterministic argmax decoding over post-chain logits.

    Truncation is skipped: the argmax is invariant under it. Ties resolve to
    the lowest token id.
    """
    config = _require(config or GenerationConfig(strategy="greedy"), "greedy")
    seq = _validated_prefix(model, prefix)
    eos = model.vocabulary.eos_id
    tokens: list[int] = []
    records: list[StepRecord] = []
    log_prob = 0.0
    while len(tokens) < config.max_new_tokens:
        raw = model.next_logits(seq)
        steered = _steered(chain, raw)
        if len(tokens) < config.min_new_tokens:
            steered[eos] = -np.inf
        token = int(np.argmax(steered))
        log_prob += float(log_softmax(steered)[token])
        if trace:
            records.append(StepRecord(len(tokens), token, float(raw[token]), float(steered[token])))
        tokens.append(token)
        seq.append(token)
        if token == eos:
            break
    return GenerationResult(
        tokens=tuple(tokens),
        log_prob=log_prob,
        step_records=tuple(records) if trace else None,
    )


def generate_sample(
    model: LogitsProvider,
    prefix: TokenSequence,
    chain=None,
    config: GenerationConfig | None = None,
    trace: bool = False,
) -> GenerationResult:
    """Seeded top-k/top-p sampling; reproducible for a fixed seed."""
    config = _require(config or GenerationConfig(strategy="sample"), "sample")
    seq = _validated_prefix(model, prefix)
    eos = model.vocabulary.eos_id
    rng = np.random.Generator(np.random.PCG64(config.seed))
    tokens: list[int] = []
    records: list[StepRecord] = []
    log_prob = 0.0
    while len(tokens) < config.max_new_tokens:
        raw = model.next_logits(seq)
        steered = _steered(chain, raw)
        if len(tokens) < config.min_new_tokens:
            steered[eos] = -np.inf
        truncated = truncate_top_k_top_p(steered, config.top_k, config.top_p)
        probs = softmax(truncated)
        token = _sample_index(probs, rng.random())
        log_prob += math.log(probs[token])
        if trace:
            records.append(StepRecord(len(tokens), token, float(raw[token]), float(steered[token])))
        tokens.append(token)
        seq.append(token)
        if token == eos:
            break
    return GenerationResult(
        tokens=tuple(tokens),
        log_prob=log_prob,
        step_records=tuple(records) if trace else None,
    )


def generate_beam(
    model: LogitsProvider,
    prefix: TokenSequence,
    chain=None,
    config: GenerationConfig | None = None,
    trace: bool = False,
) -> GenerationResult:
    """Beam search over post-chain, post-truncation log probabilities.

    Each live beam proposes its top num_beams successors; the global top
    num_beams candidates are retained, ranked by cumulative log probability
    with ties broken by lower token id then lower beam index. A beam that
    emits EOS is finished and never extended. No length normalization is
    applied. Returns the best finished beam, or the best live one when the
    length limit cuts the search off. Step traces are not recorded for beam
    search.
    """
    del trace  # per-beam traces are not supported
    config = _require(config or GenerationConfig(strategy="beam"), "beam")
    base = _validated_prefix(model, prefix)
    eos = model.vocabulary.eos_id
    live: list[Beam] = [Beam(sequence=(), cumulative_log_prob=0.0)]
    done: list[Beam] = []
    for step in range(config.max_new_tokens):
        if not live:
            break
        # (cumulative log prob, token id, source beam index)
        candidates: list[tuple[float, int, int]] = []
        for beam_index, beam in enumerate(live):
            raw = model.next_logits(base + list(beam.sequence))
            steered = _steered(chain, raw)
            if step < config.min_new_tokens:
                steered[eos] = -np.inf
            truncated = truncate_top_k_top_p(steered, config.top_k, config.top_p)
            log_probs = log_softmax(truncated)
            finite = np.flatnonzero(np.isfinite(log_probs))
            best = finite[np.argsort(-log_probs[finite], kind="stable")][: config.num_beams]
            for token in best:
                candidates.append(
                    (beam.cumulative_log_prob + float(log_probs[token]), int(token), beam_index)
                )
        candidates.sort(key=lambda c: (-c[0], c[1], c[2]))
        next_live: list[Beam] = []
        for score, token, beam_index in candidates[: config.num_beams]:
            extended = Beam(
                sequence=live[beam_index].sequence + (token,),
                cumulative_log_prob=score,
                finished=token == eos,
            )
            if extended.finished:
                done.append(extended)
            else:
                next_live.append(extended)
        live = next_live
    pool = done if done else live
    if not pool:
        return GenerationResult(tokens=(), log_prob=0.0)
    winner = max(pool, key=lambda b: b.cumulative_log_prob)
    return GenerationResult(tokens=winner.sequence, log_prob=winner.cumulative_log_prob)


def generate(
    model: LogitsProvider,
    prefix: TokenSequence,
    chain=None,
    config: GenerationConfig | None = None,
    trace: bool = False,
) -> GenerationResult:
    """Dispatch to the generator selected by config.strategy."""
    config = config or GenerationConfig()
    if config.strategy == "greedy":
        return generate_greedy(model, prefix, chain, config, trace)
    if config.strategy == "sample":
        return generate_sample(model, prefix, chain, config, trace)
    return generate_beam(model, prefix, chain, config, trace)
