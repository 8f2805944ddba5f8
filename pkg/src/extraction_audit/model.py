"""Autoregressive token models as logit providers, plus decoding policies.

A provider maps a token history to a row of unnormalized logits; a decoding
policy (top-k truncation at temperature beta) turns that row into a
renormalized next-token distribution.  Everything downstream (teacher-forced
scoring, beam search, Monte Carlo, the exact oracle) consumes providers only
through this surface.  Two synthetic providers ship for desk-scale
verification: an explicit lookup table and a smoothed n-gram model.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Dict, Iterable, Mapping, Optional, Sequence, Tuple

import numpy as np

TokenSeq = Tuple[int, ...]

#: Absorbing zero-probability sentinel in log space.  Distinct from every
#: finite log value; arithmetic with it stays -inf.
LOG_ZERO = float("-inf")


class InvalidInputError(ValueError):
    """Raised when an operation precondition is violated."""


@dataclass(frozen=True)
class Vocabulary:
    """Token id space of a model; ids are 0..size-1."""

    size: int
    eos: Optional[int] = None

    def __post_init__(self):
        if self.size < 2:
            raise InvalidInputError(f"vocabulary size must be >= 2, got {self.size}")
        if self.eos is not None and not (0 <= self.eos < self.size):
            raise InvalidInputError(f"eos id {self.eos} outside vocabulary of size {self.size}")


@dataclass(frozen=True)
class DecodingPolicy:
    """Top-k truncation with temperature ``beta`` (logits are divided by beta)."""

    k: int
    beta: float = 1.0

    def __post_init__(self):
        if self.k < 1:
            raise InvalidInputError(f"k must be >= 1, got {self.k}")
        if not (self.beta > 0):
            raise InvalidInputError(f"beta must be > 0, got {self.beta}")


def _as_row(row) -> np.ndarray:
    arr = np.asarray(row, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidInputError(f"logit row must be 1-d, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidInputError("logit row contains non-finite values")
    return arr


def log_softmax(row) -> np.ndarray:
    """Numerically stable log-softmax (max subtraction) over a logit row."""
    arr = _as_row(row)
    shifted = arr - arr.max()
    return shifted - math.log(np.exp(shifted).sum())


def apply_temperature(row, beta: float) -> np.ndarray:
    """Rescale logits by 1/beta.  Argsort order is preserved for all beta > 0."""
    if not (beta > 0):
        raise InvalidInputError(f"beta must be > 0, got {beta}")
    return _as_row(row) / beta


def topk_support(row, k: int) -> Tuple[int, ...]:
    """The k largest-logit token ids, ranked; lower id wins on equal logits."""
    arr = _as_row(row)
    if not (1 <= k <= arr.shape[0]):
        raise InvalidInputError(f"k={k} outside [1, {arr.shape[0]}]")
    # np.lexsort's last key is primary: descending logit, then ascending id.
    order = np.lexsort((np.arange(arr.shape[0]), -arr))
    return tuple(int(v) for v in order[:k])


@dataclass(frozen=True)
class StepDistribution:
    """Renormalized next-token distribution on a top-k support.

    ``support`` is rank-ordered (best first, id-ascending tie-break) and
    ``logprobs[i]`` is the renormalized log-probability of ``support[i]``;
    they sum to 1 within 1e-12 in linear space.
    """

    support: Tuple[int, ...]
    logprobs: Tuple[float, ...]
    _index: Dict[int, int] = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "_index", {v: i for i, v in enumerate(self.support)})

    def logprob(self, token: int) -> float:
        """Log-probability of ``token``; LOG_ZERO outside the support."""
        i = self._index.get(token)
        return self.logprobs[i] if i is not None else LOG_ZERO

    def rank(self, token: int) -> Optional[int]:
        """1-based rank of ``token`` within the support, None if outside."""
        i = self._index.get(token)
        return i + 1 if i is not None else None


def topk_step(row, policy: DecodingPolicy) -> StepDistribution:
    """Truncate a logit row to its top-k tokens and renormalize.

    Equivalent to a log-softmax over the beta-scaled logits restricted to the
    (beta-invariant) top-k set.
    """
    scaled = apply_temperature(row, policy.beta)
    support = topk_support(scaled, policy.k)
    ls = log_softmax(scaled)
    vals = ls[list(support)]
    z = float(vals.max())
    z = z + math.log(float(np.exp(vals - z).sum()))
    logprobs = tuple(float(v - z) for v in vals)
    return StepDistribution(support=support, logprobs=logprobs)


class TokenDistributionProvider:
    """Contract: deterministic ``next_logits(history) -> logit row``.

    Identical histories must yield identical logits; providers must be safe
    for concurrent read-only queries.
    """

    vocabulary: Vocabulary

    def next_logits(self, history: Sequence[int]) -> np.ndarray:
        raise NotImplementedError


def step_distribution(
    provider: TokenDistributionProvider, history: Sequence[int], policy: DecodingPolicy
) -> StepDistribution:
    """One decoding step: provider logits -> renormalized top-k distribution."""
    return topk_step(provider.next_logits(history), policy)


def teacher_force_verbatim(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    suffix: Sequence[int],
    policy: DecodingPolicy,
) -> float:
    """Log-probability of generating ``suffix`` verbatim after ``prefix``.

    Scores the fixed suffix along the ground-truth path, one renormalized
    step conditional at a time.  Returns LOG_ZERO if any suffix token falls
    outside that step's top-k support (the p = 0 case).
    """
    if len(suffix) == 0:
        raise InvalidInputError("suffix must be nonempty")
    history = tuple(prefix)
    total = 0.0
    for token in suffix:
        sd = step_distribution(provider, history, policy)
        lp = sd.logprob(int(token))
        if lp == LOG_ZERO:
            return LOG_ZERO
        total += lp
        history = history + (int(token),)
    return total


def greedy_continuation(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    length: int,
    policy: Optional[DecodingPolicy] = None,
) -> TokenSeq:
    """Deterministic greedy continuation (rank-1 token each step).

    Stops early at EOS, so the result may be shorter than ``length``.
    """
    if policy is None:
        policy = DecodingPolicy(k=1)
    history = tuple(prefix)
    out = []
    for _ in range(length):
        sd = step_distribution(provider, history, policy)
        tok = sd.support[0]
        out.append(tok)
        history = history + (tok,)
        if provider.vocabulary.eos is not None and tok == provider.vocabulary.eos:
            break
    return tuple(out)


class TableModel(TokenDistributionProvider):
    """Explicit history -> logit-row lookup with a default row.

    Immutable after construction; lookups are exact on the stored histories
    and fall back to the default row otherwise.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        rows: Mapping[TokenSeq, Sequence[float]],
        default_row: Sequence[float],
        name: str = "table",
    ):
        self.vocabulary = vocabulary
        self.name = name
        self._default = self._freeze(default_row)
        self._rows: Dict[TokenSeq, np.ndarray] = {
            tuple(int(t) for t in hist): self._freeze(row) for hist, row in rows.items()
        }

    def _freeze(self, row) -> np.ndarray:
        arr = _as_row(row)
        if arr.shape[0] != self.vocabulary.size:
            raise InvalidInputError(
                f"row length {arr.shape[0]} != vocabulary size {self.vocabulary.size}"
            )
        arr.setflags(write=False)
        return arr

    def next_logits(self, history: Sequence[int]) -> np.ndarray:
        return self._rows.get(tuple(int(t) for t in history), self._default)


class NGramModel(TokenDistributionProvider):
    """Order-m conditional frequency model with add-one smoothing.

    Conditions on the last order-1 history tokens (shorter tails for shorter
    histories).  Logits are log(count + 1), so the softmax is the add-one
    smoothed conditional and every token keeps strictly positive probability.
    ``planted`` sequences have their transitions boosted by a count weight,
    standing in for memorized training data.
    """

    def __init__(
        self,
        vocabulary: Vocabulary,
        order: int,
        corpus: Iterable[Sequence[int]] = (),
        planted: Iterable[Tuple[Sequence[int], float]] = (),
        name: str = "ngram",
    ):
        if order < 1:
            raise InvalidInputError(f"order must be >= 1, got {order}")
        self.vocabulary = vocabulary
        self.order = order
        self.name = name
        self._counts: Dict[TokenSeq, np.ndarray] = {}
        for seq in corpus:
            self._observe(seq, 1.0)
        self.planted = [(tuple(int(t) for t in seq), float(w)) for seq, w in planted]
        for seq, weight in self.planted:
            self._observe(seq, weight)
        for arr in self._counts.values():
            arr.setflags(write=False)
        self._log1 = np.zeros(vocabulary.size, dtype=np.float64)
        self._log1.setflags(write=False)
        self._cache: Dict[TokenSeq, np.ndarray] = {}

    def _observe(self, seq: Sequence[int], weight: float) -> None:
        toks = [int(t) for t in seq]
        for t in toks:
            if not (0 <= t < self.vocabulary.size):
                raise InvalidInputError(f"token {t} outside vocabulary")
        for i, tok in enumerate(toks):
            ctx = tuple(toks[max(0, i - (self.order - 1)) : i])
            row = self._counts.get(ctx)
            if row is None:
                row = np.zeros(self.vocabulary.size, dtype=np.float64)
                self._counts[ctx] = row
            row[tok] += weight

    def _context(self, history: Sequence[int]) -> TokenSeq:
        tail = tuple(int(t) for t in history[max(0, len(history) - (self.order - 1)) :])
        return tail

    def next_logits(self, history: Sequence[int]) -> np.ndarray:
        ctx = self._context(history)
        cached = self._cache.get(ctx)
        if cached is not None:
            return cached
        counts = self._counts.get(ctx)
        if counts is None:
            row = self._log1
        else:
            row = np.log1p(counts)
            row.setflags(write=False)
        self._cache[ctx] = row
        return row


# ---------------------------------------------------------------------------
# Model files.  One JSON document per model; the same table schema is served
# by the bridge for conformance runs, so it doubles as a file interface.
# ---------------------------------------------------------------------------

MODEL_FILE_TYPES = ("table", "ngram")


def table_model_to_dict(model: TableModel) -> dict:
    return {
        "type": "table",
        "vocab_size": model.vocabulary.size,
        "eos_id": model.vocabulary.eos,
        "model_name": model.name,
        "default_row": [float(x) for x in model._default],
        "rows": [
            {"history": list(hist), "logits": [float(x) for x in row]}
            for hist, row in sorted(model._rows.items())
        ],
    }


def model_from_dict(doc: dict) -> TokenDistributionProvider:
    kind = doc.get("type")
    if kind == "table":
        vocab = Vocabulary(size=int(doc["vocab_size"]), eos=doc.get("eos_id"))
        rows = {tuple(r["history"]): r["logits"] for r in doc.get("rows", [])}
        return TableModel(vocab, rows, doc["default_row"], name=doc.get("model_name", "table"))
    if kind == "ngram":
        vocab = Vocabulary(size=int(doc["vocab_size"]), eos=doc.get("eos_id"))
        planted = [(p["tokens"], p.get("weight", 1.0)) for p in doc.get("planted", [])]
        return NGramModel(
            vocab,
            order=int(doc.get("order", 2)),
            corpus=doc.get("corpus", []),
            planted=planted,
            name=doc.get("model_name", "ngram"),
        )
    raise InvalidInputError(f"unknown model type {kind!r}; expected one of {MODEL_FILE_TYPES}")


def load_model_file(path) -> TokenDistributionProvider:
    with open(path, "r", encoding="utf-8") as fh:
        return model_from_dict(json.load(fh))


def save_model_file(path, model: TableModel) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(table_model_to_dict(model), fh, indent=1, sort_keys=True)
        fh.write("\n")
