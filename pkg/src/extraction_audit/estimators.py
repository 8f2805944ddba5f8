"""Monte Carlo estimation, sample-size calculators, and the exact oracle.

The oracle enumerates the complete top-k tree and is the desk-scale ground
truth the search bounds are checked against; MC is the unbiased but
expensive baseline the whole approach is costed against.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass
from statistics import NormalDist
from typing import Dict, Optional, Sequence, Tuple

from .distance import DistanceKind, distance
from .model import (
    DecodingPolicy,
    InvalidInputError,
    TokenDistributionProvider,
    step_distribution,
)
from .util import KahanSum

TokenSeq = Tuple[int, ...]


@dataclass(frozen=True)
class McConfig:
    samples: int
    seed: int
    dist: DistanceKind
    epsilon: int
    confidence_level: float = 0.95

    def __post_init__(self):
        if self.samples < 1:
            raise InvalidInputError(f"samples must be >= 1, got {self.samples}")
        if not (0 < self.confidence_level < 1):
            raise InvalidInputError(f"confidence level {self.confidence_level} outside (0, 1)")


@dataclass(frozen=True)
class McEstimate:
    p_hat: float
    hits: int
    ci_low: float
    ci_high: float
    samples: int


def wilson_interval(hits: int, n: int, confidence_level: float) -> Tuple[float, float]:
    """Wilson score interval; behaves sensibly at zero hits."""
    if n < 1:
        raise InvalidInputError("interval needs at least one sample")
    z = NormalDist().inv_cdf(0.5 + confidence_level / 2.0)
    phat = hits / n
    denom = 1.0 + z * z / n
    center = (phat + z * z / (2 * n)) / denom
    half = (z / denom) * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n))
    return max(0.0, center - half), min(1.0, center + half)


_CHUNKS_PER_DIGEST = 4  # a sha256 digest carries four independent 8-byte draws


def _digest(seed: int, sample_index: int, block: int) -> bytes:
    return hashlib.sha256(struct.pack(">qqq", seed, sample_index, block)).digest()


def _uniform(seed: int, sample_index: int, step: int) -> float:
    """Counter-based uniform draw keyed by (seed, sample, step).

    Reproducible regardless of draw order, so samples can be farmed out to
    parallel workers without changing results.  Steps are grouped four to a
    digest; the key still fully determines the value.
    """
    block, chunk = divmod(step - 1, _CHUNKS_PER_DIGEST)
    word = _digest(seed, sample_index, block)[8 * chunk : 8 * chunk + 8]
    return int.from_bytes(word, "big") / 2.0**64


def _draw(support: Tuple[int, ...], cumprobs, u: float) -> int:
    for tok, cum in zip(support, cumprobs):
        if u < cum:
            return tok
    return support[-1]  # rounding residue lands on the last token


def mc_estimate(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    target: Sequence[int],
    policy: DecodingPolicy,
    config: McConfig,
) -> McEstimate:
    """Ancestral-sampling estimate of the near-verbatim mass.

    Draws M independent T-length continuations from the renormalized top-k
    step distributions; a sample hits iff its distance to the target is
    within epsilon.  An EOS draw before depth T truncates the sample and
    counts as a miss, matching the search's EOS policy.
    """
    target = tuple(int(t) for t in target)
    T = len(target)
    prefix = tuple(int(t) for t in prefix)
    eos = provider.vocabulary.eos
    step_cache: Dict[TokenSeq, Tuple[Tuple[int, ...], Tuple[float, ...]]] = {}

    def step(history: TokenSeq):
        entry = step_cache.get(history)
        if entry is None:
            sd = step_distribution(provider, history, policy)
            acc, cums = 0.0, []
            for lp in sd.logprobs:
                acc += math.exp(lp)
                cums.append(acc)
            entry = (sd.support, tuple(cums))
            step_cache[history] = entry
        return entry

    # The top-k tree has at most k^T distinct continuations, so hit checks
    # memoize cleanly even at large sample counts.
    hit_cache: Dict[TokenSeq, bool] = {}
    hits = 0
    for w in range(config.samples):
        history = prefix
        truncated = False
        digest = b""
        for t in range(1, T + 1):
            block, chunk = divmod(t - 1, _CHUNKS_PER_DIGEST)
            if chunk == 0:
                digest = _digest(config.seed, w, block)
            u = int.from_bytes(digest[8 * chunk : 8 * chunk + 8], "big") / 2.0**64
            support, cums = step(history)
            tok = _draw(support, cums, u)
            history = history + (tok,)
            if eos is not None and tok == eos and t < T:
                truncated = True
                break
        if truncated:
            continue
        sample = history[len(prefix) :]
        hit = hit_cache.get(sample)
        if hit is None:
            hit = distance(config.dist, sample, target) <= config.epsilon
            hit_cache[sample] = hit
        if hit:
            hits += 1
    lo, hi = wilson_interval(hits, config.samples, config.confidence_level)
    return McEstimate(
        p_hat=hits / config.samples, hits=hits, ci_low=lo, ci_high=hi, samples=config.samples
    )


def pooled_estimate(estimates: Sequence[McEstimate], confidence_level: float = 0.95) -> McEstimate:
    """Pool replicates by concatenation: sum hits and sample counts."""
    if not estimates:
        raise InvalidInputError("no estimates to pool")
    hits = sum(e.hits for e in estimates)
    n = sum(e.samples for e in estimates)
    lo, hi = wilson_interval(hits, n, confidence_level)
    return McEstimate(p_hat=hits / n, hits=hits, ci_low=lo, ci_high=hi, samples=n)


def mc_detection_sample_size(p: float, delta: float) -> int:
    """Samples needed to hit a set of mass p at least once with miss
    probability at most delta: ceil(ln(1/delta) / -ln(1-p))."""
    if not (0 < p < 1):
        raise InvalidInputError(f"p={p} outside (0, 1)")
    if not (0 < delta < 1):
        raise InvalidInputError(f"delta={delta} outside (0, 1)")
    return math.ceil(math.log(1.0 / delta) / -math.log1p(-p))


def mc_relse_sample_size(p: float, eta: float) -> int:
    """Samples for a relative standard error of eta: ceil((1-p) / (eta^2 p))."""
    if not (0 < p < 1):
        raise InvalidInputError(f"p={p} outside (0, 1)")
    if not (eta > 0):
        raise InvalidInputError(f"eta={eta} must be > 0")
    return math.ceil((1.0 - p) / (eta * eta * p))


def rank_budget(
    tau: float,
    *,
    rank: Optional[int] = None,
    alpha: Optional[float] = None,
    length: Optional[int] = None,
) -> int:
    """Max number of steps a mass->=tau continuation can spend at per-token
    probability <= alpha (or at rank >= R, with alpha = 1/R).

    Computed as max{c : alpha^c >= tau}: float log ratios sit fractionally
    below an exact integer for natural inputs like tau=1e-3, alpha=0.1, so a
    naive floor underreports.
    """
    if not (0 < tau <= 1):
        raise InvalidInputError(f"tau={tau} outside (0, 1]")
    if (rank is None) == (alpha is None):
        raise InvalidInputError("pass exactly one of rank or alpha")
    if rank is not None:
        if rank < 2:
            raise InvalidInputError(f"rank must be >= 2, got {rank}")
        alpha = 1.0 / rank
    if not (0 < alpha < 1):
        raise InvalidInputError(f"alpha={alpha} outside (0, 1)")
    if tau == 1.0:
        budget = 0
    else:
        budget = max(0, math.floor(math.log(tau) / math.log(alpha)) - 1)
        while alpha ** (budget + 1) >= tau:
            budget += 1
    if length is not None:
        budget = min(budget, length)
    return budget


class OracleGuardError(RuntimeError):
    """Exhaustive enumeration refused; carries the estimated tree size."""

    def __init__(self, estimated_leaves: int, limit: int):
        super().__init__(
            f"refusing exhaustive enumeration: ~{estimated_leaves} leaves exceeds limit {limit}"
        )
        self.estimated_leaves = estimated_leaves
        self.limit = limit


def oracle_exact_mass(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    target: Sequence[int],
    policy: DecodingPolicy,
    kind: DistanceKind,
    epsilon: int,
    max_leaves: int = 10**7,
) -> float:
    """Exact near-verbatim mass by depth-first enumeration of the top-k tree.

    Accumulates exp(logp) over every depth-T leaf within epsilon of the
    target (compensated summation); EOS-tipped paths before depth T
    contribute nothing.  Refuses when k^T exceeds ``max_leaves``.
    """
    target = tuple(int(t) for t in target)
    T = len(target)
    estimated = policy.k**T
    if estimated > max_leaves:
        raise OracleGuardError(estimated, max_leaves)
    prefix = tuple(int(t) for t in prefix)
    eos = provider.vocabulary.eos
    acc = KahanSum()

    def descend(history: TokenSeq, depth: int, logp: float) -> None:
        sd = step_distribution(provider, history, policy)
        for tok, lp in zip(sd.support, sd.logprobs):
            child_logp = logp + lp
            if depth == T:
                cont = history[len(prefix) :] + (tok,)
                if distance(kind, cont, target) <= epsilon:
                    acc.add(math.exp(child_logp))
            elif eos is not None and tok == eos:
                continue
            else:
                descend(history + (tok,), depth + 1, child_logp)

    descend(prefix, 1, 0.0)
    return acc.value
