"""Token-sequence distances, ball combinatorics, and streaming viability.

The beam search prunes on *viability*: a sound lower bound on the final
distance achievable by any completion of a partial path.  Hamming viability
is a monotone mismatch counter; Levenshtein viability is a banded
Wagner-Fischer row (Ukkonen band of width <= 2*epsilon+1) whose minimum
lower-bounds every completion's cost.
"""

from __future__ import annotations

import enum
import itertools
import math
from dataclasses import dataclass
from typing import Iterator, List, Optional, Sequence, Tuple

from .model import InvalidInputError

TokenSeq = Tuple[int, ...]

# Saturating stand-in for +inf band predecessors; plain int, no overflow.
_FAR = 10**9


class DistanceKind(enum.Enum):
    HAMMING = "ham"
    LEVENSHTEIN = "lev"


def hamming(b: Sequence[int], c: Sequence[int]) -> int:
    """Number of positional mismatches between equal-length sequences."""
    if len(b) != len(c):
        raise InvalidInputError(f"hamming needs equal lengths, got {len(b)} and {len(c)}")
    return sum(1 for x, y in zip(b, c) if x != y)


def levenshtein_table(b: Sequence[int], c: Sequence[int]) -> List[List[int]]:
    """Full Wagner-Fischer table D with D[i][j] = edits(b[:i] -> c[:j]).

    Boundary D[i][0] = i, D[0][j] = j; interior cells take the min of
    delete, insert, and match/substitute moves.
    """
    nb, nc = len(b), len(c)
    table = [[0] * (nc + 1) for _ in range(nb + 1)]
    for j in range(nc + 1):
        table[0][j] = j
    for i in range(1, nb + 1):
        table[i][0] = i
        prev, cur = table[i - 1], table[i]
        for j in range(1, nc + 1):
            cur[j] = min(
                prev[j] + 1,
                cur[j - 1] + 1,
                prev[j - 1] + (0 if b[i - 1] == c[j - 1] else 1),
            )
    return table


def levenshtein(b: Sequence[int], c: Sequence[int]) -> int:
    """Minimum unit-cost edit-script length (full, unbanded reference)."""
    return levenshtein_table(b, c)[len(b)][len(c)]


def distance(kind: DistanceKind, b: Sequence[int], c: Sequence[int]) -> int:
    if kind is DistanceKind.HAMMING:
        return hamming(b, c)
    return levenshtein(b, c)


def hamming_ball_size(vocab_size: int, length: int, epsilon: int) -> int:
    """Exact count of length-T sequences within Hamming distance epsilon.

    sum_{r=0..epsilon} C(T, r) * (|V|-1)^r, in exact integer arithmetic
    (the value passes 10^12 at epsilon = 2 for realistic vocabularies).
    """
    if not (0 <= epsilon <= length):
        raise InvalidInputError(f"epsilon={epsilon} outside [0, {length}]")
    if vocab_size < 1:
        raise InvalidInputError(f"vocab_size must be >= 1, got {vocab_size}")
    return sum(math.comb(length, r) * (vocab_size - 1) ** r for r in range(epsilon + 1))


def ball_enumeration(
    vocab_size: int,
    target: Sequence[int],
    kind: DistanceKind,
    epsilon: int,
    limit: int = 10**6,
) -> Iterator[TokenSeq]:
    """Enumerate the epsilon-ball of a target over V^T for tiny instances.

    There is no closed form for the Levenshtein ball, so counting is by
    enumeration only; refuses when |V|^T exceeds ``limit``.
    """
    length = len(target)
    total = vocab_size**length
    if total > limit:
        raise InvalidInputError(f"enumeration over |V|^T = {total} exceeds limit {limit}")
    tgt = tuple(int(t) for t in target)
    for cand in itertools.product(range(vocab_size), repeat=length):
        if distance(kind, cand, tgt) <= epsilon:
            yield cand


def ball_size_enumerated(vocab_size, target, kind, epsilon, limit: int = 10**6) -> int:
    return sum(1 for _ in ball_enumeration(vocab_size, target, kind, epsilon, limit))


# ---------------------------------------------------------------------------
# Streaming viability oracles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HammingState:
    """Running mismatch count against the target prefix at ``depth``."""

    depth: int
    mismatches: int


@dataclass(frozen=True)
class LevBandState:
    """Banded Wagner-Fischer row for the partial path at ``depth``.

    ``row[j - j_lo]`` holds D[depth, j] for j in the Ukkonen band
    [max(0, depth-eps), min(T, depth+eps)]; every stored cell is >= |depth-j|.
    """

    depth: int
    row: Tuple[int, ...]


def band_limits(depth: int, length: int, epsilon: int) -> Tuple[int, int]:
    """Inclusive column range of the Ukkonen band at a given row."""
    return max(0, depth - epsilon), min(length, depth + epsilon)


class ViabilityOracle:
    """Init/Update/IsFinal contract for streaming epsilon-viability.

    ``update`` returns (new state, eps_star) where eps_star soundly
    lower-bounds the final distance of every completion: a path whose
    completion can end within epsilon never sees eps_star > epsilon.
    """

    kind: DistanceKind

    def __init__(self, target: Sequence[int], epsilon: int):
        if epsilon < 0:
            raise InvalidInputError(f"epsilon must be >= 0, got {epsilon}")
        self.target: TokenSeq = tuple(int(t) for t in target)
        self.epsilon = int(epsilon)
        self.length = len(self.target)

    def init(self):
        raise NotImplementedError

    def update(self, state, token: int, t: Optional[int] = None):
        raise NotImplementedError

    def is_final(self, state) -> bool:
        raise NotImplementedError

    def _check_depth(self, state, t: Optional[int]) -> int:
        depth = state.depth + 1
        if t is not None and t != depth:
            raise InvalidInputError(f"update at t={t} but state is at depth {state.depth}")
        if depth > self.length:
            raise InvalidInputError(f"update past depth {self.length}")
        return depth


class HammingViability(ViabilityOracle):
    """Monotone mismatch counter; viable iff count <= epsilon."""

    kind = DistanceKind.HAMMING

    def init(self) -> HammingState:
        return HammingState(depth=0, mismatches=0)

    def update(self, state: HammingState, token: int, t: Optional[int] = None):
        depth = self._check_depth(state, t)
        n = state.mismatches + (1 if token != self.target[depth - 1] else 0)
        return HammingState(depth=depth, mismatches=n), n

    def is_final(self, state: HammingState) -> bool:
        # Surviving to depth T with n <= epsilon already certifies membership.
        if state.depth != self.length:
            raise InvalidInputError(f"is_final at depth {state.depth}, target length {self.length}")
        return state.mismatches <= self.epsilon


class LevenshteinViability(ViabilityOracle):
    """Banded Wagner-Fischer row; eps_star is the band minimum.

    The final acceptance test is explicit (D[T, T] <= epsilon): a full-length
    path may align well to a shorter target prefix and still exceed epsilon
    against the whole target.
    """

    kind = DistanceKind.LEVENSHTEIN

    def init(self) -> LevBandState:
        hi = min(self.length, self.epsilon)
        return LevBandState(depth=0, row=tuple(range(hi + 1)))

    def update(self, state: LevBandState, token: int, t: Optional[int] = None):
        depth = self._check_depth(state, t)
        eps = self.epsilon
        prev_lo, _ = band_limits(state.depth, self.length, eps)
        lo, hi = band_limits(depth, self.length, eps)
        prev = state.row

        def prev_cell(j: int) -> int:
            idx = j - prev_lo
            if 0 <= idx < len(prev):
                return prev[idx]
            return _FAR

        row: List[int] = []
        tgt = self.target
        for j in range(lo, hi + 1):
            if j == 0:
                row.append(prev_cell(0) + 1)
                continue
            insert = (row[j - 1 - lo] + 1) if j - 1 >= lo else _FAR
            delete = prev_cell(j) + 1
            match = prev_cell(j - 1) + (0 if token == tgt[j - 1] else 1)
            row.append(min(delete, insert, match))
        new_state = LevBandState(depth=depth, row=tuple(row))
        return new_state, min(row)

    def is_final(self, state: LevBandState) -> bool:
        if state.depth != self.length:
            raise InvalidInputError(f"is_final at depth {state.depth}, target length {self.length}")
        lo, hi = band_limits(state.depth, self.length, self.epsilon)
        if not (lo <= self.length <= hi):
            return False
        return state.row[self.length - lo] <= self.epsilon


def viability_oracle(kind: DistanceKind, target: Sequence[int], epsilon: int) -> ViabilityOracle:
    if kind is DistanceKind.HAMMING:
        return HammingViability(target, epsilon)
    return LevenshteinViability(target, epsilon)
