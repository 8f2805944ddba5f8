"""Aggregate extraction statistics over a corpus of audited sequences.

Inputs are per-sequence results carrying a teacher-forced verbatim mass and
a nondecreasing near-verbatim mass vector over epsilon = 0..epsilon_max;
outputs are rates, mass gains, epsilon-shell decompositions, CCDF points,
per-position heatmap coverage, and token-evaluation cost comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from .distance import DistanceKind, distance
from .model import InvalidInputError

#: Default epsilon ceiling for Levenshtein mass vectors.
DEFAULT_EPSILON_MAX = 5

#: Shell masses more negative than this indicate broken inputs, not rounding.
CLAMP_TOLERANCE = 1e-9


@dataclass(frozen=True)
class SequenceResult:
    """Per-sequence audit result.

    ``nearverbatim_mass[eps]`` is the mass within distance eps for
    eps = 0..epsilon_max (nondecreasing); ``verbatim_mass`` is the exact
    teacher-forced probability of the target suffix.  ``greedy_distance`` is
    None when the greedy continuation truncated at EOS and the configured
    distance needs equal lengths.
    """

    id: str
    verbatim_mass: float
    nearverbatim_mass: Tuple[float, ...]
    greedy_distance: Optional[int] = None
    token_evals: int = 0
    char_span: Optional[Tuple[int, int]] = None

    def __post_init__(self):
        if not self.nearverbatim_mass:
            raise InvalidInputError("mass vector must be nonempty")
        for m in self.nearverbatim_mass + (self.verbatim_mass,):
            if not (-CLAMP_TOLERANCE <= m <= 1 + CLAMP_TOLERANCE):
                raise InvalidInputError(f"mass {m} outside [0, 1]")
        for lo, hi in zip(self.nearverbatim_mass, self.nearverbatim_mass[1:]):
            if hi < lo - CLAMP_TOLERANCE:
                raise InvalidInputError("mass vector must be nondecreasing in epsilon")


@dataclass(frozen=True)
class ShellDecomposition:
    """Incremental mass per epsilon-shell plus each shell's share of the total."""

    shell_mass: Tuple[float, ...]
    shell_share: Tuple[float, ...]
    verbatim_share: float


def success_greedy(
    greedy_continuation: Sequence[int],
    target: Sequence[int],
    kind: DistanceKind,
    epsilon: int,
) -> bool:
    """Greedy extraction succeeds iff dist(continuation, target) <= epsilon."""
    return distance(kind, greedy_continuation, target) <= epsilon


def success_probabilistic(mass: float, tau_min: float) -> bool:
    """Probabilistic extraction succeeds iff the mass reaches tau_min."""
    if not (0 <= mass <= 1):
        raise InvalidInputError(f"mass {mass} outside [0, 1]")
    if not (0 < tau_min <= 1):
        raise InvalidInputError(f"tau_min {tau_min} outside (0, 1]")
    return mass >= tau_min


def extraction_rate(
    results: Sequence[SequenceResult], predicate: Callable[[SequenceResult], bool]
) -> float:
    """Fraction of results satisfying the success predicate."""
    if not results:
        raise InvalidInputError("extraction rate over an empty result set")
    return sum(1 for r in results if predicate(r)) / len(results)


def mass_gain(result: SequenceResult) -> float:
    """Extra mass revealed by the near-verbatim relaxation:
    mass[eps_max] - mass[0]."""
    return result.nearverbatim_mass[-1] - result.nearverbatim_mass[0]


def shells(result: SequenceResult) -> ShellDecomposition:
    """Decompose the mass vector into incremental epsilon-shells.

    Shell eps carries mass[eps] - mass[eps-1] (shell 0 carries mass[0]),
    clamped at zero; clamping beyond rounding noise is a data error.  Shares
    are against the total mass, all zero for zero-mass sequences.
    """
    masses = result.nearverbatim_mass
    shell_mass: List[float] = []
    for eps, m in enumerate(masses):
        delta = m if eps == 0 else m - masses[eps - 1]
        if delta < -CLAMP_TOLERANCE:
            raise InvalidInputError(f"shell {eps} mass {delta} below clamp tolerance")
        shell_mass.append(max(0.0, delta))
    total = masses[-1]
    if total > 0:
        shell_share = tuple(d / total for d in shell_mass)
        verbatim_share = masses[0] / total
    else:
        shell_share = tuple(0.0 for _ in shell_mass)
        verbatim_share = 0.0
    return ShellDecomposition(tuple(shell_mass), shell_share, verbatim_share)


def ccdf(gains: Sequence[float], thresholds: Sequence[float]) -> List[Tuple[float, float]]:
    """CCDF points: for each threshold x, the fraction of the population
    with gain >= x.  Nonincreasing in x."""
    if not gains:
        raise InvalidInputError("ccdf over an empty population")
    n = len(gains)
    return [(float(x), sum(1 for g in gains if g >= x) / n) for x in thresholds]


def heatmap_coverage(
    results: Sequence[SequenceResult],
    text_length: int,
    epsilon: Optional[int] = None,
    tau_min: Optional[float] = None,
) -> Tuple[List[float], List[bool]]:
    """Per-position maximum extraction mass across covering suffix spans.

    ``epsilon`` selects which mass to project (None = verbatim).  Returns the
    position-wise max vector and, when tau_min is given, a flag per position
    marking it extractable (max >= tau_min).
    """
    coverage = [0.0] * text_length
    for r in results:
        if r.char_span is None:
            continue
        start, end = r.char_span
        if not (0 <= start <= end <= text_length):
            raise InvalidInputError(f"span {r.char_span} outside text of length {text_length}")
        mass = r.verbatim_mass if epsilon is None else r.nearverbatim_mass[epsilon]
        for pos in range(start, end):
            if mass > coverage[pos]:
                coverage[pos] = mass
    if tau_min is None:
        flags = [True] * text_length
    else:
        flags = [v >= tau_min for v in coverage]
    return coverage, flags


def token_eval_cost(method: str, n_pre: int, suffix_len: int, B: int = 20, M: int = 20) -> int:
    """Token evaluations for one prefix/suffix pair under each method."""
    T = suffix_len
    costs = {
        "greedy": n_pre + (T - 1),
        "teacher_forcing": n_pre + T,
        "kcbs": n_pre + (T - 1) * B,
        "mc": n_pre + (T - 1) * M,
    }
    if method not in costs:
        raise InvalidInputError(f"unknown method {method!r}; expected one of {sorted(costs)}")
    return costs[method]


def cost_summary(
    results: Sequence[SequenceResult],
    n_pre: int,
    suffix_len: int,
    B: int = 20,
    mc_samples: Sequence[int] = (20, 3000, 100000),
) -> Dict[str, object]:
    """Actual token-evaluation totals plus the per-method comparison table
    (cost per pair and ratio against greedy)."""
    greedy = token_eval_cost("greedy", n_pre, suffix_len)
    table = {
        "greedy": greedy,
        "teacher_forcing": token_eval_cost("teacher_forcing", n_pre, suffix_len),
        "kcbs": token_eval_cost("kcbs", n_pre, suffix_len, B=B),
    }
    for m in mc_samples:
        table[f"mc_{m}"] = token_eval_cost("mc", n_pre, suffix_len, M=m)
    return {
        "actual_total": sum(r.token_evals for r in results),
        "per_pair": table,
        "ratio_vs_greedy": {name: cost / greedy for name, cost in table.items()},
    }


def join_by_id(
    left: Sequence[SequenceResult], right: Sequence[SequenceResult]
) -> List[Tuple[SequenceResult, SequenceResult]]:
    """Pair results from two runs by sequence id (for fixed-set comparisons
    across models).  Ids must identify the same underlying text; nothing is
    assumed about token alignment."""
    right_by_id = {r.id: r for r in right}
    return [(l, right_by_id[l.id]) for l in left if l.id in right_by_id]


def geometric_mean_floor(tau: float, suffix_len: int) -> float:
    """Per-token probability a mass->=tau continuation must sustain on
    average: tau^(1/T)."""
    if not (0 < tau <= 1):
        raise InvalidInputError(f"tau={tau} outside (0, 1]")
    return tau ** (1.0 / suffix_len)
