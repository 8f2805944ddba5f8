"""Decoding-constrained beam search with exact top-k path probabilities.

Baseline search expands every beam item by its full top-k support, scores
children under the renormalized step distribution, and skips the final
across-beam prune, returning up to B*k depth-T candidates whose
probabilities are exact under the decoding policy.  Pruned variants discard
provably non-viable children (Hamming counter or banded Levenshtein row)
before ranking and bank the mass of viable candidates lost to the
across-beam prune, giving a lower bound plus a banked upper bound.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

from .distance import DistanceKind, distance, viability_oracle
from .model import (
    LOG_ZERO,
    DecodingPolicy,
    InvalidInputError,
    TokenDistributionProvider,
    step_distribution,
)
from .util import KahanSum

TokenSeq = Tuple[int, ...]

TERMINATION_COMPLETED = "completed"
TERMINATION_EMPTY = "empty_viable_set"
TERMINATION_TAU_MIN = "tau_min_cutoff"


class ProviderFailure(RuntimeError):
    """Provider raised during search; carries the failing depth."""

    def __init__(self, depth: int, cause: Exception):
        super().__init__(f"provider failed at depth {depth}: {cause}")
        self.depth = depth
        self.cause = cause


@dataclass(frozen=True)
class SearchConfig:
    """Search settings: width B, policy, suffix length T, optional pruning.

    ``dist``/``epsilon`` unset means baseline search (distance filtering is a
    post-step); set, they select the viability-pruned variant.  ``tau_min``
    enables early termination once no final can reach the extraction
    threshold.  ``debug_ledger`` additionally accumulates non-viable
    discarded mass so the full accounting identity can be audited.
    """

    beam_width: int
    policy: DecodingPolicy
    suffix_len: int
    dist: Optional[DistanceKind] = None
    epsilon: Optional[int] = None
    tau_min: Optional[float] = None
    record_eos: bool = True
    debug_ledger: bool = False

    def __post_init__(self):
        if self.beam_width < 1:
            raise InvalidInputError(f"beam width must be >= 1, got {self.beam_width}")
        if self.suffix_len < 1:
            raise InvalidInputError(f"suffix length must be >= 1, got {self.suffix_len}")
        if (self.dist is None) != (self.epsilon is None):
            raise InvalidInputError("pruned search needs both dist and epsilon (or neither)")
        if self.epsilon is not None and not (0 <= self.epsilon <= self.suffix_len):
            raise InvalidInputError(f"epsilon={self.epsilon} outside [0, {self.suffix_len}]")
        if self.tau_min is not None and not (0 < self.tau_min <= 1):
            raise InvalidInputError(f"tau_min={self.tau_min} outside (0, 1]")

    @property
    def pruned(self) -> bool:
        return self.dist is not None


@dataclass(frozen=True)
class BeamItem:
    """Partial path: continuation so far, cumulative top-k logp, aux state."""

    continuation: TokenSeq
    logp: float
    aux: object = None


@dataclass(frozen=True)
class FinalCandidate:
    continuation: TokenSeq
    logp: float
    final_distance: Optional[int] = None


@dataclass(frozen=True)
class EosRecord:
    continuation: TokenSeq
    logp: float
    depth: int


@dataclass(frozen=True)
class CostLedger:
    """Token evaluations: one prefill pass plus one eval per live beam item
    per completed decode step."""

    prefill_tokens: int
    decode_tokens: int

    @property
    def total(self) -> int:
        return self.prefill_tokens + self.decode_tokens


@dataclass(frozen=True)
class SearchOutcome:
    finals: Tuple[FinalCandidate, ...]
    lower_bound: float
    upper_bound: float
    bank: float
    covered_mass: float
    eos_records: Tuple[EosRecord, ...]
    eos_mass: float
    pruned_mass: float
    nonviable_mass: Optional[float]
    termination: str
    termination_depth: Optional[int]
    cost: CostLedger
    config: SearchConfig = field(repr=False)
    ub_uninformative: bool = False

    @property
    def token_evals(self) -> int:
        return self.cost.total


def _rank_key(item: Tuple[TokenSeq, float, object]):
    # logp descending, then token-sequence lexicographic: platform-stable.
    return (-item[1], item[0])


def kcbs(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    target: Optional[Sequence[int]],
    config: SearchConfig,
) -> SearchOutcome:
    """Run top-k constrained beam search (baseline or viability-pruned).

    Children inherit ``parent logp + step logprob``; EOS-tipped children at
    t < T are recorded and removed; the across-beam prune keeps the top B by
    log-probability with a deterministic tie-break, and is skipped at t = T.
    """
    prefix = tuple(int(t) for t in prefix)
    if len(prefix) == 0:
        raise InvalidInputError("prefix must be nonempty")
    T = config.suffix_len
    B = config.beam_width
    k = config.policy.k
    if B > k * k:
        warnings.warn(f"beam width {B} exceeds k^2 = {k * k}", stacklevel=2)

    oracle = None
    if config.pruned:
        if target is None:
            raise InvalidInputError("pruned search requires a target")
        if len(target) != T:
            raise InvalidInputError(f"target length {len(target)} != suffix length {T}")
        oracle = viability_oracle(config.dist, target, config.epsilon)

    eos = provider.vocabulary.eos
    tau_beam = config.tau_min / (B * k) if config.tau_min is not None else None

    bank = KahanSum()
    prune_ledger = KahanSum()
    eos_ledger = KahanSum()
    nonviable = KahanSum() if config.debug_ledger else None
    eos_records: List[EosRecord] = []

    prefill = len(prefix)
    decode = 0

    def kahan_over(finals) -> float:
        acc = KahanSum()
        for f in finals:
            acc.add(_exp(f.logp))
        return acc.value

    def outcome(finals, lb, ub, term, depth):
        covered = kahan_over(finals)
        uninformative = (lb == 0.0) if config.pruned else (term != TERMINATION_COMPLETED)
        return SearchOutcome(
            finals=tuple(finals),
            lower_bound=lb,
            upper_bound=min(ub, 1.0),
            bank=bank.value if config.pruned else 0.0,
            covered_mass=covered,
            eos_records=tuple(eos_records),
            eos_mass=eos_ledger.value,
            pruned_mass=prune_ledger.value,
            nonviable_mass=nonviable.value if nonviable is not None else None,
            termination=term,
            termination_depth=depth,
            cost=CostLedger(prefill_tokens=prefill, decode_tokens=decode),
            config=config,
            ub_uninformative=uninformative,
        )

    beam: List[BeamItem] = [
        BeamItem(continuation=(), logp=0.0, aux=oracle.init() if oracle else None)
    ]

    for t in range(1, T + 1):
        candidates: List[Tuple[TokenSeq, float, object, Optional[int]]] = []
        for item in beam:
            try:
                sd = step_distribution(provider, prefix + item.continuation, config.policy)
            except Exception as exc:  # pragma: no cover - provider-specific
                raise ProviderFailure(t, exc) from exc
            for tok, lp in zip(sd.support, sd.logprobs):
                child_logp = item.logp + lp
                if oracle is not None:
                    aux, eps_star = oracle.update(item.aux, tok, t)
                    if eps_star > config.epsilon:
                        if nonviable is not None:
                            nonviable.add(_exp(child_logp))
                        continue
                else:
                    aux, eps_star = None, None
                candidates.append((item.continuation + (tok,), child_logp, aux, eps_star))

        if t == T:
            finals = []
            for cont, logp, aux, eps_star in candidates:
                if oracle is not None:
                    if not oracle.is_final(aux):
                        if nonviable is not None:
                            nonviable.add(_exp(logp))
                        continue
                    finals.append(FinalCandidate(cont, logp, _final_distance(config.dist, aux)))
                else:
                    finals.append(FinalCandidate(cont, logp, None))
            if config.pruned:
                lb = kahan_over(finals)
                ub = lb + bank.value
            else:
                lb = 0.0
                ub = lb + (1.0 - kahan_over(finals))
            return outcome(finals, lb, ub, TERMINATION_COMPLETED, None)

        # Non-final step: EOS removal, then the across-beam prune.
        if eos is not None:
            kept = []
            for cand in candidates:
                if cand[0][-1] == eos:
                    eos_ledger.add(_exp(cand[1]))
                    if config.record_eos:
                        eos_records.append(EosRecord(cand[0], cand[1], t))
                else:
                    kept.append(cand)
            candidates = kept

        if not candidates:
            if config.pruned:
                return outcome([], 0.0, bank.value, TERMINATION_EMPTY, t)
            return outcome([], 0.0, 1.0, TERMINATION_EMPTY, t)

        candidates.sort(key=_rank_key)
        survivors, cut = candidates[:B], candidates[B:]
        for cand in cut:
            prune_ledger.add(_exp(cand[1]))
            if config.pruned:
                bank.add(_exp(cand[1]))

        beam = [BeamItem(cont, logp, aux) for cont, logp, aux, _ in survivors]

        if tau_beam is not None and _exp(beam[0].logp) < tau_beam:
            if config.pruned:
                return outcome([], 0.0, bank.value, TERMINATION_TAU_MIN, t)
            return outcome([], 0.0, 1.0, TERMINATION_TAU_MIN, t)

        decode += len(beam)

    raise AssertionError("unreachable")  # loop always returns at t == T


def _exp(logp: float) -> float:
    return math.exp(logp) if logp != LOG_ZERO else 0.0


def _final_distance(kind: DistanceKind, aux) -> int:
    if kind is DistanceKind.HAMMING:
        return aux.mismatches
    return aux.row[-1]  # band at depth T ends at column T, so this is D[T, T]


@dataclass(frozen=True)
class FilterResult:
    lower_bound: float
    matches: Tuple[FinalCandidate, ...]


def postprocess_filter(
    finals: Sequence[FinalCandidate],
    target: Sequence[int],
    kind: DistanceKind,
    epsilon: int,
) -> FilterResult:
    """Filter baseline finals to the epsilon-ball and sum their mass.

    The sum is a valid lower bound on the near-verbatim mass and is monotone
    nondecreasing in epsilon.
    """
    target = tuple(int(t) for t in target)
    acc = KahanSum()
    matches = []
    for f in finals:
        if len(f.continuation) != len(target):
            raise InvalidInputError(
                f"final length {len(f.continuation)} != target length {len(target)}"
            )
        d = distance(kind, f.continuation, target)
        if d <= epsilon:
            acc.add(_exp(f.logp))
            matches.append(FinalCandidate(f.continuation, f.logp, d))
    return FilterResult(lower_bound=acc.value, matches=tuple(matches))


def baseline_bounds(
    outcome: SearchOutcome,
    target: Sequence[int],
    kind: DistanceKind,
    epsilon: int,
) -> Tuple[float, float]:
    """(LB, UB) for a baseline run: filtered mass plus the loose covered-mass
    upper bound LB + (1 - covered)."""
    lb = postprocess_filter(outcome.finals, target, kind, epsilon).lower_bound
    return lb, min(lb + (1.0 - outcome.covered_mass), 1.0)


def heavy_mass_floor(beam_width: int) -> float:
    """Cumulative probability above which a path survives every across-beam
    prune: 1 / (B + 1)."""
    return 1.0 / (beam_width + 1)


class AuditError(AssertionError):
    """Mass accounting identity violated; message carries the residual."""


@dataclass(frozen=True)
class MassAudit:
    components: dict
    total: float
    residual: float


def mass_audit(outcome: SearchOutcome, tolerance: float = 1e-9) -> MassAudit:
    """Check the frontier identity: every unit of top-k mass is accounted for.

    Baseline: covered + across-beam-pruned + eos = 1.  Pruned (with the debug
    ledger on): covered + bank + eos + non-viable-discarded = 1.
    """
    if outcome.termination == TERMINATION_TAU_MIN:
        raise InvalidInputError("mass audit undefined for tau-min-terminated runs")
    if outcome.config.pruned:
        if outcome.nonviable_mass is None:
            raise InvalidInputError("pruned-run audit needs debug_ledger=True")
        components = {
            "covered": outcome.covered_mass,
            "bank": outcome.bank,
            "eos": outcome.eos_mass,
            "nonviable": outcome.nonviable_mass,
        }
    else:
        components = {
            "covered": outcome.covered_mass,
            "pruned": outcome.pruned_mass,
            "eos": outcome.eos_mass,
        }
    total = sum(components.values())
    residual = total - 1.0
    if abs(residual) > tolerance:
        raise AuditError(f"mass identity violated: residual {residual:+.3e} ({components})")
    return MassAudit(components=components, total=total, residual=residual)


@dataclass(frozen=True)
class StepStat:
    token: int
    rank: Optional[int]
    logprob: float


def path_step_stats(
    provider: TokenDistributionProvider,
    prefix: Sequence[int],
    continuation: Sequence[int],
    policy: DecodingPolicy,
) -> List[StepStat]:
    """Replay a continuation, reporting each realized token's rank and
    renormalized log-probability in its step distribution."""
    history = tuple(int(t) for t in prefix)
    stats = []
    for tok in continuation:
        sd = step_distribution(provider, history, policy)
        stats.append(StepStat(token=int(tok), rank=sd.rank(int(tok)), logprob=sd.logprob(int(tok))))
        history = history + (int(tok),)
    return stats
