"""Deterministic lower (and banked upper) bounds on near-verbatim
training-data extraction risk for autoregressive token models."""

from .distance import (
    DistanceKind,
    HammingViability,
    LevenshteinViability,
    hamming,
    hamming_ball_size,
    levenshtein,
    viability_oracle,
)
from .model import (
    LOG_ZERO,
    DecodingPolicy,
    InvalidInputError,
    NGramModel,
    StepDistribution,
    TableModel,
    TokenDistributionProvider,
    Vocabulary,
    apply_temperature,
    greedy_continuation,
    load_model_file,
    log_softmax,
    save_model_file,
    teacher_force_verbatim,
    topk_step,
)
from .search import (
    FinalCandidate,
    SearchConfig,
    SearchOutcome,
    baseline_bounds,
    heavy_mass_floor,
    kcbs,
    mass_audit,
    postprocess_filter,
)
from .estimators import (
    McConfig,
    McEstimate,
    mc_detection_sample_size,
    mc_estimate,
    mc_relse_sample_size,
    oracle_exact_mass,
    rank_budget,
)

__version__ = "0.1.0"
