"""End-to-end corpus audit: chunk text, search every record, aggregate.

Mirrors what `extraction-audit run` does, but inline, so each stage's
output is visible. Uses a byte-level model that has "memorized" one phrase.
"""

import math
import random

from extraction_audit import (
    DecodingPolicy,
    DistanceKind,
    NGramModel,
    SearchConfig,
    Vocabulary,
    kcbs,
    teacher_force_verbatim,
)
from extraction_audit.corpus import ByteTokenizer, chunk_text
from extraction_audit.metrics import (
    SequenceResult,
    ccdf,
    extraction_rate,
    heatmap_coverage,
    mass_gain,
    shells,
    success_probabilistic,
)

LOG_ZERO = float("-inf")

text = ("the band played on. " * 6) + "so we beat on, boats against the current. " + (
    "nothing else happened here. " * 6
)
memorized = "so we beat on, boats against the current. "

rng = random.Random(3)
vocab = Vocabulary(size=256)
noise = [[rng.randrange(97, 122) for _ in range(12)] for _ in range(10)]
model = NGramModel(
    vocab, order=3, corpus=noise,
    planted=[(tuple(memorized.encode()) * 2, 80.0)],
)
policy = DecodingPolicy(k=3)

records = chunk_text(text, ByteTokenizer(), n_pre=12, suffix_len=6, stride_chars=9,
                     source="demo")
print(f"chunked {len(text)} characters into {len(records)} overlapping records\n")

eps_max, tau_min = 2, 0.001
results = []
for rec in records:
    lp = teacher_force_verbatim(model, rec.prefix, rec.suffix, policy)
    verbatim = 0.0 if lp == LOG_ZERO else math.exp(lp)
    out = kcbs(
        model, rec.prefix, rec.suffix,
        SearchConfig(beam_width=4, policy=policy, suffix_len=6,
                     dist=DistanceKind.LEVENSHTEIN, epsilon=eps_max),
    )
    masses = []
    for eps in range(eps_max + 1):
        masses.append(sum(
            math.exp(f.logp)
            for f in out.finals
            if f.final_distance is not None and f.final_distance <= eps
        ))
    results.append(SequenceResult(
        id=rec.id, verbatim_mass=verbatim, nearverbatim_mass=tuple(masses),
        token_evals=out.token_evals, char_span=rec.char_span,
    ))

for eps in range(eps_max + 1):
    rate = extraction_rate(
        results, lambda r, e=eps: success_probabilistic(r.nearverbatim_mass[e], tau_min)
    )
    print(f"extraction rate at eps={eps}: {rate:.3f}")

gains = [mass_gain(r) for r in results]
print("gain CCDF:", ccdf(gains, [1e-6, 1e-3, 1e-1]))

extracted = [r for r in results if r.nearverbatim_mass[-1] >= tau_min]
if extracted:
    top = max(extracted, key=lambda r: r.nearverbatim_mass[-1])
    d = shells(top)
    print(f"\nhottest record {top.id}: mass {top.nearverbatim_mass[-1]:.4f}, "
          f"verbatim share {d.verbatim_share:.3f}, shells {tuple(round(s, 3) for s in d.shell_share)}")

coverage, flags = heatmap_coverage(results, len(text.encode()), epsilon=eps_max,
                                   tau_min=tau_min)
hot = [i for i, f in enumerate(flags) if f]
if hot:
    lo, hi = min(hot), max(hot)
    print(f"extractable region spans bytes {lo}..{hi}:")
    print("  " + repr(text[lo:hi + 1]))
