"""Decoding policies on a toy vocabulary.

Walks through the chain from raw logits to a renormalized top-k step
distribution, and shows why temperature never changes which tokens the
policy keeps.
"""

import numpy as np

from extraction_audit import (
    DecodingPolicy,
    TableModel,
    Vocabulary,
    log_softmax,
    teacher_force_verbatim,
    topk_step,
)

row = np.array([2.0, 0.5, 1.5, -1.0, 0.0, -0.5])
print("logits:        ", row)
print("full softmax:  ", np.round(np.exp(log_softmax(row)), 4))

for beta in (0.5, 1.0, 2.0):
    sd = topk_step(row, DecodingPolicy(k=3, beta=beta))
    probs = {tok: round(float(np.exp(lp)), 4) for tok, lp in zip(sd.support, sd.logprobs)}
    print(f"top-3 at beta={beta}: support={sd.support} probs={probs}")
print("-> the support never moves; only the renormalized probabilities do.\n")

# Teacher forcing scores a fixed suffix along its own path, no sampling.
vocab = Vocabulary(size=6)
model = TableModel(
    vocab,
    rows={
        (0,): [0.0, 3.0, 1.0, 0.0, 0.0, 0.0],
        (0, 1): [0.0, 0.0, 4.0, 2.0, 0.0, 0.0],
    },
    default_row=[1.0, 1.0, 1.0, 1.0, 1.0, 1.0],
)
policy = DecodingPolicy(k=3)
for suffix in [(1, 2), (1, 3), (5, 5)]:
    logp = teacher_force_verbatim(model, (0,), suffix, policy)
    print(f"suffix {suffix}: log p = {logp:.4f}"
          if logp != float("-inf") else f"suffix {suffix}: outside top-k -> p = 0")
