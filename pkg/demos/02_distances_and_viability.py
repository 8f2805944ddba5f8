"""Distances, epsilon-ball sizes, and streaming viability.

Reproduces the worked dynamic-programming tables and shows how the banded
streaming oracle prunes a path the moment no completion can stay inside the
edit budget.
"""

from extraction_audit import hamming, hamming_ball_size, levenshtein
from extraction_audit.distance import LevenshteinViability, levenshtein_table

# Equal-length sequences: Levenshtein never exceeds Hamming.
b, c = (1, 2, 3, 4), (2, 3, 4, 1)  # rotate four distinct tokens
print(f"rotation example: Hamming={hamming(b, c)}, Levenshtein={levenshtein(b, c)}")

# Ball sizes explode immediately at realistic scale.
for eps in (0, 1, 2):
    size = hamming_ball_size(32000, 50, eps)
    print(f"|V|=32000, T=50, eps={eps}: Hamming ball holds {size:,} sequences")
print("-> enumerating even eps=2 is hopeless; bounds have to come from search.\n")

# Full table for a short alignment: last row tells the whole story.
table = levenshtein_table((1, 2), (0, 1, 2))
print("D rows for generated (b,c) vs target (a,b,c):")
for i, row in enumerate(table):
    print(f"  i={i}: {row}")
print("row minimum 1 at j=3: insert 'a', then match 'b' and 'c'.\n")

# Streaming: the row minimum can rise past the budget mid-path.
target, stream = (0, 1, 2, 3), (1, 2, 0, 3)
for eps in (2, 1):
    oracle = LevenshteinViability(target, epsilon=eps)
    state = oracle.init()
    minima = []
    verdict = "viable to the end"
    for t, tok in enumerate(stream, start=1):
        state, eps_star = oracle.update(state, tok, t)
        minima.append(eps_star)
        if eps_star > eps:
            verdict = f"pruned at t={t}"
            break
    print(f"eps={eps}: row minima {minima} -> {verdict}")
