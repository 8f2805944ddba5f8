import random

import pytest

from extraction_audit.model import NGramModel, Vocabulary


def random_ngram_model(
    rng: random.Random,
    vocab_size: int = 6,
    eos=None,
    order: int = 2,
    n_sequences: int = 20,
    seq_len: int = 10,
    planted=(),
) -> NGramModel:
    """Seeded random n-gram provider for property-style tests."""
    vocab = Vocabulary(size=vocab_size, eos=eos)
    corpus = [
        [rng.randrange(vocab_size) for _ in range(seq_len)] for _ in range(n_sequences)
    ]
    return NGramModel(vocab, order=order, corpus=corpus, planted=planted)


def random_tokens(rng: random.Random, length: int, vocab_size: int):
    return tuple(rng.randrange(vocab_size) for _ in range(length))


@pytest.fixture
def rng():
    return random.Random(20260810)
