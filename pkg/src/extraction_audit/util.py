"""Small numeric helpers shared across modules."""

from __future__ import annotations


class KahanSum:
    """Compensated accumulator for sums of many tiny probabilities.

    Frontier-identity checks demand 1e-9 residuals over thousands of
    addends, which plain float accumulation does not reliably deliver.
    """

    __slots__ = ("_total", "_comp")

    def __init__(self, value: float = 0.0):
        self._total = float(value)
        self._comp = 0.0

    def add(self, x: float) -> None:
        y = x - self._comp
        t = self._total + y
        self._comp = (t - self._total) - y
        self._total = t

    @property
    def value(self) -> float:
        return self._total


def kahan_sum(values) -> float:
    acc = KahanSum()
    for v in values:
        acc.add(v)
    return acc.value
