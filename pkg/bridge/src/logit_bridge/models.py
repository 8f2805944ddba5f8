"""Served-model contract and the file-backed lookup table.

A served model is anything with ``vocab_size``, ``eos_id``, ``model_name``
and a deterministic ``logits(history) -> list[float]`` of fixed row length.
The file-backed table reads the same JSON schema the audit core writes, so
conformance runs can point both sides at one file.
"""

from __future__ import annotations

import json
from typing import Dict, List, Optional, Protocol, Sequence, Tuple


class ServedModel(Protocol):
    vocab_size: int
    eos_id: Optional[int]
    model_name: str

    def logits(self, history: Sequence[int]) -> List[float]: ...


class ModelFileError(ValueError):
    pass


class FileTableModel:
    """Explicit history -> logit-row table loaded from a JSON document.

    Unknown histories fall back to the default row; lookups are exact.
    """

    def __init__(self, doc: dict):
        if doc.get("type") != "table":
            raise ModelFileError(f"expected a table model, got type {doc.get('type')!r}")
        self.vocab_size = int(doc["vocab_size"])
        if self.vocab_size < 2:
            raise ModelFileError(f"vocab_size must be >= 2, got {self.vocab_size}")
        self.eos_id = doc.get("eos_id")
        self.model_name = str(doc.get("model_name", "table"))
        self._default = self._row(doc["default_row"])
        self._rows: Dict[Tuple[int, ...], List[float]] = {}
        for entry in doc.get("rows", []):
            self._rows[tuple(int(t) for t in entry["history"])] = self._row(entry["logits"])

    def _row(self, values) -> List[float]:
        row = [float(x) for x in values]
        if len(row) != self.vocab_size:
            raise ModelFileError(
                f"row length {len(row)} != vocab_size {self.vocab_size}"
            )
        return row

    def logits(self, history: Sequence[int]) -> List[float]:
        return self._rows.get(tuple(int(t) for t in history), self._default)


def load_table_model(path) -> FileTableModel:
    with open(path, "r", encoding="utf-8") as fh:
        return FileTableModel(json.load(fh))
