"""Corpus ingestion: chunk text into (prefix, suffix) records, JSONL I/O.

Windows are anchored at byte offsets (stride in characters of the source
bytes), each tokenized forward until it fills n_pre + T tokens; the suffix's
byte span is kept so book-style coverage heatmaps can be built later.  Two
desk-scale tokenizers ship (byte-level and whitespace); real-model
tokenization belongs to the serving side.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple, Union

from .model import InvalidInputError

RECORD_SCHEMA = "extraction-audit/records"
RESULT_SCHEMA = "extraction-audit/results"
SCHEMA_VERSION = 1


class SchemaVersionError(ValueError):
    """File declares a schema/version this code does not understand."""


class MalformedLineError(ValueError):
    def __init__(self, path, line_number: int, cause: Exception):
        super().__init__(f"{path}:{line_number}: malformed line ({cause})")
        self.line_number = line_number


@dataclass(frozen=True)
class TokenSpan:
    id: int
    start: int
    end: int


@dataclass(frozen=True)
class SequenceRecord:
    """One corpus item: prefix (length n_pre), target suffix (length T)."""

    id: str
    prefix: Tuple[int, ...]
    suffix: Tuple[int, ...]
    char_span: Optional[Tuple[int, int]] = None
    source: str = ""


class ByteTokenizer:
    """One token per byte; ids 0..255."""

    vocab_size = 256

    def encode(self, text: Union[str, bytes]) -> List[TokenSpan]:
        data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
        return [TokenSpan(id=b, start=i, end=i + 1) for i, b in enumerate(data)]


class WhitespaceTokenizer:
    """Whitespace-split tokens with byte offsets.

    With no vocabulary given, ids are assigned in order of first appearance,
    which keeps chunking deterministic for a fixed text.
    """

    def __init__(self, vocab: Optional[Dict[bytes, int]] = None):
        self.vocab: Dict[bytes, int] = dict(vocab) if vocab else {}
        self._frozen = vocab is not None

    @property
    def vocab_size(self) -> int:
        return max(len(self.vocab), 2)

    def encode(self, text: Union[str, bytes]) -> List[TokenSpan]:
        data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
        spans: List[TokenSpan] = []
        i, n = 0, len(data)
        while i < n:
            while i < n and data[i : i + 1].isspace():
                i += 1
            if i >= n:
                break
            j = i
            while j < n and not data[j : j + 1].isspace():
                j += 1
            word = data[i:j]
            if word not in self.vocab:
                if self._frozen:
                    raise InvalidInputError(f"token {word!r} outside fixed vocabulary")
                self.vocab[word] = len(self.vocab)
            spans.append(TokenSpan(id=self.vocab[word], start=i, end=j))
            i = j
        return spans


def chunk_text(
    text: Union[str, bytes],
    tokenizer,
    n_pre: int,
    suffix_len: int,
    stride_chars: int,
    source: str = "",
) -> List[SequenceRecord]:
    """Slide a window over the text every ``stride_chars`` bytes.

    Each window tokenizes forward from its anchor byte and takes the first
    n_pre + T tokens; windows that cannot fill are dropped.  Offsets in the
    records are absolute byte positions in the source text.
    """
    if stride_chars < 1:
        raise InvalidInputError(f"stride must be >= 1, got {stride_chars}")
    if n_pre < 1 or suffix_len < 1:
        raise InvalidInputError("n_pre and suffix length must be >= 1")
    data = text.encode("utf-8") if isinstance(text, str) else bytes(text)
    need = n_pre + suffix_len
    records: List[SequenceRecord] = []
    for start in range(0, len(data), stride_chars):
        spans = tokenizer.encode(data[start:])
        if len(spans) < need:
            continue
        window = spans[:need]
        prefix = tuple(s.id for s in window[:n_pre])
        suffix_spans = window[n_pre:]
        suffix = tuple(s.id for s in suffix_spans)
        char_span = (start + suffix_spans[0].start, start + suffix_spans[-1].end)
        records.append(
            SequenceRecord(
                id=f"{source or 'text'}@{start}",
                prefix=prefix,
                suffix=suffix,
                char_span=char_span,
                source=source,
            )
        )
    return records


# ---------------------------------------------------------------------------
# JSONL round-trips.  First line is a schema header; data lines follow.
# ---------------------------------------------------------------------------


def _check_header(doc: dict, path, expected_schema: str) -> None:
    schema = doc.get("schema")
    version = doc.get("version")
    if schema != expected_schema or version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: got schema {schema!r} v{version!r}, "
            f"expected {expected_schema!r} v{SCHEMA_VERSION}"
        )


def save_records(path, records: Sequence[SequenceRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"schema": RECORD_SCHEMA, "version": SCHEMA_VERSION}) + "\n")
        for r in records:
            doc = {
                "id": r.id,
                "prefix": list(r.prefix),
                "suffix": list(r.suffix),
                "char_span": list(r.char_span) if r.char_span else None,
                "source": r.source,
            }
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def load_records(path) -> List[SequenceRecord]:
    records: List[SequenceRecord] = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(path, lineno, exc) from exc
            if lineno == 1 and "schema" in doc:
                _check_header(doc, path, RECORD_SCHEMA)
                continue
            try:
                records.append(
                    SequenceRecord(
                        id=str(doc["id"]),
                        prefix=tuple(int(t) for t in doc["prefix"]),
                        suffix=tuple(int(t) for t in doc["suffix"]),
                        char_span=tuple(doc["char_span"]) if doc.get("char_span") else None,
                        source=str(doc.get("source", "")),
                    )
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise MalformedLineError(path, lineno, exc) from exc
    return records


def save_results(path, results: Sequence[dict], header_extra: Optional[dict] = None) -> None:
    """Write result dicts as JSONL under the versioned results schema."""
    with open(path, "w", encoding="utf-8") as fh:
        header = {"schema": RESULT_SCHEMA, "version": SCHEMA_VERSION}
        if header_extra:
            header.update(header_extra)
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for doc in results:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


def load_results(path) -> Tuple[dict, List[dict]]:
    """Read a results JSONL; returns (header, rows)."""
    rows: List[dict] = []
    header: dict = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                doc = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLineError(path, lineno, exc) from exc
            if lineno == 1 and "schema" in doc:
                _check_header(doc, path, RESULT_SCHEMA)
                header = doc
                continue
            rows.append(doc)
    return header, rows
