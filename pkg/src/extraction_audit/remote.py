"""HTTP client for a remote logits server speaking the bridge wire protocol.

GET /v1/meta hands back the vocabulary; POST /v1/logits scores histories.
Rows arrive at float32 precision; the client re-derives float64 log-softmax
locally, so end-to-end probabilities agree with an in-process provider to
about 1e-6 at desk scale.
"""

from __future__ import annotations

import threading
from typing import Sequence

import numpy as np
import requests

from .model import TokenDistributionProvider, Vocabulary

PROTOCOL_VERSION = 1
MAX_BATCH = 64


class RemoteProviderError(RuntimeError):
    """Base class for bridge client failures."""


class BridgeConnectionError(RemoteProviderError):
    """Endpoint unreachable or non-JSON/non-200 handshake."""


class ProtocolVersionError(RemoteProviderError):
    """Server speaks a different protocol version."""


class WireFormatError(RemoteProviderError):
    """Response shape disagrees with the handshake (e.g. wrong row length)."""


class RemoteProvider(TokenDistributionProvider):
    """Provider backed by one wire request per history.

    Requests are serialized behind a lock; callers must not assume ordering
    across sequences.
    """

    def __init__(self, endpoint: str, vocabulary: Vocabulary, model_name: str, timeout: float):
        self.endpoint = endpoint.rstrip("/")
        self.vocabulary = vocabulary
        self.model_name = model_name
        self._timeout = timeout
        self._session = requests.Session()
        self._lock = threading.Lock()

    def next_logits(self, history: Sequence[int]) -> np.ndarray:
        payload = {"histories": [[int(t) for t in history]]}
        with self._lock:
            try:
                resp = self._session.post(
                    f"{self.endpoint}/v1/logits", json=payload, timeout=self._timeout
                )
            except requests.RequestException as exc:
                raise BridgeConnectionError(f"logits request failed: {exc}") from exc
        if resp.status_code != 200:
            raise WireFormatError(f"logits request returned HTTP {resp.status_code}")
        try:
            rows = resp.json()["logits"]
        except (ValueError, KeyError) as exc:
            raise WireFormatError(f"malformed logits response: {exc}") from exc
        if not isinstance(rows, list) or len(rows) != 1:
            raise WireFormatError(f"expected 1 row, got {len(rows) if isinstance(rows, list) else rows!r}")
        row = np.asarray(rows[0], dtype=np.float64)
        if row.ndim != 1 or row.shape[0] != self.vocabulary.size:
            raise WireFormatError(
                f"row length {row.shape[0] if row.ndim == 1 else row.shape} "
                f"!= vocabulary size {self.vocabulary.size}"
            )
        return row


def connect(endpoint: str, timeout: float = 10.0) -> RemoteProvider:
    """Handshake against /v1/meta and build a provider from the metadata."""
    endpoint = endpoint.rstrip("/")
    try:
        resp = requests.get(f"{endpoint}/v1/meta", timeout=timeout)
    except requests.RequestException as exc:
        raise BridgeConnectionError(f"cannot reach {endpoint}: {exc}") from exc
    if resp.status_code != 200:
        raise BridgeConnectionError(f"meta request returned HTTP {resp.status_code}")
    try:
        meta = resp.json()
    except ValueError as exc:
        raise BridgeConnectionError(f"meta response is not JSON: {exc}") from exc
    if meta.get("protocol") != PROTOCOL_VERSION:
        raise ProtocolVersionError(
            f"server protocol {meta.get('protocol')!r}, client speaks {PROTOCOL_VERSION}"
        )
    try:
        vocab = Vocabulary(size=int(meta["vocab_size"]), eos=meta.get("eos_id"))
    except (KeyError, TypeError, ValueError) as exc:
        raise WireFormatError(f"bad meta payload: {exc}") from exc
    return RemoteProvider(endpoint, vocab, str(meta.get("model_name", "")), timeout)
