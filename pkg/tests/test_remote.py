import json
import math
import struct
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from extraction_audit.model import (
    DecodingPolicy,
    TableModel,
    Vocabulary,
    teacher_force_verbatim,
)
from extraction_audit.remote import (
    BridgeConnectionError,
    ProtocolVersionError,
    WireFormatError,
    connect,
)

from conftest import random_tokens


def f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


class StubHandler(BaseHTTPRequestHandler):
    """Minimal wire-protocol stub; behavior knobs live on the server."""

    def log_message(self, *args):
        pass

    def _send(self, code, doc):
        body = json.dumps(doc).encode()
        self.send_response(code)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        if self.path == "/v1/meta":
            self._send(200, self.server.meta)
        else:
            self._send(404, {"error": "not found"})

    def do_POST(self):
        if self.path != "/v1/logits":
            self._send(404, {"error": "not found"})
            return
        length = int(self.headers.get("Content-Length", 0))
        payload = json.loads(self.rfile.read(length))
        rows = []
        for history in payload["histories"]:
            row = [f32(float(x)) for x in self.server.model.next_logits(tuple(history))]
            if self.server.truncate_rows:
                row = row[:-1]
            rows.append(row)
        self._send(200, {"logits": rows})


def start_stub(model, meta=None, truncate_rows=False):
    server = ThreadingHTTPServer(("127.0.0.1", 0), StubHandler)
    server.model = model
    server.meta = meta or {
        "protocol": 1,
        "vocab_size": model.vocabulary.size,
        "eos_id": model.vocabulary.eos,
        "model_name": "stub",
    }
    server.truncate_rows = truncate_rows
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, f"http://127.0.0.1:{server.server_port}"


@pytest.fixture
def table_model(rng):
    vocab = Vocabulary(size=6, eos=0)
    rows = {}
    for hist_len in (1, 2, 3):
        for _ in range(10):
            hist = random_tokens(rng, hist_len, 6)
            rows[hist] = [rng.uniform(-4, 4) for _ in range(6)]
    return TableModel(vocab, rows, [rng.uniform(-2, 2) for _ in range(6)])


class TestHandshake:
    def test_vocabulary_from_meta(self, table_model):
        server, url = start_stub(table_model)
        try:
            provider = connect(url)
            assert provider.vocabulary.size == 6
            assert provider.vocabulary.eos == 0
            assert provider.model_name == "stub"
        finally:
            server.shutdown()

    def test_protocol_mismatch(self, table_model):
        meta = {"protocol": 2, "vocab_size": 6, "eos_id": None, "model_name": "x"}
        server, url = start_stub(table_model, meta=meta)
        try:
            with pytest.raises(ProtocolVersionError):
                connect(url)
        finally:
            server.shutdown()

    def test_unreachable_endpoint(self):
        with pytest.raises(BridgeConnectionError):
            connect("http://127.0.0.1:9", timeout=0.3)


class TestLogitsRequests:
    def test_wrong_row_length_is_protocol_error(self, table_model):
        server, url = start_stub(table_model, truncate_rows=True)
        try:
            provider = connect(url)
            with pytest.raises(WireFormatError):
                provider.next_logits((1, 2))
        finally:
            server.shutdown()

    def test_round_trip_teacher_forcing_within_float32(self, table_model, rng):
        server, url = start_stub(table_model)
        try:
            remote_provider = connect(url)
            policy = DecodingPolicy(k=3)
            for _ in range(25):
                prefix = random_tokens(rng, 2, 6)
                suffix = random_tokens(rng, 4, 6)
                local = teacher_force_verbatim(table_model, prefix, suffix, policy)
                remote = teacher_force_verbatim(remote_provider, prefix, suffix, policy)
                p_local = math.exp(local) if local != float("-inf") else 0.0
                p_remote = math.exp(remote) if remote != float("-inf") else 0.0
                assert abs(p_local - p_remote) <= 1e-6
        finally:
            server.shutdown()
