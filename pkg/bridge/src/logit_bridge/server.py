"""HTTP server implementing the logits wire protocol.

GET /v1/meta        -> {"protocol": 1, "vocab_size", "eos_id", "model_name"}
POST /v1/logits     -> {"logits": [[...], ...]}, one float32-precision row
                       per history, in request order; batches capped at 64.
POST /v1/encode     -> optional tokenization passthrough, off by default.

Malformed requests get a 400 with an error body; oversize batches get 413.
"""

from __future__ import annotations

import json
import struct
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

PROTOCOL_VERSION = 1
MAX_BATCH = 64


def float32(x: float) -> float:
    """Round to float32 precision (what real inference stacks emit)."""
    return struct.unpack("<f", struct.pack("<f", x))[0]


class BadRequest(ValueError):
    pass


def _parse_histories(doc) -> list:
    if not isinstance(doc, dict) or "histories" not in doc:
        raise BadRequest("body must be a JSON object with a 'histories' key")
    histories = doc["histories"]
    if not isinstance(histories, list):
        raise BadRequest("'histories' must be a list")
    out = []
    for i, history in enumerate(histories):
        if not isinstance(history, list) or not all(
            isinstance(t, int) and not isinstance(t, bool) for t in history
        ):
            raise BadRequest(f"history {i} must be a list of integers")
        out.append(history)
    return out


class _Handler(BaseHTTPRequestHandler):
    server_version = "logit-bridge/0.1"

    def log_message(self, *args):  # quiet by default
        pass

    def _reply(self, status: int, doc: dict) -> None:
        body = json.dumps(doc).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def _read_json(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        try:
            return json.loads(raw)
        except json.JSONDecodeError as exc:
            raise BadRequest(f"body is not valid JSON: {exc}") from exc

    def do_GET(self):
        if self.path == "/v1/meta":
            model = self.server.model
            self._reply(
                200,
                {
                    "protocol": PROTOCOL_VERSION,
                    "vocab_size": model.vocab_size,
                    "eos_id": model.eos_id,
                    "model_name": model.model_name,
                },
            )
        else:
            self._reply(404, {"error": f"unknown path {self.path}"})

    def do_POST(self):
        try:
            if self.path == "/v1/logits":
                self._logits()
            elif self.path == "/v1/encode":
                self._encode()
            else:
                self._reply(404, {"error": f"unknown path {self.path}"})
        except BadRequest as exc:
            self._reply(400, {"error": str(exc)})

    def _logits(self):
        histories = _parse_histories(self._read_json())
        if len(histories) > MAX_BATCH:
            self._reply(
                413, {"error": f"batch of {len(histories)} exceeds limit {MAX_BATCH}"}
            )
            return
        model = self.server.model
        rows = [[float32(x) for x in model.logits(h)] for h in histories]
        self._reply(200, {"logits": rows})

    def _encode(self):
        model = self.server.model
        if not self.server.encode_enabled or not hasattr(model, "encode"):
            self._reply(404, {"error": "encode endpoint is not enabled"})
            return
        doc = self._read_json()
        if not isinstance(doc, dict) or not isinstance(doc.get("text"), str):
            raise BadRequest("body must be a JSON object with a 'text' string")
        tokens, offsets = model.encode(doc["text"])
        self._reply(200, {"tokens": tokens, "offsets": offsets})


class BridgeServer(ThreadingHTTPServer):
    daemon_threads = True

    def __init__(self, address, model, encode_enabled: bool = False):
        super().__init__(address, _Handler)
        self.model = model
        self.encode_enabled = encode_enabled


def create_server(
    model, host: str = "127.0.0.1", port: int = 0, enable_encode: bool = False
) -> BridgeServer:
    """Bind a server (port 0 picks a free one); caller drives serve_forever."""
    return BridgeServer((host, port), model, encode_enabled=enable_encode)


def serve(
    model, host: str = "127.0.0.1", port: int = 8041, enable_encode: bool = False,
    announce=print,
) -> None:
    server = create_server(model, host, port, enable_encode)
    bound_host, bound_port = server.server_address[:2]
    announce(f"serving {model.model_name} on http://{bound_host}:{bound_port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
