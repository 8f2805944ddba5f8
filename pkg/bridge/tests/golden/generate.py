"""Regenerate the golden fixtures: model file, requests, recorded responses.

Run from the bridge directory: `python tests/golden/generate.py`.
Responses are captured from a live server so the fixtures stay honest.
"""

import json
import random
import threading
import urllib.request
from pathlib import Path

from logit_bridge.models import FileTableModel
from logit_bridge.server import create_server

HERE = Path(__file__).parent
VOCAB = 6
SEED = 20260810


def build_model_doc() -> dict:
    rng = random.Random(SEED)
    rows = []
    seen = set()
    for hist_len in (1, 2, 3, 4):
        for _ in range(12):
            hist = tuple(rng.randrange(VOCAB) for _ in range(hist_len))
            if hist in seen:
                continue
            seen.add(hist)
            rows.append(
                {
                    "history": list(hist),
                    "logits": [round(rng.uniform(-4, 4), 6) for _ in range(VOCAB)],
                }
            )
    rows.sort(key=lambda r: (len(r["history"]), r["history"]))
    return {
        "type": "table",
        "vocab_size": VOCAB,
        "eos_id": 0,
        "model_name": "golden-table",
        "default_row": [round(rng.uniform(-2, 2), 6) for _ in range(VOCAB)],
        "rows": rows,
    }


def build_requests(doc: dict) -> list:
    rng = random.Random(SEED + 1)
    requests_ = [{"method": "GET", "path": "/v1/meta"}]
    table_histories = [r["history"] for r in doc["rows"]]
    for batch_size in (1, 2, 5):
        batch = [table_histories[rng.randrange(len(table_histories))] for _ in range(batch_size)]
        requests_.append(
            {"method": "POST", "path": "/v1/logits", "body": {"histories": batch}}
        )
    # An unknown history exercises the default row; 64 is the batch cap.
    requests_.append(
        {"method": "POST", "path": "/v1/logits", "body": {"histories": [[5, 5, 5, 5, 5]]}}
    )
    big = [[rng.randrange(VOCAB) for _ in range(3)] for _ in range(64)]
    requests_.append({"method": "POST", "path": "/v1/logits", "body": {"histories": big}})
    return requests_


def capture(doc, requests_):
    server = create_server(FileTableModel(doc))
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    base = f"http://127.0.0.1:{server.server_port}"
    out = []
    try:
        for req in requests_:
            if req["method"] == "GET":
                r = urllib.request.urlopen(base + req["path"])
            else:
                data = json.dumps(req["body"]).encode()
                r = urllib.request.urlopen(
                    urllib.request.Request(
                        base + req["path"], data=data,
                        headers={"Content-Type": "application/json"},
                    )
                )
            out.append({"status": r.status, "body": json.loads(r.read())})
    finally:
        server.shutdown()
    return out


def main():
    doc = build_model_doc()
    (HERE / "golden_table_model.json").write_text(json.dumps(doc, indent=1) + "\n")
    requests_ = build_requests(doc)
    responses = capture(doc, requests_)
    with open(HERE / "requests.jsonl", "w") as fh:
        for req in requests_:
            fh.write(json.dumps(req) + "\n")
    with open(HERE / "responses.jsonl", "w") as fh:
        for resp in responses:
            fh.write(json.dumps(resp) + "\n")
    print(f"wrote {len(requests_)} request/response pairs")


if __name__ == "__main__":
    main()
