"""Scoring over the wire: bridge server on one side, audit core on the other.

Needs the bridge package installed (`pip install -e ./bridge`). Starts the
reference server in a background thread on an ephemeral port, connects the
remote provider, and compares teacher-forced scores against the same table
model loaded in process.
"""

import json
import math
import random
import tempfile
import threading
from pathlib import Path

from logit_bridge.models import FileTableModel
from logit_bridge.server import create_server

from extraction_audit import DecodingPolicy, load_model_file, teacher_force_verbatim
from extraction_audit.model import step_distribution
from extraction_audit.remote import connect

rng = random.Random(8)
doc = {
    "type": "table",
    "vocab_size": 6,
    "eos_id": 0,
    "model_name": "demo-table",
    "default_row": [rng.uniform(-2, 2) for _ in range(6)],
    "rows": [
        {"history": [h], "logits": [rng.uniform(-3, 3) for _ in range(6)]}
        for h in range(6)
    ],
}
model_path = Path(tempfile.mkdtemp()) / "demo_table.json"
model_path.write_text(json.dumps(doc))

server = create_server(FileTableModel(json.loads(model_path.read_text())))
threading.Thread(target=server.serve_forever, daemon=True).start()
url = f"http://127.0.0.1:{server.server_port}"
print(f"bridge serving {doc['model_name']} at {url}")

local = load_model_file(model_path)
remote = connect(url)
print(f"handshake: vocab_size={remote.vocabulary.size}, eos={remote.vocabulary.eos}, "
      f"model={remote.model_name!r}\n")

policy = DecodingPolicy(k=3)
worst = 0.0
for _ in range(10):
    prefix = (rng.randrange(6),)
    # Walk the top-k support so the suffix carries nonzero mass.
    history, suffix = prefix, ()
    for _ in range(4):
        sd = step_distribution(local, history, policy)
        tok = sd.support[rng.randrange(len(sd.support))]
        suffix, history = suffix + (tok,), history + (tok,)
    lp_local = teacher_force_verbatim(local, prefix, suffix, policy)
    lp_remote = teacher_force_verbatim(remote, prefix, suffix, policy)
    p_local = math.exp(lp_local) if lp_local != float("-inf") else 0.0
    p_remote = math.exp(lp_remote) if lp_remote != float("-inf") else 0.0
    worst = max(worst, abs(p_local - p_remote))
    print(f"suffix {suffix}: local p={p_local:.8f}  remote p={p_remote:.8f}")

print(f"\nlargest disagreement: {worst:.2e} (float32 wire quantization stays under 1e-6)")
server.shutdown()
