"""Launcher: `python -m logit_bridge --model table.json [--host] [--port]`."""

import argparse
import sys

from .models import load_table_model
from .server import serve


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="logit-bridge")
    parser.add_argument("--model", required=True, help="table-model JSON file")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8041)
    parser.add_argument("--enable-encode", action="store_true",
                        help="expose /v1/encode when the model supports it")
    args = parser.parse_args(argv)
    try:
        model = load_table_model(args.model)
    except (OSError, ValueError, KeyError) as exc:
        print(f"cannot load model: {exc}", file=sys.stderr)
        return 2
    serve(model, host=args.host, port=args.port, enable_encode=args.enable_encode)
    return 0


if __name__ == "__main__":
    sys.exit(main())
