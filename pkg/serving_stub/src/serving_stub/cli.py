"""Run the predict server: ``serving_stub --model model.bin --name am --port 8501``."""

from __future__ import annotations

import argparse
import logging
import sys

from .model import ModelFileError
from .server import DEFAULT_PORT, PredictServer, ServerConfig

log = logging.getLogger("serving_stub")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="serving_stub", description=__doc__)
    parser.add_argument("--model", required=True, help="RAMDEC01 model file to serve")
    parser.add_argument("--name", default="am", help="model name in the endpoint path")
    parser.add_argument("--port", type=int, default=DEFAULT_PORT)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--max-body-bytes", type=int, default=16 * 1024 * 1024)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO,
        format="serving_stub: %(levelname)s: %(message)s", force=True,
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    try:
        cfg = ServerConfig(
            model_path=args.model,
            model_name=args.name,
            port=args.port,
            host=args.host,
            max_body_bytes=args.max_body_bytes,
        )
        server = PredictServer(cfg)
    except (ModelFileError, FileNotFoundError, ValueError, OSError) as e:
        log.error("%s", e)
        return 1
    log.info("serving %s at %s/v1/models/%s", args.model, server.base_url, args.name)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        log.info("shutting down")
    finally:
        server.server_close()
    return 0


def console_main() -> None:
    sys.exit(main())
