"""`ovcd-adapter serve` entry point."""

from __future__ import annotations

import argparse
import sys
from typing import Optional

import uvicorn

from .app import create_app
from .config import AdapterConfig


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ovcd-adapter", description="Wire-protocol model server")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the HTTP server")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8731)
    p.add_argument("--model", default="fallback", help="fallback | external checkpoint id")
    p.add_argument("--max-side", type=int, default=4096)
    p.add_argument("--max-concurrency", type=int, default=8)
    p.add_argument("--feature-stride", type=int, default=8)
    p.add_argument("--calibration-offset", type=float, default=0.0)
    p.add_argument("--calibration-scale", type=float, default=1.0)
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    config = AdapterConfig(
        host=args.host,
        port=args.port,
        model=args.model,
        max_side=args.max_side,
        max_concurrency=args.max_concurrency,
        feature_stride=args.feature_stride,
        calibration_offset=args.calibration_offset,
        calibration_scale=args.calibration_scale,
    )
    app = create_app(config)
    uvicorn.run(app, host=config.host, port=config.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
