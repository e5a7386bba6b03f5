"""Startup: load the configured checkpoints and serve the wire protocol."""

from __future__ import annotations

import argparse
import sys

import uvicorn

from nli_shim.app import create_app
from nli_shim.config import DEFAULT_NLI_LABEL_ORDER, ShimConfig
from nli_shim.engines import (
    EngineLoadError,
    SentenceEmbedEngine,
    TransformersGenerateEngine,
    TransformersNliEngine,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nli-shim", description=__doc__)
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8500)
    parser.add_argument("--device", default="cpu")
    parser.add_argument("--nli-model", default="facebook/bart-large-mnli")
    parser.add_argument("--generate-model", default="google/flan-t5-xl")
    parser.add_argument(
        "--embed-model", default="sentence-transformers/all-MiniLM-L6-v2"
    )
    parser.add_argument(
        "--nli-label-order",
        default=",".join(DEFAULT_NLI_LABEL_ORDER),
        help="comma-separated label names in the checkpoint's logit order",
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    config = ShimConfig(
        nli_model=args.nli_model,
        generate_model=args.generate_model,
        embed_model=args.embed_model,
        device=args.device,
        nli_label_order=tuple(part.strip() for part in args.nli_label_order.split(",")),
    )
    try:
        app = create_app(
            config,
            nli_engine=TransformersNliEngine(config),
            generate_engine=TransformersGenerateEngine(config),
            embed_engine=SentenceEmbedEngine(config),
        )
    except EngineLoadError as exc:
        print(f"model load failed: {exc}", file=sys.stderr)
        return 1
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
