"""Command-line front end: sectembed embed --manifest ... --out ..."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .embedder import DEFAULT_MODEL, EmbedJob, EmbedderError, embed_batch


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="sectembed",
        description="Batch-generate section embeddings into the shared cache format.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    embed = sub.add_parser("embed", help="embed a manifest of input texts")
    embed.add_argument("--manifest", required=True, help="input-text manifest (JSONL)")
    embed.add_argument("--out", required=True, help="output cache file")
    embed.add_argument("--model", default=DEFAULT_MODEL, help=f"encoder id or path (default {DEFAULT_MODEL})")
    embed.add_argument("--batch", type=int, default=32, help="batch size (default 32)")
    embed.add_argument("--device", default="cpu", help="torch device hint (default cpu)")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = EmbedJob(
            manifest_path=Path(args.manifest),
            output_path=Path(args.out),
            model_id=args.model,
            batch_size=args.batch,
            device=args.device,
        )
        summary = embed_batch(job)
    except EmbedderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary.to_mapping()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
