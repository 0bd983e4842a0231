"""Batch transformer embedder for the sectypes pipeline's cache format."""

from .embedder import (
    DEFAULT_MODEL,
    EmbedJob,
    EmbedSummary,
    EmbedderError,
    TransformerEncoder,
    content_key,
    embed_batch,
    encode_batched,
    read_manifest,
    write_cache,
)

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_MODEL",
    "EmbedJob",
    "EmbedSummary",
    "EmbedderError",
    "TransformerEncoder",
    "content_key",
    "embed_batch",
    "encode_batched",
    "read_manifest",
    "write_cache",
]
