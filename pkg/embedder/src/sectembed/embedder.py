"""Batch-embed manifest texts with a pretrained transformer encoder.

Reads the input-text manifest (JSONL of {"key","text"}) and writes the shared
embedding-cache format: a JSON header line {"provider","dim","version"}
followed by one {"key","vec"} line per entry. Each vector is the encoder's
first-position (classification-token) state from the final hidden layer.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

DEFAULT_MODEL = "allenai/scibert_scivocab_uncased"


class EmbedderError(RuntimeError):
    pass


@dataclass(frozen=True)
class EmbedJob:
    manifest_path: Path
    output_path: Path
    model_id: str = DEFAULT_MODEL
    batch_size: int = 32
    device: str = "cpu"

    def __post_init__(self) -> None:
        if self.batch_size < 1:
            raise EmbedderError(f"batch size must be >= 1, got {self.batch_size}")


@dataclass
class EmbedSummary:
    entries: int
    dim: int
    model_id: str
    requested_batch_size: int
    effective_batch_size: int
    oom_retries: int
    seconds: float

    def to_mapping(self) -> dict:
        return {
            "entries": self.entries,
            "dim": self.dim,
            "model": self.model_id,
            "requested_batch_size": self.requested_batch_size,
            "effective_batch_size": self.effective_batch_size,
            "oom_retries": self.oom_retries,
            "seconds": round(self.seconds, 3),
        }


def content_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def read_manifest(path: Path) -> list[tuple[str, str]]:
    """Load (key, text) pairs; a key that does not hash its text is an error."""
    entries: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            record = json.loads(stripped)
            key = record.get("key")
            text = record.get("text")
            if not isinstance(key, str) or not isinstance(text, str):
                raise EmbedderError(f"{path}: line {line_no}: malformed manifest entry")
            expected = content_key(text)
            if key != expected:
                raise EmbedderError(
                    f"{path}: line {line_no}: key mismatch (got {key}, text hashes to {expected})"
                )
            entries.append((key, text))
    return entries


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def write_cache(
    path: Path,
    model_id: str,
    dim: int,
    version: str,
    entries: Sequence[tuple[str, np.ndarray]],
) -> None:
    lines = [
        json.dumps({"provider": model_id, "dim": dim, "version": version}, ensure_ascii=False)
    ]
    for key, vec in entries:
        vec32 = np.asarray(vec, dtype=np.float32)
        if vec32.shape != (dim,):
            raise EmbedderError(f"vector for {key} has shape {vec32.shape}, expected ({dim},)")
        lines.append(
            json.dumps(
                {"key": key, "vec": [float(x) for x in vec32.tolist()]}, ensure_ascii=False
            )
        )
    _atomic_write(path, "\n".join(lines) + "\n")


def _is_oom(exc: BaseException) -> bool:
    if exc.__class__.__name__ == "OutOfMemoryError":
        return True
    return "out of memory" in str(exc).lower()


def encode_batched(
    encode: Callable[[list[str]], np.ndarray],
    texts: Sequence[str],
    batch_size: int,
) -> tuple[np.ndarray | None, int, int]:
    """Run ``encode`` over ``texts`` in chunks, halving the chunk size on OOM.

    Returns (stacked vectors or None for no texts, effective batch size,
    number of OOM retries). An OOM at batch size 1 propagates.
    """
    if not texts:
        return None, batch_size, 0
    chunks: list[np.ndarray] = []
    size = batch_size
    retries = 0
    i = 0
    while i < len(texts):
        chunk = list(texts[i : i + size])
        try:
            vectors = encode(chunk)
        except Exception as exc:
            if _is_oom(exc) and size > 1:
                size = max(1, size // 2)
                retries += 1
                continue
            raise
        vectors = np.asarray(vectors)
        if vectors.shape[0] != len(chunk):
            raise EmbedderError(
                f"encoder returned {vectors.shape[0]} vectors for {len(chunk)} texts"
            )
        chunks.append(vectors)
        i += len(chunk)
    return np.concatenate(chunks, axis=0), size, retries


class TransformerEncoder:
    """Deterministic-inference wrapper around a Hugging Face encoder."""

    def __init__(self, model_id: str, device: str = "cpu"):
        import torch
        from transformers import AutoModel, AutoTokenizer

        try:
            self.tokenizer = AutoTokenizer.from_pretrained(model_id)
            self.model = AutoModel.from_pretrained(model_id)
        except Exception as exc:
            raise EmbedderError(f"cannot load model {model_id!r}: {exc}") from exc
        self.model.eval()
        self.model.to(device)
        self.device = device
        self.model_id = model_id
        self.dim = int(self.model.config.hidden_size)
        self._torch = torch

    def encode(self, texts: list[str]) -> np.ndarray:
        """First-position final-hidden-layer state for each text, float32."""
        enc = self.tokenizer(
            texts, padding=True, truncation=True, return_tensors="pt"
        ).to(self.device)
        with self._torch.no_grad():
            out = self.model(**enc)
        return out.last_hidden_state[:, 0, :].cpu().numpy().astype(np.float32)


def cache_version() -> str:
    import transformers

    return f"transformers-{transformers.__version__}"


def embed_batch(job: EmbedJob) -> EmbedSummary:
    """Embed every manifest entry and write the cache file.

    The cache is keyed by the manifest's precomputed content hashes and its
    header carries the model identifier and hidden size.
    """
    start = time.perf_counter()
    entries = read_manifest(Path(job.manifest_path))
    encoder = TransformerEncoder(job.model_id, device=job.device)
    vectors, effective, retries = encode_batched(
        encoder.encode, [text for _, text in entries], job.batch_size
    )
    keyed = (
        []
        if vectors is None
        else [(key, vectors[i]) for i, (key, _) in enumerate(entries)]
    )
    write_cache(
        Path(job.output_path),
        model_id=job.model_id,
        dim=encoder.dim,
        version=cache_version(),
        entries=keyed,
    )
    return EmbedSummary(
        entries=len(entries),
        dim=encoder.dim,
        model_id=job.model_id,
        requested_batch_size=job.batch_size,
        effective_batch_size=effective,
        oom_retries=retries,
        seconds=time.perf_counter() - start,
    )
