"""Embedding provider contract, classifier input text, and the vector cache.

Any object with a ``descriptor`` and an ``embed_text`` method is a provider.
The built-in hash provider needs no ML runtime; transformer embeddings are
produced out-of-process and consumed through the cache file format:

    header line:  {"provider": name, "dim": d, "version": v}
    entry lines:  {"key": sha256-hex of the input text, "vec": [floats]}

Vectors are stored at float32 precision; in-memory math is float64.
"""

from __future__ import annotations

import hashlib
import json
import math
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Protocol, runtime_checkable

import numpy as np

from .corpus import Document, Section
from .fileio import atomic_write_text


class EmbeddingError(RuntimeError):
    """Provider or cache failure, carrying the content key of the offending text."""

    def __init__(self, message: str, key: str | None = None):
        super().__init__(message)
        self.key = key


@dataclass(frozen=True)
class ProviderDescriptor:
    """Identity of an embedding provider; recorded in caches and models."""

    name: str
    dim: int
    version: str

    def __post_init__(self) -> None:
        if self.dim < 1:
            raise ValueError(f"provider dim must be positive, got {self.dim}")

    def to_mapping(self) -> dict:
        return {"provider": self.name, "dim": self.dim, "version": self.version}

    @classmethod
    def from_mapping(cls, mapping: dict) -> "ProviderDescriptor":
        try:
            return cls(
                name=mapping["provider"],
                dim=int(mapping["dim"]),
                version=str(mapping["version"]),
            )
        except KeyError as exc:
            raise EmbeddingError(f"cache header missing field: {exc}") from exc


@runtime_checkable
class EmbeddingProvider(Protocol):
    descriptor: ProviderDescriptor

    def embed_text(self, text: str) -> np.ndarray: ...


def content_key(text: str) -> str:
    """Cache key for an input text: SHA-256 of its UTF-8 bytes, hex."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def build_input_text(section: Section, max_tokens: int = 25) -> str:
    """Concatenate heading tokens then body tokens, capped at ``max_tokens``.

    Tokens are whitespace tokens of the raw text, so the budget is independent
    of any model's subword tokenizer. Heading tokens win under truncation.
    """
    if max_tokens < 1:
        raise ValueError(f"max_tokens must be >= 1, got {max_tokens}")
    tokens = section.heading.split()[:max_tokens]
    remaining = max_tokens - len(tokens)
    if remaining > 0 and section.body:
        tokens += section.body.split(None, remaining)[:remaining]
    if not tokens:
        raise ValueError(
            f"section {section.index} has no tokens (whitespace-only heading and body)"
        )
    return " ".join(tokens)


class HashProvider:
    """Deterministic text -> pseudorandom unit vector; a model-free provider.

    Components come from SHA-256 in counter mode over (seed, content key),
    mapped to [-1, 1) and L2-normalized. Only IEEE-754 +, *, /, sqrt are used,
    so vectors are identical across runs and platforms.
    """

    def __init__(self, dim: int, seed: int = 0):
        if dim < 2:
            raise ValueError(f"hash provider dim must be >= 2, got {dim}")
        self.descriptor = ProviderDescriptor(name="hash", dim=dim, version="1")
        self._seed = seed

    def embed_text(self, text: str) -> np.ndarray:
        material = hashlib.sha256(
            b"sectypes.hash-provider.v1\x00"
            + self._seed.to_bytes(8, "big", signed=True)
            + bytes.fromhex(content_key(text))
        ).digest()
        dim = self.descriptor.dim
        comps: list[float] = []
        counter = 0
        while len(comps) < dim:
            block = hashlib.sha256(material + counter.to_bytes(4, "big")).digest()
            for off in range(0, 32, 8):
                k = int.from_bytes(block[off : off + 8], "big")
                comps.append(k / 2.0**64 * 2.0 - 1.0)
            counter += 1
        comps = comps[:dim]
        norm_sq = 0.0
        for c in comps:
            norm_sq += c * c
        if norm_sq == 0.0:
            comps[0] = 1.0
            norm_sq = 1.0
        norm = math.sqrt(norm_sq)
        return np.array([c / norm for c in comps], dtype=np.float64)


class EmbeddingCache:
    """Key -> vector store bound to one provider descriptor.

    Vectors are held at float32 (the file precision); reads return float64
    copies. Writes are serialized by a lock; reads are lock-free.
    """

    def __init__(self, descriptor: ProviderDescriptor):
        self.descriptor = descriptor
        self._entries: dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: str) -> bool:
        return key in self._entries

    def keys(self) -> list[str]:
        return sorted(self._entries)

    def get(self, key: str) -> np.ndarray | None:
        arr = self._entries.get(key)
        if arr is None:
            return None
        return arr.astype(np.float64)

    def put(self, key: str, vec: np.ndarray) -> None:
        arr = np.asarray(vec, dtype=np.float64)
        if arr.shape != (self.descriptor.dim,):
            raise EmbeddingError(
                f"vector shape {arr.shape} does not match cache dim {self.descriptor.dim}",
                key=key,
            )
        if not np.all(np.isfinite(arr)):
            raise EmbeddingError("vector has non-finite components", key=key)
        with self._lock:
            self._entries[key] = arr.astype(np.float32)

    def save(self, path: str | Path) -> None:
        lines = [json.dumps(self.descriptor.to_mapping(), ensure_ascii=False)]
        for key in sorted(self._entries):
            vec = [float(x) for x in self._entries[key].tolist()]
            lines.append(json.dumps({"key": key, "vec": vec}, ensure_ascii=False))
        atomic_write_text(path, "\n".join(lines) + "\n")

    @classmethod
    def load(
        cls,
        path: str | Path,
        expect: ProviderDescriptor | None = None,
    ) -> "EmbeddingCache":
        with open(path, encoding="utf-8") as fh:
            header_line = fh.readline()
            if not header_line.strip():
                raise EmbeddingError(f"{path}: missing cache header")
            descriptor = ProviderDescriptor.from_mapping(json.loads(header_line))
            if expect is not None and descriptor != expect:
                raise EmbeddingError(
                    f"{path}: cache provider {descriptor} does not match expected {expect}"
                )
            cache = cls(descriptor)
            for line_no, line in enumerate(fh, start=2):
                stripped = line.strip()
                if not stripped:
                    continue
                entry = json.loads(stripped)
                key = entry.get("key")
                vec = entry.get("vec")
                if not isinstance(key, str) or not isinstance(vec, list):
                    raise EmbeddingError(f"{path}: line {line_no}: malformed cache entry")
                if key in cache:
                    raise EmbeddingError(f"{path}: line {line_no}: duplicate key {key}")
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (descriptor.dim,):
                    raise EmbeddingError(
                        f"{path}: line {line_no}: vector length {arr.shape[0]} != dim {descriptor.dim}",
                        key=key,
                    )
                cache.put(key, arr)
        return cache


def embed(
    provider: EmbeddingProvider,
    text: str,
    cache: EmbeddingCache | None = None,
) -> np.ndarray:
    """Embed ``text``, consulting the cache first and populating it on miss.

    The result is always quantized to float32 precision (returned as float64),
    so a correct cache never changes the value: cold and warm calls agree
    bitwise.
    """
    if not text:
        raise ValueError("cannot embed empty text")
    key = content_key(text)
    dim = provider.descriptor.dim
    if cache is not None:
        if cache.descriptor != provider.descriptor:
            raise EmbeddingError(
                f"cache provider {cache.descriptor} does not match {provider.descriptor}",
                key=key,
            )
        hit = cache.get(key)
        if hit is not None:
            return hit
    try:
        raw = np.asarray(provider.embed_text(text), dtype=np.float64)
    except EmbeddingError:
        raise
    except Exception as exc:
        raise EmbeddingError(f"provider failed on key {key}: {exc}", key=key) from exc
    if raw.shape != (dim,):
        raise EmbeddingError(
            f"provider returned shape {raw.shape}, expected ({dim},)", key=key
        )
    if not np.all(np.isfinite(raw)):
        raise EmbeddingError("provider returned non-finite components", key=key)
    quantized = raw.astype(np.float32)
    if cache is not None:
        cache.put(key, quantized)
    return quantized.astype(np.float64)


class CachedVectorProvider:
    """Provider backed entirely by a precomputed cache file; misses are errors.

    Used to classify with vectors produced out-of-process (e.g. a transformer
    embedder writing the shared cache format).
    """

    def __init__(self, cache: EmbeddingCache):
        self.descriptor = cache.descriptor
        self._cache = cache

    def embed_text(self, text: str) -> np.ndarray:
        key = content_key(text)
        vec = self._cache.get(key)
        if vec is None:
            raise EmbeddingError(
                f"no cached vector for key {key}; regenerate the embedding cache",
                key=key,
            )
        return vec


def corpus_manifest(
    docs: Iterable[Document],
    max_tokens: int = 25,
) -> list[tuple[str, str]]:
    """Unique (key, input text) pairs for every section, in first-seen order."""
    seen: set[str] = set()
    out: list[tuple[str, str]] = []
    for doc in docs:
        for sec in doc.sections:
            text = build_input_text(sec, max_tokens=max_tokens)
            key = content_key(text)
            if key not in seen:
                seen.add(key)
                out.append((key, text))
    return out


def write_manifest(path: str | Path, entries: Iterable[tuple[str, str]]) -> None:
    lines = [
        json.dumps({"key": key, "text": text}, ensure_ascii=False)
        for key, text in entries
    ]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_manifest(path: str | Path) -> list[tuple[str, str]]:
    out: list[tuple[str, str]] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            entry = json.loads(stripped)
            key = entry.get("key")
            text = entry.get("text")
            if not isinstance(key, str) or not isinstance(text, str):
                raise EmbeddingError(f"{path}: line {line_no}: malformed manifest entry")
            out.append((key, text))
    return out
