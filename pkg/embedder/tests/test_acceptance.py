"""Acceptance: the cache this embedder writes is valid for the main pipeline.

The four clauses checked here: the cache parses with the pipeline's own
reader, the header dim matches every vector, repeated runs agree entry-wise at
stored precision, and batch size 1 vs 64 agree within 1e-4 relative tolerance
on 100 texts.
"""

import json
from contextlib import contextmanager

import numpy as np

from sectembed import EmbedJob, embed_batch

from conftest import make_manifest


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {name}: FAIL")
        raise
    print(f"ACCEPTANCE {name}: PASS")


def test_embedder_cache_validity(tmp_path, tiny_model_dir):
    with criterion("embedder cache validity"):
        texts = [f"heading {i} w{i % 9} body text t{i} q{i % 5}" for i in range(100)]
        manifest = make_manifest(tmp_path / "manifest.jsonl", texts)

        big = tmp_path / "cache_batch64.jsonl"
        summary = embed_batch(
            EmbedJob(manifest_path=manifest, output_path=big, model_id=tiny_model_dir, batch_size=64)
        )
        assert summary.entries == 100

        # Parses with the pipeline's reader; header dim matches every vector.
        from sectypes.embedding import EmbeddingCache

        cache = EmbeddingCache.load(big)
        assert len(cache) == 100
        dim = cache.descriptor.dim
        for key in cache.keys():
            assert cache.get(key).shape == (dim,)

        # Repeated run agrees entry-wise at stored precision.
        again = tmp_path / "cache_repeat.jsonl"
        embed_batch(
            EmbedJob(manifest_path=manifest, output_path=again, model_id=tiny_model_dir, batch_size=64)
        )
        repeat = EmbeddingCache.load(again)
        assert repeat.keys() == cache.keys()
        for key in cache.keys():
            assert np.array_equal(repeat.get(key), cache.get(key))

        # Batch size 1 vs 64 within 1e-4 relative tolerance.
        single = tmp_path / "cache_batch1.jsonl"
        embed_batch(
            EmbedJob(manifest_path=manifest, output_path=single, model_id=tiny_model_dir, batch_size=1)
        )
        one = EmbeddingCache.load(single)
        for key in cache.keys():
            a, b = one.get(key), cache.get(key)
            assert np.allclose(a, b, rtol=1e-4, atol=1e-6), f"batching visible for {key}"
