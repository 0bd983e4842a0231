import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectypes.corpus import Section
from sectypes.embedding import (
    CachedVectorProvider,
    EmbeddingCache,
    EmbeddingError,
    HashProvider,
    ProviderDescriptor,
    build_input_text,
    content_key,
    corpus_manifest,
    embed,
    read_manifest,
    write_manifest,
)

from conftest import make_doc


class TestBuildInputText:
    def test_heading_then_body_capped_at_25(self):
        body = " ".join(f"w{i}" for i in range(40))
        sec = Section(index=0, heading="Methods", body=body)
        text = build_input_text(sec)
        tokens = text.split()
        assert len(tokens) == 25
        assert tokens[0] == "Methods"
        assert tokens[1:] == [f"w{i}" for i in range(24)]

    def test_short_heading_no_body(self):
        sec = Section(index=0, heading="A Short Heading", body="")
        assert build_input_text(sec) == "A Short Heading"

    def test_long_heading_truncated_before_body(self):
        heading = " ".join(f"h{i}" for i in range(30))
        sec = Section(index=0, heading=heading, body="never seen")
        tokens = build_input_text(sec).split()
        assert tokens == [f"h{i}" for i in range(25)]

    def test_max_tokens_validated(self):
        sec = Section(index=0, heading="x", body="y")
        with pytest.raises(ValueError):
            build_input_text(sec, max_tokens=0)

    def test_whitespace_only_section_rejected(self):
        sec = Section(index=0, heading="   ", body="\t\n")
        with pytest.raises(ValueError):
            build_input_text(sec)

    @given(
        st.text(alphabet=" \tabcdef", max_size=200),
        st.text(alphabet=" \tabcdef", max_size=200),
        st.integers(min_value=1, max_value=40),
    )
    @settings(max_examples=300)
    def test_budget_never_exceeded(self, heading, body, max_tokens):
        sec = Section.__new__(Section)  # bypass the not-both-empty invariant
        object.__setattr__(sec, "index", 0)
        object.__setattr__(sec, "heading", heading)
        object.__setattr__(sec, "body", body)
        if not (heading.split() or body.split()):
            return
        text = build_input_text(sec, max_tokens=max_tokens)
        assert len(text.split()) <= max_tokens


class TestHashProvider:
    def test_deterministic_across_instances(self):
        a = HashProvider(dim=16, seed=7).embed_text("some heading text")
        b = HashProvider(dim=16, seed=7).embed_text("some heading text")
        assert np.array_equal(a, b)

    def test_distinct_texts_distinct_vectors(self):
        p = HashProvider(dim=8)
        assert not np.array_equal(p.embed_text("a"), p.embed_text("b"))

    def test_seed_changes_vectors(self):
        a = HashProvider(dim=8, seed=1).embed_text("x")
        b = HashProvider(dim=8, seed=2).embed_text("x")
        assert not np.array_equal(a, b)

    def test_unit_norm_recomputed_independently(self):
        p = HashProvider(dim=24, seed=3)
        for text in ("alpha", "beta gamma", "Методы", "a much longer piece of text"):
            v = p.embed_text(text)
            norm_sq = 0.0
            for x in v.tolist():
                norm_sq += x * x
            assert abs(math.sqrt(norm_sq) - 1.0) <= 1e-6

    def test_dim_validated(self):
        with pytest.raises(ValueError):
            HashProvider(dim=1)

    def test_pairwise_cosines_center_on_zero(self):
        p = HashProvider(dim=8, seed=11)
        vecs = np.stack([p.embed_text(f"text {i}") for i in range(1000)])
        gram = vecs @ vecs.T
        n = len(vecs)
        off_diagonal_sum = gram.sum() - np.trace(gram)
        mean_cosine = off_diagonal_sum / (n * (n - 1))
        assert abs(mean_cosine) < 0.05


class TestEmbedAndCache:
    def test_same_text_bitwise_identical(self):
        p = HashProvider(dim=8)
        assert np.array_equal(embed(p, "hello"), embed(p, "hello"))

    def test_empty_text_rejected(self):
        with pytest.raises(ValueError):
            embed(HashProvider(dim=8), "")

    def test_preloaded_cache_bypasses_provider(self):
        class CountingProvider:
            descriptor = ProviderDescriptor(name="hash", dim=4, version="1")
            calls = 0

            def embed_text(self, text):
                self.calls += 1
                return np.ones(4)

        provider = CountingProvider()
        cache = EmbeddingCache(provider.descriptor)
        key = content_key("warm")
        cache.put(key, np.array([0.5, 0.5, 0.5, 0.5]))
        out = embed(provider, "warm", cache)
        assert provider.calls == 0
        assert np.array_equal(out, np.array([0.5, 0.5, 0.5, 0.5]))

    def test_cache_presence_never_changes_value(self):
        p = HashProvider(dim=16, seed=5)
        cache = EmbeddingCache(p.descriptor)
        cold = embed(p, "stable text", None)
        warmed = embed(p, "stable text", cache)   # populates
        warm = embed(p, "stable text", cache)     # cache hit
        assert np.array_equal(cold, warmed)
        assert np.array_equal(warmed, warm)

    def test_descriptor_mismatch_is_error(self):
        p = HashProvider(dim=8)
        cache = EmbeddingCache(ProviderDescriptor(name="other", dim=8, version="1"))
        with pytest.raises(EmbeddingError):
            embed(p, "text", cache)

    def test_provider_failure_carries_key(self):
        class FailingProvider:
            descriptor = ProviderDescriptor(name="hash", dim=4, version="1")

            def embed_text(self, text):
                raise RuntimeError("backend down")

        with pytest.raises(EmbeddingError) as exc_info:
            embed(FailingProvider(), "doomed")
        assert exc_info.value.key == content_key("doomed")

    def test_cache_file_roundtrip_exact(self, tmp_path):
        p = HashProvider(dim=12, seed=9)
        cache = EmbeddingCache(p.descriptor)
        vectors = {}
        for i in range(20):
            text = f"text {i}"
            vectors[content_key(text)] = embed(p, text, cache)
        path = tmp_path / "cache.jsonl"
        cache.save(path)
        loaded = EmbeddingCache.load(path, expect=p.descriptor)
        assert len(loaded) == 20
        for key, vec in vectors.items():
            assert np.array_equal(loaded.get(key), vec)

    def test_cache_load_rejects_wrong_provider(self, tmp_path):
        cache = EmbeddingCache(ProviderDescriptor(name="hash", dim=4, version="1"))
        path = tmp_path / "cache.jsonl"
        cache.save(path)
        with pytest.raises(EmbeddingError):
            EmbeddingCache.load(path, expect=ProviderDescriptor(name="scibert", dim=4, version="1"))

    def test_cache_load_rejects_dim_mismatch_entry(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        path.write_text(
            '{"provider": "hash", "dim": 3, "version": "1"}\n'
            '{"key": "abc", "vec": [1.0, 2.0]}\n',
            encoding="utf-8",
        )
        with pytest.raises(EmbeddingError):
            EmbeddingCache.load(path)

    def test_cached_vector_provider_misses_are_errors(self):
        cache = EmbeddingCache(ProviderDescriptor(name="ext", dim=4, version="1"))
        provider = CachedVectorProvider(cache)
        with pytest.raises(EmbeddingError):
            provider.embed_text("never embedded")


class TestManifest:
    def test_manifest_unique_and_ordered(self, tmp_path):
        docs = [
            make_doc("d1", "X", [("Intro", "alpha"), ("Intro", "alpha")]),
            make_doc("d2", "X", [("Methods", "beta")]),
        ]
        entries = corpus_manifest(docs)
        assert len(entries) == 2
        assert entries[0][1] == "Intro alpha"
        path = tmp_path / "manifest.jsonl"
        write_manifest(path, entries)
        assert read_manifest(path) == entries

    def test_keys_match_content(self):
        docs = [make_doc("d1", "X", [("Intro", "alpha")])]
        (key, text), = corpus_manifest(docs)
        assert key == content_key(text)
