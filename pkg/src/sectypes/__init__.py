"""Retrofit scholarly-document sections onto a fixed structural vocabulary and
compute per-discipline structural archetypes."""

from .corpus import (
    CorpusError,
    Document,
    LoadReport,
    SampleReport,
    Section,
    load_corpus,
    read_corpus,
    sample_per_discipline,
    save_corpus,
)
from .embedding import (
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
from .retrofit import (
    Centroid,
    Label,
    LabeledDocument,
    RetrofitModel,
    classify,
    compute_centroid,
    compute_threshold,
    distance,
    fit,
    load_model,
    retrofit_corpus,
    save_model,
)
from .vocabulary import (
    CANONICAL_ORDER,
    DEFAULT_ALIASES,
    SectionType,
    SeedInstance,
    StructuralVocabulary,
    count_headings,
    derive_vocabulary,
    normalize_heading,
    seed_instances,
    singleton_fraction,
)

__version__ = "0.1.0"

__all__ = [
    "CANONICAL_ORDER",
    "CachedVectorProvider",
    "Centroid",
    "CorpusError",
    "DEFAULT_ALIASES",
    "Document",
    "EmbeddingCache",
    "EmbeddingError",
    "HashProvider",
    "Label",
    "LabeledDocument",
    "LoadReport",
    "ProviderDescriptor",
    "RetrofitModel",
    "SampleReport",
    "Section",
    "SectionType",
    "SeedInstance",
    "StructuralVocabulary",
    "build_input_text",
    "classify",
    "compute_centroid",
    "compute_threshold",
    "content_key",
    "corpus_manifest",
    "count_headings",
    "derive_vocabulary",
    "distance",
    "embed",
    "fit",
    "load_corpus",
    "load_model",
    "normalize_heading",
    "read_corpus",
    "read_manifest",
    "retrofit_corpus",
    "sample_per_discipline",
    "save_corpus",
    "save_model",
    "seed_instances",
    "singleton_fraction",
    "write_manifest",
]
