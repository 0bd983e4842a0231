import random

import numpy as np
import pytest

from sectypes.corpus import Document, Section
from sectypes.embedding import HashProvider, ProviderDescriptor
from sectypes.vocabulary import SectionType


def make_doc(doc_id: str, discipline: str, sections: list[tuple[str, str]]) -> Document:
    return Document(
        id=doc_id,
        discipline=discipline,
        sections=tuple(
            Section(index=i, heading=h, body=b) for i, (h, b) in enumerate(sections)
        ),
    )


HEADINGS = [
    "Introduction",
    "Background",
    "Related Work",
    "Methods",
    "Materials and Methods",
    "Results",
    "Findings",
    "Analysis",
    "Discussion",
    "Conclusion",
    "Summary",
    "Our Approach",
    "Case Study",
]

WORDS = (
    "model data section corpus structure analysis results method sample "
    "experiment study finding effect measure figure table value test case"
).split()


def synthetic_corpus(
    n_docs: int,
    disciplines: list[str],
    seed: int = 0,
    min_sections: int = 3,
    max_sections: int = 8,
) -> list[Document]:
    rng = random.Random(seed)
    docs = []
    for i in range(n_docs):
        disc = disciplines[i % len(disciplines)]
        n_sections = rng.randint(min_sections, max_sections)
        sections = []
        for _ in range(n_sections):
            heading = rng.choice(HEADINGS)
            body = " ".join(rng.choice(WORDS) for _ in range(rng.randint(5, 40)))
            sections.append((heading, body))
        docs.append(make_doc(f"doc-{i:04d}", disc, sections))
    return docs


@pytest.fixture
def small_corpus() -> list[Document]:
    return synthetic_corpus(30, ["Physics", "Sociology", "Art"], seed=7)


_KEYWORD_TYPES = {
    "introduction": SectionType.INTRODUCTION,
    "intro": SectionType.INTRODUCTION,
    "background": SectionType.BACKGROUND,
    "related": SectionType.BACKGROUND,
    "methods": SectionType.METHODS,
    "method": SectionType.METHODS,
    "materials": SectionType.METHODS,
    "results": SectionType.RESULTS,
    "result": SectionType.RESULTS,
    "findings": SectionType.RESULTS,
    "analysis": SectionType.ANALYSIS,
    "discussion": SectionType.DISCUSSION,
    "conclusion": SectionType.CONCLUSION,
    "summary": SectionType.CONCLUSION,
}


class ClusteredProvider:
    """Test double with separable embeddings.

    Texts led by a known section keyword land in a tight cluster around that
    type's center; anything else lands in a far-away noise region. Fully
    deterministic (jitter comes from the hash provider).
    """

    def __init__(self, dim: int = 16, spread: float = 0.5, seed: int = 0):
        assert dim >= len(SectionType)
        self.descriptor = ProviderDescriptor(name="clustered", dim=dim, version="1")
        self._jitter = HashProvider(dim=dim, seed=seed)
        self._spread = spread

    def embed_text(self, text: str) -> np.ndarray:
        dim = self.descriptor.dim
        token = text.split()[0].lower().rstrip(".:,")
        t = _KEYWORD_TYPES.get(token)
        jitter = self._jitter.embed_text(text)
        if t is None:
            return np.full(dim, 300.0) + 50.0 * jitter
        center = np.zeros(dim)
        center[t.canonical_index] = 40.0
        return center + self._spread * jitter
