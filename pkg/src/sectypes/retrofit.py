"""Nearest-centroid section classification with per-type rejection thresholds.

Fitting computes one centroid per section type from seed instances, plus a
rejection threshold of ``weight x furthest-member distance``. Classification
picks the nearest centroid and rejects the match when it falls outside that
centroid's threshold ("retrofitting" a corpus re-labels every section this
way).
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .corpus import Document
from .embedding import (
    EmbeddingCache,
    EmbeddingError,
    EmbeddingProvider,
    ProviderDescriptor,
    build_input_text,
    embed,
)
from .fileio import atomic_write_text, read_json, write_json
from .vocabulary import (
    CANONICAL_ORDER,
    SectionType,
    StructuralVocabulary,
    normalize_heading,
)

NORMS = ("l2", "l1")


class RetrofitError(RuntimeError):
    pass


def _as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {arr.shape}")
    return arr


def distance(s_vec, centroid_vec, norm: str = "l2") -> float:
    """Distance between a section vector and a centroid (L2 by default)."""
    a = _as_vector(s_vec, "s_vec")
    b = _as_vector(centroid_vec, "centroid_vec")
    if a.shape != b.shape:
        raise ValueError(f"dim mismatch: {a.shape[0]} vs {b.shape[0]}")
    diff = a - b
    if norm == "l2":
        return float(np.sqrt(np.dot(diff, diff)))
    if norm == "l1":
        return float(np.abs(diff).sum())
    raise ValueError(f"unknown norm {norm!r}; expected one of {NORMS}")


def compute_centroid(instances: Sequence) -> np.ndarray:
    """Elementwise arithmetic mean of the instance vectors."""
    if len(instances) == 0:
        raise ValueError("cannot compute a centroid of zero instances")
    arrs = [_as_vector(v, f"instances[{i}]") for i, v in enumerate(instances)]
    dim = arrs[0].shape[0]
    for i, a in enumerate(arrs):
        if a.shape[0] != dim:
            raise ValueError(f"mixed dims: instances[{i}] has {a.shape[0]}, expected {dim}")
    return np.stack(arrs).mean(axis=0)


def compute_threshold(
    centroid_vec,
    instances: Sequence,
    weight: float = 0.5,
    norm: str = "l2",
) -> float:
    """``weight`` times the distance from the centroid to its furthest member."""
    if weight <= 0:
        raise ValueError(f"weight must be > 0, got {weight}")
    if len(instances) == 0:
        raise ValueError("cannot compute a threshold from zero instances")
    return weight * max(distance(v, centroid_vec, norm) for v in instances)


@dataclass(frozen=True)
class Centroid:
    section_type: SectionType
    vector: np.ndarray
    member_count: int
    max_member_distance: float
    threshold: float


@dataclass(frozen=True)
class RetrofitModel:
    """Per-type centroids plus the provider identity and fit metadata."""

    centroids: Mapping[SectionType, Centroid]
    provider: ProviderDescriptor
    weight: float
    norm: str = "l2"
    seed_counts: Mapping[SectionType, int] = field(default_factory=dict)
    excluded: Mapping[SectionType, int] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.weight <= 0:
            raise ValueError(f"weight must be > 0, got {self.weight}")
        if self.norm not in NORMS:
            raise ValueError(f"unknown norm {self.norm!r}")
        if not self.centroids:
            raise ValueError("model has no centroids")
        for t, c in self.centroids.items():
            if c.vector.shape != (self.provider.dim,):
                raise ValueError(
                    f"centroid for {t} has dim {c.vector.shape[0]}, provider dim is {self.provider.dim}"
                )

    @property
    def dim(self) -> int:
        return self.provider.dim


@dataclass(frozen=True)
class Label:
    """Classification outcome for one section.

    ``section_type`` is None when the best match fell outside its threshold;
    the nearest type and its distance are always recorded for diagnostics.
    """

    section_type: SectionType | None
    best_type: SectionType
    best_distance: float

    @property
    def is_classified(self) -> bool:
        return self.section_type is not None


def fit(
    seeds: Iterable[tuple[Sequence, SectionType]],
    provider: ProviderDescriptor,
    weight: float = 0.5,
    min_members: int = 2,
    norm: str = "l2",
) -> RetrofitModel:
    """Fit one centroid + threshold per type from labeled seed vectors.

    Types with fewer than ``min_members`` seeds are excluded (a single member
    would get threshold 0 and match only itself) and recorded in the model.
    """
    groups: dict[SectionType, list[np.ndarray]] = {}
    for vec, t in seeds:
        arr = _as_vector(vec)
        if arr.shape != (provider.dim,):
            raise ValueError(
                f"seed for {t} has dim {arr.shape[0]}, provider dim is {provider.dim}"
            )
        groups.setdefault(t, []).append(arr)

    seed_counts = {t: len(groups[t]) for t in CANONICAL_ORDER if t in groups}
    excluded = {t: n for t, n in seed_counts.items() if n < min_members}
    centroids: dict[SectionType, Centroid] = {}
    for t in CANONICAL_ORDER:
        members = groups.get(t)
        if members is None or t in excluded:
            continue
        center = compute_centroid(members)
        max_dist = max(distance(v, center, norm) for v in members)
        centroids[t] = Centroid(
            section_type=t,
            vector=center,
            member_count=len(members),
            max_member_distance=max_dist,
            threshold=weight * max_dist,
        )
    if not centroids:
        raise RetrofitError(
            f"no section type has >= {min_members} seed instances; cannot fit"
        )
    return RetrofitModel(
        centroids=centroids,
        provider=provider,
        weight=weight,
        norm=norm,
        seed_counts=seed_counts,
        excluded=excluded,
    )


def classify(s_vec, model: RetrofitModel) -> Label:
    """Nearest-centroid label with rejection.

    The argmin over centroids is taken first (ties broken by canonical type
    order), then the winner's threshold decides acceptance.
    """
    v = _as_vector(s_vec, "s_vec")
    if v.shape != (model.dim,):
        raise ValueError(f"vector dim {v.shape[0]} does not match model dim {model.dim}")
    best_type: SectionType | None = None
    best_dist = 0.0
    for t in CANONICAL_ORDER:
        c = model.centroids.get(t)
        if c is None:
            continue
        d = distance(v, c.vector, model.norm)
        if best_type is None or d < best_dist:
            best_type = t
            best_dist = d
    assert best_type is not None
    if best_dist <= model.centroids[best_type].threshold:
        return Label(section_type=best_type, best_type=best_type, best_distance=best_dist)
    return Label(section_type=None, best_type=best_type, best_distance=best_dist)


@dataclass(frozen=True)
class LabeledDocument:
    document: Document
    labels: tuple[Label, ...]

    def __post_init__(self) -> None:
        if len(self.labels) != len(self.document.sections):
            raise ValueError(
                f"document {self.document.id}: {len(self.labels)} labels for "
                f"{len(self.document.sections)} sections"
            )


@dataclass
class BeforeAfterCounts:
    """Seed-heading matches before retrofitting vs classified counts after."""

    before: dict[str, dict[SectionType, int]]
    after: dict[str, dict[SectionType, int]]
    unclassified: dict[str, int]

    def to_mapping(self) -> dict:
        return {
            "before": {
                d: {t.value: self.before[d].get(t, 0) for t in CANONICAL_ORDER}
                for d in sorted(self.before)
            },
            "after": {
                d: {t.value: self.after[d].get(t, 0) for t in CANONICAL_ORDER}
                for d in sorted(self.after)
            },
            "unclassified": {d: self.unclassified[d] for d in sorted(self.unclassified)},
        }


def retrofit_corpus(
    docs: Sequence[Document],
    model: RetrofitModel,
    provider: EmbeddingProvider,
    vocab: StructuralVocabulary,
    cache: EmbeddingCache | None = None,
    max_tokens: int = 25,
    jobs: int = 1,
) -> tuple[list[LabeledDocument], BeforeAfterCounts]:
    """Label every section of every document; report per-discipline counts.

    Sections are embedded via build_input_text -> embed -> classify. The
    "before" counts tally sections whose normalized heading matches the
    vocabulary (seed headings); "after" tallies classified labels. Results are
    deterministic and ordered by (document, section index) regardless of
    ``jobs``.
    """
    if provider.descriptor != model.provider:
        raise RetrofitError(
            f"provider {provider.descriptor} does not match model provider {model.provider}"
        )
    docs = list(docs)
    texts = [
        build_input_text(sec, max_tokens=max_tokens) for doc in docs for sec in doc.sections
    ]

    done = 0

    def embed_one(text: str) -> np.ndarray:
        return embed(provider, text, cache)

    try:
        if jobs > 1:
            with ThreadPoolExecutor(max_workers=jobs) as pool:
                vectors = list(pool.map(embed_one, texts))
            done = len(vectors)
        else:
            vectors = []
            for text in texts:
                vectors.append(embed_one(text))
                done += 1
    except EmbeddingError as exc:
        raise RetrofitError(
            f"embedding failed after {done} of {len(texts)} sections "
            f"(offending key: {exc.key}): {exc}"
        ) from exc

    labeled: list[LabeledDocument] = []
    before: dict[str, dict[SectionType, int]] = {}
    after: dict[str, dict[SectionType, int]] = {}
    unclassified: dict[str, int] = {}
    pos = 0
    for doc in docs:
        disc = doc.discipline
        before.setdefault(disc, {})
        after.setdefault(disc, {})
        unclassified.setdefault(disc, 0)
        labels = []
        for sec in doc.sections:
            label = classify(vectors[pos], model)
            pos += 1
            labels.append(label)
            seed_type = vocab.type_of(normalize_heading(sec.heading))
            if seed_type is not None:
                before[disc][seed_type] = before[disc].get(seed_type, 0) + 1
            if label.is_classified:
                t = label.section_type
                after[disc][t] = after[disc].get(t, 0) + 1
            else:
                unclassified[disc] += 1
        labeled.append(LabeledDocument(document=doc, labels=tuple(labels)))
    counts = BeforeAfterCounts(before=before, after=after, unclassified=unclassified)
    return labeled, counts


# ---------------------------------------------------------------------------
# Persistence

MODEL_FORMAT = "sectypes-retrofit-model"


def save_model(model: RetrofitModel, path: str | Path) -> None:
    payload = {
        "format": MODEL_FORMAT,
        "weight": model.weight,
        "norm": model.norm,
        "provider": model.provider.to_mapping(),
        "seed_counts": {t.value: model.seed_counts[t] for t in CANONICAL_ORDER if t in model.seed_counts},
        "excluded": {t.value: model.excluded[t] for t in CANONICAL_ORDER if t in model.excluded},
        "centroids": {
            t.value: {
                "vector": [float(x) for x in model.centroids[t].vector.tolist()],
                "member_count": model.centroids[t].member_count,
                "max_member_distance": model.centroids[t].max_member_distance,
                "threshold": model.centroids[t].threshold,
            }
            for t in CANONICAL_ORDER
            if t in model.centroids
        },
    }
    write_json(path, payload)


def load_model(path: str | Path) -> RetrofitModel:
    payload = read_json(path)
    if payload.get("format") != MODEL_FORMAT:
        raise RetrofitError(f"{path}: not a retrofit model file")
    provider = ProviderDescriptor.from_mapping(payload["provider"])
    centroids: dict[SectionType, Centroid] = {}
    for name, c in payload["centroids"].items():
        t = SectionType(name)
        centroids[t] = Centroid(
            section_type=t,
            vector=np.asarray(c["vector"], dtype=np.float64),
            member_count=int(c["member_count"]),
            max_member_distance=float(c["max_member_distance"]),
            threshold=float(c["threshold"]),
        )
    return RetrofitModel(
        centroids=centroids,
        provider=provider,
        weight=float(payload["weight"]),
        norm=payload.get("norm", "l2"),
        seed_counts={SectionType(k): int(v) for k, v in payload.get("seed_counts", {}).items()},
        excluded={SectionType(k): int(v) for k, v in payload.get("excluded", {}).items()},
    )


def save_labels(labeled: Iterable[LabeledDocument], path: str | Path) -> None:
    """One JSON line per document: id, discipline, per-section labels."""
    lines = []
    for ld in labeled:
        record = {
            "id": ld.document.id,
            "discipline": ld.document.discipline,
            "labels": [
                {
                    "index": i,
                    "type": lab.section_type.value if lab.section_type else None,
                    "best": lab.best_type.value,
                    "distance": lab.best_distance,
                }
                for i, lab in enumerate(ld.labels)
            ],
        }
        lines.append(json.dumps(record, ensure_ascii=False))
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def load_labels(path: str | Path, docs: Sequence[Document]) -> list[LabeledDocument]:
    """Join a labels file back onto its corpus; every document must be covered."""
    by_id = {d.id: d for d in docs}
    labeled: list[LabeledDocument] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped:
                continue
            record = json.loads(stripped)
            doc_id = record.get("id")
            doc = by_id.get(doc_id)
            if doc is None:
                raise RetrofitError(f"{path}: line {line_no}: unknown document id {doc_id!r}")
            if doc_id in seen:
                raise RetrofitError(f"{path}: line {line_no}: duplicate document id {doc_id!r}")
            seen.add(doc_id)
            labels = []
            for entry in record.get("labels", []):
                type_name = entry.get("type")
                labels.append(
                    Label(
                        section_type=SectionType(type_name) if type_name else None,
                        best_type=SectionType(entry["best"]),
                        best_distance=float(entry["distance"]),
                    )
                )
            labeled.append(LabeledDocument(document=doc, labels=tuple(labels)))
    missing = set(by_id) - seen
    if missing:
        raise RetrofitError(
            f"{path}: labels missing for {len(missing)} documents (e.g. {sorted(missing)[:3]})"
        )
    labeled.sort(key=lambda ld: (ld.document.discipline, ld.document.id))
    return labeled
