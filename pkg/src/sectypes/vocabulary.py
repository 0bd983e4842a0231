"""Heading normalization, frequency statistics, and the structural vocabulary.

The structural vocabulary is a fixed set of seven canonical section types;
each type owns a set of normalized heading aliases. Sections whose normalized
heading matches an alias are "seed instances" for that type.
"""

from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

from .corpus import Document, Section
from .fileio import read_json, write_json


class SectionType(enum.Enum):
    """The seven canonical section types.

    Definition order is the canonical order, used for tie-breaking and display.
    """

    INTRODUCTION = "introduction"
    BACKGROUND = "background"
    METHODS = "methods"
    RESULTS = "results"
    ANALYSIS = "analysis"
    DISCUSSION = "discussion"
    CONCLUSION = "conclusion"

    def __str__(self) -> str:
        return self.value

    @property
    def canonical_index(self) -> int:
        return _CANONICAL_INDEX[self]


CANONICAL_ORDER: tuple[SectionType, ...] = tuple(SectionType)
_CANONICAL_INDEX: dict[SectionType, int] = {t: i for i, t in enumerate(CANONICAL_ORDER)}

# Singular/plural and common-synonym extensions around the two well-known
# merges (conclusion+summary, background+related work); overridable per run.
DEFAULT_ALIASES: dict[SectionType, frozenset[str]] = {
    SectionType.INTRODUCTION: frozenset({"introduction", "intro"}),
    SectionType.BACKGROUND: frozenset({"background", "related work", "literature review"}),
    SectionType.METHODS: frozenset(
        {"methods", "method", "materials and methods", "methodology", "experimental"}
    ),
    SectionType.RESULTS: frozenset({"results", "result", "findings"}),
    SectionType.ANALYSIS: frozenset({"analysis", "analyses"}),
    SectionType.DISCUSSION: frozenset({"discussion", "discussions"}),
    SectionType.CONCLUSION: frozenset(
        {"conclusion", "conclusions", "summary", "concluding remarks"}
    ),
}

# Leading enumeration tokens: arabic with a dot or bracket ("3.", "3.1", "(3)"),
# roman numerals with a dot or bracket ("IV.", "iv)"), single letters with a
# dot or bracket ("A.", "b)"). Bare numbers are left alone so that the output
# alphabet (no dots/brackets) can never re-trigger a strip, which makes
# normalize_heading idempotent.
_ROMAN_BODY = r"(?=[ivxlcdm])m{0,4}(?:cm|cd|d?c{0,3})(?:xc|xl|l?x{0,3})(?:ix|iv|v?i{0,3})"
_ENUM_RE = re.compile(
    r"^\s*(?:"
    r"\(?\d+(?:\.\d+)*[.)]"  # 3.  3.1.  (3)  3)
    r"|\d+(?:\.\d+)+"        # 3.1  3.1.2
    r"|" + _ROMAN_BODY + r"[.)]"
    r"|[a-z][.)]"
    r")(?=\s|$)",
    re.IGNORECASE,
)
_PUNCT_RE = re.compile(r"[^\w\s]|_")
_WS_RE = re.compile(r"\s+")


def normalize_heading(raw: str) -> str:
    """Map a raw heading onto its comparison form.

    Leading enumeration is stripped, the text is lowercased, punctuation is
    replaced by spaces, and whitespace is collapsed. The result may be empty.
    Idempotent: normalizing an already-normalized heading is a no-op.
    """
    s = raw
    while True:
        m = _ENUM_RE.match(s)
        if m is None:
            break
        s = s[m.end():]
    s = s.lower()
    s = _PUNCT_RE.sub(" ", s)
    return _WS_RE.sub(" ", s).strip()


@dataclass
class HeadingFrequencyTable:
    """Counts of normalized headings, split by document discipline."""

    entries: dict[str, dict[str, int]] = field(default_factory=dict)
    total: int = 0

    def add(self, heading: str, discipline: str) -> None:
        per_disc = self.entries.setdefault(heading, {})
        per_disc[discipline] = per_disc.get(discipline, 0) + 1
        self.total += 1

    def heading_total(self, heading: str) -> int:
        return sum(self.entries.get(heading, {}).values())

    def discipline_count(self, heading: str) -> int:
        return len(self.entries.get(heading, {}))

    def disciplines(self) -> set[str]:
        out: set[str] = set()
        for per_disc in self.entries.values():
            out.update(per_disc)
        return out

    @property
    def is_empty(self) -> bool:
        return not self.entries


def count_headings(docs: Iterable[Document]) -> HeadingFrequencyTable:
    """Tally normalized headings per discipline; empty headings contribute nothing."""
    table = HeadingFrequencyTable()
    for doc in docs:
        for sec in doc.sections:
            normalized = normalize_heading(sec.heading)
            if normalized:
                table.add(normalized, doc.discipline)
    return table


def singleton_fraction(table: HeadingFrequencyTable) -> float:
    """Fraction of distinct normalized headings whose total count is exactly 1."""
    if table.is_empty:
        raise ValueError("heading table is empty")
    distinct = len(table.entries)
    singles = sum(1 for h in table.entries if table.heading_total(h) == 1)
    return singles / distinct


class VocabularyError(ValueError):
    """Invalid alias configuration (overlap, unknown type, bad shape)."""


@dataclass(frozen=True)
class StructuralVocabulary:
    """The seven section types with their normalized-heading alias sets.

    Alias sets are disjoint across types and each contains the type's own
    canonical name.
    """

    aliases: Mapping[SectionType, frozenset[str]]

    def __post_init__(self) -> None:
        normalized: dict[SectionType, frozenset[str]] = {}
        for t in CANONICAL_ORDER:
            given = set(self.aliases.get(t, frozenset()))
            given.add(t.value)
            normed = {normalize_heading(a) for a in given}
            normed.discard("")
            normalized[t] = frozenset(normed)
        reverse: dict[str, SectionType] = {}
        for t in CANONICAL_ORDER:
            for alias in normalized[t]:
                if alias in reverse:
                    raise VocabularyError(
                        f"alias {alias!r} claimed by both {reverse[alias]} and {t}"
                    )
                reverse[alias] = t
        object.__setattr__(self, "aliases", normalized)
        object.__setattr__(self, "_reverse", reverse)

    def type_of(self, normalized_heading: str) -> SectionType | None:
        return self._reverse.get(normalized_heading)  # type: ignore[attr-defined]

    @staticmethod
    def default() -> "StructuralVocabulary":
        return StructuralVocabulary(aliases=DEFAULT_ALIASES)

    def to_mapping(self) -> dict[str, list[str]]:
        return {t.value: sorted(self.aliases[t]) for t in CANONICAL_ORDER}

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Iterable[str]]) -> "StructuralVocabulary":
        aliases: dict[SectionType, frozenset[str]] = {}
        for name, values in mapping.items():
            try:
                t = SectionType(name)
            except ValueError as exc:
                raise VocabularyError(f"unknown section type {name!r}") from exc
            if isinstance(values, str) or not isinstance(values, Iterable):
                raise VocabularyError(f"aliases for {name!r} must be a list of strings")
            aliases[t] = frozenset(str(v) for v in values)
        return cls(aliases=aliases)


def load_vocabulary(path: str | Path) -> StructuralVocabulary:
    return StructuralVocabulary.from_mapping(read_json(path))


def save_vocabulary(vocab: StructuralVocabulary, path: str | Path) -> None:
    write_json(path, vocab.to_mapping())


@dataclass
class VocabularyReport:
    """What derive_vocabulary saw and decided."""

    top_headings: list[dict]
    mapped: dict[str, str]
    unmapped: list[str]
    per_type_headings: dict[str, list[str]]
    per_type_occurrences: dict[str, int]
    min_disciplines: int
    used_default: bool
    singleton_fraction: float = 0.0

    def to_mapping(self) -> dict:
        return {
            "top_headings": self.top_headings,
            "mapped": self.mapped,
            "unmapped": self.unmapped,
            "per_type_headings": self.per_type_headings,
            "per_type_occurrences": self.per_type_occurrences,
            "min_disciplines": self.min_disciplines,
            "used_default": self.used_default,
            "singleton_fraction": self.singleton_fraction,
        }


def _alias_lookup(
    overrides: Mapping[SectionType, Iterable[str]] | None,
) -> dict[str, SectionType]:
    merged: dict[SectionType, set[str]] = {
        t: set(aliases) for t, aliases in DEFAULT_ALIASES.items()
    }
    if overrides:
        for t, extra in overrides.items():
            merged[t].update(normalize_heading(a) for a in extra)
    reverse: dict[str, SectionType] = {}
    for t in CANONICAL_ORDER:
        for alias in merged[t]:
            if not alias:
                continue
            if alias in reverse and reverse[alias] is not t:
                raise VocabularyError(
                    f"alias {alias!r} claimed by both {reverse[alias]} and {t}"
                )
            reverse[alias] = t
    return reverse


def derive_vocabulary(
    table: HeadingFrequencyTable,
    alias_overrides: Mapping[SectionType, Iterable[str]] | None = None,
    top_k: int = 20,
    min_disciplines: int | None = None,
) -> tuple[StructuralVocabulary, VocabularyReport]:
    """Derive a vocabulary from heading frequencies.

    The ``top_k`` most frequent headings that appear in at least
    ``min_disciplines`` disciplines are matched against the default alias map
    (extended by ``alias_overrides``); matches become that type's aliases,
    the rest are reported unmapped. ``min_disciplines`` defaults to half the
    disciplines present, rounded up. If nothing matches, the default
    vocabulary is returned and flagged.
    """
    if table.is_empty:
        raise ValueError("heading table is empty")
    n_disciplines = len(table.disciplines())
    if min_disciplines is None:
        min_disciplines = max(1, math.ceil(n_disciplines / 2))

    ranked = sorted(table.entries, key=lambda h: (-table.heading_total(h), h))
    top = ranked[:top_k]
    lookup = _alias_lookup(alias_overrides)

    top_report = [
        {
            "heading": h,
            "count": table.heading_total(h),
            "disciplines": table.discipline_count(h),
        }
        for h in top
    ]
    mapped: dict[str, SectionType] = {}
    unmapped: list[str] = []
    for h in top:
        if table.discipline_count(h) < min_disciplines:
            continue
        t = lookup.get(h)
        if t is None:
            unmapped.append(h)
        else:
            mapped[h] = t

    used_default = not mapped
    if used_default:
        vocab = StructuralVocabulary.default()
    else:
        aliases = {
            t: frozenset(h for h, mt in mapped.items() if mt is t) for t in CANONICAL_ORDER
        }
        vocab = StructuralVocabulary(aliases=aliases)

    per_type_headings = {
        t.value: sorted(h for h, mt in mapped.items() if mt is t) for t in CANONICAL_ORDER
    }
    per_type_occurrences = {
        t.value: sum(table.heading_total(h) for h, mt in mapped.items() if mt is t)
        for t in CANONICAL_ORDER
    }
    report = VocabularyReport(
        top_headings=top_report,
        mapped={h: t.value for h, t in sorted(mapped.items())},
        unmapped=unmapped,
        per_type_headings=per_type_headings,
        per_type_occurrences=per_type_occurrences,
        min_disciplines=min_disciplines,
        used_default=used_default,
        singleton_fraction=singleton_fraction(table),
    )
    return vocab, report


@dataclass(frozen=True)
class SeedInstance:
    """A section whose normalized heading matched a type's alias set."""

    doc_id: str
    discipline: str
    section: Section
    section_type: SectionType


def seed_instances(
    docs: Iterable[Document],
    vocab: StructuralVocabulary,
) -> list[SeedInstance]:
    """All sections whose normalized heading is in some type's alias set."""
    out: list[SeedInstance] = []
    for doc in docs:
        for sec in doc.sections:
            t = vocab.type_of(normalize_heading(sec.heading))
            if t is not None:
                out.append(
                    SeedInstance(
                        doc_id=doc.id,
                        discipline=doc.discipline,
                        section=sec,
                        section_type=t,
                    )
                )
    return out
