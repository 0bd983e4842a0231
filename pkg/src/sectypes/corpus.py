"""Loading, validation, and sampling of scholarly-document corpora.

The on-disk corpus format is minimal JSONL, one document per line:

    {"id": str, "discipline": str, "sections": [{"heading": str, "body": str}, ...]}

Only the fields the pipeline uses are kept; a converter for S2ORC-style
records is provided for corpora that carry richer metadata.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Iterator

from .fileio import atomic_write_text


class CorpusError(ValueError):
    """A record violates the corpus format or a document invariant."""


@dataclass(frozen=True)
class Section:
    """One (heading, body) unit of a document.

    ``index`` is the section's 0-based position in its document. Either field
    may be empty (PDF-parsed corpora frequently drop headings) but never both.
    """

    index: int
    heading: str
    body: str

    def __post_init__(self) -> None:
        if not isinstance(self.index, int) or self.index < 0:
            raise CorpusError(f"section index must be a nonnegative int, got {self.index!r}")
        if not isinstance(self.heading, str) or not isinstance(self.body, str):
            raise CorpusError("section heading and body must be strings")
        if self.heading == "" and self.body == "":
            raise CorpusError(f"section {self.index} has empty heading and empty body")


@dataclass(frozen=True)
class Document:
    """An ordered list of sections plus a discipline tag.

    Disciplines are free-form tags, trimmed and compared case-sensitively.
    """

    id: str
    discipline: str
    sections: tuple[Section, ...]

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise CorpusError(f"document id must be a non-empty string, got {self.id!r}")
        if not isinstance(self.discipline, str):
            raise CorpusError("discipline must be a string")
        trimmed = self.discipline.strip()
        if not trimmed:
            raise CorpusError(f"document {self.id}: discipline is empty")
        object.__setattr__(self, "discipline", trimmed)
        object.__setattr__(self, "sections", tuple(self.sections))
        if len(self.sections) < 1:
            raise CorpusError(f"document {self.id}: sections list is empty")
        for i, sec in enumerate(self.sections):
            if not isinstance(sec, Section):
                raise CorpusError(f"document {self.id}: sections[{i}] is not a Section")
            if sec.index != i:
                raise CorpusError(
                    f"document {self.id}: section index {sec.index} at position {i} is not contiguous"
                )


@dataclass
class LoadReport:
    """Counters collected while streaming a corpus file."""

    lines: int = 0
    loaded: int = 0
    skipped: int = 0
    reasons: list[str] = field(default_factory=list)

    _MAX_REASONS = 50

    def note_skip(self, line_no: int, why: str) -> None:
        self.skipped += 1
        if len(self.reasons) < self._MAX_REASONS:
            self.reasons.append(f"line {line_no}: {why}")


def document_from_record(record: Any) -> Document:
    """Build a validated Document from one decoded JSONL record."""
    if not isinstance(record, dict):
        raise CorpusError(f"record is not a JSON object: {type(record).__name__}")
    missing = [k for k in ("id", "discipline", "sections") if k not in record]
    if missing:
        raise CorpusError(f"record missing fields: {', '.join(missing)}")
    raw_sections = record["sections"]
    if not isinstance(raw_sections, list):
        raise CorpusError("'sections' is not a list")
    sections = []
    for i, raw in enumerate(raw_sections):
        if not isinstance(raw, dict):
            raise CorpusError(f"sections[{i}] is not an object")
        heading = raw.get("heading", "")
        body = raw.get("body", "")
        sections.append(Section(index=i, heading=heading, body=body))
    return Document(id=record["id"], discipline=record["discipline"], sections=tuple(sections))


def load_corpus(
    path: str | Path,
    strict: bool = False,
    report: LoadReport | None = None,
) -> Iterator[Document]:
    """Stream validated Documents from a JSONL corpus file, in file order.

    In non-strict mode malformed records are skipped and counted in ``report``;
    in strict mode the first malformed record raises. A duplicate document id
    is an error in either mode.
    """
    if report is None:
        report = LoadReport()
    seen_ids: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            report.lines += 1
            stripped = line.strip()
            if not stripped:
                if strict:
                    raise CorpusError(f"{path}: line {line_no}: blank line")
                report.note_skip(line_no, "blank line")
                continue
            try:
                record = json.loads(stripped)
                doc = document_from_record(record)
            except (json.JSONDecodeError, CorpusError) as exc:
                if strict:
                    raise CorpusError(f"{path}: line {line_no}: {exc}") from exc
                report.note_skip(line_no, str(exc))
                continue
            if doc.id in seen_ids:
                raise CorpusError(f"{path}: line {line_no}: duplicate document id {doc.id!r}")
            seen_ids.add(doc.id)
            report.loaded += 1
            yield doc


def read_corpus(path: str | Path, strict: bool = False) -> tuple[list[Document], LoadReport]:
    report = LoadReport()
    docs = list(load_corpus(path, strict=strict, report=report))
    return docs, report


def corpus_record(doc: Document) -> dict:
    return {
        "id": doc.id,
        "discipline": doc.discipline,
        "sections": [{"heading": s.heading, "body": s.body} for s in doc.sections],
    }


def corpus_text(docs: Iterable[Document]) -> str:
    """Serialize documents in the canonical key order, one JSON object per line."""
    return "".join(
        json.dumps(corpus_record(d), ensure_ascii=False, separators=(",", ":")) + "\n"
        for d in docs
    )


def save_corpus(docs: Iterable[Document], path: str | Path) -> None:
    atomic_write_text(path, corpus_text(docs))


@dataclass
class SampleReport:
    """Per-discipline availability and shortfall for one sampling run."""

    requested: int
    seed: int
    available: dict[str, int] = field(default_factory=dict)
    taken: dict[str, int] = field(default_factory=dict)

    @property
    def shortfalls(self) -> dict[str, int]:
        return {
            d: self.requested - n
            for d, n in sorted(self.taken.items())
            if n < self.requested
        }

    def to_mapping(self) -> dict:
        return {
            "requested_per_discipline": self.requested,
            "seed": self.seed,
            "available": dict(sorted(self.available.items())),
            "taken": dict(sorted(self.taken.items())),
            "shortfalls": self.shortfalls,
        }


def _sample_rank(seed: int, discipline: str, doc_id: str) -> bytes:
    h = hashlib.sha256()
    h.update(b"sectypes.sample.v1\x00")
    h.update(seed.to_bytes(8, "big", signed=True))
    h.update(discipline.encode("utf-8"))
    h.update(b"\x00")
    h.update(doc_id.encode("utf-8"))
    return h.digest()


def sample_per_discipline(
    docs: Iterable[Document],
    n: int,
    seed: int,
) -> tuple[list[Document], SampleReport]:
    """Pick up to ``n`` documents per discipline, uniformly without replacement.

    Selection is by keyed-hash ranking: each document gets a SHA-256 rank from
    (seed, discipline, id) and the ``n`` smallest ranks win. This is uniform
    over subsets, independent of input order, and stable across platforms.
    Disciplines with fewer than ``n`` documents are taken whole and reported.
    Output is ordered by (discipline, id).
    """
    if n < 1:
        raise ValueError(f"sample size must be >= 1, got {n}")
    by_discipline: dict[str, list[Document]] = {}
    seen_ids: set[str] = set()
    for doc in docs:
        if doc.id in seen_ids:
            raise CorpusError(f"duplicate document id {doc.id!r} in corpus")
        seen_ids.add(doc.id)
        by_discipline.setdefault(doc.discipline, []).append(doc)

    report = SampleReport(requested=n, seed=seed)
    chosen: list[Document] = []
    for discipline in sorted(by_discipline):
        group = by_discipline[discipline]
        report.available[discipline] = len(group)
        if len(group) <= n:
            picked = group
        else:
            ranked = sorted(group, key=lambda d: (_sample_rank(seed, discipline, d.id), d.id))
            picked = ranked[:n]
        report.taken[discipline] = len(picked)
        chosen.extend(picked)
    chosen.sort(key=lambda d: (d.discipline, d.id))
    return chosen, report


def _s2orc_discipline(record: dict) -> str | None:
    for key in ("discipline", "field", "field_of_study"):
        value = record.get(key)
        if isinstance(value, str) and value.strip():
            return value
    mag = record.get("mag_field_of_study")
    if isinstance(mag, list) and mag and isinstance(mag[0], str) and mag[0].strip():
        return mag[0]
    if isinstance(mag, str) and mag.strip():
        return mag
    return None


def _s2orc_body_entries(record: dict) -> list | None:
    body = record.get("body_text")
    if isinstance(body, list):
        return body
    for parse_key in ("pdf_parse", "grobid_parse"):
        parse = record.get(parse_key)
        if isinstance(parse, dict) and isinstance(parse.get("body_text"), list):
            return parse["body_text"]
    return None


def convert_s2orc_record(record: Any) -> Document:
    """Convert one S2ORC-style record to the minimal Document shape.

    Accepts ``paper_id``/``id``, a discipline from ``discipline``/``field``/
    ``mag_field_of_study``, and a paragraph list under ``body_text`` (top-level
    or inside ``pdf_parse``/``grobid_parse``). Consecutive paragraphs sharing a
    section name are merged into one section.
    """
    if not isinstance(record, dict):
        raise CorpusError(f"record is not a JSON object: {type(record).__name__}")
    if "sections" in record:
        return document_from_record(record)
    doc_id = record.get("paper_id") or record.get("id")
    if not isinstance(doc_id, str) or not doc_id:
        if isinstance(doc_id, int):
            doc_id = str(doc_id)
        else:
            raise CorpusError("record has no usable 'paper_id'/'id'")
    discipline = _s2orc_discipline(record)
    if discipline is None:
        raise CorpusError(f"record {doc_id}: no discipline field")
    entries = _s2orc_body_entries(record)
    if entries is None:
        raise CorpusError(f"record {doc_id}: no body_text entries")

    sections: list[Section] = []
    current_heading: str | None = None
    current_paragraphs: list[str] = []

    def flush() -> None:
        nonlocal current_heading, current_paragraphs
        if current_heading is None and not current_paragraphs:
            return
        body = "\n\n".join(p for p in current_paragraphs if p)
        heading = current_heading or ""
        if heading or body:
            sections.append(Section(index=len(sections), heading=heading, body=body))
        current_heading = None
        current_paragraphs = []

    for entry in entries:
        if not isinstance(entry, dict):
            continue
        heading = entry.get("section") or ""
        text = entry.get("text") or ""
        if not isinstance(heading, str) or not isinstance(text, str):
            continue
        if current_heading is None or heading != current_heading:
            flush()
            current_heading = heading
        current_paragraphs.append(text)
    flush()

    if not sections:
        raise CorpusError(f"record {doc_id}: no non-empty sections")
    return Document(id=doc_id, discipline=discipline, sections=tuple(sections))


def convert_s2orc_stream(
    lines: Iterable[str],
    report: LoadReport | None = None,
) -> Iterator[Document]:
    """Convert raw S2ORC-style JSONL lines, skipping unusable records."""
    if report is None:
        report = LoadReport()
    seen_ids: set[str] = set()
    for line_no, line in enumerate(lines, start=1):
        report.lines += 1
        stripped = line.strip()
        if not stripped:
            report.note_skip(line_no, "blank line")
            continue
        try:
            record = json.loads(stripped)
            doc = convert_s2orc_record(record)
        except (json.JSONDecodeError, CorpusError) as exc:
            report.note_skip(line_no, str(exc))
            continue
        if doc.id in seen_ids:
            raise CorpusError(f"line {line_no}: duplicate document id {doc.id!r}")
        seen_ids.add(doc.id)
        report.loaded += 1
        yield doc
