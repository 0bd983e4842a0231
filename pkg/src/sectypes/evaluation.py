"""Scoring retrofit labels against gold section types.

Per-type precision/recall/F1 plus macro and micro aggregates. Zero-denominator
metrics are reported as undefined (None), never silently as 0, and are
excluded from the macro mean. An unclassified prediction counts as a false
negative for the gold type and is never a false positive for any type.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .fileio import atomic_write_text
from .retrofit import LabeledDocument
from .vocabulary import CANONICAL_ORDER, SectionType


class EvaluationError(ValueError):
    pass


@dataclass
class GoldLabelSet:
    """Human labels keyed by (document id, section index)."""

    entries: dict[tuple[str, int], SectionType] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.entries)

    @classmethod
    def load(cls, path: str | Path) -> "GoldLabelSet":
        """Read a gold CSV with columns doc_id, section_index, gold_type.

        Extra columns (e.g. from an annotation manifest) are ignored; rows with
        an empty gold_type are skipped.
        """
        entries: dict[tuple[str, int], SectionType] = {}
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.DictReader(fh)
            required = {"doc_id", "section_index", "gold_type"}
            if reader.fieldnames is None or not required.issubset(reader.fieldnames):
                raise EvaluationError(
                    f"{path}: gold CSV must have columns doc_id, section_index, gold_type"
                )
            for row_no, row in enumerate(reader, start=2):
                gold = (row["gold_type"] or "").strip()
                if not gold:
                    continue
                try:
                    t = SectionType(gold)
                except ValueError as exc:
                    raise EvaluationError(
                        f"{path}: row {row_no}: unknown gold type {gold!r}"
                    ) from exc
                key = (row["doc_id"], int(row["section_index"]))
                if key in entries:
                    raise EvaluationError(f"{path}: row {row_no}: duplicate key {key}")
                entries[key] = t
        return cls(entries=entries)


@dataclass
class ConfusionMatrix:
    """counts[gold][predicted], with None as the unclassified predicted column."""

    counts: dict[SectionType, dict[SectionType | None, int]] = field(default_factory=dict)

    def add(self, gold: SectionType, predicted: SectionType | None, n: int = 1) -> None:
        row = self.counts.setdefault(gold, {})
        row[predicted] = row.get(predicted, 0) + n

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[SectionType, SectionType | None]]
    ) -> "ConfusionMatrix":
        cm = cls()
        for gold, predicted in pairs:
            cm.add(gold, predicted)
        return cm

    @property
    def total(self) -> int:
        return sum(n for row in self.counts.values() for n in row.values())

    def gold_count(self, t: SectionType) -> int:
        return sum(self.counts.get(t, {}).values())

    def predicted_count(self, t: SectionType) -> int:
        return sum(row.get(t, 0) for row in self.counts.values())

    def true_positives(self, t: SectionType) -> int:
        return self.counts.get(t, {}).get(t, 0)

    def to_mapping(self) -> dict:
        cols = [t.value for t in CANONICAL_ORDER] + ["unclassified"]
        grid = {}
        for gold in CANONICAL_ORDER:
            row = self.counts.get(gold, {})
            grid[gold.value] = {
                **{t.value: row.get(t, 0) for t in CANONICAL_ORDER},
                "unclassified": row.get(None, 0),
            }
        return {"columns": cols, "rows": grid}


@dataclass(frozen=True)
class TypeMetrics:
    section_type: SectionType
    precision: float | None
    recall: float | None
    f1: float | None
    gold_count: int
    predicted_count: int


@dataclass(frozen=True)
class AggregateMetrics:
    precision: float | None
    recall: float | None
    f1: float | None


@dataclass
class EvaluationResult:
    per_type: dict[SectionType, TypeMetrics]
    macro: AggregateMetrics
    micro: AggregateMetrics
    confusion: ConfusionMatrix

    def to_mapping(self) -> dict:
        return {
            "per_type": {
                t.value: {
                    "precision": m.precision,
                    "recall": m.recall,
                    "f1": m.f1,
                    "gold_count": m.gold_count,
                    "predicted_count": m.predicted_count,
                }
                for t, m in ((t, self.per_type[t]) for t in CANONICAL_ORDER if t in self.per_type)
            },
            "macro": {
                "precision": self.macro.precision,
                "recall": self.macro.recall,
                "f1": self.macro.f1,
            },
            "micro": {
                "precision": self.micro.precision,
                "recall": self.micro.recall,
                "f1": self.micro.f1,
            },
            "confusion": self.confusion.to_mapping(),
            "total_gold": self.confusion.total,
        }

    def to_table(self) -> str:
        def fmt(x: float | None) -> str:
            return "-" if x is None else f"{x:.2f}"

        rows = [("type", "precision", "recall", "f1", "gold")]
        for t in CANONICAL_ORDER:
            m = self.per_type.get(t)
            if m is None:
                continue
            rows.append((t.value, fmt(m.precision), fmt(m.recall), fmt(m.f1), str(m.gold_count)))
        rows.append(
            ("overall (macro)", fmt(self.macro.precision), fmt(self.macro.recall), fmt(self.macro.f1), str(self.confusion.total))
        )
        rows.append(
            ("overall (micro)", fmt(self.micro.precision), fmt(self.micro.recall), fmt(self.micro.f1), str(self.confusion.total))
        )
        widths = [max(len(r[i]) for r in rows) for i in range(5)]
        lines = []
        for r in rows:
            lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(r)).rstrip())
        return "\n".join(lines) + "\n"


def _safe_div(num: int, den: int) -> float | None:
    return num / den if den > 0 else None


def _f1(p: float | None, r: float | None) -> float | None:
    if p is None or r is None or p + r == 0:
        return None
    return 2 * p * r / (p + r)


def metrics_from_confusion(cm: ConfusionMatrix) -> EvaluationResult:
    if cm.total == 0:
        raise EvaluationError("empty confusion matrix")
    per_type: dict[SectionType, TypeMetrics] = {}
    for t in CANONICAL_ORDER:
        tp = cm.true_positives(t)
        gold_n = cm.gold_count(t)
        pred_n = cm.predicted_count(t)
        p = _safe_div(tp, pred_n)
        r = _safe_div(tp, gold_n)
        per_type[t] = TypeMetrics(
            section_type=t,
            precision=p,
            recall=r,
            f1=_f1(p, r),
            gold_count=gold_n,
            predicted_count=pred_n,
        )

    def macro_mean(values: list[float | None]) -> float | None:
        defined = [v for v in values if v is not None]
        return sum(defined) / len(defined) if defined else None

    macro = AggregateMetrics(
        precision=macro_mean([m.precision for m in per_type.values()]),
        recall=macro_mean([m.recall for m in per_type.values()]),
        f1=macro_mean([m.f1 for m in per_type.values()]),
    )
    tp_total = sum(cm.true_positives(t) for t in CANONICAL_ORDER)
    pred_total = sum(cm.predicted_count(t) for t in CANONICAL_ORDER)
    gold_total = cm.total
    micro_p = _safe_div(tp_total, pred_total)
    micro_r = _safe_div(tp_total, gold_total)
    micro = AggregateMetrics(precision=micro_p, recall=micro_r, f1=_f1(micro_p, micro_r))
    return EvaluationResult(per_type=per_type, macro=macro, micro=micro, confusion=cm)


def evaluate(
    predictions: Sequence[LabeledDocument],
    gold: GoldLabelSet,
) -> EvaluationResult:
    """Score predicted labels on the gold-annotated sections."""
    if len(gold) == 0:
        raise EvaluationError("gold label set is empty")
    by_key = {
        (ld.document.id, sec.index): lab
        for ld in predictions
        for sec, lab in zip(ld.document.sections, ld.labels)
    }
    pairs: list[tuple[SectionType, SectionType | None]] = []
    for key in sorted(gold.entries):
        if key not in by_key:
            raise EvaluationError(f"gold key {key} not present in predictions")
        pairs.append((gold.entries[key], by_key[key].section_type))
    return metrics_from_confusion(ConfusionMatrix.from_pairs(pairs))


@dataclass(frozen=True)
class AnnotationRow:
    doc_id: str
    section_index: int
    predicted_type: SectionType
    heading: str
    body_snippet: str


def _snippet(text: str, max_chars: int = 200) -> str:
    flat = " ".join(text.split())
    return flat[:max_chars]


def _annotation_rank(seed: int, t: SectionType, doc_id: str, index: int) -> bytes:
    h = hashlib.sha256()
    h.update(b"sectypes.goldsample.v1\x00")
    h.update(seed.to_bytes(8, "big", signed=True))
    h.update(t.value.encode("utf-8"))
    h.update(b"\x00")
    h.update(doc_id.encode("utf-8"))
    h.update(b"\x00")
    h.update(index.to_bytes(4, "big"))
    return h.digest()


def stratified_gold_sampler(
    predictions: Sequence[LabeledDocument],
    per_type: int = 30,
    seed: int = 0,
) -> tuple[list[AnnotationRow], dict[SectionType, int]]:
    """Sample up to ``per_type`` predicted instances of each type for annotation.

    Selection is by keyed-hash ranking so the manifest is identical for a given
    seed. Returns the rows (ordered by type, then document, then index) and the
    per-type shortfall counts.
    """
    if per_type < 1:
        raise ValueError(f"per_type must be >= 1, got {per_type}")
    candidates: dict[SectionType, list[tuple[str, int, str, str]]] = {
        t: [] for t in CANONICAL_ORDER
    }
    for ld in predictions:
        for sec, lab in zip(ld.document.sections, ld.labels):
            if lab.is_classified:
                candidates[lab.section_type].append(
                    (ld.document.id, sec.index, sec.heading, sec.body)
                )
    rows: list[AnnotationRow] = []
    shortfalls: dict[SectionType, int] = {}
    for t in CANONICAL_ORDER:
        pool = candidates[t]
        if len(pool) < per_type:
            shortfalls[t] = per_type - len(pool)
            picked = pool
        else:
            ranked = sorted(
                pool, key=lambda c: (_annotation_rank(seed, t, c[0], c[1]), c[0], c[1])
            )
            picked = ranked[:per_type]
        for doc_id, index, heading, body in sorted(picked, key=lambda c: (c[0], c[1])):
            rows.append(
                AnnotationRow(
                    doc_id=doc_id,
                    section_index=index,
                    predicted_type=t,
                    heading=heading,
                    body_snippet=_snippet(body),
                )
            )
    return rows, shortfalls


def annotation_manifest_csv(rows: Sequence[AnnotationRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["doc_id", "section_index", "predicted_type", "heading", "body_snippet", "gold_type"]
    )
    for row in rows:
        writer.writerow(
            [row.doc_id, row.section_index, row.predicted_type.value, row.heading, row.body_snippet, ""]
        )
    return buf.getvalue()


def write_annotation_manifest(path: str | Path, rows: Sequence[AnnotationRow]) -> None:
    atomic_write_text(path, annotation_manifest_csv(rows))
