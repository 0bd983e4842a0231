"""Structural-archetype statistics over labeled corpora.

Two views per discipline: where each section type tends to sit inside a
document (positional frequency histograms) and which type tends to follow
which (first-order transition probabilities).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .fileio import atomic_write_text
from .retrofit import LabeledDocument
from .vocabulary import CANONICAL_ORDER, SectionType

POLICIES = ("drop", "keep-as-gap")


@dataclass(frozen=True)
class TypeSequence:
    """A document reduced to its ordered section types.

    Under the ``drop`` policy unclassified sections are removed, so the
    remaining types become adjacent. Under ``keep-as-gap`` they stay as None
    entries, which break adjacency for transition counting.
    """

    document_id: str
    discipline: str
    types: tuple[SectionType | None, ...]


def extract_sequence(
    labeled: LabeledDocument,
    unclassified_policy: str = "drop",
) -> TypeSequence:
    if unclassified_policy not in POLICIES:
        raise ValueError(f"unknown policy {unclassified_policy!r}; expected one of {POLICIES}")
    if unclassified_policy == "drop":
        types: tuple[SectionType | None, ...] = tuple(
            lab.section_type for lab in labeled.labels if lab.is_classified
        )
    else:
        types = tuple(lab.section_type for lab in labeled.labels)
    return TypeSequence(
        document_id=labeled.document.id,
        discipline=labeled.document.discipline,
        types=types,
    )


@dataclass(frozen=True)
class PositionHistogram:
    """Counts of one type's occurrences across normalized document positions.

    ``frequencies`` divides by the discipline-wide number of classified
    sections, so frequencies sum to 1 over all types and bins of a discipline;
    it is None when that total is zero.
    """

    discipline: str
    section_type: SectionType
    bins: int
    counts: tuple[int, ...]
    frequencies: tuple[float, ...] | None

    def __post_init__(self) -> None:
        if self.bins < 2:
            raise ValueError(f"bins must be >= 2, got {self.bins}")
        if len(self.counts) != self.bins:
            raise ValueError("counts length does not match bin count")


def position_bin(index: int, n_sections: int, bins: int) -> int:
    """Bin of a section at ``index`` in a document of ``n_sections``.

    Positions use the midpoint convention p = (index + 0.5) / n, which avoids
    the 0/1 endpoints and is well-defined for single-section documents.
    """
    p = (index + 0.5) / n_sections
    b = int(p * bins)
    return min(b, bins - 1)


def position_histograms(
    labeled_docs: Iterable[LabeledDocument],
    discipline: str,
    bins: int = 20,
) -> dict[SectionType, PositionHistogram]:
    """One histogram per section type for the given discipline.

    Every classified section contributes one count at its normalized position;
    unclassified sections are excluded (but still count toward document
    length).
    """
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    counts = {t: [0] * bins for t in CANONICAL_ORDER}
    total = 0
    for ld in labeled_docs:
        if ld.document.discipline != discipline:
            continue
        n = len(ld.document.sections)
        for sec, lab in zip(ld.document.sections, ld.labels):
            if not lab.is_classified:
                continue
            counts[lab.section_type][position_bin(sec.index, n, bins)] += 1
            total += 1
    out: dict[SectionType, PositionHistogram] = {}
    for t in CANONICAL_ORDER:
        freqs = tuple(c / total for c in counts[t]) if total > 0 else None
        out[t] = PositionHistogram(
            discipline=discipline,
            section_type=t,
            bins=bins,
            counts=tuple(counts[t]),
            frequencies=freqs,
        )
    return out


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic type-to-type transition probabilities for one discipline.

    ``probs[a][b]`` estimates P(next = b | current = a); rows with no observed
    successor are identically zero. ``support`` holds the raw pair counts.
    """

    discipline: str
    probs: np.ndarray
    support: np.ndarray

    def prob(self, from_type: SectionType, to_type: SectionType) -> float:
        return float(self.probs[from_type.canonical_index, to_type.canonical_index])

    def support_of(self, from_type: SectionType, to_type: SectionType) -> int:
        return int(self.support[from_type.canonical_index, to_type.canonical_index])

    @property
    def states(self) -> tuple[SectionType, ...]:
        return CANONICAL_ORDER


def count_transitions(sequence: TypeSequence) -> list[tuple[SectionType, SectionType]]:
    """Ordered (previous, next) pairs; pairs across a gap are not counted."""
    pairs: list[tuple[SectionType, SectionType]] = []
    for prev, cur in zip(sequence.types, sequence.types[1:]):
        if prev is not None and cur is not None:
            pairs.append((prev, cur))
    return pairs


def transition_matrix_from_sequences(
    sequences: Iterable[TypeSequence],
    discipline: str,
) -> TransitionMatrix:
    k = len(CANONICAL_ORDER)
    support = np.zeros((k, k), dtype=np.int64)
    for seq in sequences:
        for a, b in count_transitions(seq):
            support[a.canonical_index, b.canonical_index] += 1
    probs = np.zeros((k, k), dtype=np.float64)
    for i in range(k):
        row_total = int(support[i].sum())
        if row_total > 0:
            for j in range(k):
                probs[i, j] = int(support[i, j]) / row_total
    return TransitionMatrix(discipline=discipline, probs=probs, support=support)


def transition_matrix(
    labeled_docs: Iterable[LabeledDocument],
    discipline: str,
    unclassified_policy: str = "drop",
) -> TransitionMatrix:
    sequences = [
        extract_sequence(ld, unclassified_policy)
        for ld in labeled_docs
        if ld.document.discipline == discipline
    ]
    return transition_matrix_from_sequences(sequences, discipline)


@dataclass(frozen=True)
class DisciplineComparison:
    """Per-type, per-bin frequency differences between two disciplines."""

    discipline_a: str
    discipline_b: str
    bins: int
    differences: Mapping[SectionType, tuple[float, ...]]
    ranking: tuple[tuple[SectionType, float], ...]


def compare_disciplines(
    hists_a: Mapping[SectionType, PositionHistogram],
    hists_b: Mapping[SectionType, PositionHistogram],
) -> DisciplineComparison:
    """frequency(A) - frequency(B) per type and bin; types ranked by |diff| mass.

    Both sides must use the same bin count and have frequencies (a discipline
    with zero classified sections has none).
    """
    types = list(CANONICAL_ORDER)
    for t in types:
        if t not in hists_a or t not in hists_b:
            raise ValueError(f"missing histogram for type {t}")
    a0, b0 = hists_a[types[0]], hists_b[types[0]]
    if a0.bins != b0.bins:
        raise ValueError(f"bin-count mismatch: {a0.bins} vs {b0.bins}")
    diffs: dict[SectionType, tuple[float, ...]] = {}
    totals: list[tuple[SectionType, float]] = []
    for t in types:
        ha, hb = hists_a[t], hists_b[t]
        if ha.bins != a0.bins or hb.bins != a0.bins:
            raise ValueError("bin-count mismatch across types")
        if ha.frequencies is None or hb.frequencies is None:
            raise ValueError(
                f"frequency mode required: no classified sections for "
                f"{ha.discipline if ha.frequencies is None else hb.discipline}"
            )
        d = tuple(fa - fb for fa, fb in zip(ha.frequencies, hb.frequencies))
        diffs[t] = d
        totals.append((t, sum(abs(x) for x in d)))
    ranking = tuple(sorted(totals, key=lambda pair: (-pair[1], pair[0].canonical_index)))
    return DisciplineComparison(
        discipline_a=a0.discipline,
        discipline_b=b0.discipline,
        bins=a0.bins,
        differences=diffs,
        ranking=ranking,
    )


# ---------------------------------------------------------------------------
# Tabular / JSON / SVG emission

def positions_csv(hists_by_discipline: Mapping[str, Mapping[SectionType, PositionHistogram]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["discipline", "type", "bin", "low", "high", "count", "frequency"])
    for discipline in sorted(hists_by_discipline):
        hists = hists_by_discipline[discipline]
        for t in CANONICAL_ORDER:
            h = hists[t]
            for b in range(h.bins):
                freq = h.frequencies[b] if h.frequencies is not None else ""
                writer.writerow(
                    [discipline, t.value, b, b / h.bins, (b + 1) / h.bins, h.counts[b], freq]
                )
    return buf.getvalue()


def positions_mapping(
    hists_by_discipline: Mapping[str, Mapping[SectionType, PositionHistogram]],
) -> dict:
    out: dict = {"disciplines": {}}
    bins = None
    for discipline in sorted(hists_by_discipline):
        hists = hists_by_discipline[discipline]
        types = {}
        for t in CANONICAL_ORDER:
            h = hists[t]
            bins = h.bins
            types[t.value] = {
                "counts": list(h.counts),
                "frequencies": list(h.frequencies) if h.frequencies is not None else None,
            }
        out["disciplines"][discipline] = {"types": types}
    out["bins"] = bins
    return out


def histograms_from_mapping(
    mapping: dict,
    discipline: str,
) -> dict[SectionType, PositionHistogram]:
    bins = int(mapping["bins"])
    entry = mapping["disciplines"].get(discipline)
    if entry is None:
        raise KeyError(f"no position data for discipline {discipline!r}")
    out: dict[SectionType, PositionHistogram] = {}
    for t in CANONICAL_ORDER:
        data = entry["types"][t.value]
        freqs = data["frequencies"]
        out[t] = PositionHistogram(
            discipline=discipline,
            section_type=t,
            bins=bins,
            counts=tuple(int(c) for c in data["counts"]),
            frequencies=tuple(float(f) for f in freqs) if freqs is not None else None,
        )
    return out


def transitions_csv(matrices: Mapping[str, TransitionMatrix]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["discipline", "from", "to", "prob", "support"])
    for discipline in sorted(matrices):
        m = matrices[discipline]
        for a in CANONICAL_ORDER:
            for b in CANONICAL_ORDER:
                writer.writerow([discipline, a.value, b.value, m.prob(a, b), m.support_of(a, b)])
    return buf.getvalue()


def transitions_mapping(matrices: Mapping[str, TransitionMatrix]) -> dict:
    out: dict = {"states": [t.value for t in CANONICAL_ORDER], "disciplines": {}}
    for discipline in sorted(matrices):
        m = matrices[discipline]
        out["disciplines"][discipline] = {
            "probs": [[float(x) for x in row] for row in m.probs],
            "support": [[int(x) for x in row] for row in m.support],
        }
    return out


def comparison_csv(cmp: DisciplineComparison) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["type", "bin", "low", "high", "diff"])
    for t in CANONICAL_ORDER:
        for b, d in enumerate(cmp.differences[t]):
            writer.writerow([t.value, b, b / cmp.bins, (b + 1) / cmp.bins, d])
    return buf.getvalue()


def comparison_mapping(cmp: DisciplineComparison) -> dict:
    return {
        "discipline_a": cmp.discipline_a,
        "discipline_b": cmp.discipline_b,
        "bins": cmp.bins,
        "differences": {t.value: list(cmp.differences[t]) for t in CANONICAL_ORDER},
        "ranking": [
            {"type": t.value, "total_abs_diff": total} for t, total in cmp.ranking
        ],
    }


def _svg_header(width: int, height: int) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif">\n'
    )


def histogram_svg(hists: Mapping[SectionType, PositionHistogram]) -> str:
    """Small-multiples bar chart, one panel per section type."""
    panel_w, panel_h, pad = 180, 90, 24
    cols = 4
    rows = (len(CANONICAL_ORDER) + cols - 1) // cols
    width = cols * (panel_w + pad) + pad
    height = rows * (panel_h + pad + 16) + pad
    discipline = hists[CANONICAL_ORDER[0]].discipline
    parts = [_svg_header(width, height)]
    parts.append(f'<title>positions: {discipline}</title>\n')
    peak = max(
        (max(h.frequencies) if h.frequencies else 0.0) for h in hists.values()
    )
    for i, t in enumerate(CANONICAL_ORDER):
        h = hists[t]
        x0 = pad + (i % cols) * (panel_w + pad)
        y0 = pad + (i // cols) * (panel_h + pad + 16)
        parts.append(
            f'<text x="{x0}" y="{y0 - 6}" font-size="11">{t.value}</text>\n'
        )
        parts.append(
            f'<rect x="{x0}" y="{y0}" width="{panel_w}" height="{panel_h}" '
            f'fill="none" stroke="#999" stroke-width="0.5"/>\n'
        )
        if h.frequencies is None or peak == 0.0:
            continue
        bar_w = panel_w / h.bins
        for b, f in enumerate(h.frequencies):
            bar_h = 0.0 if peak == 0 else f / peak * panel_h
            bx = x0 + b * bar_w
            by = y0 + panel_h - bar_h
            parts.append(
                f'<rect x="{bx:.2f}" y="{by:.2f}" width="{bar_w:.2f}" '
                f'height="{bar_h:.2f}" fill="#4477aa"/>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts)


def transition_svg(matrix: TransitionMatrix) -> str:
    """Heatmap of the transition matrix; darker cells are higher probabilities."""
    cell, label_w, pad = 34, 92, 10
    k = len(CANONICAL_ORDER)
    width = label_w + k * cell + pad
    height = label_w + k * cell + pad
    parts = [_svg_header(width, height)]
    parts.append(f"<title>transitions: {matrix.discipline}</title>\n")
    for i, t in enumerate(CANONICAL_ORDER):
        y = label_w + i * cell + cell / 2 + 4
        parts.append(f'<text x="{pad}" y="{y:.1f}" font-size="10">{t.value}</text>\n')
        x = label_w + i * cell + cell / 2
        parts.append(
            f'<text x="{x:.1f}" y="{label_w - 6}" font-size="10" text-anchor="end" '
            f'transform="rotate(-60 {x:.1f} {label_w - 6})">{t.value}</text>\n'
        )
    for i in range(k):
        for j in range(k):
            p = float(matrix.probs[i, j])
            shade = int(round(255 - 215 * p))
            color = f"rgb({shade},{shade},255)"
            x = label_w + j * cell
            y = label_w + i * cell
            parts.append(
                f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" '
                f'fill="{color}" stroke="#ccc" stroke-width="0.5"/>\n'
            )
            parts.append(
                f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 3:.1f}" font-size="8" '
                f'text-anchor="middle">{p:.2f}</text>\n'
            )
    parts.append("</svg>\n")
    return "".join(parts)


def write_text(path: str | Path, text: str) -> None:
    atomic_write_text(path, text)
