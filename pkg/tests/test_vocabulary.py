import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sectypes.corpus import Document, Section
from sectypes.vocabulary import (
    CANONICAL_ORDER,
    SectionType,
    StructuralVocabulary,
    VocabularyError,
    count_headings,
    derive_vocabulary,
    normalize_heading,
    seed_instances,
    singleton_fraction,
)

from conftest import make_doc


class TestNormalizeHeading:
    @pytest.mark.parametrize(
        "raw,expected",
        [
            ("3.1 Materials and Methods", "materials and methods"),
            ("INTRODUCTION", "introduction"),
            ("IV. Results & Discussion", "results discussion"),
            ("3. Conclusion", "conclusion"),
            ("3.1.2. Deep dive", "deep dive"),
            ("(2) Findings", "findings"),
            ("A. Background", "background"),
            ("b) Experimental Setup", "experimental setup"),
            ("  Related   Work  ", "related work"),
            ("Methods:", "methods"),
            ("", ""),
            ("1.", ""),
        ],
    )
    def test_examples(self, raw, expected):
        assert normalize_heading(raw) == expected

    def test_does_not_strip_articles_or_bare_words(self):
        assert normalize_heading("A Survey of Methods") == "a survey of methods"
        assert normalize_heading("e.g. methods") == "e g methods"

    def test_repeated_enumeration_stripped(self):
        assert normalize_heading("1. 2. Introduction") == "introduction"

    @given(st.text(max_size=60))
    @settings(max_examples=500)
    def test_idempotent(self, raw):
        once = normalize_heading(raw)
        assert normalize_heading(once) == once

    @given(st.text(max_size=60))
    def test_output_shape(self, raw):
        out = normalize_heading(raw)
        assert out == out.strip()
        assert "  " not in out


class TestCountHeadings:
    def test_normalization_collapses_variants(self):
        doc = make_doc("d1", "Physics", [("Intro", "a"), ("intro.", "b")])
        table = count_headings([doc])
        assert table.entries == {"intro": {"Physics": 2}}
        assert table.total == 2

    def test_empty_headings_contribute_nothing(self):
        doc = make_doc("d1", "Physics", [("", "body only"), ("Results", "x")])
        table = count_headings([doc])
        assert set(table.entries) == {"results"}
        assert table.total == 1

    def test_matches_nested_loop_tally(self):
        rng = random.Random(13)
        headings = ["Intro", "Methods", "3. Results", "Discussion", "Odd Heading"]
        docs = []
        for i in range(50):
            secs = [(rng.choice(headings), "b") for _ in range(rng.randint(1, 6))]
            docs.append(make_doc(f"d{i}", rng.choice(["A", "B"]), secs))
        table = count_headings(docs)

        expected: dict[str, dict[str, int]] = {}
        total = 0
        for doc in docs:
            for sec in doc.sections:
                h = normalize_heading(sec.heading)
                if h:
                    expected.setdefault(h, {})
                    expected[h][doc.discipline] = expected[h].get(doc.discipline, 0) + 1
                    total += 1
        assert table.entries == expected
        assert table.total == total


class TestSingletonFraction:
    def _table_from_counts(self, counts: dict[str, int]):
        doc_sections = []
        for heading, n in counts.items():
            doc_sections.extend([(heading, "b")] * n)
        return count_headings([make_doc("d", "X", doc_sections)])

    def test_five_heading_example(self):
        table = self._table_from_counts({"aa": 1, "bb": 1, "cc": 3, "dd": 1, "ee": 2})
        assert singleton_fraction(table) == pytest.approx(0.6)

    def test_all_distinct_gives_one(self):
        table = self._table_from_counts({"aa": 1, "bb": 1, "cc": 1})
        assert singleton_fraction(table) == 1.0

    def test_empty_table_is_error(self):
        table = count_headings([])
        with pytest.raises(ValueError):
            singleton_fraction(table)

    def test_matches_brute_force_recount(self):
        rng = random.Random(99)
        counts = {f"head {i}": rng.randint(1, 4) for i in range(40)}
        table = self._table_from_counts(counts)
        singles = sum(1 for n in counts.values() if n == 1)
        assert singleton_fraction(table) == singles / len(counts)

    def test_bounds(self):
        rng = random.Random(5)
        for trial in range(20):
            counts = {f"h{i}": rng.randint(1, 3) for i in range(rng.randint(1, 15))}
            frac = singleton_fraction(self._table_from_counts(counts))
            assert 0.0 <= frac <= 1.0


def _corpus_with_headings(per_discipline: dict[str, list[str]]) -> list[Document]:
    docs = []
    for disc, headings in per_discipline.items():
        for i, h in enumerate(headings):
            docs.append(make_doc(f"{disc}-{i}", disc, [(h, "body")]))
    return docs


class TestDeriveVocabulary:
    def test_paper_merges_hold(self):
        docs = _corpus_with_headings(
            {
                "A": ["Summary", "Conclusion", "Related Work", "Introduction"] * 3,
                "B": ["Summary", "Conclusion", "Related Work", "Methods"] * 3,
            }
        )
        table = count_headings(docs)
        vocab, report = derive_vocabulary(table)
        assert vocab.type_of("summary") is SectionType.CONCLUSION
        assert vocab.type_of("conclusion") is SectionType.CONCLUSION
        assert vocab.type_of("related work") is SectionType.BACKGROUND
        assert not report.used_default
        assert report.singleton_fraction == singleton_fraction(table)

    def test_unmapped_heading_reported(self):
        docs = _corpus_with_headings(
            {
                "A": ["Our Dataset", "Introduction"] * 3,
                "B": ["Our Dataset", "Introduction"] * 3,
            }
        )
        vocab, report = derive_vocabulary(count_headings(docs))
        assert "our dataset" in report.unmapped
        assert vocab.type_of("our dataset") is None
        assert vocab.type_of("introduction") is SectionType.INTRODUCTION

    def test_no_match_falls_back_to_default(self):
        docs = _corpus_with_headings({"A": ["Strange One", "Strange Two"] * 2})
        vocab, report = derive_vocabulary(count_headings(docs))
        assert report.used_default
        assert vocab.to_mapping() == StructuralVocabulary.default().to_mapping()

    def test_min_disciplines_filters_local_headings(self):
        # "findings" appears in only 1 of 2 disciplines: below ceil(2/2)=1? no,
        # min_disciplines=1 accepts it; force 2 to see it filtered.
        docs = _corpus_with_headings(
            {
                "A": ["Findings", "Introduction"] * 3,
                "B": ["Introduction", "Methods"] * 3,
            }
        )
        vocab, _ = derive_vocabulary(count_headings(docs), min_disciplines=2)
        assert vocab.type_of("findings") is None
        assert vocab.type_of("introduction") is SectionType.INTRODUCTION

    def test_alias_overrides_extend_matching(self):
        docs = _corpus_with_headings(
            {
                "A": ["Our Approach", "Introduction"] * 3,
                "B": ["Our Approach", "Introduction"] * 3,
            }
        )
        vocab, report = derive_vocabulary(
            count_headings(docs),
            alias_overrides={SectionType.METHODS: ["Our Approach"]},
        )
        assert vocab.type_of("our approach") is SectionType.METHODS
        assert "our approach" in report.mapped

    def test_conflicting_override_rejected(self):
        docs = _corpus_with_headings({"A": ["Introduction"] * 2})
        with pytest.raises(VocabularyError):
            derive_vocabulary(
                count_headings(docs),
                alias_overrides={SectionType.METHODS: ["conclusion"]},
            )

    def test_empty_table_is_error(self):
        with pytest.raises(ValueError):
            derive_vocabulary(count_headings([]))


class TestStructuralVocabulary:
    def test_default_alias_sets_disjoint_and_contain_canonical(self):
        vocab = StructuralVocabulary.default()
        seen: set[str] = set()
        for t in CANONICAL_ORDER:
            aliases = vocab.aliases[t]
            assert t.value in aliases
            assert not (aliases & seen)
            seen |= aliases

    def test_overlapping_aliases_rejected(self):
        with pytest.raises(VocabularyError):
            StructuralVocabulary(
                aliases={
                    SectionType.METHODS: frozenset({"shared"}),
                    SectionType.RESULTS: frozenset({"shared"}),
                }
            )

    def test_mapping_roundtrip(self):
        vocab = StructuralVocabulary.default()
        again = StructuralVocabulary.from_mapping(vocab.to_mapping())
        assert again.to_mapping() == vocab.to_mapping()

    def test_aliases_normalized_on_construction(self):
        vocab = StructuralVocabulary(
            aliases={SectionType.METHODS: frozenset({"3. Our METHOD"})}
        )
        assert vocab.type_of("our method") is SectionType.METHODS


class TestSeedInstances:
    def test_seed_labeling(self):
        doc = make_doc(
            "d1",
            "Physics",
            [("Summary", "a"), ("3. Results", "b"), ("Our Approach", "c")],
        )
        seeds = seed_instances([doc], StructuralVocabulary.default())
        by_heading = {s.section.heading: s.section_type for s in seeds}
        assert by_heading == {
            "Summary": SectionType.CONCLUSION,
            "3. Results": SectionType.RESULTS,
        }

    def test_invariant_under_corpus_reordering(self, small_corpus):
        vocab = StructuralVocabulary.default()
        forward = seed_instances(small_corpus, vocab)
        backward = seed_instances(list(reversed(small_corpus)), vocab)
        fw = {(s.doc_id, s.section.index): s.section_type for s in forward}
        bw = {(s.doc_id, s.section.index): s.section_type for s in backward}
        assert fw == bw
