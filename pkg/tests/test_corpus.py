import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from seqedit import corpus
from seqedit.corpus import AnnotationRecord, RecordError
from seqedit.synthetic import annotation_fixture


def _dump(records):
    buf = io.StringIO()
    corpus.write_dump(records, buf)
    return buf.getvalue()


def test_fixture_filter_keeps_exactly_five():
    report = corpus.FilterReport()
    kept = list(corpus.filter_corpus(annotation_fixture(), 0.4, 3, report))
    assert [r.accession for r in kept] == ["P01", "P02", "P05", "P08", "P10"]
    assert report.removed_coverage == 3
    assert report.removed_evidence == 2


def test_boundary_record_is_kept():
    p05 = [r for r in annotation_fixture() if r.accession == "P05"][0]
    assert corpus.coverage_ratio(p05) == 0.4
    assert p05.evidence_level == 3
    assert list(corpus.filter_corpus([p05])) == [p05]


def test_filter_is_idempotent():
    once = list(corpus.filter_corpus(annotation_fixture()))
    assert list(corpus.filter_corpus(once)) == once


def test_no_filter_thresholds_keep_everything():
    recs = annotation_fixture()
    assert list(corpus.filter_corpus(recs, min_coverage=0.0, max_evidence=5)) == recs


def test_exempt_predicate_skips_coverage_only():
    recs = annotation_fixture()
    kept = list(corpus.filter_corpus(recs, exempt=lambda r: r.accession in ("P03", "P04")))
    ids = {r.accession for r in kept}
    assert "P03" in ids  # low coverage, exempt
    assert "P04" not in ids  # evidence 4 still removed


def test_coverage_ratio_values():
    r = AnnotationRecord("Q1", "MK", 1, "n", None, "loc")
    assert corpus.coverage_ratio(r) == 0.4
    assert corpus.coverage_ratio(AnnotationRecord("Q2", "MK", 1)) == 0.0


def test_record_invariants():
    with pytest.raises(RecordError):
        AnnotationRecord("", "MK", 1)
    with pytest.raises(RecordError):
        AnnotationRecord("A", "MKB", 1)
    with pytest.raises(RecordError):
        AnnotationRecord("A", "MK", 6)
    with pytest.raises(RecordError):
        AnnotationRecord("A", "MK", 1, name=" padded ")


def test_parse_dump_skips_bad_lines_and_reports():
    good = _dump(annotation_fixture()[:2])
    text = good + "bad\tline\n" + "P99\tMK\tseven\t\t\t\t\t\n" + "\n"
    report = corpus.ParseReport()
    recs = list(corpus.parse_dump(io.StringIO(text), report))
    assert len(recs) == 2
    assert report.parsed == 2
    assert [ln for ln, _ in report.errors] == [3, 4]


def test_dump_round_trip_with_escapes():
    rec = AnnotationRecord("E1", "MKX", 2, "tab\there", "line\nbreak", "back\\slash")
    back = list(corpus.parse_dump(io.StringIO(_dump([rec]))))
    assert back == [rec]


field_text = st.text(
    alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\r"), min_size=1, max_size=12
).map(str.strip).filter(bool)


@settings(max_examples=100, deadline=None)
@given(
    seq=st.text(alphabet="ACDEFGHIKLMNPQRSTVWYX", min_size=1, max_size=30),
    level=st.integers(1, 5),
    fields=st.lists(st.one_of(st.none(), field_text), min_size=5, max_size=5),
)
def test_dump_round_trip_property(seq, level, fields):
    rec = AnnotationRecord("ACC", seq, level, *fields)
    assert list(corpus.parse_dump(io.StringIO(_dump([rec])))) == [rec]


def test_template_biotext_order_and_labels():
    rec = annotation_fixture()[1]
    assert corpus.template_biotext(rec) == (
        "Protein Name: Transporter B. Function: Moves ions. Subcellular Location: Membrane."
    )
    with pytest.raises(corpus.UntemplatableRecord):
        corpus.template_biotext(AnnotationRecord("Z", "MK", 1))


def test_write_pairs_skips_untemplatable(caplog):
    buf = io.StringIO()
    n = corpus.write_pairs([annotation_fixture()[0], AnnotationRecord("Z", "MK", 1)], buf)
    assert n == 1
    pairs = corpus.read_pairs(io.StringIO(buf.getvalue()))
    assert pairs[0].accession == "P01" and pairs[0].text.startswith("Protein Name: Kinase A.")
    assert "untemplatable" in caplog.text


def test_read_pairs_rejects_wrong_columns():
    with pytest.raises(RecordError):
        corpus.read_pairs(io.StringIO("a\tb\n"))


def test_stats_counts_by_field_and_evidence():
    stats = corpus.compute_stats(annotation_fixture())
    assert stats.total == 10
    assert stats.present["name"] == 8
    assert stats.coverage("similarity") == pytest.approx(0.4)
    assert stats.records_by_evidence == {1: 3, 2: 3, 3: 2, 4: 2, 5: 0}
    assert stats.by_evidence["function"][4] == 2
    lines = stats.to_lines()
    assert lines[0] == "total = 10"
    assert all(" = " in ln for ln in lines)
