"""Annotation dump parsing, coverage/evidence statistics and quality filtering.

Dump format: UTF-8 TSV with 8 columns (accession, sequence, evidence_level,
name, function, subcellular_location, biological_process, similarity). An
empty column means the field is absent. Tabs and newlines inside values are
escaped as ``\\t`` and ``\\n``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import IO, Iterable, Iterator

log = logging.getLogger(__name__)

AMINO_ACIDS = "ACDEFGHIKLMNPQRSTVWY"
LEGAL_RESIDUES = frozenset(AMINO_ACIDS + "X")
FIELDS = ("name", "function", "subcellular_location", "biological_process", "similarity")
FIELD_LABELS = {
    "name": "Protein Name",
    "function": "Function",
    "subcellular_location": "Subcellular Location",
    "biological_process": "Biological Process",
    "similarity": "Similarity",
}
EVIDENCE_LEVELS = (1, 2, 3, 4, 5)


class RecordError(ValueError):
    """A dump line or record that violates the record invariants."""


class UntemplatableRecord(RecordError):
    pass


@dataclass(frozen=True)
class AnnotationRecord:
    accession: str
    sequence: str
    evidence_level: int
    name: str | None = None
    function: str | None = None
    subcellular_location: str | None = None
    biological_process: str | None = None
    similarity: str | None = None

    def __post_init__(self):
        if not self.accession:
            raise RecordError("empty accession")
        if not self.sequence:
            raise RecordError("empty sequence")
        for i, ch in enumerate(self.sequence):
            if ch not in LEGAL_RESIDUES:
                raise RecordError(f"illegal residue {ch!r} at position {i}")
        if self.evidence_level not in EVIDENCE_LEVELS:
            raise RecordError(f"evidence out of range: {self.evidence_level}")
        for name in FIELDS:
            value = getattr(self, name)
            if value is not None and (not value or value != value.strip()):
                raise RecordError(f"field {name} must be absent or a non-empty trimmed string")

    def present_fields(self) -> list[str]:
        return [f for f in FIELDS if getattr(self, f) is not None]


def _unescape(value: str) -> str:
    out = []
    i = 0
    while i < len(value):
        ch = value[i]
        if ch == "\\" and i + 1 < len(value):
            nxt = value[i + 1]
            if nxt in "tn\\":
                out.append({"t": "\t", "n": "\n", "\\": "\\"}[nxt])
                i += 2
                continue
        out.append(ch)
        i += 1
    return "".join(out)


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


@dataclass
class ParseReport:
    parsed: int = 0
    errors: list[tuple[int, str]] = field(default_factory=list)


def parse_line(line: str) -> AnnotationRecord:
    cols = line.rstrip("\r\n").split("\t")
    if len(cols) != 8:
        raise RecordError(f"expected 8 columns, got {len(cols)}")
    accession, sequence, evidence = cols[:3]
    try:
        level = int(evidence)
    except ValueError:
        raise RecordError(f"evidence level not an integer: {evidence!r}") from None
    if level not in EVIDENCE_LEVELS:
        raise RecordError(f"evidence out of range: {level}")
    optional = {}
    for name, raw in zip(FIELDS, cols[3:]):
        value = _unescape(raw).strip()
        optional[name] = value or None
    return AnnotationRecord(accession.strip(), sequence.strip(), level, **optional)


def parse_dump(stream: Iterable, report: ParseReport | None = None) -> Iterator[AnnotationRecord]:
    """Yield records line by line; malformed lines are logged and skipped.

    ``stream`` may yield ``str`` or ``bytes`` lines. Blank lines are ignored.
    """
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        if not line.strip():
            continue
        try:
            rec = parse_line(line)
        except RecordError as exc:
            log.warning("line %d: %s", lineno, exc)
            if report is not None:
                report.errors.append((lineno, str(exc)))
            continue
        if report is not None:
            report.parsed += 1
        yield rec


def format_record(rec: AnnotationRecord) -> str:
    optional = [_escape(getattr(rec, f) or "") for f in FIELDS]
    return "\t".join([rec.accession, rec.sequence, str(rec.evidence_level), *optional])


def write_dump(records: Iterable[AnnotationRecord], out: IO[str]) -> int:
    n = 0
    for rec in records:
        out.write(format_record(rec) + "\n")
        n += 1
    return n


def coverage_ratio(rec: AnnotationRecord) -> float:
    return len(rec.present_fields()) / len(FIELDS)


@dataclass
class FilterReport:
    kept: int = 0
    removed: int = 0
    removed_coverage: int = 0
    removed_evidence: int = 0


def filter_corpus(
    records: Iterable[AnnotationRecord],
    min_coverage: float = 0.4,
    max_evidence: int = 3,
    report: FilterReport | None = None,
    exempt=None,
) -> Iterator[AnnotationRecord]:
    """Keep records with coverage >= min_coverage and evidence <= max_evidence.

    ``exempt`` is an optional predicate; exempt records skip the coverage
    test (the evidence test still applies), e.g. for reviewed entries.
    """
    for rec in records:
        cov_ok = coverage_ratio(rec) >= min_coverage or (exempt is not None and exempt(rec))
        ev_ok = rec.evidence_level <= max_evidence
        if cov_ok and ev_ok:
            if report is not None:
                report.kept += 1
            yield rec
        elif report is not None:
            report.removed += 1
            report.removed_coverage += not cov_ok
            report.removed_evidence += not ev_ok


def template_biotext(rec: AnnotationRecord) -> str:
    parts = [f"{FIELD_LABELS[f]}: {getattr(rec, f)}." for f in rec.present_fields()]
    if not parts:
        raise UntemplatableRecord(f"untemplatable record {rec.accession}: no annotation fields")
    return " ".join(parts)


@dataclass
class CorpusStats:
    total: int = 0
    present: dict = field(default_factory=lambda: {f: 0 for f in FIELDS})
    # field -> evidence level -> number of records with that field present
    by_evidence: dict = field(default_factory=lambda: {f: {lv: 0 for lv in EVIDENCE_LEVELS} for f in FIELDS})
    records_by_evidence: dict = field(default_factory=lambda: {lv: 0 for lv in EVIDENCE_LEVELS})

    def coverage(self, name: str) -> float:
        return self.present[name] / self.total if self.total else 0.0

    def to_lines(self) -> list[str]:
        lines = [f"total = {self.total}"]
        for f in FIELDS:
            lines.append(f"coverage.{f} = {self.coverage(f):.6f}")
        for lv in EVIDENCE_LEVELS:
            lines.append(f"records.evidence_{lv} = {self.records_by_evidence[lv]}")
        for f in FIELDS:
            for lv in EVIDENCE_LEVELS:
                lines.append(f"count.{f}.evidence_{lv} = {self.by_evidence[f][lv]}")
        return lines


def compute_stats(records: Iterable[AnnotationRecord]) -> CorpusStats:
    stats = CorpusStats()
    for rec in records:
        stats.total += 1
        stats.records_by_evidence[rec.evidence_level] += 1
        for f in rec.present_fields():
            stats.present[f] += 1
            stats.by_evidence[f][rec.evidence_level] += 1
    return stats


def write_pairs(records: Iterable[AnnotationRecord], out: IO[str]) -> int:
    """Write ``accession, sequence, biotext`` lines; untemplatable records are skipped."""
    n = 0
    for rec in records:
        try:
            text = template_biotext(rec)
        except UntemplatableRecord as exc:
            log.warning("%s", exc)
            continue
        out.write(f"{rec.accession}\t{rec.sequence}\t{_escape(text)}\n")
        n += 1
    return n


@dataclass(frozen=True)
class Pair:
    accession: str
    sequence: str
    text: str


def read_pairs(stream: Iterable) -> list[Pair]:
    pairs = []
    for lineno, line in enumerate(stream, start=1):
        if isinstance(line, bytes):
            line = line.decode("utf-8")
        line = line.rstrip("\r\n")
        if not line:
            continue
        cols = line.split("\t")
        if len(cols) != 3:
            raise RecordError(f"pair file line {lineno}: expected 3 columns, got {len(cols)}")
        pairs.append(Pair(cols[0], cols[1], _unescape(cols[2])))
    return pairs


def write_pair_objects(pairs: Iterable[Pair], out: IO[str]) -> int:
    n = 0
    for p in pairs:
        out.write(f"{p.accession}\t{p.sequence}\t{_escape(p.text)}\n")
        n += 1
    return n

