"""Sequence/alignment file formats, with NEXUS as the canonical target.

Supported inputs: FASTA, sequential PHYLIP, Clustal, and non-interleaved
NEXUS ``data`` blocks. All parsing is DNA-only over the alphabet
``A C G T N -`` (``N`` and ``-`` are treated as missing data downstream).
Interleaved PHYLIP/NEXUS matrices are rejected with a distinct error
rather than mis-parsed.

The canonical NEXUS writer is byte-stable: ``to_nexus`` is idempotent on
its own output, and converting equivalent content from any supported
format yields identical bytes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum

from .errors import PhyloflowError

ALPHABET = frozenset("ACGTN-")
MISSING = frozenset("N-")

# Labels are kept strict so NEXUS/Newick emission never needs quoting.
_LABEL_RE = re.compile(r"[A-Za-z0-9_.]{1,99}$")


class FormatError(PhyloflowError):
    code = "format_error"


class UnrecognizedFormat(FormatError):
    code = "unrecognized_format"


class EmptyRecord(FormatError):
    code = "empty_record"


class DuplicateTaxon(FormatError):
    code = "duplicate_taxon"


class IllegalCharacter(FormatError):
    code = "illegal_character"


class BadTaxonLabel(FormatError):
    code = "bad_taxon_label"


class HeaderMismatch(FormatError):
    code = "header_mismatch"


class MalformedBlock(FormatError):
    code = "malformed_block"


class InterleavedUnsupported(FormatError):
    code = "interleaved_unsupported"


class NotAligned(PhyloflowError):
    code = "not_aligned"


class FormatKind(Enum):
    Fasta = "fasta"
    Phylip = "phylip"
    Clustal = "clustal"
    Nexus = "nexus"


@dataclass(frozen=True)
class SequenceRecord:
    """One named DNA sequence; residues are uppercase over ``ACGTN-``."""

    id: str
    residues: str


@dataclass(frozen=True)
class Alignment:
    """An ordered set of records; ``aligned`` iff all lengths are equal."""

    records: tuple[SequenceRecord, ...]
    kind: str  # "aligned" | "unaligned"

    @classmethod
    def from_records(cls, records) -> "Alignment":
        records = tuple(records)
        if not records:
            raise EmptyRecord("alignment contains no sequences")
        lengths = {len(r.residues) for r in records}
        kind = "aligned" if len(lengths) == 1 else "unaligned"
        return cls(records, kind)

    @property
    def ntax(self) -> int:
        return len(self.records)

    @property
    def nchar(self) -> int:
        if self.kind != "aligned":
            raise NotAligned("nchar is only defined for aligned sets")
        return len(self.records[0].residues)

    @property
    def taxa(self) -> tuple[str, ...]:
        return tuple(r.id for r in self.records)


def _check_label(label: str, line_no: int) -> str:
    if not _LABEL_RE.match(label):
        raise BadTaxonLabel(
            f"line {line_no}: taxon label {label!r} not allowed "
            "(use [A-Za-z0-9_.], at most 99 chars)"
        )
    return label


def _check_residues(residues: str, label: str, line_no: int) -> str:
    if not residues:
        raise EmptyRecord(f"line {line_no}: record {label!r} has no residues")
    bad = set(residues) - ALPHABET
    if bad:
        raise IllegalCharacter(
            f"line {line_no}: illegal character {sorted(bad)[0]!r} "
            f"in record {label!r} (alphabet is A,C,G,T,N,-)"
        )
    return residues


def _register(seen: dict, label: str, line_no: int) -> None:
    if label in seen:
        raise DuplicateTaxon(f"line {line_no}: duplicate taxon {label!r}")
    seen[label] = line_no


def detect_format(text: str) -> FormatKind:
    """Sniff the format: FASTA, then NEXUS, then Clustal, then PHYLIP."""
    if not text or not text.strip():
        raise UnrecognizedFormat("empty input")
    stripped = text.lstrip()
    if stripped[0] == ">":
        return FormatKind.Fasta
    first_token = stripped.split(None, 1)[0]
    if first_token.upper() == "#NEXUS":
        return FormatKind.Nexus
    first_line = stripped.splitlines()[0]
    if first_line.upper().startswith("CLUSTAL"):
        return FormatKind.Clustal
    parts = first_line.split()
    if len(parts) == 2 and all(p.isdigit() for p in parts):
        return FormatKind.Phylip
    raise UnrecognizedFormat(
        "input is not FASTA, NEXUS, Clustal, or sequential PHYLIP"
    )


def parse_fasta(text: str) -> Alignment:
    """Parse FASTA; record id is the first whitespace-delimited header token."""
    records: list[SequenceRecord] = []
    seen: dict[str, int] = {}
    label = None
    label_line = 0
    chunks: list[str] = []

    def flush() -> None:
        if label is None:
            return
        if not chunks:
            raise EmptyRecord(f"line {label_line}: record {label!r} has no residues")
        records.append(SequenceRecord(label, "".join(chunks)))

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith(">"):
            flush()
            header = line[1:].strip()
            if not header:
                raise EmptyRecord(f"line {line_no}: header with no name")
            label = _check_label(header.split()[0], line_no)
            _register(seen, label, line_no)
            label_line = line_no
            chunks = []
        else:
            if label is None:
                raise MalformedBlock(
                    f"line {line_no}: sequence data before any '>' header"
                )
            chunks.append(_check_residues(line.upper(), label, line_no))
    if label is None:
        raise EmptyRecord("no '>' records found")
    flush()
    return Alignment.from_records(records)


def parse_phylip(text: str) -> Alignment:
    """Parse sequential PHYLIP: 'ntax nchar' header, one taxon per line."""
    lines = [
        (no, ln.strip()) for no, ln in enumerate(text.splitlines(), 1) if ln.strip()
    ]
    if not lines:
        raise MalformedBlock("empty PHYLIP input")
    head_no, head = lines[0]
    parts = head.split()
    if len(parts) != 2 or not all(p.isdigit() for p in parts):
        raise MalformedBlock(f"line {head_no}: expected 'ntax nchar' header")
    ntax, nchar = int(parts[0]), int(parts[1])
    body = lines[1:]
    if len(body) > ntax:
        raise InterleavedUnsupported(
            f"{len(body)} sequence lines for ntax={ntax}: interleaved PHYLIP "
            "is not supported, use sequential format"
        )
    if len(body) < ntax:
        raise HeaderMismatch(f"header declares ntax={ntax} but found {len(body)}")
    records = []
    seen: dict[str, int] = {}
    for line_no, line in body:
        fields = line.split(None, 1)
        if len(fields) != 2:
            raise MalformedBlock(f"line {line_no}: expected '<name> <sequence>'")
        label = _check_label(fields[0], line_no)
        _register(seen, label, line_no)
        residues = _check_residues(
            "".join(fields[1].split()).upper(), label, line_no
        )
        if len(residues) != nchar:
            raise HeaderMismatch(
                f"line {line_no}: {label!r} has {len(residues)} sites, "
                f"header declares nchar={nchar}"
            )
        records.append(SequenceRecord(label, residues))
    return Alignment.from_records(records)


def parse_clustal(text: str) -> Alignment:
    """Parse Clustal: header line, then blocks of 'name chunk' rows.

    Per-block conservation lines (spaces, ``*``, ``:``, ``.``) are ignored;
    chunks are concatenated per taxon in order of first appearance.
    """
    lines = text.splitlines()
    if not lines or not lines[0].upper().startswith("CLUSTAL"):
        raise MalformedBlock("missing CLUSTAL header line")
    order: list[str] = []
    parts: dict[str, list[str]] = {}
    first_line: dict[str, int] = {}
    for line_no, raw in enumerate(lines[1:], start=2):
        if not raw.strip():
            continue
        if raw[0].isspace() or not set(raw.strip()) - set("*:. "):
            continue  # conservation row
        fields = raw.split()
        if len(fields) < 2:
            raise MalformedBlock(f"line {line_no}: expected '<name> <chunk>'")
        label = _check_label(fields[0], line_no)
        chunk = "".join(fields[1:-1]) + fields[-1]
        # trailing residue counts some tools emit
        if chunk and chunk[-1].isdigit():
            chunk = chunk.rstrip("0123456789")
        if label not in parts:
            order.append(label)
            parts[label] = []
            first_line[label] = line_no
        parts[label].append(chunk.upper())
    if not order:
        raise MalformedBlock("no sequence rows found after CLUSTAL header")
    records = []
    for label in order:
        residues = _check_residues("".join(parts[label]), label, first_line[label])
        records.append(SequenceRecord(label, residues))
    aln = Alignment.from_records(records)
    if aln.kind != "aligned":
        raise MalformedBlock("Clustal blocks yield rows of unequal length")
    return aln


_COMMENT_RE = re.compile(r"\[[^\[\]]*\]")


def _strip_nexus_comments(text: str) -> str:
    # non-nested [...] comments only; nesting is out of scope
    return _COMMENT_RE.sub(" ", text)


def parse_nexus(text: str) -> Alignment:
    """Parse a NEXUS ``data`` block (non-interleaved, DNA)."""
    stripped = _strip_nexus_comments(text)
    if not stripped.strip() or stripped.split(None, 1)[0].upper() != "#NEXUS":
        raise MalformedBlock("missing #NEXUS marker")
    m = re.search(r"begin\s+data\s*;(.*?)end\s*;", stripped, re.IGNORECASE | re.DOTALL)
    if not m:
        raise MalformedBlock("no 'begin data; ... end;' block found")
    block = m.group(1)

    dim = re.search(
        r"dimensions\s+ntax\s*=\s*(\d+)\s+nchar\s*=\s*(\d+)\s*;", block, re.IGNORECASE
    )
    if not dim:
        raise MalformedBlock("data block lacks 'dimensions ntax=.. nchar=..;'")
    ntax, nchar = int(dim.group(1)), int(dim.group(2))

    fmt = re.search(r"format\s+([^;]*);", block, re.IGNORECASE)
    if fmt:
        fmt_text = fmt.group(1).lower()
        dt = re.search(r"datatype\s*=\s*(\w+)", fmt_text)
        if dt and dt.group(1) != "dna":
            raise MalformedBlock(f"datatype={dt.group(1)} not supported (DNA only)")
        inter = re.search(r"interleave\s*(?:=\s*(\w+))?", fmt_text)
        if inter and (inter.group(1) or "yes") != "no":
            raise InterleavedUnsupported("interleaved NEXUS matrices not supported")

    mat = re.search(r"matrix(.*?);", block, re.IGNORECASE | re.DOTALL)
    if not mat:
        raise MalformedBlock("data block lacks a 'matrix ... ;' section")
    rows: list[tuple[str, str, int]] = []
    seen: dict[str, int] = {}
    base_line = stripped[: m.start() + mat.start()].count("\n") + 1
    for off, raw in enumerate(mat.group(1).splitlines()):
        line = raw.strip()
        if not line or line.lower() == "matrix":
            continue
        fields = line.split(None, 1)
        if len(fields) != 2:
            raise MalformedBlock(
                f"line {base_line + off}: matrix row is not '<name> <sequence>'"
            )
        label = _check_label(fields[0], base_line + off)
        if label in seen:
            raise InterleavedUnsupported(
                f"line {base_line + off}: taxon {label!r} appears twice; "
                "interleaved NEXUS matrices not supported"
            )
        seen[label] = base_line + off
        rows.append((label, "".join(fields[1].split()).upper(), base_line + off))
    records = []
    for label, residues, line_no in rows:
        residues = _check_residues(residues, label, line_no)
        if len(residues) != nchar:
            raise HeaderMismatch(
                f"{label!r} has {len(residues)} sites, header declares nchar={nchar}"
            )
        records.append(SequenceRecord(label, residues))
    if len(records) != ntax:
        raise HeaderMismatch(f"header declares ntax={ntax} but found {len(records)}")
    return Alignment.from_records(records)


_PARSERS = {
    FormatKind.Fasta: parse_fasta,
    FormatKind.Phylip: parse_phylip,
    FormatKind.Clustal: parse_clustal,
    FormatKind.Nexus: parse_nexus,
}


def parse(text: str) -> Alignment:
    """Detect the format and parse."""
    return _PARSERS[detect_format(text)](text)


def write_nexus(a: Alignment) -> str:
    """Emit the canonical NEXUS form (bit-exact, ids padded to equal width)."""
    if a.kind != "aligned":
        raise NotAligned("cannot write NEXUS for sequences of unequal length")
    width = max(len(r.id) for r in a.records)
    rows = "".join(
        f"    {r.id.rjust(width)} {r.residues}\n" for r in a.records
    )
    return (
        "#NEXUS\n"
        "\n"
        "begin data;\n"
        f"  dimensions ntax={a.ntax} nchar={a.nchar};\n"
        "  format datatype=dna gap=- missing=N;\n"
        "  matrix\n"
        f"{rows}"
        "  ;\n"
        "end;\n"
    )


def write_fasta(a: Alignment) -> str:
    return "".join(f">{r.id}\n{r.residues}\n" for r in a.records)


def to_nexus(text: str) -> str:
    """Convert any supported format to canonical NEXUS (re-canonicalizes NEXUS)."""
    return write_nexus(parse(text))
