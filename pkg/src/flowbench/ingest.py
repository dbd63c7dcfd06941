"""Reading flow exports into :class:`FlowRecord` streams.

Input is header-named delimited text (comma or tab). A :class:`SchemaProfile`
maps source columns onto record fields and says how timestamps and labels
are encoded.
"""

from __future__ import annotations

import csv
import datetime as dt
import enum
import gzip
import io
import ipaddress
import itertools
import math
import random
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from functools import lru_cache
from pathlib import Path
from typing import IO, Iterable, Iterator, Mapping, Optional

from .flow_model import FLOW_FIELDS, MANDATORY_FIELDS, FlowRecord, Label, validate

MS_PER_DAY = 86_400_000
MAX_STORED_REJECTS = 1000


class IngestError(Exception):
    """Fatal problem with an input file or profile."""


class UnlabeledDatasetError(IngestError):
    pass


class TimestampEncoding(str, enum.Enum):
    EPOCH_MS = "epoch_ms"
    EPOCH_S = "epoch_s"
    SYSUPTIME_MS = "sysuptime_ms"


@dataclass(frozen=True)
class LabelRule:
    column: str
    benign_values: frozenset
    unlabeled_values: frozenset = frozenset({""})

    def classify(self, raw: str) -> Label:
        value = raw.strip()
        if value in self.benign_values:
            return Label.BENIGN
        if value in self.unlabeled_values:
            return Label.UNLABELED
        return Label.ATTACK


@dataclass(frozen=True)
class SchemaProfile:
    """Column layout of one flow export format.

    ``column_map`` maps record field names to source column names. Instead of
    ``last_switched`` a profile may map ``flow_duration_ms``; the end time is
    then ``first_switched + duration`` and ``first_switched`` itself becomes
    optional (missing start times read as 0).

    For ``sysuptime_ms`` encodings the boot time of the exporter, in epoch
    milliseconds, comes from ``uptime_base_column`` or ``uptime_base_ms``.
    """

    name: str
    column_map: Mapping[str, str]
    timestamp_encoding: TimestampEncoding = TimestampEncoding.EPOCH_MS
    label_rule: Optional[LabelRule] = None
    uptime_base_column: Optional[str] = None
    uptime_base_ms: int = 0

    def __post_init__(self):
        unknown = set(self.column_map) - set(FLOW_FIELDS) - {"flow_duration_ms"}
        if unknown:
            raise IngestError(f"profile {self.name!r}: unknown fields {sorted(unknown)}")
        if "label" in self.column_map:
            raise IngestError(f"profile {self.name!r}: map labels with label_column, not 'label'")
        missing = [f for f in self.required_fields if f not in self.column_map]
        if missing:
            raise IngestError(f"profile {self.name!r}: no column for {', '.join(missing)}")

    @property
    def uses_duration(self) -> bool:
        return "flow_duration_ms" in self.column_map

    @property
    def required_fields(self) -> tuple[str, ...]:
        if self.uses_duration:
            return tuple(f for f in MANDATORY_FIELDS if f not in ("first_switched", "last_switched"))
        return MANDATORY_FIELDS

    @property
    def has_l7(self) -> bool:
        return "l7_proto" in self.column_map


def _nprobe_columns(**overrides):
    cols = {
        "first_switched": "FIRST_SWITCHED",
        "last_switched": "LAST_SWITCHED",
        "in_bytes": "IN_BYTES",
        "out_bytes": "OUT_BYTES",
        "in_pkts": "IN_PKTS",
        "out_pkts": "OUT_PKTS",
        "src_ip": "IPV4_SRC_ADDR",
        "dst_ip": "IPV4_DST_ADDR",
        "src_port": "L4_SRC_PORT",
        "dst_port": "L4_DST_PORT",
        "l4_proto": "PROTOCOL",
        "l7_proto": "L7_PROTO",
    }
    cols.update(overrides)
    return {k: v for k, v in cols.items() if v is not None}


_NF_LABEL = LabelRule("Label", frozenset({"0", "0.0", "Benign", "BENIGN", "benign"}))

BUILTIN_PROFILES: dict[str, SchemaProfile] = {
    "canonical": SchemaProfile(
        "canonical",
        {f: f for f in FLOW_FIELDS if f != "label"},
        TimestampEncoding.EPOCH_MS,
        LabelRule("label", frozenset({"benign"}), frozenset({"", "unlabeled"})),
    ),
    # nprobe text dumps print FIRST/LAST_SWITCHED as epoch seconds
    "nprobe": SchemaProfile("nprobe", _nprobe_columns(), TimestampEncoding.EPOCH_S),
    "nprobe-ms": SchemaProfile("nprobe-ms", _nprobe_columns(), TimestampEncoding.EPOCH_MS),
    # NetFlow-converted NIDS datasets, v3 layout (start/end in ms)
    "nf-v3": SchemaProfile(
        "nf-v3",
        _nprobe_columns(first_switched="FLOW_START_MILLISECONDS", last_switched="FLOW_END_MILLISECONDS"),
        TimestampEncoding.EPOCH_MS,
        _NF_LABEL,
    ),
    # v1/v2 layouts carry only a duration column
    "nf-v2": SchemaProfile(
        "nf-v2",
        _nprobe_columns(first_switched=None, last_switched=None, flow_duration_ms="FLOW_DURATION_MILLISECONDS"),
        TimestampEncoding.EPOCH_MS,
        _NF_LABEL,
    ),
}

_PROFILE_META_KEYS = {
    "name",
    "timestamp_encoding",
    "label_column",
    "benign_values",
    "unlabeled_values",
    "uptime_base_column",
    "uptime_base_ms",
}


def _split_list(value: str) -> frozenset:
    return frozenset(v.strip() for v in value.split(",") if v.strip())


def parse_profile(text: str, default_name: str = "custom") -> SchemaProfile:
    """Build a profile from ``key = value`` lines.

    Keys are record field names (value: source column) plus the meta keys
    ``name``, ``timestamp_encoding``, ``label_column``, ``benign_values``,
    ``unlabeled_values``, ``uptime_base_column`` and ``uptime_base_ms``.
    Lines starting with ``#`` are ignored.
    """
    entries: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise IngestError(f"profile line {lineno}: expected key = value")
        entries[key.strip()] = value.strip()

    column_map = {k: v for k, v in entries.items() if k not in _PROFILE_META_KEYS}
    label_rule = None
    if "label_column" in entries:
        label_rule = LabelRule(
            entries["label_column"],
            _split_list(entries.get("benign_values", "")),
            _split_list(entries.get("unlabeled_values", "")) | {""},
        )
    try:
        encoding = TimestampEncoding(entries.get("timestamp_encoding", "epoch_ms"))
    except ValueError:
        raise IngestError(f"unknown timestamp_encoding {entries['timestamp_encoding']!r}") from None
    return SchemaProfile(
        name=entries.get("name", default_name),
        column_map=column_map,
        timestamp_encoding=encoding,
        label_rule=label_rule,
        uptime_base_column=entries.get("uptime_base_column"),
        uptime_base_ms=int(entries.get("uptime_base_ms", "0")),
    )


def resolve_profile(ref: str, base_dir: Path | None = None) -> SchemaProfile:
    """Look up a built-in profile by name, else load a profile file."""
    if ref in BUILTIN_PROFILES:
        return BUILTIN_PROFILES[ref]
    path = Path(ref)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    if not path.is_file():
        raise IngestError(f"unknown profile {ref!r} (not built in, no such file)")
    return parse_profile(path.read_text(), default_name=path.stem)


@dataclass
class ParseReport:
    source: str = ""
    accepted: int = 0
    rejected: int = 0
    degenerate: int = 0
    rejects: list = field(default_factory=list)

    def reject(self, row: int, reason: str):
        self.rejected += 1
        if len(self.rejects) < MAX_STORED_REJECTS:
            self.rejects.append((row, reason))

    def merge(self, other: "ParseReport") -> "ParseReport":
        merged = ParseReport(
            source=";".join(s for s in (self.source, other.source) if s),
            accepted=self.accepted + other.accepted,
            rejected=self.rejected + other.rejected,
            degenerate=self.degenerate + other.degenerate,
        )
        merged.rejects = (self.rejects + other.rejects)[:MAX_STORED_REJECTS]
        return merged

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "accepted": self.accepted,
            "rejected": self.rejected,
            "degenerate": self.degenerate,
            "rejects": [{"row": r, "reason": why} for r, why in self.rejects],
        }


class _RowError(ValueError):
    pass


def _to_int(raw: str, what: str) -> int:
    raw = raw.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise _RowError(f"unparseable {what}") from None
    if not value.is_finite() or value != value.to_integral_value():
        raise _RowError(f"unparseable {what}")
    return int(value)


def _to_ms(raw: str, encoding: TimestampEncoding) -> int:
    raw = raw.strip()
    try:
        value = Decimal(raw)
    except InvalidOperation:
        raise _RowError("unparseable timestamp") from None
    if not value.is_finite():
        raise _RowError("unparseable timestamp")
    if encoding is TimestampEncoding.EPOCH_S:
        value = value * 1000
    return int(value.to_integral_value())


def _to_l7(raw: str) -> Optional[int]:
    raw = raw.strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        pass
    # nDPI "master.app" notation, e.g. 91.178
    major, dot, minor = raw.partition(".")
    try:
        if dot and int(minor) == 0:
            return int(major)
        if dot:
            return int(major) * 65536 + int(minor)
    except ValueError:
        pass
    raise _RowError("unparseable l7_proto")


@lru_cache(maxsize=1 << 16)
def _canonical_ip(raw: str) -> str:
    try:
        return ipaddress.ip_address(raw.strip()).compressed
    except ValueError:
        raise _RowError("unparseable address") from None


def sniff_delimiter(header_line: str) -> str:
    return "\t" if header_line.count("\t") > header_line.count(",") else ","


def parse_flows(source: IO[str], profile: SchemaProfile, name: str = "") -> tuple[Iterator[FlowRecord], ParseReport]:
    """Parse a delimited text stream into records.

    The header is checked immediately and a missing mandatory column raises
    :class:`IngestError`. Rows are then parsed lazily; malformed rows are
    skipped and counted in the returned report, which fills in as the
    iterator is consumed.
    """
    header_line = source.readline()
    if not header_line.strip():
        raise IngestError(f"{name or 'input'}: empty file, expected a header row")
    delimiter = sniff_delimiter(header_line)
    header = next(csv.reader([header_line], delimiter=delimiter))
    header = [h.strip() for h in header]
    position = {col: i for i, col in enumerate(header)}

    missing = [f"{fld} ({col})" for fld, col in profile.column_map.items() if col not in position and fld != "l7_proto"]
    if profile.label_rule and profile.label_rule.column not in position:
        missing.append(f"label ({profile.label_rule.column})")
    if profile.uptime_base_column and profile.uptime_base_column not in position:
        missing.append(f"uptime base ({profile.uptime_base_column})")
    if missing:
        raise IngestError(f"{name or 'input'}: missing mandatory column(s): {', '.join(missing)}")

    report = ParseReport(source=name)
    idx = {fld: position[col] for fld, col in profile.column_map.items() if col in position}
    reader = csv.reader(source, delimiter=delimiter)
    return _iter_rows(reader, idx, position, profile, report), report


def _iter_rows(reader, idx, position, profile: SchemaProfile, report: ParseReport) -> Iterator[FlowRecord]:
    label_pos = position[profile.label_rule.column] if profile.label_rule else None
    base_pos = position[profile.uptime_base_column] if profile.uptime_base_column else None
    enc = profile.timestamp_encoding
    time_enc = TimestampEncoding.EPOCH_MS if enc is TimestampEncoding.SYSUPTIME_MS else enc
    width = len(position)
    for row in reader:
        rownum = reader.line_num + 1  # header consumed separately
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        if len(row) != width:
            report.reject(rownum, f"expected {width} fields, got {len(row)}")
            continue
        try:
            if profile.uses_duration:
                first = _to_ms(row[idx["first_switched"]], time_enc) if "first_switched" in idx else 0
                last = first + _to_int(row[idx["flow_duration_ms"]], "duration")
            else:
                first = _to_ms(row[idx["first_switched"]], time_enc)
                last = _to_ms(row[idx["last_switched"]], time_enc)
            if enc is TimestampEncoding.SYSUPTIME_MS:
                base = _to_ms(row[base_pos], TimestampEncoding.EPOCH_MS) if base_pos is not None else profile.uptime_base_ms
                first += base
                last += base
            record = FlowRecord(
                first_switched=first,
                last_switched=last,
                in_bytes=_to_int(row[idx["in_bytes"]], "counter"),
                out_bytes=_to_int(row[idx["out_bytes"]], "counter"),
                in_pkts=_to_int(row[idx["in_pkts"]], "counter"),
                out_pkts=_to_int(row[idx["out_pkts"]], "counter"),
                src_ip=_canonical_ip(row[idx["src_ip"]]),
                dst_ip=_canonical_ip(row[idx["dst_ip"]]),
                src_port=_to_int(row[idx["src_port"]], "port"),
                dst_port=_to_int(row[idx["dst_port"]], "port"),
                l4_proto=_to_int(row[idx["l4_proto"]], "protocol"),
                l7_proto=_to_l7(row[idx["l7_proto"]]) if "l7_proto" in idx else None,
                label=profile.label_rule.classify(row[label_pos]) if label_pos is not None else Label.UNLABELED,
            )
        except _RowError as exc:
            report.reject(rownum, str(exc))
            continue
        problem = validate(record)
        if problem:
            report.reject(rownum, problem)
            continue
        if record.packets == 0:
            report.degenerate += 1
        report.accepted += 1
        yield record


def open_text(path: str | Path) -> IO[str]:
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8", newline="")
    return open(path, encoding="utf-8", newline="")


def read_flows(path: str | Path, profile: SchemaProfile) -> tuple[list[FlowRecord], ParseReport]:
    """Parse a whole file eagerly."""
    with open_text(path) as fh:
        records, report = parse_flows(fh, profile, name=str(path))
        return list(records), report


def write_flows(records: Iterable[FlowRecord], sink: IO[str]) -> int:
    """Write records as canonical delimited text; returns the row count.

    The output parses back exactly with the ``canonical`` profile.
    """
    writer = csv.writer(sink, lineterminator="\n")
    writer.writerow(FLOW_FIELDS)
    n = 0
    for r in records:
        writer.writerow([
            r.first_switched, r.last_switched, r.in_bytes, r.out_bytes, r.in_pkts, r.out_pkts,
            r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.l4_proto,
            "" if r.l7_proto is None else r.l7_proto, r.label.value,
        ])
        n += 1
    return n


def filter_benign(records: Iterable[FlowRecord], profile: SchemaProfile, assume_benign: bool = False) -> Iterator[FlowRecord]:
    """Keep benign records only.

    With a label rule, records classified benign pass. Without one the caller
    must assert the source is benign-only (``assume_benign``), in which case
    records pass through untouched.
    """
    if profile.label_rule is None:
        if not assume_benign:
            raise UnlabeledDatasetError(
                f"unlabeled dataset: profile {profile.name!r} has no label rule and benign-only was not asserted"
            )
        return iter(records)
    return (r for r in records if r.label is Label.BENIGN)


def day_of(timestamp_ms: int) -> dt.date:
    return dt.date(1970, 1, 1) + dt.timedelta(days=timestamp_ms // MS_PER_DAY)


def split_by_day(records: Iterable[FlowRecord]) -> dict[dt.date, list[FlowRecord]]:
    """Group records by the UTC calendar day of ``first_switched``.

    Days come out in ascending order; each group keeps input order.
    """
    groups: dict[dt.date, list[FlowRecord]] = {}
    for r in records:
        groups.setdefault(day_of(r.first_switched), []).append(r)
    return dict(sorted(groups.items()))


def sample_reservoir(records: Iterable, n: int, seed: int) -> list:
    """Uniform sample of ``n`` items without replacement from a stream.

    Uses the skip-based reservoir algorithm (Li's Algorithm L), so long
    streams are consumed mostly through ``itertools.islice``. The winners are
    returned in stream order. Fully determined by ``seed``.
    """
    if n < 1:
        raise ValueError("sample size must be >= 1")
    rng = random.Random(seed)
    it = iter(records)
    reservoir = list(itertools.islice(enumerate(it), n))
    if len(reservoir) < n:
        return [item for _, item in reservoir]

    position = n
    w = math.exp(math.log(rng.random() or 1e-300) / n)
    while True:
        skip = int(math.log(rng.random() or 1e-300) / math.log1p(-w)) if w < 1.0 else 0
        nxt = next(itertools.islice(it, skip, None), _END)
        if nxt is _END:
            break
        position += skip
        reservoir[rng.randrange(n)] = (position, nxt)
        position += 1
        w *= math.exp(math.log(rng.random() or 1e-300) / n)
    reservoir.sort(key=lambda pair: pair[0])
    return [item for _, item in reservoir]


_END = object()
