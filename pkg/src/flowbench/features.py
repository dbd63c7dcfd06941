"""The nine traffic features.

Four are per-flow arithmetic (duration, size, average packet time and size);
five are grouped distinct counts such as the number of source IPs seen per
destination IP. Everything works on a :class:`FlowTable`, a columnar view of
a record collection.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from . import kernels
from .flow_model import (
    ALL_FEATURES,
    GROUPED_KEYS,
    FeatureId,
    FeatureVector,
    FlowRecord,
)

_KEY_FIELDS = ("src_ip", "dst_ip", "src_port", "dst_port", "l4_proto", "l7_proto")


class FeatureError(Exception):
    pass


class FeatureUnavailableError(FeatureError):
    pass


class PreconditionError(FeatureError):
    pass


def _factorize(values: Sequence) -> tuple[np.ndarray, int]:
    table: dict = {}
    codes = np.fromiter((table.setdefault(v, len(table)) for v in values), dtype=np.int64, count=len(values))
    return codes, len(table)


@dataclass(frozen=True)
class FlowTable:
    """Column arrays for one dataset's records.

    Counters and timestamps are int64. Address columns hold dense integer
    codes (first-appearance order); ``l7_proto`` is -1 where missing.
    """

    name: str
    first_switched: np.ndarray
    last_switched: np.ndarray
    in_bytes: np.ndarray
    out_bytes: np.ndarray
    in_pkts: np.ndarray
    out_pkts: np.ndarray
    src_ip: np.ndarray
    dst_ip: np.ndarray
    src_port: np.ndarray
    dst_port: np.ndarray
    l4_proto: np.ndarray
    l7_proto: np.ndarray
    benign_only: bool = False
    has_l7: bool = True

    @classmethod
    def from_records(cls, records: Iterable[FlowRecord], name: str = "", benign_only: bool = False) -> "FlowTable":
        records = list(records)
        n = len(records)

        def col(attr):
            return np.fromiter((getattr(r, attr) for r in records), dtype=np.int64, count=n)

        src_codes, _ = _factorize([r.src_ip for r in records])
        dst_codes, _ = _factorize([r.dst_ip for r in records])
        l7 = [r.l7_proto for r in records]
        has_l7 = all(v is not None for v in l7)
        return cls(
            name=name,
            first_switched=col("first_switched"),
            last_switched=col("last_switched"),
            in_bytes=col("in_bytes"),
            out_bytes=col("out_bytes"),
            in_pkts=col("in_pkts"),
            out_pkts=col("out_pkts"),
            src_ip=src_codes,
            dst_ip=dst_codes,
            src_port=col("src_port"),
            dst_port=col("dst_port"),
            l4_proto=col("l4_proto"),
            l7_proto=np.fromiter((-1 if v is None else v for v in l7), dtype=np.int64, count=n),
            benign_only=benign_only,
            has_l7=has_l7,
        )

    def __len__(self):
        return self.first_switched.size

    @property
    def packets(self) -> np.ndarray:
        return self.in_pkts + self.out_pkts

    @property
    def octets(self) -> np.ndarray:
        return self.in_bytes + self.out_bytes

    @property
    def duration(self) -> np.ndarray:
        return self.last_switched - self.first_switched

    def column(self, field: str) -> np.ndarray:
        if field not in _KEY_FIELDS:
            raise ValueError(f"{field!r} is not a groupable field; choose from {_KEY_FIELDS}")
        if field == "l7_proto" and not self.has_l7:
            raise FeatureUnavailableError(f"{self.name or 'dataset'}: l7_proto not available")
        return getattr(self, field)


@dataclass(frozen=True)
class FeatureSample:
    feature: Optional[FeatureId]
    dataset: str
    values: np.ndarray
    skipped_degenerate: int = 0

    @property
    def unit(self) -> str:
        return self.feature.unit if self.feature else "count"

    def __len__(self):
        return self.values.size

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.value if self.feature else None,
            "dataset": self.dataset,
            "unit": self.unit,
            "values": self.values.tolist(),
            "skipped_degenerate": self.skipped_degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSample":
        feature = FeatureId(d["feature"]) if d.get("feature") else None
        return cls(feature, d["dataset"], np.asarray(d["values"], dtype=np.float64), int(d.get("skipped_degenerate", 0)))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


# per-record versions; the table paths below are vectorized equivalents


def flow_duration(record: FlowRecord) -> float:
    return float(record.last_switched - record.first_switched)


def flow_size_bytes(record: FlowRecord) -> float:
    return float(record.in_bytes + record.out_bytes)


def avg_packet_time(record: FlowRecord) -> Optional[float]:
    """Milliseconds per packet, or None for a flow without packets."""
    if record.packets == 0:
        return None
    return (record.last_switched - record.first_switched) / record.packets


def avg_packet_size(record: FlowRecord) -> Optional[float]:
    """Bytes per packet, or None for a flow without packets."""
    if record.packets == 0:
        return None
    return record.octets / record.packets


def _distinct_counts(table: FlowTable, group_key: str, counted_field: str) -> tuple[np.ndarray, np.ndarray]:
    """Return (per-flow group code, per-group distinct count)."""
    group_codes, n_groups = _factorize_array(table.column(group_key))
    counted_codes, n_counted = _factorize_array(table.column(counted_field))
    counts = kernels.distinct_pair_counts(group_codes, counted_codes, n_groups, n_counted)
    return group_codes, counts


def _factorize_array(values: np.ndarray) -> tuple[np.ndarray, int]:
    if values.size == 0:
        return values.astype(np.int64), 0
    uniq, first_idx, inverse = np.unique(values, return_index=True, return_inverse=True)
    # renumber by first appearance so output order follows the input
    order = np.argsort(first_idx, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(order.size)
    return rank[inverse].astype(np.int64), uniq.size


def group_distinct_count(
    table: FlowTable, group_key: str, counted_field: str, feature: Optional[FeatureId] = None
) -> FeatureSample:
    """One value per distinct ``group_key``: how many distinct
    ``counted_field`` values occur with it. Values follow the first
    appearance order of the group keys."""
    if len(table) == 0:
        return FeatureSample(feature, table.name, np.empty(0))
    _, counts = _distinct_counts(table, group_key, counted_field)
    return FeatureSample(feature, table.name, counts.astype(np.float64))


def _per_flow(table: FlowTable, feature: FeatureId) -> tuple[np.ndarray, int]:
    if feature is FeatureId.FLOW_DURATION:
        return table.duration.astype(np.float64), 0
    if feature is FeatureId.FLOW_SIZE_BYTES:
        return table.octets.astype(np.float64), 0
    packets = table.packets
    ok = packets > 0
    numer = table.duration if feature is FeatureId.AVG_PACKET_TIME else table.octets
    return numer[ok] / packets[ok], int((~ok).sum())


def extract_feature(table: FlowTable, feature: FeatureId) -> FeatureSample:
    """Sample of ``feature`` over a benign-only table.

    Per-flow features give one value per non-degenerate flow; grouped
    features give one value per group key.
    """
    if not table.benign_only:
        raise PreconditionError(f"{table.name or 'dataset'}: features require benign-only records")
    feature = FeatureId(feature)
    if feature.is_grouped:
        group_key, counted = GROUPED_KEYS[feature]
        return group_distinct_count(table, group_key, counted, feature)
    values, skipped = _per_flow(table, feature)
    return FeatureSample(feature, table.name, values, skipped)


def available_features(table: FlowTable) -> tuple[FeatureId, ...]:
    if table.has_l7:
        return ALL_FEATURES
    return tuple(f for f in ALL_FEATURES if f is not FeatureId.L7_PROTOS_PER_DST_PORT)


def feature_matrix(table: FlowTable) -> np.ndarray:
    """(n, 9) array, one row per flow with at least one packet.

    Grouped columns are joined on the flow's own key, e.g. the
    src_ips_per_dst_ip entry is the distinct source count of that flow's
    destination IP.
    """
    if not table.benign_only:
        raise PreconditionError(f"{table.name or 'dataset'}: features require benign-only records")
    if not table.has_l7:
        raise FeatureUnavailableError(f"{table.name or 'dataset'}: l7_proto not available")
    n = len(table)
    out = np.empty((n, len(ALL_FEATURES)))
    packets = table.packets
    ok = packets > 0
    safe = np.where(ok, packets, 1)
    out[:, 0] = table.duration
    out[:, 1] = table.octets
    out[:, 2] = table.duration / safe
    out[:, 3] = table.octets / safe
    if n:
        for feature, (group_key, counted) in GROUPED_KEYS.items():
            codes, counts = _distinct_counts(table, group_key, counted)
            out[:, feature.index] = counts[codes]
    return out[ok]


def build_feature_vectors(table: FlowTable) -> list[FeatureVector]:
    return [FeatureVector(tuple(row.tolist()), table.name) for row in feature_matrix(table)]


def samples_to_csv(samples: Sequence[FeatureSample]) -> str:
    """Long-format CSV with columns feature, dataset, unit, value."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["feature", "dataset", "unit", "value"])
    for s in samples:
        feat = s.feature.value if s.feature else ""
        writer.writerows([feat, s.dataset, s.unit, repr(float(v))] for v in s.values)
    return buf.getvalue()
