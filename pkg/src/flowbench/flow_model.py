"""Core flow types shared across the toolkit.

Nothing in here performs I/O; records are immutable value objects.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional


class Label(str, enum.Enum):
    BENIGN = "benign"
    ATTACK = "attack"
    UNLABELED = "unlabeled"


class DatasetKind(str, enum.Enum):
    SYNTHETIC = "synthetic"
    REAL_WORLD = "real_world"


class FeatureId(str, enum.Enum):
    """The nine traffic features, in canonical order."""

    FLOW_DURATION = "flow_duration"
    FLOW_SIZE_BYTES = "flow_size_bytes"
    AVG_PACKET_TIME = "avg_packet_time"
    AVG_PACKET_SIZE = "avg_packet_size"
    SRC_IPS_PER_DST_IP = "src_ips_per_dst_ip"
    SRC_IPS_PER_DST_PORT = "src_ips_per_dst_port"
    DST_IPS_PER_SRC_PORT = "dst_ips_per_src_port"
    DST_PORTS_PER_SRC_PORT = "dst_ports_per_src_port"
    L7_PROTOS_PER_DST_PORT = "l7_protos_per_dst_port"

    @property
    def unit(self) -> str:
        return _UNITS[self]

    @property
    def is_grouped(self) -> bool:
        return self in GROUPED_KEYS

    @property
    def index(self) -> int:
        return ALL_FEATURES.index(self)

    @classmethod
    def parse(cls, name: str) -> "FeatureId":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown feature {name!r}") from None


_UNITS = {
    FeatureId.FLOW_DURATION: "ms",
    FeatureId.FLOW_SIZE_BYTES: "bytes",
    FeatureId.AVG_PACKET_TIME: "ms/packet",
    FeatureId.AVG_PACKET_SIZE: "bytes/packet",
    FeatureId.SRC_IPS_PER_DST_IP: "count",
    FeatureId.SRC_IPS_PER_DST_PORT: "count",
    FeatureId.DST_IPS_PER_SRC_PORT: "count",
    FeatureId.DST_PORTS_PER_SRC_PORT: "count",
    FeatureId.L7_PROTOS_PER_DST_PORT: "count",
}

ALL_FEATURES: tuple[FeatureId, ...] = tuple(FeatureId)
PER_FLOW_FEATURES = ALL_FEATURES[:4]

# feature -> (group key field, counted field)
GROUPED_KEYS: dict[FeatureId, tuple[str, str]] = {
    FeatureId.SRC_IPS_PER_DST_IP: ("dst_ip", "src_ip"),
    FeatureId.SRC_IPS_PER_DST_PORT: ("dst_port", "src_ip"),
    FeatureId.DST_IPS_PER_SRC_PORT: ("src_port", "dst_ip"),
    FeatureId.DST_PORTS_PER_SRC_PORT: ("src_port", "dst_port"),
    FeatureId.L7_PROTOS_PER_DST_PORT: ("dst_port", "l7_proto"),
}


@dataclass(frozen=True, slots=True)
class FlowRecord:
    """One bidirectional flow with NetFlow v9 style fields.

    Timestamps are absolute milliseconds since the Unix epoch. Addresses are
    kept as canonical text so IPv4 and IPv6 share one type.
    """

    first_switched: int
    last_switched: int
    in_bytes: int
    out_bytes: int
    in_pkts: int
    out_pkts: int
    src_ip: str
    dst_ip: str
    src_port: int
    dst_port: int
    l4_proto: int
    l7_proto: Optional[int] = None
    label: Label = Label.UNLABELED

    @property
    def packets(self) -> int:
        return self.in_pkts + self.out_pkts

    @property
    def octets(self) -> int:
        return self.in_bytes + self.out_bytes


FLOW_FIELDS: tuple[str, ...] = tuple(FlowRecord.__dataclass_fields__)
MANDATORY_FIELDS: tuple[str, ...] = FLOW_FIELDS[:11]


def validate(record: FlowRecord) -> Optional[str]:
    """Return None if ``record`` satisfies every invariant, else a message
    naming the first violated one."""
    if record.last_switched < record.first_switched:
        return "last_switched < first_switched"
    for name in ("in_bytes", "out_bytes", "in_pkts", "out_pkts"):
        if getattr(record, name) < 0:
            return f"negative counter {name}"
    if record.packets == 0 and record.octets != 0:
        return "zero packets with nonzero bytes"
    if not (0 <= record.src_port <= 65535 and 0 <= record.dst_port <= 65535):
        return "port out of range"
    if not 0 <= record.l4_proto <= 255:
        return "l4_proto out of range"
    if record.l7_proto is not None and record.l7_proto < 0:
        return "negative l7_proto"
    return None


@dataclass(frozen=True)
class DatasetHandle:
    name: str
    kind: DatasetKind
    source: str
    flow_count: int = 0
    benign_only: bool = False

    def as_benign(self, flow_count: int) -> "DatasetHandle":
        return replace(self, flow_count=flow_count, benign_only=True)


@dataclass(frozen=True)
class FeatureVector:
    """Nine feature values of one flow, ordered as ``ALL_FEATURES``."""

    values: tuple[float, ...]
    dataset: str

    def __post_init__(self):
        if len(self.values) != len(ALL_FEATURES):
            raise ValueError(f"expected {len(ALL_FEATURES)} values, got {len(self.values)}")

    def __getitem__(self, feature: FeatureId) -> float:
        return self.values[feature.index]
