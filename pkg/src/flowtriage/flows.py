"""Domain types for flows, features, labels, and datasets.

These are immutable value objects shared by every other module. A
FlowRecord may hold out-of-range values (e.g. straight from a broken
export); ``validate_flow`` reports violations as data instead of raising,
so ingestion can surface per-row problems without aborting a batch.
"""

from __future__ import annotations

import ipaddress
from dataclasses import dataclass, field
from enum import Enum

FEATURE_WIDTH = 22


class PortClass(Enum):
    """IANA port range classification (0-1023 / 1024-49151 / 49152-65535)."""

    WELL_KNOWN = "well_known"
    REGISTERED = "registered"
    DYNAMIC = "dynamic"

    @classmethod
    def from_port(cls, port: int) -> "PortClass":
        if port <= 1023:
            return cls.WELL_KNOWN
        if port <= 49151:
            return cls.REGISTERED
        return cls.DYNAMIC

    @property
    def index(self) -> int:
        return _PORT_CLASS_ORDER.index(self)


_PORT_CLASS_ORDER = [PortClass.WELL_KNOWN, PortClass.REGISTERED, PortClass.DYNAMIC]


class ClassLabel(Enum):
    """Closed three-class incident taxonomy (extensible only by config)."""

    NORMAL_TRAFFIC = "normal_traffic"
    SERVICE_INCIDENT = "service_incident"
    DOS_ATTACK = "dos_attack"

    @classmethod
    def from_index(cls, index: int) -> "ClassLabel":
        return CLASS_ORDER[index]

    @classmethod
    def from_name(cls, name: str) -> "ClassLabel":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown class label {name!r}") from None

    @property
    def index(self) -> int:
        return CLASS_ORDER.index(self)


# Fixed output ordering of the classifier; never reorder.
CLASS_ORDER = (ClassLabel.NORMAL_TRAFFIC, ClassLabel.SERVICE_INCIDENT, ClassLabel.DOS_ATTACK)
NUM_CLASSES = len(CLASS_ORDER)


@dataclass(frozen=True)
class FlowRecord:
    """One aggregated network flow with its raw analysis attributes.

    ``flow_index`` and ``ip_destination`` are identity/enrichment metadata;
    they are never fed to the classifier directly (the destination only
    contributes a derived internal/external locality feature).
    """

    flow_index: int
    duration: float                 # seconds, >= 0
    ip_destination: str             # IPv4 dotted quad
    src_port: int                   # 0..65535
    dst_port: int                   # 0..65535
    l4_protocol: int                # 0..255
    dst_port_class: PortClass
    tcp_rate: float                 # [0,1] share of TCP packets in the flow
    tcp_ack_cnt_asym: float         # [-1,1]
    pkt_asym: float                 # [-1,1]
    byt_asym: float                 # [-1,1]
    tcp_stat: int                   # bitfield
    ip_min_ttl: int                 # 0..255
    ip_max_ttl: int                 # 0..255
    per_ps: float                   # packets per second, >= 0
    tcp_seq_fcnt_rate: float        # [0,1] seq fault share
    tcp_ack_fcnt_rate: float        # [0,1] ack fault share
    est_bw_per_flow: float          # bytes/second, >= 0
    tcp_aggr_flags: int             # bitfield, 0..255
    tcp_aggr_anomaly: int           # bitfield
    tcp_aggr_options: int           # bitfield
    tcp_states: int                 # bitfield


@dataclass(frozen=True)
class FieldViolation:
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.field}: {self.message}"


@dataclass(frozen=True)
class ValidationResult:
    violations: tuple[FieldViolation, ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def _is_ipv4(text: str) -> bool:
    try:
        ipaddress.IPv4Address(text)
        return True
    except (ipaddress.AddressValueError, ValueError):
        return False


def validate_flow(record: FlowRecord) -> ValidationResult:
    """Check every FlowRecord invariant; violations are data, not failures."""
    bad: list[FieldViolation] = []

    def check(ok: bool, name: str, message: str) -> None:
        if not ok:
            bad.append(FieldViolation(name, message))

    check(0 <= record.src_port <= 65535, "src_port", f"{record.src_port} outside 0..65535")
    check(0 <= record.dst_port <= 65535, "dst_port", f"{record.dst_port} outside 0..65535")
    check(0 <= record.l4_protocol <= 255, "l4_protocol", f"{record.l4_protocol} outside 0..255")
    check(0 <= record.ip_min_ttl <= 255, "ip_min_ttl", f"{record.ip_min_ttl} outside 0..255")
    check(0 <= record.ip_max_ttl <= 255, "ip_max_ttl", f"{record.ip_max_ttl} outside 0..255")
    if 0 <= record.ip_min_ttl <= 255 and 0 <= record.ip_max_ttl <= 255:
        check(record.ip_min_ttl <= record.ip_max_ttl, "ip_min_ttl",
              f"min TTL {record.ip_min_ttl} exceeds max TTL {record.ip_max_ttl}")
    check(record.duration >= 0, "duration", f"{record.duration} is negative")
    check(record.per_ps >= 0, "per_ps", f"{record.per_ps} is negative")
    check(record.est_bw_per_flow >= 0, "est_bw_per_flow", f"{record.est_bw_per_flow} is negative")
    for name in ("tcp_rate", "tcp_seq_fcnt_rate", "tcp_ack_fcnt_rate"):
        value = getattr(record, name)
        check(0.0 <= value <= 1.0, name, f"{value} outside [0,1]")
    for name in ("tcp_ack_cnt_asym", "pkt_asym", "byt_asym"):
        value = getattr(record, name)
        check(-1.0 <= value <= 1.0, name, f"{value} outside [-1,1]")
    check(0 <= record.tcp_aggr_flags <= 255, "tcp_aggr_flags",
          f"{record.tcp_aggr_flags} outside 0..255")
    for name in ("tcp_stat", "tcp_aggr_anomaly", "tcp_aggr_options", "tcp_states"):
        check(getattr(record, name) >= 0, name, "bitfield is negative")
    check(_is_ipv4(record.ip_destination), "ip_destination",
          f"{record.ip_destination!r} is not an IPv4 address")

    return ValidationResult(tuple(bad))


@dataclass(frozen=True)
class LabeledFlow:
    """A flow paired with its class label and a positive sample weight."""

    flow: FlowRecord
    label: ClassLabel
    weight: float = 1.0

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError(f"sample weight must be > 0, got {self.weight}")


@dataclass(frozen=True)
class FeatureVector:
    """22 unit-interval features; flow_index is carried for identity only."""

    values: tuple[float, ...]
    flow_index: int

    def __post_init__(self):
        if len(self.values) != FEATURE_WIDTH:
            raise ValueError(f"expected {FEATURE_WIDTH} features, got {len(self.values)}")
        for i, v in enumerate(self.values):
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"feature {i} = {v} outside [0,1]")


class Provenance(Enum):
    ORIGINAL = "original"
    FEEDBACK_UPDATE = "feedback_update"
    MERGED = "merged"


@dataclass(frozen=True)
class Dataset:
    """Aligned features, labels, and weights ready for training."""

    features: tuple[FeatureVector, ...]
    labels: tuple[ClassLabel, ...]
    weights: tuple[float, ...]
    provenance: Provenance = Provenance.ORIGINAL

    def __post_init__(self):
        if not (len(self.features) == len(self.labels) == len(self.weights)):
            raise ValueError(
                "features/labels/weights lengths disagree: "
                f"{len(self.features)}/{len(self.labels)}/{len(self.weights)}"
            )
        for w in self.weights:
            if w <= 0:
                raise ValueError(f"sample weight must be > 0, got {w}")

    def __len__(self) -> int:
        return len(self.features)

    @staticmethod
    def concat(parts: "list[Dataset]", provenance: Provenance) -> "Dataset":
        features: list[FeatureVector] = []
        labels: list[ClassLabel] = []
        weights: list[float] = []
        for part in parts:
            features.extend(part.features)
            labels.extend(part.labels)
            weights.extend(part.weights)
        return Dataset(tuple(features), tuple(labels), tuple(weights), provenance)
