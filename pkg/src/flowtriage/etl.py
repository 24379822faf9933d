"""Flow-export parsing, relevance filtering, and unit-interval featurization.

The flow CSV contract (documented in docs/flow-csv.md) is a comma-separated
UTF-8 file with a mandatory header whose column names match the canonical
flow attribute names below. Unknown extra columns are ignored with a
warning; Flowindex, DstPortClass, and Label are optional (row number,
IANA-derived class, and "unlabeled" respectively when absent).

Each raw attribute is scaled into [0,1] by a rule chosen per attribute kind:
discrete index values divide by the maximum index defined by the relevant
standard, ratios pass through, [-1,1] asymmetries map affinely, bitfields
use their set-bit fraction, and unbounded magnitudes saturate at a cap.
"""

from __future__ import annotations

import hashlib
import io
import ipaddress
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

from .flows import (
    FEATURE_WIDTH,
    ClassLabel,
    Dataset,
    FeatureVector,
    FlowRecord,
    LabeledFlow,
    PortClass,
    Provenance,
    validate_flow,
)

logger = logging.getLogger(__name__)

DATASET_FORMAT_ID = "flowtriage-dataset"
DATASET_FORMAT_VERSION = 1

# Protocols kept by default: TCP, UDP, ICMP.
DEFAULT_PROTOCOL_ALLOW_SET = frozenset({6, 17, 1})

# RFC1918 plus loopback and link-local; destinations inside these count
# as internal for the locality feature.
DEFAULT_PRIVATE_PREFIXES = (
    "10.0.0.0/8",
    "172.16.0.0/12",
    "192.168.0.0/16",
    "127.0.0.0/8",
    "169.254.0.0/16",
)


class EtlError(Exception):
    """Base class for ingestion and featurization failures."""


class FlowFormatError(EtlError):
    """Header-level problem in a flow CSV (missing or unusable columns)."""


class FlowRowError(EtlError):
    """Cell-level problem in a flow CSV; carries the 1-based data row."""

    def __init__(self, row: int, column: str, message: str):
        super().__init__(f"row {row}, column {column}: {message}")
        self.row = row
        self.column = column


class EmptyInputError(EtlError):
    """The input contained no data rows."""


class EmptyDatasetError(EtlError):
    """Every flow was filtered out; nothing left to train on."""


class NormalizationError(EtlError):
    """Raw value outside the domain of its normalization rule."""


class AttributeKind(Enum):
    CONTINUOUS = "continuous"        # unbounded magnitude, saturates at clamp_cap
    DISCRETE_INDEX = "discrete_index"  # index / max index from the standard
    BITFIELD = "bitfield"            # popcount / bit width
    RATIO = "ratio"                  # already in [0,1]
    ASYMMETRY = "asymmetry"          # [-1,1] -> [0,1] affine


@dataclass(frozen=True)
class AttributeSpec:
    """How one raw attribute becomes one unit-interval feature."""

    attribute_id: int
    name: str
    kind: AttributeKind
    max_index: float = 1.0   # denominator for discrete_index kinds
    clamp_cap: float = 1.0   # saturation cap for continuous kinds
    bit_width: int = 8       # denominator for bitfield kinds

    def __post_init__(self):
        if self.max_index <= 0:
            raise ValueError("max_index must be positive")
        if self.clamp_cap <= 0:
            raise ValueError("clamp_cap must be positive")
        if self.bit_width <= 0:
            raise ValueError("bit_width must be positive")


@dataclass(frozen=True)
class MetricsCollection:
    """The fixed, ordered set of 22 feature-producing attribute specs."""

    specs: tuple[AttributeSpec, ...]

    def __post_init__(self):
        if len(self.specs) != FEATURE_WIDTH:
            raise ValueError(f"expected {FEATURE_WIDTH} specs, got {len(self.specs)}")
        ids = [s.attribute_id for s in self.specs]
        if len(set(ids)) != len(ids):
            raise ValueError("attribute ids must be unique")


# Saturation caps keep attack-scale outliers pinned at 1.0 instead of
# stretching the scale for everything else.
DURATION_CAP_SECONDS = 3600.0
PER_PS_CAP = 1e6
BANDWIDTH_CAP_BPS = 1e9


def default_metrics() -> MetricsCollection:
    """The shipped 22-feature collection, ordered by attribute id.

    Id 3 is the derived destination-locality feature (0 internal /
    1 external) standing in for the raw destination address; id 23 is the
    IANA class of the source port, mirroring the destination-side port
    classification so the vector keeps its fixed 22-slot width.
    """
    k = AttributeKind
    return MetricsCollection((
        AttributeSpec(2, "duration", k.CONTINUOUS, clamp_cap=DURATION_CAP_SECONDS),
        AttributeSpec(3, "ip_locality", k.RATIO),
        AttributeSpec(4, "src_port", k.DISCRETE_INDEX, max_index=65535),
        AttributeSpec(5, "dst_port", k.DISCRETE_INDEX, max_index=65535),
        AttributeSpec(6, "l4_protocol", k.DISCRETE_INDEX, max_index=255),
        AttributeSpec(7, "dst_port_class", k.DISCRETE_INDEX, max_index=2),
        AttributeSpec(8, "tcp_rate", k.RATIO),
        AttributeSpec(9, "tcp_ack_cnt_asym", k.ASYMMETRY),
        AttributeSpec(10, "pkt_asym", k.ASYMMETRY),
        AttributeSpec(11, "byt_asym", k.ASYMMETRY),
        AttributeSpec(12, "tcp_stat", k.BITFIELD, bit_width=8),
        AttributeSpec(13, "ip_min_ttl", k.DISCRETE_INDEX, max_index=255),
        AttributeSpec(14, "ip_max_ttl", k.DISCRETE_INDEX, max_index=255),
        AttributeSpec(15, "per_ps", k.CONTINUOUS, clamp_cap=PER_PS_CAP),
        AttributeSpec(16, "tcp_seq_fcnt_rate", k.RATIO),
        AttributeSpec(17, "tcp_ack_fcnt_rate", k.RATIO),
        AttributeSpec(18, "est_bw_per_flow", k.CONTINUOUS, clamp_cap=BANDWIDTH_CAP_BPS),
        AttributeSpec(19, "tcp_aggr_flags", k.BITFIELD, bit_width=8),
        AttributeSpec(20, "tcp_aggr_anomaly", k.BITFIELD, bit_width=16),
        AttributeSpec(21, "tcp_aggr_options", k.BITFIELD, bit_width=32),
        AttributeSpec(22, "tcp_states", k.BITFIELD, bit_width=8),
        AttributeSpec(23, "src_port_class", k.DISCRETE_INDEX, max_index=2),
    ))


def normalize_attribute(spec: AttributeSpec, raw: float) -> float:
    """Scale one raw value into [0,1] per its attribute kind.

    Raises NormalizationError for non-finite input, or for negative input
    on any kind other than asymmetry (whose domain is [-1,1]).
    """
    if raw != raw or raw in (float("inf"), float("-inf")):
        raise NormalizationError(f"{spec.name}: raw value {raw} is not finite")
    if spec.kind is AttributeKind.ASYMMETRY:
        return _clamp01((raw + 1.0) / 2.0)
    if raw < 0:
        raise NormalizationError(f"{spec.name}: negative raw value {raw}")
    if spec.kind is AttributeKind.DISCRETE_INDEX:
        return _clamp01(raw / spec.max_index)
    if spec.kind is AttributeKind.RATIO:
        return _clamp01(raw)
    if spec.kind is AttributeKind.BITFIELD:
        return _clamp01(int(raw).bit_count() / spec.bit_width)
    # continuous
    return _clamp01(min(raw, spec.clamp_cap) / spec.clamp_cap)


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def is_private_destination(ip: str, private_prefixes: Sequence[str] = DEFAULT_PRIVATE_PREFIXES) -> bool:
    address = ipaddress.IPv4Address(ip)
    return any(address in ipaddress.IPv4Network(p) for p in private_prefixes)


def _raw_value(record: FlowRecord, spec: AttributeSpec, private_prefixes: Sequence[str]) -> float:
    name = spec.name
    if name == "ip_locality":
        return 0.0 if is_private_destination(record.ip_destination, private_prefixes) else 1.0
    if name == "dst_port_class":
        return float(record.dst_port_class.index)
    if name == "src_port_class":
        return float(PortClass.from_port(record.src_port).index)
    return float(getattr(record, name))


def to_feature_vector(
    record: FlowRecord,
    metrics: MetricsCollection | None = None,
    private_prefixes: Sequence[str] = DEFAULT_PRIVATE_PREFIXES,
) -> FeatureVector:
    """Map a validated FlowRecord to its 22 unit-interval features."""
    metrics = metrics or default_metrics()
    values = []
    for spec in metrics.specs:
        raw = _raw_value(record, spec, private_prefixes)
        try:
            values.append(normalize_attribute(spec, raw))
        except NormalizationError as exc:
            raise NormalizationError(f"attribute {spec.name}: {exc}") from exc
    return FeatureVector(tuple(values), record.flow_index)


def _is_relevant(record: FlowRecord, protocol_allow_set: frozenset[int]) -> bool:
    if record.duration == 0 and record.per_ps == 0:
        return False
    return record.l4_protocol in protocol_allow_set


def filter_relevant(
    records: Iterable[FlowRecord],
    protocol_allow_set: frozenset[int] = DEFAULT_PROTOCOL_ALLOW_SET,
) -> list[FlowRecord]:
    """Drop flows with no observed traffic and flows on disallowed protocols."""
    return [r for r in records if _is_relevant(r, protocol_allow_set)]


def build_dataset(
    flows: Sequence[LabeledFlow],
    metrics: MetricsCollection | None = None,
    private_prefixes: Sequence[str] = DEFAULT_PRIVATE_PREFIXES,
    protocol_allow_set: frozenset[int] = DEFAULT_PROTOCOL_ALLOW_SET,
) -> Dataset:
    """Filter non-relevant flows, then featurize the survivors."""
    metrics = metrics or default_metrics()
    survivors = [lf for lf in flows if _is_relevant(lf.flow, protocol_allow_set)]
    if not survivors:
        raise EmptyDatasetError("all flows were filtered out")
    features, labels, weights = [], [], []
    for labeled in survivors:
        features.append(to_feature_vector(labeled.flow, metrics, private_prefixes))
        labels.append(labeled.label)
        weights.append(labeled.weight)
    return Dataset(tuple(features), tuple(labels), tuple(weights), Provenance.ORIGINAL)


# --- flow CSV contract ----------------------------------------------------

# Canonical column names; order is the canonical write order.
CSV_COLUMNS = (
    "Flowindex",
    "Duration",
    "IP Destination",
    "Source Port",
    "Destination Port",
    "L4 Protocol",
    "DstPortClass",
    "TCP-Rate",
    "TCPPAckCntAsm",
    "PktAsm",
    "BytAsm",
    "TCPStat",
    "IPMinTTL",
    "IPMaxTTL",
    "PerPS",
    "TCPSeqFCnt-Rate",
    "TCPAckFCnt-Rate",
    "EstBwPFlow",
    "TCPAggrFlags",
    "TCPAggrAnomaly",
    "TCPAggrOptions",
    "TCPStates",
    "Label",
)

# Columns a reader may omit: Flowindex falls back to the data row number,
# DstPortClass is derived from the destination port, Label means unlabeled.
OPTIONAL_COLUMNS = frozenset({"Flowindex", "DstPortClass", "Label"})

_INT_COLUMNS = {
    "Flowindex", "Source Port", "Destination Port", "L4 Protocol",
    "TCPStat", "IPMinTTL", "IPMaxTTL", "TCPAggrFlags", "TCPAggrAnomaly",
    "TCPAggrOptions", "TCPStates",
}
_FLOAT_COLUMNS = {
    "Duration", "TCP-Rate", "TCPPAckCntAsm", "PktAsm", "BytAsm", "PerPS",
    "TCPSeqFCnt-Rate", "TCPAckFCnt-Rate", "EstBwPFlow",
}


def _decode(stream) -> str:
    if isinstance(stream, (bytes, bytearray)):
        return stream.decode("utf-8")
    if isinstance(stream, str):
        return stream
    data = stream.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _split_csv_line(line: str) -> list[str]:
    return [cell.strip() for cell in line.split(",")]


def _parse_rows(text: str) -> tuple[dict[str, int], list[tuple[int, list[str]]]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise EmptyInputError("flow file is empty")
    header = _split_csv_line(lines[0])
    known = set(CSV_COLUMNS)
    if not any(col in known for col in header):
        raise FlowFormatError(
            f"first row is not a recognized header (saw {header[:4]}...)"
        )
    for col in header:
        if col not in known:
            logger.warning("ignoring unknown flow column %r", col)
    positions = {col: header.index(col) for col in header if col in known}
    for col in CSV_COLUMNS:
        if col not in positions and col not in OPTIONAL_COLUMNS:
            raise FlowFormatError(f"missing required column {col!r}")
    rows = []
    for row_number, line in enumerate(lines[1:], start=1):
        rows.append((row_number, _split_csv_line(line)))
    if not rows:
        raise EmptyInputError("flow file has a header but no data rows")
    return positions, rows


def _cell(cells: list[str], positions: dict[str, int], column: str) -> str | None:
    pos = positions.get(column)
    if pos is None or pos >= len(cells):
        return None
    return cells[pos]


def _parse_record(row_number: int, cells: list[str], positions: dict[str, int]) -> FlowRecord:
    def parse(column: str, caster):
        text = _cell(cells, positions, column)
        if text is None or text == "":
            raise FlowRowError(row_number, column, "missing value")
        try:
            return caster(text)
        except (ValueError, TypeError):
            raise FlowRowError(row_number, column, f"cannot parse {text!r}") from None

    raw_index = _cell(cells, positions, "Flowindex")
    if raw_index in (None, ""):
        flow_index = row_number
    else:
        try:
            flow_index = int(raw_index)
        except ValueError:
            raise FlowRowError(row_number, "Flowindex", f"cannot parse {raw_index!r}") from None

    dst_port = parse("Destination Port", int)
    raw_class = _cell(cells, positions, "DstPortClass")
    if raw_class in (None, ""):
        dst_port_class = PortClass.from_port(dst_port)
    else:
        try:
            dst_port_class = PortClass(raw_class)
        except ValueError:
            raise FlowRowError(row_number, "DstPortClass", f"cannot parse {raw_class!r}") from None

    return FlowRecord(
        flow_index=flow_index,
        duration=parse("Duration", float),
        ip_destination=parse("IP Destination", str),
        src_port=parse("Source Port", int),
        dst_port=dst_port,
        l4_protocol=parse("L4 Protocol", int),
        dst_port_class=dst_port_class,
        tcp_rate=parse("TCP-Rate", float),
        tcp_ack_cnt_asym=parse("TCPPAckCntAsm", float),
        pkt_asym=parse("PktAsm", float),
        byt_asym=parse("BytAsm", float),
        tcp_stat=parse("TCPStat", int),
        ip_min_ttl=parse("IPMinTTL", int),
        ip_max_ttl=parse("IPMaxTTL", int),
        per_ps=parse("PerPS", float),
        tcp_seq_fcnt_rate=parse("TCPSeqFCnt-Rate", float),
        tcp_ack_fcnt_rate=parse("TCPAckFCnt-Rate", float),
        est_bw_per_flow=parse("EstBwPFlow", float),
        tcp_aggr_flags=parse("TCPAggrFlags", int),
        tcp_aggr_anomaly=parse("TCPAggrAnomaly", int),
        tcp_aggr_options=parse("TCPAggrOptions", int),
        tcp_states=parse("TCPStates", int),
    )


def parse_flow_file(stream) -> list[FlowRecord]:
    """Parse a flow CSV into records, one per data row, in file order."""
    positions, rows = _parse_rows(_decode(stream))
    return [_parse_record(n, cells, positions) for n, cells in rows]


def parse_labeled_flow_file(stream) -> list[LabeledFlow]:
    """Parse a flow CSV whose Label column is present and filled."""
    positions, rows = _parse_rows(_decode(stream))
    if "Label" not in positions:
        raise FlowFormatError("missing required column 'Label'")
    labeled = []
    for row_number, cells in rows:
        record = _parse_record(row_number, cells, positions)
        raw = _cell(cells, positions, "Label")
        if raw in (None, ""):
            raise FlowRowError(row_number, "Label", "missing value")
        try:
            label = ClassLabel.from_name(raw)
        except ValueError:
            raise FlowRowError(row_number, "Label", f"cannot parse {raw!r}") from None
        labeled.append(LabeledFlow(record, label))
    return labeled


def _format_number(value) -> str:
    # repr round-trips doubles exactly, keeping the CSV contract lossless.
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_flow_file(flows: Sequence[FlowRecord | LabeledFlow], stream: io.TextIOBase | None = None) -> str:
    """Serialize records (or labeled flows) back to the flow CSV contract."""
    out = io.StringIO()
    out.write(",".join(CSV_COLUMNS) + "\n")
    for item in flows:
        record = item.flow if isinstance(item, LabeledFlow) else item
        label = item.label.value if isinstance(item, LabeledFlow) else ""
        cells = [
            str(record.flow_index),
            _format_number(record.duration),
            record.ip_destination,
            str(record.src_port),
            str(record.dst_port),
            str(record.l4_protocol),
            record.dst_port_class.value,
            _format_number(record.tcp_rate),
            _format_number(record.tcp_ack_cnt_asym),
            _format_number(record.pkt_asym),
            _format_number(record.byt_asym),
            str(record.tcp_stat),
            str(record.ip_min_ttl),
            str(record.ip_max_ttl),
            _format_number(record.per_ps),
            _format_number(record.tcp_seq_fcnt_rate),
            _format_number(record.tcp_ack_fcnt_rate),
            _format_number(record.est_bw_per_flow),
            str(record.tcp_aggr_flags),
            str(record.tcp_aggr_anomaly),
            str(record.tcp_aggr_options),
            str(record.tcp_states),
            label,
        ]
        out.write(",".join(cells) + "\n")
    text = out.getvalue()
    if stream is not None:
        stream.write(text)
    return text


# --- dataset file format (versioned columnar text) -------------------------


class DatasetFormatError(EtlError):
    """Unreadable or version-incompatible dataset file."""


def serialize_dataset(dataset: Dataset) -> str:
    """Versioned text format: header lines, then one tab-separated row per
    sample (flow_index, label, weight, 22 feature values)."""
    lines = [
        f"{DATASET_FORMAT_ID} v{DATASET_FORMAT_VERSION}",
        f"provenance={dataset.provenance.value}",
        f"features={FEATURE_WIDTH}",
        f"count={len(dataset)}",
    ]
    for fv, label, weight in zip(dataset.features, dataset.labels, dataset.weights):
        cells = [str(fv.flow_index), label.value, repr(float(weight))]
        cells.extend(repr(float(v)) for v in fv.values)
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"


def deserialize_dataset(text: str) -> Dataset:
    lines = text.splitlines()
    if not lines:
        raise DatasetFormatError("dataset file is empty")
    head = lines[0].split()
    if len(head) != 2 or head[0] != DATASET_FORMAT_ID:
        raise DatasetFormatError(f"not a {DATASET_FORMAT_ID} file: {lines[0]!r}")
    if head[1] != f"v{DATASET_FORMAT_VERSION}":
        raise DatasetFormatError(f"unsupported dataset format version {head[1]!r}")
    meta = {}
    body_start = 1
    for line in lines[1:]:
        if "=" not in line:
            break
        key, _, value = line.partition("=")
        meta[key] = value
        body_start += 1
    try:
        provenance = Provenance(meta["provenance"])
        count = int(meta["count"])
        width = int(meta["features"])
    except (KeyError, ValueError) as exc:
        raise DatasetFormatError(f"bad dataset header: {exc}") from exc
    if width != FEATURE_WIDTH:
        raise DatasetFormatError(f"dataset has {width} features, expected {FEATURE_WIDTH}")
    features, labels, weights = [], [], []
    for line in lines[body_start:]:
        cells = line.split("\t")
        if len(cells) != 3 + FEATURE_WIDTH:
            raise DatasetFormatError(f"bad dataset row: {line[:60]!r}")
        features.append(FeatureVector(tuple(float(c) for c in cells[3:]), int(cells[0])))
        labels.append(ClassLabel.from_name(cells[1]))
        weights.append(float(cells[2]))
    if len(features) != count:
        raise DatasetFormatError(f"dataset count={count} but {len(features)} rows present")
    return Dataset(tuple(features), tuple(labels), tuple(weights), provenance)


def save_dataset(dataset: Dataset, path) -> str:
    """Write a dataset file and return its content checksum."""
    text = serialize_dataset(dataset)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return dataset_checksum(text)


def load_dataset(path) -> Dataset:
    with open(path, encoding="utf-8") as fh:
        return deserialize_dataset(fh.read())


def dataset_checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()
