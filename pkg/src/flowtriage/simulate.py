"""Synthetic labeled flow generation for the three incident scenarios.

Emulates a small lab: ordinary web/curl/ping traffic against a local
server, a degraded web service producing connection failures, and a
flooding attack in the style of HTTP-flood tools. Every distribution
parameter below is a documented model default, not ground truth; the
separating signals are the TCP share, the ACK-count asymmetry, and the
packets-per-second rate, with supporting texture in states, fault rates,
and bandwidth.

Generation is deterministic per seed, and every emitted record passes
flow validation by construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .etl import build_dataset, default_metrics
from .flows import ClassLabel, Dataset, FlowRecord, LabeledFlow, PortClass

PRIVATE_SERVERS = ("192.168.10.5", "192.168.10.7", "10.20.0.12")
PUBLIC_HOSTS = ("93.184.216.34", "142.250.74.36", "151.101.1.140", "8.8.8.8")

TCP, ICMP, UDP = 6, 1, 17


@dataclass(frozen=True)
class ScenarioSpec:
    """One generation request: class, size, seed, and parameter overrides."""

    kind: ClassLabel
    count: int
    seed: int = 0
    overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.count < 1:
            raise ValueError("count must be >= 1")


# Per-class distribution parameters. Tuples are (mean, sd) for clipped
# normals; log-uniform ranges are (lo, hi) exponents of 10.
_PROFILES: dict[ClassLabel, dict] = {
    ClassLabel.NORMAL_TRAFFIC: {
        "duration_scale": 8.0,
        "duration_range": (0.05, 600.0),
        "protocol_weights": {TCP: 0.8, UDP: 0.1, ICMP: 0.1},
        "private_dst_share": 0.7,
        "tcp_rate": (0.9, 0.05),
        "non_tcp_rate": (0.05, 0.03),
        "ack_asym": (0.0, 0.1),
        "pkt_asym": (-0.2, 0.15),
        "byt_asym": (-0.4, 0.2),
        "per_ps_log10": (0.5, 2.7),
        "bw_log10": (3.5, 6.0),
        "seq_fault": (0.01, 0.01),
        "ack_fault": (0.015, 0.01),
        "ttl_base": (52, 64),
        "ttl_span": (0, 4),
        "dst_ports": (80, 443, 8080, 22),
        "tcp_stat_pool": (1, 3),
        "flags_pool": (27, 26, 24, 31),
        "anomaly_pool": (0, 0, 0, 1, 2),
        "options_pool": (2, 6, 14, 15),
        "states_pool": (3, 7),
    },
    ClassLabel.SERVICE_INCIDENT: {
        "duration_scale": 30.0,
        "duration_range": (1.0, 3600.0),
        "protocol_weights": {TCP: 0.9, ICMP: 0.1},
        "private_dst_share": 1.0,
        "tcp_rate": (0.95, 0.04),
        "non_tcp_rate": (0.05, 0.03),
        "ack_asym": (0.4, 0.2),
        "pkt_asym": (0.3, 0.2),
        "byt_asym": (0.2, 0.2),
        "per_ps_log10": (-1.3, 0.9),
        "bw_log10": (1.5, 3.5),
        "seq_fault": (0.45, 0.15),
        "ack_fault": (0.5, 0.15),
        "ttl_base": (52, 64),
        "ttl_span": (0, 4),
        "dst_ports": (80, 443, 8080),
        "tcp_stat_pool": (4, 12, 20),
        "flags_pool": (6, 4, 22),
        "anomaly_pool": (8, 24, 72),
        "options_pool": (2, 6),
        "states_pool": (9, 13, 29),
    },
    ClassLabel.DOS_ATTACK: {
        "duration_scale": 0.8,
        "duration_range": (0.01, 30.0),
        "protocol_weights": {TCP: 1.0},
        "private_dst_share": 1.0,
        "tcp_rate": (0.99, 0.01),
        "non_tcp_rate": (0.05, 0.03),
        "ack_asym": (0.93, 0.05),   # sign flipped for a minority of flows
        "ack_asym_flip_share": 0.2,
        "pkt_asym": (0.85, 0.1),
        "byt_asym": (0.8, 0.15),
        "per_ps_log10": (5.3, 7.0),
        "bw_log10": (8.3, 10.0),
        "seq_fault": (0.25, 0.15),
        "ack_fault": (0.3, 0.15),
        "ttl_base": (30, 64),
        "ttl_span": (0, 120),
        "dst_ports": (80, 443),
        "tcp_stat_pool": (2, 6),
        "flags_pool": (2, 10, 18),
        "anomaly_pool": (130, 160, 192),
        "options_pool": (0, 2),
        "states_pool": (1, 17),
    },
}


def _clipped_normal(rng: np.random.Generator, mean: float, sd: float, lo: float, hi: float) -> float:
    return float(np.clip(rng.normal(mean, sd), lo, hi))


def _log_uniform(rng: np.random.Generator, lo_exp: float, hi_exp: float) -> float:
    return float(10.0 ** rng.uniform(lo_exp, hi_exp))


def _pick(rng: np.random.Generator, pool) -> int:
    return int(pool[rng.integers(0, len(pool))])


def generate_scenario(spec: ScenarioSpec) -> list[LabeledFlow]:
    """Produce ``spec.count`` labeled flows for one scenario class."""
    profile = dict(_PROFILES[spec.kind])
    profile.update(spec.overrides)
    rng = np.random.default_rng(spec.seed)
    protocols = list(profile["protocol_weights"].items())
    proto_values = [p for p, _ in protocols]
    proto_probs = [w for _, w in protocols]

    flows = []
    for i in range(spec.count):
        protocol = int(rng.choice(proto_values, p=proto_probs))
        is_tcp = protocol == TCP
        if rng.random() < profile["private_dst_share"]:
            dst_ip = PRIVATE_SERVERS[int(rng.integers(0, len(PRIVATE_SERVERS)))]
        else:
            dst_ip = PUBLIC_HOSTS[int(rng.integers(0, len(PUBLIC_HOSTS)))]
        if protocol == ICMP:
            src_port = dst_port = 0
        else:
            src_port = int(rng.integers(49152, 65536))
            dst_port = _pick(rng, profile["dst_ports"]) if is_tcp else 53

        lo, hi = profile["duration_range"]
        duration = float(np.clip(rng.exponential(profile["duration_scale"]) + lo, lo, hi))
        rate_mean, rate_sd = profile["tcp_rate"] if is_tcp else profile["non_tcp_rate"]
        tcp_rate = _clipped_normal(rng, rate_mean, rate_sd, 0.0, 1.0)

        ack_mean, ack_sd = profile["ack_asym"]
        ack_asym = _clipped_normal(rng, ack_mean, ack_sd, -1.0, 1.0)
        if rng.random() < profile.get("ack_asym_flip_share", 0.0):
            ack_asym = -ack_asym

        ttl_lo, ttl_hi = profile["ttl_base"]
        span_lo, span_hi = profile["ttl_span"]
        ip_min_ttl = int(rng.integers(ttl_lo, ttl_hi + 1))
        ip_max_ttl = min(255, ip_min_ttl + int(rng.integers(span_lo, span_hi + 1)))

        flow = FlowRecord(
            flow_index=i + 1,
            duration=duration,
            ip_destination=dst_ip,
            src_port=src_port,
            dst_port=dst_port,
            l4_protocol=protocol,
            dst_port_class=PortClass.from_port(dst_port),
            tcp_rate=tcp_rate,
            tcp_ack_cnt_asym=ack_asym,
            pkt_asym=_clipped_normal(rng, *profile["pkt_asym"], -1.0, 1.0),
            byt_asym=_clipped_normal(rng, *profile["byt_asym"], -1.0, 1.0),
            tcp_stat=_pick(rng, profile["tcp_stat_pool"]) if is_tcp else 0,
            ip_min_ttl=ip_min_ttl,
            ip_max_ttl=ip_max_ttl,
            per_ps=_log_uniform(rng, *profile["per_ps_log10"]),
            tcp_seq_fcnt_rate=_clipped_normal(rng, *profile["seq_fault"], 0.0, 1.0),
            tcp_ack_fcnt_rate=_clipped_normal(rng, *profile["ack_fault"], 0.0, 1.0),
            est_bw_per_flow=_log_uniform(rng, *profile["bw_log10"]),
            tcp_aggr_flags=_pick(rng, profile["flags_pool"]) if is_tcp else 0,
            tcp_aggr_anomaly=_pick(rng, profile["anomaly_pool"]) if is_tcp else 0,
            tcp_aggr_options=_pick(rng, profile["options_pool"]) if is_tcp else 0,
            tcp_states=_pick(rng, profile["states_pool"]) if is_tcp else 0,
        )
        flows.append(LabeledFlow(flow, spec.kind))
    return flows


def generate_labeled_flows(per_class_count: int, seed: int = 0) -> list[LabeledFlow]:
    """Balanced shuffled flows for all three classes, uniquely indexed."""
    if per_class_count < 1:
        raise ValueError("per_class_count must be >= 1")
    flows: list[LabeledFlow] = []
    for offset, kind in enumerate(ClassLabel):
        flows.extend(generate_scenario(ScenarioSpec(kind, per_class_count, seed + offset)))
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(flows))
    shuffled = [flows[i] for i in order]
    return [
        replace(lf, flow=replace(lf.flow, flow_index=i + 1))
        for i, lf in enumerate(shuffled)
    ]


def generate_corpus(per_class_count: int, seed: int = 0) -> Dataset:
    """Balanced three-class training corpus, featurized and shuffled."""
    if per_class_count < 10:
        raise ValueError("per_class_count must be >= 10")
    return build_dataset(generate_labeled_flows(per_class_count, seed), default_metrics())
