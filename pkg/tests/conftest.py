import numpy as np

from flowtriage.flows import FlowRecord, PortClass


def make_flow(**overrides) -> FlowRecord:
    """A fully in-range baseline record; override single fields per test."""
    base = dict(
        flow_index=1,
        duration=12.5,
        ip_destination="192.168.10.5",
        src_port=51234,
        dst_port=443,
        l4_protocol=6,
        dst_port_class=PortClass.WELL_KNOWN,
        tcp_rate=0.9,
        tcp_ack_cnt_asym=0.05,
        pkt_asym=-0.2,
        byt_asym=-0.4,
        tcp_stat=3,
        ip_min_ttl=60,
        ip_max_ttl=64,
        per_ps=120.0,
        tcp_seq_fcnt_rate=0.01,
        tcp_ack_fcnt_rate=0.02,
        est_bw_per_flow=50_000.0,
        tcp_aggr_flags=27,
        tcp_aggr_anomaly=0,
        tcp_aggr_options=14,
        tcp_states=3,
    )
    base.update(overrides)
    return FlowRecord(**base)


def random_valid_flow(rng: np.random.Generator) -> FlowRecord:
    """Uniformly sample an in-range record (independent of the simulator)."""
    min_ttl = int(rng.integers(0, 256))
    dst_port = int(rng.integers(0, 65536))
    return FlowRecord(
        flow_index=int(rng.integers(0, 10_000_000)),
        duration=float(rng.uniform(0, 100_000)),
        ip_destination=".".join(str(int(b)) for b in rng.integers(1, 255, size=4)),
        src_port=int(rng.integers(0, 65536)),
        dst_port=dst_port,
        l4_protocol=int(rng.integers(0, 256)),
        dst_port_class=PortClass.from_port(dst_port),
        tcp_rate=float(rng.uniform(0, 1)),
        tcp_ack_cnt_asym=float(rng.uniform(-1, 1)),
        pkt_asym=float(rng.uniform(-1, 1)),
        byt_asym=float(rng.uniform(-1, 1)),
        tcp_stat=int(rng.integers(0, 2**16)),
        ip_min_ttl=min_ttl,
        ip_max_ttl=int(rng.integers(min_ttl, 256)),
        per_ps=float(rng.uniform(0, 1e8)),
        tcp_seq_fcnt_rate=float(rng.uniform(0, 1)),
        tcp_ack_fcnt_rate=float(rng.uniform(0, 1)),
        est_bw_per_flow=float(rng.uniform(0, 1e11)),
        tcp_aggr_flags=int(rng.integers(0, 256)),
        tcp_aggr_anomaly=int(rng.integers(0, 2**16)),
        tcp_aggr_options=int(rng.integers(0, 2**32)),
        tcp_states=int(rng.integers(0, 2**8)),
    )
