"""Synthetic flow generators for tests.

``real_like`` and ``lab_like`` are two different flow-generating
processes: the first has many hosts, Zipf-popular services and heavy-tailed
durations and sizes; the second has few hosts and short, small flows.
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from flowbench.flow_model import FlowRecord, Label
from flowbench.ingest import write_flows

DAY_MS = 86_400_000
T0 = 1_554_076_800_000  # 2019-04-01T00:00:00Z


def _ipv4(codes, base):
    return [f"{base}.{(c >> 16) & 255}.{(c >> 8) & 255}.{c & 255}" for c in codes.tolist()]


def _zipf_choice(rng, n_items, size, a):
    ranks = np.arange(1, n_items + 1, dtype=np.float64)
    p = ranks**-a
    return rng.choice(n_items, size=size, p=p / p.sum())


def _records(first, dur, ib, ob, ip, op, src, dst, sport, dport, proto, l7, label=Label.BENIGN):
    return [
        FlowRecord(*row, label=label)
        for row in zip(
            first.tolist(), (first + dur).tolist(), ib.tolist(), ob.tolist(), ip.tolist(), op.tolist(),
            src, dst, sport.tolist(), dport.tolist(), proto.tolist(), l7.tolist(),
        )
    ]


SERVICE_PORTS = np.array([443, 80, 53, 123, 22, 25, 993, 8080, 3389, 445, 5228, 1935, 3478, 8443, 853])


def real_like(n: int, seed: int, days: int = 3) -> list[FlowRecord]:
    rng = np.random.default_rng(seed)
    first = T0 + rng.integers(0, days * DAY_MS, n)
    dur = np.floor(rng.lognormal(7.5, 2.2, n)).astype(np.int64)
    ip = 1 + np.floor(rng.pareto(1.3, n) * 3).astype(np.int64)
    op = np.floor(ip * rng.uniform(0.3, 1.2, n)).astype(np.int64)
    ib = ip * rng.integers(60, 1400, n)
    ob = op * rng.integers(40, 1500, n)
    src = _ipv4(_zipf_choice(rng, 20_000, n, 0.8), "10")
    dst = _ipv4(_zipf_choice(rng, 8_000, n, 1.0), "172")
    sport = rng.integers(1024, 65536, n)
    svc = _zipf_choice(rng, SERVICE_PORTS.size + 2000, n, 1.1)
    dport = np.where(svc < SERVICE_PORTS.size, SERVICE_PORTS[np.minimum(svc, SERVICE_PORTS.size - 1)], 1024 + svc)
    proto = np.where(rng.random(n) < 0.8, 6, 17)
    l7 = (dport * 7 + rng.integers(0, 4, n)) % 250
    return _records(first, dur, ib, ob, ip, op, src, dst, sport, dport, proto, l7)


def lab_like(n: int, seed: int, days: int = 3) -> list[FlowRecord]:
    rng = np.random.default_rng(seed)
    first = T0 + rng.integers(0, days * DAY_MS, n)
    dur = np.floor(rng.exponential(40.0, n)).astype(np.int64)
    ip = rng.integers(1, 6, n)
    op = rng.integers(0, 4, n)
    ib = ip * rng.integers(40, 200, n)
    ob = op * rng.integers(40, 120, n)
    src = _ipv4(rng.integers(0, 40, n), "192")
    dst = _ipv4(rng.integers(0, 25, n), "192")
    sport = rng.integers(30_000, 30_400, n)
    dport = rng.choice(SERVICE_PORTS[:6], n)
    proto = np.where(rng.random(n) < 0.5, 6, 17)
    l7 = dport % 250
    return _records(first, dur, ib, ob, ip, op, src, dst, sport, dport, proto, l7)


def random_flows(n: int, seed: int, n_ips: int = 6, n_ports: int = 5, n_l7: int = 4) -> list[FlowRecord]:
    """Small key alphabets so grouped counts have plenty of collisions."""
    rng = np.random.default_rng(seed)
    first = rng.integers(0, 10 * DAY_MS, n)
    dur = rng.integers(0, 100_000, n)
    ip = rng.integers(0, 20, n)
    op = rng.integers(0, 20, n)
    zero = (ip + op) == 0
    ib = np.where(zero, 0, rng.integers(0, 10**6, n))
    ob = np.where(zero, 0, rng.integers(0, 10**6, n))
    ips = [f"10.0.0.{i}" for i in range(n_ips - 1)] + ["2001:db8::1"]
    src = [ips[i] for i in rng.integers(0, n_ips, n)]
    dst = [ips[i] for i in rng.integers(0, n_ips, n)]
    sport = rng.integers(0, n_ports, n) + 1000
    dport = rng.integers(0, n_ports, n) + 2000
    proto = rng.choice([6, 17, 1], n)
    l7 = rng.integers(0, n_l7, n)
    return _records(first, dur, ib, ob, ip, op, src, dst, sport, dport, proto, l7)


def write_csv(records, path: Path) -> Path:
    buf = io.StringIO()
    write_flows(records, buf)
    path.write_text(buf.getvalue())
    return path


def write_nprobe_csv(records, path: Path, delimiter: str = ",") -> Path:
    """nprobe-style header, epoch-second timestamps rounded down."""
    header = ["FIRST_SWITCHED", "LAST_SWITCHED", "IN_BYTES", "OUT_BYTES", "IN_PKTS", "OUT_PKTS",
              "IPV4_SRC_ADDR", "IPV4_DST_ADDR", "L4_SRC_PORT", "L4_DST_PORT", "PROTOCOL", "L7_PROTO"]
    lines = [delimiter.join(header)]
    for r in records:
        lines.append(delimiter.join(map(str, (
            r.first_switched // 1000, r.last_switched // 1000, r.in_bytes, r.out_bytes, r.in_pkts, r.out_pkts,
            r.src_ip, r.dst_ip, r.src_port, r.dst_port, r.l4_proto, r.l7_proto,
        ))))
    path.write_text("\n".join(lines) + "\n")
    return path
