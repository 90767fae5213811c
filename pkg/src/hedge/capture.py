"""Offline capture-file ingestion: extract TCP/UDP payloads, sample them,
and classify each sampled payload independently.

Fragments are never reassembled: a first fragment's partial payload is
treated as its own unit, and non-first fragments (which carry no transport
header) are counted and skipped. TCP payloads are taken per-segment without
stream reassembly.
"""

from __future__ import annotations

import ipaddress
import struct
import warnings
from dataclasses import dataclass
from pathlib import Path
from random import Random

from .bitstream import ByteStream, from_bytes
from .classifier import ENCRYPTED, ThresholdModel, Verdict, classify_stream
from .randtests import DEFAULT_CONFIG, TestConfig

_MAGIC = {
    b"\xa1\xb2\xc3\xd4": (">", False),
    b"\xd4\xc3\xb2\xa1": ("<", False),
    b"\xa1\xb2\x3c\x4d": (">", True),
    b"\x4d\x3c\xb2\xa1": ("<", True),
}

_ETHERTYPE_IPV4 = 0x0800
_ETHERTYPE_IPV6 = 0x86DD

CLASSIFIER_FLOOR_BYTES = 1024
_TECHNICAL_FLOOR_BYTES = 256


@dataclass
class SkipCounts:
    non_ip: int = 0
    non_transport: int = 0
    fragmented: int = 0
    truncated: int = 0
    empty: int = 0

    @property
    def total(self) -> int:
        return self.non_ip + self.non_transport + self.fragmented + self.truncated + self.empty


@dataclass(frozen=True)
class CapturedPayload:
    packet_index: int
    ts_sec: int
    ts_usec: int
    transport: str
    src: str
    dst: str
    sport: int
    dport: int
    payload: ByteStream

    @property
    def timestamp(self) -> float:
        return self.ts_sec + self.ts_usec / 1_000_000.0


@dataclass(frozen=True)
class ParsedCapture:
    payloads: tuple
    skips: SkipCounts

    def __iter__(self):
        return iter(self.payloads)

    def __len__(self):
        return len(self.payloads)

    def __getitem__(self, i):
        return self.payloads[i]


def _ipv4_addr(raw: bytes) -> str:
    return ".".join(str(b) for b in raw)


def _ipv6_addr(raw: bytes) -> str:
    return ipaddress.IPv6Address(raw).compressed


def _parse_frame(frame: bytes, skips: SkipCounts):
    """Ethernet -> IP -> TCP/UDP; returns (transport, src, dst, sport, dport,
    payload bytes) or None after bumping the matching skip counter."""
    if len(frame) < 14:
        skips.truncated += 1
        return None
    ethertype = int.from_bytes(frame[12:14], "big")
    if ethertype == _ETHERTYPE_IPV4:
        if len(frame) < 34:
            skips.truncated += 1
            return None
        ver_ihl = frame[14]
        if ver_ihl >> 4 != 4:
            skips.non_ip += 1
            return None
        ihl = (ver_ihl & 0x0F) * 4
        if ihl < 20 or len(frame) < 14 + ihl:
            skips.truncated += 1
            return None
        total_length = int.from_bytes(frame[16:18], "big")
        if total_length and total_length < ihl:
            skips.truncated += 1
            return None
        flags_frag = int.from_bytes(frame[20:22], "big")
        if flags_frag & 0x1FFF:
            skips.fragmented += 1
            return None
        protocol = frame[23]
        src = _ipv4_addr(frame[26:30])
        dst = _ipv4_addr(frame[30:34])
        # total_length == 0: segmentation-offload capture, frame length governs
        ip_end = min(len(frame), 14 + total_length) if total_length else len(frame)
        transport_off = 14 + ihl
    elif ethertype == _ETHERTYPE_IPV6:
        if len(frame) < 54:
            skips.truncated += 1
            return None
        if frame[14] >> 4 != 6:
            skips.non_ip += 1
            return None
        payload_length = int.from_bytes(frame[18:20], "big")
        protocol = frame[20]
        src = _ipv6_addr(frame[22:38])
        dst = _ipv6_addr(frame[38:54])
        if protocol == 44:
            skips.fragmented += 1
            return None
        # payload_length == 0: jumbogram-style, frame length governs
        ip_end = min(len(frame), 54 + payload_length) if payload_length else len(frame)
        transport_off = 54
    else:
        skips.non_ip += 1
        return None

    if protocol == 6:
        if ip_end < transport_off + 20:
            skips.truncated += 1
            return None
        sport = int.from_bytes(frame[transport_off : transport_off + 2], "big")
        dport = int.from_bytes(frame[transport_off + 2 : transport_off + 4], "big")
        doff = (frame[transport_off + 12] >> 4) * 4
        if doff < 20 or ip_end < transport_off + doff:
            skips.truncated += 1
            return None
        payload = frame[transport_off + doff : ip_end]
        return "TCP", src, dst, sport, dport, payload
    if protocol == 17:
        if ip_end < transport_off + 8:
            skips.truncated += 1
            return None
        sport = int.from_bytes(frame[transport_off : transport_off + 2], "big")
        dport = int.from_bytes(frame[transport_off + 2 : transport_off + 4], "big")
        udp_len = int.from_bytes(frame[transport_off + 4 : transport_off + 6], "big")
        if udp_len == 0:
            # jumbo datagram convention: length spans the rest of the packet
            payload = frame[transport_off + 8 : ip_end]
            return "UDP", src, dst, sport, dport, payload
        if udp_len < 8:
            skips.truncated += 1
            return None
        payload = frame[transport_off + 8 : min(transport_off + udp_len, ip_end)]
        return "UDP", src, dst, sport, dport, payload
    skips.non_transport += 1
    return None


def parse_capture(file) -> ParsedCapture:
    """Read a classic capture file (either endianness, microsecond or
    nanosecond timestamps) and emit non-empty TCP/UDP payloads.

    Packets that are not IP/TCP/UDP, are fragments without a transport
    header, were truncated at capture time, or carry empty payloads are
    counted and skipped, never errored.
    """
    path = Path(file)
    data = path.read_bytes()
    if len(data) < 24:
        raise ValueError(f"{path}: not a supported capture file (missing global header)")
    flavor = _MAGIC.get(data[:4])
    if flavor is None:
        raise ValueError(f"{path}: not a supported capture file (bad magic {data[:4].hex()})")
    endian, nanosecond = flavor
    _vmaj, _vmin, _zone, _sigfigs, _snaplen, network = struct.unpack(endian + "HHiIII", data[4:24])
    if network != 1:
        raise ValueError(f"{path}: unsupported link type {network}; only Ethernet (1) is supported")

    payloads = []
    skips = SkipCounts()
    pos = 24
    packet_index = 0
    record = struct.Struct(endian + "IIII")
    while pos < len(data):
        if len(data) - pos < 16:
            raise ValueError(f"{path}: truncated record header at byte offset {pos}")
        ts_sec, ts_frac, incl_len, orig_len = record.unpack_from(data, pos)
        pos += 16
        if len(data) - pos < incl_len:
            raise ValueError(f"{path}: truncated packet data at byte offset {pos}")
        frame = data[pos : pos + incl_len]
        pos += incl_len
        index = packet_index
        packet_index += 1
        if incl_len < orig_len:
            skips.truncated += 1
            continue
        parsed = _parse_frame(frame, skips)
        if parsed is None:
            continue
        transport, src, dst, sport, dport, payload = parsed
        if not payload:
            skips.empty += 1
            continue
        ts_usec = ts_frac // 1000 if nanosecond else ts_frac
        payloads.append(
            CapturedPayload(
                packet_index=index,
                ts_sec=ts_sec,
                ts_usec=ts_usec,
                transport=transport,
                src=src,
                dst=dst,
                sport=sport,
                dport=dport,
                payload=from_bytes(payload),
            )
        )
    return ParsedCapture(payloads=tuple(payloads), skips=skips)


def sample_payloads(payloads, probability: float, min_bytes: int, seed: int) -> tuple:
    """Keep each payload of length >= min_bytes independently with the given
    probability. One random draw happens per payload regardless of length,
    so the kept-index set depends only on (seed, index, length filter)."""
    if not 0.0 <= probability <= 1.0:
        raise ValueError(f"probability must be in [0, 1], got {probability}")
    rng = Random(seed)
    kept = []
    for p in payloads:
        u = rng.random()
        if len(p.payload) >= min_bytes and u < probability:
            kept.append(p)
    return tuple(kept)


@dataclass(frozen=True)
class PacketVerdict:
    packet_index: int
    timestamp: float
    transport: str
    src: str
    sport: int
    dst: str
    dport: int
    payload_bytes: int
    label: str
    failed_check: str | None
    checks_evaluated: int


@dataclass(frozen=True)
class CaptureResult:
    verdicts: tuple
    encrypted: int
    compressed: int
    sampled: int
    skipped_short: int
    skips: SkipCounts


def classify_capture(
    file,
    model: ThresholdModel,
    cfg: TestConfig = DEFAULT_CONFIG,
    probability: float = 1.0,
    min_bytes: int = CLASSIFIER_FLOOR_BYTES,
    seed: int = 0,
) -> CaptureResult:
    """Parse, sample, and classify each sampled payload; returns per-packet
    verdicts in packet order plus aggregate counts."""
    if min_bytes < CLASSIFIER_FLOOR_BYTES:
        warnings.warn(
            f"min_bytes={min_bytes} is below the {CLASSIFIER_FLOOR_BYTES}-byte classifier floor; "
            "results in this regime are unsupported",
            stacklevel=2,
        )
    parsed = parse_capture(file)
    sampled = sample_payloads(parsed.payloads, probability, min_bytes, seed)
    verdicts = []
    encrypted = compressed = skipped_short = 0
    for p in sampled:
        if len(p.payload) < _TECHNICAL_FLOOR_BYTES:
            skipped_short += 1
            continue
        verdict: Verdict = classify_stream(p.payload, model, cfg, enforce_floor=False)
        if verdict.label == ENCRYPTED:
            encrypted += 1
        else:
            compressed += 1
        verdicts.append(
            PacketVerdict(
                packet_index=p.packet_index,
                timestamp=p.timestamp,
                transport=p.transport,
                src=p.src,
                sport=p.sport,
                dst=p.dst,
                dport=p.dport,
                payload_bytes=len(p.payload),
                label=verdict.label,
                failed_check=verdict.failed_check,
                checks_evaluated=verdict.checks_evaluated,
            )
        )
    return CaptureResult(
        verdicts=tuple(verdicts),
        encrypted=encrypted,
        compressed=compressed,
        sampled=len(sampled),
        skipped_short=skipped_short,
        skips=parsed.skips,
    )


def _ipv4_checksum(header: bytes) -> int:
    total = 0
    for i in range(0, len(header), 2):
        total += int.from_bytes(header[i : i + 2], "big")
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return ~total & 0xFFFF


def _build_frame(p: CapturedPayload) -> bytes:
    payload = p.payload.data
    is_v6 = ":" in p.src
    proto = 6 if p.transport == "TCP" else 17
    if p.transport == "TCP":
        transport = struct.pack(">HHIIHHHH", p.sport, p.dport, 0, 0, (5 << 12) | 0x18, 65535, 0, 0)
    else:
        udp_len = 8 + len(payload)
        # length fields are 16-bit; oversized (reassembled) datagrams use the
        # offload/jumbogram convention of 0, letting the frame length govern
        transport = struct.pack(">HHHH", p.sport, p.dport, udp_len if udp_len <= 0xFFFF else 0, 0)
    if is_v6:
        eth = bytes(6) + bytes(6) + _ETHERTYPE_IPV6.to_bytes(2, "big")
        v6_payload_length = len(transport) + len(payload)
        ip = struct.pack(
            ">IHBB16s16s",
            0x60000000,
            v6_payload_length if v6_payload_length <= 0xFFFF else 0,
            proto,
            64,
            ipaddress.IPv6Address(p.src).packed,
            ipaddress.IPv6Address(p.dst).packed,
        )
    else:
        eth = bytes(6) + bytes(6) + _ETHERTYPE_IPV4.to_bytes(2, "big")
        total_length = 20 + len(transport) + len(payload)
        head = struct.pack(
            ">BBHHHBBH4s4s",
            0x45,
            0,
            total_length if total_length <= 0xFFFF else 0,
            p.packet_index & 0xFFFF,
            0x4000,
            64,
            proto,
            0,
            ipaddress.IPv4Address(p.src).packed,
            ipaddress.IPv4Address(p.dst).packed,
        )
        checksum = _ipv4_checksum(head)
        ip = head[:10] + checksum.to_bytes(2, "big") + head[12:]
    return eth + ip + transport + payload


def write_capture(path, payloads, endianness: str = "<", nanosecond: bool = False) -> Path:
    """Fixture writer: serialize CapturedPayloads back to the capture format
    with synthesized Ethernet/IP/transport framing, so that parse_capture of
    the result reproduces the payload sequence."""
    if endianness not in ("<", ">"):
        raise ValueError("endianness must be '<' or '>'")
    magic = next(m for m, (e, n) in _MAGIC.items() if e == endianness and n == nanosecond)
    frames = [_build_frame(p) for p in payloads]
    snaplen = max([65535] + [len(f) for f in frames])
    out = bytearray(magic)
    out += struct.pack(endianness + "HHiIII", 2, 4, 0, 0, snaplen, 1)
    for p, frame in zip(payloads, frames):
        ts_frac = p.ts_usec * 1000 if nanosecond else p.ts_usec
        out += struct.pack(endianness + "IIII", p.ts_sec, ts_frac, len(frame), len(frame))
        out += frame
    path = Path(path)
    path.write_bytes(bytes(out))
    return path
