"""Two-party transport: tagged length-prefixed frames over a stream socket
or an in-process channel, with per-phase bandwidth metering.

Wire format: version byte once at connect, then frames of
tag (1 byte) || length (4 bytes, big-endian) || payload.
Integers are big-endian throughout.
"""
from __future__ import annotations

import queue
import socket
import struct
import threading
import time
from dataclasses import dataclass, field

PROTOCOL_VERSION = 1
MAX_FRAME_PAYLOAD = 64 * 1024 * 1024  # fail fast on runaway configs

# Registered frame tags.
TAGS = {
    "HELLO": 0x01,
    "KEYX": 0x02,
    "SETUP_H": 0x10,
    "SETUP_D": 0x11,
    "SETUP_BLINDED": 0x12,
    "SETUP_RETURN": 0x13,
    "SETUP_XLINK": 0x14,
    "GC_TABLES": 0x20,
    "GC_LABELS": 0x21,
    "GC_OUTPUT": 0x22,
    "OT_MSG1": 0x30,
    "OT_MSG2": 0x31,
    "OT_MSG3": 0x32,
    "OUT_SUMS": 0x40,
    "OUT_PLAINS": 0x41,
    "REP_LIST": 0x50,
}
TAG_NAMES = {v: k for k, v in TAGS.items()}


class TransportError(RuntimeError):
    pass


class ConfigMismatchError(TransportError):
    pass


class FrameTooLargeError(TransportError):
    pass


@dataclass
class Frame:
    tag: int
    payload: bytes

    @property
    def wire_size(self) -> int:
        return 5 + len(self.payload)


class BandwidthMeter:
    """Monotone per-tag / per-phase byte counters, safe to read concurrently."""

    def __init__(self):
        self._lock = threading.Lock()
        self._sent: dict[tuple[str, str], int] = {}
        self._received: dict[tuple[str, str], int] = {}
        self.phase = "default"

    def set_phase(self, phase: str) -> None:
        with self._lock:
            self.phase = phase

    def record(self, direction: str, tag: int, nbytes: int) -> None:
        name = TAG_NAMES.get(tag, f"0x{tag:02x}")
        book = self._sent if direction == "sent" else self._received
        with self._lock:
            key = (self.phase, name)
            book[key] = book.get(key, 0) + nbytes

    def total(self, direction: str = "sent") -> int:
        book = self._sent if direction == "sent" else self._received
        with self._lock:
            return sum(book.values())

    def by_tag(self, direction: str = "sent") -> dict[str, int]:
        book = self._sent if direction == "sent" else self._received
        out: dict[str, int] = {}
        with self._lock:
            for (_, tag), n in book.items():
                out[tag] = out.get(tag, 0) + n
        return out

    def by_phase(self, direction: str = "sent") -> dict[str, dict[str, int]]:
        book = self._sent if direction == "sent" else self._received
        out: dict[str, dict[str, int]] = {}
        with self._lock:
            for (phase, tag), n in book.items():
                out.setdefault(phase, {})[tag] = n
        return out

    def report(self) -> dict:
        """Machine-readable phase -> {tag: bytes} plus totals."""
        return {
            "sent": {
                "total": self.total("sent"),
                "by_phase": self.by_phase("sent"),
            },
            "received": {
                "total": self.total("received"),
                "by_phase": self.by_phase("received"),
            },
        }


def format_report(meter: BandwidthMeter) -> str:
    rep = meter.report()
    lines = []
    for direction in ("sent", "received"):
        lines.append(f"{direction:>9}: {rep[direction]['total']} bytes")
        for phase, tags in sorted(rep[direction]["by_phase"].items()):
            for tag, n in sorted(tags.items()):
                lines.append(f"{'':>11}{phase:<12} {tag:<14} {n}")
    return "\n".join(lines)


class _ByteStream:
    """Blocking FIFO byte pipe used by the in-process channel."""

    def __init__(self):
        self._q: queue.Queue[bytes] = queue.Queue()
        self._pending = b""
        self._closed = False

    def write(self, data: bytes) -> None:
        self._q.put(bytes(data))

    def close(self) -> None:
        self._q.put(b"")

    def read_exact(self, n: int, timeout: float | None) -> bytes:
        while len(self._pending) < n:
            if self._closed:
                raise TransportError("peer closed")
            try:
                chunk = self._q.get(timeout=timeout)
            except queue.Empty:
                raise TransportError("receive timeout") from None
            if chunk == b"":
                self._closed = True
                raise TransportError("peer closed")
            self._pending += chunk
        out, self._pending = self._pending[:n], self._pending[n:]
        return out


class Session:
    """One party's endpoint of a two-party connection.

    Strictly alternating blocking send/recv of frames; every frame updates
    the bandwidth meter.
    """

    def __init__(self, reader, writer, closer=None):
        self._read_exact = reader
        self._write = writer
        self._closer = closer
        self.meter = BandwidthMeter()
        self.timeout: float | None = 120.0
        self.transcript: list[tuple[str, str, int]] | None = None

    def enable_transcript(self) -> None:
        self.transcript = []

    def handshake(self, config_hash: bytes) -> None:
        if len(config_hash) != 32:
            raise ValueError("config hash must be 32 bytes")
        self._write(bytes([PROTOCOL_VERSION]))
        self.send_frame(TAGS["HELLO"], config_hash)
        peer_version = self._read_exact(1, self.timeout)[0]
        if peer_version != PROTOCOL_VERSION:
            raise ConfigMismatchError(
                f"peer protocol version {peer_version} != {PROTOCOL_VERSION}"
            )
        frame = self.recv_frame()
        if frame.tag != TAGS["HELLO"]:
            raise TransportError("handshake frame missing")
        if frame.payload != config_hash:
            raise ConfigMismatchError("peer configuration hash differs")

    def send_frame(self, tag: int, payload: bytes) -> None:
        if tag not in TAG_NAMES:
            raise ValueError(f"unregistered tag 0x{tag:02x}")
        if len(payload) > MAX_FRAME_PAYLOAD:
            raise FrameTooLargeError(
                f"{len(payload)} byte payload exceeds {MAX_FRAME_PAYLOAD}"
            )
        header = struct.pack(">BI", tag, len(payload))
        self._write(header + payload)
        self.meter.record("sent", tag, 5 + len(payload))
        if self.transcript is not None:
            self.transcript.append(("sent", TAG_NAMES[tag], len(payload)))

    def recv_frame(self, expect: int | None = None) -> Frame:
        header = self._read_exact(5, self.timeout)
        tag, length = struct.unpack(">BI", header)
        if tag not in TAG_NAMES:
            raise TransportError(f"unregistered tag 0x{tag:02x} on the wire")
        if length > MAX_FRAME_PAYLOAD:
            raise FrameTooLargeError(f"incoming frame of {length} bytes")
        payload = self._read_exact(length, self.timeout) if length else b""
        self.meter.record("received", tag, 5 + length)
        if self.transcript is not None:
            self.transcript.append(("received", TAG_NAMES[tag], length))
        if expect is not None and tag != expect:
            raise TransportError(
                f"protocol desync: expected {TAG_NAMES[expect]}, got {TAG_NAMES[tag]}"
            )
        return Frame(tag, payload)

    def send_chunked(self, tag: int, payload: bytes,
                     chunk: int = MAX_FRAME_PAYLOAD - 16) -> None:
        """Split a large payload over several frames: u32 count, then parts."""
        parts = [payload[i:i + chunk] for i in range(0, len(payload), chunk)] or [b""]
        self.send_frame(tag, struct.pack(">I", len(parts)))
        for part in parts:
            self.send_frame(tag, part)

    def recv_chunked(self, tag: int) -> bytes:
        head = self.recv_frame(expect=tag)
        (count,) = struct.unpack(">I", head.payload)
        return b"".join(self.recv_frame(expect=tag).payload for _ in range(count))

    def close(self) -> None:
        if self._closer:
            self._closer()


def channel_pair() -> tuple[Session, Session]:
    """In-process duplex channel; behaves like the socket transport."""
    ab, ba = _ByteStream(), _ByteStream()
    a = Session(ab.read_exact, ba.write, ba.close)
    b = Session(ba.read_exact, ab.write, ab.close)
    return a, b


def _sock_session(conn: socket.socket) -> Session:
    def read_exact(n: int, timeout: float | None) -> bytes:
        conn.settimeout(timeout)
        buf = b""
        while len(buf) < n:
            chunk = conn.recv(min(n - len(buf), 1 << 20))
            if not chunk:
                raise TransportError("peer closed")
            buf += chunk
        return buf

    return Session(read_exact, conn.sendall, conn.close)


def connect(role: str, endpoint: tuple[str, int],
            config_hash: bytes, timeout: float = 30.0) -> Session:
    """Open a TCP session as 'listener' or 'dialer' and run the handshake."""
    if role == "listener":
        srv = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        srv.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        srv.bind(endpoint)
        srv.listen(1)
        srv.settimeout(timeout)
        conn, _ = srv.accept()
        srv.close()
    elif role == "dialer":
        deadline = time.monotonic() + timeout
        while True:
            try:
                conn = socket.create_connection(endpoint, timeout=timeout)
                break
            except OSError:
                if time.monotonic() >= deadline:
                    raise
                time.sleep(0.05)
    else:
        raise ValueError("role must be 'listener' or 'dialer'")
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    session = _sock_session(conn)
    session.handshake(config_hash)
    return session
