"""Framed channels between S0 and S1.

Wire frame (all integers big-endian)::

    magic 0x53 0x2B | version u8 | msg_type u8 | session_id u64 | payload_len u32 | payload

Ciphertext-carrying payloads are sequences of length-prefixed integers
(u32 length + minimal magnitude). Every endpoint counts bytes, frames and
ciphertexts so protocol communication can be audited exactly.
"""

from __future__ import annotations

import dataclasses
import itertools
import logging
import os
import queue
import socket
import struct
import threading
from collections import deque
from dataclasses import dataclass

from .codec import decode_bigints, encode_bigints, magnitude_sizes
from .errors import (
    ClosedChannelError,
    EndOfChannel,
    FrameDecodeError,
    HandshakeError,
    ProtocolError,
    RemoteError,
    TransportError,
)

logger = logging.getLogger(__name__)

MAGIC = b"\x53\x2b"
VERSION = 0x01
HEADER = struct.Struct("!2sBBQI")
HEADER_SIZE = HEADER.size
MAX_PAYLOAD = 1 << 24

SMUL_REQ = 0x01
SMUL_RESP = 0x02
SCMP_REQ = 0x03
SCMP_RESP = 0x04
ERROR = 0x0E
HELLO = 0x0F

CIPHERTEXT_TYPES = frozenset({SMUL_REQ, SMUL_RESP, SCMP_REQ, SCMP_RESP})

DEFAULT_ADDR = "127.0.0.1:7700"
ADDR_ENV = "SOCI_ADDR"


@dataclass(frozen=True)
class Frame:
    msg_type: int
    session_id: int
    payload: bytes = b""
    version: int = VERSION

    @classmethod
    def with_values(cls, msg_type: int, session_id: int, values) -> "Frame":
        return cls(msg_type, session_id, encode_bigints(values))

    @classmethod
    def error(cls, session_id: int, reason: str) -> "Frame":
        return cls(ERROR, session_id, reason.encode("utf-8"))

    def values(self) -> list[int]:
        return decode_bigints(self.payload, HEADER_SIZE)

    def reason(self) -> str:
        return self.payload.decode("utf-8", errors="replace")


def encode_frame(f: Frame) -> bytes:
    if len(f.payload) > MAX_PAYLOAD:
        raise ProtocolError(f"payload of {len(f.payload)} bytes exceeds {MAX_PAYLOAD}")
    if not 0 <= f.msg_type <= 0xFF or not 0 <= f.session_id < 1 << 64:
        raise ProtocolError("frame header field out of range")
    return HEADER.pack(MAGIC, f.version, f.msg_type, f.session_id, len(f.payload)) + f.payload


def decode_header(buf: bytes) -> tuple[int, int, int, int]:
    """Validate a 16-byte header; returns (version, msg_type, session_id, payload_len)."""
    if len(buf) < HEADER_SIZE:
        raise FrameDecodeError("truncated header", len(buf))
    magic, version, msg_type, session_id, length = HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise FrameDecodeError("bad magic", 0)
    if version != VERSION:
        raise FrameDecodeError(f"unknown version {version}", 2)
    if length > MAX_PAYLOAD:
        raise FrameDecodeError(f"payload length {length} exceeds limit", 12)
    return version, msg_type, session_id, length


def decode_frame(buf: bytes) -> Frame:
    version, msg_type, session_id, length = decode_header(buf)
    end = HEADER_SIZE + length
    if len(buf) < end:
        raise FrameDecodeError("truncated payload", len(buf))
    if len(buf) > end:
        raise FrameDecodeError("trailing bytes after frame", end)
    return Frame(msg_type, session_id, bytes(buf[HEADER_SIZE:end]), version)


@dataclass(frozen=True)
class ChannelStats:
    bytes_sent: int = 0
    bytes_received: int = 0
    frames_sent: int = 0
    frames_received: int = 0
    ciphertexts_sent: int = 0
    ciphertexts_received: int = 0
    ciphertext_bytes_sent: int = 0
    ciphertext_bytes_received: int = 0

    @property
    def ciphertexts(self) -> int:
        return self.ciphertexts_sent + self.ciphertexts_received

    @property
    def payload_bytes(self) -> int:
        """Ciphertext magnitude bytes in both directions, framing excluded."""
        return self.ciphertext_bytes_sent + self.ciphertext_bytes_received

    def __sub__(self, other: "ChannelStats") -> "ChannelStats":
        return ChannelStats(
            *(a - b for a, b in zip(dataclasses.astuple(self), dataclasses.astuple(other)))
        )

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


class Channel:
    """One endpoint of a bidirectional frame stream.

    ``recv`` can wait for a specific session: frames for other sessions that
    arrive meanwhile are parked and handed to whoever asks for them.
    """

    requires_hello = False

    def __init__(self) -> None:
        self._counters = dict.fromkeys(f.name for f in dataclasses.fields(ChannelStats))
        for k in self._counters:
            self._counters[k] = 0
        self._stats_lock = threading.Lock()
        self._send_lock = threading.Lock()
        self._cond = threading.Condition()
        self._pending: deque[Frame] = deque()
        self._reading = False
        self._eof = False
        self._closed = False
        self._session_ids = itertools.count(1)

    # subclass hooks
    def _write(self, data: bytes) -> None:
        raise NotImplementedError

    def _read_frame(self, timeout: float | None) -> tuple[Frame, int]:
        raise NotImplementedError

    def _shutdown(self) -> None:
        raise NotImplementedError

    @property
    def closed(self) -> bool:
        return self._closed

    def new_session_id(self) -> int:
        return next(self._session_ids)

    def _account(self, frame: Frame, size: int, direction: str) -> None:
        with self._stats_lock:
            c = self._counters
            c[f"bytes_{direction}"] += size
            c[f"frames_{direction}"] += 1
            if frame.msg_type in CIPHERTEXT_TYPES:
                sizes = magnitude_sizes(frame.payload)
                c[f"ciphertexts_{direction}"] += len(sizes)
                c[f"ciphertext_bytes_{direction}"] += sum(sizes)

    def stats(self) -> ChannelStats:
        with self._stats_lock:
            return ChannelStats(**self._counters)

    def send(self, frame: Frame) -> None:
        if self._closed:
            raise ClosedChannelError("send on closed channel")
        data = encode_frame(frame)
        with self._send_lock:
            self._write(data)
        self._account(frame, len(data), "sent")

    def recv(self, session_id: int | None = None, timeout: float | None = None) -> Frame:
        """Next frame, optionally the next one for ``session_id``."""
        if self._closed:
            raise ClosedChannelError("recv on closed channel")
        while True:
            with self._cond:
                while True:
                    for i, f in enumerate(self._pending):
                        if session_id is None or f.session_id == session_id:
                            del self._pending[i]
                            return f
                    if self._eof:
                        raise EndOfChannel("peer closed the channel")
                    if not self._reading:
                        break
                    if not self._cond.wait(timeout):
                        raise TransportError("timed out waiting for a frame")
                self._reading = True
            try:
                frame, size = self._read_frame(timeout)
            except BaseException as exc:
                with self._cond:
                    self._eof = self._eof or isinstance(exc, EndOfChannel)
                    self._reading = False
                    self._cond.notify_all()
                raise
            self._account(frame, size, "received")
            with self._cond:
                self._reading = False
                self._pending.append(frame)
                self._cond.notify_all()

    def exchange(self, frame: Frame, expect: int, timeout: float | None = None) -> Frame:
        """Send a request and wait for the matching reply on the same session."""
        self.send(frame)
        reply = self.recv(frame.session_id, timeout)
        if reply.msg_type == ERROR:
            raise RemoteError(reply.reason())
        if reply.msg_type != expect:
            raise ProtocolError(f"expected message 0x{expect:02x}, got 0x{reply.msg_type:02x}")
        return reply

    def close(self) -> None:
        if self._closed:
            return
        self._closed = True
        self._shutdown()

    def __enter__(self) -> "Channel":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def stats(ch: Channel) -> ChannelStats:
    return ch.stats()


class InMemoryChannel(Channel):
    def __init__(self, inbox: queue.Queue, outbox: queue.Queue) -> None:
        super().__init__()
        self._inbox = inbox
        self._outbox = outbox

    def _write(self, data: bytes) -> None:
        self._outbox.put(data)

    def _read_frame(self, timeout: float | None) -> tuple[Frame, int]:
        try:
            data = self._inbox.get(timeout=timeout)
        except queue.Empty:
            raise TransportError("timed out waiting for a frame") from None
        if data is None:
            self._inbox.put(None)
            raise EndOfChannel("peer closed the channel")
        return decode_frame(data), len(data)

    def inject_raw(self, data: bytes) -> None:
        """Put arbitrary bytes on the wire (for malformed-frame testing)."""
        self._outbox.put(data)

    def _shutdown(self) -> None:
        self._outbox.put(None)


def pair_inmemory() -> tuple[InMemoryChannel, InMemoryChannel]:
    a_to_b: queue.Queue = queue.Queue()
    b_to_a: queue.Queue = queue.Queue()
    return InMemoryChannel(b_to_a, a_to_b), InMemoryChannel(a_to_b, b_to_a)


class TcpChannel(Channel):
    requires_hello = True

    def __init__(self, sock: socket.socket) -> None:
        super().__init__()
        self._sock = sock
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.peer = sock.getpeername()

    def _write(self, data: bytes) -> None:
        try:
            self._sock.sendall(data)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _recv_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self._sock.recv(n - len(buf))
            except socket.timeout:
                raise TransportError("timed out waiting for a frame") from None
            except OSError as exc:
                if self._closed:
                    raise EndOfChannel("channel closed locally") from exc
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                if buf:
                    raise TransportError("connection closed mid-frame")
                raise EndOfChannel("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def _read_frame(self, timeout: float | None) -> tuple[Frame, int]:
        self._sock.settimeout(timeout)
        header = self._recv_exact(HEADER_SIZE)
        try:
            _, msg_type, session_id, length = decode_header(header)
        except FrameDecodeError as exc:
            # the byte stream cannot be resynchronised after a bad header
            self.close()
            if HEADER.unpack_from(header)[4] > MAX_PAYLOAD:
                raise ProtocolError(f"oversize frame: {exc}") from exc
            raise
        payload = self._recv_exact(length)
        return Frame(msg_type, session_id, payload), HEADER_SIZE + length

    def _shutdown(self) -> None:
        try:
            self._sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self._sock.close()


def parse_addr(addr: str | None) -> tuple[str, int]:
    addr = addr or os.environ.get(ADDR_ENV) or DEFAULT_ADDR
    host, sep, port = addr.rpartition(":")
    if not sep or not port.isdigit():
        raise TransportError(f"address must look like host:port, got {addr!r}")
    return host or "127.0.0.1", int(port)


def hello_frame(pk_digest: bytes) -> Frame:
    return Frame(HELLO, 0, bytes([VERSION]) + pk_digest)


class TcpAcceptor:
    def __init__(self, sock: socket.socket) -> None:
        self._sock = sock

    @property
    def address(self) -> tuple[str, int]:
        return self._sock.getsockname()[:2]

    def accept(self, pk_digest: bytes, timeout: float | None = None) -> TcpChannel:
        """Accept one connection and run the server side of the HELLO handshake."""
        self._sock.settimeout(timeout)
        try:
            sock, _ = self._sock.accept()
        except socket.timeout:
            raise TransportError("accept timed out") from None
        except OSError as exc:
            raise TransportError(f"accept failed: {exc}") from exc
        ch = TcpChannel(sock)
        try:
            first = ch.recv(timeout=10.0)
        except TransportError:
            ch.close()
            raise
        if first.msg_type != HELLO or first.payload != bytes([VERSION]) + pk_digest:
            reason = "handshake rejected: public key digest mismatch"
            if first.msg_type != HELLO:
                reason = "handshake rejected: expected HELLO"
            try:
                ch.send(Frame.error(first.session_id, reason))
            finally:
                ch.close()
            raise HandshakeError(reason)
        ch.send(hello_frame(pk_digest))
        return ch

    def close(self) -> None:
        self._sock.close()


def listen_tcp(addr: str | None = None) -> TcpAcceptor:
    host, port = parse_addr(addr)
    sock = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
    try:
        sock.bind((host, port))
    except OSError as exc:
        sock.close()
        raise TransportError(f"cannot bind {host}:{port}: {exc}") from exc
    sock.listen()
    return TcpAcceptor(sock)


def connect_tcp(addr: str | None, pk_digest: bytes, timeout: float | None = 10.0) -> TcpChannel:
    host, port = parse_addr(addr)
    try:
        sock = socket.create_connection((host, port), timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
    ch = TcpChannel(sock)
    ch.send(hello_frame(pk_digest))
    reply = ch.recv(0, timeout=timeout)
    if reply.msg_type == ERROR:
        ch.close()
        raise HandshakeError(reply.reason())
    if reply.msg_type != HELLO or reply.payload != bytes([VERSION]) + pk_digest:
        ch.close()
        raise HandshakeError("unexpected handshake reply")
    return ch
