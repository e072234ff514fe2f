"""Length-prefixed binary wire protocol between simulation roles.

Frames are ``u32 length, u8 message type, payload``; payloads reuse the
canonical record layout. Two interchangeable transports exist: an
in-process loopback for deterministic tests, and local TCP sockets when
the harness should measure real transfer times. Both report the elapsed
request-to-response time, which is what the attestation time bound
consumes.
"""

from __future__ import annotations

import socket
import socketserver
import struct
import threading
import time
from enum import IntEnum
from typing import Callable

from .cloud import AttestationBundle, CloudStore, Transition
from .control import MetaDataRow, SensorDataRow
from .core import DataState
from .encoding import EncodingError, Reader, u8, u32, u64, vbytes
from .errors import (
    DataExpiredError,
    DuplicateEpochError,
    ExpungeError,
    InconsistentRowsError,
    NotAuthorizedError,
    SealedBlockError,
    SignatureRejected,
    UnavailableError,
    WireError,
)
from .querylog import QueryLogger, QueryRecord, SealedBlock


class MessageType(IntEnum):
    INGEST = 1
    FETCH_SP = 2
    FETCH_BUNDLE = 3
    TICK = 4
    QUERY = 5
    AUDIT_FETCH = 6

    OK = 16
    ERROR = 17
    CIPHERTEXTS = 18
    BUNDLE = 19
    TRANSITIONS = 20
    BLOCK = 21


class ErrorCode(IntEnum):
    PROTOCOL = 1
    DUPLICATE = 2
    INCONSISTENT = 3
    UNAUTHORIZED = 4
    EXPIRED = 5
    UNAVAILABLE = 6
    REJECTED = 7
    SEALED = 8


_ERROR_CODES: list[tuple[type, ErrorCode]] = [
    (DuplicateEpochError, ErrorCode.DUPLICATE),
    (InconsistentRowsError, ErrorCode.INCONSISTENT),
    (NotAuthorizedError, ErrorCode.UNAUTHORIZED),
    (DataExpiredError, ErrorCode.EXPIRED),
    (UnavailableError, ErrorCode.UNAVAILABLE),
    (SignatureRejected, ErrorCode.REJECTED),
    (SealedBlockError, ErrorCode.SEALED),
]

_CODE_ERRORS = {
    ErrorCode.DUPLICATE: DuplicateEpochError,
    ErrorCode.INCONSISTENT: InconsistentRowsError,
    ErrorCode.UNAUTHORIZED: NotAuthorizedError,
    ErrorCode.EXPIRED: DataExpiredError,
    ErrorCode.UNAVAILABLE: UnavailableError,
    ErrorCode.REJECTED: SignatureRejected,
    ErrorCode.SEALED: SealedBlockError,
    ErrorCode.PROTOCOL: WireError,
}

Handler = Callable[[int, bytes], tuple[int, bytes]]


def error_payload(exc: Exception) -> tuple[int, bytes]:
    code = ErrorCode.PROTOCOL
    for exc_type, mapped in _ERROR_CODES:
        if isinstance(exc, exc_type):
            code = mapped
            break
    return MessageType.ERROR, u8(code) + vbytes(str(exc).encode())


def raise_for_error(msg_type: int, payload: bytes) -> None:
    if msg_type != MessageType.ERROR:
        return
    r = Reader(payload)
    code = ErrorCode(r.take_u8())
    message = r.take_vbytes().decode(errors="replace")
    raise _CODE_ERRORS[code](message)


class LoopbackTransport:
    """Direct handler invocation with the same timing interface as sockets."""

    def __init__(self, handler: Handler):
        self._handler = handler

    def request(self, msg_type: int, payload: bytes) -> tuple[int, bytes, float]:
        # Frame both directions so loopback pays the same serialization
        # cost a socket peer would.
        start = time.perf_counter()
        frame = u32(len(payload) + 1) + u8(msg_type) + payload
        resp_type, resp_payload = self._handler(frame[4], frame[5:])
        resp_frame = u32(len(resp_payload) + 1) + u8(resp_type) + resp_payload
        resp_payload = resp_frame[5:]
        elapsed = time.perf_counter() - start
        return resp_type, resp_payload, elapsed

    def close(self) -> None:
        pass


class _FrameServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    remaining = n
    while remaining:
        chunk = sock.recv(remaining)
        if not chunk:
            raise WireError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _read_frame(sock: socket.socket) -> tuple[int, bytes]:
    length = struct.unpack(">I", _recv_exact(sock, 4))[0]
    if length < 1:
        raise WireError("empty frame")
    body = _recv_exact(sock, length)
    return body[0], body[1:]


def _write_frame(sock: socket.socket, msg_type: int, payload: bytes) -> None:
    sock.sendall(u32(len(payload) + 1) + u8(msg_type) + payload)


def serve(handler: Handler, host: str = "127.0.0.1", port: int = 0) -> "_FrameServer":
    """Start a threaded frame server; ``server.server_address`` has the port."""

    class _RequestHandler(socketserver.BaseRequestHandler):
        def handle(self):
            try:
                while True:
                    msg_type, payload = _read_frame(self.request)
                    try:
                        resp_type, resp_payload = handler(msg_type, payload)
                    except Exception as exc:  # surface as a wire error frame
                        resp_type, resp_payload = error_payload(exc)
                    _write_frame(self.request, resp_type, resp_payload)
            except (WireError, ConnectionError, OSError):
                return

    server = _FrameServer((host, port), _RequestHandler)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server


class SocketTransport:
    """Persistent client connection to a frame server."""

    def __init__(self, host: str, port: int):
        self._sock = socket.create_connection((host, port))
        self._sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)

    def request(self, msg_type: int, payload: bytes) -> tuple[int, bytes, float]:
        start = time.perf_counter()
        _write_frame(self._sock, msg_type, payload)
        resp_type, resp_payload = _read_frame(self._sock)
        elapsed = time.perf_counter() - start
        return resp_type, resp_payload, elapsed

    def close(self) -> None:
        self._sock.close()


# -- cloud role --------------------------------------------------------------


class CloudService:
    """Message handler wrapping a :class:`CloudStore`."""

    def __init__(self, store: CloudStore):
        self.store = store

    def handle(self, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        try:
            if msg_type == MessageType.INGEST:
                r = Reader(payload)
                sensor_row = SensorDataRow.read_from(r)
                meta_row = MetaDataRow.read_from(r)
                r.finish()
                eid = self.store.ingest(sensor_row, meta_row)
                return MessageType.OK, u64(eid)
            if msg_type == MessageType.FETCH_SP:
                r = Reader(payload)
                epoch_id = r.take_u64()
                requester = r.take_vbytes()
                now = r.take_u64()
                r.finish()
                ciphertexts = self.store.fetch_for_sp(epoch_id, requester, now)
                body = [u32(len(ciphertexts))]
                body.extend(vbytes(ct) for ct in ciphertexts)
                return MessageType.CIPHERTEXTS, b"".join(body)
            if msg_type == MessageType.FETCH_BUNDLE:
                r = Reader(payload)
                at = r.take_u64()
                now = r.take_u64()
                r.finish()
                bundle = self.store.fetch_bundle(at, now)
                return MessageType.BUNDLE, bundle.to_bytes()
            if msg_type == MessageType.TICK:
                r = Reader(payload)
                now = r.take_u64()
                r.finish()
                transitions = self.store.tick(now)
                body = [u32(len(transitions))]
                for t in transitions:
                    body.append(u64(t.epoch_id))
                    body.append(u8(int(t.from_state)))
                    body.append(u8(int(t.to_state)))
                    body.append(u64(t.at))
                return MessageType.TRANSITIONS, b"".join(body)
            raise WireError(f"cloud cannot handle message type {msg_type}")
        except (ExpungeError, EncodingError) as exc:
            return error_payload(exc)

    # -- client-side helpers (shared by harness and CLI) ----------------------

    @staticmethod
    def ingest_via(transport, sensor_row: SensorDataRow, meta_row: MetaDataRow) -> int:
        resp_type, payload, _ = transport.request(
            MessageType.INGEST, sensor_row.to_bytes() + meta_row.to_bytes()
        )
        raise_for_error(resp_type, payload)
        return Reader(payload).take_u64()

    @staticmethod
    def fetch_sp_via(
        transport, epoch_id: int, requester: bytes, now: int
    ) -> tuple[tuple[bytes, ...], float]:
        resp_type, payload, elapsed = transport.request(
            MessageType.FETCH_SP, u64(epoch_id) + vbytes(requester) + u64(now)
        )
        raise_for_error(resp_type, payload)
        r = Reader(payload)
        cts = tuple(r.take_vbytes() for _ in range(r.take_u32()))
        r.finish()
        return cts, elapsed

    @staticmethod
    def fetch_bundle_via(transport, at: int, now: int) -> tuple[AttestationBundle, float]:
        resp_type, payload, elapsed = transport.request(
            MessageType.FETCH_BUNDLE, u64(at) + u64(now)
        )
        raise_for_error(resp_type, payload)
        return AttestationBundle.from_bytes(payload), elapsed

    @staticmethod
    def tick_via(transport, now: int) -> list[Transition]:
        resp_type, payload, _ = transport.request(MessageType.TICK, u64(now))
        raise_for_error(resp_type, payload)
        r = Reader(payload)
        out = []
        for _ in range(r.take_u32()):
            out.append(
                Transition(
                    epoch_id=r.take_u64(),
                    from_state=DataState(r.take_u8()),
                    to_state=DataState(r.take_u8()),
                    at=r.take_u64(),
                )
            )
        r.finish()
        return out


# -- service-provider role -----------------------------------------------------


class SpService:
    """Message handler for the provider-audited side of the SP."""

    def __init__(self, logger: QueryLogger):
        self.logger = logger

    def handle(self, msg_type: int, payload: bytes) -> tuple[int, bytes]:
        try:
            if msg_type == MessageType.QUERY:
                r = Reader(payload)
                record = QueryRecord.from_bytes(r.take_vbytes())
                now = r.take_u64()
                r.finish()
                self.logger.log(record, now)
                return MessageType.OK, b""
            if msg_type == MessageType.AUDIT_FETCH:
                r = Reader(payload)
                block_id = r.take_u64()
                r.finish()
                blocks = {b.block_id: b for b in self.logger.sealed_blocks}
                if block_id not in blocks:
                    raise UnavailableError(f"no sealed block {block_id}")
                prev = blocks.get(block_id - 1)
                body = [vbytes(blocks[block_id].to_bytes())]
                if prev is None:
                    body.append(u8(0))
                else:
                    body.append(u8(1))
                    body.append(prev.block_proof.to_bytes())
                return MessageType.BLOCK, b"".join(body)
            raise WireError(f"service provider cannot handle message type {msg_type}")
        except (ExpungeError, EncodingError) as exc:
            return error_payload(exc)

    @staticmethod
    def query_via(transport, record: QueryRecord, now: int) -> None:
        resp_type, payload, _ = transport.request(
            MessageType.QUERY, vbytes(record.to_bytes()) + u64(now)
        )
        raise_for_error(resp_type, payload)

    @staticmethod
    def audit_fetch_via(transport, block_id: int):
        """Returns (sealed block, previous block proof or None)."""
        from .accumulator import AccumulatorValue
        from . import encoding as enc

        resp_type, payload, _ = transport.request(MessageType.AUDIT_FETCH, u64(block_id))
        raise_for_error(resp_type, payload)
        r = Reader(payload)
        block = SealedBlock.from_bytes(r.take_vbytes())
        prev = None
        if r.take_u8() == 1:
            r.expect_header(enc.TYPE_ACC_VALUE)
            prev = AccumulatorValue(r.take_vint())
        r.finish()
        return block, prev
