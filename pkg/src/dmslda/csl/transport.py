"""Request/reply links between the master and its workers.

A link sends one encoded message body and returns the encoded reply. The
in-memory link hands bytes to a :class:`Worker` in the same process; the
TCP link frames each body with an 8-byte big-endian length after a
``b"DMSL" + version`` handshake. Both carry identical bodies, so byte
accounting does not depend on the transport.
"""

from __future__ import annotations

import logging
import socket
from typing import Protocol

from ..core import TransportFailure
from . import wire
from .worker import Worker

logger = logging.getLogger(__name__)

HANDSHAKE = wire.MAGIC + bytes([wire.VERSION])
MAX_FRAME = 1 << 34


class Link(Protocol):
    name: str

    def request(self, body: bytes) -> bytes: ...

    def close(self) -> None: ...


class InMemoryLink:
    def __init__(self, worker: Worker):
        self.worker = worker
        self.name = f"memory:{worker.name}"

    def request(self, body: bytes) -> bytes:
        try:
            return self.worker.handle(bytes(body))
        except TransportFailure:
            raise
        except Exception as exc:
            raise TransportFailure(f"worker raised {exc!r}", peer=self.name) from exc

    def close(self) -> None:
        pass


def in_memory_transport(worker: Worker) -> InMemoryLink:
    return InMemoryLink(worker)


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    chunks = []
    while n:
        chunk = sock.recv(min(n, 1 << 20))
        if not chunk:
            raise ConnectionError("connection closed mid-message")
        chunks.append(chunk)
        n -= len(chunk)
    return b"".join(chunks)


def send_frame(sock: socket.socket, body: bytes) -> None:
    sock.sendall(wire.FRAME.pack(len(body)) + body)


def recv_frame(sock: socket.socket) -> bytes:
    (length,) = wire.FRAME.unpack(_recv_exact(sock, wire.FRAME.size))
    if length > MAX_FRAME:
        raise TransportFailure(f"frame of {length} bytes exceeds limit")
    return _recv_exact(sock, length)


def parse_address(address: str | tuple[str, int]) -> tuple[str, int]:
    if isinstance(address, tuple):
        return address
    host, _, port = address.rpartition(":")
    if not host or not port.isdigit():
        raise ValueError(f"expected host:port, got {address!r}")
    return host, int(port)


class TcpLink:
    def __init__(self, address: str | tuple[str, int], timeout: float | None = 60.0):
        self.address = parse_address(address)
        self.name = "tcp:%s:%d" % self.address
        try:
            self.sock = socket.create_connection(self.address, timeout=timeout)
            self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            self.sock.sendall(HANDSHAKE)
            reply = _recv_exact(self.sock, len(HANDSHAKE))
        except OSError as exc:
            raise TransportFailure(f"cannot connect: {exc}", peer=self.name) from exc
        if reply != HANDSHAKE:
            self.sock.close()
            raise TransportFailure(f"bad handshake {reply!r}", peer=self.name)

    def request(self, body: bytes) -> bytes:
        try:
            send_frame(self.sock, body)
            return recv_frame(self.sock)
        except OSError as exc:
            raise TransportFailure(f"{exc}", peer=self.name) from exc

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


def tcp_transport(address: str | tuple[str, int], timeout: float | None = 60.0) -> TcpLink:
    return TcpLink(address, timeout)


def _serve_connection(conn: socket.socket, worker: Worker) -> None:
    conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
    hello = _recv_exact(conn, len(HANDSHAKE))
    if hello != HANDSHAKE:
        logger.warning("rejecting peer with handshake %r", hello)
        return
    conn.sendall(HANDSHAKE)
    while True:
        try:
            body = recv_frame(conn)
        except ConnectionError:
            return
        send_frame(conn, worker.handle(body))


def serve(worker: Worker, listener: socket.socket, persistent: bool = False) -> None:
    """Answer requests on ``listener``.

    Connections are served one at a time; without ``persistent`` the
    function returns once the first master disconnects.
    """
    while True:
        conn, peer = listener.accept()
        logger.info("%s: master connected from %s", worker.name, peer)
        with conn:
            try:
                _serve_connection(conn, worker)
            except Exception as exc:
                # dropping the connection surfaces as TransportFailure on the master
                logger.warning("%s: session aborted: %s", worker.name, exc)
        if not persistent:
            return


def listen(address: str | tuple[str, int]) -> socket.socket:
    host, port = parse_address(address)
    return socket.create_server((host, port))
