"""Ordered, framed message transports: an in-process queue pair and TCP."""
from __future__ import annotations

import queue
import socket
import threading
from dataclasses import dataclass

from .wire import HEADER, Message, MessageType, WireError, decode_frame, decode_header

DEFAULT_TIMEOUT = 60.0


class TransportError(ConnectionError):
    pass


@dataclass(frozen=True)
class TranscriptEntry:
    direction: str  # "sent" | "recv"
    message: Message


class Transport:
    """One endpoint of a classical channel.  Every message is transcribed."""

    def __init__(self, name: str = ""):
        self.name = name
        self.transcript: list[TranscriptEntry] = []
        self.timeout = DEFAULT_TIMEOUT

    def send(self, msg: Message) -> None:
        self._send_frame(msg.encode())
        self.transcript.append(TranscriptEntry("sent", msg))

    def recv(self, timeout: float | None = None) -> Message:
        msg = self._recv_message(self.timeout if timeout is None else timeout)
        self.transcript.append(TranscriptEntry("recv", msg))
        return msg

    def expect(self, mtype: MessageType, timeout: float | None = None) -> Message:
        msg = self.recv(timeout)
        if msg.type is not mtype and msg.type is not MessageType.ABORT:
            raise TransportError(f"expected {mtype.name}, got {msg.type.name}")
        return msg

    def close(self) -> None:
        pass

    def _send_frame(self, frame: bytes) -> None:
        raise NotImplementedError

    def _recv_message(self, timeout: float) -> Message:
        raise NotImplementedError

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


_CLOSED = object()


class InProcTransport(Transport):
    def __init__(self, outbox: queue.Queue, inbox: queue.Queue, name: str = ""):
        super().__init__(name)
        self._out = outbox
        self._in = inbox
        self._closed = False

    @classmethod
    def pair(cls) -> tuple["InProcTransport", "InProcTransport"]:
        a, b = queue.Queue(), queue.Queue()
        return cls(a, b, "alice"), cls(b, a, "bob")

    def _send_frame(self, frame):
        if self._closed:
            raise TransportError("transport closed")
        self._out.put(frame)

    def _recv_message(self, timeout):
        try:
            frame = self._in.get(timeout=timeout)
        except queue.Empty:
            raise TransportError(f"no message within {timeout} s") from None
        if frame is _CLOSED:
            raise TransportError("peer closed the channel")
        return decode_frame(frame)

    def close(self):
        if not self._closed:
            self._closed = True
            self._out.put(_CLOSED)


class TcpTransport(Transport):
    def __init__(self, sock: socket.socket, name: str = ""):
        super().__init__(name)
        sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        self.sock = sock

    @classmethod
    def connect(cls, host: str, port: int, timeout: float = DEFAULT_TIMEOUT, name: str = "") -> "TcpTransport":
        try:
            sock = socket.create_connection((host, port), timeout=timeout)
        except OSError as exc:
            raise TransportError(f"cannot connect to {host}:{port}: {exc}") from exc
        return cls(sock, name)

    def _send_frame(self, frame):
        try:
            self.sock.sendall(frame)
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def _read_exact(self, n: int) -> bytes:
        buf = bytearray()
        while len(buf) < n:
            try:
                chunk = self.sock.recv(n - len(buf))
            except socket.timeout:
                raise TransportError("receive timed out") from None
            except OSError as exc:
                raise TransportError(f"receive failed: {exc}") from exc
            if not chunk:
                raise TransportError("peer closed the connection")
            buf += chunk
        return bytes(buf)

    def _recv_message(self, timeout):
        self.sock.settimeout(timeout)
        try:
            length, mtype = decode_header(self._read_exact(HEADER.size))
        except WireError as exc:
            raise TransportError(str(exc)) from exc
        return Message(mtype, self._read_exact(length))

    def close(self):
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        self.sock.close()


class TcpListener:
    """Accepts a single peer; ``port=0`` picks a free port."""

    def __init__(self, host: str = "127.0.0.1", port: int = 0):
        self.sock = socket.create_server((host, port))
        self.host, self.port = self.sock.getsockname()[:2]

    def accept(self, timeout: float = DEFAULT_TIMEOUT, name: str = "") -> TcpTransport:
        self.sock.settimeout(timeout)
        try:
            conn, _ = self.sock.accept()
        except socket.timeout:
            raise TransportError(f"no peer connected within {timeout} s") from None
        finally:
            self.sock.close()
        return TcpTransport(conn, name)


def tcp_pair(host: str = "127.0.0.1", port: int = 0) -> tuple[TcpTransport, TcpTransport]:
    """Connected (alice, bob) endpoints over a loopback TCP stream."""
    listener = TcpListener(host, port)
    box: dict = {}

    def _accept():
        try:
            box["alice"] = listener.accept(name="alice")
        except TransportError as exc:
            box["error"] = exc

    t = threading.Thread(target=_accept, daemon=True)
    t.start()
    bob = TcpTransport.connect(listener.host, listener.port, name="bob")
    t.join()
    if "error" in box:
        bob.close()
        raise box["error"]
    return box["alice"], bob
