"""TCP transport: length-prefixed frames over one connection per directed actor pair.

A transport owns one listening socket.  The first 8 bytes on every
connection name the sending and receiving actor slots; after that the
stream carries back-to-back frames.  Reader threads decode frames and hand
them to the scheduler through a queue, so actor state is still only ever
touched by the scheduler thread.
"""

from __future__ import annotations

import logging
import queue
import socket
import struct
import threading

from .codec import FrameReader, encode_frame
from .mem import Address

log = logging.getLogger(__name__)

_HELLO = struct.Struct(">II")


class TcpTransport:
    kind = "tcp"
    asynchronous = True

    def __init__(self, host: str = "127.0.0.1"):
        self.host = host
        self._listener = socket.create_server((host, 0))
        self.port = self._listener.getsockname()[1]
        self._incoming: queue.Queue = queue.Queue()
        self._conns: dict = {}  # (src_slot, dst address) -> socket
        self._lock = threading.Lock()
        self._in_flight = 0
        self._closed = False
        self._threads: list = []
        self.undeliverable = 0
        t = threading.Thread(target=self._accept_loop, name="choreo-tcp-accept", daemon=True)
        t.start()
        self._threads.append(t)

    def address(self, slot: int) -> Address:
        return Address("tcp", slot, self.host, self.port)

    # -------------------------------------------------------------- sending

    def _connection(self, src_slot: int, dst: Address) -> socket.socket:
        key = (src_slot, dst)
        conn = self._conns.get(key)
        if conn is None:
            conn = socket.create_connection((dst.host, dst.port))
            conn.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            conn.sendall(_HELLO.pack(src_slot, dst.slot))
            self._conns[key] = conn
        return conn

    def send(self, src_slot: int, dst: Address, msg) -> None:
        frame = encode_frame(msg)
        with self._lock:
            self._in_flight += 1
        try:
            self._connection(src_slot, dst).sendall(frame)
        except OSError as exc:
            with self._lock:
                self._in_flight -= 1
            self.undeliverable += 1
            log.warning("undeliverable frame from slot %d to %s: %s", src_slot, dst, exc)

    # ------------------------------------------------------------ receiving

    def _accept_loop(self) -> None:
        while not self._closed:
            try:
                conn, _ = self._listener.accept()
            except OSError:
                return
            t = threading.Thread(target=self._read_loop, args=(conn,), name="choreo-tcp-read",
                                 daemon=True)
            t.start()
            self._threads.append(t)

    def _read_exact(self, conn, n: int) -> bytes:
        buf = b""
        while len(buf) < n:
            chunk = conn.recv(n - len(buf))
            if not chunk:
                raise ConnectionError("connection closed during handshake")
            buf += chunk
        return buf

    def _read_loop(self, conn: socket.socket) -> None:
        try:
            src, dst = _HELLO.unpack(self._read_exact(conn, _HELLO.size))
            reader = FrameReader()
            seq = 0
            while True:
                data = conn.recv(65536)
                if not data:
                    return
                for msg in reader.feed(data):
                    seq += 1
                    self._incoming.put((src, dst, seq, msg))
        except (OSError, ConnectionError) as exc:
            if not self._closed:
                log.debug("tcp reader stopped: %s", exc)
        except Exception:  # malformed stream: drop the connection
            log.exception("dropping malformed tcp stream")
        finally:
            conn.close()

    def poll(self, timeout: float) -> list:
        """Return ``(src_slot, dst_slot, seq, msg)`` for frames received so far, waiting up to ``timeout``."""
        out = []
        try:
            out.append(self._incoming.get(timeout=timeout) if timeout > 0
                       else self._incoming.get_nowait())
        except queue.Empty:
            return out
        while True:
            try:
                out.append(self._incoming.get_nowait())
            except queue.Empty:
                break
        with self._lock:
            self._in_flight -= len(out)
        return out

    def in_flight(self) -> int:
        with self._lock:
            return self._in_flight

    def ready(self) -> list:
        return []

    def deliver(self, key):
        raise RuntimeError("tcp transport delivers through poll()")

    def close(self) -> None:
        self._closed = True
        for conn in self._conns.values():
            try:
                conn.close()
            except OSError:
                pass
        self._conns.clear()
        try:
            self._listener.close()
        except OSError:
            pass
