"""Loopback TCP transport for the relay hop.

Wire frame: 4-byte big-endian length prefix followed by the envelope's
canonical JSON bytes. A node runs a listener that feeds its inbox; the
relay server accepts frames, looks up the recipient's listener address
and forwards the frame, answering the sender with a small JSON ack
frame. Senders treat a missing or negative ack as a failed attempt.
"""

import json
import socket
import socketserver
import threading

from .errors import GraphFormatError
from .relay import Envelope

FRAME_LIMIT = 16 * 1024 * 1024
_TIMEOUT = 5.0


def write_frame(sock: socket.socket, payload: bytes):
    if len(payload) > FRAME_LIMIT:
        raise ValueError("frame exceeds size limit")
    sock.sendall(len(payload).to_bytes(4, "big") + payload)


def read_frame(sock: socket.socket) -> bytes:
    header = _read_exact(sock, 4)
    length = int.from_bytes(header, "big")
    if length > FRAME_LIMIT:
        raise GraphFormatError("frame exceeds size limit")
    return _read_exact(sock, length)


def _read_exact(sock: socket.socket, count: int) -> bytes:
    chunks = []
    remaining = count
    while remaining > 0:
        chunk = sock.recv(remaining)
        if not chunk:
            raise ConnectionError("connection closed mid-frame")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


class _ThreadedServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True


class NodeListener:
    """Accepts envelope frames for one node and feeds its inbox."""

    def __init__(self, inbox, host: str = "127.0.0.1", port: int = 0):
        listener = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                self.request.settimeout(_TIMEOUT)
                try:
                    frame = read_frame(self.request)
                    envelope = Envelope.from_wire(frame)
                    listener.inbox.put(envelope)
                    write_frame(self.request, b'{"delivered": true}')
                except (ConnectionError, GraphFormatError, socket.timeout):
                    pass

        self.inbox = inbox
        self._server = _ThreadedServer((host, port), Handler)
        self.address = self._server.server_address
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="node-listener", daemon=True
        )

    def start(self):
        self._thread.start()
        return self

    def close(self):
        self._server.shutdown()
        self._server.server_close()


class RelayServer:
    """Forwards envelope frames to the recipient's listener address.

    Holds only node addresses and serialized envelopes, never key
    material, so it cannot observe payload plaintext. With capture
    enabled it retains every frame it handled (for the
    confidentiality tests).
    """

    def __init__(self, host: str = "127.0.0.1", port: int = 0, capture: bool = False):
        relay = self

        class Handler(socketserver.BaseRequestHandler):
            def handle(self):
                self.request.settimeout(_TIMEOUT)
                try:
                    frame = read_frame(self.request)
                except (ConnectionError, GraphFormatError, socket.timeout):
                    return
                if relay.capture:
                    with relay._lock:
                        relay.captured.append(frame)
                response = relay._forward(frame)
                try:
                    write_frame(self.request, response)
                except (ConnectionError, socket.timeout):
                    pass

        self.capture = capture
        self.captured = []
        self._routes = {}
        self._lock = threading.Lock()
        self._server = _ThreadedServer((host, port), Handler)
        self.address = self._server.server_address
        self._thread = threading.Thread(
            target=self._server.serve_forever, name="relay-server", daemon=True
        )

    def add_route(self, node_id: str, address):
        with self._lock:
            self._routes[node_id] = tuple(address)

    def remove_route(self, node_id: str):
        with self._lock:
            self._routes.pop(node_id, None)

    def _forward(self, frame: bytes) -> bytes:
        try:
            recipient = json.loads(frame.decode("ascii")).get("recipient")
        except (ValueError, UnicodeDecodeError):
            return b'{"delivered": false, "error": "bad_frame"}'
        with self._lock:
            address = self._routes.get(recipient)
        if address is None:
            return b'{"delivered": false, "error": "unknown_route"}'
        try:
            with socket.create_connection(address, timeout=_TIMEOUT) as sock:
                write_frame(sock, frame)
                ack = json.loads(read_frame(sock).decode("ascii"))
                delivered = bool(ack.get("delivered"))
        except (OSError, ValueError):
            return b'{"delivered": false, "error": "forward_failed"}'
        return (
            b'{"delivered": true}'
            if delivered
            else b'{"delivered": false, "error": "recipient_refused"}'
        )

    def start(self):
        self._thread.start()
        return self

    def close(self):
        self._server.shutdown()
        self._server.server_close()


class TcpTransport:
    """Router-facing transport that submits envelopes to a relay server."""

    def __init__(self, relay_address):
        self.relay_address = tuple(relay_address)

    def deliver(self, envelope: Envelope) -> bool:
        try:
            with socket.create_connection(self.relay_address, timeout=_TIMEOUT) as sock:
                write_frame(sock, envelope.to_wire())
                ack = json.loads(read_frame(sock).decode("ascii"))
                return bool(ack.get("delivered"))
        except (OSError, ValueError):
            return False
