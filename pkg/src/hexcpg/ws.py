"""Server-side WebSocket framing (RFC 6455), enough for the control panel.

The live service speaks newline-delimited JSON on a plain stream
socket; browser clients reach the same port and are detected by their
HTTP upgrade request. Only text frames are needed; client frames are
masked per the RFC, server frames are not. No fragmentation support
(panel messages are single frames well under the limit).
"""

from __future__ import annotations

import base64
import hashlib
import struct

_GUID = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11"

OP_TEXT = 0x1
OP_CLOSE = 0x8
OP_PING = 0x9
OP_PONG = 0xA


def accept_key(client_key: str) -> str:
    digest = hashlib.sha1((client_key + _GUID).encode()).digest()
    return base64.b64encode(digest).decode()


def complete_handshake(sock, initial: bytes) -> bool:
    """Finish the HTTP upgrade whose first bytes were already read.

    Returns True on success; on a malformed request a 400 is sent and
    the caller should close the connection.
    """
    data = initial
    while b"\r\n\r\n" not in data:
        chunk = sock.recv(4096)
        if not chunk:
            return False
        data += chunk
        if len(data) > 65536:
            return False
    head = data.split(b"\r\n\r\n", 1)[0].decode("latin-1")
    headers = {}
    for line in head.split("\r\n")[1:]:
        if ":" in line:
            name, value = line.split(":", 1)
            headers[name.strip().lower()] = value.strip()
    key = headers.get("sec-websocket-key")
    if not key or "websocket" not in headers.get("upgrade", "").lower():
        sock.sendall(b"HTTP/1.1 400 Bad Request\r\nConnection: close\r\n\r\n")
        return False
    response = (
        "HTTP/1.1 101 Switching Protocols\r\n"
        "Upgrade: websocket\r\n"
        "Connection: Upgrade\r\n"
        f"Sec-WebSocket-Accept: {accept_key(key)}\r\n"
        "\r\n"
    )
    sock.sendall(response.encode())
    return True


def encode_frame(payload: bytes, opcode: int = OP_TEXT) -> bytes:
    header = bytearray([0x80 | opcode])
    n = len(payload)
    if n < 126:
        header.append(n)
    elif n < 1 << 16:
        header.append(126)
        header += struct.pack(">H", n)
    else:
        header.append(127)
        header += struct.pack(">Q", n)
    return bytes(header) + payload


class FrameReader:
    """Reads client frames; answers pings, surfaces text payloads."""

    def __init__(self, sock):
        self._sock = sock
        self._buf = b""

    def _read_exact(self, n: int) -> bytes | None:
        while len(self._buf) < n:
            chunk = self._sock.recv(4096)
            if not chunk:
                return None
            self._buf += chunk
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def read_text(self) -> str | None:
        """Next text payload, or None when the peer closes."""
        while True:
            head = self._read_exact(2)
            if head is None:
                return None
            opcode = head[0] & 0x0F
            masked = bool(head[1] & 0x80)
            length = head[1] & 0x7F
            if length == 126:
                ext = self._read_exact(2)
                if ext is None:
                    return None
                length = struct.unpack(">H", ext)[0]
            elif length == 127:
                ext = self._read_exact(8)
                if ext is None:
                    return None
                length = struct.unpack(">Q", ext)[0]
            mask = b"\x00" * 4
            if masked:
                mask = self._read_exact(4)
                if mask is None:
                    return None
            payload = self._read_exact(length) if length else b""
            if payload is None:
                return None
            if masked:
                payload = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
            if opcode == OP_TEXT:
                return payload.decode("utf-8", errors="replace")
            if opcode == OP_PING:
                self._sock.sendall(encode_frame(payload, OP_PONG))
                continue
            if opcode == OP_CLOSE:
                try:
                    self._sock.sendall(encode_frame(b"", OP_CLOSE))
                except OSError:
                    pass
                return None
            # pong / continuation / binary: ignored
