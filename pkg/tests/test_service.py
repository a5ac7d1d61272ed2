"""Live service: protocol, broadcast ordering, commands, resets.

Runs at time_scale_factor=2 (2 ms per tick) so convergence and
classification happen quickly; the factor-100 pacing bound is measured
in the acceptance suite.
"""

import base64
import json
import os
import socket
import struct
import time

import pytest

from hexcpg.service import Service, ServiceConfig


class LineClient:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.buf = b""

    def send(self, message: dict) -> None:
        self.sock.sendall(json.dumps(message).encode() + b"\n")

    def send_raw(self, data: bytes) -> None:
        self.sock.sendall(data)

    def recv(self, timeout=10.0) -> dict:
        self.sock.settimeout(timeout)
        while b"\n" not in self.buf:
            chunk = self.sock.recv(65536)
            if not chunk:
                raise ConnectionError("server closed")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return json.loads(line)

    def recv_until(self, predicate, timeout=15.0) -> dict:
        deadline = time.time() + timeout
        while time.time() < deadline:
            msg = self.recv(timeout=max(0.1, deadline - time.time()))
            if predicate(msg):
                return msg
        raise TimeoutError("no matching message")

    def close(self):
        self.sock.close()


@pytest.fixture()
def service():
    svc = Service(ServiceConfig(port=0, time_scale_factor=2))
    svc.start()
    yield svc
    svc.stop()


def test_snapshot_on_connect_fresh_state(service):
    client = LineClient(service.port)
    snap = client.recv()
    assert snap["type"] == "snapshot"
    assert snap["gait"] is None          # no stimulus yet
    assert snap["commanded_gait"] == 0
    assert snap["pose"]["body_xy"] == [0.0, 0.0]
    assert all(snap["pose"]["contacts"])  # standing at home
    assert snap["pose"]["t_sim_ms"] == snap["tick"]  # consistent snapshot
    assert snap["scale"] == 2
    client.close()


def test_set_gait_ack_and_classification(service):
    client = LineClient(service.port)
    snap = client.recv()
    client.send({"type": "set_gait", "gait": 2})
    ack = client.recv_until(lambda m: m["type"] == "ack")
    assert ack["cmd"] == "set_gait" and ack["gait"] == 2 and ack["ok"]
    assert ack["tick"] >= snap["tick"]
    classified = client.recv_until(
        lambda m: m["type"] == "metrics" and m["gait"] == 2
    )
    # classification settles within the convergence bound plus one
    # classification window plus a metrics interval
    assert classified["tick"] - ack["tick"] <= 50 + 24 + 25
    conv = client.recv_until(
        lambda m: m["type"] == "metrics" and m["convergence"] is not None
    )
    assert conv["convergence"]["target"] == "run"
    assert conv["convergence"]["ticks"] <= 50
    assert not conv["convergence"]["saturated"]
    assert conv["convergence"]["reference_ms"] == 23
    client.close()


def test_unknown_command_gets_error_and_connection_survives(service):
    client = LineClient(service.port)
    client.recv()
    client.send({"type": "levitate"})
    err = client.recv_until(lambda m: m["type"] == "error")
    assert err["seq"] is None
    assert "unknown" in err["message"]
    client.send({"type": "button_up"})
    ack = client.recv_until(lambda m: m["type"] == "ack")
    assert ack["cmd"] == "button_up"
    client.close()


def test_malformed_json_answered_not_fatal(service):
    client = LineClient(service.port)
    client.recv()
    client.send_raw(b"{nope\n")
    err = client.recv_until(lambda m: m["type"] == "error")
    assert "bad json" in err["message"]
    client.send({"type": "set_gait", "gait": 0})
    client.recv_until(lambda m: m["type"] == "ack")
    client.close()


def test_set_gait_payload_validated(service):
    client = LineClient(service.port)
    client.recv()
    client.send({"type": "set_gait", "gait": 7})
    err = client.recv_until(lambda m: m["type"] == "error")
    assert "set_gait" in err["message"]
    client.close()


def test_two_clients_observe_identical_streams(service):
    a = LineClient(service.port)
    b = LineClient(service.port)
    snap_a, snap_b = a.recv(), b.recv()
    assert snap_a["type"] == snap_b["type"] == "snapshot"
    a.send({"type": "set_gait", "gait": 1})
    stream_a = [a.recv() for _ in range(30)]
    stream_b = [b.recv() for _ in range(30)]
    # both start right after their snapshot; align on common seqs
    start = max(stream_a[0]["seq"], stream_b[0]["seq"])
    end = min(stream_a[-1]["seq"], stream_b[-1]["seq"])
    common_a = [m for m in stream_a if start <= m["seq"] <= end]
    common_b = [m for m in stream_b if start <= m["seq"] <= end]
    assert common_a == common_b
    a.close()
    b.close()


def test_sequence_numbers_gap_free(service):
    client = LineClient(service.port)
    first = client.recv()
    seqs = [first["seq"]]
    client.send({"type": "set_gait", "gait": 2})
    for _ in range(40):
        seqs.append(client.recv()["seq"])
    assert seqs == list(range(seqs[0], seqs[0] + len(seqs)))
    client.close()


def test_command_applies_at_next_tick_boundary(service):
    client = LineClient(service.port)
    client.recv()
    latest = client.recv_until(lambda m: "tick" in m)
    client.send({"type": "button_up"})
    ack = client.recv_until(lambda m: m["type"] == "ack")
    # effect tick is the first boundary after receipt; allow transport slack
    assert 0 <= ack["tick"] - latest["tick"] <= 5


def test_reset_rebuilds_and_bumps_epoch(service):
    client = LineClient(service.port)
    snap = client.recv()
    client.send({"type": "set_gait", "gait": 2})
    client.recv_until(lambda m: m["type"] == "metrics" and m["gait"] == 2)
    client.send({"type": "reset"})
    fresh = client.recv_until(lambda m: m["type"] == "snapshot")
    assert fresh["epoch"] == snap["epoch"] + 1
    assert fresh["gait"] is None
    assert fresh["commanded_gait"] == 0
    assert fresh["pose"]["body_xy"] == [0.0, 0.0]
    client.close()


def test_set_scale(service):
    client = LineClient(service.port)
    client.recv()
    client.send({"type": "set_scale", "factor": 0})
    err = client.recv_until(lambda m: m["type"] == "error")
    assert "factor" in err["message"]
    client.send({"type": "set_scale", "factor": 3})
    ack = client.recv_until(lambda m: m["type"] == "ack" and m["cmd"] == "set_scale")
    assert ack["factor"] == 3
    client.close()


def test_bind_env_override(monkeypatch):
    monkeypatch.setenv("HEXCPG_BIND", "0.0.0.0")
    cfg = ServiceConfig(port=0)
    assert cfg.host == "0.0.0.0"


# -- websocket path ---------------------------------------------------------------


class WsClient:
    def __init__(self, port):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        key = base64.b64encode(os.urandom(16)).decode()
        self.sock.sendall(
            (
                f"GET / HTTP/1.1\r\nHost: test\r\nUpgrade: websocket\r\n"
                f"Connection: Upgrade\r\nSec-WebSocket-Key: {key}\r\n"
                f"Sec-WebSocket-Version: 13\r\n\r\n"
            ).encode()
        )
        resp = b""
        while b"\r\n\r\n" not in resp:
            resp += self.sock.recv(4096)
        status = resp.split(b"\r\n", 1)[0]
        assert b"101" in status, status
        self.buf = resp.split(b"\r\n\r\n", 1)[1]

    def send(self, message: dict) -> None:
        payload = json.dumps(message).encode()
        mask = os.urandom(4)
        masked = bytes(b ^ mask[i % 4] for i, b in enumerate(payload))
        header = bytearray([0x81])
        if len(payload) < 126:
            header.append(0x80 | len(payload))
        else:
            header.append(0x80 | 126)
            header += struct.pack(">H", len(payload))
        self.sock.sendall(bytes(header) + mask + masked)

    def recv(self, timeout=10.0) -> dict:
        self.sock.settimeout(timeout)
        while True:
            while len(self.buf) < 2:
                self.buf += self.sock.recv(65536)
            length = self.buf[1] & 0x7F
            offset = 2
            if length == 126:
                while len(self.buf) < 4:
                    self.buf += self.sock.recv(65536)
                length = struct.unpack(">H", self.buf[2:4])[0]
                offset = 4
            elif length == 127:
                while len(self.buf) < 10:
                    self.buf += self.sock.recv(65536)
                length = struct.unpack(">Q", self.buf[2:10])[0]
                offset = 10
            while len(self.buf) < offset + length:
                self.buf += self.sock.recv(65536)
            payload = self.buf[offset:offset + length]
            self.buf = self.buf[offset + length:]
            return json.loads(payload)

    def recv_until(self, predicate, timeout=15.0) -> dict:
        deadline = time.time() + timeout
        while time.time() < deadline:
            msg = self.recv(timeout=max(0.1, deadline - time.time()))
            if predicate(msg):
                return msg
        raise TimeoutError("no matching message")

    def close(self):
        self.sock.close()


def test_websocket_upgrade_snapshot_and_command(service):
    client = WsClient(service.port)
    snap = client.recv()
    assert snap["type"] == "snapshot"
    client.send({"type": "set_gait", "gait": 1})
    ack = client.recv_until(lambda m: m["type"] == "ack")
    assert ack["gait"] == 1
    client.close()


def test_websocket_and_ndjson_share_broadcasts(service):
    raw = LineClient(service.port)
    wsc = WsClient(service.port)
    raw.recv()
    wsc.recv()
    raw.send({"type": "button_up"})
    ack_raw = raw.recv_until(lambda m: m["type"] == "ack")
    ack_ws = wsc.recv_until(lambda m: m["type"] == "ack")
    assert ack_raw == ack_ws
    raw.close()
    wsc.close()
