"""Real-time host: paces the pipeline on the wall clock and streams events.

One simulation thread owns every piece of mutable state; socket I/O
happens on per-connection threads that talk to the engine only through
queues (commands in, serialized events out). Pacing uses absolute
deadlines (anchor + n * tick period) so scheduling jitter never
accumulates into drift.

Protocol: newline-delimited JSON on a stream socket. Browser clients
connect to the same port with a WebSocket upgrade (detected by the
request line) and receive the identical payloads as text frames.
Every broadcast message carries a globally increasing sequence number;
direct error replies carry seq null. A snapshot message opens every
connection.
"""

from __future__ import annotations

import json
import os
import queue
import socket
import threading
import time
from dataclasses import dataclass, field
from typing import Optional

from . import cpg, ws
from .cpg import GaitId
from .hexapod import LegGeometry
from .scenario import GAIT_NAME, Pipeline

PROTOCOL_VERSION = 1

_CLASSIFY_WIDTH = 24  # ticks; two of the longest default gait period
_CONV_HORIZON = 150   # ticks of history before a convergence is scored


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8642
    time_scale_factor: int = 100
    cpg: cpg.CpgConfig = field(default_factory=cpg.CpgConfig)
    geometry: LegGeometry = field(default_factory=LegGeometry)
    pose_every_ticks: int = 2
    metrics_every_ticks: int = 25

    def __post_init__(self):
        override = os.environ.get("HEXCPG_BIND")
        if override:
            self.host = override


class _Connection:
    """One client: an outbound queue, a writer thread and a reader loop."""

    def __init__(self, sock: socket.socket, server: "Service", websocket: bool):
        self.sock = sock
        self.server = server
        self.websocket = websocket
        self.outbox: "queue.Queue[Optional[bytes]]" = queue.Queue(maxsize=2000)
        self.alive = True

    def enqueue(self, payload: bytes) -> None:
        try:
            self.outbox.put_nowait(payload)
        except queue.Full:
            self.close()

    def send_direct(self, message: dict) -> None:
        self.enqueue(_serialize(message))

    def close(self) -> None:
        if self.alive:
            self.alive = False
            self.outbox.put(None)

    def writer_loop(self) -> None:
        try:
            while True:
                payload = self.outbox.get()
                if payload is None:
                    break
                if self.websocket:
                    self.sock.sendall(ws.encode_frame(payload))
                else:
                    self.sock.sendall(payload + b"\n")
        except OSError:
            pass
        finally:
            self.alive = False
            try:
                self.sock.close()
            except OSError:
                pass
            self.server._drop(self)

    def reader_loop(self, initial: bytes) -> None:
        try:
            if self.websocket:
                reader = ws.FrameReader(self.sock)
                while self.alive:
                    text = reader.read_text()
                    if text is None:
                        break
                    self._handle_line(text)
            else:
                buf = initial
                while self.alive:
                    while b"\n" in buf:
                        line, buf = buf.split(b"\n", 1)
                        if line.strip():
                            self._handle_line(line.decode("utf-8", errors="replace"))
                    chunk = self.sock.recv(4096)
                    if not chunk:
                        break
                    buf += chunk
        except OSError:
            pass
        finally:
            self.close()

    def _handle_line(self, line: str) -> None:
        try:
            message = json.loads(line)
            if not isinstance(message, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as exc:
            self.send_direct({"type": "error", "seq": None, "message": f"bad json: {exc}"})
            return
        self.server.engine.submit(self, message)


def _serialize(message: dict) -> bytes:
    return json.dumps(message, separators=(",", ":")).encode()


class SimEngine(threading.Thread):
    """Owns the pipeline; applies commands at tick boundaries."""

    def __init__(self, config: ServiceConfig, server: "Service"):
        super().__init__(daemon=True, name="hexcpg-engine")
        self.config = config
        self.server = server
        self.pipe = Pipeline(config.cpg, config.geometry, config.time_scale_factor)
        self.inbox: "queue.Queue[tuple[Optional[_Connection], dict]]" = queue.Queue()
        self.stop_event = threading.Event()
        self.epoch = 0
        self._motor_history: list[cpg.MotorEvent] = []
        self._pending_conv: list[tuple[int, GaitId]] = []
        self._last_convergence: Optional[dict] = None
        self._anchor_wall = 0.0
        self._anchor_tick = 0
        self._start_wall = 0.0
        self._latest_snapshot: dict = {}

    # -- client-facing ----------------------------------------------------

    def submit(self, conn: Optional[_Connection], message: dict) -> None:
        self.inbox.put((conn, message))

    def snapshot_message(self, seq: int) -> dict:
        snap = dict(self._latest_snapshot)
        snap["seq"] = seq
        return snap

    # -- internals ---------------------------------------------------------

    def _tick_period_s(self) -> float:
        return self.pipe.time_scale_factor * 1e-3

    def _rebase(self) -> None:
        self._anchor_wall = time.monotonic()
        self._anchor_tick = self.pipe.tick

    def _classified_gait(self) -> Optional[GaitId]:
        t = self.pipe.tick
        if t < _CLASSIFY_WIDTH:
            return None
        return cpg.classify_window(
            self._motor_history, (t - _CLASSIFY_WIDTH, t), self.config.cpg.signatures
        )

    def _build_snapshot(self) -> dict:
        wall_ms = (time.monotonic() - self._start_wall) * 1000.0
        classified = self._classified_gait()
        return {
            "type": "snapshot",
            "protocol": PROTOCOL_VERSION,
            "epoch": self.epoch,
            "tick": self.pipe.tick,
            "gait": None if classified is None else int(classified),
            "commanded_gait": self.pipe.board.counter.value,
            "scale": self.pipe.time_scale_factor,
            "pose": self.pipe.world.snapshot(),
            "pwm": self.pipe.board.channels_as_dict(),
            "link": self.pipe.link_health(),
            "wall_actual_ms": wall_ms,
        }

    def _apply_command(self, conn: Optional[_Connection], message: dict) -> None:
        mtype = message.get("type")
        tick = self.pipe.tick
        ack = {"type": "ack", "tick": tick, "cmd": mtype, "ok": True}
        if mtype == "set_gait":
            try:
                gait = cpg.parse_gait(message.get("gait"))
            except Exception:
                self._reject(conn, f"set_gait needs gait in 0..2, got {message.get('gait')!r}")
                return
            self.pipe.command_gait(gait)
            self._pending_conv.append((tick, gait))
            ack["gait"] = int(gait)
        elif mtype in ("button_up", "button_down"):
            changed = self.pipe.press_button(
                up=mtype == "button_up", down=mtype == "button_down"
            )
            value = self.pipe.board.counter.value
            if changed:
                self._pending_conv.append((tick, GaitId(value)))
            ack["value"] = value
            ack["changed"] = changed
        elif mtype == "reset":
            self.pipe.reset()
            self.epoch += 1
            self._motor_history = []
            self._pending_conv = []
            self._last_convergence = None
            self._rebase()
            self._latest_snapshot = self._build_snapshot()
            self.server.broadcast(ack)
            self.server.broadcast(self._build_snapshot())
            return
        elif mtype == "set_scale":
            factor = message.get("factor")
            if not isinstance(factor, (int, float)) or factor < 1:
                self._reject(conn, f"set_scale needs factor >= 1, got {factor!r}")
                return
            self.pipe.time_scale_factor = int(factor)
            self._rebase()
            ack["factor"] = self.pipe.time_scale_factor
        else:
            self._reject(conn, f"unknown command type {mtype!r}")
            return
        self.server.broadcast(ack)

    def _reject(self, conn: Optional[_Connection], reason: str) -> None:
        if conn is not None:
            conn.send_direct({"type": "error", "seq": None, "message": reason})

    def _score_pending_convergence(self) -> None:
        t = self.pipe.tick
        remaining = []
        for t_change, target in self._pending_conv:
            if t_change + _CONV_HORIZON > t:
                remaining.append((t_change, target))
                continue
            res = cpg.convergence_delay(
                self._motor_history, t_change, target, t_change + _CONV_HORIZON,
                self.config.cpg.signatures,
            )
            self._last_convergence = {
                "target": GAIT_NAME[target],
                "tick": t_change,
                "ticks": res.delay_ticks,
                "saturated": res.saturated,
                "reference_ms": 23,
            }
        self._pending_conv = remaining

    def run(self) -> None:
        self._start_wall = time.monotonic()
        self._rebase()
        self._latest_snapshot = self._build_snapshot()
        while not self.stop_event.is_set():
            deadline = self._anchor_wall + (
                self.pipe.tick - self._anchor_tick + 1
            ) * self._tick_period_s()
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0 or self.stop_event.is_set():
                    break
                time.sleep(min(remaining, 0.05))
            if self.stop_event.is_set():
                break

            while True:
                try:
                    conn, message = self.inbox.get_nowait()
                except queue.Empty:
                    break
                self._apply_command(conn, message)

            t = self.pipe.tick
            wall_ms = (time.monotonic() - self._start_wall) * 1000.0
            spikes_before = len(self.pipe.train)
            routed = self.pipe.step()
            new_spikes = self.pipe.train[spikes_before:]

            for ev in new_spikes:
                if self.pipe.layout.is_motor(ev.neuron):
                    servo = self.pipe.layout.servo_of(ev.neuron)
                    self._motor_history.append(
                        cpg.MotorEvent(ev.tick, servo, cpg.Action.FW)
                    )
                    self._motor_history.append(
                        cpg.MotorEvent(ev.tick + 1, servo, cpg.Action.BW)
                    )
            if len(self._motor_history) > 6000:
                self._motor_history = self._motor_history[-4000:]

            if new_spikes:
                self.server.broadcast({
                    "type": "spike", "tick": t,
                    "neurons": [ev.neuron for ev in new_spikes],
                })
            if routed:
                self.server.broadcast({
                    "type": "motor", "tick": t,
                    "events": [[ev.tick, ev.addr] for ev in routed],
                })
            if t % self.config.pose_every_ticks == 0:
                pose = self.pipe.world.snapshot()
                self.server.broadcast({
                    "type": "pose", "tick": t, "wall_actual_ms": wall_ms, **pose,
                })
            self._score_pending_convergence()
            if t % self.config.metrics_every_ticks == 0:
                classified = self._classified_gait()
                period = None
                if classified is not None:
                    period = cpg.pattern_period(
                        self._motor_history, 0, (max(0, t - 4 * 12), t)
                    )
                self.server.broadcast({
                    "type": "metrics",
                    "tick": t,
                    "gait": None if classified is None else int(classified),
                    "commanded_gait": self.pipe.board.counter.value,
                    "period_ticks": period,
                    "speed_cm_s": None,
                    "stability_margin": self.pipe.world.snapshot()["stability_margin"],
                    "convergence": self._last_convergence,
                    "link": self.pipe.link_health(),
                    "wall_actual_ms": wall_ms,
                })
            self._latest_snapshot = self._build_snapshot()


class Service:
    """Accepts NDJSON and WebSocket clients on one port."""

    def __init__(self, config: Optional[ServiceConfig] = None):
        self.config = config or ServiceConfig()
        self.engine = SimEngine(self.config, self)
        self._clients: list[_Connection] = []
        self._lock = threading.Lock()
        self._seq = 0
        self._listener: Optional[socket.socket] = None
        self._accept_thread: Optional[threading.Thread] = None
        self.port: Optional[int] = None

    # -- broadcasting -------------------------------------------------------

    def broadcast(self, message: dict) -> None:
        with self._lock:
            self._seq += 1
            message = dict(message)
            message["seq"] = self._seq
            payload = _serialize(message)
            for client in list(self._clients):
                client.enqueue(payload)

    def _register(self, conn: _Connection) -> None:
        with self._lock:
            self._seq += 1
            snapshot = self.engine.snapshot_message(self._seq)
            conn.enqueue(_serialize(snapshot))
            self._clients.append(conn)

    def _drop(self, conn: _Connection) -> None:
        with self._lock:
            if conn in self._clients:
                self._clients.remove(conn)

    # -- lifecycle ----------------------------------------------------------

    def start(self) -> None:
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind((self.config.host, self.config.port))
        listener.listen(16)
        self._listener = listener
        self.port = listener.getsockname()[1]
        self.engine.start()
        self._accept_thread = threading.Thread(
            target=self._accept_loop, daemon=True, name="hexcpg-accept"
        )
        self._accept_thread.start()

    def _accept_loop(self) -> None:
        assert self._listener is not None
        while True:
            try:
                sock, _ = self._listener.accept()
            except OSError:
                return
            threading.Thread(
                target=self._handle_client, args=(sock,), daemon=True
            ).start()

    def _handle_client(self, sock: socket.socket) -> None:
        # Sniff the protocol: WebSocket clients open with an HTTP GET;
        # raw NDJSON clients may say nothing until they get the snapshot.
        sock.settimeout(0.25)
        try:
            first = sock.recv(4096)
            if not first:
                sock.close()
                return
        except socket.timeout:
            first = b""
        except OSError:
            sock.close()
            return
        sock.settimeout(None)
        websocket = first.startswith(b"GET ")
        initial = b""
        if websocket:
            if not ws.complete_handshake(sock, first):
                sock.close()
                return
        else:
            initial = first
        conn = _Connection(sock, self, websocket)
        threading.Thread(target=conn.writer_loop, daemon=True).start()
        self._register(conn)
        conn.reader_loop(initial)

    def stop(self) -> None:
        self.engine.stop_event.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            for client in list(self._clients):
                client.close()
        if self.engine.is_alive():
            self.engine.join(timeout=2.0)

    def serve_forever(self) -> None:
        self.start()
        print(f"hexcpg service on {self.config.host}:{self.port} "
              f"(time scale {self.config.time_scale_factor})")
        try:
            while True:
                time.sleep(1.0)
        except KeyboardInterrupt:
            pass
        finally:
            self.stop()


def serve(config: Optional[ServiceConfig] = None) -> None:
    Service(config).serve_forever()
