"""Batch pipeline: scripted scenarios through the full system.

One tick of the pipeline is:

  schedule -> selector counter -> command AER event -> handshake +
  2-of-7 link -> selector stimulus -> network step -> motor spikes ->
  AER events (FW now, BW one tick later) -> handshake + 2-of-7 link ->
  address decode -> PWM channel bank -> world step

Everything is deterministic; running the same scenario twice produces
byte-identical outputs (reports carry no timestamps).
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import yaml

from . import aer, controller, cpg, hexapod
from .cpg import CpgConfig, GaitId, MotorEvent, TimedAer
from .snn import ConfigError


@dataclass
class ScheduleEntry:
    """Either a direct gait command or a board button press."""

    tick: int
    gait: Optional[GaitId] = None
    button: Optional[str] = None  # "up" | "down"

    def __post_init__(self):
        if (self.gait is None) == (self.button is None):
            raise ConfigError("schedule entry needs exactly one of gait/button")
        if self.button not in (None, "up", "down"):
            raise ConfigError(f"unknown button {self.button!r}")
        if self.tick < 0:
            raise ConfigError("schedule ticks must be >= 0")


@dataclass
class Scenario:
    duration_ms: int
    time_scale_factor: int = 100
    schedule: list[ScheduleEntry] = field(default_factory=list)
    cpg: CpgConfig = field(default_factory=CpgConfig)
    geometry: hexapod.LegGeometry = field(default_factory=hexapod.LegGeometry)
    pose_log_every: int = 1
    raster_name: str = "raster.csv"
    poses_name: str = "poses.jsonl"
    report_name: str = "report.json"

    def __post_init__(self):
        if self.duration_ms <= 0:
            raise ConfigError(f"duration must be positive, got {self.duration_ms}")
        if self.time_scale_factor < 1:
            raise ConfigError("time_scale_factor must be >= 1")
        ticks = [e.tick for e in self.schedule]
        if ticks != sorted(ticks):
            raise ConfigError("schedule must be sorted by tick")
        if ticks and ticks[-1] >= self.duration_ms:
            raise ConfigError("duration must exceed the last scheduled tick")


def scenario_from_dict(data: dict) -> Scenario:
    schedule = []
    for entry in data.get("schedule", []):
        if "gait" in entry:
            schedule.append(ScheduleEntry(tick=int(entry["tick"]),
                                          gait=cpg.parse_gait(entry["gait"])))
        else:
            schedule.append(ScheduleEntry(tick=int(entry["tick"]),
                                          button=str(entry["button"])))
    cfg = cpg.cpg_config_from_dict(data.get("cpg") or {})
    geom = hexapod.geometry_from_dict(data.get("hexapod") or {})
    outputs = data.get("outputs") or {}
    return Scenario(
        duration_ms=int(data["duration_ms"]),
        time_scale_factor=int(data.get("time_scale_factor", 100)),
        schedule=schedule,
        cpg=cfg,
        geometry=geom,
        pose_log_every=int(data.get("pose_log_every", 1)),
        raster_name=outputs.get("raster", "raster.csv"),
        poses_name=outputs.get("poses", "poses.jsonl"),
        report_name=outputs.get("report", "report.json"),
    )


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        data = yaml.safe_load(fh)
    if not isinstance(data, dict):
        raise ConfigError(f"scenario file {path} did not parse to a mapping")
    return scenario_from_dict(data)


# -- raster CSV ---------------------------------------------------------------


def export_raster(events: Sequence[TimedAer], path) -> None:
    """Write tick,addr rows sorted by (tick, addr)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "addr"])
        for ev in sorted(events):
            writer.writerow([ev.tick, ev.addr])


def load_raster(path) -> list[TimedAer]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["tick", "addr"]:
            raise ValueError(f"unexpected raster header: {header}")
        return [TimedAer(int(t), int(a)) for t, a in reader]


# -- the wired pipeline spine --------------------------------------------------


class Pipeline:
    """All subsystems wired together; stepped one tick at a time.

    Shared between the batch harness and the live service so both modes
    run exactly the same system.
    """

    def __init__(self, cfg: Optional[CpgConfig] = None,
                 geometry: Optional[hexapod.LegGeometry] = None,
                 time_scale_factor: int = 100):
        self.cfg = cfg or CpgConfig()
        self.net, self.layout = cpg.build_cpg_network(self.cfg)
        self.board = controller.ControllerState()
        self.world = hexapod.HexapodWorld(geometry or hexapod.LegGeometry())
        self.time_scale_factor = time_scale_factor
        self.tick = 0
        self.command_link = aer.LinkEndpoint()
        self.motor_link = aer.LinkEndpoint()
        self._pending_stimuli: list[tuple[int, float]] = []
        self._pending_bw: list[TimedAer] = []
        self.train: list = []
        self.wire_log: list[TimedAer] = []
        self.motor_spike_count = 0

    @property
    def dt_wall_s(self) -> float:
        return self.time_scale_factor * 1e-3

    def _send_command(self, gait_value: int) -> None:
        """Board -> network direction: one address event through the link."""
        event = aer.AerEvent(gait_value)
        _, delivered = aer.transfer(aer.HandshakeChannel(), event)
        states = self.command_link.send(delivered)
        for received in self.command_link.receive(states):
            self._pending_stimuli.append(
                (self.layout.selector_ids[received.addr], self.cfg.stim_current)
            )

    def command_gait(self, gait: GaitId) -> None:
        """Direct gait command: sync the counter, always emit the event."""
        changed = self.board.counter.value != int(gait)
        self.board.counter = controller.SelectorCounter(int(gait), new_mode=changed)
        self._send_command(int(gait))

    def press_button(self, up: bool = False, down: bool = False) -> bool:
        """Board button press; emits a command event only when the value changes."""
        counter = self.board.press(up=up, down=down)
        if counter.new_mode:
            self._send_command(counter.value)
        return counter.new_mode

    def _route_motor_events(self, events: list[TimedAer]) -> None:
        for timed in sorted(events):
            _, delivered = aer.transfer(aer.HandshakeChannel(), aer.AerEvent(timed.addr))
            states = self.motor_link.send(delivered)
            for received in self.motor_link.receive(states):
                self.board.apply_event(received.addr)
            self.wire_log.append(timed)

    def step(self, step_world: bool = True) -> list[TimedAer]:
        """Advance one tick; returns the motor events routed this tick."""
        t = self.tick
        stimuli = self._pending_stimuli
        self._pending_stimuli = []
        spikes = self.net.step(stimuli)
        self.train.extend(spikes)

        due_now: list[TimedAer] = [ev for ev in self._pending_bw if ev.tick == t]
        self._pending_bw = [ev for ev in self._pending_bw if ev.tick != t]
        for ev in spikes:
            if self.layout.is_motor(ev.neuron):
                servo = self.layout.servo_of(ev.neuron)
                self.motor_spike_count += 1
                due_now.append(TimedAer(t, servo))
                self._pending_bw.append(TimedAer(t + 1, servo + controller.N_SERVOS))
        self._route_motor_events(due_now)
        if step_world:
            self.world.step(self.board.channels, self.dt_wall_s, sim_ms=1.0)
        self.tick += 1
        return due_now

    def flush(self) -> list[TimedAer]:
        """Route backward events scheduled past the horizon (world untouched)."""
        rest = sorted(self._pending_bw)
        self._pending_bw = []
        self._route_motor_events(rest)
        return rest

    def reset(self) -> None:
        self.net, self.layout = cpg.build_cpg_network(self.cfg)
        self.board = controller.ControllerState()
        self.world = hexapod.HexapodWorld(self.world.geom)
        self.tick = 0
        self._pending_stimuli = []
        self._pending_bw = []
        self.train = []
        self.wire_log = []
        self.motor_spike_count = 0

    def link_health(self) -> dict:
        return {
            "command": self.command_link.health.as_dict(),
            "motor": self.motor_link.health.as_dict(),
        }


# -- running and reporting ------------------------------------------------------


GAIT_NAME = {g: g.name.lower() for g in GaitId}


def _segment_metrics(motor: list[MotorEvent], sig: cpg.GaitSignature,
                     start: int, end: int) -> dict:
    periods = {}
    for servo in range(controller.N_SERVOS):
        p = cpg.pattern_period(motor, servo, (start, end))
        periods[controller.SERVO_NAMES[servo]] = p
    per_leg = cpg._coxa_fw_ticks(motor, (start, end))
    phase_table = {}
    if all(per_leg[leg] for leg in range(cpg.N_LEGS)):
        ref = per_leg[0][0]
        for leg in range(cpg.N_LEGS):
            phase_table[cpg.LEG_NAMES[leg]] = (per_leg[leg][0] - ref) % sig.period
    return {"period_ticks": periods, "phase_table": phase_table}


@dataclass
class Report:
    data: dict

    def to_json(self) -> str:
        return json.dumps(self.data, indent=2, sort_keys=True) + "\n"


def run_scenario(scenario: Scenario, out_dir=None) -> Report:
    """Execute the scenario; write raster/pose/report files if out_dir given."""
    pipe = Pipeline(scenario.cpg, scenario.geometry, scenario.time_scale_factor)
    by_tick: dict[int, list[ScheduleEntry]] = {}
    for entry in scenario.schedule:
        by_tick.setdefault(entry.tick, []).append(entry)

    pose_lines: list[str] = []
    margin_at: dict[int, float] = {}
    body_x_at: dict[int, float] = {}

    for t in range(scenario.duration_ms):
        for entry in by_tick.get(t, ()):
            if entry.gait is not None:
                pipe.command_gait(entry.gait)
            else:
                pipe.press_button(up=entry.button == "up", down=entry.button == "down")
        pipe.step()
        body_x_at[pipe.tick] = pipe.world.body_x
        snap = pipe.world.snapshot()
        if snap["stability_margin"] is not None:
            margin_at[t] = snap["stability_margin"]
        if t % scenario.pose_log_every == 0:
            pose_lines.append(json.dumps(snap, sort_keys=True))
    pipe.flush()
    margins = list(margin_at.values())

    motor, wire = cpg.motor_events(pipe.train, pipe.layout)

    # Segments: one per command entry, up to the next command (or the end).
    signatures = scenario.cpg.signatures
    command_ticks: list[tuple[int, GaitId]] = []
    value = 0
    for entry in scenario.schedule:
        if entry.gait is not None:
            value = int(entry.gait)
            command_ticks.append((entry.tick, entry.gait))
        else:
            nxt = min(2, value + 1) if entry.button == "up" else max(0, value - 1)
            if nxt != value:
                value = nxt
                command_ticks.append((entry.tick, GaitId(value)))

    switches = []
    segments = []
    for idx, (t_change, target) in enumerate(command_ticks):
        seg_end = (
            command_ticks[idx + 1][0] if idx + 1 < len(command_ticks)
            else scenario.duration_ms
        )
        res = cpg.convergence_delay(motor, t_change, target, seg_end, signatures)
        switches.append({
            "tick": t_change,
            "target": GAIT_NAME[target],
            "convergence_ticks": res.delay_ticks,
            "convergence_ms": res.delay_ticks,  # 1 tick = 1 simulated ms
            "saturated": res.saturated,
            "reference_ms": 23,
        })
        sig = signatures[target]
        steady_from = (
            t_change + res.delay_ticks + 2 * sig.period
            if not res.saturated else seg_end
        )
        segment = {
            "start": t_change,
            "end": seg_end,
            "target": GAIT_NAME[target],
            "classified": None,
            "speed_cm_s": None,
        }
        if steady_from + 2 * sig.period <= seg_end:
            got = cpg.classify_window(motor, (steady_from, seg_end), signatures)
            segment["classified"] = GAIT_NAME.get(got)
            segment.update(_segment_metrics(motor, sig, steady_from, seg_end))
            dx = body_x_at[seg_end] - body_x_at[steady_from]
            wall_s = (seg_end - steady_from) * scenario.time_scale_factor * 1e-3
            segment["speed_cm_s"] = dx / wall_s
            segment["wall_cycle_ms"] = sig.period * scenario.time_scale_factor
            steady_margins = [
                margin_at[t] for t in range(steady_from, seg_end) if t in margin_at
            ]
            segment["margin_min_cm"] = min(steady_margins) if steady_margins else None
        segments.append(segment)

    first_stim = command_ticks[0][0] if command_ticks else None
    first_motor = motor[0].tick if motor else None
    cases = {
        "resting_to_moving_ticks": (
            first_motor - first_stim if first_stim is not None and first_motor is not None
            else None
        ),
        "stabilization_ticks": switches[0]["convergence_ticks"] if switches else None,
        "movement_period_ticks": (
            segments[-1].get("period_ticks", {}).get("CFR") if segments else None
        ),
        "gait_change_ticks": {
            f"{GAIT_NAME[command_ticks[i][1]]}->{GAIT_NAME[command_ticks[i + 1][1]]}":
                switches[i + 1]["convergence_ticks"]
            for i in range(len(command_ticks) - 1)
        },
    }

    bw_count = sum(1 for m in motor if m.action is controller.Action.BW)
    fw_count = sum(1 for m in motor if m.action is controller.Action.FW)
    report = Report({
        "scenario": {
            "duration_ms": scenario.duration_ms,
            "time_scale_factor": scenario.time_scale_factor,
            "schedule": [
                {"tick": e.tick, **({"gait": GAIT_NAME[e.gait]} if e.gait is not None
                                    else {"button": e.button})}
                for e in scenario.schedule
            ],
        },
        "segments": segments,
        "switches": switches,
        "cases": cases,
        "stability": {
            "margin_min_cm": min(margins) if margins else None,
            "margin_mean_cm": statistics.fmean(margins) if margins else None,
        },
        "speed_cm_s": segments[-1]["speed_cm_s"] if segments else None,
        "conservation": {
            "motor_spikes": pipe.motor_spike_count,
            "fw_events": fw_count,
            "bw_events": bw_count,
            "decoded_commands": pipe.board.decoded_commands,
            "dropped_events": pipe.board.dropped_events,
        },
        "latency": controller.latency_report(),
        "link_health": pipe.link_health(),
    })

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        export_raster(pipe.wire_log, out / scenario.raster_name)
        (out / scenario.poses_name).write_text("\n".join(pose_lines) + "\n")
        (out / scenario.report_name).write_text(report.to_json())
    return report
