"""Behavioural model of the board-side controller.

Covers the gait-selector counter, the address decode table mapping the
24 event addresses onto 12 servos x {FW, BW}, a bank of three-width PWM
channels, and the measured per-stage pipeline delays (at the 48 MHz
clock, here modelled as documented cycle counts, not simulated gates).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

PWM_PERIOD_US = 20_000

#: Servo order used by the address decode, index = servo id 0..11.
SERVO_NAMES = (
    "CFR", "FFR", "CMR", "FMR", "CBR", "FBR",
    "CFL", "FFL", "CML", "FML", "CBL", "FBL",
)

N_SERVOS = 12


class AddressError(ValueError):
    """Event address outside the 0..23 decode table."""


class Action(enum.Enum):
    FW = "fw"
    BW = "bw"


@dataclass(frozen=True)
class DecodedCommand:
    servo: int
    action: Action

    @property
    def servo_name(self) -> str:
        return SERVO_NAMES[self.servo]

    @property
    def address(self) -> int:
        """Re-encode to the source event address."""
        return self.servo + (0 if self.action is Action.FW else N_SERVOS)


def decode_event(addr: int) -> DecodedCommand:
    """Map an event address to a servo command.

    Addresses 0..11 are forward actions on servos CFR..FBL in order;
    12..23 are the matching backward actions.
    """
    if not (0 <= addr <= 23):
        raise AddressError(f"address {addr} is outside the 0..23 decode table")
    if addr < N_SERVOS:
        return DecodedCommand(addr, Action.FW)
    return DecodedCommand(addr - N_SERVOS, Action.BW)


# -- gait selector counter ---------------------------------------------------


@dataclass(frozen=True)
class SelectorCounter:
    """2-bit up/down counter, saturating at 0 and 2 (3 names no gait)."""

    value: int = 0
    new_mode: bool = False


def selector_step(c: SelectorCounter, up: bool, down: bool) -> SelectorCounter:
    """One button sample; new_mode pulses only on the step the value changes."""
    value = c.value
    if up and not down:
        value = min(2, value + 1)
    elif down and not up:
        value = max(0, value - 1)
    return SelectorCounter(value=value, new_mode=value != c.value)


# -- PWM channel -------------------------------------------------------------


class Position(enum.Enum):
    HOME = "home"
    FW = "fw"
    BW = "bw"


@dataclass(frozen=True)
class PwmChannel:
    """One servo channel with three configured pulse widths.

    The loaded width is held until a different action command arrives;
    home is only loaded by the reset release.
    """

    width_fw: int = 1000     # us
    width_bw: int = 2000     # us
    width_home: int = 1500   # us
    period: int = PWM_PERIOD_US
    current: Position = Position.HOME
    latched_width: int = 1500

    def width_for(self, pos: Position) -> int:
        return {
            Position.FW: self.width_fw,
            Position.BW: self.width_bw,
            Position.HOME: self.width_home,
        }[pos]


def pwm_command(ch: PwmChannel, fw: bool, bw: bool) -> PwmChannel:
    """Apply the fw/bw enable signals; fw wins if both are asserted."""
    if fw:
        return replace(ch, current=Position.FW, latched_width=ch.width_fw)
    if bw:
        return replace(ch, current=Position.BW, latched_width=ch.width_bw)
    return ch


def pwm_level(ch: PwmChannel, t_in_period: int) -> bool:
    """Output level at an offset into the 20 ms period (high-then-low)."""
    if not (0 <= t_in_period < ch.period):
        raise ValueError(f"t_in_period {t_in_period} outside [0, {ch.period})")
    return t_in_period < ch.latched_width


def reset_release(ch: PwmChannel) -> PwmChannel:
    """Global reset release: load the home width."""
    return replace(ch, current=Position.HOME, latched_width=ch.width_home)


# -- controller bank ---------------------------------------------------------


@dataclass
class ControllerState:
    """Selector counter plus the 12-channel PWM bank and drop counting."""

    counter: SelectorCounter = field(default_factory=SelectorCounter)
    channels: list[PwmChannel] = field(
        default_factory=lambda: [reset_release(PwmChannel()) for _ in range(N_SERVOS)]
    )
    dropped_events: int = 0
    decoded_commands: int = 0

    def apply_event(self, addr: int) -> DecodedCommand | None:
        """Decode and apply one received event; out-of-range is dropped+counted."""
        try:
            cmd = decode_event(addr)
        except AddressError:
            self.dropped_events += 1
            return None
        ch = self.channels[cmd.servo]
        self.channels[cmd.servo] = pwm_command(
            ch, fw=cmd.action is Action.FW, bw=cmd.action is Action.BW
        )
        self.decoded_commands += 1
        return cmd

    def press(self, up: bool = False, down: bool = False) -> SelectorCounter:
        self.counter = selector_step(self.counter, up, down)
        return self.counter

    def reset(self) -> None:
        self.channels = [reset_release(ch) for ch in self.channels]

    def channels_as_dict(self) -> list[dict]:
        return [
            {
                "servo": SERVO_NAMES[i],
                "current": ch.current.value,
                "latched_width_us": ch.latched_width,
            }
            for i, ch in enumerate(self.channels)
        ]


# -- pipeline latency model ---------------------------------------------------

#: Truncated 48 MHz cycle time; the delay table quotes ns at this precision.
NS_PER_CYCLE = 20.83
#: Exact value for a 48 MHz clock.
NS_PER_CYCLE_EXACT = 1000.0 / 48.0

#: Measured pipeline delays per stage, in 48 MHz clock cycles.
STAGE_CYCLES = {
    "selector": 1,
    "aer_out": 5,
    "aer_spinn": 66,
    "aer_in": 2,
    "decoder": 1,
    "pwm_block": 91,
}

STAGE_ORDER = tuple(STAGE_CYCLES)


def stage_latency(stage: str) -> tuple[int, float]:
    """(cycles, ns) for one stage; ns uses the truncated report constant."""
    if stage not in STAGE_CYCLES:
        raise KeyError(f"unknown stage {stage!r}; expected one of {STAGE_ORDER}")
    cycles = STAGE_CYCLES[stage]
    return cycles, round(cycles * NS_PER_CYCLE, 2)


def path_latency(stages=STAGE_ORDER) -> tuple[int, float]:
    """Total (cycles, ns) over a stage path; cycles add, then convert once."""
    cycles = 0
    for stage in stages:
        if stage not in STAGE_CYCLES:
            raise KeyError(f"unknown stage {stage!r}; expected one of {STAGE_ORDER}")
        cycles += STAGE_CYCLES[stage]
    return cycles, round(cycles * NS_PER_CYCLE, 2)


def latency_report() -> dict:
    """Per-stage and total pipeline delay, JSON-shaped."""
    stages = []
    for name in STAGE_ORDER:
        cycles, ns = stage_latency(name)
        stages.append({"name": name, "cycles": cycles, "ns": ns})
    total_cycles, total_ns = path_latency()
    return {
        "clock_ns_per_cycle": NS_PER_CYCLE,
        "clock_ns_per_cycle_exact": NS_PER_CYCLE_EXACT,
        "stages": stages,
        "total": {"name": "top", "cycles": total_cycles, "ns": total_ns},
    }
