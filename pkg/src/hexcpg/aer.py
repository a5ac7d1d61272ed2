"""Address-event wire layer: AER events, 4-phase handshake, 2-of-7 codec.

A 16-bit address event crosses the link as four data symbols (nibbles,
least-significant first) plus an end-of-packet symbol. Each symbol
flips exactly 2 of 7 wires; on the line, symbols are transition
signalled, i.e. the XOR of consecutive line states.

The data-symbol table is the lexicographic enumeration of the C(7,2)
bit pairs with the pair {5,6} reserved for EOP; it is overridable for
interop with other codecs via the module-level table builders.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional


class SymbolError(ValueError):
    """Mask is not a valid 2-of-7 symbol."""


class FramingError(ValueError):
    """Symbol stream does not form a well-shaped frame."""


class LineError(ValueError):
    """Line-state sequence cannot be decoded (stall or bad transition)."""


class HandshakeError(RuntimeError):
    """Illegal action for the current handshake phase."""


@dataclass(frozen=True)
class AerEvent:
    addr: int

    def __post_init__(self):
        if not (0 <= self.addr <= 0xFFFF):
            raise ValueError(f"AER address out of 16-bit range: {self.addr}")


@dataclass(frozen=True)
class TwoOfSevenSymbol:
    mask: int  # 7-bit transition mask

    def __post_init__(self):
        if not (0 <= self.mask < 128) or bin(self.mask).count("1") != 2:
            raise SymbolError(f"mask {self.mask:#04x} does not have exactly 2 of 7 bits set")


def _build_tables() -> tuple[list[int], dict[int, int], int]:
    """Data-symbol masks for nibbles 0..15, inverse map, and the EOP mask."""
    eop = (1 << 5) | (1 << 6)
    masks = []
    for a, b in itertools.combinations(range(7), 2):
        m = (1 << a) | (1 << b)
        if m != eop:
            masks.append(m)
    masks = masks[:16]
    return masks, {m: v for v, m in enumerate(masks)}, eop


_NIBBLE_TO_MASK, _MASK_TO_NIBBLE, EOP_MASK = _build_tables()

EOP_SYMBOL = TwoOfSevenSymbol(EOP_MASK)

#: Sentinel returned by symbol_to_nibble for the end-of-packet symbol.
END_OF_PACKET = "EOP"


def nibble_to_symbol(v: int) -> TwoOfSevenSymbol:
    if not (0 <= v <= 15):
        raise ValueError(f"nibble out of range: {v}")
    return TwoOfSevenSymbol(_NIBBLE_TO_MASK[v])


def symbol_to_nibble(s: TwoOfSevenSymbol | int):
    """Inverse of nibble_to_symbol; returns END_OF_PACKET for the EOP mask."""
    mask = s.mask if isinstance(s, TwoOfSevenSymbol) else s
    if not (0 <= mask < 128) or bin(mask).count("1") != 2:
        raise SymbolError(f"mask {mask:#04x} does not have exactly 2 of 7 bits set")
    if mask == EOP_MASK:
        return END_OF_PACKET
    try:
        return _MASK_TO_NIBBLE[mask]
    except KeyError:
        raise FramingError(f"valid 2-of-7 mask {mask:#04x} is not in the data table") from None


@dataclass(frozen=True)
class LinkFrame:
    """One event on the link: data symbols followed by a single EOP."""

    symbols: tuple[TwoOfSevenSymbol, ...]
    terminator: TwoOfSevenSymbol = EOP_SYMBOL

    def hexdump(self) -> str:
        """Log form: two-digit hex masks, literal EOP terminator."""
        return " ".join(f"{s.mask:02x}" for s in self.symbols) + " EOP"


def encode_event(e: AerEvent) -> LinkFrame:
    """Four nibbles of the address, least-significant first, plus EOP."""
    nibbles = [(e.addr >> shift) & 0xF for shift in (0, 4, 8, 12)]
    return LinkFrame(symbols=tuple(nibble_to_symbol(v) for v in nibbles))


def decode_frame(f: LinkFrame) -> AerEvent:
    if f.terminator.mask != EOP_MASK:
        raise FramingError("frame does not end with the EOP symbol")
    if len(f.symbols) != 4:
        raise FramingError(f"expected 4 data symbols before EOP, got {len(f.symbols)}")
    addr = 0
    for pos, sym in enumerate(f.symbols):
        nib = symbol_to_nibble(sym)
        if nib == END_OF_PACKET:
            raise FramingError("embedded EOP symbol inside frame data")
        addr |= nib << (4 * pos)
    return AerEvent(addr)


def line_encode(frames: Iterable[LinkFrame], initial_line_state: int = 0) -> list[int]:
    """Transition-signal frames onto the 7 wires, starting from a known state."""
    state = initial_line_state & 0x7F
    states = [state]
    for frame in frames:
        for sym in (*frame.symbols, frame.terminator):
            state ^= sym.mask
            states.append(state)
    return states


def line_decode(states: Iterable[int]) -> list[LinkFrame]:
    """Recover frames from a line-state sequence (inverse of line_encode)."""
    states = list(states)
    frames: list[LinkFrame] = []
    pending: list[TwoOfSevenSymbol] = []
    for prev, cur in zip(states, states[1:]):
        mask = (prev ^ cur) & 0x7F
        if mask == 0:
            raise LineError("line stalled: consecutive identical states")
        if bin(mask).count("1") != 2:
            raise LineError(f"transition {mask:#04x} is not a 2-of-7 symbol")
        if mask == EOP_MASK:
            frames.append(LinkFrame(symbols=tuple(pending)))
            pending = []
        else:
            pending.append(TwoOfSevenSymbol(mask))
    if pending:
        raise FramingError(f"{len(pending)} data symbols left without an EOP")
    return frames


# -- REQ/ACK handshake -----------------------------------------------------


class Phase(enum.Enum):
    IDLE = "idle"
    REQUESTED = "requested"
    ACKED = "acked"
    RELEASED = "released"


class Action(enum.Enum):
    REQUEST = "request"    # sender raises REQ with data
    ACK = "ack"            # receiver raises ACK, capturing data
    RELEASE = "release"    # sender drops REQ
    COMPLETE = "complete"  # receiver drops ACK, returning to idle


@dataclass(frozen=True)
class HandshakeChannel:
    """One 4-phase REQ/ACK channel; data is valid in REQUESTED/ACKED."""

    phase: Phase = Phase.IDLE
    data: Optional[AerEvent] = None

    @property
    def req(self) -> bool:
        return self.phase in (Phase.REQUESTED, Phase.ACKED)

    @property
    def ack(self) -> bool:
        return self.phase in (Phase.ACKED, Phase.RELEASED)


def handshake_step(
    ch: HandshakeChannel, action: Action, data: Optional[AerEvent] = None
) -> tuple[HandshakeChannel, Optional[AerEvent]]:
    """Apply one side's action; returns (channel, delivered event or None).

    The event is delivered exactly once per full cycle, on the ACK step.
    """
    if action is Action.REQUEST:
        if ch.phase is not Phase.IDLE:
            raise HandshakeError(f"request while {ch.phase.value}")
        if data is None:
            raise HandshakeError("request needs an event")
        return HandshakeChannel(Phase.REQUESTED, data), None
    if action is Action.ACK:
        if ch.phase is not Phase.REQUESTED:
            raise HandshakeError(f"ack while {ch.phase.value}")
        return HandshakeChannel(Phase.ACKED, ch.data), ch.data
    if action is Action.RELEASE:
        if ch.phase is not Phase.ACKED:
            raise HandshakeError(f"release while {ch.phase.value}")
        return HandshakeChannel(Phase.RELEASED, None), None
    if action is Action.COMPLETE:
        if ch.phase is not Phase.RELEASED:
            raise HandshakeError(f"complete while {ch.phase.value}")
        return HandshakeChannel(Phase.IDLE, None), None
    raise HandshakeError(f"unknown action {action!r}")


def transfer(ch: HandshakeChannel, event: AerEvent) -> tuple[HandshakeChannel, AerEvent]:
    """Run one full legal handshake cycle; returns the delivered event."""
    ch, _ = handshake_step(ch, Action.REQUEST, event)
    ch, delivered = handshake_step(ch, Action.ACK)
    ch, _ = handshake_step(ch, Action.RELEASE)
    ch, _ = handshake_step(ch, Action.COMPLETE)
    assert delivered is not None
    return ch, delivered


# -- link health -----------------------------------------------------------


@dataclass
class LinkHealth:
    """Generic link status counters exposed by the pipeline and service."""

    tx_frames: int = 0
    rx_frames: int = 0
    tx_stall: bool = False
    rx_stall: bool = False
    framing_errors: int = 0
    symbol_errors: int = 0

    def as_dict(self) -> dict:
        return {
            "tx_frames": self.tx_frames,
            "rx_frames": self.rx_frames,
            "tx_stall": self.tx_stall,
            "rx_stall": self.rx_stall,
            "framing_errors": self.framing_errors,
            "symbol_errors": self.symbol_errors,
        }


class LinkEndpoint:
    """Stateful encoder/decoder pair keeping persistent line state.

    Models one direction of the board link: events go in, line states
    come out, and the receiving side folds states back into events.
    """

    def __init__(self, initial_line_state: int = 0):
        self.tx_state = initial_line_state & 0x7F
        self.rx_state = initial_line_state & 0x7F
        self.health = LinkHealth()

    def send(self, event: AerEvent) -> list[int]:
        """Encode one event; returns the new line states (old state excluded)."""
        states = line_encode([encode_event(event)], self.tx_state)
        self.tx_state = states[-1]
        self.health.tx_frames += 1
        return states[1:]

    def receive(self, states: list[int]) -> list[AerEvent]:
        """Fold received line states into events; counts decode errors."""
        try:
            frames = line_decode([self.rx_state, *states])
        except LineError:
            self.health.symbol_errors += 1
            raise
        except FramingError:
            self.health.framing_errors += 1
            raise
        if states:
            self.rx_state = states[-1]
        events = []
        for frame in frames:
            try:
                events.append(decode_frame(frame))
            except (SymbolError, FramingError):
                self.health.framing_errors += 1
                raise
        self.health.rx_frames += len(events)
        return events
