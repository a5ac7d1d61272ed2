"""Wire-layer tests: symbol table, framing, line signalling, handshake."""

import itertools
import random
import re

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hexcpg import aer
from hexcpg.aer import (
    Action,
    AerEvent,
    FramingError,
    HandshakeChannel,
    HandshakeError,
    LineError,
    LinkEndpoint,
    LinkFrame,
    Phase,
    SymbolError,
    TwoOfSevenSymbol,
    decode_frame,
    encode_event,
    handshake_step,
    line_decode,
    line_encode,
    nibble_to_symbol,
    symbol_to_nibble,
    transfer,
)


def expected_table():
    """Independent enumeration of the data-symbol table."""
    eop = 0b1100000
    masks = []
    for a, b in itertools.combinations(range(7), 2):
        m = (1 << a) | (1 << b)
        if m != eop:
            masks.append(m)
    return masks[:16], eop


# -- symbol table ---------------------------------------------------------------


def test_table_matches_lexicographic_enumeration():
    masks, eop = expected_table()
    for v in range(16):
        assert nibble_to_symbol(v).mask == masks[v]
    assert aer.EOP_MASK == eop


def test_first_and_last_table_entries():
    assert nibble_to_symbol(0).mask == 0b0000011  # bits {0,1}
    masks, _ = expected_table()
    assert nibble_to_symbol(15).mask == masks[15]


def test_nibble_symbol_bijection():
    seen = set()
    for v in range(16):
        sym = nibble_to_symbol(v)
        assert bin(sym.mask).count("1") == 2
        assert symbol_to_nibble(sym) == v
        seen.add(sym.mask)
    assert len(seen) == 16
    assert aer.EOP_MASK not in seen


def test_nibble_out_of_range():
    with pytest.raises(ValueError):
        nibble_to_symbol(16)


def test_symbol_to_nibble_eop_and_errors():
    assert symbol_to_nibble(aer.EOP_MASK) == aer.END_OF_PACKET
    with pytest.raises(SymbolError):
        symbol_to_nibble(0b0000111)  # three bits
    with pytest.raises(SymbolError):
        symbol_to_nibble(0b0000001)  # one bit
    # valid 2-of-7 pair that is not in the 16-entry data table
    masks, _ = expected_table()
    outside = (1 << 3) | (1 << 5)
    assert outside not in masks
    with pytest.raises(FramingError):
        symbol_to_nibble(outside)


def test_symbol_constructor_validates_popcount():
    with pytest.raises(SymbolError):
        TwoOfSevenSymbol(0b0010110)
    with pytest.raises(SymbolError):
        TwoOfSevenSymbol(0)


# -- frames ----------------------------------------------------------------------


def test_encode_zero_address():
    frame = encode_event(AerEvent(0))
    assert [symbol_to_nibble(s) for s in frame.symbols] == [0, 0, 0, 0]
    assert frame.terminator.mask == aer.EOP_MASK


def test_encode_nibble_order_lsn_first():
    frame = encode_event(AerEvent(0x0005))
    assert [symbol_to_nibble(s) for s in frame.symbols] == [5, 0, 0, 0]
    frame = encode_event(AerEvent(0xBEEF))
    assert [symbol_to_nibble(s) for s in frame.symbols] == [0xF, 0xE, 0xE, 0xB]


def test_decode_beef():
    assert decode_frame(encode_event(AerEvent(0xBEEF))).addr == 0xBEEF


def test_exhaustive_roundtrip():
    for addr in range(65536):
        assert decode_frame(encode_event(AerEvent(addr))).addr == addr


def test_decode_rejects_wrong_symbol_count():
    short = LinkFrame(symbols=encode_event(AerEvent(7)).symbols[:3])
    with pytest.raises(FramingError):
        decode_frame(short)


def test_decode_rejects_out_of_table_symbol():
    bad = TwoOfSevenSymbol((1 << 4) | (1 << 6))  # valid pair, not a data symbol
    frame = LinkFrame(symbols=(bad, *encode_event(AerEvent(0)).symbols[:3]))
    with pytest.raises(FramingError):
        decode_frame(frame)


def test_event_address_range_checked():
    with pytest.raises(ValueError):
        AerEvent(0x10000)
    with pytest.raises(ValueError):
        AerEvent(-1)


def test_hexdump_format():
    dump = encode_event(AerEvent(0x0005)).hexdump()
    assert re.fullmatch(r"([0-9a-f]{2} ){4}EOP", dump)
    assert dump.endswith("EOP")


# -- line signalling ---------------------------------------------------------------


def test_line_encode_empty():
    assert line_encode([], 0b1010101) == [0b1010101]


def test_line_encode_single_symbol_xor():
    frame = LinkFrame(symbols=(TwoOfSevenSymbol(0b0000011),))
    states = line_encode([frame], 0)
    assert states[0] == 0
    assert states[1] == 0b0000011
    assert states[2] == 0b0000011 ^ aer.EOP_MASK


@given(
    addrs=st.lists(st.integers(min_value=0, max_value=0xFFFF), max_size=12),
    s0=st.integers(min_value=0, max_value=0x7F),
)
@settings(max_examples=60, deadline=None)
def test_line_roundtrip(addrs, s0):
    frames = [encode_event(AerEvent(a)) for a in addrs]
    states = line_encode(frames, s0)
    decoded = line_decode(states)
    assert [decode_frame(f).addr for f in decoded] == addrs


def test_line_decode_stall():
    with pytest.raises(LineError):
        line_decode([3, 3])


def test_line_decode_bad_popcount():
    with pytest.raises(LineError):
        line_decode([0, 0b0000111])


def test_line_decode_partial_frame():
    states = line_encode([encode_event(AerEvent(9))], 0)
    with pytest.raises(FramingError):
        line_decode(states[:-1])  # EOP transition missing


@pytest.mark.parametrize("seed", range(10))
def test_single_bit_flips_always_detected(seed):
    # A flipped wire changes the adjacent transitions to odd popcount,
    # so corruption is always rejected, never silently mis-decoded.
    rng = random.Random(seed)
    addrs = [rng.randrange(0x10000) for _ in range(5)]
    states = line_encode([encode_event(AerEvent(a)) for a in addrs], rng.randrange(128))
    idx = rng.randrange(1, len(states))
    flipped = list(states)
    flipped[idx] ^= 1 << rng.randrange(7)
    with pytest.raises((LineError, FramingError)):
        line_decode(flipped)


# -- handshake ----------------------------------------------------------------------


def test_full_handshake_cycle():
    ch = HandshakeChannel()
    ev = AerEvent(42)
    ch, delivered = handshake_step(ch, Action.REQUEST, ev)
    assert ch.phase is Phase.REQUESTED and ch.req and not ch.ack
    assert delivered is None
    ch, delivered = handshake_step(ch, Action.ACK)
    assert ch.phase is Phase.ACKED and delivered == ev
    ch, _ = handshake_step(ch, Action.RELEASE)
    assert ch.phase is Phase.RELEASED and not ch.req and ch.ack
    ch, _ = handshake_step(ch, Action.COMPLETE)
    assert ch.phase is Phase.IDLE and ch.data is None


@pytest.mark.parametrize(
    "phase,action",
    [
        (Phase.IDLE, Action.ACK),
        (Phase.IDLE, Action.RELEASE),
        (Phase.REQUESTED, Action.REQUEST),
        (Phase.ACKED, Action.ACK),
        (Phase.RELEASED, Action.REQUEST),
    ],
)
def test_illegal_handshake_actions(phase, action):
    ch = HandshakeChannel(phase=phase, data=AerEvent(1) if phase is Phase.REQUESTED else None)
    with pytest.raises(HandshakeError):
        handshake_step(ch, action, AerEvent(2))


def test_request_requires_data():
    with pytest.raises(HandshakeError):
        handshake_step(HandshakeChannel(), Action.REQUEST)


def test_transfer_helper_delivers_once():
    ch, delivered = transfer(HandshakeChannel(), AerEvent(7))
    assert delivered.addr == 7
    assert ch.phase is Phase.IDLE


def test_all_interleavings_of_two_transfers():
    # Model-check: any interleaving of two independent channels' legal
    # step sequences delivers each event exactly once, none lost.
    seq = (Action.REQUEST, Action.ACK, Action.RELEASE, Action.COMPLETE)
    events = (AerEvent(11), AerEvent(22))
    for picks in itertools.product((0, 1), repeat=8):
        if picks.count(0) != 4:
            continue
        channels = [HandshakeChannel(), HandshakeChannel()]
        progress = [0, 0]
        delivered = [[], []]
        for side in picks:
            action = seq[progress[side]]
            data = events[side] if action is Action.REQUEST else None
            channels[side], out = handshake_step(channels[side], action, data)
            if out is not None:
                delivered[side].append(out)
            progress[side] += 1
        assert delivered[0] == [events[0]]
        assert delivered[1] == [events[1]]


# -- link endpoint --------------------------------------------------------------------


def test_endpoint_roundtrip_and_health():
    link = LinkEndpoint()
    out = []
    for addr in (0, 5, 23, 0xBEEF):
        out.extend(link.receive(link.send(AerEvent(addr))))
    assert [e.addr for e in out] == [0, 5, 23, 0xBEEF]
    health = link.health.as_dict()
    assert health["tx_frames"] == 4 and health["rx_frames"] == 4
    assert health["framing_errors"] == 0 and health["symbol_errors"] == 0


def test_endpoint_counts_corruption():
    link = LinkEndpoint()
    states = link.send(AerEvent(77))
    states[2] ^= 0b0000001
    with pytest.raises((LineError, FramingError)):
        link.receive(states)
    health = link.health.as_dict()
    assert health["symbol_errors"] + health["framing_errors"] == 1
