"""Gait-generating network and spike-train analysis.

The network has three layers:

  selectors (3)  one neuron per gait; an external current pulse on a
                 selector starts its gait and shuts the other two down.
  sCPGs (3 x 8)  per gait, two pacemakers forming an excitatory delay
                 loop (loop length = gait period) plus six phase
                 neurons tapping the loop at per-leg delays.
  motor (12)     one relay neuron per servo; each phase neuron drives
                 its leg's femur (lift) and, ``femur_lead`` ticks
                 later, its coxa (swing).

Gait exclusivity comes from the selector's strong, slow-decaying
inhibition onto the other two gaits' pacemakers: in-flight loop pulses
arrive during the blocked window and the old loop dies. A pacemaker
also inhibits its own selector, which makes re-selecting the running
gait a no-op (no second wavefront can be injected).

All relay-style neurons use a 1 ms excitatory synapse time constant so
one suprathreshold pulse produces exactly one spike, which keeps every
timing in this file exact and the whole network bit-deterministic.
"""

from __future__ import annotations

import bisect
import enum
import statistics
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

from .controller import N_SERVOS, Action
from .snn import (
    ConfigError,
    Network,
    NetworkSpec,
    NeuronGroup,
    NeuronParams,
    SpikeEvent,
    Synapse,
    build_network,
)

N_LEGS = 6

#: Leg ids: 0=FR 1=MR 2=BR 3=FL 4=ML 5=BL. Coxa servo = 2*leg, femur = 2*leg+1.
LEG_NAMES = ("FR", "MR", "BR", "FL", "ML", "BL")


class GaitId(enum.IntEnum):
    WALK = 0
    TROT = 1
    RUN = 2


@dataclass(frozen=True)
class GaitSignature:
    """Periodic leg-phase pattern: which legs swing together, and when."""

    period: int
    phase_of_leg: dict[int, float]
    swing_groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        if self.period < len(self.swing_groups):
            raise ConfigError(
                f"period {self.period} smaller than {len(self.swing_groups)} swing groups"
            )
        seen_phases = []
        for group in self.swing_groups:
            phases = {self.phase_of_leg[leg] for leg in group}
            if len(phases) != 1:
                raise ConfigError(f"legs {group} swing together but have unequal phases")
            seen_phases.append(phases.pop())
        if len(set(seen_phases)) != len(seen_phases):
            raise ConfigError("distinct swing groups must have distinct phases")
        if sorted(leg for g in self.swing_groups for leg in g) != list(range(N_LEGS)):
            raise ConfigError("swing groups must partition the six legs")

    def offsets(self) -> dict[int, int]:
        """Per-leg phase in ticks (rounded from the phase fraction)."""
        return {
            leg: round(phase * self.period) % self.period
            for leg, phase in self.phase_of_leg.items()
        }


def _signature(groups: Sequence[Sequence[int]], period: int) -> GaitSignature:
    n = len(groups)
    phase_of_leg = {leg: i / n for i, group in enumerate(groups) for leg in group}
    return GaitSignature(
        period=period,
        phase_of_leg=phase_of_leg,
        swing_groups=tuple(tuple(g) for g in groups),
    )


#: Swing-group order per gait; walk is the classic back-to-front wave.
_GAIT_GROUPS = {
    GaitId.WALK: ((2,), (1,), (0,), (5,), (4,), (3,)),
    GaitId.TROT: ((0, 4), (1, 5), (2, 3)),
    GaitId.RUN: ((0, 4, 2), (1, 3, 5)),
}

DEFAULT_PERIODS = {GaitId.WALK: 12, GaitId.TROT: 9, GaitId.RUN: 8}


def make_signature(gait: GaitId, period: Optional[int] = None) -> GaitSignature:
    return _signature(_GAIT_GROUPS[gait], period or DEFAULT_PERIODS[gait])


def default_signatures() -> dict[GaitId, GaitSignature]:
    return {g: make_signature(g) for g in GaitId}


@dataclass
class CpgConfig:
    """Tunable constants for the gait network; defaults are calibrated."""

    signatures: dict[GaitId, GaitSignature] = field(default_factory=default_signatures)
    femur_lead: int = 1            # ticks the femur (lift) precedes the coxa (swing)
    stim_current: float = 1000.0   # nA, one-tick selector pulse
    exc_weight: float = 1200.0     # relay synapse, fires its target in one tick
    kill_weight: float = -6000.0   # selector -> other gaits' pacemakers
    block_weight: float = -5000.0  # pacemaker -> own selector (restim guard)
    relay_tau_syn_exc: float = 1.0
    pacemaker_tau_syn_inh: float = 5.0
    selector_tau_syn_inh: float = 8.0
    neuron: NeuronParams = field(default_factory=NeuronParams)

    def __post_init__(self):
        if self.femur_lead < 0:
            raise ConfigError("femur_lead must be >= 0 ticks")


@dataclass(frozen=True)
class CpgNetworkLayout:
    """Who is who in the built network."""

    selector_ids: tuple[int, int, int]
    pacemaker_ids: dict[GaitId, tuple[int, int]]
    phase_ids: dict[GaitId, tuple[int, ...]]
    motor_ids: tuple[int, ...]
    id_to_servo: dict[int, int]

    def is_motor(self, neuron: int) -> bool:
        return neuron in self.id_to_servo

    def servo_of(self, neuron: int) -> int:
        return self.id_to_servo[neuron]

    def gait_of_pacemaker(self, neuron: int) -> Optional[GaitId]:
        for gait, ids in self.pacemaker_ids.items():
            if neuron in ids:
                return gait
        return None


def _scpg_synapses(
    cfg: CpgConfig,
    gait: GaitId,
    pace_a: int,
    pace_b: int,
    phase_ids: Sequence[int],
) -> list[Synapse]:
    """Loop plus per-leg taps for one sCPG (ids given by the caller)."""
    sig = cfg.signatures[gait]
    period = sig.period
    d1 = period // 2
    syns = [
        Synapse(pace_a, pace_b, cfg.exc_weight, d1),
        Synapse(pace_b, pace_a, cfg.exc_weight, period - d1),
    ]
    for leg, offset in sig.offsets().items():
        syns.append(Synapse(pace_a, phase_ids[leg], cfg.exc_weight, offset + 1))
    return syns


def _relay_params(cfg: CpgConfig) -> NeuronParams:
    # The membrane floor makes inhibition blocking a property of the
    # synaptic current alone: a killed gait is re-selectable as soon as
    # the inhibitory current has decayed, instead of waiting out an
    # unbounded hyperpolarization.
    return replace(
        cfg.neuron,
        tau_syn_exc=cfg.relay_tau_syn_exc,
        v_min=cfg.neuron.v_reset if cfg.neuron.v_min is None else cfg.neuron.v_min,
    )


def single_scpg_spec(gait: GaitId, cfg: Optional[CpgConfig] = None) -> NetworkSpec:
    """Standalone eight-neuron sCPG: ids 0,1 pacemakers, 2..7 phase neurons.

    Seed it with one suprathreshold current pulse on neuron 0.
    """
    cfg = cfg or CpgConfig()
    relay_exc = _relay_params(cfg)
    pace = replace(relay_exc, tau_syn_inh=cfg.pacemaker_tau_syn_inh)
    return NetworkSpec(
        groups=[NeuronGroup(2, pace), NeuronGroup(6, relay_exc)],
        synapses=_scpg_synapses(cfg, gait, 0, 1, list(range(2, 8))),
    )


def build_cpg_network(cfg: Optional[CpgConfig] = None) -> tuple[Network, CpgNetworkLayout]:
    """Build the full 39-neuron gait network (3 + 3x8 + 12)."""
    cfg = cfg or CpgConfig()
    relay = _relay_params(cfg)
    sel_params = replace(relay, tau_syn_inh=cfg.selector_tau_syn_inh)
    pace_params = replace(relay, tau_syn_inh=cfg.pacemaker_tau_syn_inh)

    groups = [NeuronGroup(3, sel_params)]
    for _ in GaitId:
        groups.append(NeuronGroup(2, pace_params))
        groups.append(NeuronGroup(6, relay))
    groups.append(NeuronGroup(N_SERVOS, relay))

    selector_ids = (0, 1, 2)
    pacemaker_ids: dict[GaitId, tuple[int, int]] = {}
    phase_ids: dict[GaitId, tuple[int, ...]] = {}
    for gait in GaitId:
        base = 3 + 8 * int(gait)
        pacemaker_ids[gait] = (base, base + 1)
        phase_ids[gait] = tuple(range(base + 2, base + 8))
    motor_base = 3 + 8 * len(GaitId)
    motor_ids = tuple(range(motor_base, motor_base + N_SERVOS))

    synapses: list[Synapse] = []
    for gait in GaitId:
        sel = selector_ids[int(gait)]
        pace_a, pace_b = pacemaker_ids[gait]
        synapses.append(Synapse(sel, pace_a, cfg.exc_weight, 1))
        if cfg.kill_weight != 0:
            for other in GaitId:
                if other is gait:
                    continue
                for target in pacemaker_ids[other]:
                    synapses.append(Synapse(sel, target, cfg.kill_weight, 1))
        if cfg.block_weight != 0:
            synapses.append(Synapse(pace_a, sel, cfg.block_weight, 1))
        synapses.extend(_scpg_synapses(cfg, gait, pace_a, pace_b, phase_ids[gait]))
        for leg in range(N_LEGS):
            phase = phase_ids[gait][leg]
            synapses.append(Synapse(phase, motor_ids[2 * leg + 1], cfg.exc_weight, 1))
            synapses.append(Synapse(phase, motor_ids[2 * leg], cfg.exc_weight, 1 + cfg.femur_lead))

    layout = CpgNetworkLayout(
        selector_ids=selector_ids,
        pacemaker_ids=pacemaker_ids,
        phase_ids=phase_ids,
        motor_ids=motor_ids,
        id_to_servo={nid: servo for servo, nid in enumerate(motor_ids)},
    )
    spec = NetworkSpec(groups=groups, synapses=synapses)
    return build_network(spec), layout


def gait_stimulus(
    gait: GaitId, t: int, layout: CpgNetworkLayout, cfg: Optional[CpgConfig] = None
) -> tuple[int, int, float]:
    """One suprathreshold current pulse aimed at the gait's selector."""
    if t < 0:
        raise ValueError("stimulus tick must be >= 0")
    current = (cfg or CpgConfig()).stim_current
    return (t, layout.selector_ids[int(gait)], current)


# -- motor-event extraction ---------------------------------------------------


class MotorEvent(NamedTuple):
    tick: int
    servo: int
    action: Action


class TimedAer(NamedTuple):
    """An address event stamped with its emission tick."""

    tick: int
    addr: int


def motor_events(
    train: Sequence[SpikeEvent], layout: CpgNetworkLayout
) -> tuple[list[MotorEvent], list[TimedAer]]:
    """Map motor-layer spikes to servo commands and their wire events.

    A motor spike at t yields the forward event (addr = servo) at t and
    the flexion/backward event (addr = servo + 12) exactly one tick
    later. Non-motor spikes are ignored.
    """
    motor: list[MotorEvent] = []
    wire: list[TimedAer] = []
    for ev in train:
        if not layout.is_motor(ev.neuron):
            continue
        servo = layout.servo_of(ev.neuron)
        motor.append(MotorEvent(ev.tick, servo, Action.FW))
        motor.append(MotorEvent(ev.tick + 1, servo, Action.BW))
        wire.append(TimedAer(ev.tick, servo))
        wire.append(TimedAer(ev.tick + 1, servo + N_SERVOS))
    motor.sort(key=lambda m: (m.tick, m.servo + (N_SERVOS if m.action is Action.BW else 0)))
    wire.sort()
    return motor, wire


# -- gait classification and timing metrics -----------------------------------

PHASE_TOLERANCE_TICKS = 1


def _bucket_coxa_fw(events: Sequence[MotorEvent]) -> dict[int, list[int]]:
    """Sorted forward-coxa event ticks per leg (window slicing is bisect)."""
    buckets: dict[int, list[int]] = {leg: [] for leg in range(N_LEGS)}
    for ev in events:
        if ev.action is Action.FW and ev.servo % 2 == 0:
            buckets[ev.servo // 2].append(ev.tick)
    for ticks in buckets.values():
        ticks.sort()
    return buckets


def _slice_window(
    buckets: dict[int, list[int]], window: tuple[int, int]
) -> dict[int, list[int]]:
    start, end = window
    out = {}
    for leg, ticks in buckets.items():
        lo = bisect.bisect_left(ticks, start)
        hi = bisect.bisect_left(ticks, end)
        out[leg] = ticks[lo:hi]
    return out


def _coxa_fw_ticks(
    events: Sequence[MotorEvent], window: tuple[int, int]
) -> dict[int, list[int]]:
    return _slice_window(_bucket_coxa_fw(events), window)


def _matches_signature(
    per_leg: dict[int, list[int]], sig: GaitSignature, window: tuple[int, int]
) -> bool:
    start, end = window
    period = sig.period
    if end - start < 2 * period:
        return False
    if any(len(t) < 2 for t in per_leg.values()):
        return False
    for ticks in per_leg.values():
        for a, b in zip(ticks, ticks[1:]):
            if abs((b - a) - period) > PHASE_TOLERANCE_TICKS:
                return False
    offsets = sig.offsets()
    ref_first = per_leg[0][0]
    for leg in range(N_LEGS):
        measured = (per_leg[leg][0] - ref_first) % period
        expected = (offsets[leg] - offsets[0]) % period
        diff = abs(measured - expected)
        if min(diff, period - diff) > PHASE_TOLERANCE_TICKS:
            return False
    return True


def _classify_buckets(
    buckets: dict[int, list[int]],
    window: tuple[int, int],
    signatures: dict[GaitId, GaitSignature],
) -> Optional[GaitId]:
    per_leg = _slice_window(buckets, window)
    matches = [
        gait for gait, sig in signatures.items() if _matches_signature(per_leg, sig, window)
    ]
    return matches[0] if len(matches) == 1 else None


def classify_window(
    events: Sequence[MotorEvent],
    window: tuple[int, int],
    signatures: Optional[dict[GaitId, GaitSignature]] = None,
) -> Optional[GaitId]:
    """The gait whose signature the coxa events match, or None.

    A window matches a gait when every leg's forward-coxa events are
    periodic at the signature period and the leg-to-leg phase offsets
    agree within one tick. Anything mixed (e.g. a transition window)
    matches no signature.
    """
    return _classify_buckets(
        _bucket_coxa_fw(events), window, signatures or default_signatures()
    )


@dataclass(frozen=True)
class ConvergenceResult:
    """Outcome of a convergence measurement; saturated = never settled."""

    delay_ticks: Optional[int]
    saturated: bool
    horizon: int

    @property
    def converged(self) -> bool:
        return not self.saturated


def convergence_delay(
    events: Sequence[MotorEvent],
    t_change: int,
    target: GaitId,
    horizon: int,
    signatures: Optional[dict[GaitId, GaitSignature]] = None,
) -> ConvergenceResult:
    """Smallest d such that every window from t_change + d on reads as target.

    Windows are 2 target periods long and slide one tick at a time up
    to the horizon. If the final window still disagrees the measurement
    is reported as saturated rather than raising.
    """
    signatures = signatures or default_signatures()
    width = 2 * signatures[target].period
    last_start = horizon - width
    if last_start < t_change:
        return ConvergenceResult(None, True, horizon)
    buckets = _bucket_coxa_fw(events)
    last_bad = None
    for start in range(t_change, last_start + 1):
        if _classify_buckets(buckets, (start, start + width), signatures) != target:
            last_bad = start
    if last_bad is None:
        return ConvergenceResult(0, False, horizon)
    if last_bad == last_start:
        return ConvergenceResult(None, True, horizon)
    return ConvergenceResult(last_bad + 1 - t_change, False, horizon)


def pattern_period(
    events: Sequence[MotorEvent], servo: int, window: tuple[int, int]
) -> Optional[float]:
    """Median forward-event interval for one servo, or None if under 3 events."""
    start, end = window
    ticks = [
        ev.tick
        for ev in events
        if ev.servo == servo and ev.action is Action.FW and start <= ev.tick < end
    ]
    if len(ticks) < 3:
        return None
    ticks.sort()
    return float(statistics.median(b - a for a, b in zip(ticks, ticks[1:])))


# -- config loading ------------------------------------------------------------

_GAIT_BY_NAME = {g.name.lower(): g for g in GaitId}


def parse_gait(value) -> GaitId:
    """Accept 0/1/2 or walk/trot/run (case-insensitive)."""
    if isinstance(value, GaitId):
        return value
    if isinstance(value, int):
        return GaitId(value)
    name = str(value).lower()
    if name in _GAIT_BY_NAME:
        return _GAIT_BY_NAME[name]
    raise ConfigError(f"unknown gait {value!r}")


def cpg_config_from_dict(data: dict) -> CpgConfig:
    cfg = CpgConfig()
    periods = dict(DEFAULT_PERIODS)
    for key, period in (data.get("periods") or {}).items():
        periods[parse_gait(key)] = int(period)
    cfg.signatures = {g: make_signature(g, periods[g]) for g in GaitId}
    for name in (
        "femur_lead",
        "stim_current",
        "exc_weight",
        "kill_weight",
        "block_weight",
        "relay_tau_syn_exc",
        "pacemaker_tau_syn_inh",
        "selector_tau_syn_inh",
    ):
        if name in data:
            setattr(cfg, name, type(getattr(cfg, name))(data[name]))
    if "neuron" in data:
        cfg.neuron = NeuronParams(**data["neuron"])
    cfg.__post_init__()
    return cfg
