"""Discrete-time leaky integrate-and-fire network engine.

Current-based LIF with exponential synapses on a fixed 1 ms tick
(1 tick = 1 simulated millisecond everywhere in this package). The
membrane update is the exact-exponential step for a piecewise-constant
input current, so single-neuron behaviour has a closed form the tests
check against. Synapses are weighted and delayed by an integer number
of ticks (minimum 1); deliveries ride a ring buffer sized by the
largest delay.

Everything is deterministic: same spec + same stimuli = bit-identical
spike trains, regardless of which stepping kernel backend is active.
"""

from __future__ import annotations

import copy
import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from . import _kernel


class ConfigError(ValueError):
    """Raised for malformed network specs or unknown neuron ids."""


@dataclass(frozen=True)
class NeuronParams:
    """LIF cell constants. Defaults are conventional cortical-scale values.

    ``v_min`` optionally floors the membrane potential (hardware-style
    lower bound); None leaves hyperpolarization unbounded.
    """

    tau_m: float = 20.0        # membrane time constant, ms
    v_rest: float = -65.0      # mV
    v_reset: float = -70.0     # mV
    v_thresh: float = -50.0    # mV
    t_refrac: int = 2          # ticks
    tau_syn_exc: float = 5.0   # excitatory current decay, ms
    tau_syn_inh: float = 5.0   # inhibitory current decay, ms
    v_min: float | None = None  # mV, lower bound on v (None = unbounded)

    def __post_init__(self):
        if self.v_reset >= self.v_thresh:
            raise ConfigError(f"v_reset {self.v_reset} must be below v_thresh {self.v_thresh}")
        if self.tau_m <= 0:
            raise ConfigError("tau_m must be positive")
        if self.t_refrac < 0:
            raise ConfigError("t_refrac must be >= 0")
        if self.tau_syn_exc <= 0 or self.tau_syn_inh <= 0:
            raise ConfigError("synaptic time constants must be positive")
        if self.v_min is not None and self.v_min > self.v_reset:
            raise ConfigError(f"v_min {self.v_min} must not exceed v_reset {self.v_reset}")


@dataclass(frozen=True)
class Synapse:
    """Weighted, delayed connection. weight < 0 is inhibitory."""

    pre: int
    post: int
    weight: float
    delay: int = 1

    def __post_init__(self):
        if self.delay < 1:
            raise ConfigError(f"synaptic delay must be >= 1 tick, got {self.delay}")


class SpikeEvent(NamedTuple):
    tick: int
    neuron: int


@dataclass
class NeuronGroup:
    count: int
    params: NeuronParams = field(default_factory=NeuronParams)


@dataclass
class NetworkSpec:
    """Declarative network description: parameter groups plus synapses.

    Neuron ids are assigned densely, 0..N-1, in group order.
    """

    groups: list[NeuronGroup] = field(default_factory=list)
    synapses: list[Synapse] = field(default_factory=list)

    @property
    def n_neurons(self) -> int:
        return sum(g.count for g in self.groups)


class Network:
    """A built network: exclusively-owned mutable simulation state.

    Use :func:`build_network` to construct one. ``step`` advances the
    owned state one tick; ``run`` simulates a copy, leaving the
    receiver untouched so repeated runs are reproducible.
    """

    def __init__(self, spec: NetworkSpec):
        n = spec.n_neurons
        params: list[NeuronParams] = []
        for g in spec.groups:
            if g.count < 0:
                raise ConfigError("group count must be >= 0")
            params.extend([g.params] * g.count)
        for syn in spec.synapses:
            if not (0 <= syn.pre < n) or not (0 <= syn.post < n):
                raise ConfigError(
                    f"synapse {syn.pre}->{syn.post} references a neuron outside 0..{n - 1}"
                )

        self.spec = spec
        self.n = n
        self.params = params
        self.tick = 0

        self._v_rest = np.array([p.v_rest for p in params], dtype=np.float64)
        self._v_reset = np.array([p.v_reset for p in params], dtype=np.float64)
        self._v_thresh = np.array([p.v_thresh for p in params], dtype=np.float64)
        self._v_min = np.array(
            [-math.inf if p.v_min is None else p.v_min for p in params], dtype=np.float64
        )
        self._t_refrac = np.array([p.t_refrac for p in params], dtype=np.intc)
        # Decay factors are computed once with math.exp so both kernel
        # backends consume identical constants.
        self._decay_m = np.array([math.exp(-1.0 / p.tau_m) for p in params], dtype=np.float64)
        self._omdm = np.array([1.0 - math.exp(-1.0 / p.tau_m) for p in params], dtype=np.float64)
        self._decay_se = np.array(
            [math.exp(-1.0 / p.tau_syn_exc) for p in params], dtype=np.float64
        )
        self._decay_si = np.array(
            [math.exp(-1.0 / p.tau_syn_inh) for p in params], dtype=np.float64
        )

        order = sorted(range(len(spec.synapses)), key=lambda i: spec.synapses[i].pre)
        start = np.zeros(n + 1, dtype=np.int64)
        for syn in spec.synapses:
            start[syn.pre + 1] += 1
        np.cumsum(start, out=start)
        self._syn_start = start
        self._syn_post = np.array(
            [spec.synapses[i].post for i in order], dtype=np.intc
        )
        self._syn_delay = np.array(
            [spec.synapses[i].delay for i in order], dtype=np.intc
        )
        self._syn_weight = np.array(
            [spec.synapses[i].weight for i in order], dtype=np.float64
        )

        max_delay = max((s.delay for s in spec.synapses), default=0)
        self._ring_len = max_delay + 1
        self._buf_exc = np.zeros((self._ring_len, n), dtype=np.float64)
        self._buf_inh = np.zeros((self._ring_len, n), dtype=np.float64)

        self._v = self._v_rest.copy()
        self._i_exc = np.zeros(n, dtype=np.float64)
        self._i_inh = np.zeros(n, dtype=np.float64)
        self._refrac_left = np.zeros(n, dtype=np.intc)
        self._ext = np.zeros(n, dtype=np.float64)
        self._spikes_out = np.zeros(max(n, 1), dtype=np.intc)

    # -- state views (read-only copies, for tests and snapshots) ---------

    @property
    def v(self) -> np.ndarray:
        return self._v.copy()

    @property
    def i_exc(self) -> np.ndarray:
        return self._i_exc.copy()

    @property
    def i_inh(self) -> np.ndarray:
        return self._i_inh.copy()

    def copy(self) -> "Network":
        return copy.deepcopy(self)

    # -- simulation -------------------------------------------------------

    def step(self, external: Sequence[tuple[int, float]] = ()) -> list[SpikeEvent]:
        """Advance one tick; return this tick's spikes sorted by neuron id."""
        self._ext[:] = 0.0
        for nid, current in external:
            if not (0 <= nid < self.n):
                raise ConfigError(f"external stimulus references unknown neuron {nid}")
            self._ext[nid] += current
        count = _kernel.step_tick(
            self.n,
            self.tick,
            self._v,
            self._i_exc,
            self._i_inh,
            self._refrac_left,
            self._v_rest,
            self._v_reset,
            self._v_thresh,
            self._v_min,
            self._decay_m,
            self._omdm,
            self._decay_se,
            self._decay_si,
            self._t_refrac,
            self._syn_start,
            self._syn_post,
            self._syn_delay,
            self._syn_weight,
            self._buf_exc,
            self._buf_inh,
            self._ring_len,
            self._ext,
            self._spikes_out,
        )
        t = self.tick
        self.tick += 1
        return [SpikeEvent(t, int(self._spikes_out[k])) for k in range(count)]

    def run(
        self, stimuli: Sequence[tuple[int, int, float]], n_ticks: int
    ) -> list[SpikeEvent]:
        """Simulate ``n_ticks`` ticks on a copy; the receiver is untouched.

        ``stimuli`` are (tick, neuron_id, current) entries sorted by tick.
        """
        if n_ticks < 1:
            raise ValueError(f"n_ticks must be >= 1, got {n_ticks}")
        ticks = [s[0] for s in stimuli]
        if any(b < a for a, b in zip(ticks, ticks[1:])):
            raise ValueError("stimuli must be sorted by tick")
        work = self.copy()
        by_tick: dict[int, list[tuple[int, float]]] = {}
        for t, nid, cur in stimuli:
            by_tick.setdefault(t, []).append((nid, cur))
        train: list[SpikeEvent] = []
        end = work.tick + n_ticks
        while work.tick < end:
            train.extend(work.step(by_tick.get(work.tick, ())))
        return train


def step_network(
    net: Network, t: int, external: Sequence[tuple[int, float]] = ()
) -> list[SpikeEvent]:
    """Functional stepping entry point; ``t`` must match the network clock."""
    if t != net.tick:
        raise ValueError(f"step at t={t} but network clock is {net.tick}")
    return net.step(external)


def build_network(spec: NetworkSpec) -> Network:
    return Network(spec)


# -- structured-text spec / CSV interop ----------------------------------


def network_spec_from_dict(data: dict) -> NetworkSpec:
    """Build a spec from the config-file form (see README for the schema)."""
    groups = []
    for g in data.get("neurons", []):
        fields = {k: v for k, v in g.items() if k != "count"}
        groups.append(NeuronGroup(count=int(g["count"]), params=NeuronParams(**fields)))
    synapses = [
        Synapse(pre=int(s["pre"]), post=int(s["post"]),
                weight=float(s["weight"]), delay=int(s.get("delay", 1)))
        for s in data.get("synapses", [])
    ]
    return NetworkSpec(groups=groups, synapses=synapses)


def load_network_spec(path) -> NetworkSpec:
    import yaml

    with open(path) as fh:
        return network_spec_from_dict(yaml.safe_load(fh) or {})


def write_spike_csv(train: Iterable[SpikeEvent], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tick", "neuron_id"])
        for ev in train:
            writer.writerow([ev.tick, ev.neuron])


def read_spike_csv(path) -> list[SpikeEvent]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["tick", "neuron_id"]:
            raise ValueError(f"unexpected spike CSV header: {header}")
        return [SpikeEvent(int(t), int(n)) for t, n in reader]
