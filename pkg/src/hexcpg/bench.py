"""Kernel backend comparison: throughput and bit-identity.

Builds a seeded random network, runs the identical workload on the
pure and compiled stepping kernels, and reports neuron-updates/s.
Also asserts both spike trains are exactly equal, which is the
cross-backend determinism contract.
"""

from __future__ import annotations

import random
import time

from . import _kernel
from .snn import Network, NetworkSpec, NeuronGroup, NeuronParams, Synapse


def random_network_spec(n_neurons: int, fan_out: int, seed: int = 7) -> NetworkSpec:
    rng = random.Random(seed)
    synapses = []
    for pre in range(n_neurons):
        for _ in range(fan_out):
            post = rng.randrange(n_neurons)
            weight = rng.uniform(50.0, 900.0)
            if rng.random() < 0.25:
                weight = -weight
            synapses.append(Synapse(pre, post, weight, rng.randint(1, 12)))
    return NetworkSpec(groups=[NeuronGroup(n_neurons, NeuronParams())], synapses=synapses)


def _drive_stimuli(n_neurons: int, n_ticks: int, seed: int = 11):
    rng = random.Random(seed)
    stimuli = []
    for t in range(0, n_ticks, 3):
        stimuli.append((t, rng.randrange(n_neurons), rng.uniform(300.0, 800.0)))
    return stimuli


def run_backend(backend_name: str, spec: NetworkSpec, stimuli, n_ticks: int):
    """(spike train, elapsed seconds) for one backend on the workload."""
    backend = _kernel.get_backend(backend_name)
    net = Network(spec)
    original = _kernel.step_tick
    # Route this run through the requested backend only.
    _kernel.step_tick = backend.step_tick
    try:
        start = time.perf_counter()
        train = net.run(stimuli, n_ticks)
        elapsed = time.perf_counter() - start
    finally:
        _kernel.step_tick = original
    return train, elapsed


def run_benchmark(n_neurons: int = 400, fan_out: int = 20, n_ticks: int = 4000) -> dict:
    spec = random_network_spec(n_neurons, fan_out)
    stimuli = _drive_stimuli(n_neurons, n_ticks)
    results = {}
    trains = {}
    for name in _kernel.available_backends():
        train, elapsed = run_backend(name, spec, stimuli, n_ticks)
        trains[name] = train
        results[name] = {
            "seconds": elapsed,
            "ticks_per_s": n_ticks / elapsed,
            "neuron_updates_per_s": n_neurons * n_ticks / elapsed,
            "spikes": len(train),
        }
    names = list(trains)
    identical = all(trains[names[0]] == trains[n] for n in names[1:])
    return {
        "n_neurons": n_neurons,
        "fan_out": fan_out,
        "n_ticks": n_ticks,
        "backends": results,
        "trains_identical": identical,
    }


def format_benchmark(report: dict) -> str:
    lines = [
        f"network: {report['n_neurons']} neurons x {report['fan_out']} synapses, "
        f"{report['n_ticks']} ticks"
    ]
    for name, r in report["backends"].items():
        lines.append(
            f"  {name:10s} {r['seconds']:8.3f} s   "
            f"{r['neuron_updates_per_s'] / 1e6:8.2f} M updates/s   "
            f"{r['spikes']} spikes"
        )
    backends = report["backends"]
    if "pure" in backends and "compiled" in backends:
        speedup = backends["pure"]["seconds"] / backends["compiled"]["seconds"]
        lines.append(f"  speedup: {speedup:.1f}x")
    lines.append(f"  trains identical: {report['trains_identical']}")
    return "\n".join(lines)
