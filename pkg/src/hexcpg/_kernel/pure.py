"""Reference tick kernel in plain Python.

This is the semantic ground truth for one network tick. The compiled
kernel in ``_speedups.pyx`` mirrors it statement for statement; any
change here must be made there as well, in the same operation order,
or the bit-identical-backends guarantee breaks.

Per-tick update order (fixed; the rest of the package depends on it):
  1. deliver pending synaptic arrivals for this tick into i_exc/i_inh
  2. decay both synaptic currents exponentially
  3. integrate the membrane (exact-exponential step, held during
     refractory ticks with v clamped to v_reset)
  4. threshold test; a spike resets v, arms the refractory counter and
     schedules deliveries at t + delay into the ring buffer
"""


def step_tick(
    n,
    t,
    v,
    i_exc,
    i_inh,
    refrac_left,
    v_rest,
    v_reset,
    v_thresh,
    v_min,
    decay_m,
    one_minus_decay_m,
    decay_se,
    decay_si,
    t_refrac,
    syn_start,
    syn_post,
    syn_delay,
    syn_weight,
    buf_exc,
    buf_inh,
    ring_len,
    ext,
    spikes_out,
):
    """Advance every neuron by one tick; return the number of spikes.

    Spiking neuron ids are written to ``spikes_out`` in ascending order
    (neurons are visited in id order).
    """
    slot = t % ring_len
    count = 0
    for i in range(n):
        i_exc[i] = (i_exc[i] + buf_exc[slot, i]) * decay_se[i]
        i_inh[i] = (i_inh[i] + buf_inh[slot, i]) * decay_si[i]
        buf_exc[slot, i] = 0.0
        buf_inh[slot, i] = 0.0
        total = i_exc[i] + i_inh[i] + ext[i]
        if refrac_left[i] > 0:
            refrac_left[i] -= 1
            v[i] = v_reset[i]
        else:
            v[i] = v_rest[i] + (v[i] - v_rest[i]) * decay_m[i] + total * one_minus_decay_m[i]
            if v[i] < v_min[i]:
                v[i] = v_min[i]
            if v[i] >= v_thresh[i]:
                spikes_out[count] = i
                count += 1
                v[i] = v_reset[i]
                refrac_left[i] = t_refrac[i]

    for k in range(count):
        pre = spikes_out[k]
        for s in range(syn_start[pre], syn_start[pre + 1]):
            dst = (t + syn_delay[s]) % ring_len
            w = syn_weight[s]
            if w >= 0.0:
                buf_exc[dst, syn_post[s]] += w
            else:
                buf_inh[dst, syn_post[s]] += w
    return count
