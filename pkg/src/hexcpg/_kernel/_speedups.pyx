# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled tick kernel. Mirrors pure.py statement for statement.

Compiled with -ffp-contract=off so every double operation matches the
interpreter's IEEE-754 sequence exactly; do not reorder expressions.
"""


def step_tick(
    int n,
    long t,
    double[::1] v,
    double[::1] i_exc,
    double[::1] i_inh,
    int[::1] refrac_left,
    double[::1] v_rest,
    double[::1] v_reset,
    double[::1] v_thresh,
    double[::1] v_min,
    double[::1] decay_m,
    double[::1] one_minus_decay_m,
    double[::1] decay_se,
    double[::1] decay_si,
    int[::1] t_refrac,
    long[::1] syn_start,
    int[::1] syn_post,
    int[::1] syn_delay,
    double[::1] syn_weight,
    double[:, ::1] buf_exc,
    double[:, ::1] buf_inh,
    int ring_len,
    double[::1] ext,
    int[::1] spikes_out,
):
    cdef int i, count = 0
    cdef int k, pre
    cdef long s, slot, dst
    cdef double total, w

    slot = t % ring_len
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
