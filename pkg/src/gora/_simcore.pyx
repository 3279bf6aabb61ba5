# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled slot-loop kernel; bit-identical twin of _simcore_py.run_kernel.

Draws come straight from each node's PCG64 bit generator via the C
next_double slot, which matches numpy's Generator.random sequence double
for double, so both kernels consume identical streams. The active set is a
swap-remove array with a position index, and back-off resides in a circular
wheel of intrusive linked lists, so one slot costs O(active nodes).
"""

import numpy as np

cimport numpy as cnp
from cpython.pycapsule cimport PyCapsule_GetPointer
from libc.stdlib cimport free, malloc
from numpy.random cimport bitgen_t

cnp.import_array()


def run_kernel(bitgens, Py_ssize_t n, long long b, long long gamma, double tau,
               long long horizon, long long warmup, long long trace_window,
               bint record_ages=False, bint record_events=False):
    """Simulate horizon slots; same contract as _simcore_py.run_kernel."""
    cdef Py_ssize_t i
    cdef long long slot, k, node, nxt_node, winner, transmitters, bucket_idx, w
    cdef double u
    cdef bint meas

    cdef bitgen_t **rngs = <bitgen_t **>malloc(n * sizeof(bitgen_t *))
    if rngs == NULL:
        raise MemoryError
    # the capsules list keeps the generators alive for the whole run
    capsules = [bg.capsule for bg in bitgens]
    for i in range(n):
        rngs[i] = <bitgen_t *>PyCapsule_GetPointer(capsules[i], "BitGenerator")
        if rngs[i] == NULL:
            free(rngs)
            raise ValueError("object is not a numpy bit generator")

    cdef long long wheel_len = gamma + 2
    head_arr = np.full(wheel_len, -1, np.int64)
    nxt_arr = np.full(n, -1, np.int64)
    active_arr = np.arange(n, dtype=np.int64)
    pos_arr = np.arange(n, dtype=np.int64)
    last_arr = np.full(n, -(gamma + 1), np.int64)
    cdef long long[::1] head = head_arr
    cdef long long[::1] nxt = nxt_arr
    cdef long long[::1] active = active_arr
    cdef long long[::1] pos = pos_arr
    cdef long long[::1] last = last_arr
    cdef long long n_active = n

    cdef long long measured = horizon - warmup
    cdef long long n_windows = (measured + trace_window - 1) // trace_window
    hist_arr = np.zeros(n + 1, np.int64)
    wsucc_arr = np.zeros(n_windows, np.int64)
    wact_arr = np.zeros(n_windows, np.int64)
    cdef long long[::1] hist_m = hist_arr
    cdef long long[::1] win_succ = wsucc_arr
    cdef long long[::1] win_act = wact_arr

    cdef long long cap = horizon // 4
    if cap < 1024:
        cap = 1024
    s_slots_arr = np.empty(cap, np.int64)
    s_win_arr = np.empty(cap, np.int32)
    cdef long long[::1] s_slots = s_slots_arr
    cdef cnp.int32_t[::1] s_win = s_win_arr
    cdef long long n_succ = 0

    cdef long long[:, ::1] ages
    cdef signed char[::1] events
    ages_arr = np.empty((horizon, n), np.int64) if record_ages else None
    events_arr = np.empty(horizon, np.int8) if record_events else None
    if record_ages:
        ages = ages_arr
    if record_events:
        events = events_arr

    try:
        for slot in range(horizon):
            if gamma > 0:
                bucket_idx = slot % wheel_len
                node = head[bucket_idx]
                while node != -1:
                    active[n_active] = node
                    pos[node] = n_active
                    n_active += 1
                    nxt_node = nxt[node]
                    nxt[node] = -1
                    node = nxt_node
                head[bucket_idx] = -1
            if record_ages:
                for i in range(n):
                    ages[slot, i] = b + (slot - last[i])
            meas = slot >= warmup
            if meas:
                hist_m[n_active] += 1
                win_act[(slot - warmup) // trace_window] += n_active
            transmitters = 0
            winner = -1
            for k in range(n_active):
                node = active[k]
                u = rngs[node].next_double(rngs[node].state)
                if u < tau:
                    transmitters += 1
                    winner = node
            if transmitters == 1:
                if n_succ == cap:
                    cap = cap * 2
                    s_slots_arr = np.resize(s_slots_arr, cap)
                    s_win_arr = np.resize(s_win_arr, cap)
                    s_slots = s_slots_arr
                    s_win = s_win_arr
                s_slots[n_succ] = slot
                s_win[n_succ] = <cnp.int32_t>winner
                n_succ += 1
                if meas:
                    win_succ[(slot - warmup) // trace_window] += 1
                last[winner] = slot
                if gamma > 0:
                    k = pos[winner]
                    n_active -= 1
                    active[k] = active[n_active]
                    pos[active[k]] = k
                    w = (slot + gamma + 1) % wheel_len
                    nxt[winner] = head[w]
                    head[w] = winner
            if record_events:
                events[slot] = 1 if transmitters == 1 else (0 if transmitters == 0 else 2)
    finally:
        free(rngs)

    return {
        "success_slots": s_slots_arr[:n_succ].copy(),
        "winners": s_win_arr[:n_succ].copy(),
        "hist_m": hist_arr,
        "window_successes": wsucc_arr,
        "window_active": wact_arr,
        "last_success": last_arr,
        "ages": ages_arr,
        "events": events_arr,
    }
