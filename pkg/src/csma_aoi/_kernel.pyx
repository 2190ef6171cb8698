# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled simulation kernels (hot slot loops).

Mirrors :mod:`csma_aoi._kernel_py` exactly, including the order in which
random numbers are drawn, so both backends emit bit-identical counters.
The generator is xoshiro256++ seeded via splitmix64; bounded draws use the
128-bit multiply-shift reduction.
"""

import numpy as np

BACKEND = "c"

SERVICE_HIST_LEN = 65536
AOI_BATCHES = 32

ctypedef unsigned long long u64
ctypedef long long i64

cdef extern from *:
    ctypedef unsigned long long u128 "unsigned __int128"


cdef struct Rng:
    u64 s0
    u64 s1
    u64 s2
    u64 s3


cdef inline u64 _rotl(u64 x, int k) nogil:
    return (x << k) | (x >> (64 - k))


cdef inline u64 _splitmix64(u64 *state) nogil:
    state[0] = state[0] + <u64>0x9E3779B97F4A7C15
    cdef u64 z = state[0]
    z = (z ^ (z >> 30)) * <u64>0xBF58476D1CE4E5B9
    z = (z ^ (z >> 27)) * <u64>0x94D049BB133111EB
    return z ^ (z >> 31)


cdef inline void _seed(Rng *rng, u64 seed) nogil:
    cdef u64 state = seed
    rng.s0 = _splitmix64(&state)
    rng.s1 = _splitmix64(&state)
    rng.s2 = _splitmix64(&state)
    rng.s3 = _splitmix64(&state)


cdef inline u64 _next_u64(Rng *rng) nogil:
    cdef u64 result = _rotl(rng.s0 + rng.s3, 23) + rng.s0
    cdef u64 t = rng.s1 << 17
    rng.s2 ^= rng.s0
    rng.s3 ^= rng.s1
    rng.s1 ^= rng.s2
    rng.s0 ^= rng.s3
    rng.s2 ^= t
    rng.s3 = _rotl(rng.s3, 45)
    return result


cdef inline double _next_double(Rng *rng) nogil:
    return <double>(_next_u64(rng) >> 11) * (1.0 / 9007199254740992.0)


cdef inline i64 _next_below(Rng *rng, i64 n) nogil:
    return <i64>((<u128>_next_u64(rng) * <u128>n) >> 64)


def rng_stream(seed, count):
    """First ``count`` raw 64-bit outputs for the given seed (parity checks)."""
    cdef Rng rng
    _seed(&rng, <u64>(int(seed) & 0xFFFFFFFFFFFFFFFF))
    return [_next_u64(&rng) for _ in range(count)]


def simulate_slots(n_nodes, packet_rate, min_window, horizon, warmup, seed,
                   stage_cap=24, record_node=-1, trace=False):
    """Run the N-node protocol for ``horizon`` slots; returns raw counters."""
    cdef i64 n = n_nodes
    cdef double p = packet_rate
    cdef i64 w0 = min_window
    cdef i64 n_slots = horizon
    cdef i64 n_warm = warmup
    cdef i64 cap_stage = stage_cap
    cdef i64 rec = record_node
    cdef bint want_trace = bool(trace)
    cdef Rng rng
    _seed(&rng, <u64>(int(seed) & 0xFFFFFFFFFFFFFFFF))

    cdef i64 measured = n_slots - n_warm
    cdef i64 half = measured // 2

    stage_a = np.full(n, -1, dtype=np.int64)
    counter_a = np.full(n, -1, dtype=np.int64)
    activated_a = np.full(n, -1, dtype=np.int64)
    hol_a = np.zeros(n, dtype=np.int64)
    base_a = np.zeros(n, dtype=np.int64)      # age(m) = m - base + 1
    qstart_a = np.zeros(n, dtype=np.int64)
    qlen_a = np.zeros(n, dtype=np.int64)
    txbuf_a = np.zeros(n, dtype=np.int64)
    cdef i64 qcap = 64
    qbuf_a = np.zeros((n, qcap), dtype=np.int64)

    cdef i64[::1] stage = stage_a
    cdef i64[::1] counter = counter_a
    cdef i64[::1] activated = activated_a
    cdef i64[::1] hol = hol_a
    cdef i64[::1] base = base_a
    cdef i64[::1] qstart = qstart_a
    cdef i64[::1] qlen = qlen_a
    cdef i64[::1] txbuf = txbuf_a
    cdef i64[:, ::1] qbuf = qbuf_a

    hist_a = np.zeros(SERVICE_HIST_LEN, dtype=np.int64)
    batch_age_a = np.zeros(AOI_BATCHES, dtype=np.int64)
    batch_slots_a = np.zeros(AOI_BATCHES, dtype=np.int64)
    cdef i64[::1] hist = hist_a
    cdef i64[::1] batch_age = batch_age_a
    cdef i64[::1] batch_slots = batch_slots_a

    ages_a = np.zeros(n_slots if rec >= 0 else 0, dtype=np.int64)
    trace_kind_a = np.zeros(n_slots if want_trace else 0, dtype=np.int8)
    trace_detail_a = np.zeros(n_slots if want_trace else 0, dtype=np.int32)
    trace_queue_a = np.zeros(n_slots if want_trace else 0, dtype=np.int64)
    cdef i64[::1] ages_out = ages_a
    cdef signed char[::1] trace_kind = trace_kind_a
    cdef int[::1] trace_detail = trace_detail_a
    cdef i64[::1] trace_queue = trace_queue_a

    cdef i64 arrivals_total = 0, delivered_total = 0, queue_total = 0
    cdef i64 ch_idle = 0, ch_success = 0, ch_collision = 0
    cdef i64 attempts = 0, collided_attempts = 0
    cdef i64 idle_node_slots = 0, successes = 0
    cdef i64 age_sum = 0, system_time_sum = 0, waiting_time_sum = 0
    cdef i64 service_sum = 0, service_sumsq = 0, service_overflow = 0
    cdef i64 queue_sum_first = 0, queue_sum_second = 0
    cdef i64 idle_count = n, base_sum = 0

    cdef i64 m, i, t, ntx, gen, st, sv, s_eff, delivered_node, delivered_gen
    cdef i64 pos, b, slot_ages
    cdef bint in_window

    for m in range(n_slots):
        in_window = m >= n_warm
        if in_window:
            idle_node_slots += idle_count

        # (a) Bernoulli arrivals, node order; activation draws its counter.
        for i in range(n):
            if _next_double(&rng) < p:
                arrivals_total += 1
                queue_total += 1
                if qlen[i] == qcap:
                    qbuf_a, qcap = _grow(qbuf_a, qstart_a, qlen_a, qcap)
                    qbuf = qbuf_a
                pos = (qstart[i] + qlen[i]) & (qcap - 1)
                qbuf[i, pos] = m
                qlen[i] += 1
                if stage[i] < 0:
                    stage[i] = 0
                    counter[i] = _next_below(&rng, w0)
                    activated[i] = m
                    hol[i] = m + 1
                    idle_count -= 1

        # (b) contention: backlogged, not activated this slot, counter zero.
        ntx = 0
        for i in range(n):
            if stage[i] >= 0 and activated[i] != m and counter[i] == 0:
                txbuf[ntx] = i
                ntx += 1

        delivered_node = -1
        delivered_gen = -1
        if ntx == 0:
            ch_idle += 1
        elif ntx == 1:
            # (c) success: head-of-line packet leaves.
            ch_success += 1
            i = txbuf[0]
            gen = qbuf[i, qstart[i]]
            qstart[i] = (qstart[i] + 1) & (qcap - 1)
            qlen[i] -= 1
            queue_total -= 1
            delivered_total += 1
            delivered_node = i
            delivered_gen = gen
            st = m - gen
            sv = m - hol[i] + 1
            if in_window:
                successes += 1
                system_time_sum += st
                waiting_time_sum += st - sv
                service_sum += sv
                service_sumsq += sv * sv
                if sv < SERVICE_HIST_LEN:
                    hist[sv] += 1
                else:
                    service_overflow += 1
            if qlen[i] > 0:
                stage[i] = 0
                counter[i] = _next_below(&rng, w0)
                hol[i] = m + 1
            else:
                stage[i] = -1
                counter[i] = -1
                idle_count += 1
        else:
            # (d) collision: each transmitter backs off one stage further.
            ch_collision += 1
            for t in range(ntx):
                i = txbuf[t]
                stage[i] += 1
                s_eff = stage[i] if stage[i] < cap_stage else cap_stage
                counter[i] = _next_below(&rng, w0 << s_eff)

        if in_window:
            attempts += ntx
            if ntx >= 2:
                collided_attempts += ntx

        # (e) quiet channel: counters tick down; otherwise they freeze.
        if ntx == 0:
            for i in range(n):
                if stage[i] >= 0 and activated[i] != m:
                    counter[i] -= 1

        # (f) ages: lazily age(m) = m - base + 1; delivery resets base.
        if delivered_node >= 0:
            base_sum += delivered_gen - base[delivered_node]
            base[delivered_node] = delivered_gen
        if in_window:
            slot_ages = n * (m + 1) - base_sum
            age_sum += slot_ages
            b = (m - n_warm) * AOI_BATCHES // measured
            batch_age[b] += slot_ages
            batch_slots[b] += 1
            if m - n_warm < half:
                queue_sum_first += queue_total
            else:
                queue_sum_second += queue_total

        if rec >= 0:
            ages_out[m] = m - base[rec] + 1
        if want_trace:
            trace_kind[m] = <signed char>(0 if ntx == 0 else (1 if ntx == 1 else 2))
            if ntx == 1:
                trace_detail[m] = <int>delivered_node
            elif ntx > 1:
                trace_detail[m] = <int>ntx
            trace_queue[m] = queue_total

    raw = {
        "arrivals_total": arrivals_total,
        "delivered_total": delivered_total,
        "final_queue_total": queue_total,
        "ch_idle": ch_idle,
        "ch_success": ch_success,
        "ch_collision": ch_collision,
        "slots_measured": measured,
        "attempts": attempts,
        "collided_attempts": collided_attempts,
        "idle_node_slots": idle_node_slots,
        "successes": successes,
        "age_sum": age_sum,
        "system_time_sum": system_time_sum,
        "waiting_time_sum": waiting_time_sum,
        "service_sum": service_sum,
        "service_sumsq": service_sumsq,
        "service_overflow": service_overflow,
        "service_hist": hist_a,
        "batch_age_sums": batch_age_a,
        "batch_slots": batch_slots_a,
        "queue_sum_first": queue_sum_first,
        "queue_sum_second": queue_sum_second,
    }
    if rec >= 0:
        raw["ages"] = ages_a
    if want_trace:
        raw["trace_kind"] = trace_kind_a
        raw["trace_detail"] = trace_detail_a
        raw["trace_queue"] = trace_queue_a
    return raw


def _grow(qbuf_a, qstart_a, qlen_a, qcap):
    """Double the ring-buffer capacity, linearizing every node's queue."""
    n = qbuf_a.shape[0]
    new = np.zeros((n, qcap * 2), dtype=np.int64)
    for i in range(n):
        ln = int(qlen_a[i])
        if ln:
            idx = (int(qstart_a[i]) + np.arange(ln)) & (qcap - 1)
            new[i, :ln] = qbuf_a[i, idx]
        qstart_a[i] = 0
    return new, qcap * 2


def queue_sim(packet_rate, service_rate, horizon, seed):
    """Single Geom/Geom/1 queue with an AoI sawtooth; returns raw counters."""
    cdef double p = packet_rate
    cdef double mu = service_rate
    cdef i64 n_slots = horizon
    cdef Rng rng
    _seed(&rng, <u64>(int(seed) & 0xFFFFFFFFFFFFFFFF))

    cdef i64 qcap = 64
    gen_a = np.zeros(qcap, dtype=np.int64)
    x_a = np.zeros(qcap, dtype=np.int64)
    cdef i64[::1] genbuf = gen_a
    cdef i64[::1] xbuf = x_a

    cdef i64 qstart = 0, qcount = 0
    cdef i64 hol_start = 0, prev_arrival = -1
    cdef i64 arrivals = 0, delivered = 0
    cdef i64 age = 0, age_sum = 0
    cdef i64 system_sum = 0, system_sumsq = 0
    cdef i64 waiting_sum = 0, xw_sum = 0, xw_count = 0
    cdef i64 m, u, x, t, s, pos
    cdef bint delivered_now

    for m in range(n_slots):
        if _next_double(&rng) < p:
            x = m - prev_arrival if prev_arrival >= 0 else 0
            prev_arrival = m
            if qcount == 0:
                hol_start = m + 1
            if qcount == qcap:
                gen_a, x_a, qstart, qcap = _grow_queue(gen_a, x_a, qstart, qcount, qcap)
                genbuf = gen_a
                xbuf = x_a
            pos = (qstart + qcount) & (qcap - 1)
            genbuf[pos] = m
            xbuf[pos] = x
            qcount += 1
            arrivals += 1

        delivered_now = False
        if qcount > 0 and hol_start <= m:
            if _next_double(&rng) < mu:
                u = genbuf[qstart]
                x = xbuf[qstart]
                qstart = (qstart + 1) & (qcap - 1)
                qcount -= 1
                delivered_now = True
                delivered += 1
                t = m - u
                s = m - hol_start + 1
                system_sum += t
                system_sumsq += t * t
                waiting_sum += t - s
                if x > 0:
                    xw_sum += x * (t - s)
                    xw_count += 1
                if qcount > 0:
                    hol_start = m + 1
                age = t + 1
        if not delivered_now:
            age += 1
        age_sum += age

    return {
        "arrivals": arrivals,
        "delivered": delivered,
        "final_queue": qcount,
        "age_sum": age_sum,
        "system_sum": system_sum,
        "system_sumsq": system_sumsq,
        "waiting_sum": waiting_sum,
        "xw_sum": xw_sum,
        "xw_count": xw_count,
    }


def _grow_queue(gen_a, x_a, qstart, qcount, qcap):
    new_gen = np.zeros(qcap * 2, dtype=np.int64)
    new_x = np.zeros(qcap * 2, dtype=np.int64)
    idx = (int(qstart) + np.arange(int(qcount))) & (qcap - 1)
    new_gen[:qcount] = gen_a[idx]
    new_x[:qcount] = x_a[idx]
    return new_gen, new_x, 0, qcap * 2
