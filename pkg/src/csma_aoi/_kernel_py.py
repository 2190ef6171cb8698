"""Pure-Python simulation kernels (fallback backend).

Drives :class:`csma_aoi.world.SlotWorld` slot by slot and accumulates the
same raw counters as the compiled kernel in :mod:`csma_aoi._kernel`.  The
two backends consume identical random streams and must produce bit-identical
counter dictionaries; a parity test enforces this.
"""

from __future__ import annotations

import numpy as np

from .rng import Xoshiro256
from .world import OUTCOME_COLLISION, OUTCOME_SUCCESS, SlotWorld

BACKEND = "python"

SERVICE_HIST_LEN = 65536
AOI_BATCHES = 32


def rng_stream(seed, count):
    """First ``count`` raw 64-bit outputs for the given seed (parity checks)."""
    rng = Xoshiro256(seed)
    return [rng.next_u64() for _ in range(count)]


def simulate_slots(n_nodes, packet_rate, min_window, horizon, warmup, seed,
                   stage_cap=24, record_node=-1, trace=False):
    """Run the N-node protocol for ``horizon`` slots; returns raw counters."""
    world = SlotWorld(n_nodes, packet_rate, min_window, stage_cap)
    rng = Xoshiro256(seed)
    measured = horizon - warmup
    half = measured // 2

    arrivals_total = 0
    ch_counts = [0, 0, 0]
    attempts = 0
    collided_attempts = 0
    idle_node_slots = 0
    successes = 0
    delivered_total = 0
    age_sum = 0
    system_time_sum = 0
    waiting_time_sum = 0
    service_sum = 0
    service_sumsq = 0
    service_overflow = 0
    queue_sum_first = 0
    queue_sum_second = 0
    service_hist = np.zeros(SERVICE_HIST_LEN, dtype=np.int64)
    batch_age_sums = np.zeros(AOI_BATCHES, dtype=np.int64)
    batch_slots = np.zeros(AOI_BATCHES, dtype=np.int64)

    ages_out = np.zeros(horizon, dtype=np.int64) if record_node >= 0 else None
    if trace:
        trace_kind = np.zeros(horizon, dtype=np.int8)
        trace_detail = np.zeros(horizon, dtype=np.int32)
        trace_queue = np.zeros(horizon, dtype=np.int64)

    queue_total = 0
    for m in range(horizon):
        in_window = m >= warmup
        if in_window:
            idle_node_slots += sum(1 for node in world.nodes if node.is_idle)

        before = queue_total
        outcome = world.step(rng)
        queue_total = sum(len(node.queue) for node in world.nodes)

        n_tx = len(outcome.transmitters)
        ch_counts[outcome.kind] += 1
        if outcome.kind == OUTCOME_SUCCESS:
            delivered_total += 1
            arrivals_total += queue_total - before + 1
        else:
            arrivals_total += queue_total - before

        if in_window:
            attempts += n_tx
            if outcome.kind == OUTCOME_COLLISION:
                collided_attempts += n_tx
            if outcome.kind == OUTCOME_SUCCESS:
                successes += 1
                system_time_sum += outcome.system_time
                waiting_time_sum += outcome.system_time - outcome.service_time
                service_sum += outcome.service_time
                service_sumsq += outcome.service_time * outcome.service_time
                if outcome.service_time < SERVICE_HIST_LEN:
                    service_hist[outcome.service_time] += 1
                else:
                    service_overflow += 1
            ages = sum(node.aoi for node in world.nodes)
            age_sum += ages
            b = (m - warmup) * AOI_BATCHES // measured
            batch_age_sums[b] += ages
            batch_slots[b] += 1
            if m - warmup < half:
                queue_sum_first += queue_total
            else:
                queue_sum_second += queue_total

        if ages_out is not None:
            ages_out[m] = world.nodes[record_node].aoi
        if trace:
            trace_kind[m] = outcome.kind
            if outcome.kind == OUTCOME_SUCCESS:
                trace_detail[m] = outcome.delivered_node
            elif outcome.kind == OUTCOME_COLLISION:
                trace_detail[m] = n_tx
            trace_queue[m] = queue_total

    raw = {
        "arrivals_total": arrivals_total,
        "delivered_total": delivered_total,
        "final_queue_total": queue_total,
        "ch_idle": ch_counts[0],
        "ch_success": ch_counts[1],
        "ch_collision": ch_counts[2],
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
        "service_hist": service_hist,
        "batch_age_sums": batch_age_sums,
        "batch_slots": batch_slots,
        "queue_sum_first": queue_sum_first,
        "queue_sum_second": queue_sum_second,
    }
    if ages_out is not None:
        raw["ages"] = ages_out
    if trace:
        raw["trace_kind"] = trace_kind
        raw["trace_detail"] = trace_detail
        raw["trace_queue"] = trace_queue
    return raw


def queue_sim(packet_rate, service_rate, horizon, seed):
    """Single Geom/Geom/1 queue with an AoI sawtooth; returns raw counters.

    Late-arrival timing: an arrival in slot m can start service in slot m+1
    at the earliest, so system time (delivery slot - generation slot) is at
    least 1.  The age resets to system time + 1 at the delivery slot end.
    """
    rng = Xoshiro256(seed)
    p = packet_rate
    mu = service_rate

    queue = []  # (generation slot, interarrival) pairs, head first
    head = 0
    hol_start = 0
    prev_arrival = -1

    arrivals = 0
    delivered = 0
    age = 0
    age_sum = 0
    system_sum = 0
    system_sumsq = 0
    waiting_sum = 0
    xw_sum = 0
    xw_count = 0

    for m in range(horizon):
        if rng.next_double() < p:
            x = m - prev_arrival if prev_arrival >= 0 else 0
            prev_arrival = m
            if head == len(queue):
                hol_start = m + 1
            queue.append((m, x))
            arrivals += 1

        delivered_now = False
        if head < len(queue) and hol_start <= m:
            if rng.next_double() < mu:
                u, x = queue[head]
                head += 1
                if head * 2 > len(queue):  # compact the consumed prefix
                    del queue[:head]
                    head = 0
                delivered_now = True
                delivered += 1
                t = m - u
                s = m - hol_start + 1
                system_sum += t
                system_sumsq += t * t
                waiting_sum += t - s
                if x > 0:  # first-ever packet has no interarrival
                    xw_sum += x * (t - s)
                    xw_count += 1
                if head < len(queue):
                    hol_start = m + 1
                age = t + 1
        if not delivered_now:
            age += 1
        age_sum += age

    return {
        "arrivals": arrivals,
        "delivered": delivered,
        "final_queue": len(queue) - head,
        "age_sum": age_sum,
        "system_sum": system_sum,
        "system_sumsq": system_sumsq,
        "waiting_sum": waiting_sum,
        "xw_sum": xw_sum,
        "xw_count": xw_count,
    }
