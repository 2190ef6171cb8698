"""Monte Carlo slot simulation of the N-node CSMA/CA network.

Wraps the kernel backends with typed configuration and statistics.  A run is
deterministic in its seed: repeating a configuration reproduces the counters
bit for bit (and therefore any file written from them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .analytic import NetworkParams
from .errors import ParameterError
from .kernels import get_kernel
from .world import NodeState, SlotWorld

__all__ = [
    "SimulationConfig",
    "SimulationStats",
    "simulate",
    "record_aoi_path",
    "NodeState",
    "SlotWorld",
]

DEFAULT_SEED = 0x5EED


@dataclass(frozen=True)
class SimulationConfig:
    """A reproducible simulation run.

    ``warmup`` slots are excluded from every averaged statistic; totals used
    by conservation checks cover the whole horizon.  ``stage_cap`` stops the
    window doubling (the protocol allows unbounded stages; stages beyond the
    cap keep the capped window and are reached with probability <= p_cl**cap).
    """

    params: NetworkParams
    horizon: int
    warmup: int = 0
    seed: int = DEFAULT_SEED
    stage_cap: int = 24

    def __post_init__(self):
        if not isinstance(self.horizon, int) or not isinstance(self.warmup, int):
            raise ParameterError("horizon and warmup must be integers")
        if not self.horizon > self.warmup >= 0:
            raise ParameterError(
                f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if not isinstance(self.stage_cap, int) or self.stage_cap < 0:
            raise ParameterError(f"stage_cap must be an integer >= 0")


@dataclass(frozen=True)
class SimulationStats:
    """Empirical counterparts of the analytic quantities plus run accounting.

    Rate estimates are over post-warmup slots; ``total_*`` and the channel
    slot counts cover the full horizon (so arrivals = deliveries + final
    queue exactly, and idle + success + collision slots = horizon).
    """

    config: SimulationConfig
    backend: str
    empirical_p_tx: float
    empirical_p_cl: float
    empirical_p_idle: float
    empirical_mu: float
    mean_aoi: float
    mean_aoi_se: float
    mean_system_time: float
    mean_waiting_time: float
    mean_service_time: float
    var_service_time: float
    delivered: int
    total_arrivals: int
    total_delivered: int
    final_queue_len: int
    slots_measured: int
    channel_idle_slots: int
    channel_success_slots: int
    channel_collision_slots: int
    service_time_histogram: np.ndarray = field(repr=False)
    service_time_overflow: int
    mean_queue_len: float
    queue_len_trend: float
    stable: bool


def _stats_from_raw(cfg, raw, backend):
    n = cfg.params.n_nodes
    measured = raw["slots_measured"]
    node_slots = n * measured
    attempts = raw["attempts"]
    backlogged = node_slots - raw["idle_node_slots"]

    batch_age = raw["batch_age_sums"]
    batch_slots = raw["batch_slots"]
    nonempty = batch_slots > 0
    batch_means = batch_age[nonempty] / (n * batch_slots[nonempty])
    if batch_means.size > 1:
        aoi_se = float(np.std(batch_means, ddof=1) / math.sqrt(batch_means.size))
    else:
        aoi_se = float("nan")

    successes = raw["successes"]
    if successes > 0:
        mean_service = raw["service_sum"] / successes
        var_service = raw["service_sumsq"] / successes - mean_service**2
        mean_system = raw["system_time_sum"] / successes
        mean_waiting = raw["waiting_time_sum"] / successes
    else:
        mean_service = var_service = mean_system = mean_waiting = float("nan")

    hist = raw["service_hist"]
    top = int(np.max(np.nonzero(hist)[0])) + 1 if np.any(hist) else 1

    q1 = raw["queue_sum_first"]
    q2 = raw["queue_sum_second"]
    half = measured // 2
    mean_q1 = q1 / half if half else 0.0
    mean_q2 = q2 / (measured - half) if measured - half else 0.0
    trend = mean_q2 - mean_q1
    # Growing queues mean the configuration cannot be stable.
    stable = trend <= max(2.0, 0.1 * mean_q1)

    return SimulationStats(
        config=cfg,
        backend=backend,
        empirical_p_tx=attempts / node_slots,
        empirical_p_cl=raw["collided_attempts"] / attempts if attempts else 0.0,
        empirical_p_idle=raw["idle_node_slots"] / node_slots,
        empirical_mu=successes / backlogged if backlogged else float("nan"),
        mean_aoi=raw["age_sum"] / node_slots,
        mean_aoi_se=aoi_se,
        mean_system_time=mean_system,
        mean_waiting_time=mean_waiting,
        mean_service_time=mean_service,
        var_service_time=var_service,
        delivered=successes,
        total_arrivals=raw["arrivals_total"],
        total_delivered=raw["delivered_total"],
        final_queue_len=raw["final_queue_total"],
        slots_measured=measured,
        channel_idle_slots=raw["ch_idle"],
        channel_success_slots=raw["ch_success"],
        channel_collision_slots=raw["ch_collision"],
        service_time_histogram=hist[:top].copy(),
        service_time_overflow=raw["service_overflow"],
        mean_queue_len=(q1 + q2) / measured if measured else 0.0,
        queue_len_trend=trend,
        stable=stable,
    )


def _run_raw(cfg, record_node=-1, trace=False, backend=None):
    kernel = get_kernel(backend)
    raw = kernel.simulate_slots(
        cfg.params.n_nodes, cfg.params.packet_rate, cfg.params.min_window,
        cfg.horizon, cfg.warmup, cfg.seed, cfg.stage_cap,
        record_node=record_node, trace=trace)
    return raw, kernel.BACKEND


def simulate(cfg, backend=None):
    """Run the configured simulation and aggregate its statistics."""
    raw, name = _run_raw(cfg, backend=backend)
    return _stats_from_raw(cfg, raw, name)


def simulate_with_trace(cfg, backend=None):
    """Like :func:`simulate` but also returns per-slot channel events.

    Returns ``(stats, kind, detail, queue_total)`` where ``kind[m]`` is
    0 idle / 1 success / 2 collision, ``detail[m]`` the delivering node or
    the collision multiplicity, and ``queue_total[m]`` the buffered packets
    across all nodes at the end of slot m.
    """
    raw, name = _run_raw(cfg, trace=True, backend=backend)
    stats = _stats_from_raw(cfg, raw, name)
    return stats, raw["trace_kind"], raw["trace_detail"], raw["trace_queue"]


def record_aoi_path(cfg, node, backend=None):
    """Sawtooth age sample path of one node: array of (slot, age) rows.

    The age is sampled at each slot end; a delivery in slot m of a packet
    generated in slot u resets it to m - u + 1.
    """
    if not isinstance(node, int) or not 0 <= node < cfg.params.n_nodes:
        raise ParameterError(
            f"node must lie in [0, {cfg.params.n_nodes}), got {node!r}")
    raw, _ = _run_raw(cfg, record_node=node, backend=backend)
    ages = raw["ages"]
    return np.column_stack([np.arange(cfg.horizon, dtype=np.int64), ages])
