"""Closed-form stationary analysis of an unsaturated slotted CSMA/CA network.

Every node generates packets as a Bernoulli(p) process, contends with binary
exponential backoff (window w_i = 2**i * w0, counters frozen while the
channel is busy), and needs one slot per transmission.  This module evaluates
the resulting stationary quantities in closed form: per-state backoff
occupancy, buffer-idle probability, per-slot service rate, the geometric
system-time parameter of the per-node Geom/Geom/1 queue, and the average age
of information.  Everything here is a pure function of its arguments; the
coupled network fixed point lives in :mod:`csma_aoi.solvers`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import (
    DivergenceError,
    InstabilityError,
    ParameterError,
    SaturationError,
)

__all__ = [
    "NetworkParams",
    "ProtocolSolution",
    "StationaryDistribution",
    "QueueMoments",
    "window_size",
    "stationary_entry",
    "stationary_distribution",
    "idle_probability",
    "service_rate",
    "system_time_parameter",
    "system_time_pgf",
    "average_aoi",
    "queue_moments",
    "aoi_from_area_decomposition",
]


def _require(cond, message):
    if not cond:
        raise ParameterError(message)


@dataclass(frozen=True)
class NetworkParams:
    """Free variables of the network model.

    n_nodes      -- number of contending nodes, N >= 1
    packet_rate  -- per-node, per-slot Bernoulli arrival probability, 0 < p < 1
    min_window   -- stage-0 contention window w0 >= 1 (doubles per stage)
    """

    n_nodes: int
    packet_rate: float
    min_window: int = 8

    def __post_init__(self):
        _require(isinstance(self.n_nodes, int) and self.n_nodes >= 1,
                 f"n_nodes must be an integer >= 1, got {self.n_nodes!r}")
        _require(0.0 < self.packet_rate < 1.0,
                 f"packet_rate must lie in (0, 1), got {self.packet_rate!r}")
        _require(isinstance(self.min_window, int) and self.min_window >= 1,
                 f"min_window must be an integer >= 1, got {self.min_window!r}")

    def window(self, stage):
        """Contention window at the given backoff stage: 2**stage * w0."""
        return window_size(self.min_window, stage)


@dataclass(frozen=True)
class ProtocolSolution:
    """Fixed-point operating point of the network.

    ``stable`` is True when p < mu; when False the queues are critically
    loaded, beta is reported as 0 and avg_aoi as infinity.
    ``residual`` is |p_tx (1 - p_tx)^(N-1) - p| at the returned root.
    """

    p_tx: float
    p_cl: float
    p_idle: float
    mu: float
    beta: float
    avg_aoi: float
    stable: bool
    residual: float = 0.0


@dataclass(frozen=True)
class QueueMoments:
    """Moments of the per-node Geom/Geom/1 queue used by the area method."""

    mean_interarrival: float
    second_moment_interarrival: float
    mean_service: float
    mean_xw: float
    mean_area: float


def window_size(w0, stage):
    """Contention window w_i = 2**i * w0 (exact integer)."""
    _require(isinstance(w0, int) and w0 >= 1, f"w0 must be an integer >= 1, got {w0!r}")
    _require(isinstance(stage, int) and stage >= 0,
             f"stage must be an integer >= 0, got {stage!r}")
    return w0 << stage


def stationary_entry(p, p_cl, w0, i, j):
    """Stationary probability of backoff state (stage i, counter j), buffer-aggregated.

    The counter-0 state is held for exactly one slot per stage visit, so its
    mass is the stage entry rate p * p_cl**i.  A counter j >= 1 is occupied
    whenever the initial draw was >= j, for a mean sojourn 1/(1 - p_cl):

        b(i, 0) = p * p_cl**i
        b(i, j) = p * (w_i - j) * p_cl**i / (w_i * (1 - p_cl)),  1 <= j < w_i
    """
    _require(0.0 < p < 1.0, f"p must lie in (0, 1), got {p!r}")
    _require(0.0 <= p_cl < 1.0, f"p_cl must lie in [0, 1), got {p_cl!r}")
    w_i = window_size(w0, i)
    _require(isinstance(j, int) and 0 <= j <= w_i - 1,
             f"counter j must lie in [0, {w_i - 1}] at stage {i}, got {j!r}")
    if j == 0:
        return p * p_cl**i
    # Ratio first: w_i is an exact (possibly huge) integer, but the counter
    # fraction is always representable.
    return p * ((w_i - j) / w_i) * p_cl**i / (1.0 - p_cl)


def idle_probability(p, p_cl, w0):
    """Stationary probability that a node's buffer is empty.

    Closing the per-stage sums of `stationary_entry` over all stages gives

        p_idle = 1 - p * (4 p_cl^2 - (w0 + 4) p_cl + w0 + 1)
                     / (2 (1 - p_cl)^2 (1 - 2 p_cl))

    which requires p_cl < 1/2 for the window-doubling series to converge.
    A negative value is not clamped: it means the load p cannot be served.
    """
    _require(0.0 < p < 1.0, f"p must lie in (0, 1), got {p!r}")
    _require(0.0 <= p_cl, f"p_cl must lie in [0, 0.5), got {p_cl!r}")
    window_size(w0, 0)
    if p_cl >= 0.5:
        raise DivergenceError(
            f"p_cl = {p_cl!r} >= 0.5: stationary series diverges")
    busy = p * (4.0 * p_cl * p_cl - (w0 + 4.0) * p_cl + w0 + 1.0) \
        / (2.0 * (1.0 - p_cl) ** 2 * (1.0 - 2.0 * p_cl))
    value = 1.0 - busy
    if value < 0.0:
        raise SaturationError(
            f"infeasible load: idle probability {value:.6g} < 0 "
            f"(p = {p:g} exceeds the serviceable rate)", value=value)
    return value


def service_rate(p, p_idle):
    """Per-slot success probability of a backlogged node: mu = p / (1 - p_idle)."""
    _require(0.0 < p < 1.0, f"p must lie in (0, 1), got {p!r}")
    _require(0.0 <= p_idle, f"p_idle must lie in [0, 1), got {p_idle!r}")
    if p_idle >= 1.0:
        raise ParameterError(f"p_idle must lie in [0, 1), got {p_idle!r}")
    mu = p / (1.0 - p_idle)
    if mu > 1.0:
        raise SaturationError(
            f"infeasible model: service rate {mu:.6g} > 1", value=mu)
    return mu


def system_time_parameter(p, mu):
    """Geometric parameter of the system time: beta = (mu - p) / (1 - p).

    System time T of a packet is Pr{T = j} = beta (1 - beta)^(j-1), j >= 1.
    """
    _require(0.0 < p < 1.0, f"p must lie in (0, 1), got {p!r}")
    _require(0.0 < mu <= 1.0, f"mu must lie in (0, 1], got {mu!r}")
    if p >= mu:
        raise InstabilityError(
            f"unstable queue: p = {p!r} >= mu = {mu!r}")
    return (mu - p) / (1.0 - p)


def system_time_pgf(beta, z):
    """PGF of the geometric system time: G(z) = beta z / (1 - (1 - beta) z)."""
    _require(0.0 < beta <= 1.0, f"beta must lie in (0, 1], got {beta!r}")
    _require(0.0 <= z <= 1.0, f"z must lie in [0, 1], got {z!r}")
    return beta * z / (1.0 - (1.0 - beta) * z)


def average_aoi(p, mu):
    """Average age of information of a node, in slots.

    avg = 1/p + p/mu + (1 - p)/(mu - p) - p/mu**2, finite only for p < mu.
    """
    _require(0.0 < p < 1.0, f"p must lie in (0, 1), got {p!r}")
    _require(0.0 < mu <= 1.0, f"mu must lie in (0, 1], got {mu!r}")
    if p >= mu:
        raise InstabilityError(
            f"unbounded age: p = {p!r} >= mu = {mu!r}")
    return 1.0 / p + p / mu + (1.0 - p) / (mu - p) - p / (mu * mu)


def queue_moments(p, mu):
    """Geom/Geom/1 moments entering the sawtooth-area decomposition.

    Interarrival X is geometric(p): E[X] = 1/p, E[X^2] = (2 - p)/p^2.
    Service S is geometric(mu): E[S] = 1/mu.  The interarrival/waiting
    cross-moment follows from the auxiliary series
    H(z) = (1 - beta) p z / (beta (1 - (1 - beta)(1 - p) z)) as

        E[X W] = lim_{z->1} H'(z) = p (1 - beta) / (beta (1 - (1-p)(1-beta))^2).
    """
    beta = system_time_parameter(p, mu)
    mean_x = 1.0 / p
    second_x = (2.0 - p) / (p * p)
    mean_s = 1.0 / mu
    denom = 1.0 - (1.0 - p) * (1.0 - beta)
    mean_xw = p * (1.0 - beta) / (beta * denom * denom)
    mean_area = 0.5 * second_x + 0.5 * mean_x + mean_xw + mean_x * mean_s
    return QueueMoments(
        mean_interarrival=mean_x,
        second_moment_interarrival=second_x,
        mean_service=mean_s,
        mean_xw=mean_xw,
        mean_area=mean_area,
    )


def aoi_from_area_decomposition(p, mu):
    """Average AoI assembled from triangular sawtooth areas: p * E[A].

    Algebraically identical to `average_aoi`; kept as an independent
    assembly so the two evaluation paths can be checked against each other.
    """
    return p * queue_moments(p, mu).mean_area


class StationaryDistribution:
    """Truncated table of buffer-aggregated backoff-state probabilities.

    Entries are produced lazily from the closed forms (windows double per
    stage, so a dense table is impossible for large stage caps).  Index with
    ``dist[i, j]``; per-stage and total masses use exact triangular sums.
    ``tail_mass_bound`` is the exact mass of all stages above ``stage_cap``.
    """

    def __init__(self, p, p_cl, w0, stage_cap=40):
        _require(isinstance(stage_cap, int) and stage_cap >= 0,
                 f"stage_cap must be an integer >= 0, got {stage_cap!r}")
        self.p = p
        self.p_cl = p_cl
        self.w0 = w0
        self.stage_cap = stage_cap
        self.b_idle = idle_probability(p, p_cl, w0)  # validates p, p_cl, w0
        self.tail_mass_bound = self._tail_mass()

    def __getitem__(self, key):
        i, j = key
        _require(isinstance(i, int) and 0 <= i <= self.stage_cap,
                 f"stage must lie in [0, {self.stage_cap}], got {i!r}")
        return stationary_entry(self.p, self.p_cl, self.w0, i, j)

    def stage_mass(self, i):
        """Total mass of stage i: p p_cl^i (1 + (w_i - 1) / (2 (1 - p_cl))).

        Evaluated as p p_cl^i + p (w0 (2 p_cl)^i - p_cl^i) / (2 (1 - p_cl))
        so deep stages underflow gracefully instead of overflowing on w_i.
        """
        _require(isinstance(i, int) and 0 <= i <= self.stage_cap,
                 f"stage must lie in [0, {self.stage_cap}], got {i!r}")
        p, c, w0 = self.p, self.p_cl, self.w0
        return p * c**i + p * (w0 * (2.0 * c)**i - c**i) / (2.0 * (1.0 - c))

    def total_mass(self):
        """b_idle plus the mass of every tabulated backoff state."""
        return self.b_idle + math.fsum(
            self.stage_mass(i) for i in range(self.stage_cap + 1))

    def _tail_mass(self):
        # Exact geometric tails of both per-stage series beyond the cap.
        p, c, w0, cap = self.p, self.p_cl, self.w0, self.stage_cap
        if c == 0.0:
            return 0.0
        t1 = p * c ** (cap + 1) / (1.0 - c)
        t2 = p / (2.0 * (1.0 - c)) * (
            w0 * (2.0 * c) ** (cap + 1) / (1.0 - 2.0 * c)
            - c ** (cap + 1) / (1.0 - c))
        return t1 + t2


def stationary_distribution(p, p_cl, w0, stage_cap=40):
    """Convenience constructor for :class:`StationaryDistribution`."""
    return StationaryDistribution(p, p_cl, w0, stage_cap)
