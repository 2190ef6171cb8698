"""Root finding for the coupled network operating point and capacity limits.

The per-node closed forms couple through the collision probability: a node
transmits with p_tx = p / (1 - p_cl) while p_cl = 1 - (1 - p_tx)**(N-1).
Eliminating p_cl leaves f(x) = x (1 - x)**(N-1) - p = 0 for x = p_tx, which
has up to two roots in (0, 1); the light-traffic branch (the smaller root,
x <= 1/N) is the one continuous with p_tx -> 0 as p -> 0 and is always
returned.  Saturation boundaries: the largest packet rate (fixed N) or node
count (fixed p) keeping the buffers unsaturated solve p_idle = 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .analytic import (
    NetworkParams,
    ProtocolSolution,
    average_aoi,
    idle_probability,
    service_rate,
    system_time_parameter,
)
from .errors import (
    DivergenceError,
    OverCapacityError,
    ParameterError,
    SaturationError,
)

__all__ = [
    "SolverConfig",
    "solve_fixed_point",
    "max_packet_rate",
    "max_node_count",
]


@dataclass(frozen=True)
class SolverConfig:
    """Root-finder knobs: residual tolerance, iteration cap, optional bracket."""

    tolerance: float = 1e-12
    max_iterations: int = 200
    bracket: tuple | None = None

    def __post_init__(self):
        if not self.tolerance > 0.0:
            raise ParameterError(f"tolerance must be > 0, got {self.tolerance!r}")
        if not self.max_iterations >= 1:
            raise ParameterError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}")


DEFAULT_CONFIG = SolverConfig()


def _newton_bisect(func, lo, hi, f_lo, f_hi, tol, max_iter):
    """Guarded Newton on a sign-change bracket, bisecting whenever the Newton
    step leaves the bracket or stalls.  Returns x with |f(x)| < tol."""
    if f_lo == 0.0:
        return lo
    if f_hi == 0.0:
        return hi
    if (f_lo < 0.0) == (f_hi < 0.0):
        raise ParameterError("root is not bracketed")
    x = 0.5 * (lo + hi)
    step_prev = abs(hi - lo)
    for _ in range(max_iter):
        f, df = func(x)
        if abs(f) < tol:
            return x
        if (f < 0.0) == (f_lo < 0.0):
            lo = x
        else:
            hi = x
        use_newton = df != 0.0
        if use_newton:
            step = f / df
            x_new = x - step
            if not (lo < x_new < hi) or abs(step) > 0.5 * step_prev:
                use_newton = False
        if use_newton:
            step_prev = abs(step)
            x = x_new
        else:
            step_prev = 0.5 * (hi - lo)
            x = lo + 0.5 * (hi - lo)
    f, _ = func(x)
    if abs(f) < tol:
        return x
    raise OverCapacityError(
        f"fixed-point iteration did not reach |f| < {tol:g} (last |f| = {abs(f):g})")


def _bisect(func, lo, hi, f_lo, x_tol=1e-15, max_iter=200):
    """Plain bisection on a sign-change bracket; returns the midpoint."""
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= x_tol * max(1.0, abs(mid)):
            return mid
        f_mid = func(mid)
        if f_mid == 0.0:
            return mid
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _attempt_rate(x, n):
    """x * (1 - x)**(n-1) evaluated stably."""
    return x * math.exp((n - 1) * math.log1p(-x))


def solve_fixed_point(params, cfg=DEFAULT_CONFIG):
    """Solve the network fixed point and assemble the full operating point.

    Returns the smallest root x* of x (1 - x)**(N-1) = p on (0, 1/N], then
    chains p_cl, p_idle, mu, beta and the average AoI.  Raises
    OverCapacityError when no root exists, DivergenceError when the induced
    p_cl >= 1/2, and SaturationError when the load leaves no idle mass.
    """
    if not isinstance(params, NetworkParams):
        params = NetworkParams(*params)
    n = params.n_nodes
    p = params.packet_rate
    w0 = params.min_window

    x_peak = 1.0 / n
    peak = _attempt_rate(x_peak, n) if n > 1 else 1.0
    if p > peak:
        raise OverCapacityError(
            f"no fixed point: p = {p:g} exceeds the peak attempt throughput "
            f"{peak:.6g} of N = {n} nodes")

    if n == 1:
        x = p
        residual = 0.0
    elif p == peak:
        x = x_peak
        residual = 0.0
    else:
        lo, hi = cfg.bracket if cfg.bracket is not None else (0.0, x_peak)

        def f_df(x):
            g = math.exp((n - 1) * math.log1p(-x))
            return x * g - p, g * (1.0 - n * x) / (1.0 - x)

        x = _newton_bisect(f_df, lo, hi, -p, peak - p,
                           cfg.tolerance, cfg.max_iterations)
        residual = abs(_attempt_rate(x, n) - p)

    p_cl = -math.expm1((n - 1) * math.log1p(-x)) if n > 1 else 0.0
    if p_cl >= 0.5:
        raise DivergenceError(
            f"fixed point lands at p_cl = {p_cl:.6g} >= 0.5: outside the "
            "validity region of the stationary model")
    p_idle = idle_probability(p, p_cl, w0)
    mu = service_rate(p, p_idle)
    if p < mu:
        beta = system_time_parameter(p, mu)
        aoi = average_aoi(p, mu)
        stable = True
    else:
        beta = 0.0
        aoi = math.inf
        stable = False
    return ProtocolSolution(p_tx=x, p_cl=p_cl, p_idle=p_idle, mu=mu,
                            beta=beta, avg_aoi=aoi, stable=stable,
                            residual=residual)


def _saturation_gap(x, n, w0):
    """Signed defect of the saturation condition at transmit probability x.

    Zero when p_idle = 0, i.e. x Q(p_cl) = 2 (1-x)**(N-1) (1 - 2 p_cl) with
    p_cl = 1 - (1-x)**(N-1).  Negative for small x.
    """
    g = math.exp((n - 1) * math.log1p(-x))
    c = 1.0 - g
    q = 4.0 * c * c - (w0 + 4.0) * c + w0 + 1.0
    return x * q - 2.0 * g * (1.0 - 2.0 * c)


def max_packet_rate(n_nodes, w0, cfg=DEFAULT_CONFIG):
    """Largest per-node packet rate the network can carry unsaturated.

    Solves the saturation condition for the transmit probability (smallest
    root whose induced p_cl stays below 1/2) and maps it back to a packet
    rate via p = x (1 - x)**(N-1).  For N = 1 there are no collisions and the
    limit is the single-node service rate 2 / (w0 + 1).
    """
    if not (isinstance(n_nodes, int) and n_nodes >= 1):
        raise ParameterError(f"n_nodes must be an integer >= 1, got {n_nodes!r}")
    if not (isinstance(w0, int) and w0 >= 1):
        raise ParameterError(f"w0 must be an integer >= 1, got {w0!r}")
    if n_nodes == 1:
        return 2.0 / (w0 + 1.0)

    # p_cl < 1/2 restricts x below 1 - 0.5**(1/(N-1)).
    x_half = -math.expm1(math.log(0.5) / (n_nodes - 1))
    func = lambda x: _saturation_gap(x, n_nodes, w0)

    scan = 512
    x_prev = x_half * 1e-9
    f_prev = func(x_prev)
    root = None
    for k in range(1, scan + 1):
        x_k = x_half * k / scan
        f_k = func(x_k)
        if f_prev == 0.0:
            root = x_prev
            break
        if (f_prev < 0.0) != (f_k < 0.0):
            root = _bisect(func, x_prev, x_k, f_prev)
            break
        x_prev, f_prev = x_k, f_k
    if root is None:
        raise SaturationError(
            f"no saturation point with p_cl < 0.5 for N = {n_nodes}, w0 = {w0}")
    return _attempt_rate(root, n_nodes)


def max_node_count(p, w0, cfg=DEFAULT_CONFIG):
    """Largest node count the network supports unsaturated at packet rate p.

    Solving p_idle = 0 for the collision probability gives the real cubic
    root in (0, 1/2) (smallest if several); the matching transmit probability
    is p / (1 - p_cl) and the node count follows from inverting
    p_cl = 1 - (1 - p_tx)**(N-1).
    """
    if not (isinstance(w0, int) and w0 >= 1):
        raise ParameterError(f"w0 must be an integer >= 1, got {w0!r}")
    if not 0.0 < p < 2.0 / (w0 + 1.0):
        raise ParameterError(
            f"packet rate must lie in (0, 2/(w0+1)) = (0, {2.0/(w0+1.0):.6g}), "
            f"got {p!r}")
    # 2 (1-x)^2 (1-2x) = p (4x^2 - (w0+4)x + w0+1), expanded to a cubic in x.
    coeffs = [-4.0, 10.0 - 4.0 * p, p * (w0 + 4.0) - 8.0, 2.0 - p * (w0 + 1.0)]
    roots = np.roots(coeffs)
    real = [r.real for r in roots
            if abs(r.imag) < 1e-10 and 0.0 < r.real < 0.5]
    if not real:
        raise SaturationError(
            f"no saturation collision probability in (0, 0.5) for p = {p:g}")
    p_cl = min(real)
    p_tx = p / (1.0 - p_cl)
    if p_tx >= 1.0:
        raise ParameterError(
            f"derived transmit probability {p_tx:.6g} >= 1 at p = {p:g}")
    ratio = math.log1p(-p_cl) / math.log1p(-p_tx) + 1.0
    nearest = round(ratio)
    if abs(ratio - nearest) < 1e-9:  # guard the floor against float noise
        ratio = nearest
    return int(math.floor(ratio))
