"""Age of information of unsaturated slotted CSMA/CA networks.

Closed-form stationary analysis, fixed-point solvers, a slot-level protocol
simulator with compiled and pure-Python kernels, brute-force validation
oracles, and a sweep/experiment command line.
"""

from .analytic import (
    NetworkParams,
    ProtocolSolution,
    QueueMoments,
    StationaryDistribution,
    aoi_from_area_decomposition,
    average_aoi,
    idle_probability,
    queue_moments,
    service_rate,
    stationary_distribution,
    stationary_entry,
    system_time_parameter,
    system_time_pgf,
)
from .errors import (
    CsmaAoiError,
    DivergenceError,
    InstabilityError,
    OverCapacityError,
    ParameterError,
    SaturationError,
    TruncationError,
)
from .kernels import available_backends, backend_name
from .simulator import (
    SimulationConfig,
    SimulationStats,
    record_aoi_path,
    simulate,
    simulate_with_trace,
)
from .solvers import SolverConfig, max_node_count, max_packet_rate, solve_fixed_point
from .sweep import SweepRow, SweepSpec, emit, feasible_packet_grid, load_rows, run_sweep
from .world import NodeState, SlotWorld

__version__ = "0.1.0"

__all__ = [
    "NetworkParams", "ProtocolSolution", "QueueMoments",
    "StationaryDistribution", "SimulationConfig", "SimulationStats",
    "SolverConfig", "SweepRow", "SweepSpec", "NodeState", "SlotWorld",
    "CsmaAoiError", "ParameterError", "DivergenceError", "SaturationError",
    "OverCapacityError", "InstabilityError", "TruncationError",
    "stationary_entry", "stationary_distribution", "idle_probability",
    "service_rate", "system_time_parameter", "system_time_pgf",
    "average_aoi", "aoi_from_area_decomposition", "queue_moments",
    "solve_fixed_point", "max_packet_rate", "max_node_count",
    "simulate", "simulate_with_trace", "record_aoi_path",
    "run_sweep", "emit", "load_rows", "feasible_packet_grid",
    "backend_name", "available_backends",
]
