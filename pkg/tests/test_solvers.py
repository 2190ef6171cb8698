"""Fixed-point and capacity solvers against independent bisection oracles."""

import pytest

from csma_aoi.analytic import NetworkParams, idle_probability
from csma_aoi.errors import OverCapacityError, ParameterError, SaturationError
from csma_aoi.solvers import (
    SolverConfig,
    max_node_count,
    max_packet_rate,
    solve_fixed_point,
)


def attempt_rate(x, n):
    return x * (1.0 - x) ** (n - 1)


def bisect_attempt_root(n, p, lo=0.0, hi=None, iters=200):
    """Plain bisection oracle for the smaller root of x (1-x)^(N-1) = p."""
    hi = 1.0 / n if hi is None else hi
    f_lo = attempt_rate(lo, n) - p
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f_mid = attempt_rate(mid, n) - p
        if (f_mid < 0.0) == (f_lo < 0.0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def feasible(n, p, w0=8):
    try:
        solve_fixed_point(NetworkParams(n, p, w0))
        return True
    except (OverCapacityError, SaturationError):
        return False


class TestSolveFixedPoint:
    def test_single_node_has_no_collisions(self):
        sol = solve_fixed_point(NetworkParams(1, 0.05, 8))
        assert sol.p_tx == pytest.approx(0.05, abs=1e-15)
        assert sol.p_cl == 0.0
        assert sol.mu == pytest.approx(2.0 / 9.0, abs=1e-12)
        assert sol.stable

    def test_against_bisection_oracle(self):
        sol = solve_fixed_point(NetworkParams(20, 0.01, 8))
        oracle_x = bisect_attempt_root(20, 0.01)
        assert sol.p_tx == pytest.approx(oracle_x, abs=1e-12)
        assert sol.p_cl == pytest.approx(1.0 - (1.0 - oracle_x) ** 19, abs=1e-10)
        # Three significant figures of this operating point.
        assert round(sol.p_tx, 4) == 0.0128
        assert round(sol.p_cl, 3) == 0.217

    def test_over_capacity(self):
        with pytest.raises(OverCapacityError):
            solve_fixed_point(NetworkParams(20, 0.03, 8))

    def test_residual_and_identity(self):
        for n in (2, 5, 10, 20):
            p_hi = max_packet_rate(n, 8)
            for k in range(1, 8):
                p = p_hi * k / 8.0
                sol = solve_fixed_point(NetworkParams(n, p, 8))
                assert abs(attempt_rate(sol.p_tx, n) - p) < 1e-12
                assert abs(sol.p_tx * (1.0 - sol.p_cl) - p) < 1e-12

    def test_smaller_root_branch(self):
        for n in (2, 5, 20, 50):
            p = 0.5 * max_packet_rate(n, 8)
            sol = solve_fixed_point(NetworkParams(n, p, 8))
            assert sol.p_tx <= 1.0 / n + 1e-15

    def test_monotone_in_load_and_population(self):
        rates = [0.001, 0.002, 0.004, 0.006]
        txs = [solve_fixed_point(NetworkParams(20, p, 8)).p_tx for p in rates]
        assert all(a < b for a, b in zip(txs, txs[1:]))
        counts = [2, 5, 10, 20, 40]
        txs = [solve_fixed_point(NetworkParams(n, 0.004, 8)).p_tx for n in counts]
        assert all(a <= b for a, b in zip(txs, txs[1:]))

    def test_chained_quantities_match_closed_forms(self):
        sol = solve_fixed_point(NetworkParams(20, 0.01, 8))
        assert sol.p_idle == pytest.approx(
            idle_probability(0.01, sol.p_cl, 8), abs=1e-15)
        assert sol.mu == pytest.approx(0.01 / (1.0 - sol.p_idle), abs=1e-15)

    def test_solver_config_validation(self):
        with pytest.raises(ParameterError):
            SolverConfig(tolerance=0.0)
        with pytest.raises(ParameterError):
            SolverConfig(max_iterations=0)


class TestMaxPacketRate:
    def test_single_node(self):
        assert max_packet_rate(1, 8) == pytest.approx(2.0 / 9.0, abs=1e-15)

    def test_sits_on_feasibility_boundary(self):
        p_star = max_packet_rate(20, 8)
        eps = 1e-5
        assert feasible(20, p_star - eps)
        assert not feasible(20, p_star + eps)

    def test_monotone_in_population(self):
        assert max_packet_rate(50, 8) < max_packet_rate(20, 8)

    def test_bad_args(self):
        with pytest.raises(ParameterError):
            max_packet_rate(0, 8)
        with pytest.raises(ParameterError):
            max_packet_rate(5, 0)


class TestMaxNodeCount:
    def test_saturating_one_node_leaves_no_headroom(self):
        assert max_node_count(2.0 / 9.0 - 1e-9, 8) == 1

    def test_integer_scan_consistency(self):
        n_star = max_node_count(0.01, 8)
        assert feasible(n_star, 0.01)
        assert not feasible(n_star + 1, 0.01)

    def test_monotone_in_rate(self):
        assert max_node_count(0.001, 8) > max_node_count(0.01, 8)

    def test_domain(self):
        with pytest.raises(ParameterError):
            max_node_count(2.0 / 9.0, 8)
        with pytest.raises(ParameterError):
            max_node_count(0.0, 8)
