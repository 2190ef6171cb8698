"""Brute-force oracles: cross-validation between all three chain routes,
series summation, and the Geom/Geom/1 queue simulation."""

import math

import numpy as np
import pytest

from csma_aoi.analytic import (
    idle_probability,
    stationary_entry,
    system_time_parameter,
)
from csma_aoi.errors import (
    DivergenceError,
    InstabilityError,
    ParameterError,
    TruncationError,
)
from csma_aoi.oracles import (
    affine_abs_sum,
    chain_stationary,
    chain_stationary_dense,
    chain_stationary_folded,
    queue_oracle,
    series_idle_probability,
    series_idle_tail_bound,
)


def closed_form_l1(result):
    """L1 distance between oracle and closed-form tables, taken exactly.

    Both tables are affine in the counter within each stage, with the oracle
    row pinned by its entry flux, so per-stage sums close in triangular form.
    """
    total = abs(result.b_idle - idle_probability(result.p, result.p_cl, result.w0))
    for i in range(result.i_max + 1):
        w = result.w0 << i
        diff = abs(result.entry_total(i) - result.p * result.p_cl**i)
        total += diff * (1.0 + (w - 1) / (2.0 * (1.0 - result.p_cl)))
    return total


class TestChainStationary:
    def test_collision_free_single_stage(self):
        res = chain_stationary(0.1, 0.0, 4, 0, 8)
        assert res.marginal(0, 0) == pytest.approx(0.1, abs=1e-9)
        assert res.b_idle == pytest.approx(idle_probability(0.1, 0.0, 4), abs=1e-9)

    def test_example_truncation_matches_closed_forms(self):
        res = chain_stationary(0.05, 0.2, 8, 30, 60)
        assert closed_form_l1(res) < 1e-6

    def test_truncation_too_small(self):
        with pytest.raises(TruncationError):
            chain_stationary(0.1, 0.49, 8, 5, 5)

    def test_divergent_collision_probability(self):
        with pytest.raises(DivergenceError):
            chain_stationary(0.1, 0.5, 8, 10, 10)

    def test_entry_rate_equals_packet_rate(self):
        # No packets are lost, so the service-start rate recovers p exactly.
        res = chain_stationary(0.02, 0.3, 16, 40, 50)
        assert res.entry_total(0) == pytest.approx(0.02, rel=1e-9)

    def test_appendix_total_attempt_rate(self):
        # Summing counter-zero masses over stages gives p / (1 - p_cl).
        p, p_cl = 0.01, 0.2167
        res = chain_stationary(p, p_cl, 8, 40, 40)
        attempt = math.fsum(res.entry_total(i) for i in range(41))
        assert attempt == pytest.approx(p / (1.0 - p_cl), abs=1e-8)

    def test_closed_form_entry_example(self):
        # Exercise of the closed form at (stage 2, counter 3) against the
        # independently solved chain.
        res = chain_stationary(0.01, 0.2167, 8, 40, 40)
        expected = stationary_entry(0.01, 0.2167, 8, 2, 3)
        assert res.marginal(2, 3) == pytest.approx(expected, abs=1e-9)

    def test_minimal_window_edge(self):
        res = chain_stationary(0.1, 0.2, 1, 12, 24)
        assert res.marginal(0, 0) == pytest.approx(0.1, rel=1e-9)
        assert closed_form_l1(res) < 1e-4  # only the stage tail remains

    def test_profiles_are_distributions(self):
        res = chain_stationary(0.05, 0.2, 4, 14, 40)
        prof = res.profile(1, 2)
        assert np.all(prof >= -1e-15)
        # Resolved levels account for all but the unresolved buffer tail.
        gap = res.marginal(1, 2) - prof.sum()
        assert 0.0 <= gap < 1e-3 * res.marginal(1, 2)


class TestCrossValidation:
    @pytest.mark.parametrize("p,p_cl,w0,i_max,c_max", [
        (0.05, 0.2, 4, 4, 12),
        (0.1, 0.1, 4, 5, 40),
        (0.12, 0.3, 2, 6, 30),
        (0.3, 0.0, 8, 0, 10),
    ])
    def test_folded_matches_dense_exactly(self, p, p_cl, w0, i_max, c_max):
        folded = chain_stationary_folded(p, p_cl, w0, i_max, c_max)
        states, pi = chain_stationary_dense(p, p_cl, w0, i_max, c_max)
        assert folded.b_idle == pytest.approx(pi[states["idle"]], abs=1e-10)
        for i in range(i_max + 1):
            for j in range(w0 << i):
                dense = sum(pi[states[(i, j, k)]] for k in range(1, c_max + 1))
                assert folded.marginal(i, j) == pytest.approx(dense, abs=1e-10)

    def test_exact_matches_dense_when_buffers_stay_shallow(self):
        # At small windows the rectangle truncation is immaterial and all
        # three constructions agree.
        p, p_cl, w0, i_max, c_max = 0.1, 0.1, 4, 5, 40
        exact = chain_stationary(p, p_cl, w0, i_max, c_max, boundary_tol=1e-2)
        states, pi = chain_stationary_dense(p, p_cl, w0, i_max, c_max)
        assert exact.b_idle == pytest.approx(pi[states["idle"]], abs=1e-6)
        for (i, j) in [(0, 0), (1, 3), (3, 5), (5, 1)]:
            dense_prof = np.array(
                [pi[states[(i, j, k)]] for k in range(1, c_max + 1)])
            assert np.abs(exact.profile(i, j) - dense_prof).max() < 1e-7

    def test_folded_buffer_loss_is_reported(self):
        # The rectangle fold drops arrivals at deep stages; the exact solve
        # does not.  The reported drop flux matches the entry-rate deficit.
        folded = chain_stationary_folded(0.02, 0.3, 16, 20, 60)
        deficit = 0.02 - folded.entry_total(0)
        assert deficit > 0
        assert folded.chain.buffer_drop_flux == pytest.approx(deficit, rel=0.05)


class TestSeries:
    def test_single_stage_no_collisions(self):
        assert series_idle_probability(0.1, 0.0, 8, 0) == pytest.approx(
            0.55, abs=1e-15)

    def test_matches_closed_form(self):
        closed = idle_probability(0.01, 0.2167, 8)
        assert series_idle_probability(0.01, 0.2167, 8, 60) == pytest.approx(
            closed, abs=1e-10)

    def test_divergence_flag(self):
        with pytest.raises(DivergenceError):
            series_idle_probability(0.2, 0.5, 8, 10)
        with pytest.raises(DivergenceError):
            series_idle_tail_bound(0.2, 0.55, 8, 10)

    def test_tail_bound_brackets_truncation_error(self):
        for p_cl in (0.1, 0.3, 0.45):
            closed = idle_probability(0.01, p_cl, 8)
            for i_max in (5, 10, 20):
                series = series_idle_probability(0.01, p_cl, 8, i_max)
                bound = series_idle_tail_bound(0.01, p_cl, 8, i_max)
                assert abs(series - closed) <= bound + 1e-15


class TestQueueOracle:
    def test_ideal_server_exact(self):
        res = queue_oracle(0.1, 1.0, 50_000, seed=5)
        assert res.mean_system_time == 1.0
        assert res.mean_waiting_time == 0.0

    def test_geometric_system_time_moments(self):
        beta = system_time_parameter(0.05, 0.2)
        res = queue_oracle(0.05, 0.2, 1_000_000, seed=31)
        assert res.mean_system_time == pytest.approx(1.0 / beta, rel=0.01)
        assert res.var_system_time == pytest.approx((1.0 - beta) / beta**2,
                                                    rel=0.03)

    def test_interarrival_waiting_cross_moment(self):
        beta = system_time_parameter(0.05, 0.2)
        closed = 0.05 * (1.0 - beta) / (beta * (1.0 - 0.95 * (1.0 - beta))**2)
        res = queue_oracle(0.05, 0.2, 2_000_000, seed=13)
        assert res.mean_xw == pytest.approx(closed, rel=0.02)

    def test_conservation(self):
        res = queue_oracle(0.3, 0.5, 100_000, seed=2)
        assert res.arrivals == res.delivered + res.final_queue

    def test_requires_stability(self):
        with pytest.raises(InstabilityError):
            queue_oracle(0.3, 0.2, 1000)
        with pytest.raises(ParameterError):
            queue_oracle(0.3, 1.5, 1000)


class TestAffineAbsSum:
    @pytest.mark.parametrize("da,dc,lo,hi", [
        (0.5, 0.1, 1, 20), (-0.5, 0.1, 1, 20), (0.5, -0.04, 2, 31),
        (0.0, 0.3, 1, 9), (0.7, 0.0, 3, 12), (1.0, 0.09, 1, 40),
    ])
    def test_matches_brute_force(self, da, dc, lo, hi):
        brute = sum(abs(da - dc * j) for j in range(lo, hi + 1))
        assert affine_abs_sum(da, dc, lo, hi) == pytest.approx(brute, rel=1e-12)

    def test_empty_range(self):
        assert affine_abs_sum(1.0, 1.0, 5, 4) == 0.0
