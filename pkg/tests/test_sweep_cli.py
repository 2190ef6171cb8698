"""Sweep runner, emit/load round-trips, spec files, and the command line."""

import json
import os

import pytest

from csma_aoi.cli import main
from csma_aoi.errors import ParameterError
from csma_aoi.solvers import max_packet_rate, solve_fixed_point
from csma_aoi.analytic import NetworkParams
from csma_aoi.sweep import (
    CSV_HEADER,
    SweepSpec,
    build_spec,
    check_sweep_properties,
    emit,
    feasible_packet_grid,
    load_rows,
    parse_spec_file,
    run_sweep,
    slope_sign_changes,
)


def analytic_spec(**kw):
    base = dict(variable="packet_rate", grid=(0.002, 0.005, 0.008, 0.01),
                n_nodes=20, min_window=8, modes=("analytic",))
    base.update(kw)
    return SweepSpec(**base)


class TestRunSweep:
    def test_degenerate_single_point(self):
        spec = SweepSpec(variable="packet_rate", grid=(0.05,), n_nodes=1)
        rows = run_sweep(spec)
        assert len(rows) == 1
        assert rows[0].mu_a == pytest.approx(2.0 / 9.0, abs=1e-12)
        assert rows[0].status == "ok"

    def test_rows_in_grid_order_with_per_row_seeds(self):
        rows = run_sweep(analytic_spec(seed=100))
        assert [r.p for r in rows] == [0.002, 0.005, 0.008, 0.01]
        assert [r.seed for r in rows] == [100, 101, 102, 103]

    def test_infeasible_points_reported_not_skipped(self):
        spec = analytic_spec(grid=(0.01, 0.05))
        rows = run_sweep(spec)
        assert rows[0].status == "ok"
        assert rows[1].status == "over_capacity"
        assert rows[1].ptx_a is None

    def test_monotone_columns(self):
        rows = run_sweep(analytic_spec())
        txs = [r.ptx_a for r in rows]
        cls = [r.pcl_a for r in rows]
        assert txs == sorted(txs)
        assert cls == sorted(cls)
        assert check_sweep_properties(rows) == []

    def test_node_sweep_with_simulation(self):
        spec = SweepSpec(variable="n_nodes", grid=(2, 5), packet_rate=0.01,
                         modes=("analytic", "simulate"), horizon=200_000,
                         warmup=2_000, seed=7)
        rows = run_sweep(spec)
        for row in rows:
            assert row.ptx_s is not None
            assert row.aoi_s_se is not None
        # Loose agreement only: collisions are rare at this short horizon,
        # so their estimate carries tens of percent of sampling noise.
        assert check_sweep_properties(rows, rel_tol=0.3) == []

    def test_spec_validation(self):
        with pytest.raises(ParameterError):
            SweepSpec(variable="window", grid=(1,))
        with pytest.raises(ParameterError):
            SweepSpec(variable="packet_rate", grid=(), n_nodes=5)
        with pytest.raises(ParameterError):
            SweepSpec(variable="packet_rate", grid=(0.2, 0.1), n_nodes=5)
        with pytest.raises(ParameterError):
            SweepSpec(variable="packet_rate", grid=(0.1,))  # no fixed N
        with pytest.raises(ParameterError):
            SweepSpec(variable="packet_rate", grid=(0.1,), n_nodes=5,
                      modes=("magic",))


class TestEmit:
    def test_csv_structure(self, tmp_path):
        rows = run_sweep(analytic_spec(grid=(0.002, 0.005, 0.008)))
        path = tmp_path / "out.csv"
        emit(rows, "csv", path)
        lines = path.read_text().strip().split("\n")
        assert len(lines) == 4
        assert lines[0] == CSV_HEADER

    def test_infeasible_row_has_empty_numeric_columns(self, tmp_path):
        rows = run_sweep(analytic_spec(grid=(0.05,)))
        path = tmp_path / "out.csv"
        emit(rows, "csv", path)
        data_line = path.read_text().strip().split("\n")[1]
        parts = data_line.split(",")
        assert parts[-1] == "over_capacity"
        assert set(parts[4:14]) == {""}

    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, fmt, tmp_path):
        spec = SweepSpec(variable="packet_rate", grid=(0.005, 0.01),
                         n_nodes=20, modes=("analytic", "simulate"),
                         horizon=50_000, warmup=500)
        rows = run_sweep(spec)
        path = tmp_path / f"out.{fmt}"
        emit(rows, fmt, path)
        loaded = load_rows(path, fmt)
        for original, parsed in zip(rows, loaded):
            for name in ("variable", "n", "w0", "seed", "status"):
                assert getattr(parsed, name) == getattr(original, name)
            for name in ("p", "ptx_a", "pcl_a", "mu_a", "aoi_a",
                         "ptx_s", "pcl_s", "mu_s", "aoi_s", "aoi_s_se"):
                a, b = getattr(original, name), getattr(parsed, name)
                if a is None:
                    assert b is None
                else:
                    assert b == pytest.approx(a, rel=1e-11)

    def test_twelve_significant_digits(self, tmp_path):
        rows = run_sweep(analytic_spec(grid=(0.01,)))
        path = tmp_path / "out.csv"
        emit(rows, "csv", path)
        ptx_text = path.read_text().strip().split("\n")[1].split(",")[4]
        assert len(ptx_text.replace(".", "").replace("-", "").lstrip("0")) == 12


class TestGridsAndChecks:
    def test_feasible_packet_grid(self):
        grid = feasible_packet_grid(20, 8, 10)
        assert len(grid) == 10
        assert grid == sorted(grid)
        assert grid[-1] == pytest.approx(max_packet_rate(20, 8) - 1e-4, abs=1e-12)
        for p in grid:
            solve_fixed_point(NetworkParams(20, p, 8))  # raises if infeasible

    def test_slope_sign_changes(self):
        assert slope_sign_changes([5, 3, 2, 4, 7]) == 1
        assert slope_sign_changes([1, 2, 3]) == 0
        assert slope_sign_changes([3, 1, 4, 1, 5]) == 3

    def test_agreement_check_flags_mismatch(self):
        rows = run_sweep(analytic_spec(grid=(0.01,)))
        rows[0].ptx_s = rows[0].ptx_a * 1.2
        problems = check_sweep_properties(rows)
        assert len(problems) == 1
        assert "p_tx mismatch" in problems[0]


class TestSpecFile:
    def test_parse_and_build(self, tmp_path):
        text = """
# experiment: attempt probabilities against load
variable = packet_rate
n = 20
w0 = 8
grid = 0.002,0.005,0.01
modes = analytic
seed = 5
"""
        path = tmp_path / "spec.txt"
        path.write_text(text)
        values = parse_spec_file(path)
        spec = build_spec(values)
        assert spec.grid == (0.002, 0.005, 0.01)
        assert spec.n_nodes == 20
        assert spec.seed == 5

    def test_auto_grid(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("variable = packet_rate\nn = 10\ngrid = auto:6\n")
        spec = build_spec(parse_spec_file(path))
        assert len(spec.grid) == 6
        assert spec.grid[-1] < max_packet_rate(10, 8)

    def test_bad_line(self, tmp_path):
        path = tmp_path / "spec.txt"
        path.write_text("variable packet_rate\n")
        with pytest.raises(ParameterError):
            parse_spec_file(path)


class TestCli:
    def test_solve_ok(self, capsys):
        assert main(["solve", "--n", "20", "--p", "0.01"]) == 0
        out = capsys.readouterr().out
        assert "p_tx = 0.0127645654896" in out
        assert "stable = True" in out

    def test_invalid_input_exit_code(self, capsys):
        assert main(["solve", "--n", "20", "--p", "1.5"]) == 2

    def test_infeasible_exit_code(self, capsys):
        assert main(["solve", "--n", "20", "--p", "0.05"]) == 3
        assert main(["capacity", "--p", "0.5", "--w0", "8"]) == 2

    def test_capacity(self, capsys):
        assert main(["capacity", "--n", "20"]) == 0
        assert "p_max = 0.0168258209992" in capsys.readouterr().out
        assert main(["capacity", "--p", "0.01"]) == 0
        assert "n_max = 34" in capsys.readouterr().out

    def test_simulate_with_files(self, tmp_path, capsys):
        trace = tmp_path / "trace.txt"
        aoi = tmp_path / "aoi.csv"
        argv = ["simulate", "--n", "2", "--p", "0.05", "--w0", "8",
                "--horizon", "5000", "--seed", "3",
                "--trace", str(trace), "--aoi-path", "0", "--aoi-out", str(aoi)]
        assert main(argv) == 0
        lines = trace.read_text().strip().split("\n")
        assert len(lines) == 5000
        assert lines[0].startswith("0,")
        kinds = {line.split(",")[1][0] for line in lines}
        assert kinds <= {"I", "S", "C"}
        aoi_lines = aoi.read_text().strip().split("\n")
        assert aoi_lines[0] == "slot,age"
        assert len(aoi_lines) == 5001

    def test_simulate_env_seed(self, capsys, monkeypatch):
        monkeypatch.setenv("CSMA_AOI_SEED", "777")
        assert main(["simulate", "--n", "1", "--p", "0.05",
                     "--horizon", "2000"]) == 0
        assert "seed = 777" in capsys.readouterr().out

    def test_aoi_path_requires_out(self, capsys):
        with pytest.raises(SystemExit):
            main(["simulate", "--n", "1", "--p", "0.05", "--horizon", "100",
                  "--aoi-path", "0"])

    def test_sweep_command_and_io_error(self, tmp_path, capsys):
        spec = tmp_path / "spec.txt"
        spec.write_text("variable = packet_rate\nn = 20\n"
                        "grid = 0.002,0.01\nmodes = analytic\n")
        out = tmp_path / "rows.json"
        assert main(["sweep", "--spec", str(spec), "--out", str(out),
                     "--format", "json"]) == 0
        records = json.loads(out.read_text())
        assert len(records) == 2 and records[0]["status"] == "ok"
        bad = os.path.join(str(tmp_path), "missing-dir", "rows.csv")
        assert main(["sweep", "--spec", str(spec), "--out", bad]) == 4
