"""Parameter-sweep experiment runner with CSV/JSON output.

A sweep varies either the per-node packet rate or the node count over a
grid, fixed everything else, and records the analytic operating point and/or
simulated estimates per grid point.  Infeasible points are reported with a
reason code, never skipped.  Per-row seeds are ``base_seed + row_index`` so
any row can be reproduced in isolation.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

from .analytic import NetworkParams
from .errors import (
    DivergenceError,
    OverCapacityError,
    ParameterError,
    SaturationError,
)
from .simulator import DEFAULT_SEED, SimulationConfig, simulate
from .solvers import max_packet_rate, solve_fixed_point

__all__ = [
    "SweepSpec",
    "SweepRow",
    "run_sweep",
    "emit",
    "load_rows",
    "parse_spec_file",
    "build_spec",
    "feasible_packet_grid",
    "check_sweep_properties",
    "CSV_HEADER",
]

CSV_HEADER = ("var,p,N,w0,ptx_a,pcl_a,pidle_a,mu_a,aoi_a,"
              "ptx_s,pcl_s,mu_s,aoi_s,aoi_s_se,seed,status")

VARIABLES = ("packet_rate", "n_nodes")
MODES = ("analytic", "simulate")

STATUS_OK = "ok"
STATUS_OVER_CAPACITY = "over_capacity"
STATUS_DIVERGENT = "collision_divergence"
STATUS_SATURATED = "saturated"


@dataclass(frozen=True)
class SweepSpec:
    """One sweep: the swept variable, its grid, and everything held fixed."""

    variable: str
    grid: tuple
    n_nodes: int | None = None
    packet_rate: float | None = None
    min_window: int = 8
    modes: tuple = ("analytic",)
    horizon: int = 1_000_000
    warmup: int = 10_000
    seed: int = DEFAULT_SEED
    stage_cap: int = 24
    out: str | None = None
    fmt: str = "csv"

    def __post_init__(self):
        if self.variable not in VARIABLES:
            raise ParameterError(
                f"variable must be one of {VARIABLES}, got {self.variable!r}")
        if not self.grid:
            raise ParameterError("grid must be non-empty")
        if list(self.grid) != sorted(self.grid) or len(set(self.grid)) != len(self.grid):
            raise ParameterError("grid values must be strictly increasing")
        unknown = set(self.modes) - set(MODES)
        if unknown:
            raise ParameterError(f"unknown modes {sorted(unknown)}")
        if not self.modes:
            raise ParameterError("at least one mode is required")
        if self.variable == "packet_rate" and self.n_nodes is None:
            raise ParameterError("a packet_rate sweep needs a fixed n_nodes")
        if self.variable == "n_nodes" and self.packet_rate is None:
            raise ParameterError("an n_nodes sweep needs a fixed packet_rate")
        if self.fmt not in ("csv", "json"):
            raise ParameterError(f"format must be csv or json, got {self.fmt!r}")

    def params_at(self, value):
        if self.variable == "packet_rate":
            return NetworkParams(self.n_nodes, float(value), self.min_window)
        return NetworkParams(int(value), self.packet_rate, self.min_window)


@dataclass
class SweepRow:
    """One grid point: analytic and simulated columns fill independently."""

    variable: str
    p: float
    n: int
    w0: int
    seed: int
    status: str = STATUS_OK
    ptx_a: float | None = None
    pcl_a: float | None = None
    pidle_a: float | None = None
    mu_a: float | None = None
    aoi_a: float | None = None
    ptx_s: float | None = None
    pcl_s: float | None = None
    mu_s: float | None = None
    aoi_s: float | None = None
    aoi_s_se: float | None = None

    FIELDS = ("var", "p", "N", "w0", "ptx_a", "pcl_a", "pidle_a", "mu_a",
              "aoi_a", "ptx_s", "pcl_s", "mu_s", "aoi_s", "aoi_s_se",
              "seed", "status")

    def as_record(self):
        return {
            "var": self.variable, "p": self.p, "N": self.n, "w0": self.w0,
            "ptx_a": self.ptx_a, "pcl_a": self.pcl_a, "pidle_a": self.pidle_a,
            "mu_a": self.mu_a, "aoi_a": self.aoi_a,
            "ptx_s": self.ptx_s, "pcl_s": self.pcl_s, "mu_s": self.mu_s,
            "aoi_s": self.aoi_s, "aoi_s_se": self.aoi_s_se,
            "seed": self.seed, "status": self.status,
        }


def run_sweep(spec):
    """Evaluate every grid point in order; returns the list of rows."""
    rows = []
    for index, value in enumerate(spec.grid):
        params = spec.params_at(value)
        row = SweepRow(variable=spec.variable, p=params.packet_rate,
                       n=params.n_nodes, w0=params.min_window,
                       seed=spec.seed + index)
        feasible = True
        if "analytic" in spec.modes:
            try:
                sol = solve_fixed_point(params)
                row.ptx_a = sol.p_tx
                row.pcl_a = sol.p_cl
                row.pidle_a = sol.p_idle
                row.mu_a = sol.mu
                row.aoi_a = sol.avg_aoi
            except OverCapacityError:
                row.status = STATUS_OVER_CAPACITY
                feasible = False
            except DivergenceError:
                row.status = STATUS_DIVERGENT
                feasible = False
            except SaturationError:
                row.status = STATUS_SATURATED
                feasible = False
        if "simulate" in spec.modes and feasible:
            cfg = SimulationConfig(params, horizon=spec.horizon,
                                   warmup=spec.warmup, seed=row.seed,
                                   stage_cap=spec.stage_cap)
            stats = simulate(cfg)
            row.ptx_s = stats.empirical_p_tx
            row.pcl_s = stats.empirical_p_cl
            row.mu_s = stats.empirical_mu
            row.aoi_s = stats.mean_aoi
            row.aoi_s_se = stats.mean_aoi_se
        rows.append(row)
    return rows


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def emit(rows, fmt, path):
    """Write rows as CSV or JSON (12 significant digits either way)."""
    if not rows:
        raise ParameterError("no rows to emit")
    if fmt == "csv":
        lines = [CSV_HEADER]
        for row in rows:
            rec = row.as_record()
            lines.append(",".join(_fmt(rec[name]) for name in SweepRow.FIELDS))
        text = "\n".join(lines) + "\n"
        with open(path, "w", encoding="utf-8") as handle:
            handle.write(text)
    elif fmt == "json":
        records = []
        for row in rows:
            rec = row.as_record()
            records.append({
                name: (float(f"{value:.12g}") if isinstance(value, float)
                       and math.isfinite(value) else value)
                for name, value in rec.items()})
        with open(path, "w", encoding="utf-8") as handle:
            json.dump(records, handle, indent=1)
            handle.write("\n")
    else:
        raise ParameterError(f"format must be csv or json, got {fmt!r}")


def load_rows(path, fmt):
    """Parse an emitted file back into SweepRow objects (round-trip)."""
    def from_record(rec):
        def num(x, cast=float):
            if x in (None, ""):
                return None
            return cast(x)
        return SweepRow(
            variable=rec["var"], p=float(rec["p"]), n=int(rec["N"]),
            w0=int(rec["w0"]), seed=int(rec["seed"]), status=rec["status"],
            ptx_a=num(rec["ptx_a"]), pcl_a=num(rec["pcl_a"]),
            pidle_a=num(rec["pidle_a"]), mu_a=num(rec["mu_a"]),
            aoi_a=num(rec["aoi_a"]), ptx_s=num(rec["ptx_s"]),
            pcl_s=num(rec["pcl_s"]), mu_s=num(rec["mu_s"]),
            aoi_s=num(rec["aoi_s"]), aoi_s_se=num(rec["aoi_s_se"]))

    with open(path, encoding="utf-8") as handle:
        if fmt == "json":
            return [from_record(rec) for rec in json.load(handle)]
        lines = handle.read().strip().split("\n")
    header = lines[0].split(",")
    if header != list(SweepRow.FIELDS):
        raise ParameterError(f"unexpected CSV header in {path}")
    rows = []
    for line in lines[1:]:
        parts = line.split(",")
        rows.append(from_record(dict(zip(SweepRow.FIELDS, parts))))
    return rows


def feasible_packet_grid(n_nodes, w0, count, p_min=None, margin=1e-4):
    """Log-spaced packet rates ending ``margin`` below the saturation rate."""
    if count < 1:
        raise ParameterError("count must be >= 1")
    p_hi = max_packet_rate(n_nodes, w0) - margin
    if p_hi <= 0.0:
        raise SaturationError(f"no feasible rate margin for N = {n_nodes}")
    if p_min is None:
        p_min = p_hi / 100.0
    if not 0.0 < p_min < p_hi:
        raise ParameterError(f"p_min must lie in (0, {p_hi:g}), got {p_min!r}")
    if count == 1:
        return [p_hi]
    ratio = (p_hi / p_min) ** (1.0 / (count - 1))
    return [p_min * ratio**k for k in range(count)]


def _monotone_violations(pairs, label):
    bad = []
    for (x0, y0), (x1, y1) in zip(pairs, pairs[1:]):
        if y1 < y0:
            bad.append(f"{label} decreases from {y0:.6g} to {y1:.6g} "
                       f"between {x0:g} and {x1:g}")
    return bad


def slope_sign_changes(values):
    """Number of sign changes of the discrete slope (zero slopes ignored)."""
    signs = [math.copysign(1.0, b - a) for a, b in zip(values, values[1:])
             if b != a]
    return sum(1 for s0, s1 in zip(signs, signs[1:]) if s0 != s1)


def check_sweep_properties(rows, rel_tol=0.05):
    """Post-run sanity checks; returns a list of violation messages.

    Checks the qualitative laws of the model (attempt and collision
    probabilities nondecreasing in the swept load) and, where both analytic
    and simulated columns exist on stable points, their relative agreement.
    """
    problems = []
    ok_rows = [r for r in rows if r.status == STATUS_OK]
    grid_of = {"packet_rate": lambda r: r.p, "n_nodes": lambda r: r.n}
    if ok_rows:
        key = grid_of[ok_rows[0].variable]
        for fieldname in ("ptx_a", "pcl_a"):
            pairs = [(key(r), getattr(r, fieldname)) for r in ok_rows
                     if getattr(r, fieldname) is not None]
            problems += _monotone_violations(pairs, fieldname)
        for r in ok_rows:
            for ana, sim, label in ((r.ptx_a, r.ptx_s, "p_tx"),
                                    (r.pcl_a, r.pcl_s, "p_cl"),
                                    (r.mu_a, r.mu_s, "mu"),
                                    (r.aoi_a, r.aoi_s, "aoi")):
                if ana is None or sim is None or not math.isfinite(ana):
                    continue
                if ana != 0.0 and abs(sim - ana) / abs(ana) > rel_tol:
                    problems.append(
                        f"{label} mismatch at p={r.p:g}, N={r.n}: "
                        f"simulated {sim:.6g} vs analytic {ana:.6g}")
    return problems


def parse_spec_file(path):
    """Read a flat ``key = value`` spec file; '#' starts a comment."""
    values = {}
    with open(path, encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParameterError(
                    f"{path}:{lineno}: expected 'key = value', got {raw!r}")
            key, _, value = line.partition("=")
            values[key.strip()] = value.strip()
    return values


def build_spec(values):
    """Turn a parsed key/value mapping into a SweepSpec."""
    def get_int(key, default=None):
        if key in values:
            return int(values[key])
        return default

    variable = values.get("variable")
    if variable is None:
        raise ParameterError("spec needs a 'variable' key")
    w0 = get_int("w0", 8)
    n_nodes = get_int("n")
    packet_rate = float(values["p"]) if "p" in values else None

    grid_text = values.get("grid", "")
    if grid_text.startswith("auto"):
        _, _, count_text = grid_text.partition(":")
        count = int(count_text) if count_text else 10
        if variable == "packet_rate":
            if n_nodes is None:
                raise ParameterError("auto grid needs a fixed n")
            grid = tuple(feasible_packet_grid(n_nodes, w0, count))
        else:
            raise ParameterError("auto grid is only defined for packet_rate")
    elif grid_text:
        caster = float if variable == "packet_rate" else int
        grid = tuple(caster(part) for part in grid_text.split(","))
    else:
        raise ParameterError("spec needs a 'grid' key")

    modes = tuple(part.strip()
                  for part in values.get("modes", "analytic").split(","))
    return SweepSpec(
        variable=variable,
        grid=grid,
        n_nodes=n_nodes,
        packet_rate=packet_rate,
        min_window=w0,
        modes=modes,
        horizon=get_int("horizon", 1_000_000),
        warmup=get_int("warmup", 10_000),
        seed=get_int("seed", DEFAULT_SEED),
        stage_cap=get_int("stage_cap", 24),
        out=values.get("out"),
        fmt=values.get("format", "csv"),
    )
