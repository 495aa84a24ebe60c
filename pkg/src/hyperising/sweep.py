"""Scaling-experiment harness: grids of (p, alpha or n) times seeded trials.

Each trial generates a fresh d-regular support and coefficients, draws
Gibbs samples sized by the scaling law (or an explicit n), runs the full
recovery pipeline, and records the metrics.  Trial seeds derive from
splitmix64(base_seed XOR (grid_index * 10^9 + trial)), so any subset of
trials can be reproduced in isolation and results are identical for any
worker count.  Failed trials become rows with an error status rather than
aborting the sweep; aggregation skips them and reports how many were
dropped.

The rows CSV is schema-versioned via its leading comment line.  Wall-clock
times are kept in memory (and an optional side file) but never written
into the CSV, which must be byte-identical across reruns.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

from .errors import CapacityError, ParseError
from .generate import (CoefficientScheme, assign_coefficients,
                       regular_hypergraph, scaling_n)
from .recovery import AggregationRule, run_pipeline
from .regression import FEATURE_BUDGET
from .sampler import GibbsConfig, draw_samples
from .util import splitmix64, seed_stream

__all__ = [
    "SweepConfig",
    "TrialRow",
    "GridSummary",
    "SweepResult",
    "run_sweep",
    "rows_to_csv",
    "rows_from_csv",
    "CSV_SCHEMA_LINE",
]

CSV_SCHEMA_LINE = "# sweep-csv v1"
_CSV_HEADER = ("p,k,d,alpha,n,trial,status,recovery_rate,success,"
               "lambda_used")


@dataclass(frozen=True)
class SweepConfig:
    """Fully describes one sweep; serializable to/from a JSON dict."""

    p_list: tuple[int, ...] = (32,)
    k: int = 3
    d: int = 3
    alpha_grid: tuple[float, ...] | None = None
    n_grid: tuple[int, ...] | None = None
    trials: int = 50
    divisor: float = 6e6
    lambda_mode: str = "practice"
    lam: float | None = None
    alpha_incoh: float = 1.0
    c_grid: tuple[float, ...] | None = None
    rule: str = "and_strict"
    coupling: float | None = None
    sign_mode: str = "all_plus"
    base_seed: int = 0
    workers: int = 1
    burn_in_sweeps: int = 1000
    spacing_sweeps: int = 5
    scan: str = "systematic"
    plot_metric: str = "rate"

    def validate(self) -> None:
        if not self.p_list or any(p < 3 for p in self.p_list):
            raise ValueError("p_list must be nonempty with p >= 3")
        if (self.alpha_grid is None) == (self.n_grid is None):
            raise ValueError("give exactly one of alpha_grid or n_grid")
        if self.alpha_grid is not None and (
                not self.alpha_grid or any(a <= 0 for a in self.alpha_grid)):
            raise ValueError("alpha_grid must be nonempty positive")
        if self.n_grid is not None and (
                not self.n_grid or any(n < 1 for n in self.n_grid)):
            raise ValueError("n_grid must be nonempty positive ints")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.divisor <= 0:
            raise ValueError("divisor must be positive")
        if self.lambda_mode not in ("practice", "theory", "fixed"):
            raise ValueError("lambda_mode must be practice, theory, or fixed")
        if self.lambda_mode == "fixed" and (self.lam is None or self.lam < 0):
            raise ValueError("fixed lambda_mode needs lam >= 0")
        if self.rule not in ("and_strict", "or_max"):
            raise ValueError("rule must be and_strict or or_max")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.coupling is not None and self.coupling <= 0:
            raise ValueError("coupling must be positive")
        for p in self.p_list:
            # surface generation and budget problems before any work starts
            if not 2 <= self.k <= p - 1:
                raise ValueError(f"need 2 <= k <= p-1, got k={self.k}, p={p}")
            if (p * self.d) % self.k != 0:
                raise ValueError(
                    f"k={self.k} must divide p*d={p * self.d} (p={p})")
            if math.comb(p - 1, self.k - 1) > FEATURE_BUDGET:
                raise CapacityError(
                    f"C({p - 1},{self.k - 1}) features exceed the budget "
                    f"{FEATURE_BUDGET}")
        GibbsConfig(burn_in_sweeps=self.burn_in_sweeps,
                    spacing_sweeps=self.spacing_sweeps, scan=self.scan)
        if self.plot_metric not in ("rate", "success"):
            raise ValueError("plot_metric must be rate or success")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in cls.__dataclass_fields__.values()}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown sweep config keys: {sorted(unknown)}")
        kwargs = dict(data)
        for key in ("p_list", "alpha_grid", "n_grid", "c_grid"):
            if kwargs.get(key) is not None:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)

    def grid_points(self) -> list[tuple[int, float | None, int]]:
        """(p, alpha, n) per grid point, in row-major (p outer) order."""
        points = []
        for p in self.p_list:
            if self.alpha_grid is not None:
                for a in self.alpha_grid:
                    points.append(
                        (p, float(a),
                         scaling_n(a, p, self.k, self.d, self.divisor)))
            else:
                for n in self.n_grid:
                    points.append((p, None, int(n)))
        return points


@dataclass
class TrialRow:
    p: int
    k: int
    d: int
    alpha: float | None
    n: int
    trial: int
    status: str
    rate: float | None
    success: bool | None
    lambda_used: float | None
    wall_time: float | None = None


@dataclass(frozen=True)
class GridSummary:
    p: int
    alpha: float | None
    n: int
    mean_rate: float | None
    success_fraction: float | None
    trials_ok: int
    trials_failed: int


@dataclass
class SweepResult:
    config: SweepConfig
    rows: list[TrialRow] = field(default_factory=list)

    def aggregates(self) -> list[GridSummary]:
        """Per grid point means over successful trials, in grid order."""
        out = []
        for p, alpha, n in self.config.grid_points():
            ok = [row for row in self.rows
                  if (row.p, row.alpha, row.n) == (p, alpha, n)
                  and row.status == "ok"]
            failed = sum(1 for row in self.rows
                         if (row.p, row.alpha, row.n) == (p, alpha, n)
                         and row.status != "ok")
            rates = [row.rate for row in ok if row.rate is not None]
            succ = [row.success for row in ok if row.success is not None]
            out.append(GridSummary(
                p=p, alpha=alpha, n=n,
                mean_rate=(sum(rates) / len(rates)) if rates else None,
                success_fraction=(sum(succ) / len(succ)) if succ else None,
                trials_ok=len(ok), trials_failed=failed))
        return out


def _run_trial(args) -> TrialRow:
    config, grid_index, p, alpha, n, trial = args
    trial_seed = splitmix64(config.base_seed ^ (grid_index * 10**9 + trial))
    graph_seed, coef_seed, gibbs_seed = seed_stream(trial_seed, 3)
    t0 = time.perf_counter()
    try:
        support = regular_hypergraph(p, config.k, config.d, graph_seed)
        tensor = assign_coefficients(support, CoefficientScheme(
            magnitude=config.coupling, sign_mode=config.sign_mode,
            seed=coef_seed))
        samples = draw_samples(tensor, n, GibbsConfig(
            burn_in_sweeps=config.burn_in_sweeps,
            spacing_sweeps=config.spacing_sweeps,
            scan=config.scan, seed=gibbs_seed))
        report = run_pipeline(
            samples, config.k, truth=tensor,
            lambda_mode=config.lambda_mode, lam=config.lam,
            alpha=config.alpha_incoh, c_grid=config.c_grid,
            rule=AggregationRule(mode=config.rule))
        return TrialRow(
            p=p, k=config.k, d=config.d, alpha=alpha, n=n, trial=trial,
            status="ok", rate=report.rate, success=report.success_signed,
            lambda_used=report.lambda_used,
            wall_time=time.perf_counter() - t0)
    except Exception as exc:  # recorded, not raised: one bad trial != a dead sweep
        return TrialRow(
            p=p, k=config.k, d=config.d, alpha=alpha, n=n, trial=trial,
            status=f"error:{type(exc).__name__}", rate=None, success=None,
            lambda_used=None, wall_time=time.perf_counter() - t0)


def run_sweep(config: SweepConfig) -> SweepResult:
    """Execute every (grid point, trial) pair; rows come back in grid order."""
    config.validate()
    jobs = []
    for grid_index, (p, alpha, n) in enumerate(config.grid_points()):
        for trial in range(config.trials):
            jobs.append((config, grid_index, p, alpha, n, trial))
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            rows = list(pool.map(_run_trial, jobs, chunksize=1))
    else:
        rows = [_run_trial(job) for job in jobs]
    return SweepResult(config=config, rows=rows)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def rows_to_csv(rows: list[TrialRow]) -> str:
    """Serialize rows; wall times are deliberately omitted (see module doc)."""
    lines = [CSV_SCHEMA_LINE, _CSV_HEADER]
    for row in rows:
        lines.append(",".join([
            _fmt(row.p), _fmt(row.k), _fmt(row.d), _fmt(row.alpha),
            _fmt(row.n), _fmt(row.trial), row.status, _fmt(row.rate),
            _fmt(row.success), _fmt(row.lambda_used)]))
    return "\n".join(lines) + "\n"


def rows_from_csv(text: str) -> list[TrialRow]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith("# sweep-csv"):
        raise ParseError("missing sweep CSV schema line", line=1)
    if lines[0].strip() != CSV_SCHEMA_LINE:
        raise ParseError(
            f"unsupported sweep CSV schema {lines[0].strip()!r}", line=1)
    if len(lines) < 2 or lines[1].strip() != _CSV_HEADER:
        raise ParseError("unexpected sweep CSV header", line=2)
    rows = []
    for lineno, line in enumerate(lines[2:], start=3):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != 10:
            raise ParseError(f"expected 10 columns, got {len(parts)}",
                             line=lineno)
        try:
            rows.append(TrialRow(
                p=int(parts[0]), k=int(parts[1]), d=int(parts[2]),
                alpha=float(parts[3]) if parts[3] else None,
                n=int(parts[4]), trial=int(parts[5]), status=parts[6],
                rate=float(parts[7]) if parts[7] else None,
                success=bool(int(parts[8])) if parts[8] else None,
                lambda_used=float(parts[9]) if parts[9] else None))
        except ValueError as exc:
            raise ParseError(str(exc), line=lineno)
    return rows
