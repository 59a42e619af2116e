"""Stochastic proximal point iteration, stepsize schedules, and run traces.

The update is ``x_{k+1} = prox of the sampled component at stepsize mu_k``.
On indicator-only problems the iteration reduces to stochastic alternating
projections, since the projection ignores the stepsize.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidSpecError, InvalidStepsizeError, SolverError, StochproxError
from .problems import StochasticProblem, evaluate_feasibility, mean_envelope

TRACE_COLUMNS = ("k", "mu_k", "dist_sq", "envelope_residual",
                 "feasibility_residual", "wall_time_ns")


@dataclass(frozen=True)
class ConstantStep:
    """Constant stepsize ``mu_k = mu0``."""

    mu0: float

    def __post_init__(self):
        if not (self.mu0 > 0.0 and math.isfinite(self.mu0)):
            raise InvalidStepsizeError(f"mu0 must be positive, got {self.mu0}")

    def at(self, k: int) -> float:
        return self.mu0


@dataclass(frozen=True)
class PolynomialStep:
    """Decaying stepsize ``mu_k = mu0 / (k + 1)**gamma``.

    The index shift keeps ``mu_0`` finite and equal to ``mu0``.
    """

    mu0: float
    gamma: float

    def __post_init__(self):
        if not (self.mu0 > 0.0 and math.isfinite(self.mu0)):
            raise InvalidStepsizeError(f"mu0 must be positive, got {self.mu0}")
        if not (self.gamma > 0.0 and math.isfinite(self.gamma)):
            raise InvalidStepsizeError(f"gamma must be positive, got {self.gamma}")

    def at(self, k: int) -> float:
        return self.mu0 / float(k + 1) ** self.gamma


StepSchedule = Union[ConstantStep, PolynomialStep]


def step_size(schedule: StepSchedule, k: int) -> float:
    """Stepsize of the schedule at iteration ``k >= 0``."""
    if k < 0:
        raise InvalidStepsizeError(f"iteration index must be >= 0, got {k}")
    return schedule.at(int(k))


def schedule_label(schedule: StepSchedule) -> str:
    if isinstance(schedule, ConstantStep):
        return f"const_mu{schedule.mu0:g}"
    return f"poly_mu{schedule.mu0:g}_g{schedule.gamma:g}"


@dataclass(frozen=True)
class TraceMetrics:
    """What to record along a run; anything left ``None`` is reported as NaN.

    ``f_star`` enables the envelope residual; ``optimal_set`` (one of the
    diagnostics optimal-set models) enables the squared distance column.
    ``stride`` thins the records for long runs; the rows at ``k = 0`` and the
    final iterate are always kept.
    """

    f_star: Optional[float] = None
    optimal_set: Optional[object] = None
    stride: int = 1

    def __post_init__(self):
        if self.stride < 1:
            raise InvalidSpecError("metric stride must be >= 1")


@dataclass
class RunTrace:
    """Per-iteration metric records of one run (includes the ``k = 0`` row)."""

    k: np.ndarray
    mu: np.ndarray
    dist_sq: np.ndarray
    envelope_residual: np.ndarray
    feasibility_residual: np.ndarray
    wall_time_ns: np.ndarray
    final_x: np.ndarray
    seed: int
    schedule: StepSchedule


@dataclass
class ReplicateTrace:
    """Per-iteration mean and sample variance over independent rounds."""

    k: np.ndarray
    mu: np.ndarray
    mean_dist_sq: np.ndarray
    var_dist_sq: np.ndarray
    mean_envelope_residual: np.ndarray
    var_envelope_residual: np.ndarray
    mean_feasibility_residual: np.ndarray
    var_feasibility_residual: np.ndarray
    rounds: int
    base_seed: int
    schedule: StepSchedule
    final_x: list = field(default_factory=list)


def _record_points(iterations: int, stride: int) -> np.ndarray:
    ks = list(range(0, iterations + 1, stride))
    if ks[-1] != iterations:
        ks.append(iterations)
    return np.array(ks, dtype=np.int64)


def spp_run(problem: StochasticProblem, x0, schedule: StepSchedule, iterations: int,
            seed: int, metrics: Optional[TraceMetrics] = None,
            index_sequence: Optional[Sequence[int]] = None) -> RunTrace:
    """Run the stochastic proximal point iteration and capture a trace.

    Components are sampled with the problem's weight vector from a PCG64
    stream seeded by ``seed``, so identical inputs give bit-identical traces.
    ``index_sequence`` overrides the sampling with a fixed component order
    (deterministic schedules for tests and cyclic variants).
    """
    if iterations < 1:
        raise InvalidSpecError("iterations must be >= 1")
    x = np.array(x0, dtype=np.float64)
    if x.shape != (problem.dimension,) or not np.all(np.isfinite(x)):
        raise InvalidSpecError("x0 must be a finite vector of the problem dimension")
    metrics = metrics or TraceMetrics()

    if index_sequence is None:
        rng = np.random.default_rng(seed)
        idx = problem.sample_indices(rng, iterations)
    else:
        idx = np.asarray(index_sequence, dtype=np.intp)
        if idx.shape != (iterations,):
            raise InvalidSpecError("index_sequence length must equal iterations")

    ks = _record_points(iterations, metrics.stride)
    n_rec = len(ks)
    mu_col = np.empty(n_rec)
    dist_col = np.full(n_rec, np.nan)
    env_col = np.full(n_rec, np.nan)
    feas_col = np.empty(n_rec)
    wall_col = np.zeros(n_rec, dtype=np.int64)

    dist_fn = None
    if metrics.optimal_set is not None:
        from .diagnostics import dist_to_optimal
        dist_fn = dist_to_optimal

    t0 = time.perf_counter_ns()
    rec = 0
    for k in range(iterations + 1):
        if rec < n_rec and k == ks[rec]:
            mu_k = step_size(schedule, k)
            mu_col[rec] = mu_k
            if dist_fn is not None:
                dist_col[rec] = dist_fn(metrics.optimal_set, x) ** 2
            if metrics.f_star is not None:
                env_col[rec] = abs(mean_envelope(problem, x, mu_k) - metrics.f_star)
            feas_col[rec] = evaluate_feasibility(problem, x)
            wall_col[rec] = time.perf_counter_ns() - t0
            rec += 1
        if k == iterations:
            break
        try:
            x = problem.prox_update(int(idx[k]), x, step_size(schedule, k))
        except StochproxError as exc:
            raise SolverError(f"prox step failed at iteration {k}: {exc}") from exc

    return RunTrace(k=ks, mu=mu_col, dist_sq=dist_col, envelope_residual=env_col,
                    feasibility_residual=feas_col, wall_time_ns=wall_col,
                    final_x=x, seed=int(seed), schedule=schedule)


def replicate(problem: StochasticProblem, x0, schedule: StepSchedule, iterations: int,
              rounds: int, base_seed: int,
              metrics: Optional[TraceMetrics] = None) -> ReplicateTrace:
    """Average ``rounds`` independent runs seeded ``base_seed .. base_seed+rounds-1``.

    Accumulation follows the fixed round order, so results are
    bit-reproducible.  Sample variance uses ``ddof=1``; with a single round
    it is reported as NaN.
    """
    if rounds < 1:
        raise InvalidSpecError("rounds must be >= 1")
    traces = [spp_run(problem, x0, schedule, iterations, base_seed + r, metrics)
              for r in range(rounds)]

    def stack(name):
        return np.stack([getattr(t, name) for t in traces])

    def mean_var(mat):
        mean = mat.mean(axis=0)
        if rounds > 1:
            var = ((mat - mean) ** 2).sum(axis=0) / (rounds - 1)
        else:
            var = np.full(mat.shape[1], np.nan)
        return mean, var

    d_mean, d_var = mean_var(stack("dist_sq"))
    e_mean, e_var = mean_var(stack("envelope_residual"))
    f_mean, f_var = mean_var(stack("feasibility_residual"))
    return ReplicateTrace(
        k=traces[0].k, mu=traces[0].mu,
        mean_dist_sq=d_mean, var_dist_sq=d_var,
        mean_envelope_residual=e_mean, var_envelope_residual=e_var,
        mean_feasibility_residual=f_mean, var_feasibility_residual=f_var,
        rounds=rounds, base_seed=int(base_seed), schedule=schedule,
        final_x=[t.final_x for t in traces],
    )


def _fmt(value) -> str:
    return repr(float(value))


def write_trace_csv(path, trace: Union[RunTrace, ReplicateTrace],
                    deterministic_wall: bool = True) -> None:
    """Write a trace with the fixed column schema.

    Aggregated traces have no single wall clock; with ``deterministic_wall``
    (the default, and forced for :class:`ReplicateTrace`) the wall column is
    written as 0 so reruns of the same configuration are byte-identical.
    """
    if isinstance(trace, ReplicateTrace):
        dist, env, feas = (trace.mean_dist_sq, trace.mean_envelope_residual,
                           trace.mean_feasibility_residual)
        wall = np.zeros(len(trace.k), dtype=np.int64)
    else:
        dist, env, feas = trace.dist_sq, trace.envelope_residual, trace.feasibility_residual
        wall = np.zeros(len(trace.k), dtype=np.int64) if deterministic_wall \
            else trace.wall_time_ns
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for i, k in enumerate(trace.k):
            writer.writerow([int(k), _fmt(trace.mu[i]), _fmt(dist[i]), _fmt(env[i]),
                             _fmt(feas[i]), int(wall[i])])


def read_trace_csv(path):
    """Read a trace CSV back into a dict of numpy columns (schema-checked)."""
    from .errors import EmptyInputError, TraceSchemaError
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyInputError(f"{path}: file is empty") from None
        if tuple(header) != TRACE_COLUMNS:
            missing = [c for c in TRACE_COLUMNS if c not in header]
            extra = [c for c in header if c not in TRACE_COLUMNS]
            offending = (missing + extra or ["<order>"])[0]
            raise TraceSchemaError(f"{path}: unexpected column {offending!r}")
        rows = [row for row in reader if row]
    if not rows:
        raise EmptyInputError(f"{path}: no data rows")
    data = np.array([[float(v) for v in row] for row in rows])
    return {name: data[:, i] for i, name in enumerate(TRACE_COLUMNS)}
