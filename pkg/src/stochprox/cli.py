"""Command-line front end: generate, run, bounds, verify, plot.

The experiment configuration is a single YAML file (see ``configs/`` in the
repository for the documented schema).  Without a config file the defaults
reproduce the benchmark experiment: a 32x40 least-squares stack under 200
random halfspaces, decaying stepsizes with exponents {1, 2/3, 1/2}, and
5-round averaging.  Every run writes a manifest with the resolved config,
its hash, and all seeds, which is sufficient to reproduce the CSVs byte for
byte.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import yaml

from . import __version__
from .checks import SUITES, run_suite
from .diagnostics import (
    affine_model_from_problem,
    dist_to_optimal,
    fit_rate_slope,
    intersection_model_from_problem,
    point_model_from_reference,
)
from .errors import (
    ConfigError,
    EmptyInputError,
    StochproxError,
    TraceSchemaError,
    UncertifiedModelError,
    UndefinedSlopeError,
)
from .problems import (
    InstanceSpec,
    StochasticProblem,
    generate_constrained_regression,
    generate_halfspace_cfp,
    generate_interpolation_regression,
    problem_from_json,
    problem_to_json,
    reference_solve,
)
from .regularity import (
    RegularityConstants,
    constants_cfp,
    constants_rsc,
    estimate_linear_regularity,
    recurrence_bound_curve,
)
from .solver import (
    ConstantStep,
    PolynomialStep,
    TraceMetrics,
    replicate,
    schedule_label,
    step_size,
    write_trace_csv,
    read_trace_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_VERIFY = 4


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleSpec:
    kind: str
    mu0: float
    gamma: Optional[float] = None

    def build(self):
        if self.kind == "constant":
            return ConstantStep(self.mu0)
        return PolynomialStep(self.mu0, self.gamma)

    def as_dict(self):
        doc = {"kind": self.kind, "mu0": self.mu0}
        if self.kind == "polynomial":
            doc["gamma"] = self.gamma
        return doc


@dataclass(frozen=True)
class ExperimentConfig:
    family: str = "constrained_regression"
    m: int = 32
    n: int = 40
    p: int = 200
    seed: int = 7
    schedules: tuple = (
        ScheduleSpec("polynomial", 1.0, 1.0),
        ScheduleSpec("polynomial", 1.0, 2.0 / 3.0),
        ScheduleSpec("polynomial", 1.0, 0.5),
    )
    iterations: Optional[int] = None
    rounds: int = 5
    base_seed: int = 1000
    metric_stride: int = 1
    reference_tol: float = 1e-6
    out_dir: str = "results"
    bounds: Optional[dict] = None

    def resolved_iterations(self, component_count: int) -> int:
        # Default budget: ten sweeps over the component family.
        return self.iterations if self.iterations else 10 * component_count

    def as_dict(self) -> dict:
        doc = dataclasses.asdict(self)
        doc["schedules"] = [s.as_dict() for s in self.schedules]
        return doc


def _require(cond: bool, field: str, message: str):
    if not cond:
        raise ConfigError(f"{field}: {message}")


def config_from_mapping(doc: dict) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("config root must be a mapping")
    known = {"instance", "schedules", "run", "reference", "output", "bounds"}
    unknown = set(doc) - known
    _require(not unknown, "config", f"unknown sections {sorted(unknown)}")

    inst = doc.get("instance", {}) or {}
    family = inst.get("family", "constrained_regression")
    _require(family in ("constrained_regression", "halfspace_cfp",
                        "interpolation_regression"),
             "instance.family", f"unknown family {family!r}")
    m = int(inst.get("m", 32))
    n = int(inst.get("n", 40))
    p = int(inst.get("p", 200))
    seed = int(inst.get("seed", 7))
    _require(m >= 0 and n >= 1 and p >= 0, "instance", "counts must be nonnegative, n >= 1")
    _require(m + p >= 1, "instance", "needs at least one component")

    raw_schedules = doc.get("schedules")
    if raw_schedules is None:
        schedules = ExperimentConfig().schedules
    else:
        _require(isinstance(raw_schedules, list) and raw_schedules,
                 "schedules", "must be a nonempty list")
        built = []
        for i, entry in enumerate(raw_schedules):
            kind = entry.get("kind", "polynomial")
            _require(kind in ("polynomial", "constant"),
                     f"schedules[{i}].kind", f"unknown kind {kind!r}")
            mu0 = float(entry.get("mu0", 1.0))
            _require(mu0 > 0, f"schedules[{i}].mu0", "must be positive")
            gamma = entry.get("gamma")
            if kind == "polynomial":
                _require(gamma is not None, f"schedules[{i}].gamma",
                         "required for polynomial schedules")
                gamma = float(gamma)
                _require(gamma > 0, f"schedules[{i}].gamma", "must be positive")
                built.append(ScheduleSpec(kind, mu0, gamma))
            else:
                built.append(ScheduleSpec(kind, mu0))
        schedules = tuple(built)

    run = doc.get("run", {}) or {}
    iterations = run.get("iterations")
    if iterations is not None:
        iterations = int(iterations)
        _require(iterations >= 1, "run.iterations", "must be >= 1")
    rounds = int(run.get("rounds", 5))
    _require(rounds >= 1, "run.rounds", "must be >= 1")
    base_seed = int(run.get("base_seed", 1000))
    stride = int(run.get("metric_stride", 1))
    _require(stride >= 1, "run.metric_stride", "must be >= 1")

    ref = doc.get("reference", {}) or {}
    tol = float(ref.get("tol", 1e-6))
    _require(tol > 0, "reference.tol", "must be positive")

    out = doc.get("output", {}) or {}
    out_dir = str(out.get("dir", "results"))

    bounds = doc.get("bounds")
    if bounds is not None:
        _require(isinstance(bounds, dict), "bounds", "must be a mapping")

    return ExperimentConfig(family=family, m=m, n=n, p=p, seed=seed,
                            schedules=schedules, iterations=iterations, rounds=rounds,
                            base_seed=base_seed, metric_stride=stride,
                            reference_tol=tol, out_dir=out_dir, bounds=bounds)


def load_config(path: Optional[str]) -> ExperimentConfig:
    if path is None:
        return ExperimentConfig()
    try:
        with open(path) as fh:
            doc = yaml.safe_load(fh)
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from exc
    return config_from_mapping(doc or {})


def build_problem(config: ExperimentConfig) -> StochasticProblem:
    if config.family == "constrained_regression":
        spec = InstanceSpec("constrained_regression", m=config.m, n=config.n,
                            p=config.p, seed=config.seed)
        return generate_constrained_regression(spec)
    if config.family == "halfspace_cfp":
        count = config.p if config.p else config.m
        return generate_halfspace_cfp(config.n, count, config.seed)
    return generate_interpolation_regression(config.m, config.n, config.seed)


def _config_hash(config: ExperimentConfig) -> str:
    blob = json.dumps(config.as_dict(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


def _write_manifest(out_dir: Path, config: ExperimentConfig, extra: dict) -> None:
    manifest = {
        "config": config.as_dict(),
        "config_sha256": _config_hash(config),
        "package_version": __version__,
    }
    manifest.update(extra)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, sort_keys=True, indent=2) + "\n")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_generate(config: ExperimentConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem = build_problem(config)
    (out_dir / "problem.json").write_text(problem_to_json(problem) + "\n")
    _write_manifest(out_dir, config, {"command": "generate",
                                      "components": len(problem)})
    print(f"wrote {out_dir / 'problem.json'} ({len(problem)} components, "
          f"dimension {problem.dimension})")
    return EXIT_OK


def _metrics_for(problem: StochasticProblem, config: ExperimentConfig):
    """Reference solve plus the metric models the instance supports."""
    reference = reference_solve(problem, tol=config.reference_tol)
    optimal_set = None
    if reference.unique_minimizer:
        optimal_set = point_model_from_reference(reference)
    elif config.family == "interpolation_regression":
        optimal_set = affine_model_from_problem(problem)
    elif not problem.loss_indices.size and problem.interior_point is not None:
        optimal_set = intersection_model_from_problem(problem)
    metrics = TraceMetrics(f_star=reference.F_star, optimal_set=optimal_set,
                           stride=config.metric_stride)
    return reference, metrics


def cmd_run(config: ExperimentConfig, out_dir: Path, threads: int = 1) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem_path = out_dir / "problem.json"
    if problem_path.exists():
        problem = problem_from_json(problem_path.read_text())
    else:
        problem = build_problem(config)
        problem_path.write_text(problem_to_json(problem) + "\n")
    reference, metrics = _metrics_for(problem, config)
    iterations = config.resolved_iterations(len(problem))
    x0 = np.zeros(problem.dimension)

    def one_variant(spec: ScheduleSpec):
        schedule = spec.build()
        trace = replicate(problem, x0, schedule, iterations, config.rounds,
                          config.base_seed, metrics)
        return spec, trace

    if threads > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=threads) as pool:
            variants = list(pool.map(one_variant, config.schedules))
    else:
        variants = [one_variant(s) for s in config.schedules]

    summary_rows = []
    for spec, trace in variants:
        label = schedule_label(spec.build())
        write_trace_csv(out_dir / f"trace_{label}.csv", trace)
        try:
            slope = fit_rate_slope(trace, 0.5, metric="envelope_residual")
        except (UndefinedSlopeError, StochproxError):
            slope = math.nan
        summary_rows.append({
            "variant": label,
            "final_envelope_residual": float(trace.mean_envelope_residual[-1]),
            "final_feasibility_residual": float(trace.mean_feasibility_residual[-1]),
            "fitted_slope": slope,
        })

    summary_path = out_dir / "summary.csv"
    with open(summary_path, "w") as fh:
        fh.write("variant,final_envelope_residual,final_feasibility_residual,fitted_slope\n")
        for row in summary_rows:
            fh.write(f"{row['variant']},{row['final_envelope_residual']!r},"
                     f"{row['final_feasibility_residual']!r},{row['fitted_slope']!r}\n")

    _write_manifest(out_dir, config, {
        "command": "run",
        "iterations": iterations,
        "round_seeds": list(range(config.base_seed, config.base_seed + config.rounds)),
        "x0": "origin",
        "reference": {"F_star": reference.F_star,
                      "kkt_residual": reference.kkt_residual,
                      "feasibility_violation": reference.feasibility_violation,
                      "unique_minimizer": reference.unique_minimizer},
    })
    for row in summary_rows:
        print(f"{row['variant']}: final |F_mu - F*| = {row['final_envelope_residual']:.6e}, "
              f"final feasibility = {row['final_feasibility_residual']:.6e}, "
              f"slope = {row['fitted_slope']:.3f}")
    return EXIT_OK


def _bounds_constants(config: ExperimentConfig, problem: StochasticProblem,
                      mu0: float) -> RegularityConstants:
    spec = dict(config.bounds or {})
    source = spec.get("source", "manual")
    if source == "manual":
        for key in ("sigma_F_mu", "beta", "S_star"):
            _require(key in spec, f"bounds.{key}", "required for manual constants")
        return RegularityConstants(float(spec["sigma_F_mu"]), float(spec["beta"]),
                                   spec.get("sigma_X"), float(spec["S_star"]))
    if source == "cfp":
        sigma_X = spec.get("sigma_X")
        if sigma_X is None:
            estimate = estimate_linear_regularity(
                problem, int(spec.get("sample_count", 200)),
                int(spec.get("estimator_seed", 0)))
            sigma_X = estimate.sigma_hat
        return constants_cfp(float(sigma_X), mu0)
    if source == "rsc":
        matrices = [np.outer(c.a, c.a) for c in problem.components
                    if hasattr(c, "a")]
        _require(bool(matrices), "bounds.source",
                 "rsc constants need least-squares components")
        weights = problem.weights[problem.loss_indices]
        weights = weights / weights.sum()
        return constants_rsc("ii", matrices, mu0, weights,
                             e_grad_sq_at_opt=float(spec.get("e_grad_sq_at_opt", 0.0)))
    raise ConfigError(f"bounds.source: unknown source {source!r}")


def cmd_bounds(config: ExperimentConfig, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    problem_path = out_dir / "problem.json"
    if problem_path.exists():
        problem = problem_from_json(problem_path.read_text())
    else:
        problem = build_problem(config)
    spec = dict(config.bounds or {})
    schedule_index = int(spec.get("schedule_index", 0))
    _require(0 <= schedule_index < len(config.schedules),
             "bounds.schedule_index", "out of range")
    schedule = config.schedules[schedule_index].build()
    mu0 = step_size(schedule, 0)
    constants = _bounds_constants(config, problem, mu0)

    k_max = int(spec.get("k", config.resolved_iterations(len(problem))))
    dist0_sq = spec.get("dist0_sq")
    if dist0_sq is None:
        x0 = np.zeros(problem.dimension)
        if problem.interior_point is not None and not problem.loss_indices.size:
            model = intersection_model_from_problem(problem)
            dist0_sq = dist_to_optimal(model, x0) ** 2
        elif problem.optimum_anchor is not None:
            dist0_sq = float(np.linalg.norm(x0 - problem.optimum_anchor)) ** 2
        else:
            reference = reference_solve(problem, tol=config.reference_tol)
            dist0_sq = float(np.linalg.norm(x0 - reference.x_ref)) ** 2
    curve = recurrence_bound_curve(float(dist0_sq), constants, schedule, k_max)

    label = schedule_label(schedule)
    path = out_dir / f"bounds_{label}.csv"
    with open(path, "w") as fh:
        fh.write("k,bound\n")
        for k, value in enumerate(curve):
            fh.write(f"{k},{float(value)!r}\n")
    _write_manifest(out_dir, config, {
        "command": "bounds",
        "constants": {"sigma_F_mu": constants.sigma_F_mu, "beta": constants.beta,
                      "sigma_X": constants.sigma_X, "S_star_F": constants.S_star_F},
        "dist0_sq": float(dist0_sq),
    })
    print(f"wrote {path} (k = 0..{k_max})")
    return EXIT_OK


def cmd_verify(suite: str, out_path: Optional[str]) -> int:
    report = run_suite(suite)
    text = json.dumps(report, indent=2, sort_keys=True)
    if out_path:
        Path(out_path).write_text(text + "\n")
    print(text)
    return EXIT_OK if report["passed"] else EXIT_VERIFY


def cmd_plot(csv_paths, out_dir: Path) -> int:
    if not csv_paths:
        raise EmptyInputError("no trace CSVs given")
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir.mkdir(parents=True, exist_ok=True)
    figures = {
        "envelope_residual": ("smoothed objective residual", "residual.png"),
        "feasibility_residual": ("feasibility residual", "feasibility.png"),
    }
    data = [(Path(p).stem, read_trace_csv(p)) for p in csv_paths]
    written = []
    for column, (title, filename) in figures.items():
        fig, ax = plt.subplots(figsize=(7.0, 4.2))
        for name, cols in data:
            ks = cols["k"]
            vals = cols[column]
            mask = np.isfinite(vals) & (vals > 0) & (ks > 0)
            ax.plot(ks[mask], vals[mask], label=name.replace("trace_", ""))
        ax.set_xlabel("iteration k")
        ax.set_ylabel(title)
        ax.set_yscale("log")
        ax.legend()
        fig.tight_layout()
        path = out_dir / filename
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stochprox",
        description="stochastic proximal point experiments: generate instances, "
                    "run stepsize sweeps, evaluate bounds, verify invariants, plot traces")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML experiment configuration")
        p.add_argument("--out", help="output directory (overrides config)")
        p.add_argument("--seed", type=int, help="instance seed override")

    p_gen = sub.add_parser("generate", help="write the problem JSON and manifest")
    common(p_gen)

    p_run = sub.add_parser("run", help="run all schedule variants and write traces")
    common(p_run)
    p_run.add_argument("--threads", type=int, default=1,
                       help="parallelize across schedule variants")

    p_bounds = sub.add_parser("bounds", help="evaluate the distance-bound curve")
    common(p_bounds)

    p_verify = sub.add_parser("verify", help="run randomized invariant suites")
    p_verify.add_argument("--suite", default="all", choices=sorted(SUITES))
    p_verify.add_argument("--out", help="also write the JSON report here")

    p_plot = sub.add_parser("plot", help="render residual/feasibility figures")
    p_plot.add_argument("csvs", nargs="+", help="trace CSV files")
    p_plot.add_argument("--out", default="figures", help="figure output directory")
    return parser


def _resolve(args) -> tuple[ExperimentConfig, Path]:
    config = load_config(getattr(args, "config", None))
    if getattr(args, "seed", None) is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out) if getattr(args, "out", None) else Path(config.out_dir)
    return config, out_dir


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "generate":
            config, out_dir = _resolve(args)
            return cmd_generate(config, out_dir)
        if args.command == "run":
            config, out_dir = _resolve(args)
            return cmd_run(config, out_dir, threads=max(1, args.threads))
        if args.command == "bounds":
            config, out_dir = _resolve(args)
            return cmd_bounds(config, out_dir)
        if args.command == "verify":
            return cmd_verify(args.suite, args.out)
        if args.command == "plot":
            return cmd_plot(args.csvs, Path(args.out))
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (TraceSchemaError, EmptyInputError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UncertifiedModelError as exc:
        print(f"metric error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except StochproxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    raise SystemExit(main())
