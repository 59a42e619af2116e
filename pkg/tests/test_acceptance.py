"""Acceptance gate: one test per acceptance criterion, at the stated tolerances.

Every test prints a single ``[acceptance] <name>: PASS/FAIL`` line (run with
``pytest tests/test_acceptance.py -v -s`` to see them all), and asserts the
stated runtime budget where one applies.
"""

import json
import math
import time

import numpy as np
import pytest
import yaml

import stochprox as sp
from stochprox import cli
from stochprox.diagnostics import (
    intersection_model_from_problem,
    point_model_from_reference,
)
from stochprox.prox import HalfspaceIndicator, HingeReg, LeastSquares


class _Report:
    def __init__(self, name):
        self.name = name

    def __enter__(self):
        self.t0 = time.perf_counter
        self.start = time.perf_counter()
        return self

    @property
    def elapsed(self):
        return time.perf_counter() - self.start

    def __exit__(self, exc_type, exc, tb):
        status = "PASS" if exc_type is None else "FAIL"
        print(f"[acceptance] {self.name}: {status} ({self.elapsed:.1f}s)")
        return False


def _random_component(rng, n, kind):
    a = rng.standard_normal(n)
    while np.linalg.norm(a) < 0.3:
        a = rng.standard_normal(n)
    b = float(rng.standard_normal())
    if kind == "least_squares":
        return LeastSquares(a, b)
    if kind == "hinge":
        return HingeReg(a, b, float(abs(rng.standard_normal())))
    return HalfspaceIndicator(a, b)


def test_prox_oracle_equivalence():
    """Closed forms match the numeric oracle to 1e-8 over 1000 draws per kind."""
    with _Report("prox oracle equivalence") as rep:
        rng = np.random.default_rng(12345)
        worst = 0.0
        for kind in ("least_squares", "hinge", "halfspace"):
            for _ in range(1000):
                n = int(rng.integers(2, 8))
                comp = _random_component(rng, n, kind)
                x = rng.standard_normal(n) * 3.0
                mu = float(10.0 ** rng.uniform(-3.0, 1.5))
                gap = float(np.linalg.norm(sp.moreau(comp, x, mu).z
                                           - sp.numeric_prox(comp, x, mu).z))
                worst = max(worst, gap)
        assert worst <= 1e-8, f"worst closed-form/oracle gap {worst:.3e}"
        assert rep.elapsed < 10.0


def test_benchmark_qualitative_reproduction():
    """Fast-decay stepsizes win: gamma=1 smallest final residual, ordering monotone."""
    with _Report("benchmark qualitative reproduction") as rep:
        gammas = (1.0, 2.0 / 3.0, 0.5)
        hits = 0
        for master in range(10):
            spec = sp.InstanceSpec("constrained_regression", m=32, n=40, p=200,
                                   seed=master)
            problem = sp.generate_constrained_regression(spec)
            reference = sp.reference_solve(problem, tol=1e-6)
            metrics = sp.TraceMetrics(f_star=reference.F_star)
            iterations = 10 * len(problem)
            finals = []
            for gamma in gammas:
                trace = sp.replicate(problem, np.zeros(40),
                                     sp.PolynomialStep(1.0, gamma), iterations,
                                     rounds=5, base_seed=10_000 + 1000 * master,
                                     metrics=metrics)
                finals.append(float(trace.mean_envelope_residual[-1]))
            if finals[0] == min(finals) and finals[0] <= finals[1] <= finals[2]:
                hits += 1
        assert hits >= 8, f"ordering held in only {hits}/10 master seeds"
        assert rep.elapsed < 120.0


def _well_conditioned_stack():
    rng = np.random.default_rng(42)
    n, m = 16, 150
    comps = tuple(LeastSquares(2.0 * rng.standard_normal(n),
                               float(rng.standard_normal())) for _ in range(m))
    return sp.StochasticProblem(comps, None, n)


def test_sublinear_rate_slopes():
    """Mean squared distance decays like 1/k^gamma for decaying stepsizes."""
    with _Report("sublinear rate slopes") as rep:
        problem = _well_conditioned_stack()
        reference = sp.reference_solve(problem, tol=1e-10)
        model = point_model_from_reference(reference)
        metrics = sp.TraceMetrics(optimal_set=model)
        for gamma, mu0 in ((0.5, 0.2), (0.75, 1.0)):
            trace = sp.replicate(problem, np.zeros(problem.dimension),
                                 sp.PolynomialStep(mu0, gamma), 20_000,
                                 rounds=20, base_seed=100, metrics=metrics)
            slope = sp.fit_rate_slope(trace, 0.5, metric="dist_sq")
            assert abs(slope - (-gamma)) <= 0.25, (
                f"gamma={gamma}: tail slope {slope:.3f} not within 0.25 of {-gamma}")
        assert rep.elapsed < 120.0


def _cfp_instance():
    problem = sp.generate_halfspace_cfp(n=3, count=5, seed=0)
    estimate = sp.estimate_linear_regularity(problem, 300, seed=0)
    model = intersection_model_from_problem(problem)
    x0 = problem.interior_point + 8.0 * np.random.default_rng(7).standard_normal(3)
    return problem, estimate, model, x0


def test_linear_convergence_under_interpolation():
    """Feasibility runs contract geometrically at least as fast as 1 - sigma_hat."""
    with _Report("linear convergence under interpolation") as rep:
        problem, estimate, model, x0 = _cfp_instance()
        sigma = estimate.sigma_hat
        assert 0.0 < sigma <= 1.0
        dist0_sq = sp.dist_to_optimal(model, x0) ** 2
        trace = sp.replicate(problem, x0, sp.ConstantStep(1.0), 500, rounds=100,
                             base_seed=40_000,
                             metrics=sp.TraceMetrics(optimal_set=model))
        ks = np.asarray(trace.k)
        mean = np.asarray(trace.mean_dist_sq)
        limit = 1.0 - sigma + 0.05

        # geometric fit over the window where the signal is above the
        # measurement floor of the distance oracle
        live = mean > 1e-20 * mean[0]
        k_live = int(ks[live].max())
        sel = (ks >= 1) & (ks <= k_live)
        rate = math.exp(np.polyfit(ks[sel], np.log(mean[sel]), 1)[0])
        assert rate <= limit, f"fitted rate {rate:.4f} exceeds {limit:.4f}"
        assert mean[-1] <= limit ** 500 * dist0_sq
        assert rep.elapsed < 60.0


def test_recurrence_bound_soundness():
    """Empirical mean squared distance sits below the bound at every logged k."""
    with _Report("recurrence bound soundness") as rep:
        # feasibility instance with estimated set-regularity constants
        problem, estimate, model, x0 = _cfp_instance()
        constants = sp.constants_cfp(estimate.sigma_hat, 1.0)
        dist0_sq = sp.dist_to_optimal(model, x0) ** 2
        iterations = 250
        trace = sp.replicate(problem, x0, sp.ConstantStep(1.0), iterations,
                             rounds=100, base_seed=40_000,
                             metrics=sp.TraceMetrics(optimal_set=model))
        curve = sp.recurrence_bound_curve(dist0_sq, constants,
                                          sp.ConstantStep(1.0), iterations)
        _assert_below_bound(trace, curve)

        # interpolation least-squares stack with curvature-based constants
        problem = sp.generate_interpolation_regression(m=30, n=6, seed=3)
        reference = sp.reference_solve(problem, tol=1e-10)
        matrices = [np.outer(c.a, c.a) for c in problem.components]
        constants = sp.constants_rsc("ii", matrices, 1.0, e_grad_sq_at_opt=0.0)
        model = point_model_from_reference(reference)
        x0 = np.zeros(problem.dimension)
        dist0_sq = float(np.linalg.norm(x0 - reference.x_ref) ** 2)
        iterations = 300
        trace = sp.replicate(problem, x0, sp.ConstantStep(1.0), iterations,
                             rounds=100, base_seed=50_000,
                             metrics=sp.TraceMetrics(optimal_set=model))
        curve = sp.recurrence_bound_curve(dist0_sq, constants,
                                          sp.ConstantStep(1.0), iterations)
        _assert_below_bound(trace, curve)
        assert rep.elapsed < 120.0


def _assert_below_bound(trace, curve):
    mean = np.asarray(trace.mean_dist_sq)
    se = np.sqrt(np.asarray(trace.var_dist_sq) / trace.rounds)
    for i, k in enumerate(np.asarray(trace.k)):
        bound = curve[int(k)]
        slack = 3.0 * se[i] + 1e-12 * (1.0 + bound)  # statistical + roundoff
        assert mean[i] <= bound + slack, (
            f"k={int(k)}: mean {mean[i]:.6e} above bound {bound:.6e} + {slack:.2e}")


def test_lemma_suite():
    """Envelope gap bounds, gradient ordering, contraction, squared-norm bound."""
    with _Report("lemma suite") as rep:
        slack = 1e-10
        rng = np.random.default_rng(777)

        # envelope below the value / above the optimum minus mu S*/2
        problem = sp.generate_interpolation_regression(m=8, n=4, seed=5)
        f_star = sp.evaluate_F(problem, problem.optimum_anchor)
        s_star = sp.mean_sq_subgradient(problem, problem.optimum_anchor)
        for _ in range(1000):
            x = rng.standard_normal(4) * 4.0
            mu = float(10.0 ** rng.uniform(-3, 1))
            env = sp.mean_envelope(problem, x, mu)
            value = sp.evaluate_F(problem, x)
            assert env <= value + slack * (1.0 + abs(value))
            assert f_star - env <= 0.5 * mu * s_star + slack * (1.0 + abs(env))

        # smoothed-gradient ordering under squared norms
        for _ in range(1000):
            n = int(rng.integers(2, 6))
            comps = [_random_component(rng, n, "least_squares")
                     for _ in range(int(rng.integers(1, 5)))]
            x = rng.standard_normal(n) * 3.0
            mu = float(10.0 ** rng.uniform(-3, 1))
            lhs = rhs = 0.0
            for comp in comps:
                L = float(comp.a @ comp.a)
                g = comp.grad(x)
                lhs += float(g @ g) / (1.0 + L * mu) ** 2
                ge = sp.moreau(comp, x, mu).envelope_grad
                rhs += float(ge @ ge)
            assert lhs <= rhs + slack * (1.0 + rhs) * len(comps)

        # curvature-weighted contraction of the prox map
        for _ in range(1000):
            n = int(rng.integers(2, 5))
            comp = _random_component(rng, n, "least_squares")
            mu = float(10.0 ** rng.uniform(-3, 1))
            x, y = rng.standard_normal(n) * 3.0, rng.standard_normal(n) * 3.0
            S = np.eye(n) + mu * np.outer(comp.a, comp.a)
            vals, vecs = np.linalg.eigh(S)
            S_half = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
            S_inv_half = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
            lhs = np.linalg.norm(S_half @ (sp.moreau(comp, x, mu).z
                                           - sp.moreau(comp, y, mu).z))
            rhs = np.linalg.norm(S_inv_half @ (x - y))
            assert lhs <= rhs + slack * (1.0 + rhs)

        # squared gradient-norm bound for smooth components
        for _ in range(1000):
            n = int(rng.integers(2, 6))
            comp = _random_component(rng, n, "least_squares")
            x = rng.standard_normal(n) * 3.0
            g = comp.grad(x)
            bound = 2.0 * float(comp.a @ comp.a) * comp.value(x)
            assert float(g @ g) <= bound + slack * (1.0 + bound)
        assert rep.elapsed < 30.0


def test_phi_alpha_and_bound_arithmetic():
    """Exact scalar identities plus agreement with the naive summation oracle."""
    with _Report("phi_alpha and bound arithmetic") as rep:
        assert sp.phi_alpha(0.0, math.e) == pytest.approx(1.0, abs=1e-15)
        assert sp.phi_alpha(1.0, 3.0) == 2.0
        assert sp.phi_alpha(-1.0, 2.0) == 0.5

        constants = sp.RegularityConstants(0.5, 0.5, None, 0.0)
        schedule = sp.PolynomialStep(1.0, 1.0)
        for k in (10, 100, 300):
            mus = [schedule.at(i) for i in range(k)]
            theta = [1.0 - mu * 0.5 for mu in mus]
            total = 1.0
            for j in range(k):
                total *= theta[j]
            for i in range(k):
                prod = 1.0
                for j in range(i + 1, k):
                    prod *= theta[j]
                total += 1.5 * prod * mus[i] ** 2
            assert sp.recurrence_bound(1.0, constants, schedule, k) == pytest.approx(
                total, abs=1e-12)

        # direct per-term evaluation at k = 10^4 (products taken term by term)
        k = 10_000
        mus = np.array([schedule.at(i) for i in range(k)])
        theta = 1.0 - 0.5 * mus
        direct = float(np.prod(theta)) + 1.5 * sum(
            float(np.prod(theta[i + 1:])) * mus[i] ** 2 for i in range(k))
        assert sp.recurrence_bound(1.0, constants, schedule, k) == pytest.approx(
            direct, abs=1e-12)
        print(f"  [info] arithmetic oracle agreement at k=10^4 ({rep.elapsed:.1f}s)")


def test_cli_determinism(tmp_path):
    """Identical config and seeds produce byte-identical CSV outputs."""
    with _Report("CLI determinism") as rep:
        doc = {
            "instance": {"family": "constrained_regression", "m": 6, "n": 5, "p": 10,
                         "seed": 3},
            "schedules": [
                {"kind": "polynomial", "mu0": 1.0, "gamma": 1.0},
                {"kind": "polynomial", "mu0": 1.0, "gamma": 0.5},
            ],
            "run": {"iterations": 60, "rounds": 2, "base_seed": 12},
            "reference": {"tol": 1e-6},
        }
        cfg = tmp_path / "config.yaml"
        cfg.write_text(yaml.safe_dump(doc))
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out_a)]) == 0
        assert cli.main(["run", "--config", str(cfg), "--out", str(out_b)]) == 0
        names = sorted(p.name for p in out_a.glob("*.csv"))
        assert names, "run produced no CSV outputs"
        for name in names + ["problem.json", "manifest.json"]:
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes(), (
                f"{name} differs between identical runs")
