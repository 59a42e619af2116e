"""Randomized invariant suites behind the ``verify`` command.

Each check draws a fixed-seed sample, measures the worst violation of one
mathematical property, and passes when that violation stays below a small
relative slack.  The suites mirror what the test suite asserts, packaged so
a deployment can re-run them from the CLI and emit a machine-readable report.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .diagnostics import mean_sq_subgradient
from .problems import (
    StochasticProblem,
    evaluate_F,
    generate_halfspace_cfp,
    generate_interpolation_regression,
    mean_envelope,
)
from .prox import (
    HalfspaceIndicator,
    HingeReg,
    LeastSquares,
    ScalarComposite,
    component_value,
    moreau,
    numeric_prox,
)
from .regularity import RegularityConstants, recurrence_bound_curve
from .solver import ConstantStep, PolynomialStep, spp_run

RELATIVE_SLACK = 1e-10


@dataclass(frozen=True)
class CheckResult:
    name: str
    samples: int
    worst_violation: float
    passed: bool
    detail: str = ""

    def as_dict(self):
        doc = asdict(self)
        doc["worst_violation"] = float(doc["worst_violation"])
        doc["passed"] = bool(doc["passed"])
        return doc


def _rand_component(rng, n, kind):
    a = rng.standard_normal(n)
    while np.linalg.norm(a) < 0.3:
        a = rng.standard_normal(n)
    b = float(rng.standard_normal())
    if kind == "least_squares":
        return LeastSquares(a, b)
    if kind == "hinge":
        return HingeReg(a, b, float(abs(rng.standard_normal())))
    if kind == "halfspace":
        return HalfspaceIndicator(a, b)
    return ScalarComposite(lambda t: abs(t) ** 1.5, a, b)


def _rand_mu(rng) -> float:
    return float(10.0 ** rng.uniform(-3.0, 1.5))


def check_nonexpansiveness(trials: int = 1000, seed: int = 101) -> CheckResult:
    """``||prox(x) - prox(y)|| <= ||x - y||`` for every kind."""
    rng = np.random.default_rng(seed)
    kinds = ("least_squares", "hinge", "halfspace", "composite")
    worst = -math.inf
    for i in range(trials):
        n = int(rng.integers(2, 8))
        comp = _rand_component(rng, n, kinds[i % len(kinds)])
        mu = _rand_mu(rng)
        x, y = rng.standard_normal(n) * 3.0, rng.standard_normal(n) * 3.0
        zx, zy = moreau(comp, x, mu).z, moreau(comp, y, mu).z
        gap = np.linalg.norm(zx - zy) - np.linalg.norm(x - y)
        worst = max(worst, gap / (1.0 + np.linalg.norm(x - y)))
    return CheckResult("prox_nonexpansive", trials, worst, worst <= RELATIVE_SLACK)


def check_oracle_equivalence(trials: int = 1000, seed: int = 202,
                             tol: float = 1e-8) -> CheckResult:
    """Closed-form prox points match the bisection oracle for every closed form."""
    rng = np.random.default_rng(seed)
    kinds = ("least_squares", "hinge", "halfspace")
    worst = -math.inf
    for i in range(trials):
        n = int(rng.integers(2, 8))
        comp = _rand_component(rng, n, kinds[i % len(kinds)])
        mu = _rand_mu(rng)
        x = rng.standard_normal(n) * 3.0
        closed = moreau(comp, x, mu).z
        numeric = numeric_prox(comp, x, mu).z
        worst = max(worst, float(np.linalg.norm(closed - numeric)))
    return CheckResult("prox_oracle_equivalence", trials, worst - tol, worst <= tol,
                       detail=f"worst gap {worst:.3e}, tolerance {tol:g}")


def check_envelope_grad_lipschitz(trials: int = 1000, seed: int = 303) -> CheckResult:
    """``||grad F_mu(x) - grad F_mu(y)|| <= ||x - y|| / mu``."""
    rng = np.random.default_rng(seed)
    kinds = ("least_squares", "hinge", "halfspace", "composite")
    worst = -math.inf
    for i in range(trials):
        n = int(rng.integers(2, 8))
        comp = _rand_component(rng, n, kinds[i % len(kinds)])
        mu = _rand_mu(rng)
        x, y = rng.standard_normal(n) * 3.0, rng.standard_normal(n) * 3.0
        gx, gy = moreau(comp, x, mu).envelope_grad, moreau(comp, y, mu).envelope_grad
        lhs = np.linalg.norm(gx - gy)
        rhs = np.linalg.norm(x - y) / mu
        worst = max(worst, (lhs - rhs) / (1.0 + rhs))
    return CheckResult("envelope_grad_lipschitz", trials, worst, worst <= RELATIVE_SLACK)


def check_envelope_lower_bound(trials: int = 1000, seed: int = 404) -> CheckResult:
    """``F_mu(x) <= F(x)`` wherever the component value is finite."""
    rng = np.random.default_rng(seed)
    kinds = ("least_squares", "hinge", "composite")
    worst = -math.inf
    for i in range(trials):
        n = int(rng.integers(2, 8))
        comp = _rand_component(rng, n, kinds[i % len(kinds)])
        mu = _rand_mu(rng)
        x = rng.standard_normal(n) * 3.0
        value = component_value(comp, x)
        env = moreau(comp, x, mu).envelope_value
        worst = max(worst, (env - value) / (1.0 + abs(value)))
    return CheckResult("envelope_below_value", trials, worst, worst <= RELATIVE_SLACK)


def check_gradient_norm_bound(trials: int = 1000, seed: int = 505) -> CheckResult:
    """Squared-norm bound for smooth components: ``||grad f||^2 <= 2 L (f - f*)``."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 8))
        comp = _rand_component(rng, n, "least_squares")
        x = rng.standard_normal(n) * 3.0
        L = float(comp.a @ comp.a)
        g = comp.grad(x)
        lhs = float(g @ g)
        rhs = 2.0 * L * comp.value(x)  # single-row minimum value is 0
        worst = max(worst, (lhs - rhs) / (1.0 + abs(rhs)))
    return CheckResult("grad_norm_squared_bound", trials, worst, worst <= RELATIVE_SLACK)


def check_gradient_ordering(trials: int = 1000, seed: int = 606) -> CheckResult:
    """``E[||grad f||^2 / (1 + L mu)^2] <= E[||grad f_mu||^2]`` on smooth stacks."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        comps = [_rand_component(rng, n, "least_squares")
                 for _ in range(int(rng.integers(1, 6)))]
        mu = _rand_mu(rng)
        x = rng.standard_normal(n) * 3.0
        lhs = rhs = 0.0
        for comp in comps:
            L = float(comp.a @ comp.a)
            g = comp.grad(x)
            lhs += float(g @ g) / (1.0 + L * mu) ** 2
            ge = moreau(comp, x, mu).envelope_grad
            rhs += float(ge @ ge)
        lhs /= len(comps)
        rhs /= len(comps)
        worst = max(worst, (lhs - rhs) / (1.0 + abs(rhs)))
    return CheckResult("smoothed_gradient_ordering", trials, worst, worst <= RELATIVE_SLACK)


def check_curvature_contraction(trials: int = 1000, seed: int = 707) -> CheckResult:
    """``||S^{1/2}(z(x)-z(y))|| <= ||S^{-1/2}(x-y)||`` with ``S = I + mu a a^T``."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for _ in range(trials):
        n = int(rng.integers(2, 6))
        comp = _rand_component(rng, n, "least_squares")
        mu = _rand_mu(rng)
        x, y = rng.standard_normal(n) * 3.0, rng.standard_normal(n) * 3.0
        S = np.eye(n) + mu * np.outer(comp.a, comp.a)
        vals, vecs = np.linalg.eigh(S)
        S_half = vecs @ np.diag(np.sqrt(vals)) @ vecs.T
        S_inv_half = vecs @ np.diag(1.0 / np.sqrt(vals)) @ vecs.T
        zx, zy = moreau(comp, x, mu).z, moreau(comp, y, mu).z
        lhs = np.linalg.norm(S_half @ (zx - zy))
        rhs = np.linalg.norm(S_inv_half @ (x - y))
        worst = max(worst, (lhs - rhs) / (1.0 + rhs))
    return CheckResult("curvature_contraction", trials, worst, worst <= RELATIVE_SLACK)


def check_envelope_gap_bounds(trials: int = 200, seed: int = 808) -> CheckResult:
    """Instances with a zero-mean optimal subgradient satisfy the two gap bounds.

    On interpolation stacks ``F* - F_mu(x) <= mu S* / 2`` and
    ``F_mu(x) <= F(x)`` for every sampled point and smoothing parameter.
    """
    rng = np.random.default_rng(seed)
    worst = -math.inf
    samples = 0
    for trial in range(trials // 10):
        problem = generate_interpolation_regression(m=8, n=4, seed=1000 + trial)
        x_star = problem.optimum_anchor
        f_star = evaluate_F(problem, x_star)
        s_star = mean_sq_subgradient(problem, x_star)
        for _ in range(10):
            samples += 1
            x = rng.standard_normal(problem.dimension) * 4.0
            mu = _rand_mu(rng)
            env = mean_envelope(problem, x, mu)
            upper = (env - evaluate_F(problem, x)) / (1.0 + abs(env))
            lower = (f_star - env - 0.5 * mu * s_star) / (1.0 + abs(env))
            worst = max(worst, upper, lower)
    return CheckResult("envelope_gap_bounds", samples, worst, worst <= RELATIVE_SLACK)


def check_recurrence_vs_direct(seed: int = 909) -> CheckResult:
    """Recursion values match direct evaluation of the product/sum formula."""
    rng = np.random.default_rng(seed)
    worst = -math.inf
    cases = 0
    for _ in range(25):
        gamma = float(rng.uniform(0.3, 1.0))
        mu0 = float(rng.uniform(0.1, 1.0))
        sigma = float(rng.uniform(0.05, 0.9)) / mu0
        constants = RegularityConstants(sigma, float(rng.uniform(0.0, 0.5)), None,
                                        float(rng.uniform(0.0, 0.5)))
        schedule = PolynomialStep(mu0, gamma)
        k = int(rng.integers(5, 120))
        curve = recurrence_bound_curve(1.0, constants, schedule, k)
        mus = np.array([schedule.at(i) for i in range(k)])
        theta = 1.0 - mus * sigma
        noise = constants.S_star_F + 2.0 * constants.beta
        direct = float(np.prod(theta)) + noise * sum(
            float(np.prod(theta[i + 1:])) * mus[i] ** 2 for i in range(k))
        worst = max(worst, abs(curve[-1] - direct) / (1.0 + abs(direct)))
        cases += 1
    return CheckResult("recurrence_vs_direct_sum", cases, worst - 1e-12, worst <= 1e-12)


def check_sap_projection_equivalence(seed: int = 111) -> CheckResult:
    """On indicator-only problems the iterates are plain projections for any stepsize."""
    problem = generate_halfspace_cfp(n=4, count=5, seed=17)
    x0 = problem.interior_point + 3.0
    run_a = spp_run(problem, x0, ConstantStep(1.0), 60, seed)
    run_b = spp_run(problem, x0, PolynomialStep(0.05, 0.7), 60, seed)
    gap = float(np.linalg.norm(run_a.final_x - run_b.final_x))
    return CheckResult("sap_schedule_free", 60, gap, gap == 0.0)


def check_fejer_monotonicity(seed: int = 222) -> CheckResult:
    """Pathwise distance to a shared minimizer never increases."""
    problem = generate_interpolation_regression(m=10, n=4, seed=23)
    z = problem.optimum_anchor
    rng = np.random.default_rng(seed)
    worst = -math.inf
    for r in range(20):
        x = rng.standard_normal(4) * 5.0
        prev = float(np.linalg.norm(x - z))
        run = spp_run(problem, x, PolynomialStep(1.0, 0.5), 80, seed=seed + r)
        # replay the path by stepping again with the recorded seed
        rng_r = np.random.default_rng(seed + r)
        idx = problem.sample_indices(rng_r, 80)
        xi = x.copy()
        for k in range(80):
            xi = problem.prox_update(int(idx[k]), xi, PolynomialStep(1.0, 0.5).at(k))
            cur = float(np.linalg.norm(xi - z))
            worst = max(worst, (cur - prev) / (1.0 + prev))
            prev = cur
        assert np.allclose(xi, run.final_x)
    return CheckResult("fejer_monotone_interpolation", 20 * 80, worst,
                       worst <= RELATIVE_SLACK)


SUITES = {
    "prox": (check_nonexpansiveness, check_oracle_equivalence,
             check_envelope_grad_lipschitz, check_envelope_lower_bound),
    "lemmas": (check_envelope_gap_bounds, check_gradient_ordering,
               check_gradient_norm_bound, check_curvature_contraction),
    "solver": (check_sap_projection_equivalence, check_fejer_monotonicity),
    "regularity": (check_recurrence_vs_direct,),
}
SUITES["all"] = tuple(fn for suite in ("prox", "lemmas", "solver", "regularity")
                      for fn in SUITES[suite])


def run_suite(name: str) -> dict:
    """Run one suite and return the machine-readable report dict."""
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    results = [fn() for fn in SUITES[name]]
    return {
        "suite": name,
        "passed": all(r.passed for r in results),
        "checks": [r.as_dict() for r in results],
    }
