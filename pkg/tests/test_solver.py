"""Stepsize schedules, the stochastic proximal loop, replication, and CSV traces."""

import numpy as np
import pytest

import stochprox as sp
from stochprox.errors import (
    EmptyInputError,
    InvalidSpecError,
    InvalidStepsizeError,
    SolverError,
    TraceSchemaError,
)
from stochprox.prox import HalfspaceIndicator, ScalarComposite
from stochprox.solver import TRACE_COLUMNS, read_trace_csv, write_trace_csv


class TestStepSchedules:
    def test_polynomial_shifted_index(self):
        assert sp.step_size(sp.PolynomialStep(1.0, 1.0), 0) == 1.0

    def test_polynomial_direct_arithmetic(self):
        # 1 / (3 + 1)**0.5 == 0.5
        assert sp.step_size(sp.PolynomialStep(1.0, 0.5), 3) == pytest.approx(0.5)

    def test_constant(self):
        for k in (0, 1, 17, 10_000):
            assert sp.step_size(sp.ConstantStep(0.1), k) == 0.1

    def test_polynomial_nonincreasing(self):
        sched = sp.PolynomialStep(2.0, 0.7)
        mus = [sp.step_size(sched, k) for k in range(200)]
        assert all(a >= b for a, b in zip(mus, mus[1:]))

    def test_validation(self):
        with pytest.raises(InvalidStepsizeError):
            sp.ConstantStep(0.0)
        with pytest.raises(InvalidStepsizeError):
            sp.PolynomialStep(1.0, 0.0)
        with pytest.raises(InvalidStepsizeError):
            sp.step_size(sp.ConstantStep(1.0), -1)


def two_orthogonal_halfspaces():
    comps = (HalfspaceIndicator([1.0, 0.0], 0.0), HalfspaceIndicator([0.0, 1.0], 0.0))
    return sp.StochasticProblem(comps, None, 2,
                                interior_point=np.array([-1.0, -1.0]),
                                interior_margin=1.0)


class TestSppRun:
    def test_single_halfspace_converges_in_one_step(self):
        prob = sp.generate_halfspace_cfp(n=3, count=1, seed=5)
        x0 = np.array([4.0, 4.0, 4.0])
        run = sp.spp_run(prob, x0, sp.PolynomialStep(1.0, 1.0), 10, seed=3,
                         metrics=sp.TraceMetrics())
        x1 = sp.project_halfspace(x0, prob.components[0].c, prob.components[0].d)
        assert np.allclose(run.final_x, x1)
        assert run.feasibility_residual[1] == pytest.approx(0.0, abs=1e-24)
        assert np.all(run.feasibility_residual[1:] == run.feasibility_residual[1])

    def test_shared_minimizer_is_fixed_point(self):
        prob = sp.generate_interpolation_regression(m=6, n=3, seed=1)
        z = prob.optimum_anchor
        run = sp.spp_run(prob, z, sp.ConstantStep(0.5), 50, seed=9)
        assert np.array_equal(run.final_x, z)

    def test_alternating_projections_match_hand_simulation(self):
        prob = two_orthogonal_halfspaces()
        x0 = np.array([1.0, 1.0])
        order = np.array([0, 1, 0, 1, 0, 1], dtype=np.intp)
        run = sp.spp_run(prob, x0, sp.ConstantStep(1.0), 6, seed=0,
                         index_sequence=order)
        x = x0.copy()
        for i in order:
            hs = prob.components[i]
            x = sp.project_halfspace(x, hs.c, hs.d)
        assert np.linalg.norm(run.final_x - x) <= 1e-12
        assert np.allclose(run.final_x, [0.0, 0.0])

    def test_fejer_monotone_toward_shared_minimizer(self, rng):
        prob = sp.generate_interpolation_regression(m=8, n=4, seed=3)
        z = prob.optimum_anchor
        x = rng.standard_normal(4) * 5.0
        sched = sp.PolynomialStep(1.0, 0.6)
        seq = prob.sample_indices(np.random.default_rng(44), 120)
        prev = np.linalg.norm(x - z)
        for k, i in enumerate(seq):
            x = prob.prox_update(int(i), x, sched.at(k))
            cur = np.linalg.norm(x - z)
            assert cur <= prev + 1e-12
            prev = cur

    def test_seeded_determinism(self):
        prob = sp.generate_constrained_regression(
            sp.InstanceSpec("constrained_regression", m=5, n=4, p=6, seed=2))
        args = (prob, np.zeros(4), sp.PolynomialStep(1.0, 0.5), 40)
        a = sp.spp_run(*args, seed=77, metrics=sp.TraceMetrics())
        b = sp.spp_run(*args, seed=77, metrics=sp.TraceMetrics())
        assert np.array_equal(a.final_x, b.final_x)
        assert np.array_equal(a.feasibility_residual, b.feasibility_residual)

    def test_sap_iterates_ignore_the_schedule(self):
        prob = sp.generate_halfspace_cfp(n=4, count=5, seed=8)
        x0 = prob.interior_point + 5.0
        runs = [sp.spp_run(prob, x0, sched, 40, seed=12)
                for sched in (sp.ConstantStep(3.0), sp.PolynomialStep(0.01, 1.0))]
        assert np.array_equal(runs[0].final_x, runs[1].final_x)

    def test_trace_shape_and_mu_column(self):
        prob = sp.generate_interpolation_regression(m=4, n=3, seed=0)
        sched = sp.PolynomialStep(2.0, 0.5)
        run = sp.spp_run(prob, np.zeros(3), sched, 25, seed=1)
        assert len(run.k) == 26  # includes k = 0
        assert run.k[0] == 0 and run.k[-1] == 25
        assert np.array_equal(run.mu, [sched.at(int(k)) for k in run.k])

    def test_metric_stride_keeps_endpoints(self):
        prob = sp.generate_interpolation_regression(m=4, n=3, seed=0)
        run = sp.spp_run(prob, np.zeros(3), sp.ConstantStep(1.0), 25, seed=1,
                         metrics=sp.TraceMetrics(stride=10))
        assert list(run.k) == [0, 10, 20, 25]

    def test_prox_failure_carries_iteration_index(self):
        bad = ScalarComposite(lambda t: -t ** 3, [1.0], 0.0)
        prob = sp.StochasticProblem((bad,), None, 1)
        with pytest.raises(SolverError, match="iteration 0"):
            sp.spp_run(prob, np.zeros(1), sp.ConstantStep(1.0), 3, seed=0)

    def test_input_validation(self):
        prob = sp.generate_interpolation_regression(m=3, n=2, seed=0)
        with pytest.raises(InvalidSpecError):
            sp.spp_run(prob, np.zeros(2), sp.ConstantStep(1.0), 0, seed=0)
        with pytest.raises(InvalidSpecError):
            sp.spp_run(prob, np.zeros(3), sp.ConstantStep(1.0), 5, seed=0)
        with pytest.raises(InvalidSpecError):
            sp.spp_run(prob, np.array([np.nan, 0.0]), sp.ConstantStep(1.0), 5, seed=0)


class TestReplicate:
    def test_single_round_equals_single_run(self):
        prob = sp.generate_interpolation_regression(m=5, n=3, seed=4)
        sched = sp.PolynomialStep(1.0, 1.0)
        metrics = sp.TraceMetrics()
        rep = sp.replicate(prob, np.zeros(3), sched, 30, rounds=1, base_seed=5,
                           metrics=metrics)
        single = sp.spp_run(prob, np.zeros(3), sched, 30, seed=5, metrics=metrics)
        assert np.array_equal(rep.mean_feasibility_residual,
                              single.feasibility_residual)
        assert np.all(np.isnan(rep.var_feasibility_residual))

    def test_mean_and_variance_match_manual_stack(self):
        prob = sp.generate_constrained_regression(
            sp.InstanceSpec("constrained_regression", m=4, n=3, p=5, seed=6))
        sched = sp.ConstantStep(0.5)
        rep = sp.replicate(prob, np.zeros(3), sched, 20, rounds=4, base_seed=100)
        stack = np.stack([
            sp.spp_run(prob, np.zeros(3), sched, 20, seed=100 + r).feasibility_residual
            for r in range(4)])
        assert np.allclose(rep.mean_feasibility_residual, stack.mean(axis=0))
        assert np.allclose(rep.var_feasibility_residual, stack.var(axis=0, ddof=1))

    def test_interpolation_mean_distance_nonincreasing(self):
        # Monte Carlo consequence of the constant-step contraction
        prob = sp.generate_interpolation_regression(m=10, n=4, seed=9)
        model = sp.PointOptimum(prob.optimum_anchor)
        rep = sp.replicate(prob, np.full(4, 3.0), sp.ConstantStep(1.0), 60,
                           rounds=60, base_seed=0,
                           metrics=sp.TraceMetrics(optimal_set=model))
        diffs = np.diff(rep.mean_dist_sq)
        assert np.all(diffs <= 1e-12)


class TestTraceCsv:
    def test_round_trip(self, tmp_path):
        prob = sp.generate_constrained_regression(
            sp.InstanceSpec("constrained_regression", m=3, n=3, p=4, seed=1))
        run = sp.spp_run(prob, np.zeros(3), sp.ConstantStep(1.0), 10, seed=2,
                         metrics=sp.TraceMetrics())
        path = tmp_path / "t.csv"
        write_trace_csv(path, run)
        cols = read_trace_csv(path)
        assert set(cols) == set(TRACE_COLUMNS)
        assert np.array_equal(cols["k"], run.k.astype(float))
        assert np.array_equal(cols["feasibility_residual"], run.feasibility_residual)
        assert np.all(cols["wall_time_ns"] == 0)  # deterministic export

    def test_measured_wall_time_optional(self, tmp_path):
        prob = sp.generate_interpolation_regression(m=3, n=2, seed=1)
        run = sp.spp_run(prob, np.zeros(2), sp.ConstantStep(1.0), 5, seed=2)
        path = tmp_path / "t.csv"
        write_trace_csv(path, run, deterministic_wall=False)
        cols = read_trace_csv(path)
        assert np.all(np.diff(cols["wall_time_ns"]) >= 0)

    def test_schema_mismatch_names_column(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("k,mu_k,dist_sq,envelope_residual,feasibility,wall_time_ns\n")
        with pytest.raises(TraceSchemaError, match="feasibility"):
            read_trace_csv(path)

    def test_empty_file_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        with pytest.raises(EmptyInputError):
            read_trace_csv(path)
        path.write_text(",".join(TRACE_COLUMNS) + "\n")
        with pytest.raises(EmptyInputError):
            read_trace_csv(path)
