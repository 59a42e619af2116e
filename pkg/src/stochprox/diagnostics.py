"""Metrics recorded along runs: optimal-set distance, envelope residual, rate slopes."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

from .errors import UncertifiedModelError, UndefinedSlopeError
from .geometry import distance_to_intersection
from .problems import ReferenceSolution, StochasticProblem, mean_envelope
from .prox import HalfspaceIndicator, LeastSquares, subgradient


@dataclass(frozen=True)
class PointOptimum:
    """Certified singleton optimal set ``{x_ref}``."""

    x_ref: np.ndarray
    note: str = ""

    def __post_init__(self):
        object.__setattr__(self, "x_ref", np.asarray(self.x_ref, dtype=np.float64))


@dataclass(frozen=True)
class AffineOptimum:
    """Optimal set ``{x : A x = rhs}`` (consistency checked on construction)."""

    A: np.ndarray
    rhs: np.ndarray
    note: str = ""

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=np.float64))
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=np.float64))
        if A.shape[0] != rhs.shape[0]:
            raise UncertifiedModelError("affine system row counts disagree")
        sol, *_ = np.linalg.lstsq(A, rhs, rcond=None)
        if np.linalg.norm(A @ sol - rhs) > 1e-8 * (1.0 + np.linalg.norm(rhs)):
            raise UncertifiedModelError("affine system is inconsistent; no optimal set")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "rhs", rhs)


@dataclass(frozen=True)
class IntersectionOptimum:
    """Optimal set given as a nonempty intersection of halfspaces."""

    halfspaces: tuple
    anchor: np.ndarray
    note: str = ""

    def __post_init__(self):
        hs = tuple(self.halfspaces)
        if not hs:
            raise UncertifiedModelError("intersection model needs at least one halfspace")
        anchor = np.asarray(self.anchor, dtype=np.float64)
        worst = max(h.distance(anchor) for h in hs)
        if worst > 1e-8:
            raise UncertifiedModelError(
                f"anchor violates the recorded intersection by {worst:g}")
        object.__setattr__(self, "halfspaces", hs)
        object.__setattr__(self, "anchor", anchor)


OptimalSetModel = Union[PointOptimum, AffineOptimum, IntersectionOptimum]


def point_model_from_reference(ref: ReferenceSolution) -> PointOptimum:
    """Point model from a reference solution; requires the uniqueness certificate."""
    if not ref.unique_minimizer:
        raise UncertifiedModelError(
            "reference solution does not certify a unique minimizer")
    return PointOptimum(ref.x_ref, note=ref.note)


def affine_model_from_problem(problem: StochasticProblem) -> AffineOptimum:
    """Affine optimal set of an interpolation least-squares stack."""
    rows = [c for c in problem.components if isinstance(c, LeastSquares)]
    if len(rows) != len(problem.components):
        raise UncertifiedModelError(
            "affine model requires a pure least-squares problem")
    A = np.array([c.a for c in rows])
    rhs = np.array([c.b for c in rows])
    return AffineOptimum(A, rhs, note="interpolation least-squares rows")


def intersection_model_from_problem(problem: StochasticProblem) -> IntersectionOptimum:
    """Feasible-set model of an indicator-only problem with recorded anchor."""
    if problem.loss_indices.size:
        raise UncertifiedModelError("intersection model requires an indicator-only problem")
    if problem.interior_point is None:
        raise UncertifiedModelError("problem records no feasible anchor")
    return IntersectionOptimum(problem.halfspaces, problem.interior_point)


def dist_to_optimal(model: OptimalSetModel, x, tol: float = 1e-10) -> float:
    """Euclidean distance from ``x`` to the modeled optimal set."""
    x = np.asarray(x, dtype=np.float64)
    if isinstance(model, PointOptimum):
        return float(np.linalg.norm(x - model.x_ref))
    if isinstance(model, AffineOptimum):
        delta, *_ = np.linalg.lstsq(model.A, model.A @ x - model.rhs, rcond=None)
        return float(np.linalg.norm(delta))
    if isinstance(model, IntersectionOptimum):
        return distance_to_intersection(model.halfspaces, x, tol=tol)
    raise UncertifiedModelError(f"unknown optimal-set model {type(model).__name__}")


def envelope_residual(problem: StochasticProblem, x, mu: float, f_star: float) -> float:
    """``|E[F_mu(x; xi)] - F*|`` with the problem's weights."""
    return abs(mean_envelope(problem, x, mu) - float(f_star))


def mean_sq_subgradient(problem: StochasticProblem, x) -> float:
    """``E[||g(x; xi)||^2]`` under the problem weights (subgradient selection).

    Feeds the noise constant ``S*`` when evaluated at a reference optimum;
    indicator components contribute zero there (interior selection).
    """
    x = np.asarray(x, dtype=np.float64)
    total = 0.0
    for w, comp in zip(problem.weights, problem.components):
        if isinstance(comp, HalfspaceIndicator):
            continue  # zero selection at feasible points
        g = subgradient(comp, x)
        total += w * float(g @ g)
    return total


def fit_loglog_slope(ks, values) -> float:
    """Ordinary least-squares slope of ``log(values)`` against ``log(ks)``."""
    ks = np.asarray(ks, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if np.any(values <= 0.0) or not np.all(np.isfinite(values)):
        raise UndefinedSlopeError("metric values must be positive and finite in the fit window")
    return float(np.polyfit(np.log(ks), np.log(values), 1)[0])


def fit_rate_slope(trace, tail_fraction: float, metric: str = "dist_sq",
                   min_points: int = 50) -> float:
    """Log-log slope of a trace metric over the last ``tail_fraction`` of iterations.

    Accepts single-run or averaged traces; ``metric`` is one of ``dist_sq``,
    ``envelope_residual``, ``feasibility_residual``.
    """
    if not (0.0 < tail_fraction <= 1.0):
        raise UndefinedSlopeError(f"tail_fraction must lie in (0, 1], got {tail_fraction}")
    ks = np.asarray(trace.k, dtype=np.float64)
    values = None
    for name in (metric, f"mean_{metric}"):
        if hasattr(trace, name):
            values = np.asarray(getattr(trace, name), dtype=np.float64)
            break
    if values is None:
        raise UndefinedSlopeError(f"trace has no metric named {metric!r}")
    k_max = ks[-1]
    cut = max(k_max * (1.0 - tail_fraction), 1.0)
    sel = ks >= cut
    if int(sel.sum()) < min_points:
        raise UndefinedSlopeError(
            f"need at least {min_points} tail points, have {int(sel.sum())}")
    return fit_loglog_slope(ks[sel], values[sel])
