"""Finite-sum problem assembly, random instance generators, and a reference solver.

A :class:`StochasticProblem` is an ordered family of components together with
a sampling distribution; the objective is the weighted average of the
component values.  Generators draw standard-normal data with splittable
PCG64 streams (one stream per component index), so changing one of the
counts ``m``/``p`` never reshuffles the draws of the remaining components.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import (
    InfeasibleProblemError,
    InvalidSpecError,
    MaxIterationsError,
    SerializationError,
    UnsupportedComponentError,
)
from .prox import (
    Component,
    HalfspaceIndicator,
    HingeReg,
    LeastSquares,
    ScalarComposite,
    moreau,
)

PROBLEM_SCHEMA = "stochprox-problem-v1"

# Stream domains for the splittable generator keys.
_STREAM_ANCHOR = 0
_STREAM_SMOOTH = 1
_STREAM_CONSTRAINT = 2


def _stream(seed: int, domain: int, index: int = 0) -> np.random.Generator:
    """Independent PCG64 stream keyed by (seed, domain, index)."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(domain, index)))


@dataclass(frozen=True)
class StochasticProblem:
    """Immutable finite family of components plus sampling weights."""

    components: tuple
    weights: np.ndarray
    dimension: int
    interior_point: Optional[np.ndarray] = None
    interior_margin: Optional[float] = None
    optimum_anchor: Optional[np.ndarray] = None

    def __post_init__(self):
        comps = tuple(self.components)
        if not comps:
            raise InvalidSpecError("a problem needs at least one component")
        object.__setattr__(self, "components", comps)
        n = int(self.dimension)
        for comp in comps:
            if comp.dimension != n:
                raise InvalidSpecError(
                    f"component dimension {comp.dimension} does not match problem dimension {n}")
        object.__setattr__(self, "dimension", n)
        if self.weights is None:
            w = np.full(len(comps), 1.0 / len(comps))
        else:
            w = np.asarray(self.weights, dtype=np.float64)
        if w.shape != (len(comps),):
            raise InvalidSpecError("weights length must match the number of components")
        if np.any(w < 0.0):
            raise InvalidSpecError("weights must be nonnegative")
        if abs(float(w.sum()) - 1.0) > 1e-12:
            raise InvalidSpecError(f"weights must sum to 1, got {w.sum()!r}")
        object.__setattr__(self, "weights", w)
        if self.interior_point is not None:
            object.__setattr__(self, "interior_point",
                               np.asarray(self.interior_point, dtype=np.float64))
        if self.optimum_anchor is not None:
            object.__setattr__(self, "optimum_anchor",
                               np.asarray(self.optimum_anchor, dtype=np.float64))

    def __len__(self) -> int:
        return len(self.components)

    @cached_property
    def indicator_indices(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.components)
                         if isinstance(c, HalfspaceIndicator)], dtype=np.intp)

    @cached_property
    def loss_indices(self) -> np.ndarray:
        return np.array([i for i, c in enumerate(self.components)
                         if not isinstance(c, HalfspaceIndicator)], dtype=np.intp)

    @property
    def halfspaces(self) -> tuple:
        return tuple(self.components[i] for i in self.indicator_indices)

    @cached_property
    def _arrays(self):
        """Stacked per-kind arrays backing the vectorized evaluation paths."""
        ls_idx, hs_idx, other_idx = [], [], []
        for i, comp in enumerate(self.components):
            if isinstance(comp, LeastSquares):
                ls_idx.append(i)
            elif isinstance(comp, HalfspaceIndicator):
                hs_idx.append(i)
            else:
                other_idx.append(i)
        w = self.weights
        ls_rows = np.array([self.components[i].a for i in ls_idx], dtype=np.float64)
        ls_rhs = np.array([self.components[i].b for i in ls_idx], dtype=np.float64)
        hs_rows = np.array([self.components[i].c for i in hs_idx], dtype=np.float64)
        hs_rhs = np.array([self.components[i].d for i in hs_idx], dtype=np.float64)
        return {
            "ls_idx": np.array(ls_idx, dtype=np.intp),
            "ls_rows": ls_rows.reshape(len(ls_idx), self.dimension),
            "ls_rhs": ls_rhs,
            "ls_w": w[ls_idx] if ls_idx else np.zeros(0),
            "ls_sq": np.einsum("ij,ij->i", ls_rows, ls_rows) if ls_idx else np.zeros(0),
            "hs_idx": np.array(hs_idx, dtype=np.intp),
            "hs_rows": hs_rows.reshape(len(hs_idx), self.dimension),
            "hs_rhs": hs_rhs,
            "hs_w": w[hs_idx] if hs_idx else np.zeros(0),
            "hs_sq": np.einsum("ij,ij->i", hs_rows, hs_rows) if hs_idx else np.zeros(0),
            "other_idx": np.array(other_idx, dtype=np.intp),
        }

    def sample_indices(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw component indices according to the problem weights."""
        return rng.choice(len(self.components), size=size, p=self.weights)

    def prox_update(self, index: int, x: np.ndarray, mu: float) -> np.ndarray:
        """One stochastic proximal step: the prox of component ``index`` at ``x``.

        Fast inline paths for the two generated kinds; other kinds go through
        the generic dispatch.
        """
        comp = self.components[index]
        if isinstance(comp, LeastSquares):
            r = float(comp.a @ x) - comp.b
            return x - (mu * r / (1.0 + mu * float(comp.a @ comp.a))) * comp.a
        if isinstance(comp, HalfspaceIndicator):
            viol = float(comp.c @ x) - comp.d
            if viol <= 0.0:
                return x
            return x - (viol / float(comp.c @ comp.c)) * comp.c
        return moreau(comp, x, mu).z


def evaluate_F(problem: StochasticProblem, x) -> float:
    """Weighted value of the loss (non-indicator) components at ``x``."""
    x = np.asarray(x, dtype=np.float64)
    arr = problem._arrays
    total = 0.0
    if arr["ls_idx"].size:
        r = arr["ls_rows"] @ x - arr["ls_rhs"]
        total += 0.5 * float(arr["ls_w"] @ (r * r))
    for i in arr["other_idx"]:
        total += problem.weights[i] * problem.components[i].value(x)
    return total


def evaluate_feasibility(problem: StochasticProblem, x) -> float:
    """Mean squared set distance over the indicator components (renormalized)."""
    x = np.asarray(x, dtype=np.float64)
    arr = problem._arrays
    if not arr["hs_idx"].size:
        return 0.0
    w = arr["hs_w"]
    w_total = float(w.sum())
    if w_total <= 0.0:
        return 0.0
    viol = np.maximum(arr["hs_rows"] @ x - arr["hs_rhs"], 0.0)
    dist_sq = viol * viol / arr["hs_sq"]
    return float(w @ dist_sq) / w_total


def mean_envelope(problem: StochasticProblem, x, mu: float) -> float:
    """Weighted Moreau envelope value ``sum_i w_i F_mu(x; i)``."""
    x = np.asarray(x, dtype=np.float64)
    mu = float(mu)
    arr = problem._arrays
    total = 0.0
    if arr["ls_idx"].size:
        r = arr["ls_rows"] @ x - arr["ls_rhs"]
        total += 0.5 * float(arr["ls_w"] @ (r * r / (1.0 + mu * arr["ls_sq"])))
    if arr["hs_idx"].size:
        viol = np.maximum(arr["hs_rows"] @ x - arr["hs_rhs"], 0.0)
        total += float(arr["hs_w"] @ (viol * viol / arr["hs_sq"])) / (2.0 * mu)
    for i in arr["other_idx"]:
        total += problem.weights[i] * moreau(problem.components[i], x, mu).envelope_value
    return total


# ---------------------------------------------------------------------------
# instance generators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceSpec:
    """Counts, seed, and family tag describing one random instance."""

    family: str
    m: int = 0
    n: int = 1
    p: int = 0
    seed: int = 0

    _FAMILIES = ("constrained_regression", "halfspace_cfp", "interpolation_regression")

    def __post_init__(self):
        if self.family not in self._FAMILIES:
            raise InvalidSpecError(
                f"unknown family {self.family!r}; expected one of {self._FAMILIES}")
        for name in ("m", "n", "p"):
            if int(getattr(self, name)) < 0:
                raise InvalidSpecError(f"count {name} must be >= 0")
        if self.m + self.p == 0:
            raise InvalidSpecError("instance needs at least one component")


def _normal_row(rng: np.random.Generator, n: int) -> np.ndarray:
    row = rng.standard_normal(n)
    # A zero draw has probability zero; regenerate defensively anyway.
    while not np.any(row):
        row = rng.standard_normal(n)
    return row


def generate_constrained_regression(spec: InstanceSpec) -> StochasticProblem:
    """Random least-squares rows plus halfspaces with a guaranteed common point.

    Rows and targets are i.i.d. standard normal.  Each halfspace offset is
    ``c @ anchor + |u|`` for an anchor drawn once, which keeps the feasible
    set nonempty (the anchor is recorded on the problem).
    """
    if spec.family != "constrained_regression":
        raise InvalidSpecError(f"spec family {spec.family!r} is not constrained_regression")
    if spec.m < 1 or spec.n < 1:
        raise InvalidSpecError("constrained_regression needs m >= 1 and n >= 1")
    n = spec.n
    anchor = _stream(spec.seed, _STREAM_ANCHOR).standard_normal(n)
    comps: list[Component] = []
    for i in range(spec.m):
        rng = _stream(spec.seed, _STREAM_SMOOTH, i)
        comps.append(LeastSquares(_normal_row(rng, n), float(rng.standard_normal())))
    for j in range(spec.p):
        rng = _stream(spec.seed, _STREAM_CONSTRAINT, j)
        c = _normal_row(rng, n)
        u = abs(float(rng.standard_normal()))
        comps.append(HalfspaceIndicator(c, float(c @ anchor) + u))
    return StochasticProblem(tuple(comps), None, n,
                             interior_point=anchor if spec.p else None,
                             interior_margin=0.0 if spec.p else None)


def generate_halfspace_cfp(n: int, count: int, seed: int,
                           margin: float = 0.1) -> StochasticProblem:
    """Pure feasibility instance: halfspaces sharing a strictly interior point.

    The anchor is drawn first; each offset is ``c @ anchor + margin ||c|| + |u|``
    so the anchor keeps Euclidean distance at least ``margin`` from every
    boundary.
    """
    if count < 1:
        raise InvalidSpecError("halfspace_cfp needs count >= 1")
    if n < 1:
        raise InvalidSpecError("halfspace_cfp needs n >= 1")
    if margin < 0.0:
        raise InvalidSpecError("margin must be >= 0")
    anchor = _stream(seed, _STREAM_ANCHOR).standard_normal(n)
    comps = []
    for j in range(count):
        rng = _stream(seed, _STREAM_CONSTRAINT, j)
        c = _normal_row(rng, n)
        u = abs(float(rng.standard_normal()))
        d = float(c @ anchor) + margin * float(np.linalg.norm(c)) + u
        comps.append(HalfspaceIndicator(c, d))
    return StochasticProblem(tuple(comps), None, n,
                             interior_point=anchor, interior_margin=margin)


def generate_interpolation_regression(m: int, n: int, seed: int) -> StochasticProblem:
    """Consistent least-squares system: every component vanishes at a shared point."""
    if m < 1 or n < 1:
        raise InvalidSpecError("interpolation_regression needs m >= 1 and n >= 1")
    z_star = _stream(seed, _STREAM_ANCHOR).standard_normal(n)
    comps = []
    for i in range(m):
        rng = _stream(seed, _STREAM_SMOOTH, i)
        a = _normal_row(rng, n)
        comps.append(LeastSquares(a, float(a @ z_star)))
    return StochasticProblem(tuple(comps), None, n, optimum_anchor=z_star)


def generate_instance(spec: InstanceSpec) -> StochasticProblem:
    """Dispatch a spec to its family generator."""
    if spec.family == "constrained_regression":
        return generate_constrained_regression(spec)
    if spec.family == "halfspace_cfp":
        return generate_halfspace_cfp(spec.n, spec.p if spec.p else spec.m, spec.seed)
    return generate_interpolation_regression(spec.m, spec.n, spec.seed)


# ---------------------------------------------------------------------------
# reference solver
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReferenceSolution:
    """Deterministic full-information solution with certified residuals."""

    x_ref: np.ndarray
    F_star: float
    kkt_residual: float
    feasibility_violation: float
    unique_minimizer: bool
    note: str = ""


def _quadratic_data(problem: StochasticProblem):
    arr = problem._arrays
    if arr["other_idx"].size:
        kinds = {type(problem.components[i]).__name__ for i in arr["other_idx"]}
        raise UnsupportedComponentError(
            f"reference_solve supports least-squares and halfspace components only, got {kinds}")
    T, y, w = arr["ls_rows"], arr["ls_rhs"], arr["ls_w"]
    C, d = arr["hs_rows"], arr["hs_rhs"]
    return T, y, w, C, d


def reference_solve(problem: StochasticProblem, tol: float = 1e-6,
                    max_iter: int = 200_000) -> ReferenceSolution:
    """Solve the full-information problem to KKT residual ``tol``.

    Quadratic objectives with halfspace constraints are solved by ADMM on the
    slack reformulation (one Cholesky factorization, linear per-iteration
    cost); unconstrained stacks reduce to a least-squares solve and pure
    feasibility problems to cyclic projections.  Deterministic given the
    problem.
    """
    if tol <= 0.0:
        raise InvalidSpecError("reference tolerance must be positive")
    T, y, w, C, d = _quadratic_data(problem)
    n = problem.dimension

    if T.shape[0] == 0 and C.shape[0] == 0:
        raise InvalidSpecError("problem has neither loss components nor constraints")

    if T.shape[0] == 0:
        # Pure feasibility: any point of the intersection is optimal.
        from .geometry import dykstra_project
        x = dykstra_project(problem.halfspaces, np.zeros(n), tol=min(tol, 1e-10) / 10.0)
        feas = max(hs.distance(x) for hs in problem.halfspaces)
        return ReferenceSolution(x, 0.0, 0.0, feas, unique_minimizer=False,
                                 note="feasibility problem; minimizer not unique")

    sw = np.sqrt(w)
    Tw = T * sw[:, None]
    unique = bool(np.linalg.matrix_rank(Tw) == n)

    if C.shape[0] == 0:
        x, *_ = np.linalg.lstsq(Tw, sw * y, rcond=None)
        grad = T.T @ (w * (T @ x - y))
        return ReferenceSolution(x, evaluate_F(problem, x), float(np.linalg.norm(grad)),
                                 0.0, unique_minimizer=unique,
                                 note="unconstrained least squares")

    x, lam, kkt, feas, iters = _admm_qp(T, y, w, C, d, tol, max_iter)
    note = f"ADMM, {iters} iterations"
    return ReferenceSolution(x, evaluate_F(problem, x), kkt, feas,
                             unique_minimizer=unique, note=note)


def _admm_qp(T, y, w, C, d, tol, max_iter):
    """ADMM for ``min 0.5 ||T x - y||_w^2  s.t.  C x <= d``."""
    n = T.shape[1]
    P = T.T @ (T * w[:, None])
    h = T.T @ (w * y)
    rho = 1.0
    factor = cho_factor(P + rho * (C.T @ C) + 1e-14 * np.eye(n))
    x = np.zeros(n)
    s = np.minimum(C @ x, d)
    u = np.zeros(C.shape[0])
    best_feas = np.inf
    last_check_feas = np.inf
    for it in range(1, max_iter + 1):
        x = cho_solve(factor, h + rho * (C.T @ (s - u)))
        v = C @ x
        s = np.minimum(v + u, d)
        u = u + v - s
        if it % 25 == 0 or it == max_iter:
            lam = rho * u
            grad_res = float(np.linalg.norm(P @ x - h + C.T @ lam))
            slack = v - d
            feas = float(max(0.0, slack.max(initial=0.0)))
            compl = float(np.max(np.abs(lam * slack), initial=0.0))
            kkt = max(grad_res, compl)
            if kkt <= tol and feas <= tol:
                return x, lam, kkt, feas, it
            best_feas = min(best_feas, feas)
            if it % 5_000 == 0:
                # Primal violation frozen far above tol: constraints are empty.
                if feas > max(tol, 1e3 * np.finfo(float).eps) and feas > 0.9999 * last_check_feas:
                    raise InfeasibleProblemError(
                        f"feasibility residual stalled at {feas:.3e} after {it} iterations")
                last_check_feas = feas
    raise MaxIterationsError(f"ADMM did not reach tol={tol} in {max_iter} iterations")


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def problem_to_json(problem: StochasticProblem) -> str:
    """Serialize to the fixed JSON schema (numeric component kinds only)."""
    comps = []
    for comp in problem.components:
        if isinstance(comp, LeastSquares):
            comps.append({"kind": "least_squares", "a": comp.a.tolist(), "b": comp.b})
        elif isinstance(comp, HingeReg):
            comps.append({"kind": "hinge_reg", "a": comp.a.tolist(), "b": comp.b,
                          "lam": comp.lam})
        elif isinstance(comp, HalfspaceIndicator):
            comps.append({"kind": "halfspace", "c": comp.c.tolist(), "d": comp.d})
        else:
            raise SerializationError(
                "scalar-composite components hold a function handle and cannot be serialized")
    doc = {
        "schema": PROBLEM_SCHEMA,
        "dimension": problem.dimension,
        "weights": problem.weights.tolist(),
        "components": comps,
        "interior_point": None if problem.interior_point is None
        else problem.interior_point.tolist(),
        "interior_margin": problem.interior_margin,
        "optimum_anchor": None if problem.optimum_anchor is None
        else problem.optimum_anchor.tolist(),
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def problem_from_json(text: str) -> StochasticProblem:
    doc = json.loads(text)
    if doc.get("schema") != PROBLEM_SCHEMA:
        raise SerializationError(f"unknown problem schema {doc.get('schema')!r}")
    comps: list[Component] = []
    for entry in doc["components"]:
        kind = entry.get("kind")
        if kind == "least_squares":
            comps.append(LeastSquares(np.array(entry["a"]), entry["b"]))
        elif kind == "hinge_reg":
            comps.append(HingeReg(np.array(entry["a"]), entry["b"], entry["lam"]))
        elif kind == "halfspace":
            comps.append(HalfspaceIndicator(np.array(entry["c"]), entry["d"]))
        else:
            raise SerializationError(f"unknown component kind {kind!r}")
    interior = doc.get("interior_point")
    anchor = doc.get("optimum_anchor")
    return StochasticProblem(
        tuple(comps),
        np.array(doc["weights"], dtype=np.float64),
        int(doc["dimension"]),
        interior_point=None if interior is None else np.array(interior),
        interior_margin=doc.get("interior_margin"),
        optimum_anchor=None if anchor is None else np.array(anchor),
    )
