"""Proximal operators, Moreau envelopes, and a generic numeric prox oracle.

Every component represents a proper convex lower-semicontinuous function of
``x`` built around a single direction vector:

* ``LeastSquares(a, b)``        : ``0.5 * (a @ x - b) ** 2``
* ``HingeReg(a, b, lam)``       : ``max(0, a @ x - b) + 0.5 * lam * ||x||^2``
* ``HalfspaceIndicator(c, d)``  : ``0`` if ``c @ x <= d`` else ``+inf``
* ``ScalarComposite(loss, a, b)``: ``loss(a @ x - b)`` for a convex 1-D loss

The prox of a component at smoothing parameter ``mu`` minimizes
``F(z) + ||z - x||^2 / (2 mu)``; the attained value is the Moreau envelope
and ``(x - z) / mu`` its gradient.  Closed forms are implemented where they
exist, and :func:`numeric_prox` provides an independent derivative-free
route (dimension reduction to a scalar strongly convex problem, then
bracketing bisection on the subgradient) used to cross-check them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np

from .errors import (
    DivergesError,
    DomainError,
    InvalidComponentError,
    InvalidStepsizeError,
)

# Below this smoothing parameter the prox is numerically the identity; we
# return z = x directly so the envelope gradient (x - z) / mu cannot blow up.
MU_IDENTITY_FLOOR = 1e-14

# Feasibility slack used when evaluating an indicator at a point that was
# produced by a projection and may sit a few ulps outside its halfspace.
_INDICATOR_SLACK = 1e-9


def _as_direction(vec, name: str) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    if arr.ndim != 1:
        raise InvalidComponentError(f"{name} must be a 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidComponentError(f"{name} has non-finite entries")
    if not np.any(arr):
        raise InvalidComponentError(f"{name} must be nonzero")
    return arr


def _check_mu(mu: float) -> float:
    mu = float(mu)
    if not math.isfinite(mu) or mu <= 0.0:
        raise InvalidStepsizeError(f"smoothing parameter must be positive, got {mu}")
    return mu


@dataclass(frozen=True)
class LeastSquares:
    """Scalar least-squares loss ``0.5 * (a @ x - b) ** 2``."""

    a: np.ndarray
    b: float

    def __post_init__(self):
        object.__setattr__(self, "a", _as_direction(self.a, "a"))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def value(self, x) -> float:
        r = float(self.a @ np.asarray(x, dtype=np.float64)) - self.b
        return 0.5 * r * r

    def grad(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        return (float(self.a @ x) - self.b) * self.a


@dataclass(frozen=True)
class HingeReg:
    """Hinge loss with optional ridge: ``max(0, a @ x - b) + lam/2 ||x||^2``."""

    a: np.ndarray
    b: float
    lam: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "a", _as_direction(self.a, "a"))
        object.__setattr__(self, "b", float(self.b))
        lam = float(self.lam)
        if not math.isfinite(lam) or lam < 0.0:
            raise InvalidComponentError(f"ridge weight must be >= 0, got {lam}")
        object.__setattr__(self, "lam", lam)

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def value(self, x) -> float:
        x = np.asarray(x, dtype=np.float64)
        t = float(self.a @ x) - self.b
        return max(0.0, t) + 0.5 * self.lam * float(x @ x)

    def subgradient(self, x) -> np.ndarray:
        # Selection: slope 1 on the active side, 0 at or below the kink.
        x = np.asarray(x, dtype=np.float64)
        t = float(self.a @ x) - self.b
        g = self.lam * x
        if t > 0.0:
            g = g + self.a
        return g


@dataclass(frozen=True)
class HalfspaceIndicator:
    """Indicator of the halfspace ``{x : c @ x <= d}``; its prox is the projection."""

    c: np.ndarray
    d: float

    def __post_init__(self):
        object.__setattr__(self, "c", _as_direction(self.c, "c"))
        object.__setattr__(self, "d", float(self.d))

    @property
    def dimension(self) -> int:
        return self.c.shape[0]

    def violation(self, x) -> float:
        """Signed constraint value ``c @ x - d`` (positive means infeasible)."""
        return float(self.c @ np.asarray(x, dtype=np.float64)) - self.d

    def distance(self, x) -> float:
        return max(0.0, self.violation(x)) / float(np.linalg.norm(self.c))

    def value(self, x) -> float:
        if self.violation(x) <= _INDICATOR_SLACK * (1.0 + abs(self.d)):
            return 0.0
        return math.inf


@dataclass(frozen=True)
class ScalarComposite:
    """Convex scalar loss composed with an affine map: ``loss(a @ x - b)``.

    ``loss`` is a callable ``t -> float``, convex on the real line.  An
    optional ``loss_slope`` supplies a subgradient selection; without it the
    numeric prox falls back to a symmetric difference quotient, which for a
    convex loss still drives the bisection to the correct side.
    """

    loss: Callable[[float], float]
    a: np.ndarray
    b: float
    loss_slope: Optional[Callable[[float], float]] = field(default=None)

    def __post_init__(self):
        object.__setattr__(self, "a", _as_direction(self.a, "a"))
        object.__setattr__(self, "b", float(self.b))

    @property
    def dimension(self) -> int:
        return self.a.shape[0]

    def value(self, x) -> float:
        t = float(self.a @ np.asarray(x, dtype=np.float64)) - self.b
        return float(self.loss(t))


Component = Union[LeastSquares, HingeReg, HalfspaceIndicator, ScalarComposite]


@dataclass(frozen=True)
class ProxResult:
    """Prox point ``z``, envelope value ``F(z) + ||z-x||^2/(2 mu)``, and its gradient."""

    z: np.ndarray
    envelope_value: float
    envelope_grad: np.ndarray


def _result(z: np.ndarray, x: np.ndarray, mu: float, f_at_z: float) -> ProxResult:
    diff = z - x
    envelope = f_at_z + float(diff @ diff) / (2.0 * mu)
    return ProxResult(z=z, envelope_value=envelope, envelope_grad=(x - z) / mu)


def prox_least_squares(x, a, b: float, mu: float) -> ProxResult:
    """Closed-form prox of ``0.5 (a@z - b)^2``: ``z = x - mu r / (1 + mu ||a||^2) a``."""
    mu = _check_mu(mu)
    a = _as_direction(a, "a")
    x = np.asarray(x, dtype=np.float64)
    if mu < MU_IDENTITY_FLOOR:
        z = x.copy()
    else:
        r = float(a @ x) - float(b)
        z = x - (mu * r / (1.0 + mu * float(a @ a))) * a
    rz = float(a @ z) - float(b)
    return _result(z, x, mu, 0.5 * rz * rz)


def prox_hinge_reg(x, a, b: float, lam: float, mu: float) -> ProxResult:
    """Closed-form prox of the ridge-regularized hinge.

    With ``s = clip((a@x - b (1 + lam mu)) / (mu ||a||^2), 0, 1)`` the
    minimizer is ``z = (x - mu s a) / (1 + lam mu)``: ``s`` is the hinge
    subgradient that makes the stationarity condition consistent.
    """
    mu = _check_mu(mu)
    comp = HingeReg(a, b, lam)
    x = np.asarray(x, dtype=np.float64)
    if mu < MU_IDENTITY_FLOOR:
        z = x.copy()
    else:
        na2 = float(comp.a @ comp.a)
        s = (float(comp.a @ x) - comp.b * (1.0 + comp.lam * mu)) / (mu * na2)
        s = min(1.0, max(0.0, s))
        z = (x - (mu * s) * comp.a) / (1.0 + comp.lam * mu)
    return _result(z, x, mu, comp.value(z))


def project_halfspace(x, c, d: float) -> np.ndarray:
    """Euclidean projection onto ``{z : c @ z <= d}``."""
    c = _as_direction(c, "c")
    x = np.asarray(x, dtype=np.float64)
    viol = float(c @ x) - float(d)
    if viol <= 0.0:
        return x.copy()
    return x - (viol / float(c @ c)) * c


def prox_scalar_composite(x, loss, a, b: float, mu: float, tol: float = 1e-10,
                          loss_slope=None) -> ProxResult:
    """Prox of ``loss(a@z - b)`` via reduction to a scalar problem.

    The minimizer has the form ``z = x + (t - r) / ||a||^2 * a`` with
    ``r = a@x - b``, where ``t`` minimizes
    ``loss(t) + (t - r)^2 / (2 mu ||a||^2)``.  The scalar minimizer is
    bracketed and then located by bisection on the subgradient to within
    ``tol`` on ``t``.
    """
    comp = ScalarComposite(loss, a, b, loss_slope)
    return numeric_prox(comp, x, mu, tol=tol, _scale_tol=False)


# ---------------------------------------------------------------------------
# generic numeric prox
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _ScalarProfile:
    """1-D restriction of a component along its direction vector."""

    value: Callable[[float], float]
    slope: Callable[[float], float]
    dom_lo: float
    dom_hi: float
    ridge: float


def _difference_slope(f: Callable[[float], float]) -> Callable[[float], float]:
    def slope(t: float) -> float:
        h = 1e-7 * (1.0 + abs(t))
        return (f(t + h) - f(t - h)) / (2.0 * h)

    return slope


def _profile(component: Component) -> _ScalarProfile:
    if isinstance(component, LeastSquares):
        return _ScalarProfile(lambda t: 0.5 * t * t, lambda t: t, -math.inf, math.inf, 0.0)
    if isinstance(component, HingeReg):
        return _ScalarProfile(
            lambda t: max(0.0, t),
            lambda t: 1.0 if t > 0.0 else 0.0,
            -math.inf, math.inf, component.lam,
        )
    if isinstance(component, HalfspaceIndicator):
        # Value is identically zero on the domain; the bracket never leaves it.
        return _ScalarProfile(lambda t: 0.0, lambda t: 0.0, -math.inf, 0.0, 0.0)
    if isinstance(component, ScalarComposite):
        slope = component.loss_slope
        if slope is None:
            slope = _difference_slope(component.loss)
        return _ScalarProfile(component.loss, slope, -math.inf, math.inf, 0.0)
    raise InvalidComponentError(f"unknown component kind {type(component).__name__}")


def _bracket_minimizer(slope_g, r: float, dom_lo: float, dom_hi: float,
                       max_doublings: int = 120) -> tuple[float, float]:
    def safe_slope(t: float) -> float:
        try:
            return slope_g(t)
        except (OverflowError, ValueError) as exc:
            raise DivergesError(f"scalar prox slope overflowed at t={t:g}") from exc

    width = 1.0 + abs(r)
    lo = max(r - width, dom_lo)
    hi = min(r + width, dom_hi)
    for _ in range(max_doublings):
        if lo <= dom_lo or safe_slope(lo) <= 0.0:
            break
        width *= 2.0
        lo = max(r - width, dom_lo)
    else:
        raise DivergesError("could not bracket the scalar prox subproblem on the left")
    width = 1.0 + abs(r)
    for _ in range(max_doublings):
        if hi >= dom_hi or safe_slope(hi) >= 0.0:
            break
        width *= 2.0
        hi = min(r + width, dom_hi)
    else:
        raise DivergesError("could not bracket the scalar prox subproblem on the right")
    if not (math.isfinite(lo) and math.isfinite(hi)):
        raise DivergesError("scalar prox bracket is not finite")
    return lo, hi


def _bisect_slope(slope_g, lo: float, hi: float, tol: float) -> float:
    # slope_g is nondecreasing; classic sign bisection.
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        s = slope_g(mid)
        if s > 0.0:
            hi = mid
        elif s < 0.0:
            lo = mid
        else:
            return mid
    return 0.5 * (lo + hi)


def numeric_prox(component: Component, x, mu: float, tol: float = 1e-10,
                 _scale_tol: bool = True) -> ProxResult:
    """Derivative-free prox oracle valid for every component kind.

    A ridge term is absorbed first (``z`` minimizes the remaining loss at the
    shrunk point ``x / (1 + lam mu)`` with effective parameter
    ``mu / (1 + lam mu)``), then the problem is reduced to one dimension
    along the direction vector and solved by bisection on the subgradient.
    Independent from the closed forms above, so it serves as their oracle.
    """
    mu = _check_mu(mu)
    x = np.asarray(x, dtype=np.float64)
    prof = _profile(component)
    a = component.c if isinstance(component, HalfspaceIndicator) else component.a
    b = component.d if isinstance(component, HalfspaceIndicator) else component.b
    na2 = float(a @ a)
    na = math.sqrt(na2)

    if mu < MU_IDENTITY_FLOOR and not isinstance(component, HalfspaceIndicator):
        z = x.copy()
        return _result(z, x, mu, _finite_value(component, z))

    shrink = 1.0 / (1.0 + prof.ridge * mu)
    nu = mu * shrink
    xt = x * shrink
    r = float(a @ xt) - b
    q = nu * na2

    def slope_g(t: float) -> float:
        return prof.slope(t) + (t - r) / q

    lo, hi = _bracket_minimizer(slope_g, r, prof.dom_lo, prof.dom_hi)
    t_tol = tol * min(1.0, na) if _scale_tol else tol
    t_star = _bisect_slope(slope_g, lo, hi, t_tol)
    z = xt + ((t_star - r) / na2) * a

    f_at_z = prof.value(t_star) + 0.5 * prof.ridge * float(z @ z)
    return _result(z, x, mu, f_at_z)


def _finite_value(component: Component, z: np.ndarray) -> float:
    val = component.value(z)
    if not math.isfinite(val):
        raise InvalidComponentError("component value is infinite at its own prox point")
    return val


def moreau(component: Component, x, mu: float) -> ProxResult:
    """Moreau envelope of one component: dispatches to its closed-form prox.

    For ``HalfspaceIndicator`` the envelope is ``dist^2 / (2 mu)`` with the
    projection as prox point.
    """
    mu = _check_mu(mu)
    if isinstance(component, LeastSquares):
        return prox_least_squares(x, component.a, component.b, mu)
    if isinstance(component, HingeReg):
        return prox_hinge_reg(x, component.a, component.b, component.lam, mu)
    if isinstance(component, HalfspaceIndicator):
        x = np.asarray(x, dtype=np.float64)
        z = project_halfspace(x, component.c, component.d)
        return _result(z, x, mu, 0.0)
    if isinstance(component, ScalarComposite):
        return prox_scalar_composite(x, component.loss, component.a, component.b, mu,
                                     loss_slope=component.loss_slope)
    raise InvalidComponentError(f"unknown component kind {type(component).__name__}")


def component_value(component: Component, x) -> float:
    """Plain function value ``F(x)``; ``+inf`` outside an indicator's halfspace."""
    return component.value(x)


def subgradient(component: Component, x) -> np.ndarray:
    """One subgradient selection of the component at ``x``.

    For the halfspace indicator the selection is ``0`` and requires ``x``
    feasible; for the scalar composite a difference-quotient slope is used
    when no analytic slope was supplied.
    """
    x = np.asarray(x, dtype=np.float64)
    if isinstance(component, LeastSquares):
        return component.grad(x)
    if isinstance(component, HingeReg):
        return component.subgradient(x)
    if isinstance(component, HalfspaceIndicator):
        if component.value(x) == math.inf:
            raise DomainError("indicator subgradient requested at an infeasible point")
        return np.zeros_like(x)
    if isinstance(component, ScalarComposite):
        slope = component.loss_slope or _difference_slope(component.loss)
        t = float(component.a @ x) - component.b
        return slope(t) * component.a
    raise InvalidComponentError(f"unknown component kind {type(component).__name__}")
