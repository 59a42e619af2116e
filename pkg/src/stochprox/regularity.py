"""Executable regularity constants, contraction bounds, and rate regimes.

The central inequality is the weak linear regularity property

    sigma_F_mu / 2 * dist^2(x, X*)  <=  F_mu(x) - F_mu* + mu * beta,

whose constants this module computes for three structural settings
(quadratic growth with regular constraints, restricted strong convexity,
pure feasibility), together with the resulting expected-distance recursion

    B_{k+1} = (1 - mu_k sigma) B_k + (S* + 2 beta) mu_k^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    CaseViolationError,
    DomainError,
    InsufficientSamplesError,
    StepsizeTooLargeError,
    UnsupportedScheduleError,
)
from .geometry import distance_to_intersection
from .problems import StochasticProblem, evaluate_feasibility
from .solver import StepSchedule, step_size

# Eigenvalues above this negative floor are treated as roundoff and clamped.
_PSD_CLAMP = -1e-12


@dataclass(frozen=True)
class RegularityConstants:
    """Bundle (sigma_F_mu, beta, sigma_X, S*) feeding the bound curves.

    ``sigma_X`` is ``None`` for settings where no set-regularity constant
    enters the formulas.  The growth modulus must be positive for the weak
    regularity property itself; ``sigma_F_mu = 0`` is accepted here so the
    degenerate no-contraction bound remains evaluable.
    """

    sigma_F_mu: float
    beta: float
    sigma_X: Optional[float]
    S_star_F: float

    def __post_init__(self):
        if not (self.sigma_F_mu >= 0.0 and math.isfinite(self.sigma_F_mu)):
            raise DomainError(f"sigma_F_mu must be >= 0, got {self.sigma_F_mu}")
        if not (self.beta >= 0.0 and math.isfinite(self.beta)):
            raise DomainError(f"beta must be >= 0, got {self.beta}")
        if self.sigma_X is not None and not (0.0 < self.sigma_X <= 1.0):
            raise DomainError(f"sigma_X must lie in (0, 1], got {self.sigma_X}")
        if not (self.S_star_F >= 0.0 and math.isfinite(self.S_star_F)):
            raise DomainError(f"S_star_F must be >= 0, got {self.S_star_F}")


def phi_alpha(alpha: float, x: float) -> float:
    """``(x**alpha - 1) / alpha`` for ``alpha != 0`` and ``log x`` at ``alpha = 0``.

    Arguments with ``|alpha| <= 1e-6`` take the logarithmic branch, which
    keeps the function continuous across ``alpha = 0`` to within 1e-9 there.
    """
    x = float(x)
    if not (x > 0.0):
        raise DomainError(f"phi_alpha needs x > 0, got {x}")
    alpha = float(alpha)
    if abs(alpha) <= 1e-6:
        return math.log(x)
    return math.expm1(alpha * math.log(x)) / alpha


def recurrence_bound_curve(dist0_sq: float, constants: RegularityConstants,
                           schedule: StepSchedule, k: int) -> np.ndarray:
    """Bound values ``B_0 .. B_k`` on the expected squared distance.

    ``B_0`` is ``dist0_sq``; each step applies the contraction
    ``1 - mu_i * sigma`` and adds ``(S* + 2 beta) mu_i^2``.  Any stepsize
    with ``mu_i * sigma > 1`` invalidates the contraction and raises.
    """
    if dist0_sq < 0.0:
        raise DomainError("dist0_sq must be >= 0")
    if k < 0:
        raise DomainError("k must be >= 0")
    sigma = constants.sigma_F_mu
    noise = constants.S_star_F + 2.0 * constants.beta
    out = np.empty(k + 1)
    out[0] = dist0_sq
    b = float(dist0_sq)
    for i in range(k):
        mu = step_size(schedule, i)
        factor = 1.0 - mu * sigma
        if factor < 0.0:
            raise StepsizeTooLargeError(
                f"mu_{i} * sigma = {mu * sigma:g} exceeds 1; bound is not a contraction")
        b = factor * b + noise * mu * mu
        out[i + 1] = b
    return out


def recurrence_bound(dist0_sq: float, constants: RegularityConstants,
                     schedule: StepSchedule, k: int) -> float:
    """Bound on the expected squared distance after ``k`` steps."""
    return float(recurrence_bound_curve(dist0_sq, constants, schedule, k)[-1])


@dataclass(frozen=True)
class RateRegime:
    """Asymptotic decay regime ``O(log(k)^(log_factor) / k**exponent)``."""

    label: str
    exponent: float
    log_factor: bool = False


def classify_rate(mu0: float, sigma_F_mu0: float, gamma: float) -> RateRegime:
    """Asymptotic regime of decaying-stepsize runs with ``mu_k = mu0 / k**gamma``.

    For ``gamma`` in (0,1) the squared distance decays like ``1/k**gamma``;
    at ``gamma = 1`` the regime splits on how ``mu0 * sigma`` compares with
    ``e - 1``.  Only regimes and exponents are returned, never absolute
    constants.
    """
    if not (0.0 < gamma <= 1.0):
        raise UnsupportedScheduleError(f"gamma must lie in (0, 1], got {gamma}")
    if not (mu0 > 0.0):
        raise DomainError(f"mu0 must be positive, got {mu0}")
    if not (sigma_F_mu0 > 0.0):
        raise DomainError(f"sigma_F_mu0 must be positive, got {sigma_F_mu0}")
    if gamma < 1.0:
        return RateRegime(label=f"O(1/k^{gamma:g})", exponent=gamma)
    product = mu0 * sigma_F_mu0
    threshold = math.e - 1.0
    if product > threshold:
        return RateRegime(label="O(1/k)", exponent=1.0)
    if product == threshold:
        return RateRegime(label="O(ln k / k)", exponent=1.0, log_factor=True)
    exponent = 2.0 * math.log1p(product)
    return RateRegime(label=f"O(1/k^{exponent:g})", exponent=exponent)


def constants_quadratic_growth(sigma_f: float, sigma_X: float, L_max: float, mu: float,
                               e_grad_sq_at_opt: float,
                               grad_norm_sq_at_opt: float) -> RegularityConstants:
    """Constants for a quadratically growing smooth part with regular constraints.

    ``sigma_F_mu = sigma_f mu sigma_X / (sigma_f mu^2 + 8 (1 + 2 sigma_X) (1 + mu L_max)^2)``
    and ``beta`` collects the squared gradients at the optimum:
    ``E||grad f(x*; xi)||^2`` plus
    ``[1/sigma_X + (1 + sigma_f / (4 L_max^2))^2 / (4 sigma_X^3)] ||grad f(x*)||^2``.
    """
    if not (sigma_f > 0.0):
        raise DomainError(f"sigma_f must be positive, got {sigma_f}")
    if not (0.0 < sigma_X <= 1.0):
        raise DomainError(f"sigma_X must lie in (0, 1], got {sigma_X}")
    if not (L_max > 0.0):
        raise DomainError(f"L_max must be positive, got {L_max}")
    if not (mu > 0.0):
        raise DomainError(f"mu must be positive, got {mu}")
    if e_grad_sq_at_opt < 0.0 or grad_norm_sq_at_opt < 0.0:
        raise DomainError("squared gradient norms must be >= 0")
    sigma = (sigma_f * mu * sigma_X
             / (sigma_f * mu ** 2 + 8.0 * (1.0 + 2.0 * sigma_X) * (1.0 + mu * L_max) ** 2))
    beta = (e_grad_sq_at_opt
            + (1.0 / sigma_X
               + (1.0 + sigma_f / (4.0 * L_max ** 2)) ** 2 / (4.0 * sigma_X ** 3))
            * grad_norm_sq_at_opt)
    return RegularityConstants(sigma, beta, sigma_X, e_grad_sq_at_opt)


def _check_psd(matrices: Sequence[np.ndarray], n: int) -> list[np.ndarray]:
    checked = []
    for M in matrices:
        M = np.asarray(M, dtype=np.float64)
        if M.shape != (n, n):
            raise DomainError(f"curvature matrices must be {n}x{n}, got {M.shape}")
        if not np.allclose(M, M.T, atol=1e-10):
            raise DomainError("curvature matrices must be symmetric")
        eigs = np.linalg.eigvalsh(0.5 * (M + M.T))
        if eigs.min() < _PSD_CLAMP:
            raise DomainError(f"curvature matrix has negative eigenvalue {eigs.min():g}")
        checked.append(0.5 * (M + M.T))
    return checked


def constants_rsc(case: str, matrices: Sequence[np.ndarray], mu: float,
                  weights: Optional[Sequence[float]] = None, *,
                  e_grad_sq_at_opt: float = 0.0, mean_grad_sq_at_opt: float = 0.0,
                  sigma_X: Optional[float] = None,
                  sigma_fX: Optional[float] = None) -> RegularityConstants:
    """Constants for restricted strongly convex components.

    ``matrices`` are the per-component curvature matrices ``M_xi`` (symmetric
    PSD) and ``weights`` the sampling distribution (uniform by default).  The
    smoothed curvature is ``M_hat = E[M_xi / lambda_max(I + mu M_xi)]``.

    * case "ii": needs ``E[M_xi]`` positive definite;
      ``sigma = lambda_min(M_hat)``, ``beta = e_grad_sq_at_opt / 2``.
    * case "iii": case "ii" plus linearly regular constraints; ``beta`` adds
      ``mean_grad_sq_at_opt / (2 sigma_X)``.
    * case "i": joint regularity constant ``sigma_fX`` supplied by the caller;
      ``sigma = min(1, M_max) / (2 (1 + mu M_max)) * sigma_fX`` with
      ``M_max = max_xi lambda_max(M_xi)``, and
      ``beta = mu/2 (1 + 2/sigma_X) e_grad_sq + mu/(2 sigma_X) mean_grad_sq``.
    """
    if case not in ("i", "ii", "iii"):
        raise DomainError(f"case must be one of 'i', 'ii', 'iii', got {case!r}")
    if not (mu > 0.0):
        raise DomainError(f"mu must be positive, got {mu}")
    if e_grad_sq_at_opt < 0.0 or mean_grad_sq_at_opt < 0.0:
        raise DomainError("squared gradient norms must be >= 0")
    mats = list(matrices)
    if not mats:
        raise DomainError("need at least one curvature matrix")
    n = np.asarray(mats[0]).shape[0]
    mats = _check_psd(mats, n)
    if weights is None:
        w = np.full(len(mats), 1.0 / len(mats))
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (len(mats),) or np.any(w < 0.0) or abs(w.sum() - 1.0) > 1e-12:
            raise DomainError("weights must be a probability vector over the matrices")

    lam_max = np.array([np.linalg.eigvalsh(M)[-1] for M in mats])
    M_hat = sum(wi * Mi / (1.0 + mu * li) for wi, Mi, li in zip(w, mats, lam_max))
    M_f = sum(wi * Mi for wi, Mi in zip(w, mats))

    if case in ("ii", "iii"):
        min_eig_f = float(np.linalg.eigvalsh(M_f)[0])
        if min_eig_f <= 1e-12:
            raise CaseViolationError(
                f"case ({case}) needs E[M] positive definite; lambda_min = {min_eig_f:g}")
        sigma = float(np.linalg.eigvalsh(M_hat)[0])
        if case == "ii":
            beta = 0.5 * e_grad_sq_at_opt
            return RegularityConstants(sigma, beta, None, e_grad_sq_at_opt)
        if sigma_X is None:
            raise DomainError("case (iii) needs sigma_X")
        beta = 0.5 * e_grad_sq_at_opt + mean_grad_sq_at_opt / (2.0 * sigma_X)
        return RegularityConstants(sigma, beta, sigma_X, e_grad_sq_at_opt)

    if sigma_fX is None or sigma_X is None:
        raise DomainError("case (i) needs both sigma_fX and sigma_X")
    if not (sigma_fX > 0.0):
        raise DomainError(f"sigma_fX must be positive, got {sigma_fX}")
    m_max = float(lam_max.max())
    if m_max <= 0.0:
        raise CaseViolationError("case (i) needs at least one nonzero curvature matrix")
    sigma = min(1.0, m_max) / (2.0 * (1.0 + mu * m_max)) * sigma_fX
    beta = (0.5 * mu * (1.0 + 2.0 / sigma_X) * e_grad_sq_at_opt
            + mu / (2.0 * sigma_X) * mean_grad_sq_at_opt)
    return RegularityConstants(sigma, beta, sigma_X, e_grad_sq_at_opt)


def constants_cfp(sigma_X: float, mu: float) -> RegularityConstants:
    """Feasibility-problem constants: ``sigma_F_mu = sigma_X / mu`` and ``beta = 0``.

    The product ``mu * sigma_F_mu`` equals ``sigma_X``, so the constant-step
    contraction factor is exactly ``1 - sigma_X``.
    """
    if not (0.0 < sigma_X <= 1.0):
        raise DomainError(f"sigma_X must lie in (0, 1], got {sigma_X}")
    if not (mu > 0.0):
        raise DomainError(f"mu must be positive, got {mu}")
    return RegularityConstants(sigma_X / mu, 0.0, sigma_X, 0.0)


@dataclass(frozen=True)
class RegularityEstimate:
    """Sampled lower-envelope estimate of the set-regularity constant."""

    sigma_hat: float
    samples_used: int
    samples_requested: int


def estimate_linear_regularity(problem: StochasticProblem, sample_count: int, seed: int,
                               dist_tol: float = 1e-10,
                               radius: Optional[float] = None) -> RegularityEstimate:
    """Estimate ``sigma_X`` as the sampled minimum of the distance ratio.

    For each sample ``x`` drawn from a ball around the feasible anchor, the
    ratio ``E[dist^2 to a random set] / dist^2 to the intersection`` is an
    upper bound on ``sigma_X``; the minimum over samples is the estimate.
    Near-feasible samples (intersection distance below ``10 * dist_tol``)
    carry no signal and are discarded.  This is an estimate from a finite
    sample, not a certificate.
    """
    if sample_count < 1:
        raise InsufficientSamplesError("sample_count must be >= 1")
    halfspaces = problem.halfspaces
    if not halfspaces:
        raise DomainError("the problem has no indicator components to estimate over")
    if problem.interior_point is not None:
        anchor = problem.interior_point
    else:
        from .geometry import dykstra_project
        anchor = dykstra_project(halfspaces, np.zeros(problem.dimension), tol=dist_tol)
    if radius is None:
        radius = 4.0 * (1.0 + float(np.linalg.norm(anchor)))

    rng = np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(3,)))
    n = problem.dimension
    best = math.inf
    used = 0
    for _ in range(sample_count):
        direction = rng.standard_normal(n)
        norm = float(np.linalg.norm(direction))
        if norm == 0.0:
            continue
        scale = radius * rng.uniform() ** (1.0 / n)
        x = anchor + (scale / norm) * direction
        dist = distance_to_intersection(halfspaces, x, tol=dist_tol)
        if dist < 10.0 * dist_tol:
            continue
        ratio = evaluate_feasibility(problem, x) / (dist * dist)
        best = min(best, ratio)
        used += 1
    if used == 0:
        raise InsufficientSamplesError(
            "all samples were near-feasible; increase the radius or sample count")
    # The ratio is <= 1 pointwise; clamp absorbs distance-oracle roundoff.
    return RegularityEstimate(min(best, 1.0), used, sample_count)
