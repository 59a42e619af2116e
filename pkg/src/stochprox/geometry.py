"""Cyclic-projection machinery for intersections of halfspaces.

Dykstra's algorithm with exact per-halfspace projections; for polyhedra the
iterates converge to the nearest point of the intersection, so this is the
high-accuracy distance oracle used by the regularity estimator and the
feasible-intersection metrics.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .errors import InfeasibleProblemError, MaxIterationsError
from .prox import HalfspaceIndicator, project_halfspace


def dykstra_project(halfspaces: Sequence[HalfspaceIndicator], x,
                    tol: float = 1e-10, max_cycles: int = 100_000) -> np.ndarray:
    """Nearest point of the intersection of the given halfspaces.

    Stops when the point moves less than ``tol`` over a full cycle and the
    worst constraint violation is below ``tol`` as well.  A stalled cycle
    movement with violation bounded away from zero signals an empty
    intersection.
    """
    z = np.array(x, dtype=np.float64)
    if not halfspaces:
        return z
    corrections = [np.zeros_like(z) for _ in halfspaces]
    stall = 0
    prev_move = np.inf
    for _ in range(max_cycles):
        move = 0.0
        for i, hs in enumerate(halfspaces):
            y = z + corrections[i]
            z_new = project_halfspace(y, hs.c, hs.d)
            corrections[i] = y - z_new
            move = max(move, float(np.max(np.abs(z_new - z))))
            z = z_new
        violation = max(hs.distance(z) for hs in halfspaces)
        if move <= tol and violation <= tol:
            return z
        # Movement frozen but still infeasible: the sets cannot intersect.
        if move > tol and violation > tol and move >= prev_move * (1.0 - 1e-12):
            stall += 1
            if stall > 2_000:
                raise InfeasibleProblemError(
                    f"cyclic projections stalled with violation {violation:.3e}")
        else:
            stall = 0
        prev_move = move
    raise MaxIterationsError(f"Dykstra did not converge in {max_cycles} cycles")


def distance_to_intersection(halfspaces: Sequence[HalfspaceIndicator], x,
                             tol: float = 1e-10, max_cycles: int = 100_000) -> float:
    """Euclidean distance from ``x`` to the intersection of the halfspaces."""
    x = np.asarray(x, dtype=np.float64)
    z = dykstra_project(halfspaces, x, tol=tol, max_cycles=max_cycles)
    return float(np.linalg.norm(x - z))
