"""Shared brute-force oracles kept deliberately independent of the package code."""

import numpy as np
import pytest


def grid_minimize_1d(f, lo, hi, rounds=25, points=81):
    """Locate the minimizer of a unimodal scalar function by grid refinement."""
    for _ in range(rounds):
        ts = np.linspace(lo, hi, points)
        vals = np.array([f(t) for t in ts])
        i = int(np.argmin(vals))
        lo = ts[max(0, i - 1)]
        hi = ts[min(points - 1, i + 1)]
    return 0.5 * (lo + hi)


def grid_minimize_2d(f, center, half_width, rounds=18, points=41):
    """Grid-plus-refinement minimizer of a convex function on the plane."""
    cx, cy = float(center[0]), float(center[1])
    w = float(half_width)
    best = None
    for _ in range(rounds):
        xs = np.linspace(cx - w, cx + w, points)
        ys = np.linspace(cy - w, cy + w, points)
        vals = np.array([[f(np.array([x, y])) for y in ys] for x in xs])
        i, j = np.unravel_index(np.argmin(vals), vals.shape)
        cx, cy = xs[i], ys[j]
        best = vals[i, j]
        w *= 2.5 / (points - 1)
    return np.array([cx, cy]), best


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
