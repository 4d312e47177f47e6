"""Brute-force reference computations.

These are deliberately naive and independent of the production routines,
so that tests and the ``oracle`` CLI command can compare the two.
"""
from __future__ import annotations

import itertools

import numpy as np

from .polytope import Polytope

__all__ = [
    "upper_concave_envelope", "vertices_by_directions", "vertices_by_supports",
    "grid_conjugate_envelope", "choquet_by_levels", "transport_by_bases",
]


def upper_concave_envelope(xs, f) -> np.ndarray:
    """Smallest concave majorant of ``f`` sampled at sorted ``xs``.

    Andrew's monotone chain on the points ``(xs, f)``, keeping the upper
    hull and interpolating between its vertices.
    """
    xs = np.asarray(xs, dtype=float)
    f = np.asarray(f, dtype=float)
    hull: list[int] = []
    for i in range(xs.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b when it lies on or below the chord a -> i
            cross = (xs[b] - xs[a]) * (f[i] - f[a]) - (f[b] - f[a]) * (xs[i] - xs[a])
            if cross >= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.interp(xs, xs[hull], f[hull])


def vertices_by_directions(P: Polytope, rng: np.random.Generator, trials: int = 400) -> np.ndarray:
    """Vertices found by maximizing random linear functionals."""
    found: list[np.ndarray] = []
    for _ in range(trials):
        _, v = P.maximize(rng.standard_normal(P.size))
        if v is None:
            break
        if not any(np.allclose(v, w, atol=1e-9) for w in found):
            found.append(v)
    return np.array(found).reshape(-1, P.size)


def vertices_by_supports(P: Polytope) -> np.ndarray:
    """Vertices as the unique feasible points on minimal supports.

    Tries every support set, smallest first, and keeps a feasible point
    when the constraints pin it down uniquely.
    """
    if P.is_vertex_list or P.A_ub.shape[0]:
        raise NotImplementedError("support enumeration handles equality descriptions only")
    m = P.size
    A = np.vstack([P.A_eq, np.ones((1, m))])
    b = np.concatenate([P.b_eq, [1.0]])
    out: list[np.ndarray] = []
    for k in range(1, m + 1):
        for supp in itertools.combinations(range(m), k):
            cols = list(supp)
            sub = A[:, cols]
            if np.linalg.matrix_rank(sub) < k:
                continue
            sol, *_ = np.linalg.lstsq(sub, b, rcond=None)
            if np.max(np.abs(sub @ sol - b)) > 1e-9 or np.any(sol < -1e-12):
                continue
            s = np.zeros(m)
            s[cols] = np.clip(sol, 0, None)
            if not any(np.allclose(s, w, atol=1e-9) for w in out):
                out.append(s)
    return np.array(out).reshape(-1, m)


def grid_conjugate_envelope(T, g, x: int, steps: int = 400, radius: float = 10.0) -> float:
    """Kantorovich envelope of ``T`` at ``(g, x)`` for a two-point ``Y``.

    The cost is recovered on a grid of ``s = (1 - t, t)`` by maximizing
    ``h @ s - T h (x)`` over a grid of ``h = (0, u)`` (constants cancel),
    then conjugated back.
    """
    ts = np.linspace(0.0, 1.0, steps + 1)
    us = np.linspace(-radius, radius, 8 * steps + 1)
    Th = np.array([T(np.array([0.0, u]))[x] for u in us])
    cost = np.max(ts[:, None] * us[None, :] - Th[None, :], axis=1)
    g = np.asarray(g, dtype=float)
    vals = (1 - ts) * g[0] + ts * g[1] - cost
    return float(vals.max())


def choquet_by_levels(P_of_mask, f) -> float:
    """Choquet integral by summing ``P({f >= a})`` over the level gaps."""
    f = np.asarray(f, dtype=float)
    levels = np.unique(np.concatenate([[0.0], f]))
    total = 0.0
    for lo, hi in zip(levels[:-1], levels[1:]):
        mask = 0
        for i in np.flatnonzero(f >= hi):
            mask |= 1 << int(i)
        total += (hi - lo) * P_of_mask(mask)
    return total


def transport_by_bases(C, a, b) -> float:
    """Optimal transport cost by trying every basic solution.

    Enumerates supports of size ``n + m - 1`` among the finite cells and
    solves the marginal equations on each.  Exponential; meant for spaces
    of at most three or four points.  Returns ``inf`` when nothing is
    feasible.
    """
    C = np.asarray(C, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n, m = C.shape
    cells = [(i, j) for i in range(n) for j in range(m) if np.isfinite(C[i, j])]
    A = np.zeros((n + m, len(cells)))
    for k, (i, j) in enumerate(cells):
        A[i, k] = 1.0
        A[n + j, k] = 1.0
    rhs = np.concatenate([a, b])
    best = np.inf
    for size in range(1, min(n + m - 1, len(cells)) + 1):
        for supp in itertools.combinations(range(len(cells)), size):
            sub = A[:, supp]
            sol, *_ = np.linalg.lstsq(sub, rhs, rcond=None)
            if np.max(np.abs(sub @ sol - rhs)) > 1e-9 or np.any(sol < -1e-12):
                continue
            best = min(best, float(sum(C[cells[k]] * v for k, v in zip(supp, sol))))
    return best
