"""Seeded generators of random test instances.

Every generator takes a :class:`numpy.random.Generator` so that suites and
CLI fixtures are reproducible from one seed.
"""
from __future__ import annotations

import numpy as np

from .capacities import SetFunction
from .core import Measure, Space, make_measure
from .costs import (
    BarycentricPL,
    BarycentricQuad,
    Dilation,
    EntropicShift,
    Linear,
    SumCost,
    WeakCost,
)
from .transfers import Transfer

__all__ = [
    "random_measure", "random_grid", "random_linear", "random_pl", "random_point_in",
    "random_instance", "mean_preserving_spread", "random_submodular", "random_non_submodular",
    "FAMILIES",
]

FAMILIES = ("linear", "pl", "dilation", "sum")


def random_measure(space: Space, rng: np.random.Generator, zero_prob: float = 0.0) -> Measure:
    """Random weights, each point dropped with probability ``zero_prob``."""
    w = rng.random(len(space)) + 0.05
    w[rng.random(len(space)) < zero_prob] = 0.0
    if w.sum() == 0:
        w[rng.integers(len(space))] = 1.0
    return make_measure(space, w / w.sum())


def random_grid(n: int, rng: np.random.Generator, low: float = -2.0, high: float = 2.0) -> Space:
    """``n`` distinct sorted points in ``[low, high]`` on a 1/4 lattice."""
    lattice = np.arange(low, high + 1e-12, 0.25)
    pts = np.sort(rng.choice(lattice, size=n, replace=False))
    return Space.grid(pts)


def random_linear(n: int, m: int, rng: np.random.Generator, forbid_prob: float = 0.0) -> Linear:
    C = np.round(rng.random((n, m)), 3)
    C[rng.random((n, m)) < forbid_prob] = np.inf
    return Linear(C)


def random_pl(Y: Space, n: int, rng: np.random.Generator, pieces: int = 3) -> BarycentricPL:
    """Convex piecewise-linear function of the mean, per point of ``X``."""
    d = Y.dim
    slopes = tuple(np.round(rng.normal(size=(pieces, d)), 3) for _ in range(n))
    inter = tuple(np.round(rng.normal(size=pieces), 3) for _ in range(n))
    return BarycentricPL(Y.coords, slopes, inter)


def random_point_in(vertices: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    lam = rng.dirichlet(np.ones(len(vertices)))
    return lam @ vertices


def _covering_pair(rng, n, m):
    """Grids with the ``X`` points strictly inside the ``Y`` range."""
    Y = random_grid(m, rng)
    lo, hi = Y.coords[0, 0], Y.coords[-1, 0]
    inner = np.arange(lo + 0.25, hi - 0.25 + 1e-12, 0.25)
    if inner.size < n:
        inner = np.linspace(lo, hi, n + 2)[1:-1]
    X = Space.grid(np.sort(rng.choice(inner, size=n, replace=False)))
    return X, Y


def _nu_through_dilation(dil: Dilation, mu: Measure, rng) -> np.ndarray:
    nu = np.zeros(dil.shape[1])
    for x in np.flatnonzero(mu.weights > 0):
        nu += mu.weights[x] * random_point_in(dil.family[x].vertex_list(), rng)
    return nu


def random_instance(family: str, rng: np.random.Generator, max_size: int = 6,
                    feasible: bool = True) -> tuple[Transfer, Measure, Measure]:
    """A random transfer with marginals.

    Families: ``linear``, ``pl``, ``dilation`` (barycentric, 1-D), ``sum``
    (linear plus barycentric dilation), ``quad`` and ``entropic``.  With
    ``feasible`` the target is pushed through the dilation so the value is
    finite.
    """
    n = int(rng.integers(1, max_size + 1))
    m = int(rng.integers(2, max_size + 1))
    if family == "linear":
        X, Y = Space.of_size(n), Space.of_size(m)
        cost: WeakCost = random_linear(n, m, rng, forbid_prob=0.15 if rng.random() < 0.3 else 0.0)
    elif family == "pl":
        Y = random_grid(m, rng)
        X = Space.of_size(n)
        cost = random_pl(Y, n, rng)
    elif family == "quad":
        X, Y = random_grid(n, rng), random_grid(m, rng)
        cost = BarycentricQuad(X.coords, Y.coords, float(rng.uniform(0.5, 2.0)))
    elif family == "entropic":
        X, Y = Space.of_size(n), Space.of_size(m)
        cost = EntropicShift(np.round(rng.random((n, m)), 3), float(rng.choice([1.0, 0.1])),
                             np.full(m, 1.0 / m))
    elif family in ("dilation", "sum"):
        m = max(m, 3)
        X, Y = _covering_pair(rng, n, m)
        dil = Dilation.barycentric(X.coords, Y.coords)
        if family == "dilation":
            cost = dil
        else:
            C = np.round(np.abs(X.coords[:, :1] - Y.coords[:, 0][None, :]) * rng.uniform(0.5, 2.0)
                         + 0.1 * rng.random((n, m)), 3)
            cost = SumCost((Linear(C), dil))
        mu = random_measure(X, rng)
        if feasible:
            nu = make_measure(Y, _nu_through_dilation(dil, mu, rng))
        else:
            nu = random_measure(Y, rng)
        return Transfer(cost, X, Y), mu, nu
    else:
        raise ValueError(f"unknown family {family!r}")
    mu = random_measure(X, rng, zero_prob=0.2)
    nu = random_measure(Y, rng)
    return Transfer(cost, X, Y), mu, nu


def mean_preserving_spread(points: np.ndarray, weights: np.ndarray, grid: np.ndarray,
                           rng: np.random.Generator, steps: int = 3) -> np.ndarray:
    """Weights on ``grid`` obtained from ``(points, weights)`` by random spreads.

    Each step takes mass at some grid point and splits it between a left and
    a right neighbour so that the mean is kept.  Input points must lie on
    ``grid``.
    """
    grid = np.asarray(grid, dtype=float)
    w = np.zeros(grid.size)
    for p, a in zip(points, weights):
        w[int(np.argmin(np.abs(grid - p)))] += a
    for _ in range(steps):
        inner = [i for i in np.flatnonzero(w > 0) if 0 < i < grid.size - 1]
        if not inner:
            break
        i = int(rng.choice(inner))
        lo = int(rng.integers(0, i))
        hi = int(rng.integers(i + 1, grid.size))
        moved = w[i] * rng.uniform(0.3, 1.0)
        left = moved * (grid[hi] - grid[i]) / (grid[hi] - grid[lo])
        w[i] -= moved
        w[lo] += left
        w[hi] += moved - left
    return w / w.sum()


_CONCAVE = (np.sqrt, lambda t: np.log1p(t), lambda t: 1.0 - np.exp(-2.0 * t), lambda t: np.minimum(t, 0.5))


def random_submodular(space: Space, rng: np.random.Generator, terms: int = 3) -> SetFunction:
    """Normalized sum of concave functions of random measures of the set.

    Each term is ``a * phi(tau(A))`` with ``phi`` concave, nondecreasing and
    zero at zero, which makes it submodular; the sum is scaled so that the
    whole space gets 1.
    """
    m = len(space)
    masks = np.arange(2**m)
    ind = ((masks[:, None] >> np.arange(m)) & 1).astype(float)
    vals = np.zeros(2**m)
    for _ in range(terms):
        tau = rng.random(m) * (rng.random(m) < 0.8) + 1e-3
        phi = _CONCAVE[int(rng.integers(len(_CONCAVE)))]
        vals += rng.uniform(0.2, 1.0) * phi(ind @ tau)
    return SetFunction(space, vals / vals[-1])


def random_non_submodular(space: Space, rng: np.random.Generator) -> SetFunction:
    """A probability plus a strictly convex function of the cardinality.

    ``sigma(A) + delta * (|A| / m) ** p`` with ``p`` in ``[2, 3]``: the
    convex bump breaks strong subadditivity on any two disjoint singletons,
    while ``sigma`` stays below the set function.
    """
    m = len(space)
    masks = np.arange(2**m)
    ind = ((masks[:, None] >> np.arange(m)) & 1).astype(float)
    sigma = rng.dirichlet(np.ones(m))
    delta = rng.uniform(0.2, 1.0)
    p = rng.uniform(2.0, 3.0)
    return SetFunction(space, ind @ sigma + delta * (ind.sum(axis=1) / m) ** p)
