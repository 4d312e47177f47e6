"""Set functions on a finite space as Choquet capacities.

Subsets of ``Y`` (``m`` points) are bitmasks ``0 .. 2**m - 1``; bit ``i``
stands for the ``i``-th point.  A :class:`SetFunction` stores the full table
of values.  A :class:`FunctionalCapacity` holds one set function per point
of ``X`` and, optionally, the functional it was read from.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .core import Fn, Space
from .errors import (
    Malformed,
    NegativeFunction,
    NotCommon,
    NotCompactlyStandard,
    SizeCap,
    SpaceMismatch,
)
from .lp import LinearProgram, Status, solve
from .operators import KantorovichOp

__all__ = [
    "SetFunction", "FunctionalCapacity", "choquet_integral", "dellacherie_envelope", "ck_envelope",
    "DellacherieOp", "ChoquetKantorovichOp", "is_strongly_subadditive", "strong_subadditivity_witness",
    "is_subadditive_order_infinity", "is_strictly_subadditive_order_infinity", "is_saturated",
    "saturation_report", "SaturationReport", "capacity_theorem_check", "CapacityReport",
    "induced_set_function", "set_function_to_json", "set_function_from_json", "MAX_POINTS",
]

MAX_POINTS = 20
EXHAUSTIVE_PAIRS = 10
SAMPLED_PAIRS = 100_000
TOL = 1e-9


def _bits(mask: int, m: int) -> np.ndarray:
    return np.array([(mask >> i) & 1 for i in range(m)], dtype=float)


def _mask_matrix(m: int) -> np.ndarray:
    """Row ``k`` is the indicator of bitmask ``k``."""
    masks = np.arange(2**m)
    return ((masks[:, None] >> np.arange(m)[None, :]) & 1).astype(float)


@dataclass(frozen=True, eq=False)
class SetFunction:
    """Nonnegative monotone set function with ``P(empty) = 0``.

    Parameters
    ----------
    space : Space
        The ground set, at most ``MAX_POINTS`` points.
    values : array_like
        ``2**m`` values indexed by bitmask.
    """

    space: Space
    values: np.ndarray

    def __post_init__(self):
        m = len(self.space)
        if m > MAX_POINTS:
            raise SizeCap(f"set functions are limited to {MAX_POINTS} points")
        v = np.array(self.values, dtype=float)
        if v.shape != (2**m,):
            raise SpaceMismatch(f"expected {2**m} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise Malformed("set function values must be finite")
        if np.any(v < -TOL):
            raise Malformed("set function values must be nonnegative")
        if abs(v[0]) > TOL:
            raise Malformed("the empty set must have value 0")
        v = np.clip(v, 0.0, None)
        v[0] = 0.0
        masks = np.arange(2**m)
        for i in range(m):
            low = masks[(masks >> i) & 1 == 0]
            drop = v[low] - v[low | (1 << i)]
            if np.any(drop > TOL * (1 + np.abs(v[low]))):
                k = int(low[np.argmax(drop)])
                raise Malformed(f"not monotone: adding point {i} to subset {k:#b} lowers the value")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def m(self) -> int:
        return len(self.space)

    def __call__(self, subset) -> float:
        return float(self.values[self.mask(subset)])

    def mask(self, subset) -> int:
        """Bitmask of an int mask or an iterable of labels."""
        if isinstance(subset, (int, np.integer)):
            return int(subset)
        out = 0
        for label in subset:
            out |= 1 << self.space.index(label)
        return out

    # constructors ------------------------------------------------------

    @classmethod
    def from_callable(cls, space: Space, fn: Callable[[frozenset], float]) -> "SetFunction":
        """Tabulate ``fn`` on frozensets of point indices."""
        m = len(space)
        vals = [fn(frozenset(i for i in range(m) if (k >> i) & 1)) for k in range(2**m)]
        return cls(space, np.array(vals))

    @classmethod
    def additive(cls, space: Space, weights) -> "SetFunction":
        w = np.asarray(getattr(weights, "weights", weights), dtype=float)
        return cls(space, _mask_matrix(len(space)) @ w)

    @classmethod
    def dirac(cls, space: Space, point: int) -> "SetFunction":
        return cls(space, _mask_matrix(len(space))[:, point])

    @classmethod
    def of_cardinality(cls, space: Space, fn: Callable[[int], float]) -> "SetFunction":
        m = len(space)
        card = _mask_matrix(m).sum(axis=1).astype(int)
        return cls(space, np.array([fn(int(k)) for k in card], dtype=float))


@dataclass(frozen=True, eq=False)
class FunctionalCapacity:
    """One set function per point of ``X``.

    ``shift[x]`` is added to the raw values ``T(chi_A)(x)`` so that the
    empty set gets zero; ``functional`` evaluates the raw map on any
    function of ``Y`` when known.
    """

    X: Space
    Y: Space
    tables: tuple
    shift: np.ndarray = None
    functional: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        tabs = tuple(self.tables)
        if len(tabs) != len(self.X):
            raise SpaceMismatch("one set function per point of X is required")
        if any(t.space != self.Y for t in tabs):
            raise SpaceMismatch("every set function must live on Y")
        shift = np.zeros(len(self.X)) if self.shift is None else np.asarray(self.shift, dtype=float)
        shift.setflags(write=False)
        object.__setattr__(self, "tables", tabs)
        object.__setattr__(self, "shift", shift)

    @classmethod
    def from_operator(cls, T: KantorovichOp) -> "FunctionalCapacity":
        """Read ``A -> T(chi_A)(x) - T(0)(x)`` from an operator."""
        m = len(T.Y)
        if m > MAX_POINTS:
            raise SizeCap(f"set functions are limited to {MAX_POINTS} points")
        ind = _mask_matrix(m)
        raw = np.array([T(ind[k]) for k in range(2**m)])
        if not np.all(np.isfinite(raw)):
            raise NotCompactlyStandard("the operator is infinite on some indicator")
        shift = -raw[0]
        tabs = tuple(SetFunction(T.Y, raw[:, x] + shift[x]) for x in range(len(T.X)))
        return cls(T.X, T.Y, tabs, shift, T)

    def raw(self, x: int) -> np.ndarray:
        return self.tables[x].values - self.shift[x]


# ----------------------------------------------------------------- integrals

def _fraction(v: float) -> Fraction:
    """``v`` as a rational: a short fraction when one rounds to ``v``, else its binary value."""
    q = Fraction(v).limit_denominator(10**6)
    return q if float(q) == v else Fraction(v)


def choquet_integral(P: SetFunction, f, exact: bool = False):
    """Choquet extension of ``P`` at ``f >= 0``.

    Sort ``f`` in decreasing order and sum the gaps between consecutive
    values weighted by ``P`` of the upper level sets.  With ``exact`` the
    sum is carried out in rational arithmetic and a ``Fraction`` returned;
    inputs such as ``0.1`` are read as the short fraction they round from.
    """
    vals = np.asarray(f.values if isinstance(f, Fn) else f, dtype=float)
    if vals.shape != (P.m,):
        raise SpaceMismatch(f"function has {vals.size} values, set function has {P.m} points")
    if np.any(vals < 0):
        raise NegativeFunction("the Choquet integral is defined for nonnegative functions")
    order = np.argsort(-vals, kind="stable")
    masks = np.cumsum([1 << int(i) for i in order])
    levels = np.append(vals[order], 0.0)
    if exact:
        qs = [_fraction(float(v)) for v in levels]
        pv = [_fraction(float(P.values[k])) for k in masks]
        return sum(((qs[k] - qs[k + 1]) * pv[k] for k in range(P.m)), Fraction(0))
    return math.fsum((levels[k] - levels[k + 1]) * P.values[masks[k]] for k in range(P.m))


def _core_lp(P: SetFunction, f: np.ndarray) -> LinearProgram:
    """Dual form of ``max f @ s`` over ``s`` in the simplex with ``s(K) <= P(K)``.

    Minimize ``P @ lam + t`` subject to ``sum_K lam_K chi_K + t >= f``,
    ``lam >= 0``, ``t`` free; one row per point keeps the basis small.
    """
    m = P.m
    ind = _mask_matrix(m)[1:]
    A = np.hstack([ind.T, np.ones((m, 1))])
    lo = np.append(np.zeros(len(ind)), -np.inf)
    return LinearProgram(np.append(P.values[1:], 1.0), A, (">=",) * m, f, lo, None)


def _common(P: SetFunction) -> bool:
    # some probability below P on every subset
    m = P.m
    ind = _mask_matrix(m)[1:]
    res = solve(LinearProgram(np.zeros(m), np.vstack([ind, np.ones(m)]), ("<=",) * len(ind) + ("==",),
                              np.append(P.values[1:], 1.0)))
    return res.status is Status.OPTIMAL


def _dellacherie_one(P: SetFunction, f: np.ndarray) -> float:
    if f.shape != (P.m,):
        raise SpaceMismatch(f"function has {f.size} values, set function has {P.m} points")
    res = solve(_core_lp(P, f))
    if res.status is Status.UNBOUNDED:
        # dual unbounded below means the primal feasible set is empty
        raise NotCommon("no probability lies below the set function")
    if res.status is not Status.OPTIMAL:
        raise NotCommon(f"envelope program is {res.status.value}")
    return float(res.value)


def dellacherie_envelope(P, f):
    """``max f @ s`` over probabilities ``s`` with ``s(K) <= P(K)`` for all ``K``.

    Parameters
    ----------
    P : SetFunction or FunctionalCapacity
    f : Fn or array_like on ``Y``

    Returns
    -------
    float, or Fn on ``X`` for a functional capacity.

    Raises
    ------
    NotCommon
        When no probability lies below ``P``.
    """
    vals = np.asarray(f.values if isinstance(f, Fn) else f, dtype=float)
    if isinstance(P, FunctionalCapacity):
        return Fn(P.X, np.array([_dellacherie_one(t, vals) for t in P.tables]))
    return _dellacherie_one(P, vals)


def _ck_one(raw: np.ndarray, f: np.ndarray) -> float:
    m = f.size
    ind = _mask_matrix(m)[1:]
    # variables (s, t): maximize f @ s - t with s(K) - t <= raw(K)
    A = np.vstack([np.hstack([ind, -np.ones((len(ind), 1))]), np.append(np.ones(m), 0.0)])
    b = np.append(raw[1:], 1.0)
    lo = np.append(np.zeros(m), -np.inf)
    res = solve(LinearProgram(np.append(f, -1.0), A, ("<=",) * len(ind) + ("==",), b, lo, None, "max"))
    if res.status is not Status.OPTIMAL:
        raise NotCompactlyStandard(f"envelope program is {res.status.value}")
    return float(res.value)


def ck_envelope(T: FunctionalCapacity, f) -> Fn:
    """Choquet-Kantorovich envelope at ``f``.

    Per ``x``: ``max_s f @ s - cbar(x, s)`` with
    ``cbar(x, s) = max over nonempty K of s(K) - T(chi_K)(x)``, solved as
    one LP with a hypograph variable.
    """
    vals = np.asarray(f.values if isinstance(f, Fn) else f, dtype=float)
    if vals.shape != (len(T.Y),):
        raise SpaceMismatch("function does not live on Y")
    return Fn(T.X, np.array([_ck_one(T.raw(x), vals) for x in range(len(T.X))]))


@dataclass(frozen=True, eq=False)
class DellacherieOp(KantorovichOp):
    """``f -> dellacherie_envelope(T, f)`` as an operator."""

    capacity: FunctionalCapacity

    @property
    def X(self):
        return self.capacity.X

    @property
    def Y(self):
        return self.capacity.Y

    def evaluate_with_argmax(self, g):
        top = float(np.max(g))
        return dellacherie_envelope(self.capacity, g - top).values + top, None

    @property
    def positively_homogeneous(self):
        return True


@dataclass(frozen=True, eq=False)
class ChoquetKantorovichOp(KantorovichOp):
    """``f -> ck_envelope(T, f)`` as an operator."""

    capacity: FunctionalCapacity

    @property
    def X(self):
        return self.capacity.X

    @property
    def Y(self):
        return self.capacity.Y

    def evaluate_with_argmax(self, g):
        top = float(np.max(g))
        return ck_envelope(self.capacity, g - top).values + top, None


def induced_set_function(functional: Callable[[np.ndarray], float], Y: Space) -> SetFunction:
    """``A -> functional(chi_A)``."""
    ind = _mask_matrix(len(Y))
    return SetFunction(Y, np.array([functional(ind[k]) for k in range(len(ind))]))


# ------------------------------------------------------------ subadditivity

def strong_subadditivity_witness(P: SetFunction, seed: int = 0, tol: float = TOL):
    """A pair ``(A, B)`` with ``P(A | B) + P(A & B) > P(A) + P(B)``, or ``None``.

    Exhaustive up to ``EXHAUSTIVE_PAIRS`` points, sampled beyond.
    """
    v = P.values
    n = v.size
    if P.m <= EXHAUSTIVE_PAIRS:
        B = np.arange(n)
        for A in range(n):
            excess = v[A | B] + v[A & B] - v[A] - v[B]
            k = int(np.argmax(excess))
            if excess[k] > tol * (1 + abs(v[A]) + abs(v[k])):
                return A, k
        return None
    rng = np.random.default_rng(seed)
    A = rng.integers(0, n, SAMPLED_PAIRS)
    B = rng.integers(0, n, SAMPLED_PAIRS)
    excess = v[A | B] + v[A & B] - v[A] - v[B]
    k = int(np.argmax(excess))
    if excess[k] > tol * (1 + abs(v[A[k]]) + abs(v[B[k]])):
        return int(A[k]), int(B[k])
    return None


def is_strongly_subadditive(P: SetFunction) -> bool:
    return strong_subadditivity_witness(P) is None


def _max_below(P: SetFunction, A: int, total: float | None) -> float:
    """``max s(A)`` over ``s >= 0`` with ``s(K) <= P(K)``, optionally of mass ``total``."""
    m = P.m
    ind = _mask_matrix(m)[1:]
    rows, rel, b = [ind], ["<="] * len(ind), list(P.values[1:])
    if total is not None:
        rows.append(np.ones((1, m)))
        rel.append("==")
        b.append(total)
    res = solve(LinearProgram(_bits(A, m), np.vstack(rows), tuple(rel), np.array(b), sense="max"))
    return -np.inf if res.status is not Status.OPTIMAL else float(res.value)


def _order_infinity(P: SetFunction, total: float | None) -> bool:
    for A in range(1, 2**P.m):
        if _max_below(P, A, total) < P.values[A] - TOL * (1 + P.values[A]):
            return False
    return True


def is_subadditive_order_infinity(P: SetFunction) -> bool:
    """Every ``P(A)`` is attained by a nonnegative measure below ``P``."""
    return _order_infinity(P, None)


def is_strictly_subadditive_order_infinity(P: SetFunction) -> bool:
    """Every ``P(A)`` is attained by a measure of mass ``P(Y)`` below ``P``."""
    return _order_infinity(P, P.values[-1])


def _covering_value(P: SetFunction, A: int) -> float:
    """``min sum_K lam_K P(K) + t P(Y)`` over ``sum lam_K chi_K + t >= chi_A``, ``lam >= 0``.

    The dual of the strict order-infinity program at ``A``.
    """
    m = P.m
    ind = _mask_matrix(m)[1:]
    A_mat = np.hstack([ind.T, np.ones((m, 1))])
    lo = np.append(np.zeros(len(ind)), -np.inf)
    res = solve(LinearProgram(np.append(P.values[1:], P.values[-1]), A_mat, (">=",) * m, _bits(A, m), lo, None))
    return float(res.value) if res.status is Status.OPTIMAL else -np.inf


# --------------------------------------------------------------- saturation

@dataclass(frozen=True)
class SaturationReport:
    verdict: str          # "proven", "not falsified" or "falsified"
    witness: tuple | None = None
    tested: int = 0

    @property
    def saturated(self) -> bool:
        return self.verdict != "falsified"


def _usc_generators(m: int, rng, random_count: int = 1000) -> np.ndarray:
    """Indicators, positive combinations of up to three of them, random nonnegative vectors."""
    ind = _mask_matrix(m)[1:]
    gens = [ind]
    combos = []
    picks = rng.integers(0, len(ind), size=(min(3000, 3 * len(ind) ** 2), 3))
    for a, b, c in picks:
        w = rng.random(3)
        combos.append(w[0] * ind[a] + w[1] * ind[b] + w[2] * ind[c])
    gens.append(np.array(combos).reshape(-1, m))
    gens.append(rng.random((random_count, m)) * rng.choice([1.0, 5.0], size=(random_count, 1)))
    return np.vstack(gens)


def saturation_report(P, x: int = 0, seed: int = 0) -> SaturationReport:
    """Whether ``s <= P`` on sets forces ``s <= P`` on nonnegative functions.

    For a :class:`SetFunction` the functional is its Choquet extension, for
    which the implication holds by integrating over level sets; the verdict
    is "proven".  For a functional capacity with a known functional the
    vertices of ``{s <= P on sets}`` are probed against a generator family
    of nonnegative functions; the verdict is then "falsified" with a
    witness or "not falsified".
    """
    if isinstance(P, SetFunction):
        return SaturationReport("proven")
    if not isinstance(P, FunctionalCapacity) or P.functional is None:
        raise Malformed("saturation needs a set function or a capacity read from an operator")
    table = P.tables[x]
    m = table.m
    rng = np.random.default_rng(seed)
    ind = _mask_matrix(m)[1:]
    verts = []
    for _ in range(4 * m + 8):
        w = rng.standard_normal(m)
        res = solve(LinearProgram(w, np.vstack([ind, np.ones(m)]), ("<=",) * len(ind) + ("==",),
                                  np.append(table.values[1:], 1.0), sense="max"))
        if res.status is not Status.OPTIMAL:
            raise NotCommon(f"no probability lies below the set function at {x}")
        verts.append(res.x)
    gens = _usc_generators(m, rng)
    for f in gens:
        val = float(P.functional(f)[x]) + P.shift[x]
        for s in verts:
            if s @ f > val + 1e-7 * (1 + abs(val)):
                return SaturationReport("falsified", (s, f), len(gens))
    return SaturationReport("not falsified", None, len(gens))


def is_saturated(P, x: int = 0, seed: int = 0) -> bool:
    return saturation_report(P, x, seed).saturated


# ------------------------------------------------------------ equivalence checks

@dataclass(frozen=True)
class CapacityReport:
    strictly_subadditive_inf: bool
    envelope_matches_on_sets: bool
    mismatched_sets: tuple
    strongly_subadditive: bool
    extension_subadditive: bool
    subadditivity_witness: tuple | None
    pairs_tested: int

    @property
    def first_equivalence(self) -> bool:
        return self.strictly_subadditive_inf == self.envelope_matches_on_sets

    @property
    def second_equivalence(self) -> bool:
        return self.strongly_subadditive == self.extension_subadditive

    @property
    def passed(self) -> bool:
        return self.first_equivalence and self.second_equivalence


def capacity_theorem_check(P, samples: int = 1000, seed: int = 0) -> CapacityReport | list[CapacityReport]:
    """Instance check of the two equivalences for a set function.

    (1) The covering programs reproduce every ``P(A)`` exactly when the
    Dellacherie envelope agrees with ``P`` on every indicator.
    (2) ``P`` is strongly subadditive exactly when its Choquet extension
    is subadditive, tested on indicator pairs and ``samples`` random pairs.
    For a functional capacity one report per point is returned.
    """
    if isinstance(P, FunctionalCapacity):
        return [capacity_theorem_check(t, samples, seed) for t in P.tables]
    m = P.m
    ind = _mask_matrix(m)
    strict = all(_covering_value(P, A) >= P.values[A] - TOL * (1 + P.values[A]) for A in range(1, 2**m))
    if _common(P):
        mism = tuple(A for A in range(1, 2**m)
                     if abs(_dellacherie_one(P, ind[A]) - P.values[A]) > TOL * (1 + P.values[A]))
    else:
        mism = tuple(range(1, 2**m))
    witness = None
    # targeted: indicator sums of every pair of sets
    for A, B in itertools.product(range(2**m), repeat=2) if m <= 6 else ():
        f, g = ind[A], ind[B]
        lhs = choquet_integral(P, f + g)
        if lhs > choquet_integral(P, f) + choquet_integral(P, g) + TOL:
            witness = (f, g)
            break
    rng = np.random.default_rng(seed)
    tested = 0
    if witness is None:
        pair = strong_subadditivity_witness(P)
        if pair is not None:
            witness = (ind[pair[0]], ind[pair[1]])
    if witness is None:
        for _ in range(samples):
            f, g = rng.random(m), rng.random(m)
            tested += 1
            if choquet_integral(P, f + g) > choquet_integral(P, f) + choquet_integral(P, g) + TOL:
                witness = (f, g)
                break
    return CapacityReport(strict, not mism, mism, is_strongly_subadditive(P), witness is None, witness, tested)


# ---------------------------------------------------------------- JSON

def set_function_to_json(P: SetFunction) -> dict:
    return {"m": P.m, "values": {str(k): float(v) for k, v in enumerate(P.values) if k}}


def set_function_from_json(obj, space: Space | None = None, strict: bool = True) -> SetFunction:
    """Parse ``{"m": k, "values": {"mask": value}}``.

    Masks are integer strings (``"5"``, ``"0b101"``).  Missing masks get the
    largest stored value among their subsets (zero if none); stored values
    must already be monotone.
    """
    if not isinstance(obj, dict) or "m" not in obj or "values" not in obj:
        raise Malformed('a set function needs "m" and "values"')
    extra = set(obj) - {"m", "values", "space"}
    if extra and strict:
        raise Malformed(f"unknown set function fields {sorted(extra)}")
    m = obj["m"]
    if not isinstance(m, int) or m < 0:
        raise Malformed('"m" must be a nonnegative integer')
    if m > MAX_POINTS:
        raise SizeCap(f"set functions are limited to {MAX_POINTS} points")
    space = space if space is not None else Space.of_size(m)
    if len(space) != m:
        raise SpaceMismatch(f"space has {len(space)} points, set function {m}")
    n = 2**m
    vals = np.full(n, -np.inf)
    vals[0] = 0.0
    stored = np.zeros(n, dtype=bool)
    stored[0] = True
    for key, v in obj["values"].items():
        try:
            k = int(key, 0)
        except (TypeError, ValueError):
            raise Malformed(f"bad subset mask {key!r}") from None
        if not 0 <= k < n:
            raise Malformed(f"subset mask {key!r} outside 0..{n - 1}")
        vals[k] = float(v)
        stored[k] = True
    # missing masks take the largest stored value below them; stored values
    # are kept as given so that non-monotone input is still rejected
    best = vals.copy()
    masks = np.arange(n)
    for i in range(m):
        low = masks[(masks >> i) & 1 == 0]
        best[low | (1 << i)] = np.maximum(best[low | (1 << i)], best[low])
    return SetFunction(space, np.where(stored, vals, best))
