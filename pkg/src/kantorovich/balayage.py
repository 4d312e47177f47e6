"""Balayage cones, orders and envelopes on finite spaces.

A cone of test functions orders measures by ``mu < nu`` when every test
function has a smaller integral against ``mu`` than against ``nu``.  Three
presentations are supported: explicit generators, the convex order of
Euclidean points, and the cone induced by a family of dilation polytopes
(equivalently a positively homogeneous Kantorovich operator).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .core import (
    Coupling,
    Fn,
    Kernel,
    Measure,
    Space,
    disintegrate,
    make_measure,
    require_same,
)
from .costs import Dilation, domain_polytope
from .errors import (
    EmptyRow,
    IterationDiverges,
    Malformed,
    NonStandard,
    NotCommon,
    OrderFails,
    SizeCap,
    SpaceMismatch,
)
from .lp import LinearProgram, Status, solve
from .operators import FromCost, KantorovichOp, as_cost, check_axioms
from .polytope import Polytope
from .transfers import Transfer, _kelley, eval_primal

__all__ = [
    "Generators", "ConvexOrder", "OperatorInduced", "DilationFamily", "convex_generators",
    "order_check", "strassen_kernel", "gambling_house_check", "GamblingHouseReport",
    "transfer_set_equiv", "true_envelope", "envelope_trace", "EnvelopeOperator",
    "idempotent_check", "transitive_diag_check", "TransitivityReport", "minimal_transfer_set",
]

ITER_TOL = 1e-9
ITER_CAP = 100_000
SLACK = 1e-9
MAX_DENOMINATOR = 10**6


# ----------------------------------------------------------------- families

@dataclass(frozen=True, eq=False)
class DilationFamily:
    """Per point ``x`` of ``X`` a nonempty polytope ``D(x)`` of measures on ``Y``."""

    X: Space
    Y: Space
    polytopes: tuple

    def __post_init__(self):
        polys = tuple(self.polytopes)
        if len(polys) != len(self.X):
            raise SpaceMismatch(f"{len(polys)} polytopes for {len(self.X)} points")
        if any(P.size != len(self.Y) for P in polys):
            raise SpaceMismatch("every polytope must live on Y")
        object.__setattr__(self, "polytopes", polys)

    @classmethod
    def barycentric(cls, X: Space, Y: Space) -> "DilationFamily":
        """Measures on ``Y`` whose barycenter is ``x``: the convex order."""
        if X.coords is None or Y.coords is None:
            raise Malformed("the barycentric family needs coordinates")
        return cls(X, Y, Dilation.barycentric(X.coords, Y.coords).family)

    @classmethod
    def markov(cls, X: Space, Y: Space, kernel) -> "DilationFamily":
        return cls(X, Y, Dilation.markov(kernel).family)

    @classmethod
    def identity(cls, X: Space) -> "DilationFamily":
        return cls(X, X, Dilation.markov(np.eye(len(X))).family)

    @classmethod
    def full(cls, X: Space, Y: Space) -> "DilationFamily":
        return cls(X, Y, tuple(Polytope.simplex(len(Y)) for _ in range(len(X))))

    @property
    def cost(self) -> Dilation:
        return Dilation(self.polytopes)

    @property
    def operator(self) -> FromCost:
        """``g -> max over D(x) of g @ s``."""
        return FromCost(self.cost, self.X, self.Y)

    def empty_rows(self) -> list[int]:
        return [x for x, P in enumerate(self.polytopes) if P.is_empty()]


def family_of(T) -> DilationFamily:
    """The dilation family behind a family, a transfer or an explicit operator."""
    if isinstance(T, DilationFamily):
        return T
    if isinstance(T, Transfer):
        return minimal_transfer_set(T)
    if isinstance(T, KantorovichOp):
        c = as_cost(T)
        if c is None:
            raise Malformed(f"{type(T).__name__} does not expose a cost; no dilation family")
        return minimal_transfer_set(Transfer(c, T.X, T.Y))
    raise Malformed(f"cannot read a dilation family from {type(T).__name__}")


# -------------------------------------------------------------------- cones

@dataclass(frozen=True, eq=False)
class Generators:
    """Cone generated by explicit test functions.

    Each generator is a pair ``(phi_X, phi_Y)``; a single array is used on
    both sides when ``X == Y``.  Constants are implicitly included.
    """

    X: Space
    Y: Space
    functions: tuple

    def __post_init__(self):
        pairs = []
        for phi in self.functions:
            if isinstance(phi, Fn):
                phi = phi.values
            if isinstance(phi, tuple):
                a, b = (np.asarray(v, dtype=float) for v in phi)
            else:
                if self.X != self.Y:
                    raise SpaceMismatch("one-sided generators need X == Y")
                a = b = np.asarray(phi, dtype=float)
            if a.shape != (len(self.X),) or b.shape != (len(self.Y),):
                raise SpaceMismatch("generator values do not match the spaces")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise Malformed("generators must be finite")
            pairs.append((a, b))
        object.__setattr__(self, "functions", tuple(pairs))


@dataclass(frozen=True)
class ConvexOrder:
    """Comparison of all convex functions of the coordinates."""

    dim: int = 1


@dataclass(frozen=True, eq=False)
class OperatorInduced:
    """Cone induced by a positively homogeneous operator with a dilation family."""

    operator: KantorovichOp
    family: DilationFamily = field(init=False)

    def __post_init__(self):
        T = self.operator
        rng = np.random.default_rng(0)
        for _ in range(5):
            g = rng.standard_normal(len(T.Y))
            if not np.allclose(T(2 * g), 2 * T(g), atol=1e-9, rtol=1e-9):
                raise Malformed("the operator is not positively homogeneous")
        object.__setattr__(self, "family", family_of(T))


def convex_generators(X: Space, Y: Space) -> Generators:
    """``1, x, -x`` and ``(x - t)_+`` for every knot ``t`` of ``X`` and ``Y`` (1-D)."""
    if X.dim != 1 or Y.dim != 1:
        raise Malformed("convex generators are built for 1-D grids")
    xs, ys = X.coords[:, 0], Y.coords[:, 0]
    knots = np.unique(np.concatenate([xs, ys]))
    funcs = [(np.ones_like(xs), np.ones_like(ys)), (xs, ys), (-xs, -ys)]
    funcs += [(np.maximum(xs - t, 0.0), np.maximum(ys - t, 0.0)) for t in knots]
    return Generators(X, Y, tuple(funcs))


# -------------------------------------------------------------- order check

def _as_fraction(v: float):
    # a generic float is within 1e-18 of some q/p with p <= 1e9, so the
    # denominator bound has to be far below that to mean anything
    q = Fraction(v).limit_denominator(MAX_DENOMINATOR)
    return q if float(q) == v else None


def _rational(*arrays) -> list | None:
    out = []
    for a in arrays:
        qs = [_as_fraction(float(v)) for v in np.ravel(a)]
        if any(q is None for q in qs):
            return None
        out.append(qs)
    return out


def _generators_hold(cone: Generators, mu: Measure, nu: Measure, exact: bool | None) -> bool:
    for a, b in cone.functions:
        rat = _rational(a, b, mu.weights, nu.weights) if exact is not False else None
        if rat is not None:
            qa, qb, qm, qn = rat
            lhs = sum(x * y for x, y in zip(qa, qm))
            rhs = sum(x * y for x, y in zip(qb, qn))
            if lhs > rhs:
                return False
        else:
            lhs, rhs = float(a @ mu.weights), float(b @ nu.weights)
            if lhs > rhs + SLACK * (1 + abs(lhs)):
                return False
    return True


def _kernel_lp(mu: Measure, nu: Measure, row_blocks) -> tuple[Status, np.ndarray | None]:
    """Feasibility of a coupling with per-row homogeneous constraints.

    ``row_blocks(x)`` returns ``(A_eq, b_eq, A_ub, b_ub)`` acting on the
    row ``pi(x, .)`` with right-hand sides scaled by ``mu(x)``.
    """
    n, m = len(mu.space), len(nu.space)
    rows, rhs, rel = [], [], []
    for x in range(n):
        r = np.zeros(n * m)
        r[x * m:(x + 1) * m] = 1.0
        rows.append(r)
        rhs.append(mu.weights[x])
        rel.append("==")
    for y in range(m):
        r = np.zeros(n * m)
        r[y::m] = 1.0
        rows.append(r)
        rhs.append(nu.weights[y])
        rel.append("==")
    for x in range(n):
        for A, b, relation in row_blocks(x):
            for a_row, b_val in zip(A, b):
                r = np.zeros(n * m)
                r[x * m:(x + 1) * m] = a_row
                rows.append(r)
                rhs.append(mu.weights[x] * b_val)
                rel.append(relation)
    res = solve(LinearProgram(np.zeros(n * m), np.array(rows), tuple(rel), np.array(rhs)))
    if res.status is not Status.OPTIMAL:
        return res.status, None
    return res.status, np.clip(res.x.reshape(n, m), 0, None)


def _convex_blocks(mu: Measure, nu: Measure, dim: int):
    X, Y = mu.space, nu.space
    if X.coords is None or Y.coords is None or X.dim != dim or Y.dim != dim:
        raise Malformed(f"the convex order needs {dim}-dimensional coordinates on both spaces")

    def blocks(x):
        # barycenter of the row equals x
        return [(Y.coords.T, X.coords[x], "==")]

    return blocks


def _family_blocks(fam: DilationFamily):
    def blocks(x):
        P = fam.polytopes[x]
        if P.is_vertex_list:
            raise NotCommon("vertex-listed polytopes go through the transfer route")
        out = []
        if P.A_eq.shape[0]:
            out.append((P.A_eq, P.b_eq, "=="))
        if P.A_ub.shape[0]:
            out.append((P.A_ub, P.b_ub, "<="))
        return out

    return blocks


def _generator_blocks(cone: Generators):
    def blocks(x):
        # delta_x below the row for every generator
        return [(np.array([b for _, b in cone.functions]), np.array([a[x] for a, _ in cone.functions]), ">=")]

    return blocks


def _check_spaces(cone, mu: Measure, nu: Measure) -> None:
    if isinstance(cone, Generators):
        require_same(mu.space, cone.X, "mu and the cone's X")
        require_same(nu.space, cone.Y, "nu and the cone's Y")
    elif isinstance(cone, (OperatorInduced, DilationFamily)):
        fam = cone.family if isinstance(cone, OperatorInduced) else cone
        require_same(mu.space, fam.X, "mu and the family's X")
        require_same(nu.space, fam.Y, "nu and the family's Y")


def order_check(cone, mu: Measure, nu: Measure, exact: bool | None = None) -> bool:
    """Whether ``mu`` precedes ``nu`` in the order of ``cone``.

    Parameters
    ----------
    cone : Generators, ConvexOrder, OperatorInduced or DilationFamily
    exact : bool, optional
        For generators: compare in rational arithmetic.  The default does so
        when every input is a float with a small-denominator rational value.
    """
    _check_spaces(cone, mu, nu)
    if isinstance(cone, Generators):
        return _generators_hold(cone, mu, nu, exact)
    if isinstance(cone, ConvexOrder):
        status, _ = _kernel_lp(mu, nu, _convex_blocks(mu, nu, cone.dim))
        return status is Status.OPTIMAL
    fam = cone.family if isinstance(cone, OperatorInduced) else cone
    if isinstance(fam, DilationFamily):
        return eval_primal(Transfer(fam.cost, fam.X, fam.Y), mu, nu).finite
    raise Malformed(f"unknown cone type {type(cone).__name__}")


def strassen_kernel(cone, mu: Measure, nu: Measure) -> Kernel:
    """A kernel with ``delta_x`` below ``pi_x`` in the cone's order, pushing ``mu`` to ``nu``.

    Raises
    ------
    OrderFails
        When no such kernel exists.
    """
    _check_spaces(cone, mu, nu)
    if isinstance(cone, ConvexOrder):
        status, P = _kernel_lp(mu, nu, _convex_blocks(mu, nu, cone.dim))
    elif isinstance(cone, Generators):
        status, P = _kernel_lp(mu, nu, _generator_blocks(cone))
    else:
        fam = cone.family if isinstance(cone, OperatorInduced) else cone
        res = eval_primal(Transfer(fam.cost, fam.X, fam.Y), mu, nu)
        if not res.finite:
            raise OrderFails("no dilation kernel carries mu to nu")
        return res.kernel
    if status is not Status.OPTIMAL:
        raise OrderFails("no dilation kernel carries mu to nu")
    return disintegrate(Coupling(mu.space, nu.space, P / P.sum()))[1]


# ----------------------------------------------------- gambling houses

@dataclass(frozen=True, eq=False)
class GamblingHouseReport:
    nonempty: tuple
    operator: KantorovichOp
    cone: OperatorInduced
    homogeneous: bool
    axioms_hold: bool
    samples: int
    disagreements: list

    @property
    def passed(self) -> bool:
        return all(self.nonempty) and self.homogeneous and self.axioms_hold and not self.disagreements


def gambling_house_check(S: DilationFamily, samples: int = 50, seed: int = 0) -> GamblingHouseReport:
    """Verify the equivalent presentations of a dilation family on samples.

    Checks nonemptiness of every ``D(x)``, that the induced operator is a
    positively homogeneous Kantorovich operator, and that membership of
    random pairs through kernels agrees with the dual test
    ``nu @ g <= mu @ T g`` for all ``g``.

    Raises
    ------
    EmptyRow
        When some ``D(x)`` is empty.
    """
    empty = S.empty_rows()
    if empty:
        raise EmptyRow(f"D(x) is empty at {[S.X.labels[x] for x in empty]}")
    T = S.operator
    rng = np.random.default_rng(seed)
    homog = all(np.allclose(T(lam * g), lam * T(g), atol=1e-9)
                for g in rng.standard_normal((5, len(S.Y))) for lam in (0.5, 3.0))
    axioms = check_axioms(T, sample_count=20, seed=seed).passed
    cone = transfer_set_equiv(S)[0]
    bad = []
    for k in range(samples):
        mu = _random_measure(S.X, rng)
        if k % 2 == 0:
            nu = make_measure(S.Y, _push_inside(S, mu, rng))
        else:
            nu = _random_measure(S.Y, rng)
        primal = eval_primal(Transfer(S.cost, S.X, S.Y), mu, nu).finite
        dual = _dual_domain_test(T, mu, nu)
        if primal != dual:
            bad.append((mu, nu, primal, dual))
    return GamblingHouseReport(tuple(True for _ in S.polytopes), T, cone, homog, axioms, samples, bad)


def _random_measure(S: Space, rng) -> Measure:
    w = rng.random(len(S)) + 0.05
    w[rng.random(len(S)) < 0.3] = 0.0
    if w.sum() == 0:
        w[0] = 1.0
    return make_measure(S, w / w.sum())


def _push_inside(S: DilationFamily, mu: Measure, rng) -> np.ndarray:
    nu = np.zeros(len(S.Y))
    for x in np.flatnonzero(mu.weights > 0):
        P = S.polytopes[x]
        _, s = P.maximize(rng.standard_normal(len(S.Y)))
        _, t = P.maximize(rng.standard_normal(len(S.Y)))
        lam = rng.random()
        nu += mu.weights[x] * (lam * s + (1 - lam) * t)
    return nu / nu.sum()


def _dual_domain_test(T: KantorovichOp, mu: Measure, nu: Measure) -> bool:
    """``nu @ g <= mu @ T g`` for every ``g``, by maximizing the difference on a box."""
    _, val, _, _ = _kelley(T, mu.weights, nu.weights, 1.0, 1e-12, 500)
    return val <= 1e-9


def transfer_set_equiv(S: DilationFamily) -> tuple[OperatorInduced, KantorovichOp]:
    """The cone and the positively homogeneous operator of a gambling house."""
    T = S.operator
    return OperatorInduced(T), T


# ---------------------------------------------------------------- envelopes

def _same_space(fam: DilationFamily) -> None:
    if fam.X != fam.Y:
        raise SpaceMismatch("envelopes need X == Y")


def envelope_trace(T, f, tol: float = ITER_TOL, cap: int = ITER_CAP) -> list[np.ndarray]:
    """Iterates of ``f -> max(T f, f)`` up to a fixed point.

    Stops when the sup-norm increment drops below ``tol``.  Raises
    :class:`IterationDiverges` at the cap or when increments stop shrinking
    while the iterates grow without bound.
    """
    op = T.operator if isinstance(T, DilationFamily) else T
    cur = np.asarray(f.values if isinstance(f, Fn) else f, dtype=float)
    trace = [cur]
    start_scale = 1.0 + np.max(np.abs(cur))
    for _ in range(cap):
        nxt = np.maximum(op(cur), cur)
        step = float(np.max(nxt - cur))
        trace.append(nxt)
        cur = nxt
        if step < tol:
            return trace
        if np.max(np.abs(cur)) > 1e12 * start_scale:
            raise IterationDiverges("iterates grow without bound")
    raise IterationDiverges(f"no fixed point after {cap} iterations")


def _superharmonic_lp(fam: DilationFamily, f: np.ndarray) -> np.ndarray:
    """Smallest ``phi >= f`` with ``phi(x) >= phi @ v`` for every vertex ``v`` of ``D(x)``.

    Solved through its dual, which has one row per point: maximize
    ``f @ a`` subject to ``a + sum b_{x,v} (e_x - v) = 1`` with ``a, b >= 0``;
    ``phi`` is read off the row sensitivities.
    """
    m = len(f)
    cols = [np.eye(m)]
    for x, P in enumerate(fam.polytopes):
        V = P.vertex_list()
        cols.append((np.eye(m)[x][None, :] - V).T)
    A = np.hstack(cols)
    res = solve(LinearProgram(np.concatenate([f, np.zeros(A.shape[1] - m)]), A, ("==",) * m, np.ones(m),
                              sense="max"))
    if res.status is not Status.OPTIMAL:
        raise Malformed(f"envelope program is {res.status.value}")
    return res.dual


def _superharmonic_cuts(fam: DilationFamily, f: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Same program by constraint generation with per-point separation."""
    m = len(f)
    rows: list[np.ndarray] = []
    while True:
        A = np.vstack([np.eye(m)] + rows) if rows else np.eye(m)
        b = np.concatenate([f, np.zeros(len(rows))])
        res = solve(LinearProgram(np.ones(m), A, (">=",) * A.shape[0], b, -np.inf, np.inf))
        phi = res.x
        added = False
        for x, P in enumerate(fam.polytopes):
            val, v = P.maximize(phi)
            if val > phi[x] + tol * (1 + abs(phi[x])):
                rows.append(np.eye(m)[x] - v)
                added = True
        if not added:
            return phi


def true_envelope(T, f, *, cross_check: bool = True) -> Fn:
    """Smallest fixed point of ``max(T ., .)`` above ``f``.

    Computed as a linear program over superharmonic majorants and checked
    against the fixed-point iteration to ``1e-6``.

    Parameters
    ----------
    T : DilationFamily, Transfer or KantorovichOp on ``X == X``
    f : Fn or array_like
    """
    fam = family_of(T)
    _same_space(fam)
    vals = np.asarray(f.values if isinstance(f, Fn) else f, dtype=float)
    if vals.shape != (len(fam.X),):
        raise SpaceMismatch("function does not live on the family's space")
    try:
        phi = _superharmonic_lp(fam, vals)
    except SizeCap:
        phi = _superharmonic_cuts(fam, vals)
    if cross_check:
        try:
            it = envelope_trace(fam, vals)[-1]
        except IterationDiverges as exc:
            raise IterationDiverges(f"{exc}; program value {phi.tolist()}") from None
        if np.max(np.abs(it - phi)) > 1e-6:
            raise IterationDiverges(f"iteration and program differ by {np.max(np.abs(it - phi)):.3g}")
    return Fn(fam.X, phi)


@dataclass(frozen=True, eq=False)
class EnvelopeOperator(KantorovichOp):
    """``f -> f_hat``, the closure of a dilation family."""

    family: DilationFamily

    @property
    def X(self):
        return self.family.X

    @property
    def Y(self):
        return self.family.Y

    def evaluate_with_argmax(self, g):
        return true_envelope(self.family, g, cross_check=False).values, None

    @property
    def positively_homogeneous(self):
        return True


def idempotent_check(T: KantorovichOp, samples: int = 50, seed: int = 0, tol: float = 1e-8) -> bool:
    """``T(T g) = T g`` and ``T g >= g`` on random ``g``."""
    if T.X != T.Y:
        raise SpaceMismatch("idempotence needs X == Y")
    rng = np.random.default_rng(seed)
    for _ in range(samples):
        g = rng.standard_normal(len(T.Y))
        Tg = T(g)
        if np.any(Tg < g - 1e-9) or np.max(np.abs(T(Tg) - Tg)) > tol:
            return False
    return True


@dataclass(frozen=True)
class TransitivityReport:
    diagonal: bool
    transitive: bool
    missing_diagonal: tuple
    failures: int

    @property
    def passed(self) -> bool:
        return self.diagonal and self.transitive


def transitive_diag_check(S: DilationFamily, samples: int = 50, seed: int = 0) -> TransitivityReport:
    """Whether the order of ``S`` contains the diagonal and is transitive.

    The diagonal holds exactly when ``delta_x`` lies in every ``D(x)``.
    Transitivity is sampled: ``mu -> sigma -> nu`` through random kernels,
    then ``(mu, nu)`` is tested directly.
    """
    _same_space(S)
    m = len(S.X)
    missing = tuple(x for x in range(m) if not S.polytopes[x].contains(np.eye(m)[x]))
    rng = np.random.default_rng(seed)
    fails = 0
    T = Transfer(S.cost, S.X, S.Y)
    for _ in range(samples):
        mu = _random_measure(S.X, rng)
        sigma = make_measure(S.Y, _push_inside(S, mu, rng))
        nu = make_measure(S.Y, _push_inside(S, sigma, rng))
        if not eval_primal(T, mu, nu).finite:
            fails += 1
    return TransitivityReport(not missing, fails == 0, missing, fails)


def minimal_transfer_set(t: Transfer, samples: int = 10, seed: int = 0) -> DilationFamily:
    """The domains ``dom c(x, .)`` as a dilation family.

    Sampled pairs in the domain of ``t`` are checked to lie in the domain of
    the family.

    Raises
    ------
    NonStandard
        When some ``c(x, .)`` has empty domain.
    """
    bad = [x for x, ok in enumerate(t.standard) if not ok]
    if bad:
        raise NonStandard(f"empty cost domain at {[t.X.labels[x] for x in bad]}")
    fam = DilationFamily(t.X, t.Y, tuple(domain_polytope(t.cost, x) for x in range(len(t.X))))
    rng = np.random.default_rng(seed)
    rec = Transfer(fam.cost, fam.X, fam.Y)
    for _ in range(samples):
        mu = _random_measure(t.X, rng)
        nu = make_measure(t.Y, _push_inside(fam, mu, rng))
        if eval_primal(t, mu, nu).finite and not eval_primal(rec, mu, nu).finite:
            raise NonStandard("a pair in the transfer's domain leaves the domain family")
    return fam
