"""Kantorovich operators ``g -> T g`` between functions on finite spaces.

An operator maps functions on its column space ``Y`` to functions on its
row space ``X``.  The concrete operators are monotone, affine on constants
and convex; :class:`BlackBox` wraps an arbitrary callback that makes no such
promise and is meant as input to :func:`kantorovich_envelope`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import costs as _costs
from .core import Fn, Kernel, Space, require_same
from .costs import Dilation, EntropicShift, Linear, SumCost, WeakCost
from .errors import (
    BadEpsilon,
    Malformed,
    NonPositiveLambda,
    NonStandard,
    NotStandard,
    SpaceMismatch,
)
from .lp import LinearProgram, Status, solve

__all__ = [
    "KantorovichOp", "FromCost", "Markov", "Compose", "Scale", "StarSum", "Max", "SupFamily",
    "Recession", "BlackBox", "KantorovichEnvelope",
    "apply", "check_axioms", "AxiomReport", "recession", "recession_probe", "compose", "star_sum",
    "scale", "pointwise_max", "entropic", "kantorovich_envelope", "as_cost",
]


def _values(g) -> np.ndarray:
    return g.values if isinstance(g, Fn) else np.asarray(g, dtype=float)


class KantorovichOp:
    """Base class: ``X`` is the row space, ``Y`` the column space."""

    X: Space
    Y: Space

    def evaluate(self, g: np.ndarray) -> np.ndarray:
        return self.evaluate_with_argmax(g)[0]

    def evaluate_with_argmax(self, g: np.ndarray) -> tuple[np.ndarray, np.ndarray | None]:
        """Values and, where available, a maximizing probability row per point.

        The rows form a supergradient of ``g -> T g (x)``.  Rows of points
        where the value is ``-inf`` are zero.
        """
        raise NotImplementedError

    def __call__(self, g) -> np.ndarray:
        g = _values(g)
        if g.shape != (len(self.Y),):
            raise SpaceMismatch(f"function has {g.size} values, operator expects {len(self.Y)}")
        return self.evaluate(g)

    @property
    def positively_homogeneous(self) -> bool:
        return False


# ------------------------------------------------------------------ variants

@dataclass(frozen=True, eq=False)
class FromCost(KantorovichOp):
    """``T g (x) = sup_s g @ s - c(x, s)``."""

    cost: WeakCost
    X: Space
    Y: Space

    def __post_init__(self):
        if self.cost.shape != (len(self.X), len(self.Y)):
            raise SpaceMismatch(f"cost shape {self.cost.shape} does not match spaces")

    def evaluate_with_argmax(self, g):
        # shifting by max g keeps the arithmetic of constants exact
        top = float(np.max(g))
        g0 = g - top
        c = self.cost
        n, m = c.shape
        if isinstance(c, Linear):
            with np.errstate(invalid="ignore"):
                w = g0[None, :] - c.matrix
            k = np.argmax(w, axis=1)
            vals = w[np.arange(n), k]
            rows = np.zeros((n, m))
            ok = vals > -np.inf
            rows[np.flatnonzero(ok), k[ok]] = 1.0
            return vals + top, rows
        if isinstance(c, EntropicShift):
            logits = (g0[None, :] - c.base) / c.eps + np.log(c.ref)[None, :]
            mx = logits.max(axis=1)
            safe = np.where(np.isfinite(mx), mx, 0.0)
            w = np.exp(logits - safe[:, None])
            tot = w.sum(axis=1)
            vals = np.where(np.isfinite(mx), c.eps * (safe + np.log(np.where(tot > 0, tot, 1.0))), -np.inf)
            rows = np.where(np.isfinite(mx)[:, None], w / np.where(tot > 0, tot, 1.0)[:, None], 0.0)
            return vals + top, rows
        vals = np.empty(n)
        rows = np.zeros((n, m))
        for x in range(n):
            v, s = _costs.maximize_linear_minus_cost(c, x, g0)
            vals[x] = v
            if s is not None:
                rows[x] = s
        return vals + top, rows

    @property
    def positively_homogeneous(self):
        return isinstance(self.cost, Dilation) or (
            isinstance(self.cost, Linear) and np.all((self.cost.matrix == 0) | (self.cost.matrix == np.inf))
        ) or (isinstance(self.cost, SumCost) and all(
            isinstance(t, Dilation) or (isinstance(t, Linear) and np.all((t.matrix == 0) | (t.matrix == np.inf)))
            for t in self.cost.terms))


@dataclass(frozen=True, eq=False)
class Markov(KantorovichOp):
    """A linear positive unital operator ``g -> K g``."""

    kernel: Kernel

    @property
    def X(self):
        return self.kernel.row_space

    @property
    def Y(self):
        return self.kernel.col_space

    def evaluate_with_argmax(self, g):
        top = float(np.max(g))
        return self.kernel.matrix @ (g - top) + top, self.kernel.matrix.copy()

    @property
    def positively_homogeneous(self):
        return True


@dataclass(frozen=True, eq=False)
class Compose(KantorovichOp):
    """``ops[0] o ops[1] o ...``: the last operator is applied first."""

    ops: tuple

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise Malformed("compose needs at least one operator")
        for a, b in zip(ops, ops[1:]):
            if a.Y != b.X:
                raise SpaceMismatch("consecutive operators must share the intermediate space")
        object.__setattr__(self, "ops", ops)

    @property
    def X(self):
        return self.ops[0].X

    @property
    def Y(self):
        return self.ops[-1].Y

    def evaluate_with_argmax(self, g):
        vals, rows = g, None
        for op in reversed(self.ops):
            if not np.all(np.isfinite(vals)):
                raise NonStandard("an intermediate stage is not standard everywhere")
            vals, r = op.evaluate_with_argmax(vals)
            rows = r if rows is None else (r @ rows if r is not None else None)
        return vals, rows

    @property
    def positively_homogeneous(self):
        return all(op.positively_homogeneous for op in self.ops)


@dataclass(frozen=True, eq=False)
class Scale(KantorovichOp):
    """``(lam . T) g = T(lam g) / lam``."""

    lam: float
    inner: KantorovichOp

    def __post_init__(self):
        if not (np.isfinite(self.lam) and self.lam > 0):
            raise NonPositiveLambda(f"lambda must be positive, got {self.lam!r}")

    @property
    def X(self):
        return self.inner.X

    @property
    def Y(self):
        return self.inner.Y

    def evaluate_with_argmax(self, g):
        top = float(np.max(g))
        vals, rows = self.inner.evaluate_with_argmax(self.lam * (g - top))
        return vals / self.lam + top, rows

    @property
    def positively_homogeneous(self):
        return self.inner.positively_homogeneous


@dataclass(frozen=True, eq=False)
class StarSum(KantorovichOp):
    """The operator of the summed cost of two operators on the same spaces."""

    first: KantorovichOp
    second: KantorovichOp

    def __post_init__(self):
        require_same(self.first.X, self.second.X, "row spaces")
        require_same(self.first.Y, self.second.Y, "column spaces")
        for op in (self.first, self.second):
            if as_cost(op) is None:
                raise Malformed(f"{type(op).__name__} has no explicit cost to add")
        object.__setattr__(self, "_joint", FromCost(SumCost((as_cost(self.first), as_cost(self.second))),
                                                     self.first.X, self.first.Y))

    @property
    def X(self):
        return self.first.X

    @property
    def Y(self):
        return self.first.Y

    def evaluate_with_argmax(self, g):
        return self._joint.evaluate_with_argmax(g)

    @property
    def positively_homogeneous(self):
        return self._joint.positively_homogeneous


@dataclass(frozen=True, eq=False)
class Max(KantorovichOp):
    """Pointwise maximum of operators on the same spaces."""

    ops: tuple

    def __post_init__(self):
        ops = tuple(self.ops)
        if not ops:
            raise Malformed("max needs at least one operator")
        for op in ops[1:]:
            require_same(ops[0].X, op.X, "row spaces")
            require_same(ops[0].Y, op.Y, "column spaces")
        object.__setattr__(self, "ops", ops)

    @property
    def X(self):
        return self.ops[0].X

    @property
    def Y(self):
        return self.ops[0].Y

    def evaluate_with_argmax(self, g):
        results = [op.evaluate_with_argmax(g) for op in self.ops]
        vals = np.vstack([r[0] for r in results])
        k = np.argmax(vals, axis=0)
        best = vals[k, np.arange(vals.shape[1])]
        if any(r[1] is None for r in results):
            return best, None
        rows = np.vstack([results[k[x]][1][x] for x in range(len(k))])
        return best, rows

    @property
    def positively_homogeneous(self):
        return all(op.positively_homogeneous for op in self.ops)


@dataclass(frozen=True, eq=False)
class SupFamily(Max):
    """Pointwise supremum of a finite family, required to stay finite."""

    def evaluate_with_argmax(self, g):
        vals, rows = super().evaluate_with_argmax(g)
        if np.any(vals == np.inf):
            raise Malformed("the supremum of the family is not finite")
        return vals, rows


@dataclass(frozen=True, eq=False)
class Recession(KantorovichOp):
    """``g -> lim T(lam g) / lam``, evaluated through the domain of the cost."""

    inner: KantorovichOp

    def __post_init__(self):
        object.__setattr__(self, "_exact", _recession_exact(self.inner))

    @property
    def X(self):
        return self.inner.X

    @property
    def Y(self):
        return self.inner.Y

    def evaluate_with_argmax(self, g):
        return self._exact.evaluate_with_argmax(g)

    @property
    def positively_homogeneous(self):
        return True


@dataclass(frozen=True, eq=False)
class BlackBox(KantorovichOp):
    """An arbitrary map given by a callback on value arrays."""

    fn: Callable[[np.ndarray], np.ndarray]
    X: Space
    Y: Space
    standard: bool = True
    name: str = "black box"

    def evaluate_with_argmax(self, g):
        out = np.asarray(self.fn(np.asarray(g, dtype=float)), dtype=float)
        if out.shape != (len(self.X),):
            raise SpaceMismatch(f"callback returned shape {out.shape}, expected ({len(self.X)},)")
        return out, None


# ------------------------------------------------------------- constructors

def as_cost(op: KantorovichOp) -> WeakCost | None:
    """The weak cost behind an operator, when it has an explicit one."""
    if isinstance(op, FromCost):
        return op.cost
    if isinstance(op, Markov):
        return Dilation.markov(op.kernel)
    if isinstance(op, Scale):
        inner = as_cost(op.inner)
        return None if inner is None else inner.scaled(1.0 / op.lam)
    if isinstance(op, StarSum):
        return op._joint.cost
    if isinstance(op, Recession):
        return as_cost(op._exact)
    return None


def apply(T: KantorovichOp, g) -> Fn:
    """Evaluate ``T g`` as a function on ``T.X``."""
    if isinstance(g, Fn):
        require_same(g.space, T.Y, "function space and operator column space")
    return Fn(T.X, T(g))


def compose(ops: Sequence[KantorovichOp]) -> Compose:
    return Compose(tuple(ops))


def star_sum(T1: KantorovichOp, T2: KantorovichOp) -> StarSum:
    return StarSum(T1, T2)


def scale(lam: float, T: KantorovichOp) -> Scale:
    return Scale(float(lam), T)


def pointwise_max(*ops: KantorovichOp) -> Max:
    if len(ops) == 1 and not isinstance(ops[0], KantorovichOp):
        ops = tuple(ops[0])
    return Max(tuple(ops))


def entropic(base, eps: float, ref, X: Space, Y: Space) -> FromCost:
    """Soft-max operator ``eps * log sum_y ref(y) exp((g(y) - c(x, y)) / eps)``."""
    if not (np.isfinite(eps) and eps > 0):
        raise BadEpsilon(f"eps must be positive, got {eps!r}")
    matrix = base.matrix if isinstance(base, Linear) else base
    return FromCost(EntropicShift(matrix, eps, ref), X, Y)


def _recession_exact(T: KantorovichOp) -> KantorovichOp:
    if isinstance(T, FromCost):
        rc = T.cost.recession()
        out = FromCost(rc, T.X, T.Y)
        if np.any(out.evaluate(np.zeros(len(T.Y))) == -np.inf):
            raise NonStandard("some point has an empty cost domain")
        return out
    if isinstance(T, (Markov, Recession)):
        return T
    if isinstance(T, Scale):
        return _recession_exact(T.inner)
    if isinstance(T, StarSum):
        return _recession_exact(T._joint)
    if isinstance(T, Max):
        return Max(tuple(_recession_exact(op) for op in T.ops))
    if isinstance(T, Compose):
        return Compose(tuple(_recession_exact(op) for op in T.ops))
    raise Malformed(f"no exact recession for {type(T).__name__}")


def recession(T: KantorovichOp) -> Recession:
    """The positively homogeneous limit of ``T(lam g) / lam``."""
    return Recession(T)


def recession_probe(T: KantorovichOp, g, lambdas=(1.0, 10.0, 100.0, 1000.0)) -> np.ndarray:
    """Rows of ``T(lam g) / lam`` for each ``lam``; nondecreasing in ``lam`` when the cost is nonnegative."""
    g = _values(g)
    return np.vstack([Scale(lam, T)(g) for lam in lambdas])


# ---------------------------------------------------------------- axioms

@dataclass
class AxiomReport:
    monotone: bool = True
    affine_on_constants: bool = True
    convex: bool = True
    lipschitz: bool = True
    witnesses: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.monotone and self.affine_on_constants and self.convex and self.lipschitz


def check_axioms(T: KantorovichOp, sample_count: int = 100, seed: int = 0, tol: float = 1e-9) -> AxiomReport:
    """Randomized test of the four Kantorovich axioms.

    Each failing axiom is reported with the first witness found.
    """
    rng = np.random.default_rng(seed)
    m = len(T.Y)
    rep = AxiomReport()

    def finite_rows(*vals):
        ok = np.ones(len(T.X), dtype=bool)
        for v in vals:
            ok &= np.isfinite(v)
        return ok

    for _ in range(sample_count):
        scale_ = rng.choice([0.1, 1.0, 10.0])
        g = rng.standard_normal(m) * scale_
        h = rng.standard_normal(m) * scale_
        Tg, Th = T(g), T(h)
        ok = finite_rows(Tg, Th)

        up = g + np.abs(rng.standard_normal(m)) * scale_
        Tu = T(up)
        if rep.monotone and np.any((Tu < Tg - tol * (1 + np.abs(Tg)))[ok]):
            rep.monotone = False
            rep.witnesses["monotone"] = (g, up)

        c = float(rng.standard_normal() * 10)
        Tc = T(g + c)
        if rep.affine_on_constants and np.any((np.abs(Tc - Tg - c) > 1e-12 * (1 + np.abs(Tg) + abs(c)))[ok]):
            rep.affine_on_constants = False
            rep.witnesses["affine_on_constants"] = (g, c)

        lam = float(rng.uniform())
        Tmix = T(lam * g + (1 - lam) * h)
        if rep.convex and np.any((Tmix > lam * Tg + (1 - lam) * Th + tol * (1 + np.abs(Tg) + np.abs(Th)))[ok]):
            rep.convex = False
            rep.witnesses["convex"] = (g, h, lam)

        if rep.lipschitz and np.any((np.abs(Tg - Th) > np.max(np.abs(g - h)) + tol * (1 + np.abs(Tg)))[ok]):
            rep.lipschitz = False
            rep.witnesses["lipschitz"] = (g, h)
    return rep


# ----------------------------------------------------------- envelope

ENVELOPE_TOL = 1e-6
ENVELOPE_MAX_ITER = 10_000


@dataclass(frozen=True, eq=False)
class KantorovichEnvelope(KantorovichOp):
    """Largest Kantorovich operator below a black box.

    ``cost(x, s)`` is the conjugate ``sup_h h @ s - T h (x)`` over the box
    ``|h - center| <= radius``; evaluation runs a cutting-plane method over
    probability vectors whose cuts come from approximately solving that
    conjugate problem.  Values are upper bounds that never exceed ``T``.
    """

    inner: KantorovichOp
    radius: float | None = None
    tol: float = ENVELOPE_TOL
    max_iter: int = ENVELOPE_MAX_ITER

    @property
    def X(self):
        return self.inner.X

    @property
    def Y(self):
        return self.inner.Y

    def _radius(self, g):
        if self.radius is not None:
            return float(self.radius)
        return 1e3 * max(1.0, float(np.max(np.abs(g))))

    def cost(self, x: int, s, center=None) -> float:
        """Box-restricted conjugate ``sup_h h @ s - T h (x)``."""
        s = np.asarray(s, dtype=float)
        c0 = np.zeros(len(self.Y)) if center is None else np.asarray(center, dtype=float)
        R = self._radius(c0)
        return _Conjugator(self.inner, x, c0, R, self.tol).maximize(s, [c0])[1]

    def evaluate_with_argmax(self, g):
        g = np.asarray(g, dtype=float)
        R = self._radius(g)
        Tg = self.inner.evaluate(g)
        grads = _fd_gradient(self.inner, g)
        vals = np.empty(len(self.X))
        rows = np.zeros((len(self.X), len(self.Y)))
        for x in range(len(self.X)):
            vals[x], rows[x] = self._point(x, g, Tg[x], grads[x], R)
        return vals, rows

    def _point(self, x, g, Tgx, grad, R):
        conj = _Conjugator(self.inner, x, g, R, self.tol)
        cuts_h = [g.copy()]
        cuts_v = [Tgx]
        s = _project_simplex(grad)
        best_lower = -np.inf
        upper = Tgx
        best_s = s
        for it in range(self.max_iter):
            h, psi = conj.maximize(s, cuts_h)
            lower = float(g @ s) - psi
            if lower > best_lower:
                best_lower, best_s = lower, s
            if upper - best_lower <= self.tol * (1 + abs(upper)):
                break
            cuts_h.append(h)
            cuts_v.append(conj.value(h))
            upper, s = _master(g, cuts_h, cuts_v)
        else:
            raise NotStandard(f"envelope cutting planes did not close the gap at point {x}")
        if best_lower < -0.5 * R:
            raise NotStandard(f"conjugate at point {x} is driven by the probe box")
        return upper, best_s


def _master(g, hs, vs):
    """``max_s min_k (g - h_k) @ s + v_k`` over probability vectors."""
    m = g.size
    k = len(hs)
    # variables: s (m), t (free)
    A = np.zeros((k + 1, m + 1))
    b = np.zeros(k + 1)
    for i, (h, v) in enumerate(zip(hs, vs)):
        A[i, :m] = -(g - h)
        A[i, m] = 1.0
        b[i] = v
    A[k, :m] = 1.0
    b[k] = 1.0
    lo = np.append(np.zeros(m), -np.inf)
    res = solve(LinearProgram(np.append(np.zeros(m), 1.0), A, ("<=",) * k + ("==",), b, lo, None, "max"))
    if res.status is not Status.OPTIMAL:
        raise NotStandard(f"envelope master problem is {res.status.value}")
    s = np.clip(res.x[:m], 0, None)
    return res.value, s / s.sum()


class _Conjugator:
    """Cutting-plane maximization of ``h @ s - T h (x)`` over a box."""

    def __init__(self, T, x, center, radius, tol):
        self.T, self.x, self.center, self.R, self.tol = T, x, center, radius, tol
        self._cache: dict[bytes, tuple[float, np.ndarray]] = {}

    def value(self, h):
        return self._eval(h)[0]

    def _eval(self, h):
        key = h.tobytes()
        if key not in self._cache:
            val = float(self.T.evaluate(h)[self.x])
            grad = _fd_gradient(self.T, h)[self.x]
            self._cache[key] = (val, grad)
        return self._cache[key]

    def maximize(self, s, starts):
        m = s.size
        pts = []
        best_h, best = None, -np.inf
        for h in starts:
            v, gr = self._eval(h)
            pts.append((h, v, gr))
            if float(h @ s) - v > best:
                best, best_h = float(h @ s) - v, h
        lo = np.append(self.center - self.R, -np.inf)
        up = np.append(self.center + self.R, np.inf)
        for _ in range(200):
            # model: t <= (h_j @ s - v_j) + (s - grad_j) @ (h - h_j)
            A = np.zeros((len(pts), m + 1))
            b = np.zeros(len(pts))
            for i, (hj, vj, gj) in enumerate(pts):
                A[i, :m] = -(s - gj)
                A[i, m] = 1.0
                b[i] = float(hj @ s) - vj - float((s - gj) @ hj)
            res = solve(LinearProgram(np.append(np.zeros(m), 1.0), A, ("<=",) * len(pts), b, lo, up, "max"))
            model = res.value
            if model - best <= 0.1 * self.tol * (1 + abs(best)):
                break
            h = res.x[:m]
            v, gr = self._eval(h)
            pts.append((h, v, gr))
            val = float(h @ s) - v
            if val > best:
                best, best_h = val, h
        return best_h, best


def _fd_gradient(T: KantorovichOp, g: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian rows ``d T g (x) / d g(y)``."""
    m = g.size
    step = 1e-6 * (1.0 + float(np.max(np.abs(g))))
    out = np.empty((len(T.X), m))
    for j in range(m):
        e = np.zeros(m)
        e[j] = step
        out[:, j] = (T.evaluate(g + e) - T.evaluate(g - e)) / (2 * step)
    return out


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.flatnonzero(u - css / k > 0)[-1]
    return np.maximum(v - css[rho] / (rho + 1), 0.0)


def kantorovich_envelope(T: KantorovichOp, radius: float | None = None, tol: float = ENVELOPE_TOL,
                         max_iter: int = ENVELOPE_MAX_ITER) -> KantorovichEnvelope:
    """Wrap ``T`` so that evaluation returns its Kantorovich envelope."""
    if isinstance(T, BlackBox) and not T.standard:
        raise NotStandard("the black box is declared non-standard")
    return KantorovichEnvelope(T, radius, tol, max_iter)
