"""Weak transport costs ``c(x, s)``: convex in the probability vector ``s``.

Six families are provided:

``Linear``           ``sum_y c[x, y] s[y]`` (entries may be ``inf``)
``BarycentricPL``    a finite max of affine functions of the mean of ``s``
``BarycentricQuad``  ``0.5 * scale * |mean(s) - coords(x)|^2``
``Dilation``         ``0`` on a polytope ``D(x)``, ``inf`` off it
``EntropicShift``    linear cost plus ``eps * KL(s | ref)``
``SumCost``          pointwise sum of the above

Points of ``X`` are passed as integer indices; probability vectors and
functions on ``Y`` may be given as arrays or as :class:`Measure`/:class:`Fn`.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._program import CouplingProgram, EntropyTerm, QuadTerm, away_frank_wolfe
from .core import Fn, Measure, decode_real, encode_real, ext_add, integrate
from .errors import BadEpsilon, DimensionMismatch, Malformed
from .lp import Status
from .polytope import Polytope

__all__ = [
    "WeakCost", "Linear", "BarycentricPL", "BarycentricQuad", "Dilation", "EntropicShift", "SumCost",
    "eval_cost", "maximize_linear_minus_cost", "domain_support", "domain_polytope", "recession_cost", "scale_cost",
    "cost_to_json", "cost_from_json", "FW_TOL", "FW_MAX_ITER",
]

FW_TOL = 1e-8
FW_MAX_ITER = 10_000


def _vec(v) -> np.ndarray:
    if isinstance(v, Measure):
        return v.weights
    if isinstance(v, Fn):
        return v.values
    return np.asarray(v, dtype=float)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class WeakCost:
    """Base class.  Subclasses are immutable dataclasses."""

    shape: tuple[int, int]
    #: True when every part can be written with linear rows.
    lp_representable: bool = True

    def forbidden(self, x: int) -> np.ndarray:
        """Points of ``Y`` that ``c(x, .)`` forbids outright."""
        return np.zeros(self.shape[1], dtype=bool)

    def value(self, x: int, s: np.ndarray) -> float:
        raise NotImplementedError

    def emit(self, prog: CouplingProgram, x: int, idx: np.ndarray, valid: np.ndarray) -> None:
        """Add this cost for row ``x`` to ``prog``.

        ``idx[y]`` is the variable holding the mass sent to ``y``; only the
        entries flagged in ``valid`` exist (the others are fixed to zero).
        The row's mass is the sum of its variables, so every term is written
        in homogeneous form.
        """
        raise NotImplementedError

    def scaled(self, t: float) -> "WeakCost":
        raise NotImplementedError

    def recession(self) -> "WeakCost":
        """The ``0``/``inf`` cost of the domain of ``c(x, .)``."""
        raise NotImplementedError

    def parts(self) -> list["WeakCost"]:
        return [self]


def _check_matrix(m, name: str) -> np.ndarray:
    m = np.array([[decode_real(v) if isinstance(v, str) else float(v) for v in row] for row in m], dtype=float) \
        if not isinstance(m, np.ndarray) else np.array(m, dtype=float)
    if m.ndim != 2:
        raise DimensionMismatch(f"{name} must be a matrix")
    if np.any(np.isnan(m)) or np.any(m == -np.inf):
        raise Malformed(f"{name} entries must be finite or +inf")
    return _frozen(m)


@dataclass(frozen=True, eq=False)
class Linear(WeakCost):
    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _check_matrix(self.matrix, "cost matrix"))

    @property
    def shape(self):
        return self.matrix.shape

    def forbidden(self, x):
        return self.matrix[x] == np.inf

    def value(self, x, s):
        return integrate(self.matrix[x], s)

    def emit(self, prog, x, idx, valid):
        prog.add_cost(idx[valid], self.matrix[x][valid])

    def scaled(self, t):
        return Linear(self.matrix * t)

    def recession(self):
        return Linear(np.where(self.matrix == np.inf, np.inf, 0.0))


@dataclass(frozen=True, eq=False)
class BarycentricPL(WeakCost):
    """``c(x, s) = max_k slopes[x][k] @ mean(s) + intercepts[x][k]``."""

    y_coords: np.ndarray
    slopes: tuple
    intercepts: tuple

    def __post_init__(self):
        Y = np.asarray(self.y_coords, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        d = Y.shape[1]
        slopes, inter = [], []
        for a, b in zip(self.slopes, self.intercepts, strict=True):
            a = np.atleast_2d(np.asarray(a, dtype=float))
            if a.shape[1] != d and a.size == d:
                a = a.reshape(-1, d)
            b = np.atleast_1d(np.asarray(b, dtype=float))
            if a.shape != (b.size, d) or b.size == 0:
                raise DimensionMismatch("each point needs k slopes of dimension d and k intercepts")
            if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
                raise Malformed("affine pieces must be finite")
            slopes.append(_frozen(a))
            inter.append(_frozen(b))
        object.__setattr__(self, "y_coords", _frozen(Y))
        object.__setattr__(self, "slopes", tuple(slopes))
        object.__setattr__(self, "intercepts", tuple(inter))

    @property
    def shape(self):
        return (len(self.slopes), self.y_coords.shape[0])

    def value(self, x, s):
        m = s @ self.y_coords
        return float(np.max(self.slopes[x] @ m + self.intercepts[x]))

    def emit(self, prog, x, idx, valid):
        epi = prog.new_vars(1, lower=-np.inf, cost=1.0)[0]
        cols = idx[valid]
        Yv = self.y_coords[valid]
        for a, b in zip(self.slopes[x], self.intercepts[x]):
            coef = Yv @ a + b
            prog.add_row(np.append(cols, epi), np.append(coef, -1.0), "<=", 0.0)

    def scaled(self, t):
        return BarycentricPL(self.y_coords, tuple(a * t for a in self.slopes), tuple(b * t for b in self.intercepts))

    def recession(self):
        return Linear(np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class BarycentricQuad(WeakCost):
    """``c(x, s) = 0.5 * scale * |mean(s) - x_coords[x]|^2``."""

    x_coords: np.ndarray
    y_coords: np.ndarray
    scale: float = 1.0

    lp_representable = False

    def __post_init__(self):
        X = np.asarray(self.x_coords, dtype=float)
        Y = np.asarray(self.y_coords, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        Y = Y[:, None] if Y.ndim == 1 else Y
        if X.shape[1] != Y.shape[1]:
            raise DimensionMismatch("X and Y coordinates must share a dimension")
        if not self.scale > 0:
            raise Malformed("scale must be positive")
        object.__setattr__(self, "x_coords", _frozen(X))
        object.__setattr__(self, "y_coords", _frozen(Y))
        object.__setattr__(self, "scale", float(self.scale))

    @property
    def shape(self):
        return (self.x_coords.shape[0], self.y_coords.shape[0])

    def value(self, x, s):
        u = s @ self.y_coords - self.x_coords[x]
        return 0.5 * self.scale * float(u @ u)

    def emit(self, prog, x, idx, valid):
        prog.smooth.append(QuadTerm(idx[valid], self.y_coords[valid], self.x_coords[x], self.scale))

    def scaled(self, t):
        return BarycentricQuad(self.x_coords, self.y_coords, self.scale * t)

    def recession(self):
        return Linear(np.zeros(self.shape))


@dataclass(frozen=True, eq=False)
class Dilation(WeakCost):
    """``0`` when ``s`` lies in ``family[x]``, ``inf`` otherwise."""

    family: tuple

    def __post_init__(self):
        fam = tuple(self.family)
        if not fam:
            raise Malformed("a dilation family needs at least one point")
        sizes = {p.size for p in fam}
        if len(sizes) != 1:
            raise DimensionMismatch("all polytopes must live on the same space")
        object.__setattr__(self, "family", fam)

    @classmethod
    def barycentric(cls, x_coords, y_coords) -> "Dilation":
        """``D(x)`` = probability vectors on ``Y`` with mean ``x``."""
        X = np.asarray(x_coords, dtype=float)
        X = X[:, None] if X.ndim == 1 else X
        return cls(tuple(Polytope.barycentric(y_coords, X[i]) for i in range(X.shape[0])))

    @classmethod
    def markov(cls, kernel) -> "Dilation":
        """``D(x)`` = the single row ``kernel[x]``."""
        K = np.asarray(getattr(kernel, "matrix", kernel), dtype=float)
        return cls(tuple(Polytope.point(row) for row in K))

    @classmethod
    def full(cls, n: int, m: int) -> "Dilation":
        return cls(tuple(Polytope.simplex(m) for _ in range(n)))

    @property
    def shape(self):
        return (len(self.family), self.family[0].size)

    def value(self, x, s):
        return 0.0 if self.family[x].contains(s) else np.inf

    def emit(self, prog, x, idx, valid):
        P = self.family[x]
        cols = idx[valid]
        if P.is_vertex_list:
            V = P.vertices
            lam = prog.new_vars(V.shape[0])
            for y in range(P.size):
                if valid[y]:
                    prog.add_row(np.append(lam, idx[y]), np.append(-V[:, y], 1.0), "==", 0.0)
                elif np.any(V[:, y] > 0):
                    prog.add_row(lam, V[:, y], "==", 0.0)
            return
        for A, b, rel in ((P.A_eq, P.b_eq, "=="), (P.A_ub, P.b_ub, "<=")):
            for row, rhs in zip(A, b):
                prog.add_row(cols, row[valid] - rhs, rel, 0.0)

    def scaled(self, t):
        return self

    def recession(self):
        return self


@dataclass(frozen=True, eq=False)
class EntropicShift(WeakCost):
    """``sum_y base[x, y] s[y] + eps * KL(s | ref)``."""

    base: np.ndarray
    eps: float
    ref: np.ndarray

    lp_representable = False

    def __post_init__(self):
        base = _check_matrix(self.base, "base matrix")
        ref = np.asarray(_vec(self.ref), dtype=float)
        if not (np.isfinite(self.eps) and self.eps > 0):
            raise BadEpsilon(f"eps must be positive, got {self.eps!r}")
        if ref.shape != (base.shape[1],):
            raise DimensionMismatch("reference measure must live on Y")
        if np.any(ref <= 0) or abs(ref.sum() - 1) > 1e-9:
            raise Malformed("reference measure must be a strictly positive probability")
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "ref", _frozen(ref / ref.sum()))
        object.__setattr__(self, "eps", float(self.eps))

    @property
    def shape(self):
        return self.base.shape

    def forbidden(self, x):
        return self.base[x] == np.inf

    def value(self, x, s):
        lin = integrate(self.base[x], s)
        pos = s > 0
        kl = float(np.sum(s[pos] * np.log(s[pos] / self.ref[pos])))
        return ext_add(lin, self.eps * kl)

    def emit(self, prog, x, idx, valid):
        prog.add_cost(idx[valid], self.base[x][valid])
        prog.smooth.append(EntropyTerm(idx[valid], np.log(self.ref[valid]), self.eps))

    def scaled(self, t):
        return EntropicShift(self.base * t, self.eps * t, self.ref)

    def recession(self):
        return Linear(np.where(self.base == np.inf, np.inf, 0.0))


@dataclass(frozen=True, eq=False)
class SumCost(WeakCost):
    terms: tuple

    def __post_init__(self):
        terms = []
        for t in self.terms:
            terms.extend(t.terms if isinstance(t, SumCost) else [t])
        if not terms:
            raise Malformed("a sum needs at least one term")
        if len({t.shape for t in terms}) != 1:
            raise DimensionMismatch("summed costs must share their spaces")
        object.__setattr__(self, "terms", tuple(terms))

    @property
    def shape(self):
        return self.terms[0].shape

    @property
    def lp_representable(self):
        return all(t.lp_representable for t in self.terms)

    def forbidden(self, x):
        out = np.zeros(self.shape[1], dtype=bool)
        for t in self.terms:
            out |= t.forbidden(x)
        return out

    def value(self, x, s):
        total = 0.0
        for t in self.terms:
            total = ext_add(total, t.value(x, s))
        return total

    def emit(self, prog, x, idx, valid):
        for t in self.terms:
            t.emit(prog, x, idx, valid)

    def scaled(self, t):
        return SumCost(tuple(c.scaled(t) for c in self.terms))

    def recession(self):
        return SumCost(tuple(c.recession() for c in self.terms))

    def parts(self):
        return list(self.terms)


# ---------------------------------------------------------------- operations

def _check_point(c: WeakCost, x: int) -> int:
    x = int(x)
    if not 0 <= x < c.shape[0]:
        raise DimensionMismatch(f"point index {x} outside 0..{c.shape[0] - 1}")
    return x


def eval_cost(c: WeakCost, x: int, sigma) -> float:
    """Exact value of ``c(x, sigma)``; ``inf`` off the domain."""
    x = _check_point(c, x)
    s = _vec(sigma)
    if s.shape != (c.shape[1],):
        raise DimensionMismatch(f"measure has {s.size} entries, cost expects {c.shape[1]}")
    return c.value(x, s)


def row_program(c: WeakCost, x: int, g: np.ndarray | None = None):
    """Program for ``min c(x, s) - g @ s`` over probability vectors ``s``."""
    m = c.shape[1]
    prog = CouplingProgram()
    valid = ~c.forbidden(x)
    idx = np.full(m, -1)
    idx[valid] = prog.new_vars(int(valid.sum()))
    if valid.any():
        prog.add_row(idx[valid], np.ones(valid.sum()), "==", 1.0)
    else:
        prog.add_row([], [], "==", 1.0)
    c.emit(prog, x, idx, valid)
    if g is not None:
        prog.add_cost(idx[valid], -g[valid])
    return prog, idx, valid


def maximize_linear_minus_cost(c: WeakCost, x: int, g) -> tuple[float, np.ndarray | None]:
    """Compute ``sup_s g @ s - c(x, s)`` and a maximizer.

    Parameters
    ----------
    c : WeakCost
    x : int
        Index of the point of ``X``.
    g : array_like or Fn
        A finite function on ``Y``.

    Returns
    -------
    value : float
        ``-inf`` when ``c(x, .)`` has empty domain, in which case the
        maximizer is ``None``.
    sigma : ndarray or None
    """
    x = _check_point(c, x)
    g = _vec(g)
    if g.shape != (c.shape[1],):
        raise DimensionMismatch(f"function has {g.size} entries, cost expects {c.shape[1]}")
    if not np.all(np.isfinite(g)):
        raise Malformed("the potential must be finite")
    if isinstance(c, Linear):
        return _max_linear(c.matrix[x], g)
    if isinstance(c, EntropicShift):
        return _gibbs(c, x, g)
    if isinstance(c, Dilation):
        return c.family[x].maximize(g)
    if isinstance(c, BarycentricQuad):
        return _max_quad_simplex(c, x, g)
    prog, idx, valid = row_program(c, x, g)
    if not prog.smooth:
        status, z, val, _ = prog.solve()
        if status is Status.INFEASIBLE:
            return -np.inf, None
        return -val, _extract(z, idx, valid)
    status, z, val, gap = prog.solve(tol=FW_TOL, max_iter=FW_MAX_ITER)
    if status is Status.INFEASIBLE:
        return -np.inf, None
    return -val, _extract(z, idx, valid)


def _extract(z, idx, valid) -> np.ndarray:
    s = np.zeros(idx.size)
    s[valid] = np.clip(z[idx[valid]], 0, None)
    return s / s.sum()


def _max_linear(row: np.ndarray, g: np.ndarray) -> tuple[float, np.ndarray | None]:
    with np.errstate(invalid="ignore"):
        w = g - row
    if np.all(w == -np.inf):
        return -np.inf, None
    k = int(np.argmax(w))
    s = np.zeros(row.size)
    s[k] = 1.0
    return float(w[k]), s


def _gibbs(c: EntropicShift, x: int, g: np.ndarray) -> tuple[float, np.ndarray]:
    logits = (g - c.base[x]) / c.eps + np.log(c.ref)
    top = logits.max()
    if top == -np.inf:
        return -np.inf, None
    w = np.exp(logits - top)
    total = w.sum()
    return float(c.eps * (top + np.log(total))), w / total


def _max_quad_simplex(c: BarycentricQuad, x: int, g: np.ndarray) -> tuple[float, np.ndarray]:
    """Exact on a line, Frank-Wolfe over the simplex otherwise."""
    Y, target, s = c.y_coords, c.x_coords[x], c.scale
    if Y.shape[1] == 1:
        return _max_quad_line(Y[:, 0], float(target[0]), s, g)

    def fun(p):
        u = p @ Y - target
        return 0.5 * s * float(u @ u) - float(g @ p)

    def grad(p):
        return s * (Y @ (p @ Y - target)) - g

    def lmo(direction):
        v = np.zeros(direction.size)
        v[int(np.argmin(direction))] = 1.0
        return v

    start = lmo(-g)
    p, gap = away_frank_wolfe(fun, grad, lmo, start, tol=FW_TOL, max_iter=FW_MAX_ITER)
    return -fun(p), p


def _max_quad_line(y: np.ndarray, target: float, scale: float, g: np.ndarray) -> tuple[float, np.ndarray]:
    """``max g @ p - scale/2 (mean(p) - target)^2`` for points on a line.

    For a fixed mean the best ``p`` sits on the upper concave hull of the
    points ``(y, g)``, so the problem reduces to a concave quadratic on each
    hull segment.
    """
    order = np.lexsort((-g, y))
    hull: list[int] = []
    for i in order:
        if hull and y[hull[-1]] == y[i]:
            continue  # same position, lower value
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            if (y[b] - y[a]) * (g[i] - g[a]) - (g[b] - g[a]) * (y[i] - y[a]) >= 0:
                hull.pop()
            else:
                break
        hull.append(int(i))
    p = np.zeros(y.size)
    if len(hull) == 1:
        p[hull[0]] = 1.0
        return float(g[hull[0]] - 0.5 * scale * (y[hull[0]] - target) ** 2), p
    best = (-np.inf, 0, 0.0)
    for a, b in zip(hull, hull[1:]):
        slope = (g[b] - g[a]) / (y[b] - y[a])
        m = min(max(target + slope / scale, y[a]), y[b])
        val = g[a] + slope * (m - y[a]) - 0.5 * scale * (m - target) ** 2
        if val > best[0]:
            best = (val, (a, b), m)
    val, (a, b), m = best
    t = (m - y[a]) / (y[b] - y[a])
    p[a], p[b] = 1.0 - t, t
    return float(val), p


def frank_wolfe_value(c: WeakCost, x: int, g, tol: float = FW_TOL) -> tuple[float, np.ndarray]:
    """Generic Frank-Wolfe route, bypassing closed forms (used for cross-checks)."""
    x = _check_point(c, x)
    prog, idx, valid = row_program(c, x, _vec(g))
    status, z, val, gap = prog.solve(tol=tol, max_iter=FW_MAX_ITER) if prog.smooth else prog.solve()
    if status is Status.INFEASIBLE:
        return -np.inf, None
    return -val, _extract(z, idx, valid)


def domain_support(c: WeakCost, x: int, g) -> float:
    """``sup { g @ s : c(x, s) < inf }``, the support function of the domain."""
    return maximize_linear_minus_cost(c.recession(), x, g)[0]


def domain_polytope(c: WeakCost, x: int) -> Polytope:
    """The domain of ``c(x, .)`` as a polytope (possibly empty)."""
    x = _check_point(c, x)
    m = c.shape[1]
    forb = c.forbidden(x)
    polys = [p.family[x] for p in c.parts() if isinstance(p, Dilation)]
    listed = [P for P in polys if P.is_vertex_list]
    if listed:
        if len(polys) > 1:
            raise Malformed("cannot intersect a vertex-listed polytope with another polytope")
        V = listed[0].vertices
        V = V[np.all(V[:, forb] <= 0, axis=1)]
        if len(V) == 0:
            # an empty set: total mass two is impossible
            return Polytope(m, A_eq=np.ones((1, m)), b_eq=[2.0])
        return Polytope.hull(V)
    A_eq = [P.A_eq for P in polys] + [np.eye(m)[forb]]
    b_eq = [P.b_eq for P in polys] + [np.zeros(int(forb.sum()))]
    A_ub = [P.A_ub for P in polys]
    b_ub = [P.b_ub for P in polys]
    return Polytope(m, np.vstack(A_eq), np.concatenate(b_eq),
                    np.vstack(A_ub) if A_ub else None, np.concatenate(b_ub) if b_ub else None)


def recession_cost(c: WeakCost) -> WeakCost:
    return c.recession()


def scale_cost(c: WeakCost, t: float) -> WeakCost:
    """The cost ``t * c``."""
    if not t > 0:
        raise Malformed("scale factor must be positive")
    return c.scaled(t)


# ------------------------------------------------------------------------- JSON

def _matrix_json(m: np.ndarray) -> list:
    return [[encode_real(v) for v in row] for row in m]


def cost_to_json(c: WeakCost) -> dict:
    if isinstance(c, Linear):
        return {"kind": "linear", "matrix": _matrix_json(c.matrix)}
    if isinstance(c, BarycentricPL):
        return {"kind": "barycentric_pl",
                "pieces_per_x": [{"slopes": a.tolist(), "intercepts": b.tolist()}
                                 for a, b in zip(c.slopes, c.intercepts)]}
    if isinstance(c, BarycentricQuad):
        return {"kind": "barycentric_quad", "scale": c.scale}
    if isinstance(c, Dilation):
        return {"kind": "dilation", "constraints_per_x": [p.to_json() for p in c.family]}
    if isinstance(c, EntropicShift):
        return {"kind": "entropic", "base": _matrix_json(c.base), "eps": c.eps, "ref": c.ref.tolist()}
    if isinstance(c, SumCost):
        return {"kind": "sum", "terms": [cost_to_json(t) for t in c.terms]}
    raise Malformed(f"cannot serialize {type(c).__name__}")


_FIELDS = {
    "linear": {"matrix"},
    "barycentric_pl": {"pieces_per_x"},
    "barycentric_quad": {"scale"},
    "dilation": {"constraints_per_x", "barycentric"},
    "entropic": {"base", "eps", "ref"},
    "sum": {"terms"},
}


def cost_from_json(obj, X=None, Y=None, strict: bool = True) -> WeakCost:
    """Read a cost.  ``X``/``Y`` supply coordinates for barycentric kinds."""
    if not isinstance(obj, dict) or obj.get("kind") not in _FIELDS:
        raise Malformed(f"unknown cost kind {obj.get('kind') if isinstance(obj, dict) else obj!r}")
    kind = obj["kind"]
    extra = set(obj) - _FIELDS[kind] - {"kind"}
    if extra and strict:
        raise Malformed(f"unknown fields {sorted(extra)} for cost kind {kind!r}")
    try:
        if kind == "linear":
            return Linear(_check_matrix(obj["matrix"], "matrix"))
        if kind == "entropic":
            return EntropicShift(_check_matrix(obj["base"], "base"), float(obj["eps"]), obj["ref"])
        if kind == "sum":
            return SumCost(tuple(cost_from_json(t, X, Y, strict) for t in obj["terms"]))
        if kind == "barycentric_pl":
            _need_coords(Y, "Y")
            pieces = obj["pieces_per_x"]
            return BarycentricPL(Y.coords, tuple(p["slopes"] for p in pieces), tuple(p["intercepts"] for p in pieces))
        if kind == "barycentric_quad":
            _need_coords(X, "X")
            _need_coords(Y, "Y")
            return BarycentricQuad(X.coords, Y.coords, float(obj.get("scale", 1.0)))
        if kind == "dilation":
            if obj.get("barycentric"):
                _need_coords(X, "X")
                _need_coords(Y, "Y")
                return Dilation.barycentric(X.coords, Y.coords)
            m = len(Y) if Y is not None else None
            polys = []
            for p in obj["constraints_per_x"]:
                size = m if m is not None else _infer_size(p)
                polys.append(Polytope.from_json(p, size))
            return Dilation(tuple(polys))
    except KeyError as exc:
        raise Malformed(f"cost kind {kind!r} is missing field {exc.args[0]!r}") from None
    raise Malformed(kind)


def _need_coords(space, name):
    if space is None or space.coords is None:
        raise Malformed(f"this cost needs coordinates on {name}")


def _infer_size(p) -> int:
    for key in ("vertices", "A_eq", "A_ub"):
        if key in p and p[key]:
            return len(p[key][0])
    raise Malformed("cannot infer the size of an unconstrained polytope without a space")
