"""Convex sets of probability vectors.

A :class:`Polytope` is a subset of the probability simplex on ``size``
points, described either by extra linear constraints or by a vertex list.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import Malformed, SizeCap
from .lp import LinearProgram, Status, solve

__all__ = ["Polytope"]

MEMBER_TOL = 1e-9
ENUM_CAP = 12


def _as_matrix(a, cols: int) -> np.ndarray:
    if a is None:
        return np.zeros((0, cols))
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return np.zeros((0, cols))
    if a.ndim == 1:
        a = a[None, :]
    if a.shape[1] != cols:
        raise Malformed(f"constraint matrix has {a.shape[1]} columns, expected {cols}")
    return a


@dataclass(frozen=True, eq=False)
class Polytope:
    """Probability vectors ``s`` with ``A_eq s = b_eq`` and ``A_ub s <= b_ub``.

    When ``vertices`` is given the set is their convex hull and the
    constraint fields are ignored.
    """

    size: int
    A_eq: np.ndarray | None = None
    b_eq: np.ndarray | None = None
    A_ub: np.ndarray | None = None
    b_ub: np.ndarray | None = None
    vertices: np.ndarray | None = None

    def __post_init__(self):
        m = int(self.size)
        object.__setattr__(self, "size", m)
        if self.vertices is not None:
            v = np.atleast_2d(np.asarray(self.vertices, dtype=float))
            if v.shape[1] != m or v.shape[0] == 0:
                raise Malformed("vertex list must be a nonempty k x size array")
            if np.any(v < -1e-12) or np.any(np.abs(v.sum(axis=1) - 1) > 1e-9):
                raise Malformed("vertices must be probability vectors")
            v = np.clip(v, 0, None)
            v = v / v.sum(axis=1, keepdims=True)
            v.setflags(write=False)
            object.__setattr__(self, "vertices", v)
        for a, b in (("A_eq", "b_eq"), ("A_ub", "b_ub")):
            A = _as_matrix(getattr(self, a), m)
            rhs = np.zeros(0) if getattr(self, b) is None else np.atleast_1d(np.asarray(getattr(self, b), dtype=float))
            if rhs.shape != (A.shape[0],):
                raise Malformed(f"{b} must have one entry per row of {a}")
            A.setflags(write=False)
            rhs.setflags(write=False)
            object.__setattr__(self, a, A)
            object.__setattr__(self, b, rhs)
        object.__setattr__(self, "_vcache", [])

    # constructors ------------------------------------------------------

    @classmethod
    def simplex(cls, size: int) -> "Polytope":
        return cls(size)

    @classmethod
    def point(cls, p) -> "Polytope":
        p = np.asarray(p, dtype=float)
        return cls(p.size, vertices=p[None, :])

    @classmethod
    def hull(cls, vertices) -> "Polytope":
        v = np.atleast_2d(np.asarray(vertices, dtype=float))
        return cls(v.shape[1], vertices=v)

    @classmethod
    def barycentric(cls, coords, target) -> "Polytope":
        """Probability vectors on ``coords`` whose mean is ``target``."""
        coords = np.asarray(coords, dtype=float)
        if coords.ndim == 1:
            coords = coords[:, None]
        target = np.atleast_1d(np.asarray(target, dtype=float))
        return cls(coords.shape[0], A_eq=coords.T, b_eq=target)

    # queries -----------------------------------------------------------

    @property
    def is_vertex_list(self) -> bool:
        return self.vertices is not None

    def contains(self, s, tol: float = MEMBER_TOL) -> bool:
        s = np.asarray(s, dtype=float)
        if s.shape != (self.size,) or np.any(s < -tol) or abs(s.sum() - 1) > tol:
            return False
        if self.is_vertex_list:
            V = self.vertices
            res = solve(LinearProgram(np.zeros(len(V)), np.vstack([V.T, np.ones(len(V))]),
                                      ("==",) * (self.size + 1), np.append(s, 1.0)))
            if res.status is Status.OPTIMAL:
                return True
            # tolerate tiny residuals by checking the distance to the hull
            return self._hull_distance(s) <= tol
        if self.A_eq.shape[0] and np.max(np.abs(self.A_eq @ s - self.b_eq)) > tol * (1 + np.abs(self.b_eq).max()):
            return False
        if self.A_ub.shape[0] and np.max(self.A_ub @ s - self.b_ub) > tol * (1 + np.abs(self.b_ub).max()):
            return False
        return True

    def _hull_distance(self, s) -> float:
        """Sup-norm distance from ``s`` to the hull of the vertices."""
        V = self.vertices
        k, m = V.shape
        # variables: lambda (k), t (1); minimize t with |V^T lambda - s| <= t
        A = np.vstack([
            np.hstack([V.T, -np.ones((m, 1))]),
            np.hstack([-V.T, -np.ones((m, 1))]),
            np.hstack([np.ones((1, k)), np.zeros((1, 1))]),
        ])
        b = np.concatenate([s, -s, [1.0]])
        res = solve(LinearProgram(np.append(np.zeros(k), 1.0), A, ("<=",) * (2 * m) + ("==",), b))
        return res.value

    def maximize(self, w, allowed=None) -> tuple[float, np.ndarray | None]:
        """Maximize ``w @ s`` over the set, optionally restricted to ``allowed`` support.

        Returns ``(-inf, None)`` when the (restricted) set is empty.
        """
        w = np.asarray(w, dtype=float)
        if self.is_vertex_list:
            V = self.vertices
            if allowed is not None:
                V = V[np.all(V[:, ~allowed] <= 0, axis=1)]
                if len(V) == 0:
                    return -np.inf, None
            vals = V @ w
            k = int(np.argmax(vals))
            return float(vals[k]), V[k].copy()
        res = solve(self._lp(-w, allowed))
        if res.status is not Status.OPTIMAL:
            return -np.inf, None
        return -res.value, np.clip(res.x, 0, None)

    def _lp(self, c, allowed=None) -> LinearProgram:
        m = self.size
        A = np.vstack([self.A_eq, np.ones((1, m)), self.A_ub])
        b = np.concatenate([self.b_eq, [1.0], self.b_ub])
        rel = ("==",) * (self.A_eq.shape[0] + 1) + ("<=",) * self.A_ub.shape[0]
        upper = None
        if allowed is not None:
            upper = np.where(allowed, np.inf, 0.0)
        return LinearProgram(c, A, rel, b, None, upper)

    def is_empty(self) -> bool:
        if self.is_vertex_list:
            return False
        return solve(self._lp(np.zeros(self.size))).status is Status.INFEASIBLE

    def vertex_list(self, cap: int = ENUM_CAP) -> np.ndarray:
        """All vertices, by basis enumeration for constraint descriptions.

        Raises :class:`SizeCap` beyond ``cap`` points; callers then fall back
        to separation via :meth:`maximize`.
        """
        if self.is_vertex_list:
            return self.vertices
        if self._vcache:
            return self._vcache[0]
        if self.size > cap:
            raise SizeCap(f"vertex enumeration limited to {cap} points")
        verts = self._special_vertices()
        if verts is None:
            verts = self._enumerate()
        verts.setflags(write=False)
        self._vcache.append(verts)
        return verts

    def _special_vertices(self):
        # one-dimensional barycentric sets: two-point measures straddling the target
        if self.A_ub.shape[0] or self.A_eq.shape[0] != 1:
            return None
        x, t = self.A_eq[0], self.b_eq[0]
        out = []
        for i in range(self.size):
            if abs(x[i] - t) <= 1e-12 * (1 + abs(t)):
                v = np.zeros(self.size)
                v[i] = 1.0
                out.append(v)
        for i in range(self.size):
            for j in range(self.size):
                if x[i] < t - 1e-12 * (1 + abs(t)) and x[j] > t + 1e-12 * (1 + abs(t)):
                    v = np.zeros(self.size)
                    v[i] = (x[j] - t) / (x[j] - x[i])
                    v[j] = (t - x[i]) / (x[j] - x[i])
                    out.append(v)
        return np.array(out).reshape(-1, self.size)

    def _enumerate(self) -> np.ndarray:
        m = self.size
        k_ub = self.A_ub.shape[0]
        A = np.vstack([
            np.hstack([self.A_eq, np.zeros((self.A_eq.shape[0], k_ub))]),
            np.hstack([np.ones((1, m)), np.zeros((1, k_ub))]),
            np.hstack([self.A_ub, np.eye(k_ub)]),
        ])
        b = np.concatenate([self.b_eq, [1.0], self.b_ub])
        if np.linalg.matrix_rank(A) < A.shape[0]:
            if self._inconsistent(A, b):
                return np.zeros((0, m))
            keep: list[int] = []
            for i in range(A.shape[0]):
                if np.linalg.matrix_rank(A[keep + [i]]) > len(keep):
                    keep.append(i)
            A, b = A[keep], b[keep]
        r = A.shape[0]
        found = []
        for cols in itertools.combinations(range(A.shape[1]), r):
            B = A[:, cols]
            if abs(np.linalg.det(B)) < 1e-12:
                continue
            xb = np.linalg.solve(B, b)
            if np.any(xb < -1e-10):
                continue
            full = np.zeros(A.shape[1])
            full[list(cols)] = np.clip(xb, 0, None)
            s = full[:m]
            if not any(np.allclose(s, f, atol=1e-10) for f in found):
                found.append(s)
        return np.array(found).reshape(-1, m)

    @staticmethod
    def _inconsistent(A, b) -> bool:
        sol, *_ = np.linalg.lstsq(A, b, rcond=None)
        return bool(np.max(np.abs(A @ sol - b)) > 1e-9)

    # serialization ----------------------------------------------------------

    def to_json(self) -> dict:
        if self.is_vertex_list:
            return {"vertices": self.vertices.tolist()}
        out: dict = {}
        if self.A_eq.shape[0]:
            out["A_eq"] = self.A_eq.tolist()
            out["b_eq"] = self.b_eq.tolist()
        if self.A_ub.shape[0]:
            out["A_ub"] = self.A_ub.tolist()
            out["b_ub"] = self.b_ub.tolist()
        return out

    @classmethod
    def from_json(cls, obj, size: int) -> "Polytope":
        if not isinstance(obj, dict):
            raise Malformed("a polytope is a JSON object")
        extra = set(obj) - {"vertices", "A_eq", "b_eq", "A_ub", "b_ub"}
        if extra:
            raise Malformed(f"unknown polytope fields {sorted(extra)}")
        if "vertices" in obj:
            return cls(size, vertices=obj["vertices"])
        return cls(size, obj.get("A_eq"), obj.get("b_eq"), obj.get("A_ub"), obj.get("b_ub"))
