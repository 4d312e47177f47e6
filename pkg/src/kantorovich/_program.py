"""Assembly of coupling programs and a Frank-Wolfe engine for smooth parts.

A :class:`CouplingProgram` collects variables, linear rows and a linear
objective, plus optional smooth convex terms.  Without smooth terms it is a
plain LP; with them it is minimized by away-step Frank-Wolfe whose linear
oracle is the LP over the same constraints.  Purely entropic programs have
interior optima where the entropy gradient is unbounded near the boundary,
which stalls Frank-Wolfe; those are solved by Newton steps on the affine
hull and certified by a Lagrangian lower bound instead.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import FwNoConverge
from .lp import LinearProgram, Status, solve

LOG_FLOOR = -700.0


@dataclass
class QuadTerm:
    """``t * 0.5 * scale * |Y^T p / t - target|^2`` with ``t = sum(p)``."""

    idx: np.ndarray
    Y: np.ndarray
    target: np.ndarray
    scale: float

    def value(self, z):
        p = z[self.idx]
        t = p.sum()
        if t <= 0:
            return 0.0
        u = self.Y.T @ p - t * self.target
        return 0.5 * self.scale * float(u @ u) / t

    def grad(self, z, out):
        p = z[self.idx]
        t = p.sum()
        if t <= 0:
            return
        u = self.Y.T @ p - t * self.target
        out[self.idx] += self.scale * ((self.Y - self.target) @ u) / t - 0.5 * self.scale * float(u @ u) / t**2


@dataclass
class EntropyTerm:
    """``eps * sum p log(p / (t * ref))`` with ``t = sum(p)``."""

    idx: np.ndarray
    log_ref: np.ndarray
    eps: float

    def value(self, z):
        p = z[self.idx]
        t = p.sum()
        if t <= 0:
            return 0.0
        pos = p > 0
        return self.eps * float(np.sum(p[pos] * (np.log(p[pos] / t) - self.log_ref[pos])))

    def grad(self, z, out):
        p = z[self.idx]
        t = p.sum()
        if t <= 0:
            out[self.idx] += self.eps * LOG_FLOOR
            return
        with np.errstate(divide="ignore"):
            lp = np.where(p > 0, np.log(np.where(p > 0, p, 1.0) / t), LOG_FLOOR)
        out[self.idx] += self.eps * (np.maximum(lp, LOG_FLOOR) - self.log_ref)


class CouplingProgram:
    """Incrementally built minimization problem over nonnegative variables."""

    def __init__(self):
        self.n = 0
        self._obj: list[float] = []
        self._lo: list[float] = []
        self._up: list[float] = []
        self._rows: list[tuple[np.ndarray, np.ndarray, str, float]] = []
        self.smooth: list = []

    def new_vars(self, k: int, lower: float = 0.0, upper: float = np.inf, cost: float = 0.0) -> np.ndarray:
        idx = np.arange(self.n, self.n + k)
        self.n += k
        self._obj.extend([cost] * k)
        self._lo.extend([lower] * k)
        self._up.extend([upper] * k)
        return idx

    def add_cost(self, idx, coef) -> None:
        for i, v in zip(np.atleast_1d(idx), np.atleast_1d(coef)):
            self._obj[int(i)] += float(v)

    def add_row(self, idx, coef, rel: str, rhs: float) -> None:
        self._rows.append((np.asarray(idx, dtype=int), np.asarray(coef, dtype=float), rel, float(rhs)))

    @property
    def num_rows(self) -> int:
        return len(self._rows)

    def objective(self) -> np.ndarray:
        return np.array(self._obj, dtype=float)

    def to_lp(self, objective=None) -> LinearProgram:
        A = np.zeros((len(self._rows), self.n))
        b = np.zeros(len(self._rows))
        rel = []
        for i, (idx, coef, r, rhs) in enumerate(self._rows):
            np.add.at(A[i], idx, coef)
            b[i] = rhs
            rel.append(r)
        c = self.objective() if objective is None else objective
        return LinearProgram(c, A, tuple(rel), b, np.array(self._lo), np.array(self._up))

    # smooth part -------------------------------------------------------------

    def value(self, z) -> float:
        return float(self.objective() @ z) + sum(t.value(z) for t in self.smooth)

    def grad(self, z) -> np.ndarray:
        g = self.objective().copy()
        for t in self.smooth:
            t.grad(z, g)
        return g

    def solve(self, tol: float = 1e-8, max_iter: int = 10_000, start=None):
        """Minimize; returns ``(status, z, value, gap)``."""
        base = self.to_lp()
        if not self.smooth:
            res = solve(base)
            if res.status is not Status.OPTIMAL:
                return res.status, None, np.inf if res.status is Status.INFEASIBLE else -np.inf, 0.0
            return Status.OPTIMAL, res.x, res.value, 0.0

        def lmo(grad):
            r = solve(LinearProgram(grad, base.A, base.relations, base.b, base.lower, base.upper))
            if r.status is not Status.OPTIMAL:
                raise FwNoConverge(f"linear oracle returned {r.status.value}")
            return r.x

        if start is None:
            first = solve(base)
            if first.status is Status.INFEASIBLE:
                return Status.INFEASIBLE, None, np.inf, 0.0
            start = _interior_start(lmo, self.n, first.x)
        if self._newton_ready(base):
            z0 = np.mean(start, axis=0) if isinstance(start, list) else np.asarray(start, dtype=float)
            polished = _newton_polish(self, base, z0, tol)
            if polished is not None:
                z, gap = polished
                return Status.OPTIMAL, z, self.value(z), gap
        z, gap = away_frank_wolfe(self.value, self.grad, lmo, start, tol=tol, max_iter=max_iter)
        return Status.OPTIMAL, z, self.value(z), gap

    def _newton_ready(self, base: LinearProgram) -> bool:
        if not self.smooth or not all(isinstance(t, EntropyTerm) for t in self.smooth):
            return False
        covered = np.zeros(self.n, dtype=bool)
        for t in self.smooth:
            covered[t.idx] = True
        if not (covered.all() and all(r == "==" for r in base.relations)
                and np.all(base.lower == 0) and np.all(np.isinf(base.upper))):
            return False
        # each entropy block needs its total fixed by a row
        for t in self.smooth:
            mask = np.zeros(self.n)
            mask[t.idx] = 1.0
            if not any(np.array_equal(row, mask) for row in base.A):
                return False
        return True



def _newton_polish(prog: CouplingProgram, base: LinearProgram, z0: np.ndarray, tol: float, max_iter: int = 200):
    """Damped Newton on ``{A z = b}`` from a strictly positive feasible ``z0``.

    Every block total is fixed by a row, so on the feasible set each entropy
    term equals ``eps * sum p (log(p / (T ref)))`` with the constant total
    ``T``.  Its Hessian is ``diag(eps / p)``, and the step ``-D r`` with
    ``D = p / eps`` and ``r = g + A^T w`` solves the Newton system; entries
    scale multiplicatively, so tiny optimal entries stay positive.  The
    multiplier ``w`` is a weighted least-squares fit rather than the normal
    equations because ``D`` spans dozens of orders of magnitude at small
    ``eps``.

    The certificate is the Lagrangian bound ``-w.b - sum eps p exp(-r / eps)``.
    The Frank-Wolfe gap is useless here: near-zero entries make the
    linearization wildly pessimistic.  Returns ``(z, gap)`` or ``None``.
    """
    eps = np.zeros(prog.n)
    for t in prog.smooth:
        eps[t.idx] = t.eps
    if np.any(z0 <= 0):
        return None
    A, b = base.A, base.b
    z = np.array(z0, dtype=float)
    for _ in range(max_iter):
        # gradient of the constant-total form
        g = prog.grad(z) + eps
        root = np.sqrt(z / eps)
        w = np.linalg.lstsq((A * root).T, -root * g, rcond=None)[0]
        r = g + A.T @ w
        if not np.all(np.isfinite(r)):
            return None
        f = prog.value(z)
        with np.errstate(over="ignore"):
            lower = -float(w @ b) - float(np.sum(eps * np.exp(np.log(z) - r / eps)))
        gap = f - lower
        if gap <= tol * (1.0 + abs(f)):
            return z, max(gap, 0.0)
        ratio = r / eps
        amax = min(1.0, 0.99 / float(ratio.max())) if ratio.max() > 0 else 1.0
        step = -z * ratio
        alpha = _line_search(prog.grad, z, step, amax)
        if alpha <= 0:
            return None
        z = np.maximum(z + alpha * step, np.finfo(float).tiny)
    return None


def _interior_start(lmo, n: int, first) -> list:
    """A few distinct vertices averaged, so entropy gradients start finite."""
    verts = [first]
    rng = np.random.default_rng(12345)
    for _ in range(2 * n):
        v = lmo(rng.standard_normal(n))
        if not any(np.allclose(v, w, atol=1e-12) for w in verts):
            verts.append(v)
    return verts


def away_frank_wolfe(fun, grad, lmo, start, *, tol: float, max_iter: int):
    """Away-step Frank-Wolfe on a polytope given by its linear oracle.

    ``start`` is a vertex or a list of vertices (uniformly weighted).
    Stops when the Frank-Wolfe gap is at most ``tol * (1 + |f|)``.
    Returns the final point and gap; raises :class:`FwNoConverge` at the cap.
    """
    verts = [np.asarray(v, dtype=float) for v in (start if isinstance(start, list) else [start])]
    weights = np.full(len(verts), 1.0 / len(verts))
    active = {_key(v): [v, w] for v, w in zip(verts, weights)}
    z = sum(w * v for v, w in zip(verts, weights))
    gap = np.inf
    for _ in range(max_iter):
        g = grad(z)
        s = lmo(g)
        d_fw = s - z
        gap = float(-g @ d_fw)
        f = fun(z)
        if gap <= tol * (1.0 + abs(f)):
            return z, gap
        # away vertex among the active set
        keys = list(active)
        scores = [float(g @ active[k][0]) for k in keys]
        ka = keys[int(np.argmax(scores))]
        va, wa = active[ka]
        d_away = z - va
        away_gain = float(-g @ d_away)
        if gap >= away_gain or len(active) == 1:
            d, gmax, mode = d_fw, 1.0, "fw"
        else:
            d, gmax, mode = d_away, wa / (1.0 - wa), "away"
        gamma = _line_search(grad, z, d, gmax)
        if gamma <= 0:
            if mode == "away":
                d, gmax, mode = d_fw, 1.0, "fw"
                gamma = _line_search(grad, z, d, gmax)
            if gamma <= 0:
                return z, gap
        z = z + gamma * d
        if mode == "fw":
            for k in active:
                active[k][1] *= 1.0 - gamma
            ks = _key(s)
            if ks in active:
                active[ks][1] += gamma
            else:
                active[ks] = [s, gamma]
            if gamma >= 1.0 - 1e-15:
                active = {ks: [s, 1.0]}
        else:
            for k in active:
                active[k][1] *= 1.0 + gamma
            active[ka][1] -= gamma
            if active[ka][1] <= 1e-15 or gamma >= gmax * (1 - 1e-12):
                del active[ka]
    raise FwNoConverge(f"Frank-Wolfe gap {gap:.3g} after {max_iter} iterations")


def _key(v) -> bytes:
    return np.round(v, 11).tobytes()


def _line_search(grad, z, d, gmax: float) -> float:
    """Exact line search on a convex function through its derivative."""
    d0 = float(grad(z) @ d)
    if d0 >= 0:
        return 0.0
    d1 = float(grad(z + gmax * d) @ d)
    if d1 <= 0:
        return gmax
    lo, hi, flo, fhi = 0.0, gmax, d0, d1
    side = 0
    for _ in range(100):
        # regula falsi with the Illinois modification
        mid = (lo * fhi - hi * flo) / (fhi - flo)
        if not (lo < mid < hi):
            mid = 0.5 * (lo + hi)
        fm = float(grad(z + mid * d) @ d)
        if abs(fm) <= 1e-15 * (1 + abs(d0)) or hi - lo <= 1e-16 * gmax:
            return mid
        if fm < 0:
            lo, flo = mid, fm
            if side == -1:
                fhi *= 0.5
            side = -1
        else:
            hi, fhi = mid, fm
            if side == 1:
                flo *= 0.5
            side = 1
    return 0.5 * (lo + hi)
