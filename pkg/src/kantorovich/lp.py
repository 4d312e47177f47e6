"""Dense revised simplex.

Problems here are desk-sized (a few hundred columns at most), so the basis
inverse is kept explicitly and updated with rank-one eta steps, with a fresh
factorization every ``REFACTOR_EVERY`` pivots or after a tiny pivot.
Pricing is Dantzig's rule with lowest-index tie breaking and a Harris
two-pass ratio test; after ``3 * (rows + cols)`` pivots the solver switches
to Bland's rule, which cannot cycle.

Dual values follow the sensitivity convention: ``dual[i]`` is the rate of
change of the optimal value when ``b[i]`` increases, for both senses.
"""
from __future__ import annotations

import enum
import io
from dataclasses import dataclass, field
from typing import Sequence, TextIO

import numpy as np

from .errors import Malformed, NumericalFailure

__all__ = ["LinearProgram", "LpResult", "Status", "solve", "feasible", "format_lp", "set_dump"]

PIVOT_TOL = 1e-9
COST_TOL = 1e-10
FEAS_TOL = 1e-9
REFACTOR_EVERY = 40

_RELATIONS = {"<=": "<=", "=<": "<=", "le": "<=", "=": "==", "==": "==", "eq": "==", ">=": ">=", "=>": ">=", "ge": ">="}

_dump_stream: TextIO | None = None


def set_dump(stream: TextIO | None) -> None:
    """Write a plain-text tableau of every solved program to ``stream``."""
    global _dump_stream
    _dump_stream = stream


class Status(str, enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


@dataclass(frozen=True, eq=False)
class LinearProgram:
    """``min`` or ``max`` of ``objective @ x`` subject to ``A x (rel) b`` and bounds.

    Bounds default to ``0 <= x < inf``.  Use ``-inf``/``inf`` for free sides.
    """

    objective: np.ndarray
    A: np.ndarray
    relations: tuple
    b: np.ndarray
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    sense: str = "min"

    def __post_init__(self):
        c = np.asarray(self.objective, dtype=float).ravel()
        n = c.size
        A = np.asarray(self.A, dtype=float)
        if A.size == 0 and A.ndim != 2:
            A = np.zeros((0, n))
        if A.ndim != 2 or A.shape[1] != n:
            raise Malformed(f"constraint matrix shape {A.shape} does not match {n} variables")
        b = np.asarray(self.b, dtype=float).ravel()
        if b.size != A.shape[0]:
            raise Malformed("rhs length does not match constraint rows")
        rel = tuple(self.relations)
        if len(rel) != A.shape[0]:
            raise Malformed("one relation per constraint row is required")
        try:
            rel = tuple(_RELATIONS[r] for r in rel)
        except KeyError as exc:
            raise Malformed(f"unknown relation {exc.args[0]!r}") from None
        lo = np.zeros(n) if self.lower is None else np.broadcast_to(np.asarray(self.lower, dtype=float), (n,)).copy()
        up = np.full(n, np.inf) if self.upper is None else np.broadcast_to(np.asarray(self.upper, dtype=float), (n,)).copy()
        if np.any(lo > up) or np.any(lo == np.inf) or np.any(up == -np.inf):
            raise Malformed("variable bounds must satisfy lower <= upper")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(A)) and np.all(np.isfinite(b))):
            raise Malformed("objective and constraint data must be finite")
        if self.sense not in ("min", "max"):
            raise Malformed("sense must be 'min' or 'max'")
        for name, val in (("objective", c), ("A", A), ("b", b), ("relations", rel), ("lower", lo), ("upper", up)):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape


@dataclass(frozen=True, eq=False)
class LpResult:
    status: Status
    x: np.ndarray | None = None
    dual: np.ndarray | None = None
    value: float = np.nan
    reduced_costs: np.ndarray | None = None
    iterations: int = 0
    basis: tuple = field(default=())

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ----------------------------------------------------------------- simplex core

class _Tableau:
    """Revised simplex state on ``min c x, A x = b, x >= 0`` with ``b >= 0``."""

    def __init__(self, A: np.ndarray, b: np.ndarray, basis: list[int]):
        self.A = A
        self.b = b
        self.basis = list(basis)
        self.m = A.shape[0]
        self.pivots = 0
        self.refactor()

    def refactor(self) -> None:
        self.since_refactor = 0
        if self.m == 0:
            self.Binv = np.zeros((0, 0))
            self.xB = np.zeros(0)
            return
        B = self.A[:, self.basis]
        try:
            self.Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            raise NumericalFailure("singular basis matrix") from None
        self.xB = self.Binv @ self.b

    def run(self, c: np.ndarray, allowed: np.ndarray, limit: int, bland_after: int) -> Status:
        A = self.A
        for it in range(limit):
            y = c[self.basis] @ self.Binv if self.m else np.zeros(0)
            d = c - y @ A
            d[self.basis] = 0.0
            cand = allowed & (d < -COST_TOL * (1.0 + np.abs(c)))
            if not cand.any():
                if self.since_refactor == 0:
                    return Status.OPTIMAL
                # confirm optimality on a fresh factorization
                self.refactor()
                continue
            if self.pivots >= bland_after:
                q = int(np.flatnonzero(cand)[0])
            else:
                dd = np.where(cand, d, np.inf)
                q = int(np.argmin(dd))
            alpha = self.Binv @ A[:, q]
            pos = alpha > PIVOT_TOL
            if not pos.any():
                self.entering = q
                return Status.UNBOUNDED
            xb = np.maximum(self.xB, 0.0)
            ratios = np.full(self.m, np.inf)
            ratios[pos] = xb[pos] / alpha[pos]
            if self.pivots >= bland_after:
                tmin = ratios.min()
                ties = np.flatnonzero(ratios <= tmin + 1e-12 * (1.0 + tmin))
                basis_arr = np.asarray(self.basis)
                r = int(ties[np.argmin(basis_arr[ties])])
            else:
                # Harris: relax the bound slightly, then take the largest pivot
                relaxed = np.full(self.m, np.inf)
                relaxed[pos] = (xb[pos] + FEAS_TOL * (1.0 + xb[pos])) / alpha[pos]
                eligible = np.flatnonzero(ratios <= relaxed.min())
                r = int(eligible[np.argmax(alpha[eligible])])
            self._pivot(r, q, alpha, ratios[r])
        raise NumericalFailure(f"simplex iteration cap {limit} exceeded")

    def _pivot(self, r: int, q: int, alpha: np.ndarray, theta: float) -> None:
        ar = alpha[r]
        row = self.Binv[r] / ar
        self.Binv -= np.outer(alpha, row)
        self.Binv[r] = row
        self.xB -= theta * alpha
        self.xB[r] = theta
        self.basis[r] = q
        self.pivots += 1
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY or abs(ar) < 1e-3 * np.abs(alpha).max():
            self.refactor()


# --------------------------------------------------------------- standard form

@dataclass
class _Standard:
    A: np.ndarray            # rows x std columns (structural + slack)
    b: np.ndarray
    c: np.ndarray
    const: float
    mapping: np.ndarray      # original vars = offset + mapping @ x_std[:n_struct]
    offset: np.ndarray
    n_struct: int
    row_of: list             # original row -> std row or None
    flip: np.ndarray         # sign applied to each std row
    slack_basis: list        # per std row: a slack column usable as initial basis, or -1
    infeasible: bool = False


def _standardize(lp: LinearProgram) -> _Standard:
    A0, b0 = lp.A, lp.b
    n = A0.shape[1]
    c0 = lp.objective if lp.sense == "min" else -lp.objective
    cols, offset = [], np.zeros(n)
    bound_rows = []  # (std col, upper value)
    for j in range(n):
        lo, up = lp.lower[j], lp.upper[j]
        if np.isfinite(lo):
            offset[j] = lo
            if up == lo:
                continue
            cols.append((j, 1.0))
            if np.isfinite(up):
                bound_rows.append((len(cols) - 1, up - lo))
        elif np.isfinite(up):
            offset[j] = up
            cols.append((j, -1.0))
        else:
            cols.append((j, 1.0))
            cols.append((j, -1.0))
    ns = len(cols)
    mapping = np.zeros((n, ns))
    for k, (j, s) in enumerate(cols):
        mapping[j, k] = s
    As = A0 @ mapping
    bs = b0 - A0 @ offset
    cs = c0 @ mapping
    const = float(c0 @ offset)

    rows, rhs, rels, row_of = [], [], [], []
    infeasible = False
    scale = 1.0 + np.abs(b0)
    for i in range(A0.shape[0]):
        if not np.any(As[i] != 0.0):
            r, v = lp.relations[i], bs[i]
            ok = (r == "<=" and v >= -FEAS_TOL * scale[i]) or (r == ">=" and v <= FEAS_TOL * scale[i]) or (
                r == "==" and abs(v) <= FEAS_TOL * scale[i])
            infeasible |= not ok
            row_of.append(None)
            continue
        row_of.append(len(rows))
        rows.append(As[i])
        rhs.append(bs[i])
        rels.append(lp.relations[i])
    for k, u in bound_rows:
        e = np.zeros(ns)
        e[k] = 1.0
        rows.append(e)
        rhs.append(u)
        rels.append("<=")
    m = len(rows)
    n_slack = sum(r != "==" for r in rels)
    A = np.zeros((m, ns + n_slack))
    if m:
        A[:, :ns] = np.array(rows)
    b = np.array(rhs, dtype=float)
    slack_of = [-1] * m
    k = ns
    for i, r in enumerate(rels):
        if r != "==":
            A[i, k] = 1.0 if r == "<=" else -1.0
            slack_of[i] = k
            k += 1
    flip = np.where(b < 0, -1.0, 1.0)
    A *= flip[:, None]
    b = b * flip
    slack_basis = [s if s >= 0 and A[i, s] > 0 else -1 for i, s in enumerate(slack_of)]
    c = np.concatenate([cs, np.zeros(n_slack)])
    return _Standard(A, b, c, const, mapping, offset, ns, row_of, flip, slack_basis, infeasible)


def _iteration_limits(m: int, n: int) -> tuple[int, int]:
    return 50 * (m + n) + 2000, 3 * (m + n)


def solve(lp: LinearProgram) -> LpResult:
    """Solve a linear program.

    Parameters
    ----------
    lp : LinearProgram

    Returns
    -------
    LpResult
        ``x`` and ``dual`` are set when the status is optimal.  For an
        unbounded program ``x`` is a feasible point and the objective can be
        pushed to infinity from it.
    """
    if _dump_stream is not None:
        _dump_stream.write(format_lp(lp))
    std = _standardize(lp)
    if std.infeasible:
        return LpResult(Status.INFEASIBLE)
    m, N = std.A.shape
    limit, bland_after = _iteration_limits(m, N)

    # phase one with artificials only where no slack can start the basis
    need = [i for i in range(m) if std.slack_basis[i] < 0]
    A1 = np.zeros((m, N + len(need)))
    A1[:, :N] = std.A
    basis = list(std.slack_basis)
    for k, i in enumerate(need):
        A1[i, N + k] = 1.0
        basis[i] = N + k
    tab = _Tableau(A1, std.b, basis)
    keep = list(range(m))
    if need:
        c1 = np.zeros(N + len(need))
        c1[N:] = 1.0
        tab.run(c1, np.ones(N + len(need), dtype=bool), limit, bland_after)
        tab.refactor()
        infeas = float(c1[tab.basis] @ tab.xB)
        if infeas > FEAS_TOL * (1.0 + np.abs(std.b).max(initial=0.0)):
            return LpResult(Status.INFEASIBLE, iterations=tab.pivots)
        stuck = _drive_out_artificials(tab, N)
        # an artificial stuck in the basis marks its own row as redundant
        dropped = {int(np.flatnonzero(tab.A[:, tab.basis[r]])[0]) for r in stuck}
        keep = [i for i in range(m) if i not in dropped]
        basis = [v for r, v in enumerate(tab.basis) if r not in stuck]
    else:
        basis = list(tab.basis)
    iters = tab.pivots
    tab2 = _Tableau(tab.A[np.ix_(keep, range(N))], tab.b[keep], basis)
    tab2.pivots = iters
    status = tab2.run(std.c, np.ones(N, dtype=bool), limit + iters, bland_after)
    tab2.refactor()
    xs = np.zeros(N)
    xs[tab2.basis] = np.maximum(tab2.xB, 0.0)
    x = std.offset + std.mapping @ xs[: std.n_struct]
    if status is Status.UNBOUNDED:
        return LpResult(Status.UNBOUNDED, x=x, iterations=tab2.pivots)

    y_full = np.zeros(m)
    if tab2.m:
        y_full[keep] = std.c[tab2.basis] @ tab2.Binv
    sign = 1.0 if lp.sense == "min" else -1.0
    dual = np.zeros(lp.A.shape[0])
    for i, r in enumerate(std.row_of):
        if r is not None:
            dual[i] = sign * std.flip[r] * y_full[r]
    value = float(lp.objective @ x)
    reduced = lp.objective - lp.A.T @ dual
    return LpResult(Status.OPTIMAL, x=x, dual=dual, value=value, reduced_costs=reduced,
                    iterations=tab2.pivots, basis=tuple(tab2.basis))


def _drive_out_artificials(tab: _Tableau, n_real: int) -> set[int]:
    """Pivot zero-level artificials out of the basis.

    Returns the basis positions whose artificial cannot leave; the
    constraint rows of those artificials are combinations of the others.
    """
    stuck: set[int] = set()
    while True:
        todo = [r for r, var in enumerate(tab.basis) if var >= n_real and r not in stuck]
        if not todo:
            break
        r = todo[0]
        row = tab.Binv[r] @ tab.A[:, :n_real]
        row[[v for v in tab.basis if v < n_real]] = 0.0
        q = int(np.argmax(np.abs(row)))
        if abs(row[q]) <= 1e-7:
            stuck.add(r)
            continue
        tab._pivot(r, q, tab.Binv @ tab.A[:, q], 0.0)
        tab.refactor()
    return stuck


def feasible(A, relations: Sequence[str], b, bounds=None) -> tuple[bool, np.ndarray | None]:
    """Phase-one feasibility test.

    ``bounds`` is ``None`` (nonnegative variables) or a pair ``(lower, upper)``.
    Returns ``(True, point)`` or ``(False, None)``.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[1] if A.ndim == 2 else 0
    lo, up = (None, None) if bounds is None else bounds
    res = solve(LinearProgram(np.zeros(n), A, tuple(relations), b, lo, up))
    if res.status is Status.INFEASIBLE:
        return False, None
    return True, res.x


def format_lp(lp: LinearProgram) -> str:
    """Plain-text rendering, one constraint per line."""
    out = io.StringIO()
    n = lp.A.shape[1]
    out.write(f"{lp.sense} " + _row_text(lp.objective) + "\n")
    out.write("subject to\n")
    for i in range(lp.A.shape[0]):
        out.write(f"  r{i}: {_row_text(lp.A[i])} {lp.relations[i]} {lp.b[i]:.17g}\n")
    out.write("bounds\n")
    for j in range(n):
        out.write(f"  {lp.lower[j]:.17g} <= x{j} <= {lp.upper[j]:.17g}\n")
    out.write("end\n")
    return out.getvalue()


def _row_text(row: np.ndarray) -> str:
    terms = [f"{v:+.17g} x{j}" for j, v in enumerate(row) if v != 0]
    return " ".join(terms) if terms else "0"
