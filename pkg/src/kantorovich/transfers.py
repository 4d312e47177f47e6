"""Evaluation of weak transport transfers, primal and dual.

The primal value of a transfer with cost ``c`` between ``mu`` and ``nu`` is

    inf over couplings pi of sum_x mu(x) c(x, pi_x),

and its dual is the supremum over potentials ``g`` on ``Y`` of

    G(g) = nu @ g - mu @ T g,     T g (x) = sup_s g @ s - c(x, s).

Both are computed independently so that each certifies the other.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._program import CouplingProgram
from .core import (
    Coupling,
    Fn,
    Kernel,
    Measure,
    Space,
    disintegrate,
    integrate,
    require_same,
)
from .costs import Dilation, EntropicShift, Linear, WeakCost, domain_polytope
from .errors import (
    CandidateSetTooSmall,
    DivergentDual,
    Malformed,
    NotAttained,
    NumericalFailure,
    SpaceChainMismatch,
    SpaceMismatch,
)
from .lp import LinearProgram, Status, solve
from .operators import Compose, FromCost, KantorovichOp

__all__ = [
    "Transfer", "EvalResult", "eval_primal", "eval_dual", "sinkhorn", "strassen_decompose",
    "lift_eval", "compose_chain", "is_standard", "in_domain", "dual_objective",
]

DUAL_TOL = 1e-6
PRIMAL_FW_TOL = 1e-8
SINKHORN_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Transfer:
    """A weak transport cost together with its spaces."""

    cost: WeakCost
    X: Space
    Y: Space

    def __post_init__(self):
        if self.cost.shape != (len(self.X), len(self.Y)):
            raise SpaceMismatch(f"cost shape {self.cost.shape} does not match |X|={len(self.X)}, |Y|={len(self.Y)}")
        object.__setattr__(self, "operator", FromCost(self.cost, self.X, self.Y))
        dom_op = FromCost(self.cost.recession(), self.X, self.Y)
        object.__setattr__(self, "domain_operator", dom_op)
        dom = dom_op.evaluate(np.zeros(len(self.Y)))
        object.__setattr__(self, "standard", tuple(bool(v > -np.inf) for v in dom))


@dataclass(frozen=True, eq=False)
class EvalResult:
    value: float
    coupling: Coupling | None = None
    potential: Fn | None = None
    gap: float = 0.0
    kernel: Kernel | None = None
    method: str = ""
    details: dict = field(default_factory=dict)

    @property
    def finite(self) -> bool:
        return bool(np.isfinite(self.value))


def _check(t: Transfer, mu: Measure, nu: Measure) -> None:
    require_same(mu.space, t.X, "mu and the transfer's X")
    require_same(nu.space, t.Y, "nu and the transfer's Y")


# --------------------------------------------------------------------- primal

def _coupling_program(cost: WeakCost, mu_w: np.ndarray, nu_w: np.ndarray):
    n, m = cost.shape
    prog = CouplingProgram()
    blocks = {}
    col_terms: list[list[int]] = [[] for _ in range(m)]
    for x in range(n):
        if mu_w[x] <= 0:
            continue
        valid = ~cost.forbidden(x)
        idx = np.full(m, -1)
        idx[valid] = prog.new_vars(int(valid.sum()))
        prog.add_row(idx[valid], np.ones(valid.sum()), "==", mu_w[x])
        cost.emit(prog, x, idx, valid)
        blocks[x] = (idx, valid)
        for y in np.flatnonzero(valid):
            col_terms[y].append(idx[y])
    for y in range(m):
        prog.add_row(col_terms[y], np.ones(len(col_terms[y])), "==", nu_w[y])
    return prog, blocks


def _matrix_from(z, blocks, shape) -> np.ndarray:
    P = np.zeros(shape)
    for x, (idx, valid) in blocks.items():
        P[x, valid] = np.clip(z[idx[valid]], 0, None)
    return P


def eval_primal(t: Transfer, mu: Measure, nu: Measure, *, fw_tol: float = PRIMAL_FW_TOL,
                max_iter: int = 10_000, cross_check: bool = True) -> EvalResult:
    """Minimize ``sum_x mu(x) c(x, pi_x)`` over couplings of ``mu`` and ``nu``.

    Costs built from linear pieces give one linear program.  Smooth costs
    are handled by away-step Frank-Wolfe over the same constraints; a purely
    entropic cost is also solved by Sinkhorn and the two values compared.
    """
    _check(t, mu, nu)
    prog, blocks = _coupling_program(t.cost, mu.weights, nu.weights)
    if not prog.smooth:
        status, z, value, gap = prog.solve()
        method = "lp"
    else:
        status, z, value, gap = prog.solve(tol=fw_tol, max_iter=max_iter)
        method = "frank-wolfe"
    if status is Status.INFEASIBLE:
        return EvalResult(np.inf, method=method)
    P = _matrix_from(z, blocks, t.cost.shape)
    P /= P.sum()
    pi = Coupling(t.X, t.Y, P)
    details = {}
    if cross_check and isinstance(t.cost, EntropicShift):
        sk = sinkhorn(t, mu, nu)
        details["sinkhorn_value"] = sk.value
        details["sinkhorn_difference"] = abs(sk.value - value)
        if abs(sk.value - value) > 1e-6 * (1 + abs(value)):
            raise NumericalFailure(f"Sinkhorn {sk.value!r} and Frank-Wolfe {value!r} disagree")
    _, kernel = disintegrate(pi)
    return EvalResult(float(value), pi, gap=float(gap), kernel=kernel, method=method, details=details)


def sinkhorn(t: Transfer, mu: Measure, nu: Measure, *, tol: float = SINKHORN_TOL,
             max_iter: int = 1_000_000) -> EvalResult:
    """Log-domain Sinkhorn scaling for an entropic cost with a linear base.

    Scales against ``mu x ref`` until the column marginal error is at most
    ``tol``.  Returns ``inf`` when no coupling avoids the infinite entries.
    """
    _check(t, mu, nu)
    c = t.cost
    if not isinstance(c, EntropicShift):
        raise Malformed("Sinkhorn needs an entropic cost")
    rows = mu.weights > 0
    cols = nu.weights > 0
    C = c.base[np.ix_(rows, cols)]
    finite = np.isfinite(C)
    # feasibility on the finite support
    if not _support_feasible(finite, mu.weights[rows], nu.weights[cols]):
        return EvalResult(np.inf, method="sinkhorn")
    eps = c.eps
    a = mu.weights[rows]
    b = nu.weights[cols]
    log_ref = np.log(c.ref[cols])
    log_a = np.log(a)
    log_b = np.log(b)
    M = np.where(finite, -C / eps, -np.inf)
    f = np.zeros(C.shape[0])
    g = np.zeros(C.shape[1])
    err = np.inf
    for it in range(max_iter):
        # row update: sum_y pi = a
        f = -_lse(M + (g + log_ref)[None, :], axis=1)
        # column update: sum_x pi = b
        g = log_b - log_ref - _lse(M + (f + log_a)[:, None], axis=0)
        logpi = M + f[:, None] + g[None, :] + log_a[:, None] + log_ref[None, :]
        row_err = np.abs(np.exp(logpi).sum(axis=1) - a).sum()
        err = row_err
        if err <= tol:
            break
    else:
        raise NumericalFailure(f"Sinkhorn stalled with marginal error {err:.3g}")
    P_sub = np.exp(logpi)
    P = np.zeros(c.shape)
    P[np.ix_(rows, cols)] = P_sub
    ref = a[:, None] * c.ref[cols][None, :]
    pos = P_sub > 0
    kl = float(np.sum(P_sub[pos] * np.log(P_sub[pos] / ref[pos])))
    lin = float(np.sum(np.where(pos, C, 0.0) * P_sub))
    value = lin + eps * kl
    pi = Coupling(t.X, t.Y, P / P.sum())
    _, kernel = disintegrate(pi)
    return EvalResult(value, pi, kernel=kernel, method="sinkhorn", details={"iterations": it + 1,
                                                                             "marginal_error": err})


def _lse(a, axis):
    mx = np.max(a, axis=axis, keepdims=True)
    mx = np.where(np.isfinite(mx), mx, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(mx, axis=axis) + np.log(np.sum(np.exp(a - mx), axis=axis))


def _support_feasible(allowed: np.ndarray, a: np.ndarray, b: np.ndarray) -> bool:
    n, m = allowed.shape
    cols = [(i, j) for i in range(n) for j in range(m) if allowed[i, j]]
    if not cols:
        return False
    A = np.zeros((n + m, len(cols)))
    for k, (i, j) in enumerate(cols):
        A[i, k] = 1.0
        A[n + j, k] = 1.0
    return solve(LinearProgram(np.zeros(len(cols)), A, ("==",) * (n + m), np.concatenate([a, b]))).status \
        is Status.OPTIMAL


# ----------------------------------------------------------------------- dual

def dual_objective(T: KantorovichOp, mu_w: np.ndarray, nu_w: np.ndarray, g: np.ndarray):
    """``G(g)`` and a supergradient ``nu - sum_x mu(x) s_x``."""
    vals, rows = T.evaluate_with_argmax(g)
    G = float(nu_w @ g) - integrate(vals, mu_w)
    charged = mu_w > 0
    sup = nu_w - mu_w[charged] @ rows[charged] if rows is not None else None
    return G, sup, vals, rows


def _needs_recession_check(cost: WeakCost) -> bool:
    parts = cost.parts()
    for p in parts:
        if isinstance(p, Dilation):
            return True
        if isinstance(p, (Linear,)) and np.any(p.matrix == np.inf):
            return True
        if isinstance(p, EntropicShift) and np.any(p.base == np.inf):
            return True
    return False


def _cost_scale(cost: WeakCost) -> float:
    vals = [1.0]
    for p in cost.parts():
        if isinstance(p, Linear):
            fin = p.matrix[np.isfinite(p.matrix)]
            vals.append(float(np.max(np.abs(fin))) if fin.size else 0.0)
        elif isinstance(p, EntropicShift):
            fin = p.base[np.isfinite(p.base)]
            vals.append(float(np.max(np.abs(fin))) if fin.size else 0.0)
            vals.append(p.eps * float(np.max(-np.log(p.ref))))
        elif hasattr(p, "slopes"):
            ys = float(np.max(np.abs(p.y_coords)))
            vals.extend(float(np.max(np.abs(a))) * ys + float(np.max(np.abs(b))) for a, b in zip(p.slopes, p.intercepts))
        elif hasattr(p, "scale"):
            span = float(np.max(np.abs(p.y_coords))) + float(np.max(np.abs(p.x_coords)))
            vals.append(p.scale * span**2)
    return max(vals)


def _kelley(T: KantorovichOp, mu_w, nu_w, radius: float, tol: float, max_iter: int, lower_target=None):
    """Cutting-plane ascent of ``G`` over ``|g| <= radius`` with ``sum g = 0``.

    Returns ``(best_g, best_G, upper_bound, iterations, sup_history)``.
    """
    m = nu_w.size
    charged = np.flatnonzero(mu_w > 0)
    nc = charged.size
    cut_rows: list[np.ndarray] = []
    cut_rhs: list[float] = []
    g = np.zeros(m)
    best_g, best = g, -np.inf
    upper = np.inf
    for it in range(1, max_iter + 1):
        G, _, vals, rows = dual_objective(T, mu_w, nu_w, g)
        if rows is None:
            raise Malformed("the operator gives no maximizers; the cutting-plane dual needs them")
        if G > best:
            best, best_g = G, g
        for k, x in enumerate(charged):
            # u_x >= rows[x] @ g' - c_x  with  c_x = rows[x] @ g - vals[x]
            a = np.zeros(m + nc)
            a[:m] = rows[x]
            a[m + k] = -1.0
            cut_rows.append(a)
            cut_rhs.append(float(rows[x] @ g - vals[x]))
        if upper - best <= tol * (1 + abs(best)):
            return best_g, best, upper, it
        A = np.vstack(cut_rows + [np.append(np.ones(m), np.zeros(nc))])
        b = np.append(cut_rhs, 0.0)
        obj = np.concatenate([nu_w, -mu_w[charged]])
        lo = np.concatenate([np.full(m, -radius), np.full(nc, -np.inf)])
        up = np.concatenate([np.full(m, radius), np.full(nc, np.inf)])
        res = solve(LinearProgram(obj, A, ("<=",) * len(cut_rows) + ("==",), b, lo, up, "max"))
        if res.status is not Status.OPTIMAL:
            raise NumericalFailure(f"cutting-plane master problem is {res.status.value}")
        upper = min(upper, res.value)
        g = res.x[:m]
        if upper - best <= tol * (1 + abs(best)):
            G, *_ = dual_objective(T, mu_w, nu_w, g)
            if G > best:
                best, best_g = G, g
            return best_g, best, upper, it
    return best_g, best, upper, max_iter


def _recession_direction(t: Transfer, mu_w, nu_w, tol: float = 1e-9):
    """A potential ``d`` with ``nu @ d > mu @ T_r d``, or ``None`` if none exists."""
    d, val, upper, _ = _kelley(t.domain_operator, mu_w, nu_w, 1.0, 1e-12, 500)
    if val > tol:
        return d, val
    if upper > 1e-7:
        raise DivergentDual(f"could not decide whether the dual is bounded (upper bound {upper:.3g})")
    return None


def eval_dual(t: Transfer, mu: Measure, nu: Measure, *, method: str = "cutting-plane",
              tol: float = DUAL_TOL, max_iter: int = 100_000, radius: float | None = None,
              target: float | None = None) -> EvalResult:
    """Maximize ``G(g) = nu @ g - mu @ T g`` over potentials ``g``.

    Parameters
    ----------
    method : {"cutting-plane", "subgradient"}
        The cutting-plane route keeps an outer model of ``G`` and stops when
        model and best value agree; the subgradient route takes Polyak steps
        towards ``target`` (or ``1/sqrt(k)`` steps without one).
    target : float, optional
        A known upper bound on the optimum, typically the primal value.

    Returns
    -------
    EvalResult
        ``value`` is the best ``G`` found, ``gap`` the certified distance to
        the optimum (cutting planes) or to ``target`` (subgradient).  A value
        of ``inf`` comes with a recession direction as ``potential``.
    """
    _check(t, mu, nu)
    mu_w, nu_w = mu.weights, nu.weights
    if any(not t.standard[x] and mu_w[x] > 0 for x in range(len(t.X))):
        return EvalResult(np.inf, method=method, details={"reason": "non-standard point charged by mu"})
    if _needs_recession_check(t.cost):
        found = _recession_direction(t, mu_w, nu_w)
        if found is not None:
            d, val = found
            return EvalResult(np.inf, potential=Fn(t.Y, d), method=method,
                              details={"reason": "recession direction", "slope": val})
    R = radius if radius is not None else 1e3 * _cost_scale(t.cost)
    if method == "cutting-plane":
        g, best, upper, iters = _kelley(t.operator, mu_w, nu_w, R, tol, max_iter)
        gap = max(upper - best, 0.0)
    elif method == "subgradient":
        g, best, iters = _subgradient(t.operator, mu_w, nu_w, tol, max_iter, target)
        gap = max(target - best, 0.0) if target is not None else np.nan
    else:
        raise Malformed(f"unknown dual method {method!r}")
    if method == "cutting-plane" and np.max(np.abs(g)) >= R * (1 - 1e-9):
        # dilations leave flat directions, so a boundary hit alone proves nothing
        g2, best2, upper2, iters2 = _kelley(t.operator, mu_w, nu_w, 10 * R, tol, max_iter)
        if best2 > best + tol * (1 + abs(best)):
            raise DivergentDual("the dual keeps growing with the search box")
        iters += iters2
    return EvalResult(float(best), potential=Fn(t.Y, g - g.mean()), gap=float(gap), method=method,
                      details={"iterations": iters})


def _subgradient(T, mu_w, nu_w, tol, max_iter, target):
    m = nu_w.size
    g = np.zeros(m)
    best, best_g = -np.inf, g
    for k in range(1, max_iter + 1):
        G, sup, _, _ = dual_objective(T, mu_w, nu_w, g)
        if G > best:
            best, best_g = G, g.copy()
        if target is not None and target - best <= tol * (1 + abs(target)):
            return best_g, best, k
        sup = sup - sup.mean()
        norm2 = float(sup @ sup)
        if norm2 <= 1e-30:
            return best_g, best, k
        step = (target - G) / norm2 if target is not None else 1.0 / np.sqrt(k * norm2)
        g = g + step * sup
        g -= g.mean()
    return best_g, best, max_iter


# ------------------------------------------------------------ decomposition

def strassen_decompose(t: Transfer, mu: Measure, nu: Measure, result: EvalResult | None = None,
                       tol: float = 1e-6, member_tol: float = 1e-9) -> Kernel:
    """Kernel rows of an optimal coupling, checked row by row.

    Verifies ``sum_x mu(x) c(x, pi_x)`` against the optimal value and, for
    dilation parts, that each charged row lies in its polytope.
    """
    res = result if result is not None else eval_primal(t, mu, nu)
    if not res.finite:
        raise NotAttained("the transfer is infinite; nothing to decompose")
    K = res.kernel
    total = 0.0
    for x in np.flatnonzero(mu.weights > 0):
        row = K.matrix[x]
        for part in t.cost.parts():
            if isinstance(part, Dilation):
                if not part.family[x].contains(row, tol=member_tol):
                    raise NotAttained(f"row {x} leaves its dilation polytope")
        total += mu.weights[x] * t.cost.value(x, row)
    if not abs(total - res.value) <= tol * (1 + abs(res.value)):
        raise NotAttained(f"rows reproduce {total!r}, optimum is {res.value!r}")
    return K


def lift_eval(t: Transfer, mu: Measure, nu: Measure, extra_candidates: Sequence[np.ndarray] = (),
              tol: float = 1e-6, primal: EvalResult | None = None) -> float:
    """Value of the lifted problem over measures on probability vectors.

    Atoms are restricted to the primal kernel rows, the vertices of each
    domain and ``extra_candidates``.  The result must match the primal
    value; otherwise :class:`CandidateSetTooSmall` is raised.
    """
    _check(t, mu, nu)
    res = primal if primal is not None else eval_primal(t, mu, nu)
    if not res.finite:
        return np.inf
    n, m = t.cost.shape
    cands: list[np.ndarray] = [np.asarray(c, dtype=float) for c in extra_candidates]
    cands.extend(res.kernel.matrix[x] for x in range(n) if mu.weights[x] > 0)
    for x in range(n):
        if mu.weights[x] > 0:
            cands.extend(domain_polytope(t.cost, x).vertex_list())
    uniq: list[np.ndarray] = []
    for c in cands:
        if not any(np.allclose(c, u, atol=1e-12) for u in uniq):
            uniq.append(c)
    var_cost, var_x, var_p = [], [], []
    for x in range(n):
        if mu.weights[x] <= 0:
            continue
        for k, p in enumerate(uniq):
            cx = t.cost.value(x, p)
            if np.isfinite(cx):
                var_cost.append(cx)
                var_x.append(x)
                var_p.append(k)
    if not var_cost:
        raise CandidateSetTooSmall("no candidate atom has finite cost")
    N = len(var_cost)
    charged = np.flatnonzero(mu.weights > 0)
    A = np.zeros((charged.size + m, N))
    for j, (x, k) in enumerate(zip(var_x, var_p)):
        A[int(np.searchsorted(charged, x)), j] = 1.0
        A[charged.size:, j] = uniq[k]
    b = np.concatenate([mu.weights[charged], nu.weights])
    out = solve(LinearProgram(np.array(var_cost), A, ("==",) * A.shape[0], b))
    if out.status is not Status.OPTIMAL:
        raise CandidateSetTooSmall(f"lifted program is {out.status.value}")
    if abs(out.value - res.value) > tol * (1 + abs(res.value)):
        raise CandidateSetTooSmall(f"lifted value {out.value!r} differs from primal {res.value!r}")
    return float(out.value)


# --------------------------------------------------------------------- chains

def compose_chain(ts: Sequence[Transfer], mu: Measure, nu: Measure, *, check_dual: bool = True,
                  tol: float = 1e-6, fw_tol: float = PRIMAL_FW_TOL) -> EvalResult:
    """Infimal value over intermediate measures of a chain of transfers.

    All stages are optimized jointly: one linear program when every cost is
    linear-representable, Frank-Wolfe over the joint coupling polytope
    otherwise.  With ``check_dual`` the value is compared with the dual of
    the composed operator.
    """
    ts = list(ts)
    if not ts:
        raise Malformed("empty chain")
    for a, b in zip(ts, ts[1:]):
        if a.Y != b.X:
            raise SpaceChainMismatch("consecutive transfers must share the intermediate space")
    require_same(mu.space, ts[0].X, "mu and the first stage")
    require_same(nu.space, ts[-1].Y, "nu and the last stage")
    prog = CouplingProgram()
    stages = []
    prev_cols: list[list[int]] | None = None
    for s, t in enumerate(ts):
        n, m = t.cost.shape
        blocks = {}
        cols: list[list[int]] = [[] for _ in range(m)]
        for x in range(n):
            if s == 0 and mu.weights[x] <= 0:
                continue
            valid = ~t.cost.forbidden(x)
            idx = np.full(m, -1)
            idx[valid] = prog.new_vars(int(valid.sum()))
            if s == 0:
                prog.add_row(idx[valid], np.ones(valid.sum()), "==", mu.weights[x])
            else:
                incoming = prev_cols[x]
                prog.add_row(np.concatenate([idx[valid], incoming]),
                             np.concatenate([np.ones(valid.sum()), -np.ones(len(incoming))]), "==", 0.0)
            t.cost.emit(prog, x, idx, valid)
            blocks[x] = (idx, valid)
            for y in np.flatnonzero(valid):
                cols[y].append(int(idx[y]))
        stages.append(blocks)
        prev_cols = cols
    for y in range(len(ts[-1].Y)):
        prog.add_row(prev_cols[y], np.ones(len(prev_cols[y])), "==", nu.weights[y])
    if prog.smooth:
        status, z, value, gap = prog.solve(tol=fw_tol)
        method = "joint frank-wolfe"
    else:
        status, z, value, gap = prog.solve()
        method = "joint lp"
    if status is Status.INFEASIBLE:
        value = np.inf
    details: dict = {}
    couplings = []
    if z is not None:
        for t, blocks in zip(ts, stages):
            P = _matrix_from(z, blocks, t.cost.shape)
            couplings.append(P)
        details["stage_couplings"] = couplings
        details["intermediate_measures"] = [P.sum(axis=0) for P in couplings[:-1]]
    result_gap = float(gap)
    potential = None
    if check_dual:
        T = Compose(tuple(t.operator for t in ts))
        dual = _chain_dual(T, ts, mu, nu, tol)
        details["dual_value"] = dual.value
        if np.isfinite(value) != np.isfinite(dual.value) or (
                np.isfinite(value) and abs(dual.value - value) > tol * (1 + abs(value))):
            raise NumericalFailure(f"joint value {value!r} and composed dual {dual.value!r} disagree")
        potential = dual.potential
        if np.isfinite(value):
            result_gap = max(result_gap, abs(dual.value - value))
    return EvalResult(float(value), potential=potential, gap=result_gap, method=method, details=details)


def _chain_dual(T: Compose, ts, mu: Measure, nu: Measure, tol: float) -> EvalResult:
    mu_w, nu_w = mu.weights, nu.weights
    if any(_needs_recession_check(t.cost) for t in ts):
        R = Compose(tuple(t.domain_operator for t in ts))
        d, val, upper, _ = _kelley(R, mu_w, nu_w, 1.0, 1e-12, 500)
        if val > 1e-9:
            return EvalResult(np.inf, potential=Fn(ts[-1].Y, d), method="composed dual")
    radius = 1e3 * sum(_cost_scale(t.cost) for t in ts)
    g, best, upper, iters = _kelley(T, mu_w, nu_w, radius, tol, 100_000)
    return EvalResult(float(best), potential=Fn(ts[-1].Y, g - g.mean()), gap=float(upper - best),
                      method="composed dual", details={"iterations": iters})


def is_standard(t: Transfer) -> tuple[bool, ...]:
    """Per point of ``X``: whether ``c(x, .)`` has a nonempty domain."""
    return t.standard


def in_domain(t: Transfer, mu: Measure, nu: Measure) -> bool:
    return eval_primal(t, mu, nu).finite
