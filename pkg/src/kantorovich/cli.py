"""Command line front end.

Every command reads JSON problem files, prints one JSON document on
stdout and exits with 0 on success, 1 on malformed input, 2 on a numerical
failure and 3 when the requested value is ``+inf``.

Problem files may carry ``"schema_version": 1``.  Spaces are inline
objects (``{"labels": [...], "coords": [...]}``); measures and functions
may name a space of the file they are paired with (``"X"`` or ``"Y"``).
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import sys
import warnings
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np

from . import __version__, lp, oracles
from .balayage import (
    ConvexOrder,
    DilationFamily,
    Generators,
    OperatorInduced,
    convex_generators,
    envelope_trace,
    order_check,
    strassen_kernel,
    true_envelope,
)
from .capacities import (
    FunctionalCapacity,
    capacity_theorem_check,
    choquet_integral,
    ck_envelope,
    dellacherie_envelope,
    is_strictly_subadditive_order_infinity,
    is_subadditive_order_infinity,
    saturation_report,
    set_function_from_json,
    strong_subadditivity_witness,
)
from .core import (
    Fn,
    Kernel,
    Measure,
    Space,
    decode_real,
    measure_from_json,
    space_from_json,
)
from .costs import EntropicShift, Linear, cost_from_json
from .errors import InputError, KantorovichError, Malformed
from .operators import (
    BlackBox,
    FromCost,
    KantorovichOp,
    Markov,
    compose,
    kantorovich_envelope,
    pointwise_max,
    recession,
    scale,
    star_sum,
)
from .polytope import Polytope
from .transfers import Transfer, compose_chain, eval_dual, eval_primal, sinkhorn

__all__ = ["run", "main", "dumps", "operator_from_json", "SCHEMA_VERSION"]

SCHEMA_VERSION = 1

EXIT_OK, EXIT_INPUT, EXIT_NUMERICAL, EXIT_INFINITE = 0, 1, 2, 3


# ------------------------------------------------------------------ output

def _encode(obj) -> str:
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}: {_encode(v)}" for k, v in sorted(obj.items(), key=lambda kv: str(kv[0])))
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(_encode(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return _encode(obj.tolist())
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return '"nan"'
        if math.isinf(x):
            return '"inf"' if x > 0 else '"-inf"'
        return format(x + 0.0, ".17g")  # folds -0.0 into 0.0
    if isinstance(obj, Fraction):
        return json.dumps(f"{obj.numerator}/{obj.denominator}")
    return json.dumps(str(obj))


def dumps(payload: dict) -> str:
    """Deterministic JSON: sorted keys, floats with 17 significant digits."""
    return _encode({"schema_version": SCHEMA_VERSION, **payload})


# ------------------------------------------------------------------ input

class _Reader:
    """Loads JSON files and enforces the known-field lists."""

    def __init__(self, lax: bool):
        self.lax = lax

    def load(self, path) -> dict:
        try:
            with open(path, encoding="utf-8") as fh:
                obj = json.load(fh)
        except OSError as exc:
            raise Malformed(f"cannot read {path}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise Malformed(f"{path} is not valid JSON: {exc.msg} at line {exc.lineno}") from None
        if not isinstance(obj, dict):
            raise Malformed(f"{path} must hold a JSON object")
        version = obj.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise Malformed(f"{path}: unsupported schema_version {version!r}")
        return obj

    def fields(self, obj: dict, allowed: set, what: str) -> None:
        extra = set(obj) - allowed - {"schema_version"}
        if not extra:
            return
        msg = f"unknown fields {sorted(extra)} in {what}"
        if not self.lax:
            raise Malformed(msg)
        warnings.warn(msg, stacklevel=2)


def _space(obj, spaces: dict, what: str) -> Space:
    if isinstance(obj, str):
        if obj not in spaces:
            raise Malformed(f"unknown space name {obj!r} in {what}")
        return spaces[obj]
    if obj is None:
        raise Malformed(f"{what} needs a space")
    return space_from_json(obj)


def _spaces(obj: dict) -> dict:
    out = {}
    for name in ("X", "Y"):
        if name in obj:
            out[name] = space_from_json(obj[name])
    if "Y" not in out and "X" in out:
        out["Y"] = out["X"]
    return out


def _function(obj, spaces: dict, reader: _Reader) -> Fn | np.ndarray:
    """A function file: ``{"space": ..., "values": [...]}`` or a bare list."""
    if isinstance(obj, list):
        return np.array([decode_real(v) for v in obj])
    reader.fields(obj, {"space", "values"}, "function")
    if "values" not in obj:
        raise Malformed('a function needs "values"')
    vals = np.array([decode_real(v) for v in obj["values"]])
    if "space" in obj:
        return Fn(_space(obj["space"], spaces, "function"), vals)
    return vals


def _values(f) -> np.ndarray:
    return f.values if isinstance(f, Fn) else np.asarray(f, dtype=float)


def _measure(obj, spaces: dict, reader: _Reader) -> Measure:
    reader.fields(obj, {"space", "weights"}, "measure")
    return measure_from_json(obj, spaces)


def _transfer(obj: dict, reader: _Reader) -> Transfer:
    reader.fields(obj, {"X", "Y", "cost"}, "transfer")
    if "cost" not in obj or "X" not in obj:
        raise Malformed('a transfer file needs "X" and "cost"')
    spaces = _spaces(obj)
    cost = cost_from_json(obj["cost"], spaces["X"], spaces["Y"], strict=not reader.lax)
    return Transfer(cost, spaces["X"], spaces["Y"])


def _half_max_min(g):
    return np.array([0.5 * (np.max(g) + np.min(g))])


_BUILTINS = {
    "half_max_min": (_half_max_min, "(max g + min g) / 2"),
    "min": (lambda g: np.array([np.min(g)]), "min g"),
    "max": (lambda g: np.array([np.max(g)]), "max g"),
}

_OP_FIELDS = {
    "cost": {"X", "Y", "cost"},
    "markov": {"X", "Y", "matrix"},
    "compose": {"ops"},
    "scale": {"lam", "op"},
    "star_sum": {"ops"},
    "max": {"ops"},
    "recession": {"op"},
    "envelope": {"op", "radius"},
    "builtin": {"name", "Y"},
}


def operator_from_json(obj, strict: bool = True) -> KantorovichOp:
    """Tagged union of operators, keyed by ``"kind"``.

    ``cost`` (with ``X``, ``Y``, ``cost``), ``markov`` (``matrix``),
    ``compose``/``star_sum``/``max`` (``ops``), ``scale`` (``lam``, ``op``),
    ``recession`` and ``envelope`` (``op``) and ``builtin`` black boxes
    (``half_max_min``, ``min``, ``max``) with a one-point ``X``.
    """
    if not isinstance(obj, dict) or obj.get("kind") not in _OP_FIELDS:
        raise Malformed(f"unknown operator kind {obj.get('kind') if isinstance(obj, dict) else obj!r}")
    kind = obj["kind"]
    extra = set(obj) - _OP_FIELDS[kind] - {"kind", "schema_version"}
    if extra:
        if strict:
            raise Malformed(f"unknown fields {sorted(extra)} for operator kind {kind!r}")
        warnings.warn(f"ignoring fields {sorted(extra)} for operator kind {kind!r}", stacklevel=2)
    try:
        if kind in ("cost", "markov", "builtin"):
            spaces = _spaces(obj)
            if kind == "builtin":
                if obj["name"] not in _BUILTINS:
                    raise Malformed(f"unknown builtin operator {obj['name']!r}")
                fn, label = _BUILTINS[obj["name"]]
                return BlackBox(fn, Space.of_size(1), space_from_json(obj["Y"]), name=label)
            if kind == "cost":
                cost = cost_from_json(obj["cost"], spaces["X"], spaces["Y"], strict=strict)
                return FromCost(cost, spaces["X"], spaces["Y"])
            return Markov(Kernel(spaces["X"], spaces["Y"], np.asarray(obj["matrix"], dtype=float)))
        if kind == "compose":
            return compose([operator_from_json(o, strict) for o in obj["ops"]])
        if kind == "max":
            return pointwise_max(*(operator_from_json(o, strict) for o in obj["ops"]))
        if kind == "star_sum":
            a, b = obj["ops"]
            return star_sum(operator_from_json(a, strict), operator_from_json(b, strict))
        if kind == "scale":
            return scale(float(obj["lam"]), operator_from_json(obj["op"], strict))
        if kind == "recession":
            return recession(operator_from_json(obj["op"], strict))
        return kantorovich_envelope(operator_from_json(obj["op"], strict), obj.get("radius"))
    except KeyError as exc:
        raise Malformed(f"operator kind {kind!r} is missing field {exc.args[0]!r}") from None


def _dilations(obj: dict, reader: _Reader) -> DilationFamily:
    reader.fields(obj, {"X", "Y", "constraints_per_x", "barycentric"}, "dilation family")
    spaces = _spaces(obj)
    if "X" not in spaces:
        raise Malformed('a dilation family needs "X"')
    X, Y = spaces["X"], spaces["Y"]
    if obj.get("barycentric"):
        return DilationFamily.barycentric(X, Y)
    if "constraints_per_x" not in obj:
        raise Malformed('a dilation family needs "constraints_per_x" or "barycentric": true')
    return DilationFamily(X, Y, tuple(Polytope.from_json(p, len(Y)) for p in obj["constraints_per_x"]))


def _cone(obj: dict, reader: _Reader):
    kind = obj.get("kind")
    if kind == "convex":
        reader.fields(obj, {"kind", "dim", "X", "Y"}, "cone")
        return ConvexOrder(int(obj.get("dim", 1))), _spaces(obj)
    if kind == "convex_generators":
        reader.fields(obj, {"kind", "X", "Y"}, "cone")
        spaces = _spaces(obj)
        return convex_generators(spaces["X"], spaces["Y"]), spaces
    if kind == "generators":
        reader.fields(obj, {"kind", "X", "Y", "functions"}, "cone")
        spaces = _spaces(obj)
        funcs = tuple(tuple(f) if len(f) == 2 and isinstance(f[0], list) else f for f in obj["functions"])
        return Generators(spaces["X"], spaces["Y"], funcs), spaces
    if kind == "dilations":
        body = {k: v for k, v in obj.items() if k != "kind"}
        fam = _dilations(body, reader)
        return OperatorInduced(fam.operator), {"X": fam.X, "Y": fam.Y}
    raise Malformed(f"unknown cone kind {kind!r}")


def _capacity(obj: dict, reader: _Reader):
    """A set function, or ``{"operator": ...}`` for a functional capacity."""
    if "operator" in obj:
        reader.fields(obj, {"operator"}, "capacity")
        return FunctionalCapacity.from_operator(operator_from_json(obj["operator"], not reader.lax))
    space = space_from_json(obj["space"]) if "space" in obj else None
    return set_function_from_json(obj, space, strict=not reader.lax)


# ---------------------------------------------------------------- payloads

def _result_payload(res) -> dict:
    out = {"value": res.value, "finite": res.finite, "method": res.method, "gap": res.gap}
    if res.coupling is not None:
        out["coupling"] = res.coupling.matrix
    if res.potential is not None:
        out["potential"] = res.potential.values
    if res.kernel is not None:
        out["kernel"] = res.kernel.matrix
    return out


def _eval_one(t: Transfer, mu: Measure, nu: Measure, method: str) -> dict:
    if method == "primal":
        return _result_payload(eval_primal(t, mu, nu))
    if method == "dual":
        return _result_payload(eval_dual(t, mu, nu))
    if method == "sinkhorn":
        return _result_payload(sinkhorn(t, mu, nu))
    p, d = eval_primal(t, mu, nu), eval_dual(t, mu, nu)
    out = _result_payload(p)
    out.update(method="both", primal=p.value, dual=d.value,
               duality_gap=abs(p.value - d.value) if p.finite and d.finite else (0.0 if p.value == d.value else np.inf))
    if d.potential is not None:
        out["potential"] = d.potential.values
    return out


def _entropic_sweep(t: Transfer, mu, nu, eps_list) -> list[dict]:
    if not isinstance(t.cost, Linear):
        raise Malformed("an epsilon sweep needs a linear cost")
    ref = np.full(len(t.Y), 1.0 / len(t.Y))
    rows = []
    for eps in eps_list:
        te = Transfer(EntropicShift(t.cost.matrix, float(eps), ref), t.X, t.Y)
        rows.append({"eps": float(eps), "value": sinkhorn(te, mu, nu).value})
    return rows


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in r])


# ---------------------------------------------------------------- commands

def _cmd_transfer(args, reader: _Reader) -> tuple[dict, bool]:
    if args.action == "compose":
        ts = [_transfer(reader.load(p), reader) for p in args.chain]
        spaces = {"X": ts[0].X, "Y": ts[-1].Y}
        mu = _measure(reader.load(args.mu), spaces, reader)
        nu = _measure(reader.load(args.nu), spaces, reader)
        res = compose_chain(ts, mu, nu)
        out = _result_payload(res)
        out["intermediate_measures"] = [np.asarray(w).tolist() for w in res.details.get("intermediate_measures", [])]
        if "dual_value" in res.details:
            out["dual_value"] = res.details["dual_value"]
        return out, not res.finite
    prob = reader.load(args.cost)
    t = _transfer(prob, reader)
    spaces = {"X": t.X, "Y": t.Y}
    if args.batch:
        batch = reader.load(args.batch)
        reader.fields(batch, {"pairs"}, "batch")
        pairs = [(_measure(p["mu"], spaces, reader), _measure(p["nu"], spaces, reader)) for p in batch["pairs"]]
        with ThreadPoolExecutor(max_workers=max(1, args.jobs)) as pool:
            results = list(pool.map(lambda mn: _eval_one(t, mn[0], mn[1], args.method), pairs))
        return {"results": results}, any(not r["finite"] for r in results)
    if args.mu is None or args.nu is None:
        raise Malformed("transfer eval needs --mu and --nu, or --batch")
    mu = _measure(reader.load(args.mu), spaces, reader)
    nu = _measure(reader.load(args.nu), spaces, reader)
    if args.eps:
        sweep = _entropic_sweep(t, mu, nu, args.eps)
        if args.csv:
            _write_csv(args.csv, ["eps", "value"], [(r["eps"], r["value"]) for r in sweep])
        primal = eval_primal(t, mu, nu)
        return {"sweep": sweep, "value": primal.value, "finite": primal.finite}, not primal.finite
    out = _eval_one(t, mu, nu, args.method)
    return out, not out["finite"]


def _cmd_op(args, reader: _Reader) -> tuple[dict, bool]:
    T = operator_from_json(reader.load(args.operator), not reader.lax)
    g = _function(reader.load(args.fn), {"X": T.X, "Y": T.Y}, reader)
    vals = T(_values(g))
    return {"values": vals, "standard": [bool(v > -np.inf) for v in vals]}, False


def _cmd_balayage(args, reader: _Reader) -> tuple[dict, bool]:
    if args.action == "check":
        cone, spaces = _cone(reader.load(args.cone), reader)
        mu = _measure(reader.load(args.mu), spaces, reader)
        nu = _measure(reader.load(args.nu), spaces, reader)
        ok = order_check(cone, mu, nu)
        out: dict = {"ordered": ok}
        if ok and not isinstance(cone, Generators):
            out["kernel"] = strassen_kernel(cone, mu, nu).matrix
        return out, False
    fam = _dilations(reader.load(args.dilations), reader)
    f = _values(_function(reader.load(args.fn), {"X": fam.X, "Y": fam.Y}, reader))
    env = true_envelope(fam, f)
    trace = envelope_trace(fam, f)
    if args.csv:
        _write_csv(args.csv, ["iteration", "point", "value"],
                   [(k, i, float(v)) for k, row in enumerate(trace) for i, v in enumerate(row)])
    return {"values": env.values, "iterations": len(trace) - 1}, False


def _cmd_capacity(args, reader: _Reader) -> tuple[dict, bool]:
    P = _capacity(reader.load(args.capacity), reader)
    if args.action == "check":
        if isinstance(P, FunctionalCapacity):
            reports = capacity_theorem_check(P, seed=args.seed)
            sat = [saturation_report(P, x, args.seed) for x in range(len(P.X))]
            return {"points": [_report_payload(r) | {"saturation": s.verdict} for r, s in zip(reports, sat)]}, False
        rep = capacity_theorem_check(P, seed=args.seed)
        pair = strong_subadditivity_witness(P, args.seed)
        out = _report_payload(rep)
        out.update(
            strong_subadditivity_witness=list(pair) if pair else None,
            subadditive_order_infinity=is_subadditive_order_infinity(P),
            strictly_subadditive_order_infinity=is_strictly_subadditive_order_infinity(P),
            saturation=saturation_report(P).verdict,
        )
        return out, False
    f = _function(reader.load(args.fn), {"Y": P.Y if isinstance(P, FunctionalCapacity) else P.space}, reader)
    vals = _values(f)
    if args.action == "choquet":
        if isinstance(P, FunctionalCapacity):
            raise Malformed("the Choquet integral takes a set function")
        out = {"value": choquet_integral(P, vals)}
        if args.exact:
            out["exact"] = choquet_integral(P, vals, exact=True)
        return out, False
    if args.kind == "ck":
        if not isinstance(P, FunctionalCapacity):
            raise Malformed("the ck envelope takes a capacity read from an operator")
        return {"values": ck_envelope(P, vals).values}, False
    res = dellacherie_envelope(P, vals)
    return ({"values": res.values} if isinstance(res, Fn) else {"value": res}), False


def _report_payload(rep) -> dict:
    return {
        "strongly_subadditive": rep.strongly_subadditive,
        "extension_subadditive": rep.extension_subadditive,
        "subadditivity_witness": list(rep.subadditivity_witness) if rep.subadditivity_witness else None,
        "strictly_subadditive_inf": rep.strictly_subadditive_inf,
        "envelope_matches_on_sets": rep.envelope_matches_on_sets,
        "equivalences_hold": rep.passed,
    }


def _cmd_oracle(args, reader: _Reader) -> tuple[dict, bool]:
    kind = args.kind
    if kind == "hull":
        spaces = _spaces(reader.load(args.dilations)) if args.dilations else {}
        f = _function(reader.load(args.fn), spaces, reader)
        if not isinstance(f, Fn) or f.space.dim != 1:
            raise Malformed("the hull oracle needs a function on a 1-D grid")
        return {"values": oracles.upper_concave_envelope(f.space.coords[:, 0], f.values)}, False
    if kind == "vertices":
        obj = reader.load(args.polytope)
        reader.fields(obj, {"size", "polytope"}, "oracle input")
        P = Polytope.from_json(obj["polytope"], int(obj["size"]))
        rng = np.random.default_rng(args.seed)
        dirs = oracles.vertices_by_directions(P, rng)
        out: dict = {"by_directions": sorted(dirs.tolist())}
        try:
            out["by_supports"] = sorted(oracles.vertices_by_supports(P).tolist())
        except NotImplementedError:
            out["by_supports"] = None
        return out, False
    if kind == "conjugate":
        T = operator_from_json(reader.load(args.operator), not reader.lax)
        g = _values(_function(reader.load(args.fn), {"X": T.X, "Y": T.Y}, reader))
        return {"values": [oracles.grid_conjugate_envelope(T, g, x) for x in range(len(T.X))]}, False
    if kind == "choquet":
        P = _capacity(reader.load(args.capacity), reader)
        f = _values(_function(reader.load(args.fn), {"Y": P.space}, reader))
        return {"value": oracles.choquet_by_levels(lambda k: P.values[k], f)}, False
    if kind == "pairs":
        P = _capacity(reader.load(args.capacity), reader)
        pair = strong_subadditivity_witness(P, args.seed)
        return {"strongly_subadditive": pair is None, "witness": list(pair) if pair else None}, False
    if kind == "transport":
        prob = reader.load(args.cost)
        t = _transfer(prob, reader)
        if not isinstance(t.cost, Linear):
            raise Malformed("the transport oracle needs a linear cost")
        spaces = {"X": t.X, "Y": t.Y}
        mu = _measure(reader.load(args.mu), spaces, reader)
        nu = _measure(reader.load(args.nu), spaces, reader)
        return _transport_lp(t.cost.matrix, mu.weights, nu.weights)
    raise Malformed(f"unknown oracle {kind!r}")


def _transport_lp(C, a, b) -> tuple[dict, bool]:
    """Plain transportation LP with forbidden cells as zero-bounded variables."""
    n, m = C.shape
    A = np.vstack([np.kron(np.eye(n), np.ones(m)), np.kron(np.ones(n), np.eye(m))])
    upper = np.where(np.isfinite(C.ravel()), np.inf, 0.0)
    res = lp.solve(lp.LinearProgram(np.where(np.isfinite(C), C, 0.0).ravel(), A, ("==",) * (n + m),
                                    np.concatenate([a, b]), None, upper))
    if res.status is not lp.Status.OPTIMAL:
        return {"value": np.inf, "finite": False}, True
    return {"value": res.value, "finite": True, "coupling": res.x.reshape(n, m)}, False


# ------------------------------------------------------------------ parser

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kantorovich", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("--seed", type=int, default=0, help="seed for every randomized check (default 0)")
    p.add_argument("--jobs", type=int, default=1, help="parallel workers for batch files")
    p.add_argument("--csv", help="write a CSV trace (epsilon sweeps, envelope iterations)")
    p.add_argument("--dump-lp", action="store_true", help="print every solved LP tableau to stderr")
    p.add_argument("--lax", action="store_true", help="warn about unknown fields instead of failing")
    sub = p.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("transfer", help="evaluate or compose transfers").add_subparsers(dest="action", required=True)
    ev = tr.add_parser("eval", help="value of a transfer at (mu, nu)")
    ev.add_argument("--cost", required=True)
    ev.add_argument("--mu")
    ev.add_argument("--nu")
    ev.add_argument("--batch", help='file with {"pairs": [{"mu": ..., "nu": ...}, ...]}')
    ev.add_argument("--method", choices=("primal", "dual", "both", "sinkhorn"), default="primal")
    ev.add_argument("--eps", type=float, nargs="+", help="entropic sweep over these epsilons")
    co = tr.add_parser("compose", help="value of a chain of transfers")
    co.add_argument("--chain", nargs="+", required=True)
    co.add_argument("--mu", required=True)
    co.add_argument("--nu", required=True)

    op = sub.add_parser("op", help="operators").add_subparsers(dest="action", required=True)
    ap = op.add_parser("apply", help="apply an operator to a function")
    ap.add_argument("--operator", required=True)
    ap.add_argument("--fn", required=True)

    ba = sub.add_parser("balayage", help="balayage orders").add_subparsers(dest="action", required=True)
    ck = ba.add_parser("check", help="is mu below nu in the cone order")
    ck.add_argument("--cone", required=True)
    ck.add_argument("--mu", required=True)
    ck.add_argument("--nu", required=True)
    en = ba.add_parser("envelope", help="smallest superharmonic majorant")
    en.add_argument("--dilations", required=True)
    en.add_argument("--fn", required=True)

    ca = sub.add_parser("capacity", help="set functions and capacities").add_subparsers(dest="action", required=True)
    cc = ca.add_parser("check", help="subadditivity and equivalence report")
    cc.add_argument("--capacity", required=True)
    ce = ca.add_parser("envelope", help="Dellacherie or Choquet-Kantorovich envelope")
    ce.add_argument("--capacity", required=True)
    ce.add_argument("--fn", required=True)
    ce.add_argument("--kind", choices=("dellacherie", "ck"), default="dellacherie")
    ch = ca.add_parser("choquet", help="Choquet integral")
    ch.add_argument("--capacity", required=True)
    ch.add_argument("--fn", required=True)
    ch.add_argument("--exact", action="store_true", help="also report the rational value")

    orc = sub.add_parser("oracle", help="brute-force reference computations")
    orc.add_argument("kind", choices=("hull", "vertices", "conjugate", "choquet", "pairs", "transport"))
    for flag in ("--fn", "--polytope", "--operator", "--capacity", "--cost", "--mu", "--nu", "--dilations"):
        orc.add_argument(flag)
    return p


_COMMANDS = {
    "transfer": _cmd_transfer,
    "op": _cmd_op,
    "balayage": _cmd_balayage,
    "capacity": _cmd_capacity,
    "oracle": _cmd_oracle,
}


def run(argv=None, stdout=None, stderr=None) -> int:
    """Run one command; returns the exit code."""
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    reader = _Reader(args.lax)
    if args.dump_lp:
        lp.set_dump(stderr)
    try:
        with warnings.catch_warnings(record=True) as caught:
            warnings.simplefilter("always")
            payload, infinite = _COMMANDS[args.command](args, reader)
        for w in caught:
            print(f"warning: {w.message}", file=stderr)
    except InputError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), file=stdout)
        return EXIT_INPUT
    except KantorovichError as exc:
        print(dumps({"error": type(exc).__name__, "message": str(exc)}), file=stdout)
        return EXIT_NUMERICAL
    finally:
        if args.dump_lp:
            lp.set_dump(None)
    print(dumps({"command": f"{args.command} {getattr(args, 'action', None) or args.kind}", **payload}), file=stdout)
    return EXIT_INFINITE if infinite else EXIT_OK


def main() -> None:
    sys.exit(run())
