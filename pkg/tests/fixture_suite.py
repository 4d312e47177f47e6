"""Every CLI fixture command, shared by the CLI and acceptance tests."""
import io
import json
from pathlib import Path

from kantorovich.cli import run

FIX = Path(__file__).parent / "fixtures"


def cli(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = run([str(a) for a in argv], stdout=out, stderr=err)
    text = out.getvalue()
    return code, (json.loads(text) if text.strip() else None), err.getvalue()


def f(name):
    return FIX / name


# the whole fixture suite; reused for the determinism check
SUITE = [
    ("transfer", "eval", "--cost", f("martingale_cost.json"), "--mu", f("martingale_mu.json"),
     "--nu", f("martingale_nu.json"), "--method", "both"),
    ("transfer", "eval", "--cost", f("markov_cost.json"), "--mu", f("markov_mu.json"), "--nu", f("markov_nu_good.json")),
    ("transfer", "eval", "--cost", f("markov_cost.json"), "--mu", f("markov_mu.json"), "--nu", f("markov_nu_bad.json"),
     "--method", "dual"),
    ("transfer", "eval", "--cost", f("linear_cost.json"), "--batch", f("linear_batch.json")),
    ("transfer", "eval", "--cost", f("linear_cost.json"), "--mu", f("linear_mu.json"), "--nu", f("linear_nu.json"),
     "--eps", "1", "0.1", "0.01"),
    ("transfer", "compose", "--chain", f("linear_cost.json"), f("linear_cost.json"), "--mu", f("linear_mu.json"),
     "--nu", f("linear_nu.json")),
    ("op", "apply", "--operator", f("op_half.json"), "--fn", f("fn_two.json")),
    ("op", "apply", "--operator", f("op_markov.json"), "--fn", f("fn_two.json")),
    ("balayage", "check", "--cone", f("convex_cone.json"), "--mu", f("spread_mu.json"), "--nu", f("spread_nu.json")),
    ("balayage", "check", "--cone", f("convex_cone.json"), "--mu", f("spread_nu.json"), "--nu", f("spread_mu.json")),
    ("balayage", "envelope", "--dilations", f("grid_dilations.json"), "--fn", f("grid_fn.json")),
    ("capacity", "check", "--capacity", f("cap_sqrt.json")),
    ("capacity", "check", "--capacity", f("cap_two.json")),
    ("capacity", "envelope", "--capacity", f("cap_op.json"), "--fn", f("cap_fn.json"), "--kind", "ck"),
    ("capacity", "choquet", "--capacity", f("cap_sqrt.json"), "--fn", f("cap_fn.json"), "--exact"),
    ("oracle", "hull", "--fn", f("grid_fn.json"), "--dilations", f("grid_dilations.json")),
    ("oracle", "vertices", "--polytope", f("polytope.json")),
    ("oracle", "transport", "--cost", f("linear_cost.json"), "--mu", f("linear_mu.json"), "--nu", f("linear_nu.json")),
    ("oracle", "pairs", "--capacity", f("cap_two.json")),
]


def run_capture(argv):
    """Standard output of one in-process run."""
    out = io.StringIO()
    run([str(a) for a in argv], stdout=out, stderr=io.StringIO())
    return out.getvalue()
