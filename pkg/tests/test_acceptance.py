"""Acceptance suite: one test per criterion, each printed as PASS/FAIL at the end of the run."""
import os
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from fixture_suite import SUITE, run_capture
from kantorovich.balayage import (
    ConvexOrder,
    DilationFamily,
    convex_generators,
    envelope_trace,
    order_check,
    strassen_kernel,
    true_envelope,
)
from kantorovich.capacities import (
    capacity_theorem_check,
    choquet_integral,
    dellacherie_envelope,
    induced_set_function,
    is_strongly_subadditive,
)
from kantorovich.core import Kernel, Space, dirac, make_measure, pushforward
from kantorovich.costs import BarycentricPL, BarycentricQuad, Dilation, EntropicShift, Linear, SumCost
from kantorovich.instances import (
    mean_preserving_spread,
    random_instance,
    random_measure,
    random_non_submodular,
    random_pl,
    random_point_in,
    random_submodular,
)
from kantorovich.operators import (
    BlackBox,
    FromCost,
    Markov,
    compose,
    entropic,
    kantorovich_envelope,
    pointwise_max,
    recession,
    recession_probe,
    scale,
    star_sum,
)
from kantorovich.oracles import grid_conjugate_envelope, upper_concave_envelope
from kantorovich.transfers import (
    Transfer,
    compose_chain,
    eval_dual,
    eval_primal,
    sinkhorn,
    strassen_decompose,
)

TESTS = Path(__file__).parent


def _rel(a, b):
    return abs(a - b) / (1 + abs(a))


def _same_value(a, b, tol=1e-6):
    if np.isinf(a) or np.isinf(b):
        return a == b
    return _rel(a, b) <= tol


@pytest.mark.criterion(1, "duality suite")
def test_primal_and_dual_values_agree_on_random_instances():
    rng = np.random.default_rng(2024)
    families = ["linear", "pl", "dilation", "sum"]
    start = time.perf_counter()
    bad = []
    for k in range(500):
        fam = families[k % 4]
        t, mu, nu = random_instance(fam, rng, max_size=6)
        p, d = eval_primal(t, mu, nu).value, eval_dual(t, mu, nu).value
        if not _same_value(p, d):
            bad.append((k, fam, p, d))
    elapsed = time.perf_counter() - start
    assert not bad, bad[:5]
    assert elapsed < 60.0, f"took {elapsed:.1f} s"


GRID = np.arange(-2.0, 2.01, 0.25)
LINE = Space.grid(GRID)


def _spread_pair(rng):
    k = int(rng.integers(1, 4))
    pts = rng.choice(GRID[2:-2], size=k, replace=False)
    w = rng.dirichlet(np.ones(k))
    mu = mean_preserving_spread(pts, w, GRID, rng, steps=0)
    nu = mean_preserving_spread(pts, w, GRID, rng, steps=int(rng.integers(1, 5)))
    return make_measure(LINE, mu), make_measure(LINE, nu)


def _max_violation(gens, mu, nu):
    return max(float(a @ mu.weights - b @ nu.weights) for a, b in gens.functions)


@pytest.mark.criterion(2, "strassen suite")
def test_convex_order_on_spreads_and_violating_pairs():
    rng = np.random.default_rng(77)
    gens = convex_generators(LINE, LINE)
    lp = ConvexOrder()
    ordered = 0
    while ordered < 200:
        mu, nu = _spread_pair(rng)
        assert order_check(lp, mu, nu)
        assert order_check(gens, mu, nu)
        K = strassen_kernel(lp, mu, nu)
        assert np.allclose(pushforward(mu, K).weights, nu.weights, atol=1e-9)
        charged = mu.weights > 0
        assert np.max(np.abs(K.matrix[charged] @ GRID - GRID[charged])) <= 1e-9
        ordered += 1
    unordered = 0
    while unordered < 200:
        if unordered % 2 == 0:
            # a genuine spread read backwards
            mu, nu = _spread_pair(rng)
            mu, nu = nu, mu
        else:
            mu = make_measure(LINE, rng.dirichlet(np.full(len(GRID), 0.5)))
            nu = make_measure(LINE, rng.dirichlet(np.full(len(GRID), 0.5)))
        if _max_violation(gens, mu, nu) <= 1e-9:
            continue
        assert not order_check(lp, mu, nu)
        assert not order_check(gens, mu, nu)
        unordered += 1


def _standard_instance(rng):
    fam = ["linear", "pl", "dilation", "sum", "quad", "entropic"][int(rng.integers(6))]
    while True:
        t, mu, nu = random_instance(fam, rng, max_size=4)
        if all(t.standard) and np.isfinite(eval_primal(t, mu, nu).value):
            return t, mu, nu


def _sample_in_domain(t, x, rng):
    parts = t.cost.parts()
    for part in parts:
        if isinstance(part, Dilation):
            return random_point_in(part.family[x].vertex_list(), rng)
    s = rng.dirichlet(np.ones(len(t.Y)))
    return np.where(t.cost.forbidden(x), 0.0, s) / np.where(t.cost.forbidden(x), 0.0, s).sum()


@pytest.mark.criterion(3, "representation")
def test_transfer_is_recovered_from_its_point_costs():
    rng = np.random.default_rng(303)
    for _ in range(100):
        t, mu, nu = _standard_instance(rng)
        # the cost at a point is the transfer started from a Dirac mass
        for x in range(len(t.X)):
            s = _sample_in_domain(t, x, rng)
            point = eval_primal(t, dirac(t.X, x), make_measure(t.Y, s)).value
            assert _rel(t.cost.value(x, s), point) <= 1e-6
        p = eval_primal(t, mu, nu)
        d = eval_dual(t, mu, nu)
        assert isinstance(t.operator, FromCost) and t.operator.cost is t.cost
        assert _rel(p.value, d.value) <= 1e-6
        K = strassen_decompose(t, mu, nu, result=p, tol=1e-6)
        rows = sum(mu.weights[x] * t.cost.value(x, K.matrix[x]) for x in np.flatnonzero(mu.weights > 0))
        assert _rel(p.value, rows) <= 1e-6


def _chain_stage(X, Y, rng):
    """A linear-representable stage and a kernel inside its domain."""
    n, m = len(X), len(Y)
    kind = int(rng.integers(4))
    C = np.round(rng.random((n, m)), 3)
    if kind == 0:
        return Linear(C), rng.dirichlet(np.ones(m), n)
    if kind == 1:
        return random_pl(Y, n, rng), rng.dirichlet(np.ones(m), n)
    dil = Dilation.barycentric(X.coords, Y.coords)
    K = np.array([random_point_in(P.vertex_list(), rng) for P in dil.family])
    if kind == 2:
        return dil, K
    return SumCost((Linear(C), dil)), K


def _points(k, half_width, rng):
    inner = rng.choice(np.linspace(-half_width, half_width, 9)[1:-1], size=k - 2, replace=False)
    return np.sort(np.concatenate([[-half_width, half_width], inner]))


@pytest.mark.criterion(4, "composition")
def test_chain_value_equals_composed_dual():
    rng = np.random.default_rng(404)
    for _ in range(100):
        S0 = Space.grid(rng.choice([-0.5, -0.25, 0.0, 0.25, 0.5], size=int(rng.integers(1, 5)), replace=False))
        S1 = Space.grid(_points(int(rng.integers(2, 5)), 1.0, rng))
        S2 = Space.grid(_points(int(rng.integers(2, 5)), 2.0, rng))
        c1, K1 = _chain_stage(S0, S1, rng)
        c2, K2 = _chain_stage(S1, S2, rng)
        mu = random_measure(S0, rng)
        if rng.random() < 0.5:
            nu = make_measure(S2, mu.weights @ K1 @ K2)
        else:
            nu = random_measure(S2, rng)
        res = compose_chain([Transfer(c1, S0, S1), Transfer(c2, S1, S2)], mu, nu, check_dual=True)
        assert _same_value(res.value, res.details["dual_value"])


def _normalized_costs(rng):
    """One cost per family, each with values in [0, 1] on its domain."""
    X = Space.grid([-0.5, 0.0, 0.5])
    Y = Space.grid([-1.0, -0.5, 0.0, 0.5, 1.0])
    n, m = len(X), len(Y)
    # a zero piece keeps the maximum nonnegative; |slope|, intercept <= 1/2 keep it below 1
    slopes = tuple(np.vstack([[0.0], rng.uniform(-0.5, 0.5, (2, 1))]) for _ in range(n))
    inter = tuple(np.concatenate([[0.0], rng.uniform(0.0, 0.5, 2)]) for _ in range(n))
    dil = Dilation.barycentric(X.coords, Y.coords)
    costs = {
        "linear": Linear(rng.random((n, m))),
        "pl": BarycentricPL(Y.coords, slopes, inter),
        # |mean - x| <= 3/2, so the cost stays below 0.5625
        "quad": BarycentricQuad(X.coords, Y.coords, 0.5),
        # base <= 1/2 and eps * KL <= eps * log m = 1/2
        "entropic": EntropicShift(0.5 * rng.random((n, m)), 0.5 / np.log(m), np.full(m, 1.0 / m)),
        "dilation": dil,
        "sum": SumCost((Linear(rng.random((n, m))), dil)),
    }
    return X, Y, costs


@pytest.mark.criterion(5, "recession")
def test_recession_is_the_limit_of_rescaled_operators():
    rng = np.random.default_rng(505)
    X, Y, costs = _normalized_costs(rng)
    for name, cost in costs.items():
        T = FromCost(cost, X, Y)
        R = recession(T)
        for _ in range(100):
            u = rng.standard_normal(len(Y))
            g = u / np.max(np.abs(u)) * rng.uniform(1.0, 5.0)
            norm = float(np.max(np.abs(g)))
            rec = R(g)
            probe = recession_probe(T, g)
            assert np.all(np.abs(rec - probe[-1]) <= 1e-3 * norm), name
            assert np.all(np.diff(probe, axis=0) >= -1e-9 * (1 + np.abs(probe[1:]))), name
            assert np.all(rec >= probe[:-1] - 1e-9 * (1 + np.abs(rec))), name


@pytest.mark.criterion(6, "envelope suite")
def test_envelope_of_the_barycentric_family_is_the_concave_hull():
    rng = np.random.default_rng(606)
    family = DilationFamily.barycentric(LINE, LINE)
    assert len(GRID) == 17
    for _ in range(50):
        f = rng.normal(size=17) * rng.choice([0.1, 1.0, 10.0])
        env = true_envelope(family, f).values
        assert np.max(np.abs(env - upper_concave_envelope(GRID, f))) <= 1e-9
        assert np.all(env >= f - 1e-12)
        assert np.max(np.abs(true_envelope(family, env).values - env)) <= 1e-9
        trace = envelope_trace(family, f)
        assert all(np.all(b >= a) for a, b in zip(trace, trace[1:]))


def _operator_catalogue():
    rng = np.random.default_rng(707)
    X = Space.grid([-0.5, 0.0, 0.5])
    Y = Space.grid([-1.0, -0.5, 0.0, 0.5, 1.0])
    C1, C2 = np.round(rng.random((3, 5)), 3), np.round(rng.random((3, 5)), 3)
    C2[1, 4] = np.inf
    bary = Dilation.barycentric(X.coords, Y.coords)
    lin = FromCost(Linear(C1), X, Y)
    lin2 = FromCost(Linear(C2), X, Y)
    mart = FromCost(SumCost((Linear(np.abs(X.coords - Y.coords.T)), bary)), X, Y)
    quad = FromCost(BarycentricQuad(X.coords, Y.coords, 1.0), X, Y)
    mk = Markov(Kernel(X, Y, rng.dirichlet(np.ones(5), 3)))
    ent = entropic(C1, 0.3, np.full(5, 0.2), X, Y)
    square = Markov(Kernel(Y, Y, rng.dirichlet(np.ones(5), 5)))
    return {
        "linear": lin,
        "linear with a forbidden cell": lin2,
        "martingale": mart,
        "barycentric dilation": FromCost(bary, X, Y),
        "quadratic": quad,
        "steep quadratic": FromCost(BarycentricQuad(X.coords, Y.coords, 3.0), X, Y),
        "markov": mk,
        "entropic": ent,
        "flat entropic": entropic(C2, 1.0, rng.dirichlet(np.ones(5)), X, Y),
        "piecewise linear": FromCost(random_pl(Y, 3, rng), X, Y),
        "linear after markov": compose([lin, square]),
        "martingale after markov": compose([mart, square]),
        "scaled quadratic": scale(2.5, quad),
        "scaled entropic": scale(0.5, ent),
        "max of linear and markov": pointwise_max(lin, mk),
        "max of quadratic and entropic": pointwise_max(quad, ent),
        "star sum": star_sum(lin, quad),
        "star sum of linears": star_sum(lin, lin2),
        "recession of martingale": recession(mart),
        "recession of quadratic": recession(quad),
    }


@pytest.mark.criterion(7, "kantorovich envelope")
def test_envelope_of_kantorovich_operators_is_themselves():
    catalogue = _operator_catalogue()
    assert len(catalogue) == 20
    rng = np.random.default_rng(708)
    for name, T in catalogue.items():
        E = kantorovich_envelope(T)
        for _ in range(50):
            g = rng.uniform(-3.0, 3.0, len(T.Y))
            assert np.max(np.abs(E(g) - T(g))) <= 1e-6, name
    half = BlackBox(lambda g: np.array([0.5 * (g.max() + g.min())]), Space.of_size(1), Space.of_size(2))
    E = kantorovich_envelope(half)
    for _ in range(50):
        g = rng.uniform(-3.0, 3.0, 2)
        env = E(g)[0]
        assert abs(env - g.mean()) <= 1e-4
        assert abs(env - grid_conjugate_envelope(half, g, 0)) <= 1e-4


def _idempotent(P, rng):
    Q = induced_set_function(lambda f: dellacherie_envelope(P, f), P.space)
    for _ in range(20):
        f = rng.random(P.m) * 2
        if abs(dellacherie_envelope(Q, f) - dellacherie_envelope(P, f)) > 1e-9:
            return False
    return True


@pytest.mark.criterion(8, "capacity suite")
def test_dellacherie_and_choquet_on_random_set_functions():
    rng = np.random.default_rng(808)
    for k in range(50):
        P = random_submodular(Space.of_size(3 + k % 4), rng)
        assert is_strongly_subadditive(P)
        F = rng.random((1000, P.m)) * rng.choice([1.0, 10.0], size=(1000, 1))
        worst = max(abs(dellacherie_envelope(P, f) - choquet_integral(P, f)) for f in F)
        assert worst <= 1e-9
        assert _idempotent(P, rng)
    for k in range(50):
        P = random_non_submodular(Space.of_size(3 + k % 4), rng)
        assert not is_strongly_subadditive(P)
        rep = capacity_theorem_check(P, samples=200, seed=k)
        assert rep.subadditivity_witness is not None and rep.passed
        f, g = rep.subadditivity_witness
        assert choquet_integral(P, f + g) > choquet_integral(P, f) + choquet_integral(P, g)
        assert _idempotent(P, rng)


@pytest.mark.criterion(9, "entropic limit")
def test_sinkhorn_decreases_to_the_linear_program():
    rng = np.random.default_rng(909)
    for _ in range(20):
        n, m = int(rng.integers(2, 6)), int(rng.integers(2, 6))
        X, Y = Space.of_size(n), Space.of_size(m)
        C = np.round(rng.random((n, m)), 3)
        mu, nu = random_measure(X, rng), random_measure(Y, rng)
        lp = eval_primal(Transfer(Linear(C), X, Y), mu, nu).value
        previous = np.inf
        for eps in (1.0, 0.1, 0.01):
            t = Transfer(EntropicShift(C, eps, np.full(m, 1.0 / m)), X, Y)
            sk = sinkhorn(t, mu, nu).value
            fw = eval_primal(t, mu, nu, cross_check=False).value
            assert sk <= previous + 1e-9
            assert lp - 1e-9 <= sk <= lp + eps * np.log(m) + 1e-6
            assert _rel(sk, fw) <= 1e-6
            previous = sk


_DRIVER = """
import sys
sys.path.insert(0, sys.argv[1])
from fixture_suite import SUITE, run_capture
sys.stdout.write("".join(run_capture(["--seed", "7", *map(str, a)]) for a in SUITE))
"""


@pytest.mark.criterion(10, "determinism")
def test_fixture_suite_output_is_byte_identical():
    outputs = []
    for hash_seed in ("1", "2"):
        env = dict(os.environ, PYTHONHASHSEED=hash_seed)
        proc = subprocess.run([sys.executable, "-c", _DRIVER, str(TESTS)], capture_output=True, text=True,
                              env=env, check=True)
        outputs.append(proc.stdout)
    in_process = "".join(run_capture(["--seed", "7", *map(str, a)]) for a in SUITE)
    assert outputs[0] == outputs[1] == in_process
    assert outputs[0].count('"schema_version"') == len(SUITE)
