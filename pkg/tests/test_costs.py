import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kantorovich.core import Space
from kantorovich.costs import (
    BarycentricPL,
    BarycentricQuad,
    Dilation,
    EntropicShift,
    Linear,
    SumCost,
    cost_from_json,
    cost_to_json,
    domain_polytope,
    domain_support,
    eval_cost,
    frank_wolfe_value,
    maximize_linear_minus_cost,
    scale_cost,
)
from kantorovich.errors import BadEpsilon, DimensionMismatch, Malformed

Y = np.array([-1.0, -0.5, 0.0, 0.5, 1.0])
XC = np.array([-0.5, 0.25])


def _families():
    C = np.array([[0.0, 1.0, np.inf, 2.0, 0.5], [1.0, 0.0, 0.3, 0.2, 0.1]])
    pl = BarycentricPL(Y[:, None], (np.array([[1.0], [-1.0]]), np.array([[2.0]])),
                       (np.array([0.0, 0.0]), np.array([0.5])))
    return {
        "linear": Linear(C),
        "pl": pl,
        "quad": BarycentricQuad(XC[:, None], Y[:, None], 1.5),
        "dilation": Dilation.barycentric(XC, Y),
        "entropic": EntropicShift(np.nan_to_num(C, posinf=3.0), 0.2, np.full(5, 0.2)),
        "sum": SumCost((Linear(np.abs(XC[:, None] - Y[None, :])), Dilation.barycentric(XC, Y))),
    }


FAMILIES = _families()
probs = st.lists(st.floats(0.0, 1.0), min_size=5, max_size=5).filter(lambda w: sum(w) > 1e-3)
pots = st.lists(st.floats(-3.0, 3.0), min_size=5, max_size=5)


@pytest.mark.parametrize("name", sorted(FAMILIES))
@given(w=probs, g=pots, x=st.integers(0, 1))
def test_fenchel_young_inequality(name, w, g, x):
    c = FAMILIES[name]
    s = np.array(w) / sum(w)
    g = np.array(g)
    val, arg = maximize_linear_minus_cost(c, x, g)
    cs = eval_cost(c, x, s)
    if np.isfinite(cs):
        assert g @ s - cs <= val + 1e-7 * (1 + abs(val))
    if arg is not None:
        assert g @ arg - eval_cost(c, x, arg) == pytest.approx(val, abs=1e-7 * (1 + abs(val)))


@pytest.mark.parametrize("name", ["linear", "pl", "quad", "entropic"])
@given(a=probs, b=probs, t=st.floats(0.0, 1.0), x=st.integers(0, 1))
def test_convex_in_the_measure(name, a, b, t, x):
    c = FAMILIES[name]
    a, b = np.array(a) / sum(a), np.array(b) / sum(b)
    lhs = eval_cost(c, x, t * a + (1 - t) * b)
    rhs = t * eval_cost(c, x, a) + (1 - t) * eval_cost(c, x, b)
    if np.isfinite(rhs):
        assert lhs <= rhs + 1e-9 * (1 + abs(rhs))


@pytest.mark.parametrize("name", ["quad", "entropic", "pl"])
@given(g=pots, x=st.integers(0, 1))
def test_closed_forms_match_generic_route(name, g, x):
    c = FAMILIES[name]
    a, _ = maximize_linear_minus_cost(c, x, np.array(g))
    b, _ = frank_wolfe_value(c, x, np.array(g))
    assert a == pytest.approx(b, abs=1e-6 * (1 + abs(a)))


def test_linear_values_and_forbidden_cells():
    c = FAMILIES["linear"]
    assert eval_cost(c, 0, [0, 0, 1, 0, 0]) == np.inf
    assert eval_cost(c, 0, [0.5, 0.5, 0, 0, 0]) == pytest.approx(0.5)
    val, s = maximize_linear_minus_cost(c, 0, np.zeros(5))
    assert val == 0.0 and s[0] == 1.0


def test_dilation_is_zero_inside_and_infinite_outside():
    c = FAMILIES["dilation"]
    inside = np.array([0.75, 0, 0, 0, 0.25])  # mean -0.5
    assert eval_cost(c, 0, inside) == 0.0
    assert eval_cost(c, 0, np.full(5, 0.2)) == np.inf


def test_entropic_value_is_linear_plus_kl():
    c = FAMILIES["entropic"]
    s = np.array([0.1, 0.2, 0.3, 0.2, 0.2])
    expect = c.base[1] @ s + 0.2 * np.sum(s * np.log(s / 0.2))
    assert eval_cost(c, 1, s) == pytest.approx(expect)
    with pytest.raises(BadEpsilon):
        EntropicShift(np.zeros((1, 2)), 0.0, [0.5, 0.5])


def test_scaling_and_recession():
    c = FAMILIES["pl"]
    s = np.array([0.2, 0.2, 0.2, 0.2, 0.2])
    assert eval_cost(scale_cost(c, 3.0), 1, s) == pytest.approx(3 * eval_cost(c, 1, s))
    lin = FAMILIES["linear"]
    r = lin.recession()
    assert eval_cost(r, 0, [0.5, 0.5, 0, 0, 0]) == 0.0
    assert eval_cost(r, 0, [0, 0, 1, 0, 0]) == np.inf
    # max of y^2 over measures with mean -1/2: mass 3/4 at -1, 1/4 at 1
    g = Y**2
    assert domain_support(FAMILIES["sum"], 0, g) == pytest.approx(1.0)


def test_domain_polytope_of_sum_cost():
    P = domain_polytope(FAMILIES["sum"], 1)
    for v in P.vertex_list():
        assert v @ Y == pytest.approx(0.25)


def test_bad_shapes_rejected():
    with pytest.raises(DimensionMismatch):
        eval_cost(FAMILIES["linear"], 0, [1.0])
    with pytest.raises(DimensionMismatch):
        maximize_linear_minus_cost(FAMILIES["linear"], 5, np.zeros(5))
    with pytest.raises(Malformed):
        maximize_linear_minus_cost(FAMILIES["linear"], 0, [np.inf, 0, 0, 0, 0])


@pytest.mark.parametrize("name", sorted(FAMILIES))
def test_json_round_trip(name):
    c = FAMILIES[name]
    X, Ys = Space.grid(XC), Space.grid(Y)
    back = cost_from_json(json.loads(json.dumps(cost_to_json(c))), X, Ys)
    rng = np.random.default_rng(1)
    for _ in range(5):
        s = rng.dirichlet(np.ones(5))
        for x in range(2):
            assert eval_cost(back, x, s) == pytest.approx(eval_cost(c, x, s))


def test_json_strictness():
    with pytest.raises(Malformed):
        cost_from_json({"kind": "linear", "matrix": [[0]], "extra": 1})
    assert isinstance(cost_from_json({"kind": "linear", "matrix": [[0]], "extra": 1}, strict=False), Linear)
    with pytest.raises(Malformed):
        cost_from_json({"kind": "mystery"})
