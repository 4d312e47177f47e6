import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kantorovich.core import Kernel, Space
from kantorovich.costs import BarycentricQuad, Dilation, Linear, SumCost
from kantorovich.errors import Malformed, NonPositiveLambda, NonStandard, SpaceMismatch
from kantorovich.operators import (
    BlackBox,
    FromCost,
    Markov,
    SupFamily,
    apply,
    as_cost,
    check_axioms,
    compose,
    entropic,
    kantorovich_envelope,
    pointwise_max,
    recession,
    recession_probe,
    scale,
    star_sum,
)

X = Space.grid([-0.5, 0.0, 0.5])
Y = Space.grid([-1.0, -0.5, 0.0, 0.5, 1.0])
R = np.random.default_rng(7)
C = np.round(R.random((3, 5)), 3)
K = R.dirichlet(np.ones(5), 3)


def _catalogue():
    lin = FromCost(Linear(C), X, Y)
    mart = FromCost(SumCost((Linear(np.abs(X.coords - Y.coords.T)), Dilation.barycentric(X.coords, Y.coords))), X, Y)
    quad = FromCost(BarycentricQuad(X.coords, Y.coords, 1.0), X, Y)
    mk = Markov(Kernel(X, Y, K))
    ent = entropic(C, 0.3, np.full(5, 0.2), X, Y)
    sq = Markov(Kernel(Y, Y, R.dirichlet(np.ones(5), 5)))
    return {
        "linear": lin, "martingale": mart, "quad": quad, "markov": mk, "entropic": ent,
        "compose": compose([lin, sq]), "scale": scale(2.5, quad), "max": pointwise_max(lin, mk),
        "star_sum": star_sum(lin, quad), "recession": recession(mart),
    }


CATALOGUE = _catalogue()
pots = st.lists(st.floats(-4.0, 4.0), min_size=5, max_size=5).map(np.array)


@pytest.mark.parametrize("name", sorted(CATALOGUE))
def test_catalogue_satisfies_axioms(name):
    rep = check_axioms(CATALOGUE[name], sample_count=30, seed=3)
    assert rep.passed, rep.witnesses


def test_min_black_box_fails_convexity():
    T = BlackBox(lambda g: np.array([np.min(g)]), Space.of_size(1), Space.of_size(3))
    rep = check_axioms(T, sample_count=100, seed=0)
    assert not rep.convex
    g, h = rep.witnesses["convex"][:2]
    mid = T(0.5 * g + 0.5 * h)
    assert mid[0] > 0.5 * T(g)[0] + 0.5 * T(h)[0]


@given(pots)
def test_linear_cost_operator_is_row_max(g):
    expect = np.max(g[None, :] - C, axis=1)
    assert np.allclose(CATALOGUE["linear"](g), expect, atol=1e-12)


@given(pots, st.floats(-10, 10))
def test_constants_pass_through(g, c):
    for name in ("markov", "entropic", "martingale"):
        T = CATALOGUE[name]
        assert np.allclose(T(g + c), T(g) + c, atol=1e-9 * (1 + abs(c)))


@given(pots)
def test_star_sum_is_operator_of_summed_cost(g):
    lhs = CATALOGUE["star_sum"](g)
    rhs = FromCost(SumCost((Linear(C), BarycentricQuad(X.coords, Y.coords, 1.0))), X, Y)(g)
    assert np.allclose(lhs, rhs, atol=1e-6)


@given(pots)
def test_compose_applies_last_operator_first(g):
    lin, sq = CATALOGUE["linear"], CATALOGUE["compose"].ops[1]
    assert np.allclose(CATALOGUE["compose"](g), lin(sq(g)), atol=1e-12)


@given(pots)
def test_recession_is_domain_support(g):
    # recession of the martingale operator: best mean-preserving spread of g
    rec = CATALOGUE["recession"](g)
    probe = recession_probe(CATALOGUE["martingale"], g)
    assert np.all(np.diff(probe, axis=0) >= -1e-9)
    assert np.all(rec >= probe[-1] - 1e-9)
    dil = FromCost(Dilation.barycentric(X.coords, Y.coords), X, Y)
    assert np.allclose(rec, dil(g), atol=1e-9)


def test_scale_rejects_nonpositive_lambda():
    with pytest.raises(NonPositiveLambda):
        scale(0.0, CATALOGUE["linear"])


def test_space_checks():
    with pytest.raises(SpaceMismatch):
        CATALOGUE["linear"](np.zeros(3))
    with pytest.raises(SpaceMismatch):
        compose([CATALOGUE["linear"], CATALOGUE["linear"]])


def test_non_standard_point_gives_minus_infinity():
    Cinf = C.copy()
    Cinf[1] = np.inf
    vals = apply(FromCost(Linear(Cinf), X, Y), np.zeros(5))
    assert vals.values[1] == -np.inf and np.isfinite(vals.values[0])


def test_sup_family_requires_finite_supremum():
    T = SupFamily((CATALOGUE["linear"], CATALOGUE["markov"]))
    assert np.allclose(T(np.ones(5)), np.maximum(CATALOGUE["linear"](np.ones(5)), 1.0))
    with pytest.raises(Malformed):
        SupFamily(())


def test_as_cost_exposes_explicit_costs():
    assert isinstance(as_cost(CATALOGUE["linear"]), Linear)
    assert as_cost(BlackBox(lambda g: g[:1], Space.of_size(1), Y)) is None


def test_envelope_of_averaging_black_box():
    T = BlackBox(lambda g: np.array([0.5 * (g.max() + g.min())]), Space.of_size(1), Space.of_size(2))
    E = kantorovich_envelope(T)
    rng = np.random.default_rng(0)
    for _ in range(10):
        g = rng.uniform(-3, 3, 2)
        assert E(g)[0] == pytest.approx(g.mean(), abs=1e-4)


def test_envelope_of_markov_plus_constant_is_itself():
    T = BlackBox(lambda g: K @ g + 0.7, X, Y)
    assert check_axioms(T, sample_count=20).passed
    E = kantorovich_envelope(T)
    rng = np.random.default_rng(1)
    for _ in range(10):
        g = rng.standard_normal(5)
        assert np.allclose(E(g), T(g), atol=1e-6)


def test_envelope_lies_below_black_box():
    T = BlackBox(lambda g: np.array([np.max(g) ** 2 / (1 + np.max(np.abs(g)))]), Space.of_size(1), Space.of_size(3))
    E = kantorovich_envelope(T, radius=50.0)
    rng = np.random.default_rng(2)
    for _ in range(5):
        g = rng.standard_normal(3)
        try:
            assert E(g)[0] <= T(g)[0] + 1e-9
        except NonStandard:
            pass


def test_envelope_dominates_identity_when_operator_does():
    # X = Y and T >= I: the envelope stays above the identity
    S = Space.of_size(3)
    T = BlackBox(lambda g: np.maximum(g, 0.5 * (g.max() + g.min())), S, S)
    E = kantorovich_envelope(T)
    rng = np.random.default_rng(4)
    for _ in range(5):
        g = rng.standard_normal(3)
        assert np.all(E(g) >= g - 1e-6)
