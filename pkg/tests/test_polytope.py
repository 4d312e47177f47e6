import numpy as np
import pytest

from kantorovich.errors import Malformed
from kantorovich.oracles import vertices_by_directions, vertices_by_supports
from kantorovich.polytope import Polytope


def _same_rows(a, b):
    a = sorted(map(tuple, np.round(a, 9)))
    b = sorted(map(tuple, np.round(b, 9)))
    return a == b


def test_barycentric_vertices_are_two_point_straddles():
    P = Polytope.barycentric([-1.0, 0.0, 1.0, 2.0], 0.5)
    V = P.vertex_list()
    assert _same_rows(V, vertices_by_supports(P))
    for v in V:
        assert np.count_nonzero(v > 1e-12) <= 2
        assert v @ np.array([-1.0, 0.0, 1.0, 2.0]) == pytest.approx(0.5)


def test_vertex_enumeration_matches_random_directions(rng):
    for _ in range(10):
        coords = np.sort(rng.choice(np.arange(-8, 9) / 4, size=6, replace=False))
        P = Polytope.barycentric(coords, rng.uniform(coords[1], coords[-2]))
        assert _same_rows(P.vertex_list(), vertices_by_directions(P, rng, trials=600))


def test_membership_and_emptiness():
    P = Polytope.barycentric([0.0, 1.0], 0.25)
    assert P.contains([0.75, 0.25])
    assert not P.contains([0.5, 0.5])
    assert Polytope.barycentric([0.0, 1.0], 2.0).is_empty()
    assert not Polytope.simplex(3).is_empty()


def test_vertex_list_polytope_maximize():
    P = Polytope.hull([[1, 0, 0], [0, 0.5, 0.5]])
    val, v = P.maximize([0.0, 2.0, 0.0])
    assert val == pytest.approx(1.0)
    assert np.allclose(v, [0, 0.5, 0.5])
    assert P.contains([0.5, 0.25, 0.25])
    assert not P.contains([0, 1, 0])


def test_vertices_must_be_probabilities():
    with pytest.raises(Malformed):
        Polytope.hull([[0.5, 0.6]])


def test_json_round_trip():
    P = Polytope(3, A_eq=[[1, 0, -1]], b_eq=[0.0], A_ub=[[0, 1, 0]], b_ub=[0.5])
    Q = Polytope.from_json(P.to_json(), 3)
    assert _same_rows(P.vertex_list(), Q.vertex_list())
    with pytest.raises(Malformed):
        Polytope.from_json({"A_eq": [[1, 1]], "bogus": 1}, 2)
