import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kantorovich.core import Kernel, Space
from kantorovich.operators import BlackBox, Markov
from kantorovich.oracles import (
    choquet_by_levels,
    grid_conjugate_envelope,
    transport_by_bases,
    upper_concave_envelope,
    vertices_by_directions,
    vertices_by_supports,
)
from kantorovich.polytope import Polytope

XS = np.linspace(-1.0, 1.0, 9)


@given(st.lists(st.floats(-5.0, 5.0), min_size=9, max_size=9))
def test_hull_is_a_concave_majorant_touching_f(f):
    f = np.array(f)
    h = upper_concave_envelope(XS, f)
    assert np.all(h >= f - 1e-12)
    # equal spacing: concavity is a nonpositive second difference
    assert np.all(np.diff(h, 2) <= 1e-9)
    assert h[0] == f[0] and h[-1] == f[-1]


def test_hull_of_a_concave_function_is_itself():
    f = -XS**2
    assert np.allclose(upper_concave_envelope(XS, f), f)


def test_vertex_oracles_agree_on_a_barycentric_polytope():
    P = Polytope.barycentric(np.array([[-1.0], [0.0], [0.5], [2.0]]), np.array([0.25]))
    by_sup = {tuple(np.round(v, 9)) for v in vertices_by_supports(P)}
    by_dir = {tuple(np.round(v, 9)) for v in vertices_by_directions(P, np.random.default_rng(0))}
    assert by_dir == by_sup
    # each vertex uses one point on either side of the mean
    assert len(by_sup) == 4


def test_grid_conjugation_recovers_a_markov_row():
    X, Y = Space.of_size(1), Space.of_size(2)
    T = Markov(Kernel(X, Y, np.array([[0.3, 0.7]])))
    assert grid_conjugate_envelope(T, [1.0, -2.0], 0) == pytest.approx(0.3 - 1.4, abs=1e-3)


def test_grid_conjugation_of_half_max_min_is_the_mean():
    T = BlackBox(lambda g: np.array([0.5 * (g.max() + g.min())]), Space.of_size(1), Space.of_size(2))
    assert grid_conjugate_envelope(T, [2.0, -1.0], 0) == pytest.approx(0.5, abs=1e-3)


def test_choquet_levels_on_cardinality():
    # P(A) = |A| / 3 is additive, so the integral is the mean
    card = lambda mask: bin(mask).count("1") / 3
    assert choquet_by_levels(card, [3.0, 0.0, 1.5]) == pytest.approx(1.5)


def test_transport_by_bases():
    C = np.array([[0.0, 1.0], [1.0, 0.0]])
    assert transport_by_bases(C, [0.5, 0.5], [0.5, 0.5]) == pytest.approx(0.0)
    assert transport_by_bases(C, [1.0, 0.0], [0.5, 0.5]) == pytest.approx(0.5)
    C_inf = np.array([[0.0, np.inf], [0.0, np.inf]])
    assert transport_by_bases(C_inf, [0.5, 0.5], [0.5, 0.5]) == np.inf
