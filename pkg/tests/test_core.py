import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from kantorovich.core import (
    Coupling,
    Fn,
    Kernel,
    Space,
    barycenter,
    decode_real,
    dirac,
    disintegrate,
    disjoint_union,
    encode_real,
    ext_add,
    integrate,
    kernel_to_coupling,
    make_measure,
    marginals,
    measure_from_json,
    measure_to_json,
    pushforward,
    space_from_json,
    space_to_json,
    uniform,
)
from kantorovich.errors import (
    DimensionMismatch,
    ExtendedRealError,
    Malformed,
    NegativeMass,
    NoEmbedding,
    NotAProbability,
)

weights = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=6).filter(lambda w: sum(w) > 1e-3)


def test_space_rejects_duplicates_and_empty():
    with pytest.raises(Malformed):
        Space(("a", "a"))
    with pytest.raises(Malformed):
        Space(())


def test_space_coordinate_shape_checked():
    with pytest.raises(DimensionMismatch):
        Space(("a", "b"), coords=[[0.0], [1.0], [2.0]])


def test_metric_must_be_symmetric():
    with pytest.raises(Malformed):
        Space((0, 1), metric=[[0, 1], [2, 0]])


def test_grid_space_labels_are_points():
    S = Space.grid([0.0, 0.5, 1.0])
    assert S.dim == 1
    assert S.index(0.5) == 1


def test_make_measure_validates():
    S = Space.of_size(3)
    with pytest.raises(NegativeMass):
        make_measure(S, [1.2, -0.2, 0.0])
    with pytest.raises(NotAProbability):
        make_measure(S, [0.5, 0.2, 0.2])
    with pytest.raises(DimensionMismatch):
        make_measure(S, [1.0])
    mu = make_measure(S, [0.5, 0.5 + 1e-10, 0.0])
    assert abs(mu.weights.sum() - 1.0) < 1e-15


def test_extended_real_arithmetic():
    assert ext_add(np.inf, 3.0) == np.inf
    with pytest.raises(ExtendedRealError):
        ext_add(np.inf, -np.inf)
    assert integrate([np.inf, 0.0], [0.0, 1.0]) == 0.0
    assert integrate([np.inf, 0.0], [0.5, 0.5]) == np.inf
    with pytest.raises(ExtendedRealError):
        integrate([np.inf, -np.inf], [0.5, 0.5])


def test_extended_real_json_round_trip():
    for x in (np.inf, -np.inf, 1.5):
        assert decode_real(json.loads(json.dumps(encode_real(x)))) == x
    with pytest.raises(Malformed):
        decode_real("nan")


def test_fn_rejects_nan():
    with pytest.raises(Malformed):
        Fn(Space.of_size(2), [0.0, np.nan])


@given(weights, st.integers(1, 5), st.randoms(use_true_random=False))
def test_disintegration_round_trip(w, m, r):
    n = len(w)
    rng = np.random.default_rng(r.randint(0, 2**32 - 1))
    X, Y = Space.of_size(n), Space.of_size(m)
    mu = make_measure(X, np.array(w) / sum(w))
    K = rng.random((n, m)) + 0.01
    K /= K.sum(axis=1, keepdims=True)
    pi = kernel_to_coupling(mu, Kernel(X, Y, K))
    mu2, k2 = disintegrate(pi)
    pi2 = kernel_to_coupling(mu2, k2)
    assert np.max(np.abs(pi2.matrix - pi.matrix)) <= 1e-12
    a, b = marginals(pi)
    assert np.allclose(a.weights, mu.weights, atol=1e-12)
    assert np.allclose(b.weights, pushforward(mu, Kernel(X, Y, K)).weights, atol=1e-12)


def test_zero_rows_default_to_uniform_and_are_flagged():
    X, Y = Space.of_size(2), Space.of_size(3)
    pi = Coupling(X, Y, [[0.5, 0.25, 0.25], [0, 0, 0]])
    _, k = disintegrate(pi)
    assert k.defaulted == (1,)
    assert np.allclose(k.matrix[1], 1 / 3)


def test_barycenter_needs_coordinates():
    with pytest.raises(NoEmbedding):
        barycenter(uniform(Space.of_size(2)))
    S = Space.grid([-1.0, 1.0])
    assert barycenter(uniform(S))[0] == 0.0


def test_disjoint_union_tags_sides():
    U = disjoint_union(Space(("a",)), Space(("a", "b")))
    assert len(U) == 3


def test_measure_json_round_trip():
    S = Space(("p", "q"), coords=[[0.0, 1.0], [2.0, 3.0]])
    mu = make_measure(S, [0.25, 0.75])
    back = measure_from_json(json.loads(json.dumps(measure_to_json(mu))))
    assert back.space == S and np.array_equal(back.weights, mu.weights)
    assert space_from_json(space_to_json(S)) == S
    named = measure_from_json({"space": "X", "weights": [1.0, 0.0]}, {"X": S})
    assert named.weights[0] == 1.0
    with pytest.raises(Malformed):
        measure_from_json({"space": "Z", "weights": [1.0]}, {"X": S})


def test_dirac_and_uniform():
    S = Space.of_size(4)
    assert dirac(S, 2).weights[2] == 1.0
    assert np.allclose(uniform(S).weights, 0.25)
