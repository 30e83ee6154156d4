import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from simplex_reach import majorisation as mj
from simplex_reach.errors import InvalidInputError, MajorisationViolation, SizeError

FIG_D = np.array([9.0, 3.0, 1.0]) / 13
FIG_X0 = np.array([0.9, 0.07, 0.03])


def test_classical_examples():
    u = np.full(3, 1 / 3)
    assert mj.classical_majorises([1, 0, 0], u)
    assert mj.classical_majorises([0.6, 0.3, 0.1], [0.5, 0.3, 0.2])
    assert not mj.classical_majorises([0.5, 0.3, 0.2], [0.6, 0.3, 0.1])
    assert mj.classical_majorises([0.2, 0.5, 0.3], [0.3, 0.2, 0.5])  # permutations
    assert mj.classical_margin([0.5, 0.3, 0.2], [0.6, 0.3, 0.1]) == pytest.approx(0.1)


def test_d_majorisation_reduces_to_classical_for_uniform_d():
    rng = np.random.default_rng(1)
    u = np.full(4, 0.25)
    for _ in range(200):
        y, x = rng.dirichlet(np.ones(4)), rng.dirichlet(np.ones(4))
        assert mj.d_majorises(u, y, x) == mj.classical_majorises(y, x)


def test_d_itself_is_minimal_and_vectorised_agrees():
    rng = np.random.default_rng(2)
    X = rng.dirichlet(np.ones(3), size=50)
    for y in X:
        assert mj.d_majorises(FIG_D, y, FIG_D)
    many = mj.d_majorises_many(FIG_D, FIG_X0, X)
    assert many.tolist() == [mj.d_majorises(FIG_D, FIG_X0, x) for x in X]


def test_witness_matrix_properties():
    rng = np.random.default_rng(3)
    A0 = mj.random_d_stochastic(FIG_D, rng)
    x = A0 @ FIG_X0
    W = mj.witness_matrix(FIG_D, FIG_X0, x)
    assert W is not None and W.is_valid(FIG_D, FIG_X0, x)
    A = W.A
    assert np.allclose(A.sum(axis=0), 1) and np.allclose(A @ FIG_D, FIG_D) and A.min() >= 0
    assert np.allclose(A @ FIG_X0, x, atol=1e-10)
    assert mj.witness_matrix(FIG_D, FIG_D, FIG_X0) is None


def test_figure_polytope_and_dominating_vertex():
    P = mj.build_polytope(FIG_D, FIG_X0)
    assert len(P.vertices) == 5
    z = mj.dominating_vertex(P)
    assert np.allclose(z, [0.9, 0.07 + 0.02 / 3, 0.03 - 0.02 / 3], atol=1e-9)
    for v in P.vertices:
        assert mj.classical_majorises(z, v, 1e-10)
        assert P.contains(v, 1e-9)
    assert len(mj.permutohedron_vertices(z)) == 6


def test_dominating_vertex_special_cases():
    # x0 = d: the polytope is the single point d
    P = mj.build_polytope(FIG_D, FIG_D)
    assert np.allclose(mj.dominating_vertex(P), FIG_D)
    # uniform d: classical permutohedron, z = x0 sorted descending
    u = np.full(3, 1 / 3)
    y = np.array([0.2, 0.7, 0.1])
    assert np.allclose(mj.dominating_vertex(mj.build_polytope(u, y)), [0.7, 0.2, 0.1])


def test_polytope_json_round_trip():
    P = mj.build_polytope(FIG_D, FIG_X0)
    Q = mj.MajorisationPolytope.from_json_dict(json.loads(json.dumps(P.to_json_dict())))
    assert np.allclose(Q.vertices, P.vertices)
    assert len(Q.halfspaces) == len(P.halfspaces)


def test_pruning_keeps_the_same_vertices():
    rng = np.random.default_rng(4)
    d = rng.dirichlet(np.ones(4))
    y = rng.dirichlet(np.ones(4))
    a = mj.build_polytope(d, y, prune=True)
    b = mj.build_polytope(d, y, prune=False)
    assert len(a.halfspaces) <= len(b.halfspaces)
    key = lambda V: sorted(map(tuple, np.round(V, 8)))
    assert key(a.vertices) == key(b.vertices)


def test_permute_region_and_hull():
    P = mj.build_polytope(FIG_D, FIG_X0)
    Q = mj.permute_region(P, [2, 0, 1])
    assert np.allclose(sorted(map(tuple, Q.vertices)),
                       sorted(map(tuple, P.vertices[:, [2, 0, 1]])), atol=1e-9)
    assert mj.in_convex_hull(np.eye(3), [0.2, 0.3, 0.5])
    assert not mj.in_convex_hull(np.eye(3)[:2], [0.2, 0.3, 0.5])
    with pytest.raises(InvalidInputError):
        mj.permute_region(P, [0, 0, 1])


def test_errors():
    with pytest.raises(SizeError):
        mj.build_polytope(np.full(6, 1 / 6), np.full(6, 1 / 6))
    with pytest.raises(InvalidInputError):
        mj.d_majorises([0.5, 0.5], [1.0, 0.0], [1.0, 0.0, 0.0])


def test_missing_dominating_vertex_raises():
    # two incomparable points: partial sums (0.5, 1.0) vs (0.6, 0.8)
    data = mj.build_polytope(FIG_D, FIG_X0).to_json_dict()
    data["vertices"] = [[0.5, 0.5, 0.0], [0.6, 0.2, 0.2]]
    P = mj.MajorisationPolytope.from_json_dict(data)
    with pytest.raises(MajorisationViolation):
        mj.dominating_vertex(P)
    assert len(mj.dominating_candidates(P)) == 0


@st.composite
def triple(draw):
    n = draw(st.integers(2, 4))
    seed = draw(st.integers(0, 2**32 - 1))
    return mj.random_triple(n, np.random.default_rng(seed))


@settings(max_examples=150, deadline=None)
@given(triple())
def test_norm_criterion_agrees_with_lp(t):
    d, y, x = t
    assert mj.d_majorises(d, y, x) == (mj.witness_matrix(d, y, x) is not None)


@settings(max_examples=60, deadline=None)
@given(triple())
def test_order_is_reflexive_and_transitive(t):
    d, y, _ = t
    rng = np.random.default_rng(0)
    x1 = mj.random_d_stochastic(d, rng) @ y
    x2 = mj.random_d_stochastic(d, rng) @ x1
    assert mj.d_majorises(d, y, y)
    assert mj.d_majorises(d, y, x1, 1e-10) and mj.d_majorises(d, x1, x2, 1e-10)
    assert mj.d_majorises(d, y, x2, 1e-10)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(0, 2**32 - 1))
def test_polytope_vertices_are_d_majorised(n, seed):
    rng = np.random.default_rng(seed)
    d = np.maximum(rng.dirichlet(np.ones(n)), 1e-2)
    d /= d.sum()
    y = rng.dirichlet(np.ones(n))
    P = mj.build_polytope(d, y)
    assert np.allclose(P.vertices.sum(axis=1), 1)
    for v in P.vertices:
        assert mj.d_majorises(d, y, v, 1e-9)
