import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from simplex_reach import quantum_lift as ql
from simplex_reach.errors import InvalidInputError
from simplex_reach.generator import build_B0, build_lindblad_pair


def _pair(n=3, theta=np.pi / 6):
    p = build_lindblad_pair(n, theta)
    return p, build_B0(p)


def test_vec_round_trip_and_matrix_action():
    rng = np.random.default_rng(0)
    pair, _ = _pair()
    rho = ql.random_density_matrix(3, rng)
    assert np.allclose(ql.unvec(ql.vec(rho), 3), rho)
    L = ql.gksl_matrix(pair.operators, 3)
    assert np.allclose(ql.unvec(L @ ql.vec(rho), 3), ql.gksl_apply(pair.operators, rho), atol=1e-13)


def test_sigma_minus_decay_of_qubit():
    sm = np.array([[0, 1], [0, 0]], dtype=complex)  # |0><1|
    rho = np.array([[0.25, 0.3], [0.3, 0.75]], dtype=complex)
    t = 0.8
    out = ql.lift_semigroup([sm], t, 2)(rho)
    # excited population decays as e^{-t}, coherence as e^{-t/2}
    assert out[1, 1].real == pytest.approx(0.75 * np.exp(-t))
    assert abs(out[0, 1]) == pytest.approx(0.3 * np.exp(-t / 2))


def test_lift_matches_scipy_expm():
    pair, _ = _pair(4, [0.2, 0.7, 1.3])
    L = ql.gksl_matrix(pair.operators, 4)
    S = ql.lift_semigroup(pair.operators, 0.9, 4)
    assert np.allclose(S.matrix, scipy.linalg.expm(-0.9 * L), atol=1e-12)


@pytest.mark.parametrize("t", [0.01, 0.1, 1.0, 10.0])
def test_diagonal_restriction_cp_and_trace(t):
    pair, G = _pair()
    S = ql.lift_semigroup(pair.operators, t)
    assert np.abs(ql.diagonal_restriction(S) - G.propagator(t)).max() < 1e-10
    assert ql.is_completely_positive(S)
    assert ql.trace_preservation_residual(S) < 1e-10


def test_inverse_map_is_not_cp():
    pair, _ = _pair()
    S = ql.lift_semigroup(pair.operators, 1.0)
    inv = ql.SuperOperator(np.linalg.inv(S.matrix))
    assert ql.choi_min_eigenvalue(inv) < -1e-3
    assert ql.trace_preservation_residual(inv) < 1e-10


def test_diagonal_invariance():
    pair, _ = _pair()
    assert ql.diagonal_invariance_check(pair.operators)
    assert ql.diagonal_invariance_check([])
    # a jump that creates coherence between levels 0 and 1
    V = np.zeros((3, 3))
    V[0, 0] = V[1, 0] = 1.0
    rep = ql.diagonal_invariance_check([V])
    assert not rep and rep.max_offdiagonal > 0.1


def test_permutation_matrix_convention():
    x = np.array([0.5, 0.3, 0.2])
    perm = [2, 0, 1]
    assert np.allclose(ql.permutation_matrix(perm) @ x, x[perm])


def test_density_matrix_validation():
    with pytest.raises(InvalidInputError):
        ql.density_matrix(np.diag([1.2, -0.2]))
    with pytest.raises(InvalidInputError):
        ql.density_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(InvalidInputError):
        ql.gksl_apply([np.eye(2), np.eye(3)], np.eye(2) / 2)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.floats(1e-3, 20.0), st.integers(0, 2**32 - 1))
def test_trace_norm_contraction(n, t, seed):
    rng = np.random.default_rng(seed)
    theta = rng.uniform(0.05, np.pi / 2 - 0.05, n - 1)
    pair, _ = _pair(n, theta)
    S = ql.lift_semigroup(pair.operators, t, n)
    pairs = [(ql.random_density_matrix(n, rng), ql.random_density_matrix(n, rng))
             for _ in range(4)]
    assert ql.contraction_excess(S, pairs) <= 1e-10
    out = S(pairs[0][0])
    assert np.linalg.eigvalsh(0.5 * (out + out.conj().T)).min() >= -1e-10
