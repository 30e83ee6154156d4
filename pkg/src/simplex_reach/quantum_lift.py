"""Full density-matrix GKSL dynamics and its relation to the simplex model.

Vectorisation is column stacking throughout: ``vec(A X B) = (B.T kron A) vec(X)``
and the matrix unit ``E_ij`` has index ``i + j*n`` in ``vec`` space.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError
from .linalg import expm


def _as_ops(V_list) -> list[np.ndarray]:
    ops = [np.asarray(v, dtype=complex) for v in V_list]
    for v in ops:
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InvalidInputError("jump operators must be square matrices")
    if ops and len({v.shape for v in ops}) != 1:
        raise InvalidInputError("jump operators have mismatched dimensions")
    return ops


def density_matrix(rho, tol: float = 1e-12) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInputError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise InvalidInputError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1) > tol:
        raise InvalidInputError("density matrix trace is not 1")
    if np.linalg.eigvalsh(rho).min() < -1e-10:
        raise InvalidInputError("density matrix has a negative eigenvalue")
    return rho


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, n: int) -> np.ndarray:
    return np.asarray(v).reshape((n, n), order="F")


def gksl_apply(V_list, rho) -> np.ndarray:
    """Dissipator ``sum_k (1/2){V_k^+ V_k, rho} - V_k rho V_k^+``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise InvalidInputError("rho must be square")
    ops = _as_ops(V_list)
    out = np.zeros_like(rho)
    for v in ops:
        if v.shape != rho.shape:
            raise InvalidInputError(
                f"operator shape {v.shape} does not match rho {rho.shape}"
            )
        vd = v.conj().T
        vdv = vd @ v
        out += 0.5 * (vdv @ rho + rho @ vdv) - v @ rho @ vd
    return out


def gksl_matrix(V_list, n: int | None = None) -> np.ndarray:
    """Matrix of the dissipator acting on ``vec(rho)``."""
    ops = _as_ops(V_list)
    if n is None:
        if not ops:
            raise InvalidInputError("cannot infer dimension from an empty operator list")
        n = ops[0].shape[0]
    eye = np.eye(n)
    L = np.zeros((n * n, n * n), dtype=complex)
    for v in ops:
        if v.shape != (n, n):
            raise InvalidInputError("operator dimension mismatch")
        vdv = v.conj().T @ v
        L += 0.5 * (np.kron(eye, vdv) + np.kron(vdv.T, eye)) - np.kron(v.conj(), v)
    return L


@dataclass(frozen=True)
class SuperOperator:
    matrix: np.ndarray

    def __post_init__(self):
        m = self.matrix
        n = int(round(np.sqrt(m.shape[0])))
        if m.ndim != 2 or m.shape[0] != m.shape[1] or n * n != m.shape[0]:
            raise InvalidInputError("superoperator must be n^2 x n^2")

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0])))

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        return unvec(self.matrix @ vec(rho), self.n)


def lift_semigroup(V_list, t: float, n: int | None = None) -> SuperOperator:
    """``exp(-t Gamma)`` as a superoperator."""
    if t < 0:
        raise InvalidInputError("duration must be non-negative")
    return SuperOperator(expm(-t * gksl_matrix(V_list, n)))


def choi_matrix(S: SuperOperator) -> np.ndarray:
    """``sum_ij E_ij (x) S(E_ij)``."""
    n = S.n
    choi = np.zeros((n * n, n * n), dtype=complex)
    for i in range(n):
        for j in range(n):
            image = unvec(S.matrix[:, i + j * n], n)
            choi[i * n:(i + 1) * n, j * n:(j + 1) * n] = image
    return choi


def choi_min_eigenvalue(S: SuperOperator) -> float:
    c = choi_matrix(S)
    return float(np.linalg.eigvalsh(0.5 * (c + c.conj().T)).min())


def is_completely_positive(S: SuperOperator, tol: float = 1e-10) -> bool:
    return choi_min_eigenvalue(S) >= -tol


def trace_preservation_residual(S: SuperOperator) -> float:
    """``max |vec(I)^T S - vec(I)^T|``; zero iff ``S`` preserves trace."""
    left = vec(np.eye(S.n))
    return float(np.abs(left @ S.matrix - left).max())


def diagonal_restriction(S: SuperOperator) -> np.ndarray:
    """Populations map: entry ``(i, j)`` is ``<i| S(E_jj) |i>``."""
    n = S.n
    idx = np.arange(n) * (n + 1)
    return S.matrix[np.ix_(idx, idx)]


@dataclass(frozen=True)
class DiagonalInvarianceReport:
    invariant: bool
    max_offdiagonal: float

    def __bool__(self) -> bool:
        return self.invariant


def diagonal_invariance_check(V_list, n: int | None = None,
                              tol: float = 1e-12) -> DiagonalInvarianceReport:
    ops = _as_ops(V_list)
    if not ops:
        return DiagonalInvarianceReport(True, 0.0)
    n = ops[0].shape[0] if n is None else n
    worst = 0.0
    for j in range(n):
        rho = np.zeros((n, n), dtype=complex)
        rho[j, j] = 1.0
        out = gksl_apply(ops, rho)
        worst = max(worst, float(np.abs(out - np.diag(np.diag(out))).max()))
    return DiagonalInvarianceReport(worst <= tol, worst)


def trace_distance(rho: np.ndarray, sigma: np.ndarray) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))).sum())


def contraction_excess(S: SuperOperator, pairs) -> float:
    """Largest ``D(S rho, S sigma) - D(rho, sigma)`` over the state pairs.

    Non-positive for a trace-norm contraction; only sampled pairs are checked.
    """
    worst = -np.inf
    for rho, sigma in pairs:
        worst = max(worst, trace_distance(S(rho), S(sigma)) - trace_distance(rho, sigma))
    return float(worst)


def random_density_matrix(n: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def permutation_matrix(perm) -> np.ndarray:
    """``P`` with ``P @ x == x[perm]``."""
    perm = np.asarray(perm)
    return np.eye(perm.size)[perm]
