"""Thermal generator of the toy model.

Builds the Gibbs fixed point, the pair of thermal jump operators
``V_plus = sum_k sqrt(k(n-k)) cos(theta_k) E_{k,k+1}`` and
``V_minus = sum_k sqrt(k(n-k)) sin(theta_k) E_{k+1,k}``, and the matrix ``B0``
that the GKSL dissipator induces on diagonal states, so that populations obey
``dx/dt = -B0 x``.

Index convention: ``V_minus`` moves population from level k to k+1, hence
with ``theta = pi/2`` everywhere the last level is absorbing, and a Gibbs vector
with ascending energies is stationary for the detailed-balance angles of
:func:`thermal_angles`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateGeneratorError,
    InvalidInputError,
    NumericalFailure,
    RegimeError,
    SizeError,
)
from .linalg import expm

PROB_TOL = 1e-12
RANK_TOL = 1e-10
DEFAULT_TENSOR_CAP = 4096


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


def prob_vector(x, tol: float = PROB_TOL) -> np.ndarray:
    """Validate ``x`` as a point of the standard simplex.

    Entries in ``[-tol, 0)`` are clamped to zero; anything more negative, or a
    total off by more than ``tol``, raises. Returns a read-only float array.
    """
    x = np.array(x, dtype=float).ravel()
    if x.size < 1 or not np.all(np.isfinite(x)):
        raise InvalidInputError("probability vector must be finite and non-empty")
    if x.min() < -tol:
        raise InvalidInputError(f"negative probability {x.min():.3e}")
    if abs(x.sum() - 1.0) > tol:
        raise InvalidInputError(f"probabilities sum to {x.sum():.17g}, not 1")
    x[x < 0] = 0.0
    return _frozen(x)


@dataclass(frozen=True)
class EnergySpec:
    energies: tuple
    temperature: float

    def __post_init__(self):
        object.__setattr__(self, "energies", tuple(float(e) for e in self.energies))
        if self.temperature < 0 or math.isnan(self.temperature):
            raise InvalidInputError("temperature must be >= 0 or inf")

    @property
    def n(self) -> int:
        return len(self.energies)

    def is_equidistant(self, tol: float = 1e-12) -> bool:
        gaps = np.diff(self.energies)
        return bool(gaps.size == 0 or np.all(np.abs(gaps - gaps[0]) <= tol))


@dataclass(frozen=True)
class LindbladPair:
    n: int
    theta: np.ndarray
    V_plus: np.ndarray
    V_minus: np.ndarray

    @property
    def operators(self) -> list[np.ndarray]:
        return [self.V_plus, self.V_minus]


@dataclass(frozen=True)
class GeneratorMatrix:
    """Generator ``B0`` of a column-stochastic semigroup ``exp(-t B0)``.

    ``fixed_point`` is ``None`` when the kernel is not one-dimensional (the
    multi-qudit case). If the matrix came from :func:`build_tensor_B0`,
    ``local`` holds the last-factor block and ``identity_dim`` the size of the
    identity it is tensored with, so propagators never need the full matrix.
    """

    B0: np.ndarray
    fixed_point: np.ndarray | None = None
    local: np.ndarray | None = field(default=None, repr=False)
    identity_dim: int = 1

    @property
    def n(self) -> int:
        return self.B0.shape[0]

    @property
    def rate_scale(self) -> float:
        """Induced 1-norm of ``B0``; sets the natural time unit."""
        block = self.B0 if self.local is None else self.local
        return float(np.abs(block).sum(axis=0).max())

    def propagator(self, t: float) -> np.ndarray:
        """Dense ``exp(-t B0)``."""
        if t < 0:
            raise InvalidInputError("duration must be non-negative")
        if self.local is None:
            return expm(-t * self.B0)
        return np.kron(np.eye(self.identity_dim), expm(-t * self.local))


def _check_generator(q: np.ndarray) -> None:
    scale = max(1.0, float(np.abs(q).max()))
    if np.abs(q.sum(axis=0)).max() > PROB_TOL * scale:
        raise NumericalFailure("columns of -B0 do not sum to zero")
    off = q - np.diag(np.diag(q))
    if off.min() < -PROB_TOL * scale:
        raise NumericalFailure("-B0 has a negative off-diagonal rate")


def gibbs_vector(spec: EnergySpec) -> np.ndarray:
    """Boltzmann weights ``exp(-e_k / T)``, normalised.

    ``T = inf`` gives the uniform vector and ``T = 0`` the indicator of the
    ground level, split uniformly over degenerate minima.
    """
    e = np.asarray(spec.energies, dtype=float)
    if e.size < 2:
        raise InvalidInputError("need at least two levels")
    if not np.all(np.isfinite(e)):
        raise InvalidInputError("energies must be finite")
    T = spec.temperature
    if math.isinf(T):
        return prob_vector(np.full(e.size, 1.0 / e.size))
    if T == 0:
        ground = np.abs(e - e.min()) <= PROB_TOL * max(1.0, np.abs(e).max())
        d = ground / ground.sum()
        return prob_vector(d)
    w = np.exp(-(e - e.min()) / T)
    return prob_vector(w / w.sum())


def thermal_angles(d) -> np.ndarray:
    """Angles with ``tan(theta_k)**2 == d[k+1] / d[k]`` (detailed balance)."""
    d = np.asarray(d, dtype=float).ravel()
    if d.size < 2:
        raise InvalidInputError("need at least two levels")
    if np.any(d <= 0):
        raise RegimeError(
            "thermal angles need a strictly positive fixed point; "
            "for T = 0 use theta = pi/2 (single lowering operator)"
        )
    return _frozen(np.arctan2(np.sqrt(d[1:]), np.sqrt(d[:-1])))


def build_lindblad_pair(n: int, theta) -> LindbladPair:
    n = int(n)
    if n < 2:
        raise InvalidInputError("need at least two levels")
    theta = np.asarray(theta, dtype=float)
    theta = np.full(n - 1, float(theta)) if theta.ndim == 0 else theta.ravel()
    if theta.size != n - 1:
        raise InvalidInputError(f"expected {n - 1} angles, got {theta.size}")
    if np.any(~np.isfinite(theta)) or np.any(theta < 0) or np.any(theta > np.pi / 2):
        raise InvalidInputError("angles must lie in [0, pi/2]")
    k = np.arange(1, n)
    weight = np.sqrt(k * (n - k))
    v_plus = np.zeros((n, n))
    v_minus = np.zeros((n, n))
    v_plus[k - 1, k] = weight * np.cos(theta)
    v_minus[k, k - 1] = weight * np.sin(theta)
    # cos(pi/2) is 6e-17, not 0
    v_plus[np.abs(v_plus) < 1e-15] = 0.0
    v_minus[np.abs(v_minus) < 1e-15] = 0.0
    return LindbladPair(n, _frozen(theta), _frozen(v_plus), _frozen(v_minus))


def _dissipator_on_diagonal(ops, n: int) -> np.ndarray:
    """Column j is the diagonal of the dissipator applied to ``E_jj``."""
    b0 = np.zeros((n, n))
    for j in range(n):
        rho = np.zeros((n, n))
        rho[j, j] = 1.0
        out = np.zeros((n, n), dtype=complex)
        for v in ops:
            vdv = v.conj().T @ v
            out += 0.5 * (vdv @ rho + rho @ vdv) - v @ rho @ v.conj().T
        off = out - np.diag(np.diag(out))
        if np.abs(off).max() > PROB_TOL:
            raise InvalidInputError("dissipator does not preserve diagonal states")
        b0[:, j] = np.diag(out).real
    return b0


def _kernel_dim(b0: np.ndarray) -> int:
    sv = np.linalg.svd(b0, compute_uv=False)
    scale = max(1.0, sv[0]) if sv.size else 1.0
    return int(np.sum(sv <= RANK_TOL * scale))


def stationary_vector(b0: np.ndarray) -> np.ndarray:
    """The unique simplex point in ``ker(B0)``."""
    n = b0.shape[0]
    if _kernel_dim(b0) != 1:
        raise DegenerateGeneratorError(
            f"kernel of B0 has dimension {_kernel_dim(b0)}, expected 1"
        )
    aug = np.vstack([b0, np.ones((1, n))])
    rhs = np.zeros(n + 1)
    rhs[-1] = 1.0
    d, *_ = np.linalg.lstsq(aug, rhs, rcond=None)
    # roundoff-level entries are structural zeros (absorbing boundary)
    d[np.abs(d) < 1e-14] = 0.0
    return prob_vector(d / d.sum(), tol=1e-10)


def build_B0(pair: LindbladPair) -> GeneratorMatrix:
    b0 = _dissipator_on_diagonal(pair.operators, pair.n)
    _check_generator(-b0)
    return GeneratorMatrix(_frozen(b0), stationary_vector(b0))


def thermal_generator(d) -> GeneratorMatrix:
    """Shortcut: generator whose fixed point is the strictly positive ``d``."""
    d = prob_vector(d)
    return build_B0(build_lindblad_pair(d.size, thermal_angles(d)))


def zero_temperature_generator(n: int) -> GeneratorMatrix:
    """Single lowering operator (all angles pi/2); the last level absorbs."""
    return build_B0(build_lindblad_pair(n, np.full(n - 1, np.pi / 2)))


def semigroup_step(G: GeneratorMatrix, t: float, x) -> np.ndarray:
    """``exp(-t B0) x`` as a validated probability vector."""
    if t < 0:
        raise InvalidInputError("duration must be non-negative")
    x = np.asarray(x, dtype=float).ravel()
    if t == 0:
        return prob_vector(x)
    if G.local is not None:
        k = G.local.shape[0]
        y = (x.reshape(-1, k) @ expm(-t * G.local).T).ravel()
    else:
        y = expm(-t * G.B0) @ x
    return clamp_flow_result(y)


def clamp_flow_result(y: np.ndarray) -> np.ndarray:
    if y.min() < -PROB_TOL:
        raise NumericalFailure(
            f"flow produced entry {y.min():.3e} below -{PROB_TOL:g}"
        )
    return prob_vector(y, tol=max(PROB_TOL, 64 * np.finfo(float).eps * y.size))


def build_tensor_B0(n: int, m: int, theta, cap: int = DEFAULT_TENSOR_CAP) -> GeneratorMatrix:
    """Generator for ``m`` qudits with the bath coupled to the last one only.

    The jump operators are ``I_{n^(m-1)} (x) V`` for the thermal pair ``V`` of
    the last factor, so on diagonals ``B0 = I (x) B0_local``.
    """
    if n < 2 or m < 1:
        raise InvalidInputError("need n >= 2 and m >= 1")
    size = n ** m
    if size > cap:
        raise SizeError(f"n**m = {size} exceeds the cap {cap}")
    local = build_lindblad_pair(n, theta)
    local_b0 = _dissipator_on_diagonal(local.operators, n)
    _check_generator(-local_b0)
    if m == 1:
        return build_B0(local)
    idim = n ** (m - 1)
    b0 = np.kron(np.eye(idim), local_b0)
    return GeneratorMatrix(_frozen(b0), None, _frozen(local_b0), idim)


def kernel_dimension(G: GeneratorMatrix) -> int:
    if G.local is not None:
        return G.identity_dim * _kernel_dim(G.local)
    return _kernel_dim(G.B0)
