"""Classical and d-majorisation, LP witnesses and the d-majorisation polytope.

``x`` is d-majorised by ``y`` when ``x = A y`` for a column-stochastic ``A`` with
``A d = d``. Two independent decision routes exist here: the 1-norm test
:func:`d_majorises` and the LP feasibility search :func:`witness_matrix`.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError, MajorisationViolation, SizeError, SolverError
from .lp import linprog

MAJ_TOL = 1e-12
WITNESS_TOL = 1e-10
DEDUP_RADIUS = 1e-9
DEFAULT_POLYTOPE_CAP = 5


def _vec(x, name="vector") -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} has non-finite entries")
    return x


def _positive_weight(d) -> np.ndarray:
    d = _vec(d, "d")
    if np.any(d <= 0):
        raise InvalidInputError("reference vector d must be strictly positive")
    return d


def classical_majorises(y, x, tol: float = MAJ_TOL) -> bool:
    """True iff ``x`` is majorised by ``y`` (``x`` lies in the permutohedron of ``y``)."""
    y, x = _vec(y), _vec(x)
    if x.shape != y.shape:
        raise InvalidInputError("length mismatch")
    return classical_margin(y, x) <= tol and abs(x.sum() - y.sum()) <= tol


def classical_margin(y, x) -> float:
    """Largest excess of a descending partial sum of ``x`` over that of ``y``.

    Non-positive means every partial-sum inequality holds.
    """
    px = np.cumsum(np.sort(x)[::-1])
    py = np.cumsum(np.sort(y)[::-1])
    return float((px - py)[:-1].max()) if px.size > 1 else 0.0


def d_majorises(d, y, x, tol: float = MAJ_TOL) -> bool:
    """True iff ``x`` is d-majorised by ``y``.

    Uses the 1-norm criterion ``||d_i x - y_i d||_1 <= ||d_i y - y_i d||_1`` for
    every ``i`` together with equal totals.
    """
    d = _positive_weight(d)
    y, x = _vec(y), _vec(x)
    if not (d.shape == y.shape == x.shape):
        raise InvalidInputError("length mismatch")
    if abs(x.sum() - y.sum()) > tol:
        return False
    lhs = np.abs(d[:, None] * x[None, :] - y[:, None] * d[None, :]).sum(axis=1)
    rhs = np.abs(d[:, None] * y[None, :] - y[:, None] * d[None, :]).sum(axis=1)
    return bool(np.all(lhs <= rhs + tol))


def d_majorises_many(d, y, X, tol: float = MAJ_TOL) -> np.ndarray:
    """Row-wise :func:`d_majorises` for a stack of candidate points ``X``."""
    d = _positive_weight(d)
    y = _vec(y)
    X = np.atleast_2d(np.asarray(X, dtype=float))
    rhs = np.abs(d[:, None] * y[None, :] - y[:, None] * d[None, :]).sum(axis=1)
    lhs = np.abs(d[None, :, None] * X[:, None, :]
                 - (y[:, None] * d[None, :])[None, :, :]).sum(axis=2)
    same_total = np.abs(X.sum(axis=1) - y.sum()) <= tol
    return same_total & np.all(lhs <= rhs + tol, axis=1)


@dataclass(frozen=True)
class StochasticWitness:
    A: np.ndarray

    def residuals(self, d, y, x) -> dict:
        A = self.A
        return {
            "negativity": float(max(0.0, -A.min())),
            "column_sums": float(np.abs(A.sum(axis=0) - 1).max()),
            "fixes_d": float(np.abs(A @ d - d).max()),
            "maps_y_to_x": float(np.abs(A @ y - x).max()),
        }

    def is_valid(self, d, y, x, tol: float = WITNESS_TOL) -> bool:
        return max(self.residuals(d, y, x).values()) <= tol


@functools.lru_cache(maxsize=8)
def _witness_structure(n: int) -> tuple[np.ndarray, np.ndarray]:
    # variable A[i, j] sits at i*n + j
    colsum = np.zeros((n, n * n))
    rowsel = np.zeros((n, n * n), dtype=int)
    for j in range(n):
        colsum[j, j::n] = 1.0
    for i in range(n):
        rowsel[i, i * n:(i + 1) * n] = 1
    colsum.setflags(write=False)
    rowsel.setflags(write=False)
    return colsum, rowsel


def witness_matrix(d, y, x, tol: float = WITNESS_TOL) -> StochasticWitness | None:
    """Search a column-stochastic ``A`` with ``A d = d`` and ``A y = x``.

    Returns ``None`` when the LP is infeasible. A feasible LP solution that
    violates the constraints by more than ``tol`` raises :class:`SolverError`.
    """
    d = _positive_weight(d)
    y, x = _vec(y), _vec(x)
    n = d.size
    if not (y.size == x.size == n):
        raise InvalidInputError("length mismatch")
    colsum, rowsel = _witness_structure(n)
    A_eq = np.vstack([
        colsum,
        rowsel * np.tile(d, n),
        rowsel * np.tile(y, n),
    ])
    b_eq = np.concatenate([np.ones(n), d, x])
    res = linprog(np.zeros(n * n), A_eq, b_eq)
    if not res.success:
        return None
    w = StochasticWitness(res.x.reshape(n, n))
    resid = w.residuals(d, y, x)
    if max(resid.values()) > tol:
        raise SolverError("LP witness violates its constraints", resid)
    return w


def apply_permutation(perm, x) -> np.ndarray:
    """``(pi x)_i = x[perm[i]]``."""
    return np.asarray(x)[np.asarray(perm, dtype=int)]


def _dedup(points: np.ndarray, radius: float = DEDUP_RADIUS) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])[::-1]
    kept: list[np.ndarray] = []
    for p in points[order]:
        if all(np.abs(p - q).sum() > radius for q in kept):
            kept.append(p)
    out = np.array(kept)
    return out[np.lexsort(out.T[::-1])[::-1]]


def _sign_pattern_halfspaces(d, y):
    n = d.size
    signs = np.array(list(itertools.product([-1.0, 1.0], repeat=n)))
    normals, offsets = [], []
    for i in range(n):
        c = np.abs(d[i] * y - y[i] * d).sum()
        normals.append(d[i] * signs)
        offsets.append(c + y[i] * (signs @ d))
    normals.append(-np.eye(n))
    offsets.append(np.zeros(n))
    return np.vstack(normals), np.concatenate(offsets)


def _is_redundant(normals, offsets, keep, h, eq_row, eq_rhs, tol=1e-10) -> bool:
    """Maximise ``normals[h] @ x`` over the kept halfspaces without ``h``.

    Variables are free (split as ``u - v``) since positivity constraints are
    themselves subject to pruning.
    """
    others = [k for k in keep if k != h]
    A = normals[others]
    A_ub = np.hstack([A, -A])
    A_eq = np.hstack([eq_row, -eq_row])[None, :]
    c = -np.concatenate([normals[h], -normals[h]])
    res = linprog(c, A_eq, [eq_rhs], A_ub, offsets[others])
    if res.status != "optimal":
        return False
    return -res.fun <= offsets[h] + tol


def _prune(normals, offsets, total):
    # exact duplicates first, then LP redundancy
    scale = np.abs(normals).max(axis=1, keepdims=True)
    rounded = np.round(np.hstack([normals / scale, offsets[:, None] / scale]), 12)
    _, first = np.unique(rounded, axis=0, return_index=True)
    keep = sorted(first.tolist())
    eq_row = np.ones(normals.shape[1])
    for h in list(keep):
        if len(keep) <= 1:
            break
        if _is_redundant(normals, offsets, keep, h, eq_row, total):
            keep.remove(h)
    return normals[keep], offsets[keep]


def _enumerate_vertices(normals, offsets, total, tol=DEDUP_RADIUS):
    m, n = normals.shape
    if n == 1:
        return np.array([[total]])
    combos = np.array(list(itertools.combinations(range(m), n - 1)))
    if combos.size == 0:
        return np.zeros((0, n))
    mats = np.empty((len(combos), n, n))
    mats[:, :-1, :] = normals[combos]
    mats[:, -1, :] = 1.0
    rhs = np.empty((len(combos), n))
    rhs[:, :-1] = offsets[combos]
    rhs[:, -1] = total
    dets = np.abs(np.linalg.det(mats))
    scale = np.abs(mats).max(axis=(1, 2)) ** n
    ok = dets > 1e-12 * scale
    if not np.any(ok):
        return np.zeros((0, n))
    sols = np.linalg.solve(mats[ok], rhs[ok][..., None])[..., 0]
    feasible = np.all(sols @ normals.T <= offsets + tol, axis=1)
    return _dedup(sols[feasible])


@dataclass(frozen=True, eq=False)
class MajorisationPolytope:
    """The set of points d-majorised by ``y``, as halfspaces ``normals @ x <= offsets``
    intersected with ``sum(x) == sum(y)``.
    """

    d: np.ndarray
    y: np.ndarray
    normals: np.ndarray
    offsets: np.ndarray

    @property
    def n(self) -> int:
        return self.d.size

    @property
    def halfspaces(self) -> list[tuple[np.ndarray, float]]:
        return [(a, float(b)) for a, b in zip(self.normals, self.offsets)]

    @functools.cached_property
    def vertices(self) -> np.ndarray:
        v = _enumerate_vertices(self.normals, self.offsets, float(self.y.sum()))
        v.setflags(write=False)
        return v

    def contains(self, x, tol: float = MAJ_TOL) -> bool:
        return d_majorises(self.d, self.y, x, tol)

    def to_json_dict(self) -> dict:
        return {
            "d": self.d.tolist(),
            "y": self.y.tolist(),
            "halfspaces": [{"a": a.tolist(), "b": b} for a, b in self.halfspaces],
            "vertices": self.vertices.tolist(),
        }

    @classmethod
    def from_json_dict(cls, data: dict) -> "MajorisationPolytope":
        normals = np.array([h["a"] for h in data["halfspaces"]], dtype=float)
        offsets = np.array([h["b"] for h in data["halfspaces"]], dtype=float)
        poly = cls(np.array(data["d"], float), np.array(data["y"], float), normals, offsets)
        if "vertices" in data:
            v = np.array(data["vertices"], dtype=float).reshape(-1, poly.n)
            v.setflags(write=False)
            poly.__dict__["vertices"] = v
        return poly


def build_polytope(d, y, cap: int = DEFAULT_POLYTOPE_CAP, prune: bool = True) -> MajorisationPolytope:
    d = _positive_weight(d)
    y = _vec(y, "y")
    if d.size != y.size:
        raise InvalidInputError("length mismatch")
    if d.size > cap:
        raise SizeError(f"polytope dimension {d.size} exceeds the cap {cap}")
    normals, offsets = _sign_pattern_halfspaces(d, y)
    if prune:
        normals, offsets = _prune(normals, offsets, float(y.sum()))
    for a in (d, y, normals, offsets):
        a.setflags(write=False)
    return MajorisationPolytope(d, y, normals, offsets)


def dominating_vertex(P: MajorisationPolytope, tol: float = 1e-10) -> np.ndarray:
    """The vertex that classically majorises every other vertex, sorted descending."""
    V = P.vertices
    if len(V) == 0:
        raise MajorisationViolation("polytope has no vertices")
    for v in V:
        if all(classical_margin(v, w) <= tol for w in V):
            z = np.sort(v)[::-1]
            z.setflags(write=False)
            return z
    raise MajorisationViolation(
        "no vertex classically majorises all others; "
        f"d={P.d.tolist()}, y={P.y.tolist()}"
    )


def dominating_candidates(P: MajorisationPolytope, tol: float = 1e-10) -> np.ndarray:
    """All vertices passing the domination test (for uniqueness diagnostics)."""
    V = P.vertices
    return np.array([v for v in V if all(classical_margin(v, w) <= tol for w in V)])


def permute_region(P: MajorisationPolytope, perm) -> MajorisationPolytope:
    perm = np.asarray(perm, dtype=int)
    if sorted(perm.tolist()) != list(range(P.n)):
        raise InvalidInputError(f"{perm.tolist()} is not a permutation of 0..{P.n - 1}")
    return build_polytope(apply_permutation(perm, P.d), apply_permutation(perm, P.y),
                          cap=max(P.n, DEFAULT_POLYTOPE_CAP))


def permutohedron_vertices(z) -> np.ndarray:
    """Distinct permutations of ``z``, the vertices of its majorisation polytope."""
    z = _vec(z)
    pts = np.array([z[list(p)] for p in itertools.permutations(range(z.size))])
    return _dedup(pts, 1e-12)


def in_convex_hull(points, x, tol: float = 1e-9) -> bool:
    """LP test for ``x`` in ``conv(points)``."""
    pts = np.asarray(points, dtype=float)
    x = _vec(x)
    A_eq = np.vstack([pts.T, np.ones(len(pts))])
    b_eq = np.append(x, 1.0)
    res = linprog(np.zeros(len(pts)), A_eq, b_eq, tol=tol * 1e-2)
    return res.success


# --- random instances --------------------------------------------------------

def random_d_stochastic(d, rng: np.random.Generator, moves: int = 6) -> np.ndarray:
    """Product of random two-level transfers, each column-stochastic and fixing ``d``.

    A move between levels ``j`` and ``k`` carries flow ``f <= min(d_j, d_k)`` both
    ways, i.e. fractions ``f/d_j`` out of ``j`` and ``f/d_k`` out of ``k``.
    """
    d = _positive_weight(d)
    n = d.size
    A = np.eye(n)
    for _ in range(moves):
        j, k = rng.choice(n, size=2, replace=False)
        f = rng.uniform(0, min(d[j], d[k]))
        M = np.eye(n)
        M[j, j] = 1 - f / d[j]
        M[k, j] = f / d[j]
        M[k, k] = 1 - f / d[k]
        M[j, k] = f / d[k]
        A = M @ A
    return A


def random_triple(n: int, rng: np.random.Generator):
    """``(d, y, x)`` with a roughly even split of majorised and non-majorised ``x``."""
    d = rng.dirichlet(np.ones(n))
    d = np.maximum(d, 1e-3)
    d /= d.sum()
    y = rng.dirichlet(np.full(n, 0.5))
    if rng.random() < 0.5:
        x = random_d_stochastic(d, rng, moves=int(rng.integers(1, 3 * n))) @ y
    else:
        x = rng.dirichlet(np.ones(n))
    return d, y, x
