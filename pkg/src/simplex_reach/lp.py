"""Small dense two-phase simplex method.

Solves ``min c @ x`` subject to ``A_eq @ x == b_eq``, ``A_ub @ x <= b_ub`` and
``x >= 0``. Pivoting follows Bland's rule (lowest eligible index enters, ties in
the ratio test leave by lowest basic index), which rules out cycling on the
degenerate problems that majorisation witnesses produce.

Problem sizes here are tiny (a few dozen columns), so a full tableau is the
simplest correct choice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import SolverError

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray | None
    fun: float | None
    iterations: int

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


def _pivot(tab: np.ndarray, row: int, col: int) -> None:
    tab[row] /= tab[row, col]
    col_vals = tab[:, col].copy()
    col_vals[row] = 0.0
    tab -= np.outer(col_vals, tab[row])


PIVOT_TOL = 1e-9


def _run_simplex(tab, basis, allowed, tol, max_iter, iterations):
    """Iterate Bland pivots on ``tab`` in place.

    The last row of ``tab`` holds reduced costs, the last column the rhs.
    Returns ``(status, iterations)``.
    """
    m = tab.shape[0] - 1
    while True:
        if iterations >= max_iter:
            raise SolverError(
                "simplex iteration limit reached", {"iterations": iterations}
            )
        costs = tab[m, :-1]
        candidates = np.flatnonzero((costs < -tol) & allowed)
        if candidates.size == 0:
            return OPTIMAL, iterations
        col = int(candidates[0])
        column = tab[:m, col]
        rows = np.flatnonzero(column > PIVOT_TOL)
        if rows.size == 0:
            return UNBOUNDED, iterations
        ratios = tab[rows, -1] / column[rows]
        best = ratios.min()
        tied = rows[ratios <= best + tol * max(1.0, abs(best))]
        row = int(min(tied, key=lambda r: basis[r]))
        _pivot(tab, row, col)
        basis[row] = col
        iterations += 1


def _polish(A, b, z, rounds=4):
    """Shed pivot roundoff by min-norm corrections on the support of ``z``.

    Ill-conditioned bases (tiny coefficients) can leave residuals far above
    roundoff; correcting only strictly positive entries keeps zeros at zero.
    """
    z = np.where(z < 0, 0.0, z)
    best, best_res = z, np.abs(A @ z - b).max()
    for _ in range(rounds):
        support = best > 1e-12
        if not support.any() or best_res <= 1e-15:
            break
        dz, *_ = np.linalg.lstsq(A[:, support], b - A @ best, rcond=None)
        trial = best.copy()
        trial[support] += dz
        if trial.min() < -1e-12:
            break
        trial = np.maximum(trial, 0.0)
        res = np.abs(A @ trial - b).max()
        if res >= best_res:
            break
        best, best_res = trial, res
    return best


def linprog(c, A_eq=None, b_eq=None, A_ub=None, b_ub=None, *, tol=1e-10,
            max_iter=5000) -> LPResult:
    c = np.asarray(c, dtype=float).ravel()
    nvar = c.size
    blocks, rhs = [], []
    n_ub = 0
    if A_ub is not None and len(A_ub):
        A_ub = np.asarray(A_ub, dtype=float).reshape(-1, nvar)
        n_ub = A_ub.shape[0]
        blocks.append(np.hstack([A_ub, np.eye(n_ub)]))
        rhs.append(np.asarray(b_ub, dtype=float).ravel())
    if A_eq is not None and len(A_eq):
        A_eq = np.asarray(A_eq, dtype=float).reshape(-1, nvar)
        blocks.append(np.hstack([A_eq, np.zeros((A_eq.shape[0], n_ub))]))
        rhs.append(np.asarray(b_eq, dtype=float).ravel())
    ncols = nvar + n_ub
    if not blocks:
        if np.any(c < -tol):
            return LPResult(UNBOUNDED, None, None, 0)
        return LPResult(OPTIMAL, np.zeros(nvar), 0.0, 0)

    A = np.vstack(blocks)
    b = np.concatenate(rhs)
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0
    m = A.shape[0]

    # Phase 1: one artificial per row, minimise their sum.
    tab = np.zeros((m + 1, ncols + m + 1))
    tab[:m, :ncols] = A
    tab[:m, ncols:ncols + m] = np.eye(m)
    tab[:m, -1] = b
    tab[m, :ncols] = -A.sum(axis=0)
    tab[m, -1] = -b.sum()
    basis = list(range(ncols, ncols + m))
    allowed = np.ones(ncols + m, dtype=bool)

    _, iterations = _run_simplex(tab, basis, allowed, tol, max_iter, 0)
    infeasibility = -tab[m, -1]
    feas_tol = tol * max(1.0, float(np.abs(b).max()), float(np.abs(A).max()))
    if infeasibility > 100 * feas_tol:
        return LPResult(INFEASIBLE, None, None, iterations)

    # Drive remaining (zero-level) artificials out, dropping redundant rows.
    keep = []
    for row in range(m):
        if basis[row] < ncols:
            keep.append(row)
            continue
        mags = np.abs(tab[row, :ncols])
        if mags.max(initial=0.0) > PIVOT_TOL:
            col = int(mags.argmax())
            _pivot(tab, row, col)
            basis[row] = col
            keep.append(row)
    body = tab[keep][:, list(range(ncols)) + [tab.shape[1] - 1]]
    basis = [basis[r] for r in keep]
    m2 = len(keep)

    # Phase 2 on the original columns.
    tab2 = np.zeros((m2 + 1, ncols + 1))
    tab2[:m2] = body
    cost = np.concatenate([c, np.zeros(n_ub)])
    tab2[m2, :ncols] = cost
    for row, var in enumerate(basis):
        tab2[m2] -= cost[var] * tab2[row]
    status, iterations = _run_simplex(
        tab2, basis, np.ones(ncols, dtype=bool), tol, max_iter, iterations
    )
    if status == UNBOUNDED:
        return LPResult(UNBOUNDED, None, None, iterations)
    z = np.zeros(ncols)
    for row, var in enumerate(basis):
        z[var] = tab2[row, -1]
    z = _polish(A, b, z)
    x = z[:nvar]
    return LPResult(OPTIMAL, x, float(c @ x), iterations)


def find_feasible(A_eq, b_eq, A_ub=None, b_ub=None, *, tol=1e-10) -> np.ndarray | None:
    """Return some nonnegative ``x`` satisfying the constraints, or ``None``."""
    A_eq = np.asarray(A_eq, dtype=float)
    res = linprog(np.zeros(A_eq.shape[1]), A_eq, b_eq, A_ub, b_ub, tol=tol)
    return res.x if res.success else None
