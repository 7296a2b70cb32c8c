"""A small dense two-phase simplex for the certificate LPs.

Solves   min c'x  s.t.  Ax = b, x >= 0   with Bland's anti-cycling rule.
Problems here are desk-scale (tens of rows/columns), so a dense tableau is
adequate.  Phase 1 doubles as the feasibility test used by the stationarity
certificates; when it fails, the dual vector is a Farkas certificate from
which a strictly descending direction can be read off.
"""

import numpy as np
from dataclasses import dataclass

PIVOT_TOL = 1e-10
FEAS_TOL = 1e-9


@dataclass
class SimplexResult:
    status: str            # "optimal" | "infeasible" | "unbounded" | "iteration-limit"
    x: np.ndarray | None
    fun: float | None
    farkas: np.ndarray | None = None   # row vector y with y'A <= 0, y'b > 0


def _pivot(T, basis, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]
    basis[row] = col


def _bland_iterate(T, basis, ncols, maxiter):
    """Run simplex iterations on tableau T (last row = objective, last col = rhs)."""
    m = T.shape[0] - 1
    for _ in range(maxiter):
        red = T[-1, :ncols]
        enter = -1
        for j in range(ncols):
            if red[j] < -PIVOT_TOL:
                enter = j
                break
        if enter < 0:
            return "optimal"
        ratios = np.full(m, np.inf)
        col = T[:m, enter]
        rhs = T[:m, -1]
        pos = col > PIVOT_TOL
        ratios[pos] = rhs[pos] / col[pos]
        best = np.min(ratios)
        if not np.isfinite(best):
            return "unbounded"
        # Bland: among ratio ties, leave the variable of smallest index.
        leave_row = -1
        leave_var = None
        for r in range(m):
            if pos[r] and ratios[r] <= best + PIVOT_TOL * (1.0 + abs(best)):
                if leave_var is None or basis[r] < leave_var:
                    leave_var = basis[r]
                    leave_row = r
        _pivot(T, basis, leave_row, enter)
    return "iteration-limit"


def simplex_solve(c, A, b, maxiter=20000):
    """Two-phase simplex for  min c'x  s.t.  Ax = b, x >= 0.

    Returns a :class:`SimplexResult`.  On an infeasible problem the
    ``farkas`` field holds y with ``y' A <= 0`` componentwise and
    ``y' b > 0``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float)).copy()
    b = np.atleast_1d(np.asarray(b, dtype=float)).copy()
    c = np.atleast_1d(np.asarray(c, dtype=float)).copy()
    m, n = A.shape

    flip = b < 0.0
    A[flip] *= -1.0
    b[flip] *= -1.0

    scale = 1.0 + np.max(np.abs(b)) if m else 1.0

    # Phase 1 tableau: [A | I | b] with objective row = sum of artificials.
    T = np.zeros((m + 1, n + m + 1))
    T[:m, :n] = A
    T[:m, n:n + m] = np.eye(m)
    T[:m, -1] = b
    T[-1, :n] = -np.sum(A, axis=0)
    T[-1, -1] = -np.sum(b)
    basis = list(range(n, n + m))

    status = _bland_iterate(T, basis, n + m, maxiter)
    if status != "optimal":
        return SimplexResult(status, None, None)
    phase1 = -T[-1, -1]
    if phase1 > FEAS_TOL * scale:
        # Duals: reduced cost at artificial column j is 1 - y_j.
        y = 1.0 - T[-1, n:n + m]
        y[flip] *= -1.0
        return SimplexResult("infeasible", None, None, farkas=y)

    # Drive any artificial still basic (at zero level) out of the basis.
    for r in range(m):
        if basis[r] >= n:
            piv = -1
            for j in range(n):
                if abs(T[r, j]) > PIVOT_TOL:
                    piv = j
                    break
            if piv >= 0:
                _pivot(T, basis, r, piv)

    keep_rows = [r for r in range(m) if basis[r] < n]
    dropped = [r for r in range(m) if basis[r] >= n]  # redundant constraints
    if dropped:
        rows = keep_rows + [m]
        T = T[rows][:, list(range(n)) + [n + m]]
        basis = [basis[r] for r in keep_rows]
        m = len(basis)
    else:
        T = T[:, list(range(n)) + [n + m]]

    # Phase 2 objective row.
    T[-1, :] = 0.0
    T[-1, :n] = c
    for r in range(m):
        T[-1] -= c[basis[r]] * T[r]

    status = _bland_iterate(T, basis, n, maxiter)
    if status != "optimal":
        return SimplexResult(status, None, None)
    x = np.zeros(n)
    for r in range(m):
        x[basis[r]] = T[r, -1]
    return SimplexResult("optimal", x, float(c @ x))


def equality_system_feasible(A, b, nonneg):
    """Feasibility of  Ax = b  with sign pattern ``nonneg`` on x.

    ``nonneg[j]`` True constrains ``x_j >= 0``; False leaves it free (the
    variable is split internally).  Returns ``(feasible, x, farkas)`` where
    on failure ``farkas`` is y with ``y'A_j <= 0`` for the nonnegative
    columns, ``y'A_j = 0`` for the free ones, and ``y'b > 0``.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    nonneg = np.asarray(nonneg, dtype=bool)
    free = np.nonzero(~nonneg)[0]
    cols = [A[:, j] for j in range(A.shape[1])]
    for j in free:
        cols.append(-A[:, j])
    A_ext = np.column_stack(cols) if cols else A
    res = simplex_solve(np.zeros(A_ext.shape[1]), A_ext, b)
    if res.status == "optimal":
        x = res.x[: A.shape[1]].copy()
        for k, j in enumerate(free):
            x[j] -= res.x[A.shape[1] + k]
        return True, x, None
    if res.status == "infeasible":
        return False, None, res.farkas
    raise RuntimeError(f"simplex did not terminate: {res.status}")
