"""Stationarity certificates for difference-max programs.

The d-stationarity test replaces the nonsmooth minus-max by its individual
active pieces: the point is d-stationary iff for EVERY active minus piece
the multiplier system

    sum_{l in A1} lam_l grad_psi1l(x) - grad_psi2i(x)
        + sum_{j active} mu_j A_j' + E' nu = 0,
    lam in the simplex, mu >= 0, nu free

is solvable.  Each system is a phase-1 LP; a failed one yields a Farkas
vector whose leading block is a strictly descending feasible direction.
This per-piece quantification is what separates the certificate from
Clarke-style checks.
"""

import numpy as np
from dataclasses import dataclass, field

from .core import TOL_ACT, active_sets, directional_derivative
from .linalg import numerical_rank
from .lp import equality_system_feasible

TOL_STAT = 1e-7

STATIONARY = "stationary"
NOT_STATIONARY = "not-stationary"
INCONCLUSIVE = "inconclusive"


@dataclass
class StationarityCertificate:
    verdict: str
    witness_direction: np.ndarray | None = None
    multipliers: dict = field(default_factory=dict)
    residual: float = 0.0
    failing_piece: int | None = None
    directional_value: float | None = None

    def __bool__(self):
        return self.verdict == STATIONARY


def _pair_system(grads_plus, grad_minus, A_act, E):
    """Equality system of the multiplier equation for one minus piece."""
    n = grad_minus.shape[0]
    cols = [np.concatenate([g, [1.0]]) for g in grads_plus]
    nonneg = [True] * len(grads_plus)
    for row in A_act:
        cols.append(np.concatenate([row, [0.0]]))
        nonneg.append(True)
    for row in E:
        cols.append(np.concatenate([row, [0.0]]))
        nonneg.append(False)
    M = np.column_stack(cols)
    rhs = np.concatenate([grad_minus, [1.0]])
    return M, rhs, np.array(nonneg, dtype=bool)


def check_d_stationary(f, x, tol_act=TOL_ACT, tol_stat=TOL_STAT):
    """Certificate of d-stationarity for a difference-max program at ``x``.

    Raises ``ValueError("point-not-in-X")`` on an infeasible point.  For a
    negative verdict the certificate carries a feasible unit direction with
    strictly negative directional derivative, extracted from the Farkas
    dual of the failing LP and re-verified by direct evaluation.
    """
    x = np.asarray(x, dtype=float)
    if not f.feasible.contains(x, tol=1e-7):
        raise ValueError("point-not-in-X")

    a1, a2 = active_sets(f, x, tol_act)
    act_rows = f.feasible.active_rows(x, tol_act)
    grads_plus = [f.plus.pieces[i].gradient(x) for i in a1]
    A_act = f.feasible.A[act_rows]
    E = f.feasible.E

    multipliers = {}
    residual = 0.0
    for i2 in a2:
        g2 = f.minus.pieces[i2].gradient(x)
        M, rhs, nonneg = _pair_system(grads_plus, g2, A_act, E)
        feasible, sol, farkas = equality_system_feasible(M, rhs, nonneg)
        if feasible:
            k1 = len(grads_plus)
            k2 = k1 + len(act_rows)
            lam = dict(zip(a1, sol[:k1]))
            mu = dict(zip(act_rows, sol[k1:k2]))
            nu = sol[k2:]
            resid = float(np.max(np.abs(M @ sol - rhs)))
            residual = max(residual, resid)
            if resid > tol_stat:
                return StationarityCertificate(INCONCLUSIVE, residual=resid,
                                               failing_piece=i2)
            multipliers[i2] = {"lambda": lam, "mu": mu, "nu": nu.tolist()}
        else:
            d = farkas[:-1]
            norm = np.linalg.norm(d)
            if norm == 0.0:
                return StationarityCertificate(INCONCLUSIVE, failing_piece=i2)
            d = d / norm
            dd = directional_derivative(f, x, d, tol_act)
            step = 1e-7 * (1.0 + np.linalg.norm(x))
            ok_dir = dd < -tol_stat
            ok_feas = f.feasible.contains(x + step * d, tol=1e-6)
            if ok_dir and ok_feas:
                return StationarityCertificate(NOT_STATIONARY,
                                               witness_direction=d,
                                               failing_piece=i2,
                                               directional_value=dd)
            return StationarityCertificate(INCONCLUSIVE,
                                           witness_direction=d,
                                           failing_piece=i2,
                                           directional_value=dd)
    return StationarityCertificate(STATIONARY, multipliers=multipliers,
                                   residual=residual)


def check_critical(psi1_gradients, psi2_gradients, cone_generators=None):
    """dc-criticality test: (conv(psi1) + cone) intersects conv(psi2).

    The subdifferentials are given as finite generator lists (valid for
    convex piecewise pieces at the point); the normal cone as a finitely
    generated cone, empty meaning {0}.  Decided by LP feasibility over
    hull weights and cone multipliers.
    """
    U = [np.atleast_1d(np.asarray(g, dtype=float)) for g in psi1_gradients]
    V = [np.atleast_1d(np.asarray(g, dtype=float)) for g in psi2_gradients]
    if not U or not V:
        raise ValueError("empty generator list")
    W = [np.atleast_1d(np.asarray(g, dtype=float)) for g in (cone_generators or [])]
    n = U[0].shape[0]

    # columns: hull weights a (simplex), cone weights c >= 0, hull weights b (simplex)
    cols, nonneg = [], []
    for u in U:
        cols.append(np.concatenate([u, [1.0, 0.0]]))
        nonneg.append(True)
    for w in W:
        cols.append(np.concatenate([w, [0.0, 0.0]]))
        nonneg.append(True)
    for v in V:
        cols.append(np.concatenate([-v, [0.0, 1.0]]))
        nonneg.append(True)
    M = np.column_stack(cols)
    rhs = np.concatenate([np.zeros(n), [1.0, 1.0]])
    feasible, _, _ = equality_system_feasible(M, rhs, nonneg)
    return feasible


def is_f_differentiable_point(m, x, tol_act=TOL_ACT):
    """True iff the max-function is Frechet differentiable at ``x``.

    Holds exactly when the gradients of all active pieces coincide.
    """
    x = np.asarray(x, dtype=float)
    act = m.active_set(x, tol_act)
    grads = [m.pieces[i].gradient(x) for i in act]
    g0 = grads[0]
    scale = 1.0 + np.linalg.norm(g0)
    return all(np.linalg.norm(g - g0) <= 1e-9 * scale for g in grads[1:])


def check_sc_membership(m, shifts, x, tol_act=TOL_ACT):
    """True iff grad_psi1i(x) + c_i is one common vector over the active set."""
    if len(shifts) != len(m.pieces):
        raise ValueError("one shift vector per piece is required")
    x = np.asarray(x, dtype=float)
    act = m.active_set(x, tol_act)
    vecs = [m.pieces[i].gradient(x) + np.asarray(shifts[i], dtype=float) for i in act]
    v0 = vecs[0]
    return all(np.max(np.abs(v - v0)) <= 1e-9 for v in vecs[1:])


def check_licq(gradients):
    """Linear independence of the given vectors at numerical rank threshold."""
    G = [np.atleast_1d(np.asarray(g, dtype=float)) for g in gradients]
    if not G:
        return True
    M = np.column_stack(G)
    if len(G) > M.shape[0]:
        return False
    return numerical_rank(M) == len(G)


GLOBAL_MIN_OF_PHI = "global-min-of-phi"
STATIONARY_FOR_PSI = "stationary-for-psi"
STATIONARY_FOR_NEGPSI = "stationary-for-negpsi"


def classify_composite_point(convexity, psi_value, deriv_plus, deriv_minus,
                             tol=1e-12):
    """Trichotomy for a d-stationary point of  phi(psi(x))  with univariate phi.

    ``deriv_plus``/``deriv_minus`` are the one-sided derivatives
    phi'(t; +1) and phi'(t; -1) at t = ``psi_value``.  For convex phi the
    three exhaustive cases are: both one-sided derivatives nonnegative
    (``psi_value`` globally minimizes phi), right nonnegative and left
    negative (the point must be d-stationary for psi), and the mirrored
    case (d-stationary for -psi).  A concave phi uses the mirrored branch;
    its first case marks a global extremum (maximum) of phi and keeps the
    same label.
    """
    dp = float(deriv_plus)
    dm = float(deriv_minus)
    if convexity == "convex":
        if dp < -dm - tol:
            raise ValueError("one-sided derivatives inconsistent with convexity")
        if dp >= 0.0 and dm >= 0.0:
            return GLOBAL_MIN_OF_PHI
        if dp >= 0.0 > dm:
            return STATIONARY_FOR_PSI
        return STATIONARY_FOR_NEGPSI
    if convexity == "concave":
        if dp > -dm + tol:
            raise ValueError("one-sided derivatives inconsistent with concavity")
        if dp <= 0.0 and dm <= 0.0:
            return GLOBAL_MIN_OF_PHI
        if dp > 0.0 >= dm:
            return STATIONARY_FOR_PSI
        return STATIONARY_FOR_NEGPSI
    raise ValueError("convexity must be 'convex' or 'concave'")
