"""B-stationarity for piecewise programs with two quadratic inequality
bounds sharing one quadratic form, plus linear constraints.

The feasible set  {beta1 <= 0.5 x'Qx + c'x <= beta2, Ax <= b}  is not
convex, so stationarity is taken along the Bouligand tangent cone.  Under
Abadie's constraint qualification the tangent cone equals the
linearization cone and the certificate reduces to a KKT system with a
complementarity sign pattern fixed by the active constraints; the
certificate reports that assumption rather than verifying it (LICQ of the
active gradients is offered as a sufficient check).
"""

import itertools
import numpy as np
from dataclasses import dataclass, field

import cvxpy as cp

from .core import QuadraticFn, MaxOfQuadratics, Polyhedron, TOL_ACT
from .linalg import null_space_basis
from .lp import equality_system_feasible
from .stationarity import check_licq
from .enumeration import (ValueSet, kink_candidates, enumerate_qp_values,
                          _stationary_family, _consistent_lstsq, _quad_expr)

LAMBDA_CAP = 1e6

STATIONARY = "stationary"
NOT_STATIONARY = "not-stationary"


@dataclass(frozen=True, eq=False)
class DQCProgram:
    """minimize q1(x) - max_i q2i(x)  s.t.  beta1 <= 0.5 x'Qx + c'x <= beta2,
    Ax <= b.  ``beta1``/``beta2`` may be None for an absent bound."""

    q1: QuadraticFn
    minus_pieces: tuple
    Qc: np.ndarray
    c: np.ndarray
    beta1: float | None
    beta2: float | None
    linear: Polyhedron

    def __post_init__(self):
        n = self.q1.dim
        pieces = tuple(self.minus_pieces) or (QuadraticFn.zero(n),)
        if any(p.dim != n for p in pieces):
            raise ValueError("minus piece dimension mismatch")
        Qc = np.atleast_2d(np.asarray(self.Qc, dtype=float))
        Qc = (Qc + Qc.T) / 2.0
        c = np.atleast_1d(np.asarray(self.c, dtype=float))
        if Qc.shape != (n, n) or c.shape != (n,):
            raise ValueError("quadratic constraint dimension mismatch")
        b1 = None if self.beta1 is None else float(self.beta1)
        b2 = None if self.beta2 is None else float(self.beta2)
        if b1 is not None and b2 is not None and b1 > b2:
            raise ValueError("beta1 must not exceed beta2")
        Qc.setflags(write=False)
        c.setflags(write=False)
        object.__setattr__(self, "minus_pieces", pieces)
        object.__setattr__(self, "Qc", Qc)
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "beta1", b1)
        object.__setattr__(self, "beta2", b2)

    @property
    def dim(self):
        return self.q1.dim

    @property
    def minus(self):
        return MaxOfQuadratics(self.minus_pieces)

    def constraint_value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.Qc @ x + self.c @ x)

    def constraint_gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.Qc @ x + self.c

    def _beta_scale(self):
        vals = [abs(v) for v in (self.beta1, self.beta2) if v is not None]
        return 1.0 + max(vals, default=0.0)

    def contains(self, x, tol=1e-8):
        g = self.constraint_value(x)
        s = self._beta_scale()
        if self.beta1 is not None and g < self.beta1 - tol * s:
            return False
        if self.beta2 is not None and g > self.beta2 + tol * s:
            return False
        return self.linear.contains(x, tol)

    def beta1_active(self, x, tol=1e-8):
        return (self.beta1 is not None
                and abs(self.constraint_value(x) - self.beta1) <= tol * self._beta_scale())

    def beta2_active(self, x, tol=1e-8):
        return (self.beta2 is not None
                and abs(self.constraint_value(x) - self.beta2) <= tol * self._beta_scale())

    def objective(self, x):
        return self.q1.value(x) - self.minus.value(x)

    def minus_active_set(self, x, tol_act=TOL_ACT):
        return self.minus.active_set(x, tol_act)


@dataclass
class BCertificate:
    verdict: str
    multipliers: dict = field(default_factory=dict)
    residual: float = 0.0
    complementarity: float = 0.0
    abadie_assumed: bool = True
    licq: bool | None = None
    failing_piece: int | None = None


@dataclass(frozen=True)
class LinearizationCone:
    """The cone {v : rows @ v <= 0} (equalities appear as opposite rows)."""

    rows: np.ndarray

    def contains(self, v, tol=1e-9):
        if self.rows.shape[0] == 0:
            return True
        v = np.asarray(v, dtype=float)
        return bool(np.all(self.rows @ v <= tol * (1.0 + np.linalg.norm(v))))


def linearization_cone(prog, x, tol=1e-8):
    """Halfspace description of the linearization cone at a feasible point."""
    x = np.asarray(x, dtype=float)
    if not prog.contains(x, tol=1e-7):
        raise ValueError("point-not-in-X")
    rows = []
    gq = prog.constraint_gradient(x)
    if prog.beta1_active(x, tol):
        rows.append(-gq)
    if prog.beta2_active(x, tol):
        rows.append(gq)
    for j in prog.linear.active_rows(x, tol):
        rows.append(prog.linear.A[j])
    for e in prog.linear.E:
        rows.append(e)
        rows.append(-e)
    rows = np.array(rows) if rows else np.zeros((0, prog.dim))
    return LinearizationCone(rows)


def check_b_stationary(prog, x, tol_act=TOL_ACT, tol_stat=1e-7):
    """KKT certificate of B-stationarity, one system per active minus piece.

    The complementarity pattern is frozen by the active sets: multipliers
    exist only on active constraints, so all complementarity products
    vanish by construction and are reported as residuals.  Valid modulo
    Abadie's CQ (``abadie_assumed``); LICQ of the active constraint
    gradients is evaluated as a sufficient condition.
    """
    x = np.asarray(x, dtype=float)
    if not prog.contains(x, tol=1e-7):
        raise ValueError("point-not-in-X")

    gq = prog.constraint_gradient(x)
    act1 = prog.beta1_active(x, tol_act)
    act2 = prog.beta2_active(x, tol_act)
    act_rows = prog.linear.active_rows(x, tol_act)
    grad_rows = ([gq] if (act1 or act2) else []) + [prog.linear.A[j] for j in act_rows]
    licq = check_licq(grad_rows)

    g1 = prog.q1.gradient(x)
    gval = prog.constraint_value(x)
    a2 = prog.minus_active_set(x, tol_act)

    multipliers = {}
    residual = 0.0
    comp = 0.0
    for i2 in a2:
        cols, nonneg = [], []
        if act1:
            cols.append(-gq)
            nonneg.append(True)
        if act2:
            cols.append(gq)
            nonneg.append(True)
        for j in act_rows:
            cols.append(prog.linear.A[j])
            nonneg.append(True)
        for e in prog.linear.E:
            cols.append(e)
            nonneg.append(False)
        rhs = prog.minus_pieces[i2].gradient(x) - g1
        if cols:
            M = np.column_stack(cols)
            feasible, sol, _ = equality_system_feasible(M, rhs, nonneg)
        else:
            feasible = np.linalg.norm(rhs) <= tol_stat * (1.0 + np.linalg.norm(g1))
            sol = np.zeros(0)
            M = np.zeros((prog.dim, 0))
        if not feasible:
            return BCertificate(NOT_STATIONARY, residual=residual,
                                abadie_assumed=True, licq=licq, failing_piece=i2)
        resid = float(np.max(np.abs(M @ sol - rhs))) if sol.size else float(np.max(np.abs(rhs)))
        residual = max(residual, resid)
        k = 0
        lam1 = lam2 = 0.0
        if act1:
            lam1 = float(sol[k]); k += 1
        if act2:
            lam2 = float(sol[k]); k += 1
        mu = dict(zip(act_rows, sol[k:k + len(act_rows)]))
        multipliers[i2] = {"lambda1": lam1, "lambda2": lam2, "mu": mu}
        if prog.beta1 is not None:
            comp = max(comp, abs(lam1 * (gval - prog.beta1)))
        if prog.beta2 is not None:
            comp = max(comp, abs(lam2 * (prog.beta2 - gval)))
        slack = prog.linear.b - prog.linear.A @ x if prog.linear.num_rows else np.zeros(0)
        for j, m in mu.items():
            comp = max(comp, abs(m * slack[j]))
    return BCertificate(STATIONARY, multipliers=multipliers, residual=residual,
                        complementarity=comp, abadie_assumed=True, licq=licq)


def _restricted_constraint(prog, x0, Z, beta):
    return QuadraticFn(prog.Qc, prog.c, -beta).restricted(x0, Z)


def enumerate_b_values(prog, lam_cap=LAMBDA_CAP, max_rows=20, allow_large=False,
                       never_strict=False):
    """Candidate B-stationary values of a doubly quadratic program.

    Per minus piece and per linear active set, the problem is reduced to
    the face's null space and split by which beta bound is active: the
    interior case solves a plain stationarity system, an active bound
    couples the reduced pencil with the bound equation through a
    multiplier in [0, lam_cap] (negated for the lower bound, free for a
    collapsed equality) and is handled by the kink kernel.  Detected roots
    beyond the cap set ``meta["lambda_cap_hit"]``.  With ``never_strict``
    the complementary-pattern path is used instead (the upper bound is
    assumed to bind everywhere on the linear polyhedron, which requires a
    convex constraint form).  Every candidate is re-verified through
    :func:`check_b_stationary`.
    """
    m = prog.linear.num_rows
    if m > max_rows and not allow_large:
        raise ValueError(f"too-large: {m} inequality rows")
    vs = ValueSet(meta={"scope": "b-stationary", "lambda_cap": lam_cap,
                        "lambda_cap_hit": False, "complete": True})

    def consider(x, tag):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) or not prog.contains(x, tol=1e-7):
            return
        cert = check_b_stationary(prog, x)
        if cert.verdict == STATIONARY:
            vs.add(prog.objective(x), x, tag)

    if never_strict:
        _never_strict_path(prog, vs, consider)
        return vs.sorted()

    for i2, piece in enumerate(prog.minus_pieces):
        qhat = prog.q1.shifted(piece)
        for r in range(m + 1):
            for rows in itertools.combinations(range(m), r):
                C = np.vstack([prog.linear.A[list(rows)], prog.linear.E])
                e = np.concatenate([prog.linear.b[list(rows)], prog.linear.d])
                if C.shape[0]:
                    x0 = _consistent_lstsq(C, e)
                    if x0 is None:
                        continue
                    Z = null_space_basis(C)
                else:
                    x0, Z = np.zeros(prog.dim), np.eye(prog.dim)
                red = qhat.restricted(x0, Z)

                # Interior case: both bounds inactive, lambda = 0.
                if Z.shape[1]:
                    fam = _stationary_family(red.hessian, red.linear)
                    if fam is not None:
                        y0, _ = fam
                        x = x0 + Z @ y0
                        if _strictly_between(prog, x):
                            consider(x, f"interior-{i2}-{list(rows)}")
                elif _strictly_between(prog, x0) and np.linalg.norm(red.linear) <= 1e-9:
                    consider(x0, f"interior-{i2}-{list(rows)}")

                # Active-bound cases via the pencil kernel on the face.
                branches = []
                if prog.beta1 is not None and prog.beta2 is not None \
                        and prog.beta1 == prog.beta2:
                    branches.append((prog.beta2, -lam_cap, lam_cap, "eq"))
                else:
                    if prog.beta2 is not None:
                        branches.append((prog.beta2, 0.0, lam_cap, "b2"))
                    if prog.beta1 is not None:
                        branches.append((prog.beta1, -lam_cap, 0.0, "b1"))
                for beta, lo, hi, btag in branches:
                    target = _restricted_constraint(prog, x0, Z, beta)
                    if Z.shape[1] == 0:
                        if abs(target.constant) <= 1e-8 * (1.0 + abs(beta)):
                            consider(x0, f"{btag}-{i2}-{list(rows)}")
                        continue
                    Qr = QuadraticFn(prog.Qc, prog.c, 0.0).restricted(x0, Z)
                    # grad_red(y) + lam * grad_Qr(y) = 0 in the kernel's
                    # (lam*P - Q) y = q - lam*p convention.
                    cands, diag = kink_candidates(
                        Qr.hessian, -red.hessian, Qr.linear, -red.linear,
                        target, lo, hi, lam_beyond=10.0 * lam_cap)
                    if diag["roots_beyond"]:
                        vs.meta["lambda_cap_hit"] = True
                        vs.meta["complete"] = False
                    if diag["singular_pencil"] or not diag["swept_fully"]:
                        vs.meta["complete"] = False
                    for lam, y, tag in cands:
                        consider(x0 + Z @ y, f"{btag}-{tag}-{i2}-{list(rows)}")
    return vs.sorted()


def _strictly_between(prog, x, tol=1e-9):
    g = prog.constraint_value(x)
    s = prog._beta_scale()
    if prog.beta1 is not None and g <= prog.beta1 + tol * s:
        return False
    if prog.beta2 is not None and g >= prog.beta2 - tol * s:
        return False
    return True


def _never_strict_path(prog, vs, consider):
    """Prop-13(b) route: the upper bound binds everywhere on the polyhedron.

    Verifies convexity of the constraint form, checks that the minimum of
    the constraint quadratic over the linear polyhedron equals beta2, then
    enumerates the complementary patterns (13) in the lifted (x, mu) space
    and runs the QP enumerator on each pattern polyhedron.
    """
    if np.linalg.eigvalsh(prog.Qc)[0] < -1e-10:
        raise ValueError("never-strict path requires a convex constraint form")
    if prog.beta2 is None:
        raise ValueError("never-strict path requires a finite upper bound")
    n = prog.dim
    mrows = prog.linear.num_rows

    x = cp.Variable(n)
    cons = []
    if mrows:
        cons.append(prog.linear.A @ x <= prog.linear.b)
    if prog.linear.E.shape[0]:
        cons.append(prog.linear.E @ x == prog.linear.d)
    gq = QuadraticFn(prog.Qc, prog.c, 0.0)
    prob = cp.Problem(cp.Minimize(_quad_expr(x, gq)), cons)
    prob.solve(solver=cp.CLARABEL)
    vs.meta["constraint_min"] = float(prob.value)
    if not np.isclose(prob.value, prog.beta2, atol=1e-6 * (1.0 + abs(prog.beta2))):
        vs.meta["never_strict_verified"] = False
        return
    vs.meta["never_strict_verified"] = True

    A, b = prog.linear.A, prog.linear.b
    for i2, piece in enumerate(prog.minus_pieces):
        qhat = prog.q1.shifted(piece)
        lifted_q = QuadraticFn(
            np.block([[qhat.hessian, np.zeros((n, mrows))],
                      [np.zeros((mrows, n)), np.zeros((mrows, mrows))]]),
            np.concatenate([qhat.linear, np.zeros(mrows)]),
            qhat.constant)
        for I_size in range(mrows + 1):
            for I in itertools.combinations(range(mrows), I_size):
                J = [j for j in range(mrows) if j not in I]
                # equalities: Qc x + c + A' mu = 0, A_I x = b_I, mu_J = 0
                E_rows = [np.hstack([prog.Qc, A.T])] if mrows else [np.hstack([prog.Qc, np.zeros((n, 0))])]
                d_rows = [-prog.c]
                for j in I:
                    E_rows.append(np.hstack([A[j], np.zeros(mrows)])[None, :])
                    d_rows.append(np.array([b[j]]))
                for j in J:
                    row = np.zeros(n + mrows)
                    row[n + j] = 1.0
                    E_rows.append(row[None, :])
                    d_rows.append(np.array([0.0]))
                E = np.vstack(E_rows)
                d = np.concatenate([np.atleast_1d(v) for v in d_rows])
                # inequalities: A_J x <= b_J, -mu_I <= 0
                ineq_rows, ineq_b = [], []
                for j in J:
                    ineq_rows.append(np.hstack([A[j], np.zeros(mrows)]))
                    ineq_b.append(b[j])
                for j in I:
                    row = np.zeros(n + mrows)
                    row[n + j] = -1.0
                    ineq_rows.append(row)
                    ineq_b.append(0.0)
                lifted_poly = Polyhedron(
                    np.array(ineq_rows) if ineq_rows else np.zeros((0, n + mrows)),
                    np.array(ineq_b), E, d)
                per = enumerate_qp_values(lifted_q, lifted_poly, allow_large=True)
                for w in per.witnesses:
                    consider(w[:n], f"pattern-{list(I)}-{i2}")


# ---------------------------------------------------------------------------
# JSON problem files (extends the difference-max schema)


def dqc_to_dict(prog):
    from .core import quadratic_to_dict, polyhedron_to_dict
    return {
        "q1": quadratic_to_dict(prog.q1),
        "minus": [quadratic_to_dict(p) for p in prog.minus_pieces],
        "Qc": prog.Qc.tolist(),
        "c": prog.c.tolist(),
        "beta1": prog.beta1,
        "beta2": prog.beta2,
        "polyhedron": polyhedron_to_dict(prog.linear),
    }


def dqc_from_dict(obj):
    from .core import quadratic_from_dict, polyhedron_from_dict
    q1 = quadratic_from_dict(obj["q1"])
    pieces = tuple(quadratic_from_dict(p) for p in obj.get("minus", []))
    return DQCProgram(
        q1=q1, minus_pieces=pieces,
        Qc=np.asarray(obj["Qc"], dtype=float),
        c=np.asarray(obj["c"], dtype=float),
        beta1=obj.get("beta1"), beta2=obj.get("beta2"),
        linear=polyhedron_from_dict(obj.get("polyhedron"), n=q1.dim))
