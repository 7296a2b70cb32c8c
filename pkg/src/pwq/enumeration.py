"""Enumeration of d-stationary values.

The workhorse is the kink kernel: given the multiplier equation
``(lam*P - Q) x = q - lam*p`` with lam in an interval and a quadratic
target equation ``tau(x) = 0``, it finds every (lam, x) pair by splitting
the interval at the real roots of ``det(lam*P - Q)``.  At a root the
singular linear system is solved directly and the solution family swept
for target zeros; between roots the solutions form a rational curve
x(lam) and the target becomes a polynomial ``det^2 * tau(x(lam))`` whose
real roots are isolated exactly.  Every candidate produced anywhere in
this module is re-verified through the stationarity certificates before
its value is reported.
"""

import itertools
import numpy as np
from dataclasses import dataclass, field

import cvxpy as cp

from .core import (QuadraticFn, MaxOfQuadratics, DiffMaxProgram, Polyhedron,
                   TOL_ACT, active_sets)
from .linalg import (Polynomial, det_polynomial, parametric_inverse_curve,
                     real_roots_in_interval, count_real_roots, null_space_basis,
                     numerical_rank, sturm_chain)
from .stationarity import check_d_stationary, check_licq, STATIONARY

VALUE_TOL = 1e-6        # value dedup
ROOT_TOL = 1e-9         # lambda dedup
SWEEP_BOX = 10.0
SWEEP_GRID = 100
MAX_SWEEP_DIMS = 2


@dataclass
class ValueSet:
    """Distinct stationary values with one witness and a branch tag each."""

    values: list = field(default_factory=list)
    witnesses: list = field(default_factory=list)
    tags: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def add(self, value, witness, tag):
        for k, v in enumerate(self.values):
            if abs(v - value) <= VALUE_TOL:
                return k
        self.values.append(float(value))
        self.witnesses.append(np.asarray(witness, dtype=float))
        self.tags.append(tag)
        return len(self.values) - 1

    def sorted(self):
        order = np.argsort(self.values)
        return ValueSet([self.values[i] for i in order],
                        [self.witnesses[i] for i in order],
                        [self.tags[i] for i in order],
                        dict(self.meta))

    def __len__(self):
        return len(self.values)

    def __contains__(self, value):
        return any(abs(v - value) <= VALUE_TOL for v in self.values)


class TooLargeError(ValueError):
    """Active-set enumeration refused: too many inequality rows."""


# ---------------------------------------------------------------------------
# Affine families of stationary points


def _consistent_lstsq(M, rhs, rtol=1e-8):
    """Least-squares solve with a consistency check; None when inconsistent."""
    M = np.atleast_2d(M)
    if M.size == 0:
        return np.zeros(M.shape[1])
    x, *_ = np.linalg.lstsq(M, rhs, rcond=None)
    if np.linalg.norm(M @ x - rhs) > rtol * (1.0 + np.linalg.norm(rhs)):
        return None
    return x


def _stationary_family(H, g):
    """Solution set of Hx = -g as (x0, Z); None when empty."""
    x0 = _consistent_lstsq(H, -g)
    if x0 is None:
        return None
    Z = null_space_basis(H)
    return x0, Z


def _target_scale(target, x):
    x = np.asarray(x, dtype=float)
    return (1.0 + abs(0.5 * x @ target.hessian @ x)
            + abs(target.linear @ x) + abs(target.constant))


def _target_zeros_on_family(target, x0, Z):
    """Points of the affine family x0 + Z w with target(x) = 0.

    Returns (points, swept_fully).  One free dimension is solved as an
    exact scalar quadratic; two are swept on a sign-change grid; more than
    ``MAX_SWEEP_DIMS`` free dimensions are swept on their leading plane
    only and flagged.
    """
    ndim = Z.shape[1]
    if ndim == 0:
        ok = abs(target.value(x0)) <= 1e-7 * _target_scale(target, x0)
        return ([x0] if ok else []), True

    if ndim == 1:
        z = Z[:, 0]
        a = float(z @ target.hessian @ z)
        b = float(target.gradient(x0) @ z)
        c = float(target.value(x0))
        scale = max(abs(a), abs(b), abs(c), 1e-30)
        if abs(a) <= 1e-12 * scale:
            if abs(b) <= 1e-12 * scale:
                return ([x0] if abs(c) <= 1e-9 * scale else []), True
            return [x0 - (c / b) * z], True
        disc = b * b - 2.0 * a * c
        if disc < 0.0:
            return [], True
        sq = np.sqrt(disc)
        return [x0 + ((-b + sq) / a) * z, x0 + ((-b - sq) / a) * z], True

    swept_fully = ndim <= MAX_SWEEP_DIMS
    Z2 = Z[:, :2]
    ticks = np.linspace(-SWEEP_BOX, SWEEP_BOX, SWEEP_GRID)
    W1, W2 = np.meshgrid(ticks, ticks, indexing="ij")
    pts = x0[None, :] + W1.reshape(-1, 1) * Z2[:, 0] + W2.reshape(-1, 1) * Z2[:, 1]
    vals = (0.5 * np.einsum("ij,jk,ik->i", pts, target.hessian, pts)
            + pts @ target.linear + target.constant).reshape(SWEEP_GRID, SWEEP_GRID)

    hits = []

    def _bisect(wa, wb):
        fa = target.value(x0 + Z2 @ wa)
        for _ in range(80):
            wm = 0.5 * (wa + wb)
            fm = target.value(x0 + Z2 @ wm)
            if abs(fm) <= 1e-11 * _target_scale(target, x0 + Z2 @ wm):
                return x0 + Z2 @ wm
            if fa * fm <= 0.0:
                wb = wm
            else:
                wa, fa = wm, fm
        return x0 + Z2 @ (0.5 * (wa + wb))

    sign = np.sign(vals)
    flips_i = np.nonzero(sign[:-1, :] * sign[1:, :] < 0)
    flips_j = np.nonzero(sign[:, :-1] * sign[:, 1:] < 0)
    segments = [(np.array([ticks[i], ticks[j]]), np.array([ticks[i + 1], ticks[j]]))
                for i, j in zip(*flips_i)]
    segments += [(np.array([ticks[i], ticks[j]]), np.array([ticks[i], ticks[j + 1]]))
                 for i, j in zip(*flips_j)]
    for wa, wb in segments[:200]:
        hits.append(_bisect(wa, wb))
    exact = np.abs(vals).ravel() <= 1e-11
    for idx in np.nonzero(exact)[0][:50]:
        hits.append(pts[idx])
    return hits, swept_fully


# ---------------------------------------------------------------------------
# Kink kernel: (lam P - Q) x = q - lam p,  tau(x) = 0,  lam in [lo, hi]


def _curve_target_polynomial(curve, target):
    """Polynomial det(lam)^2 * tau(x(lam)) along a rational curve.

    Also returns the magnitude of the largest term that entered the sum,
    against which cancellation to an identically-zero polynomial must be
    judged.
    """
    N = curve.numerator
    D = curve.denominator
    H = target.hessian
    acc = Polynomial([0.0])
    scale = 1e-30
    for j in range(len(N)):
        for k in range(len(N)):
            if H[j, k] != 0.0:
                term = (N[j] * N[k]).scaled(0.5 * H[j, k])
                scale = max(scale, np.max(np.abs(term.coeffs)))
                acc = acc + term
    lin = Polynomial([0.0])
    for j in range(len(N)):
        if target.linear[j] != 0.0:
            lin = lin + N[j].scaled(target.linear[j])
    term = D * lin
    scale = max(scale, np.max(np.abs(term.coeffs)))
    term2 = (D * D).scaled(target.constant)
    scale = max(scale, np.max(np.abs(term2.coeffs)))
    acc = acc + term + term2
    return acc, scale


def _singular_solve(M, rhs, atol):
    """Least-norm solution and null basis of M x = rhs, singular values at
    or below ``atol`` treated as exact zeros.  Returns (x0, Z) with x0 None
    when the system is inconsistent."""
    U, s, Vt = np.linalg.svd(M)
    keep = s > atol
    Z = Vt[len(s[keep]):].T if Vt.shape[0] > np.sum(keep) else np.zeros((M.shape[1], 0))
    Urhs = U.T @ rhs
    x0 = Vt[:np.sum(keep)].T @ (Urhs[:np.sum(keep)] / s[keep]) if np.any(keep) \
        else np.zeros(M.shape[1])
    dropped = Urhs[np.sum(keep):]
    if np.linalg.norm(dropped) > 1e-7 * (1.0 + np.linalg.norm(rhs)):
        return None, Z
    return x0, Z


def _solve_pencil_point(P, Q, p, q, lam):
    M = lam * P - Q
    rhs = q - lam * p
    try:
        x = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError:
        x = None
    if x is None or not np.all(np.isfinite(x)):
        x = _consistent_lstsq(M, rhs, rtol=1e-6)
    return x


def kink_candidates(P, Q, p, q, target, lam_lo, lam_hi, lam_beyond=None):
    """All (lam, x, tag) with (lam P - Q)x = q - lam p and target(x) = 0.

    ``lam_beyond`` (optional) asks for a count of real roots past ``lam_hi``
    up to that bound, reported in the diagnostics for cap-hit warnings.
    Diagnostics also flag the identically singular pencil, in which case
    only a lam-grid sweep is attempted and completeness is not claimed.
    """
    P = np.atleast_2d(np.asarray(P, dtype=float))
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    diag = {"singular_pencil": False, "swept_fully": True,
            "det_roots": [], "intervals": 0, "roots_beyond": 0}
    out = []

    det = det_polynomial(P, Q)
    if det.is_zero():
        diag["singular_pencil"] = True
        diag["swept_fully"] = False
        if not np.any(P) and not np.any(Q):
            # Fully affine pieces: q = lam p must hold exactly.
            pp = float(p @ p)
            if pp > 0.0:
                lam = float(p @ q) / pp
                if (np.linalg.norm(q - lam * p) <= 1e-9 * (1.0 + np.linalg.norm(q))
                        and lam_lo - 1e-12 <= lam <= lam_hi + 1e-12):
                    pts, full = _target_zeros_on_family(
                        target, np.zeros(len(p)), np.eye(len(p)))
                    diag["swept_fully"] = full
                    out.extend((lam, x, "kink-affine") for x in pts)
            elif np.linalg.norm(q) <= 1e-12:
                pts, full = _target_zeros_on_family(
                    target, np.zeros(len(p)), np.eye(len(p)))
                diag["swept_fully"] = full
                out.extend((0.5 * (lam_lo + lam_hi), x, "kink-affine") for x in pts)
            return out, diag
        for lam in np.linspace(lam_lo, lam_hi, 201):
            x0 = _consistent_lstsq(lam * P - Q, q - lam * p, rtol=1e-7)
            if x0 is None:
                continue
            Z = null_space_basis(lam * P - Q)
            pts, _ = _target_zeros_on_family(target, x0, Z)
            out.extend((lam, x, "kink-sweep") for x in pts)
        return out, diag

    roots = real_roots_in_interval(det, lam_lo, lam_hi)
    diag["det_roots"] = roots
    if lam_beyond is not None and lam_beyond > lam_hi:
        diag["roots_beyond"] += count_real_roots(det, lam_hi, lam_beyond)

    # Case 1: singular pencil values.  The refined root carries an error
    # of a few ulps of its magnitude, so the pencil's null space is taken
    # at an absolute singular-value tolerance of that size.
    pencil_scale = 1.0 + np.linalg.norm(P) + np.linalg.norm(Q)
    for lam in roots:
        M = lam * P - Q
        atol = 1e-7 * max(1.0, abs(lam)) * pencil_scale
        x0, Z = _singular_solve(M, q - lam * p, atol)
        if x0 is None:
            continue   # inconsistent system: empty branch
        pts, full = _target_zeros_on_family(target, x0, Z)
        diag["swept_fully"] = diag["swept_fully"] and full
        out.extend((lam, x, "kink-case1") for x in pts)

    # Case 2: the rational curve between consecutive singular values.
    curve = parametric_inverse_curve(P, Q, -p, -q)   # x = (lamP-Q)^{-1}(q-lam p)
    g, g_formation_scale = _curve_target_polynomial(curve, target)
    gscale = np.max(np.abs(g.coeffs))
    breaks = [lam_lo] + [r for r in roots
                         if lam_lo + ROOT_TOL < r < lam_hi - ROOT_TOL] + [lam_hi]
    flat = g.is_zero() or gscale <= 1e-10 * g_formation_scale

    dg = g.derivative()
    for a, b in zip(breaks, breaks[1:]):
        if b - a <= ROOT_TOL:
            continue
        diag["intervals"] += 1
        gap_a = 1e-7 * max(1.0, abs(a)) if any(abs(a - r) <= ROOT_TOL for r in roots) else 0.0
        gap_b = 1e-7 * max(1.0, abs(b)) if any(abs(b - r) <= ROOT_TOL for r in roots) else 0.0
        aa, bb = a + gap_a, b - gap_b
        if aa >= bb:
            continue
        if flat:
            # target vanishes along the whole curve: one value per interval,
            # sampled at the midpoint with endpoint consistency points.
            for lam in (0.5 * (aa + bb), aa + 0.01 * (bb - aa), bb - 0.01 * (bb - aa)):
                x = _solve_pencil_point(P, Q, p, q, lam)
                if x is not None:
                    out.append((lam, x, "kink-curve-flat"))
            continue
        for lam in real_roots_in_interval(g, aa, bb):
            x = _solve_pencil_point(P, Q, p, q, lam)
            if x is not None:
                out.append((lam, x, "kink-case2"))
        # Tangency insurance: local minima of |g| that nearly touch zero.
        if not dg.is_zero():
            for lam in real_roots_in_interval(dg, aa, bb):
                if abs(g(lam)) <= 1e-9 * gscale:
                    x = _solve_pencil_point(P, Q, p, q, lam)
                    if x is not None:
                        out.append((lam, x, "kink-tangent"))
    if lam_beyond is not None and lam_beyond > lam_hi and not flat and not g.is_zero():
        diag["roots_beyond"] += count_real_roots(g, lam_hi, lam_beyond)

    # Keep only genuine target zeros (near-root noise from clustered or
    # multiple roots is filtered here) and deduplicate on lam.
    seen = []
    uniq = []
    for lam, x, tag in out:
        if abs(target.value(x)) > 1e-6 * _target_scale(target, x):
            continue
        key = (round(lam / max(ROOT_TOL, 1e-12)), tuple(np.round(x, 6)))
        if key in seen:
            continue
        seen.append(key)
        uniq.append((lam, x, tag))
    return uniq, diag


# ---------------------------------------------------------------------------
# Enumerators


def _single_piece_program(quad, X):
    zero = MaxOfQuadratics([QuadraticFn.zero(quad.dim)])
    return DiffMaxProgram(MaxOfQuadratics([quad]), zero, X)


def _face_family(X, rows):
    """Solution family of the face {A_rows x = b_rows, Ex = d}."""
    C = np.vstack([X.A[list(rows)], X.E])
    e = np.concatenate([X.b[list(rows)], X.d])
    if C.shape[0] == 0:
        return np.zeros(X.dim), np.eye(X.dim)
    x0 = _consistent_lstsq(C, e)
    if x0 is None:
        return None
    return x0, null_space_basis(C)


def enumerate_qp_values(quad, X, max_rows=20, allow_large=False,
                        tol_act=TOL_ACT):
    """Stationary values of one quadratic over a polyhedron.

    Enumerates every subset of inequality rows, solves the stationarity
    system on the corresponding face, and keeps feasible solutions that
    certify as d-stationary.  Refuses more than ``max_rows`` rows unless
    ``allow_large`` is set.
    """
    m = X.num_rows
    if m > max_rows and not allow_large:
        raise TooLargeError(f"too-large: {m} inequality rows")
    program = _single_piece_program(quad, X)
    vs = ValueSet(meta={"scope": "qp", "faces": 0})

    for r in range(m + 1):
        for rows in itertools.combinations(range(m), r):
            fam = _face_family(X, rows)
            if fam is None:
                continue
            vs.meta["faces"] += 1
            x0, Z = fam
            if Z.shape[1]:
                red = quad.restricted(x0, Z)
                sol = _stationary_family(red.hessian, red.linear)
                if sol is None:
                    continue
                y0, _ = sol
                x = x0 + Z @ y0
            else:
                x = x0
            if not X.contains(x, tol=1e-7):
                continue
            # Multiplier prefilter on nondegenerate faces.
            C = np.vstack([X.A[list(rows)], X.E])
            if C.shape[0] and numerical_rank(C) == C.shape[0]:
                mult = _consistent_lstsq(C.T, -quad.gradient(x), rtol=1e-6)
                if mult is not None and len(rows) and np.min(mult[:len(rows)]) < -1e-6:
                    continue
            cert = check_d_stationary(program, x, tol_act=tol_act)
            if cert.verdict == STATIONARY:
                vs.add(quad.value(x), x, f"face-{list(rows)}")
    return vs.sorted()


def _plq_d_stationary(f, x, tol=1e-7):
    """d-stationarity of a PLQ function: certified on every incident cell."""
    ks = f.cells_containing(x, tol)
    if not ks:
        return False
    for k in ks:
        poly, quad = f.cells[k]
        cert = check_d_stationary(_single_piece_program(quad, poly), x)
        if cert.verdict != STATIONARY:
            return False
    return True


def enumerate_plq_values(f, max_rows=20, allow_large=False):
    """Stationary values of a piecewise linear-quadratic function.

    Per-cell QP enumeration produces a candidate superset, which is then
    filtered by the full-function d-stationarity test on every cell
    containing the candidate.
    """
    vs = ValueSet(meta={"scope": "plq"})
    for poly, quad in f.cells:
        per_cell = enumerate_qp_values(quad, poly, max_rows, allow_large)
        for x, tag in zip(per_cell.witnesses, per_cell.tags):
            if _plq_d_stationary(f, x):
                vs.add(f.value(x), x, tag)
    return vs.sorted()


def _quad_expr(x, quad):
    H = np.asarray(quad.hessian)
    expr = quad.linear @ x + quad.constant
    if np.any(H):
        expr = expr + 0.5 * cp.quad_form(x, cp.psd_wrap(H))
    return expr


def enumerate_convex_minus_max_concave(f, eig_tol=1e-10):
    """Prop-2(b) oracle: plus pieces convex, minus pieces concave.

    Globally minimizes the convex program psi1 - psi_{2i} over the
    polyhedron for each minus piece and keeps the minima whose minimizers
    are d-stationary for the full difference-max objective.
    """
    for piece in f.plus.pieces:
        if np.linalg.eigvalsh(piece.hessian)[0] < -eig_tol:
            raise ValueError("plus piece is not convex")
    for piece in f.minus.pieces:
        if np.linalg.eigvalsh(piece.hessian)[-1] > eig_tol:
            raise ValueError("minus piece is not concave")

    n = f.dim
    vs = ValueSet(meta={"scope": "convex-minus-max-concave"})
    for i, minus in enumerate(f.minus.pieces):
        x = cp.Variable(n)
        neg = QuadraticFn(-minus.hessian, -minus.linear, -minus.constant)
        obj = cp.maximum(*[_quad_expr(x, piece) for piece in f.plus.pieces]) \
            if len(f.plus.pieces) > 1 else _quad_expr(x, f.plus.pieces[0])
        obj = obj + _quad_expr(x, neg)
        cons = []
        if f.feasible.num_rows:
            cons.append(f.feasible.A @ x <= f.feasible.b)
        if f.feasible.E.shape[0]:
            cons.append(f.feasible.E @ x == f.feasible.d)
        prob = cp.Problem(cp.Minimize(obj), cons)
        prob.solve(solver=cp.CLARABEL)
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            continue
        xv = np.asarray(x.value, dtype=float).reshape(n)
        _, a2 = active_sets(f, xv, 1e-6)
        if i not in a2:
            continue
        cert = check_d_stationary(f, xv)
        if cert.verdict == STATIONARY:
            vs.add(f.objective(xv), xv, f"convex-qp-{i}")
    return vs.sorted()


def problem5_program(psi1, psi2):
    """max(psi1, 0) - psi2 as an unconstrained difference-max program."""
    n = psi1.dim
    plus = MaxOfQuadratics([psi1, QuadraticFn.zero(n)])
    minus = MaxOfQuadratics([psi2])
    return DiffMaxProgram(plus, minus, Polyhedron.whole_space(n))


def _problem5_candidates(psi1, psi2, lam_lo=0.0, lam_hi=1.0):
    """Raw stationary-point candidates of  max(psi1,0) - psi2  with tags."""
    P, p = psi1.hessian, psi1.linear
    Q, q = psi2.hessian, psi2.linear
    cands = []

    # Smooth branch psi1 > 0: stationary points of psi1 - psi2.
    fam = _stationary_family(P - Q, p - q)
    if fam is not None:
        x0, Z = fam
        pts = [x0]
        if Z.shape[1] and psi1.value(x0) <= 0.0:
            # the family's value is constant; look for a strictly positive
            # representative of psi1 on it
            neg = QuadraticFn(-psi1.hessian, -psi1.linear, -psi1.constant)
            zs, _ = _target_zeros_on_family(neg, x0, Z)
            rng = np.random.default_rng(7)
            pts += zs + [x0 + Z @ rng.normal(size=Z.shape[1]) for _ in range(20)]
        for x in pts:
            if psi1.value(x) > 1e-9 * _target_scale(psi1, x):
                cands.append((None, x, "smooth-pos"))
                break

    # Smooth branch psi1 < 0: stationary points of -psi2.
    fam = _stationary_family(Q, q)
    if fam is not None:
        x0, Z = fam
        pts = [x0]
        if Z.shape[1] and psi1.value(x0) >= 0.0:
            zs, _ = _target_zeros_on_family(psi1, x0, Z)
            rng = np.random.default_rng(11)
            pts += zs + [x0 + Z @ rng.normal(size=Z.shape[1]) for _ in range(20)]
        for x in pts:
            if psi1.value(x) < -1e-9 * _target_scale(psi1, x):
                cands.append((None, x, "smooth-neg"))
                break

    kinks, diag = kink_candidates(P, Q, p, q, psi1, lam_lo, lam_hi)
    cands.extend(kinks)
    return cands, diag


def enumerate_problem5_values(psi1, psi2, lam_lo=0.0, lam_hi=1.0):
    """Stationary values of the unconstrained  max(psi1(x), 0) - psi2(x).

    Implements the full case split: the two smooth branches, the singular
    pencil values (kink-case1), and the rational-curve zeros between them
    (kink-case2), including the identically-vanishing curve.  Candidates
    are certified before their values enter the result.
    """
    program = problem5_program(psi1, psi2)
    cands, diag = _problem5_candidates(psi1, psi2, lam_lo, lam_hi)
    vs = ValueSet(meta={
        "scope": "problem5",
        "complete": (not diag["singular_pencil"]) and diag["swept_fully"],
        "singular_pencil": diag["singular_pencil"],
        "det_roots": diag["det_roots"],
        "intervals": diag["intervals"],
    })
    if diag["singular_pencil"] and np.any(psi1.hessian):
        vs.meta["error"] = "singular-pencil-everywhere"
    for lam, x, tag in cands:
        cert = check_d_stationary(program, x)
        if cert.verdict == STATIONARY:
            vs.add(program.objective(x), x, tag)
    return vs.sorted()


def enumerate_two_piece_diff_max(f, max_rows=20, allow_large=False):
    """Stationary values of a difference-max program with <= 2 active
    plus pieces (the completeness scope).

    For every active row set the problem is reduced to the null space of
    the face, every ordered plus-piece pair and minus piece is normalized
    to the  max(psi1, 0) - psi2  form, and its candidates are mapped back,
    filtered for feasibility and matching active sets, and certified on
    the original program.
    """
    m = f.feasible.num_rows
    if m > max_rows and not allow_large:
        raise TooLargeError(f"too-large: {m} inequality rows")
    k1, k2 = len(f.plus), len(f.minus)
    vs = ValueSet(meta={"scope": "two-active-plus-pieces", "complete": True,
                        "tuples": 0, "branch_bound": 0})

    def consider(x, i_pair, j, tag):
        x = np.asarray(x, dtype=float)
        if not np.all(np.isfinite(x)) or not f.feasible.contains(x, tol=1e-7):
            return
        a1, a2 = active_sets(f, x)
        if len(a1) > 2 or not set(a1) <= set(i_pair) or j not in a2:
            return
        cert = check_d_stationary(f, x)
        if cert.verdict == STATIONARY:
            vs.add(f.objective(x), x, tag)

    for r in range(m + 1):
        for rows in itertools.combinations(range(m), r):
            fam = _face_family(f.feasible, rows)
            if fam is None:
                continue
            x0, Z = fam
            if Z.shape[1] == 0:
                for j in range(k2):
                    vs.meta["tuples"] += 1
                    consider(x0, tuple(range(k1)), j, f"vertex-{list(rows)}")
                continue
            for j in range(k2):
                # Smooth candidates: one active plus piece.
                for i1 in range(k1):
                    vs.meta["tuples"] += 1
                    red = f.plus.pieces[i1].shifted(f.minus.pieces[j]).restricted(x0, Z)
                    sol = _stationary_family(red.hessian, red.linear)
                    if sol is not None:
                        y0, _ = sol
                        consider(x0 + Z @ y0, (i1,), j, f"smooth-{list(rows)}-{i1}-{j}")
                # Kink candidates: ordered pairs of plus pieces.
                for i1, i2 in itertools.permutations(range(k1), 2):
                    vs.meta["tuples"] += 1
                    t1 = f.plus.pieces[i1].shifted(f.plus.pieces[i2]).restricted(x0, Z)
                    t2 = f.minus.pieces[j].shifted(f.plus.pieces[i2]).restricted(x0, Z)
                    cands, diag = _problem5_candidates(t1, t2)
                    if diag["singular_pencil"] or not diag["swept_fully"]:
                        vs.meta["complete"] = False
                    vs.meta["branch_bound"] += (
                        t1.dim + len(diag["det_roots"]) + diag["intervals"] + 2)
                    for _, y, tag in cands:
                        consider(x0 + Z @ y, (i1, i2), j,
                                 f"{tag}-{list(rows)}-{i1}.{i2}-{j}")
    return vs.sorted()


# ---------------------------------------------------------------------------
# Simplex-constrained Newton zero finder (concave pieces / strictly convex
# minus part)


@dataclass
class SimplexNewtonResult:
    status: str               # "converged" | "no-convergence" | "singular-jacobian"
    lam: np.ndarray | None = None
    x: np.ndarray | None = None
    licq: bool | None = None
    lam_nonnegative: bool | None = None
    jacobian_condition: float | None = None
    iterations: int = 0
    residual: float | None = None


def _newton_map(pieces, q2, lam):
    Qlam = q2.hessian - sum(l * piece.hessian for l, piece in zip(lam, pieces))
    rhs = sum(l * piece.linear for l, piece in zip(lam, pieces)) - q2.linear
    x = np.linalg.solve(Qlam, rhs)
    k1 = len(pieces)
    F = np.empty(k1)
    last = pieces[-1].value(x)
    for i in range(k1 - 1):
        F[i] = pieces[i].value(x) - last
    F[-1] = np.sum(lam) - 1.0
    grads = np.column_stack([piece.gradient(x) for piece in pieces])
    dhat = grads[:, :-1] - grads[:, -1:]
    J = np.vstack([dhat.T @ np.linalg.solve(Qlam, grads), np.ones((1, k1))])
    return F, J, x, grads


def solve_simplex_newton(pieces, q2, lam0, max_iter=100, tol=1e-10,
                         cond_limit=1e12):
    """Newton iteration for the zero system tying simplex weights to the
    stationarity of  max(concave pieces) - (strictly convex) q2.

    The map sends lam to the tie gaps of the pieces at
    x(lam) = (P - sum lam_i Q_i)^{-1} (sum lam_i q_i - p) together with the
    simplex normalization; its Jacobian is available in closed form.  No
    projection onto the simplex is performed: negative components of a
    zero are reported, not repaired.  On success the result also reports
    whether the active-piece gradients are linearly independent.
    """
    pieces = list(pieces)
    if np.linalg.eigvalsh(q2.hessian)[0] <= 1e-8:
        raise ValueError("q2 must be strictly convex")
    for piece in pieces:
        if np.linalg.eigvalsh(piece.hessian)[-1] >= 1e-8:
            raise ValueError("pieces must be concave")

    lam = np.atleast_1d(np.asarray(lam0, dtype=float)).copy()
    if lam.shape != (len(pieces),):
        raise ValueError("lam0 must have one weight per piece")
    for it in range(1, max_iter + 1):
        F, J, x, grads = _newton_map(pieces, q2, lam)
        nrm = np.linalg.norm(F)
        if nrm <= tol:
            condJ = np.linalg.cond(J)
            return SimplexNewtonResult(
                "converged", lam=lam, x=x,
                licq=check_licq(list(grads.T)),
                lam_nonnegative=bool(np.all(lam >= -1e-12)),
                jacobian_condition=float(condJ), iterations=it, residual=float(nrm))
        condJ = np.linalg.cond(J)
        if not np.isfinite(condJ) or condJ > cond_limit:
            return SimplexNewtonResult("singular-jacobian", lam=lam,
                                       jacobian_condition=float(condJ),
                                       iterations=it, residual=float(nrm))
        lam = lam - np.linalg.solve(J, F)
    return SimplexNewtonResult("no-convergence", lam=lam, iterations=max_iter,
                               residual=float(nrm))


def simplex_newton_multistart(pieces, q2, resolution=8, dedup=1e-6):
    """Deterministic simplex-grid multistart; distinct converged zeros."""
    k1 = len(pieces)
    zeros = []
    for comp in itertools.combinations_with_replacement(range(k1), resolution):
        lam0 = np.bincount(np.array(comp), minlength=k1) / resolution
        res = solve_simplex_newton(pieces, q2, lam0)
        if res.status != "converged":
            continue
        if any(np.linalg.norm(res.lam - z.lam) <= dedup for z in zeros):
            continue
        zeros.append(res)
    zeros.sort(key=lambda r: tuple(np.round(r.lam, 12)))
    return zeros
