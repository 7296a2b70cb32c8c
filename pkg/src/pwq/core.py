"""Domain types for difference-max quadratic programs over polyhedra.

All types are immutable after construction (arrays are marked read-only),
so instances are safe to share across threads; the operations are pure.
"""

import json
import numpy as np
from dataclasses import dataclass

TOL_ACT = 1e-8          # relative active-set tolerance
SYM_RTOL = 1e-12        # Hessian symmetry tolerance


def _ro(a, dtype=float):
    a = np.asarray(a, dtype=dtype)
    a = a.copy()
    a.setflags(write=False)
    return a


class Unsupported:
    """Sentinel result of a refused PLQ -> difference-max conversion."""

    def __init__(self, reason):
        self.reason = reason

    def __repr__(self):
        return f"Unsupported({self.reason!r})"


@dataclass(frozen=True, eq=False)
class QuadraticFn:
    """One quadratic piece  x -> 0.5 x'Qx + q'x + c.

    The Hessian is symmetrized on construction; an asymmetry beyond
    ``SYM_RTOL`` (relative) is rejected.
    """

    hessian: np.ndarray
    linear: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        H = np.atleast_2d(np.asarray(self.hessian, dtype=float))
        g = np.atleast_1d(np.asarray(self.linear, dtype=float))
        if H.shape[0] != H.shape[1] or H.shape[0] != g.shape[0]:
            raise ValueError("hessian/linear dimension mismatch")
        scale = max(np.max(np.abs(H)), 1.0) if H.size else 1.0
        if np.max(np.abs(H - H.T)) > SYM_RTOL * scale:
            raise ValueError("hessian is not symmetric")
        object.__setattr__(self, "hessian", _ro((H + H.T) / 2.0))
        object.__setattr__(self, "linear", _ro(g))
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def dim(self):
        return self.linear.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return float(0.5 * x @ self.hessian @ x + self.linear @ x + self.constant)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return self.hessian @ x + self.linear

    @staticmethod
    def zero(n):
        return QuadraticFn(np.zeros((n, n)), np.zeros(n), 0.0)

    @staticmethod
    def affine(a, c=0.0):
        a = np.atleast_1d(np.asarray(a, dtype=float))
        return QuadraticFn(np.zeros((a.size, a.size)), a, c)

    def shifted(self, other):
        """This quadratic minus another one (same dimension)."""
        return QuadraticFn(self.hessian - other.hessian,
                           self.linear - other.linear,
                           self.constant - other.constant)

    def restricted(self, x0, Z):
        """The quadratic y -> self(x0 + Z y) on an affine subspace."""
        x0 = np.asarray(x0, dtype=float)
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        g0 = self.gradient(x0)
        return QuadraticFn(Z.T @ self.hessian @ Z, Z.T @ g0, self.value(x0))


@dataclass(frozen=True, eq=False)
class MaxOfQuadratics:
    """Pointwise maximum of finitely many quadratic pieces."""

    pieces: tuple

    def __init__(self, pieces):
        pieces = tuple(pieces)
        if not pieces:
            raise ValueError("at least one piece is required")
        n = pieces[0].dim
        if any(p.dim != n for p in pieces):
            raise ValueError("pieces have mismatched dimensions")
        object.__setattr__(self, "pieces", pieces)

    @property
    def dim(self):
        return self.pieces[0].dim

    def __len__(self):
        return len(self.pieces)

    def values(self, x):
        return np.array([p.value(x) for p in self.pieces])

    def value(self, x):
        return float(np.max(self.values(x)))

    def active_set(self, x, tol_act=TOL_ACT):
        """Indices within ``tol_act`` (relative) of the maximum; 0-based."""
        vals = self.values(x)
        vmax = np.max(vals)
        return [int(i) for i in np.nonzero(vals >= vmax - tol_act * (1.0 + abs(vmax)))[0]]

    def directional_derivative(self, x, d, tol_act=TOL_ACT):
        x = np.asarray(x, dtype=float)
        d = np.asarray(d, dtype=float)
        act = self.active_set(x, tol_act)
        return float(max(self.pieces[i].gradient(x) @ d for i in act))


@dataclass(frozen=True, eq=False)
class Polyhedron:
    """The set {x : Ax <= b, Ex = d}; the equality block may be empty."""

    A: np.ndarray
    b: np.ndarray
    E: np.ndarray = None
    d: np.ndarray = None

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float).reshape(-1, self.dim_hint())
        b = np.atleast_1d(np.asarray(self.b, dtype=float)) if np.size(self.b) else np.zeros(0)
        if A.shape[0] != b.shape[0]:
            raise ValueError("A/b row mismatch")
        n = A.shape[1]
        E = self.E if self.E is not None else np.zeros((0, n))
        d = self.d if self.d is not None else np.zeros(0)
        E = np.asarray(E, dtype=float).reshape(-1, n)
        d = np.atleast_1d(np.asarray(d, dtype=float)) if np.size(d) else np.zeros(0)
        if E.shape[0] != d.shape[0]:
            raise ValueError("E/d row mismatch")
        object.__setattr__(self, "A", _ro(A))
        object.__setattr__(self, "b", _ro(b))
        object.__setattr__(self, "E", _ro(E))
        object.__setattr__(self, "d", _ro(d))

    def dim_hint(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim == 2:
            return A.shape[1]
        if A.size == 0:
            E = np.asarray(self.E, dtype=float) if self.E is not None else None
            if E is not None and E.ndim == 2:
                return E.shape[1]
            raise ValueError("cannot infer dimension from empty constraint data")
        return np.atleast_2d(A).shape[1]

    @staticmethod
    def whole_space(n):
        return Polyhedron(np.zeros((0, n)), np.zeros(0))

    @staticmethod
    def box(lo, hi):
        lo = np.atleast_1d(np.asarray(lo, dtype=float))
        hi = np.atleast_1d(np.asarray(hi, dtype=float))
        n = lo.size
        A = np.vstack([np.eye(n), -np.eye(n)])
        b = np.concatenate([hi, -lo])
        return Polyhedron(A, b)

    @property
    def dim(self):
        return self.A.shape[1]

    @property
    def num_rows(self):
        return self.A.shape[0]

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if self.num_rows:
            slack = self.A @ x - self.b
            if np.any(slack > tol * (1.0 + np.abs(self.b))):
                return False
        if self.E.shape[0]:
            resid = np.abs(self.E @ x - self.d)
            if np.any(resid > tol * (1.0 + np.abs(self.d))):
                return False
        return True

    def active_rows(self, x, tol_act=TOL_ACT):
        """Inequality rows j with |A_j x - b_j| <= tol_act * (1 + |b_j|)."""
        if not self.num_rows:
            return []
        x = np.asarray(x, dtype=float)
        resid = np.abs(self.A @ x - self.b)
        return [int(j) for j in np.nonzero(resid <= tol_act * (1.0 + np.abs(self.b)))[0]]

    def tangent_rows(self, x, tol_act=TOL_ACT):
        """(A_act, E) pair describing feasible directions at x."""
        act = self.active_rows(x, tol_act)
        return self.A[act], self.E


@dataclass(frozen=True, eq=False)
class DiffMaxProgram:
    """minimize  max_i psi_1i(x) - max_j psi_2j(x)  over a polyhedron."""

    plus: MaxOfQuadratics
    minus: MaxOfQuadratics
    feasible: Polyhedron

    def __post_init__(self):
        n = self.plus.dim
        if self.minus.dim != n or self.feasible.dim != n:
            raise ValueError("plus/minus/feasible dimension mismatch")

    @property
    def dim(self):
        return self.plus.dim

    def objective(self, x):
        return self.plus.value(x) - self.minus.value(x)


@dataclass(frozen=True, eq=False)
class PLQFunction:
    """Piecewise linear-quadratic function given as (cell, quadratic) pairs."""

    cells: tuple

    def __init__(self, cells):
        cells = tuple((poly, quad) for poly, quad in cells)
        if not cells:
            raise ValueError("at least one cell is required")
        n = cells[0][1].dim
        if any(q.dim != n or p.dim != n for p, q in cells):
            raise ValueError("cells have mismatched dimensions")
        object.__setattr__(self, "cells", cells)

    @property
    def dim(self):
        return self.cells[0][1].dim

    def cells_containing(self, x, tol=1e-9):
        return [k for k, (poly, _) in enumerate(self.cells) if poly.contains(x, tol)]

    def value(self, x):
        ks = self.cells_containing(x)
        if not ks:
            raise ValueError("point lies outside every cell")
        return self.cells[ks[0]][1].value(x)


# ---------------------------------------------------------------------------
# Operations


def evaluate(f, x):
    """Objective value of a difference-max program at ``x``."""
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise ValueError(f"expected a vector of dimension {f.dim}")
    return f.objective(x)


def active_sets(f, x, tol_act=TOL_ACT):
    """Active piece indices (A1, A2) of the two maxima at ``x``; 0-based."""
    if tol_act < 0:
        raise ValueError("tol_act must be nonnegative")
    x = np.asarray(x, dtype=float)
    if x.shape != (f.dim,):
        raise ValueError(f"expected a vector of dimension {f.dim}")
    return f.plus.active_set(x, tol_act), f.minus.active_set(x, tol_act)


def directional_derivative(f, x, direction, tol_act=TOL_ACT):
    """One-sided directional derivative of the difference-max objective.

    Computed exactly from the active sets:
    ``max_{i in A1} g_1i'd - max_{j in A2} g_2j'd``.
    """
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    if x.shape != (f.dim,) or d.shape != (f.dim,):
        raise ValueError(f"expected vectors of dimension {f.dim}")
    return (f.plus.directional_derivative(x, d, tol_act)
            - f.minus.directional_derivative(x, d, tol_act))


def _sample_cell_points(poly, rng, count=60, box=10.0):
    """Random points of a cell, drawn from a box and filtered for membership."""
    pts = []
    for _ in range(40 * count):
        x = rng.uniform(-box, box, size=poly.dim)
        if poly.contains(x, tol=1e-9):
            pts.append(x)
            if len(pts) >= count:
                break
    return pts


def plq_to_diff_max(f, rng=None, verify_points=60):
    """Convert a PLQ function to a difference-max program when sound.

    Only the uniformly convex (max of pieces) and uniformly concave
    (negated max) representations are attempted; the candidate is verified
    against the cell formulas on sampled points.  Anything else returns an
    :class:`Unsupported` marker, since no general conversion exists.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    n = f.dim
    quads = [q for _, q in f.cells]
    if len(quads) == 1:
        poly = f.cells[0][0]
        return DiffMaxProgram(MaxOfQuadratics(quads),
                              MaxOfQuadratics([QuadraticFn.zero(n)]), poly)

    eigs = [np.linalg.eigvalsh(q.hessian) for q in quads]
    all_convex = all(e[0] >= -1e-10 for e in eigs)
    all_concave = all(e[-1] <= 1e-10 for e in eigs)
    if not (all_convex or all_concave):
        return Unsupported("cell quadratics are neither uniformly convex nor concave")

    if all_convex:
        candidate = MaxOfQuadratics(quads)
        sign = 1.0
    else:
        candidate = MaxOfQuadratics(
            [QuadraticFn(-q.hessian, -q.linear, -q.constant) for q in quads])
        sign = -1.0

    for poly, quad in f.cells:
        for x in _sample_cell_points(poly, rng, verify_points):
            if abs(sign * candidate.value(x) - quad.value(x)) > 1e-8 * (1.0 + abs(quad.value(x))):
                return Unsupported("max representation does not reproduce the cell formulas")

    feasible = Polyhedron.whole_space(n)
    zero = MaxOfQuadratics([QuadraticFn.zero(n)])
    if all_convex:
        return DiffMaxProgram(candidate, zero, feasible)
    return DiffMaxProgram(zero, candidate, feasible)


# ---------------------------------------------------------------------------
# JSON problem files


def quadratic_to_dict(q):
    return {"Q": q.hessian.tolist(), "q": q.linear.tolist(), "c": q.constant}


def quadratic_from_dict(obj):
    return QuadraticFn(np.asarray(obj["Q"], dtype=float),
                       np.asarray(obj["q"], dtype=float),
                       float(obj.get("c", 0.0)))


def polyhedron_to_dict(poly):
    out = {"A": poly.A.tolist(), "b": poly.b.tolist()}
    if poly.E.shape[0]:
        out["E"] = poly.E.tolist()
        out["d"] = poly.d.tolist()
    return out


def polyhedron_from_dict(obj, n=None):
    if obj is None:
        return Polyhedron.whole_space(n)
    A = np.asarray(obj.get("A", []), dtype=float)
    b = np.asarray(obj.get("b", []), dtype=float)
    if A.size == 0:
        A = np.zeros((0, n)) if n is not None else A.reshape(0, 0)
    E = obj.get("E")
    d = obj.get("d")
    return Polyhedron(A, b,
                      None if E is None else np.asarray(E, dtype=float),
                      None if d is None else np.asarray(d, dtype=float))


def program_to_dict(f):
    return {
        "plus": [quadratic_to_dict(p) for p in f.plus.pieces],
        "minus": [quadratic_to_dict(p) for p in f.minus.pieces],
        "polyhedron": polyhedron_to_dict(f.feasible),
    }


def program_from_dict(obj):
    plus = MaxOfQuadratics([quadratic_from_dict(p) for p in obj["plus"]])
    minus_list = obj.get("minus", [])
    if minus_list:
        minus = MaxOfQuadratics([quadratic_from_dict(p) for p in minus_list])
    else:
        minus = MaxOfQuadratics([QuadraticFn.zero(plus.dim)])
    feasible = polyhedron_from_dict(obj.get("polyhedron"), n=plus.dim)
    return DiffMaxProgram(plus, minus, feasible)


def save_program(f, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(program_to_dict(f), fh, indent=1)
        fh.write("\n")


def load_program(path):
    with open(path, "r", encoding="utf-8") as fh:
        return program_from_dict(json.load(fh))
