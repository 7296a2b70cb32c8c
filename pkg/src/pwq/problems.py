"""Named instances and seeded random factories.

The two counterexample constructions use infinitely many pieces on paper;
here they live on explicitly truncated domains, which preserves every
property exercised by the tests.  The second one is deliberately NOT a
difference-max program object: it has infinitely many distinct quadratic
pieces, so only closed-form evaluators are exposed.
"""

import numpy as np
from dataclasses import dataclass

from .core import QuadraticFn, MaxOfQuadratics, DiffMaxProgram, Polyhedron
from .bstat import DQCProgram


@dataclass(frozen=True)
class Remark3Pair:
    """dc split of max(x, 0) into two convex piecewise-affine functions
    whose criticality set is every nonnegative integer.

    Valid on (-inf, n_max + 1); the subdifferential formulas are the
    closed forms of the construction at integer points.
    """

    n_max: int

    def psi1(self, x):
        x = np.asarray(x, dtype=float)
        n = np.clip(np.floor(x), 0, self.n_max)
        return np.where(x <= 0.0, 0.0, (2 * n + 1) * x - n * (n + 1))

    def psi2(self, x):
        x = np.asarray(x, dtype=float)
        n = np.clip(np.floor(x), 0, self.n_max)
        return np.where(x <= 0.0, 0.0, 2 * n * x - n * (n + 1))

    def subdiff_psi1(self, n):
        """Closed-form interval [2n - 1, 2n + 1] at the integer x = n."""
        self._check_int(n)
        return (2 * n - 1.0, 2 * n + 1.0)

    def subdiff_psi2(self, n):
        """Closed-form interval [2n - 2, 2n] at the integer x = n."""
        self._check_int(n)
        return (2 * n - 2.0, 2 * n)

    def intersection(self, n):
        lo1, hi1 = self.subdiff_psi1(n)
        lo2, hi2 = self.subdiff_psi2(n)
        return (max(lo1, lo2), min(hi1, hi2))

    def _check_int(self, n):
        if not (0 <= n <= self.n_max):
            raise ValueError("integer point outside the truncated domain")

    def psi_program(self):
        """The underlying objective max(x, 0) as a difference-max program."""
        plus = MaxOfQuadratics([QuadraticFn.affine([1.0]), QuadraticFn.zero(1)])
        minus = MaxOfQuadratics([QuadraticFn.zero(1)])
        return DiffMaxProgram(plus, minus, Polyhedron.whole_space(1))


def make_remark3(n_max):
    if n_max < 1:
        raise ValueError("n_max must be at least 1")
    return Remark3Pair(int(n_max))


@dataclass(frozen=True)
class Remark12Fn:
    """A C^1 dc function, strictly increasing yet with derivative zeros at
    every even integer: infinitely many d-stationary values 2n + 2.

    Branch index n = floor(t / 2); the first convex part is
    (3/2)t^2 - 2nt + 2n^2 + n + 1 on [2n, 2n+1) and
    (1/2)t^2 + 2(n+1)t - 2n^2 - 3n on [2n+1, 2n+2); the second is
    (1/2)t^2 + 2nt - 2n^2 - n - 1 and (3/2)t^2 - 2(n+1)t + 2n^2 + 3n.
    """

    t_lo: float
    t_hi: float

    def _branch(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.t_lo - 1e-12) or np.any(t > self.t_hi + 1e-12):
            raise ValueError("point outside the truncated domain")
        n = np.floor(t / 2.0)
        first = t - 2.0 * n < 1.0
        return n, first

    def phi1(self, t):
        t = np.asarray(t, dtype=float)
        n, first = self._branch(t)
        f1 = 1.5 * t ** 2 - 2 * n * t + 2 * n ** 2 + n + 1
        f2 = 0.5 * t ** 2 + 2 * (n + 1) * t - 2 * n ** 2 - 3 * n
        return np.where(first, f1, f2)

    def phi2(self, t):
        t = np.asarray(t, dtype=float)
        n, first = self._branch(t)
        f1 = 0.5 * t ** 2 + 2 * n * t - 2 * n ** 2 - n - 1
        f2 = 1.5 * t ** 2 - 2 * (n + 1) * t + 2 * n ** 2 + 3 * n
        return np.where(first, f1, f2)

    def phi(self, t):
        return self.phi1(t) - self.phi2(t)

    def dphi(self, t):
        t = np.asarray(t, dtype=float)
        n, first = self._branch(t)
        return np.where(first, 2 * t - 4 * n, -2 * t + 4 * (n + 1))

    def dphi1(self, t):
        t = np.asarray(t, dtype=float)
        n, first = self._branch(t)
        return np.where(first, 3 * t - 2 * n, t + 2 * (n + 1))

    def dphi2(self, t):
        t = np.asarray(t, dtype=float)
        n, first = self._branch(t)
        return np.where(first, t + 2 * n, 3 * t - 2 * (n + 1))


def make_remark12(t_lo, t_hi):
    if not t_lo < t_hi:
        raise ValueError("need t_lo < t_hi")
    return Remark12Fn(float(t_lo), float(t_hi))


# ---------------------------------------------------------------------------
# Complementarity-constraint reformulations


def _subset_masks(m):
    for bits in range(1 << m):
        yield np.array([(bits >> i) & 1 for i in range(m)], dtype=bool)


def make_mpcc_penalty(f, q, N, M, Z, gamma=1.0, form="min-penalty",
                      epsilon=None, max_m=12):
    """Penalty/regularization reformulations of a linear complementarity
    constrained program over variables z = (x, y).

    ``f`` is a quadratic in the n + m joint variables; the map is
    F(x, y) = q + Nx + My.  ``min-penalty`` lifts min(y_i, F_i) into a
    difference-max objective with 2^m affine minus pieces over
    {y >= 0, F >= 0} and Z; ``quadratic-penalty`` adds gamma * y'F as a
    plain quadratic; ``regularized`` keeps f and turns complementarity
    into the single quadratic inequality y'F <= epsilon.
    """
    q = np.atleast_1d(np.asarray(q, dtype=float))
    N = np.atleast_2d(np.asarray(N, dtype=float))
    M = np.atleast_2d(np.asarray(M, dtype=float))
    m, n = N.shape
    dim = n + m
    if f.dim != dim:
        raise ValueError("objective dimension must be n + m")
    if M.shape != (m, m) or q.shape != (m,):
        raise ValueError("q/N/M shapes are inconsistent")

    # rows of y >= 0 and F(x, y) >= 0 in z = (x, y)
    Y_sel = np.hstack([np.zeros((m, n)), np.eye(m)])
    F_lin = np.hstack([N, M])
    A_extra = np.vstack([-Y_sel, -F_lin])
    b_extra = np.concatenate([np.zeros(m), q])
    A_all = np.vstack([Z.A, A_extra]) if Z.num_rows else A_extra
    b_all = np.concatenate([Z.b, b_extra]) if Z.num_rows else b_extra
    feasible = Polyhedron(A_all, b_all, Z.E if Z.E.shape[0] else None,
                          Z.d if Z.E.shape[0] else None)

    if form == "min-penalty":
        if m > max_m:
            raise ValueError(f"min-penalty needs 2^{m} pieces; refusing m > {max_m}")
        minus = []
        for mask in _subset_masks(m):
            lin = np.zeros(dim)
            const = 0.0
            for i in range(m):
                if mask[i]:
                    lin -= gamma * Y_sel[i]
                else:
                    lin -= gamma * F_lin[i]
                    const -= gamma * q[i]
            minus.append(QuadraticFn.affine(lin, const))
        return DiffMaxProgram(MaxOfQuadratics([f]), MaxOfQuadratics(minus),
                              feasible)

    if form == "quadratic-penalty":
        # y'F(x,y) = q'y + y'Nx + y'My as a symmetric quadratic form in z
        H = np.zeros((dim, dim))
        H[n:, :n] = N
        H[n:, n:] = M + M.T
        H = H + H.T
        H[n:, n:] /= 2.0   # keep y'My counted once after symmetrization
        lin = np.concatenate([np.zeros(n), q])
        penalty = QuadraticFn(H / 1.0, lin, 0.0)
        total = QuadraticFn(f.hessian + gamma * penalty.hessian,
                            f.linear + gamma * penalty.linear,
                            f.constant)
        return DiffMaxProgram(MaxOfQuadratics([total]),
                              MaxOfQuadratics([QuadraticFn.zero(dim)]), feasible)

    if form == "regularized":
        if epsilon is None:
            raise ValueError("regularized form needs epsilon")
        H = np.zeros((dim, dim))
        H[n:, :n] = N
        H[n:, n:] = M + M.T
        H = H + H.T
        H[n:, n:] /= 2.0
        lin = np.concatenate([np.zeros(n), q])
        return DQCProgram(q1=f, minus_pieces=(QuadraticFn.zero(dim),),
                          Qc=H, c=lin, beta1=None, beta2=float(epsilon),
                          linear=feasible)

    raise ValueError(f"unsupported form: {form}")


def complementarity_penalty_value(y, Fval):
    """sum_i min(y_i, F_i); zero exactly on the complementary set."""
    return float(np.sum(np.minimum(y, Fval)))


# ---------------------------------------------------------------------------
# Seeded random factories


def _random_symmetric(rng, n, eig_lo, eig_hi):
    O, _ = np.linalg.qr(rng.normal(size=(n, n)))
    return O @ np.diag(rng.uniform(eig_lo, eig_hi, size=n)) @ O.T


def random_instance(kind, dims, seed):
    """Reproducible problem factory; identical (kind, dims, seed) gives an
    identical instance.

    kinds: ``problem5`` (nonzero plus Hessian), ``qp`` (indefinite
    quadratic on a box with random cuts), ``diffmax`` (general two-max
    program on a box), ``prop9b`` (concave pieces, strictly convex minus
    part), ``dqc`` (single upper quadratic bound).
    """
    rng = np.random.default_rng(seed)
    n = int(dims.get("n", 2)) if isinstance(dims, dict) else int(dims)
    dims = dims if isinstance(dims, dict) else {}
    k1 = int(dims.get("k1", 2))
    k2 = int(dims.get("k2", 2))
    m = int(dims.get("m", 4))

    if kind in ("problem5", "problem5-coercive"):
        while True:
            P = _random_symmetric(rng, n, -2.0, 2.0)
            if np.max(np.abs(P)) > 1e-6:
                break
        if kind == "problem5-coercive":
            # concave minus part makes the objective coercive, so descent
            # methods actually reach its stationary points
            Q = _random_symmetric(rng, n, -2.0, -0.1)
        else:
            Q = _random_symmetric(rng, n, -2.0, 2.0)
        psi1 = QuadraticFn(P, rng.normal(size=n), rng.normal())
        psi2 = QuadraticFn(Q, rng.normal(size=n), rng.normal())
        return psi1, psi2

    if kind == "qp":
        quad = QuadraticFn(_random_symmetric(rng, n, -2.0, 2.0),
                           rng.normal(size=n), rng.normal())
        X = _random_polytope(rng, n, m)
        return quad, X

    if kind == "diffmax":
        plus = [QuadraticFn(_random_symmetric(rng, n, -2.0, 2.0),
                            rng.normal(size=n), rng.normal()) for _ in range(k1)]
        minus = [QuadraticFn(_random_symmetric(rng, n, -2.0, 2.0),
                             rng.normal(size=n), rng.normal()) for _ in range(k2)]
        X = _random_polytope(rng, n, m)
        return DiffMaxProgram(MaxOfQuadratics(plus), MaxOfQuadratics(minus), X)

    if kind == "prop9b":
        pieces = [QuadraticFn(_random_symmetric(rng, n, -2.0, -0.1),
                              rng.normal(size=n), rng.normal()) for _ in range(k1)]
        q2 = QuadraticFn(_random_symmetric(rng, n, 0.1, 2.0),
                         rng.normal(size=n), rng.normal())
        return pieces, q2

    if kind == "dqc":
        q1 = QuadraticFn(_random_symmetric(rng, n, -2.0, 2.0),
                         rng.normal(size=n), 0.0)
        pieces = tuple(QuadraticFn(_random_symmetric(rng, n, -2.0, 2.0),
                                   rng.normal(size=n), rng.normal())
                       for _ in range(k2))
        Qc = _random_symmetric(rng, n, 0.5, 2.0)
        return DQCProgram(q1=q1, minus_pieces=pieces, Qc=Qc,
                          c=rng.normal(size=n) * 0.1, beta1=None,
                          beta2=float(rng.uniform(0.5, 2.0)),
                          linear=Polyhedron.whole_space(n))

    raise ValueError(f"unsupported kind: {kind}")


def _random_polytope(rng, n, m):
    """A box plus random cuts through a neighborhood of the origin."""
    box = Polyhedron.box(-np.ones(n) * 3.0, np.ones(n) * 3.0)
    if m <= 2 * n:
        return Polyhedron(box.A[:m] if m else np.zeros((0, n)), box.b[:m])
    extra = m - 2 * n
    A = rng.normal(size=(extra, n))
    A /= np.linalg.norm(A, axis=1, keepdims=True)
    b = rng.uniform(0.5, 2.5, size=extra)
    return Polyhedron(np.vstack([box.A, A]), np.concatenate([box.b, b]))
