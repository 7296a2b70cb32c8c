"""Least-squares piecewise-affine regression by majorization-minimization.

The model predicts  max_i(a_i'x + alpha_i) - max_j(b_j'x + beta_j); the
training objective is the mean squared residual with a 1/(2N) factor.  The
surrogate splits the squared loss into a nondecreasing and a nonincreasing
convex half and linearizes the concave occurrence inside each, which gives
a convex majorizer that touches at the anchor; minimizing it is a convex
QP solved through an epigraph reformulation.  Under this surrogate the
objective values themselves decrease monotonically.
"""

import csv
import numpy as np
from dataclasses import dataclass, field
from concurrent.futures import ThreadPoolExecutor

import cvxopt
from scipy.optimize import linprog
from sklearn.base import BaseEstimator, RegressorMixin

from .core import Polyhedron, TOL_ACT

cvxopt.solvers.options["show_progress"] = False

QP_KKT_TOL = 1e-8
QP_MAX_ITERS = 200      # interior-point iterations; far below the 1e4 cap


# ---------------------------------------------------------------------------
# Model and data containers


@dataclass(frozen=True, eq=False)
class RegressionModel:
    """Parameter block of the difference-of-max-affine predictor."""

    a: np.ndarray          # (k1, d)
    alpha: np.ndarray      # (k1,)
    b: np.ndarray          # (k2, d)
    beta: np.ndarray       # (k2,)
    constraint_set: Polyhedron | None = None

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        b = np.atleast_2d(np.asarray(self.b, dtype=float))
        alpha = np.atleast_1d(np.asarray(self.alpha, dtype=float))
        beta = np.atleast_1d(np.asarray(self.beta, dtype=float))
        if a.shape[0] != alpha.shape[0] or b.shape[0] != beta.shape[0]:
            raise ValueError("offset count must match piece count")
        if a.shape[1] != b.shape[1]:
            raise ValueError("pieces have mismatched input dimension")
        for name, arr in (("a", a), ("alpha", alpha), ("b", b), ("beta", beta)):
            arr = arr.copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def k1(self):
        return self.a.shape[0]

    @property
    def k2(self):
        return self.b.shape[0]

    @property
    def d(self):
        return self.a.shape[1]

    @property
    def dim(self):
        return (self.k1 + self.k2) * (self.d + 1)

    def theta(self):
        return pack_theta(self.a, self.alpha, self.b, self.beta)

    @staticmethod
    def from_theta(theta, k1, k2, d, constraint_set=None):
        a, alpha, b, beta = unpack_theta(theta, k1, k2, d)
        return RegressionModel(a, alpha, b, beta, constraint_set)

    def predict(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return (np.max(X @ self.a.T + self.alpha, axis=1)
                - np.max(X @ self.b.T + self.beta, axis=1))

    def objective(self, data):
        r = data.y - self.predict(data.X)
        return float(0.5 * np.mean(r ** 2))


def pack_theta(a, alpha, b, beta):
    return np.concatenate([np.column_stack([a, alpha]).ravel(),
                           np.column_stack([b, beta]).ravel()])


def unpack_theta(theta, k1, k2, d):
    theta = np.asarray(theta, dtype=float)
    na = k1 * (d + 1)
    A = theta[:na].reshape(k1, d + 1)
    B = theta[na:].reshape(k2, d + 1)
    return A[:, :d], A[:, d], B[:, :d], B[:, d]


@dataclass(frozen=True, eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.atleast_1d(np.asarray(self.y, dtype=float))
        if X.shape[0] != y.shape[0] or X.shape[0] < 1:
            raise ValueError("need N >= 1 samples with matching targets")
        X = X.copy(); X.setflags(write=False)
        y = y.copy(); y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)

    @property
    def N(self):
        return self.X.shape[0]

    @property
    def d(self):
        return self.X.shape[1]

    def design(self):
        """Rows [x_l, 1], the gradient of one affine piece in its block."""
        return np.column_stack([self.X, np.ones(self.N)])

    @staticmethod
    def from_csv(path):
        with open(path, newline="", encoding="utf-8") as fh:
            reader = csv.reader(row for row in fh if not row.startswith("#"))
            header = next(reader)
            if header[-1].strip() != "y":
                raise ValueError("dataset header must end with column 'y'")
            rows = []
            for lineno, row in enumerate(reader, start=2):
                if not row:
                    continue
                try:
                    rows.append([float(v) for v in row])
                except ValueError as exc:
                    raise ValueError(f"line {lineno}: {exc}") from None
        arr = np.asarray(rows, dtype=float)
        return Dataset(arr[:, :-1], arr[:, -1])

    def to_csv(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh)
            w.writerow([f"x{i+1}" for i in range(self.d)] + ["y"])
            for xl, yl in zip(self.X, self.y):
                w.writerow([repr(v) for v in xl] + [repr(float(yl))])


def theta_objective(theta, data, k1, k2):
    a, alpha, b, beta = unpack_theta(theta, k1, k2, data.d)
    r = data.y - (np.max(data.X @ a.T + alpha, axis=1)
                  - np.max(data.X @ b.T + beta, axis=1))
    return float(0.5 * np.mean(r ** 2))


# ---------------------------------------------------------------------------
# Surrogate


@dataclass(frozen=True, eq=False)
class Surrogate:
    """Convex majorizer of the regression loss anchored at one parameter.

    ``i_star``/``j_star`` record the anchor's active pieces (lowest index
    at ties); the linearizations Lu/Lv are the corresponding single-piece
    affine functions of the parameters.
    """

    data: Dataset
    k1: int
    k2: int
    i_star: np.ndarray
    j_star: np.ndarray
    anchor: np.ndarray

    def value(self, theta):
        data = self.data
        a, alpha, b, beta = unpack_theta(theta, self.k1, self.k2, data.d)
        U = data.X @ a.T + alpha
        V = data.X @ b.T + beta
        u = np.max(U, axis=1)
        v = np.max(V, axis=1)
        idx = np.arange(data.N)
        lu = U[idx, self.i_star]
        lv = V[idx, self.j_star]
        up = np.maximum(u - lv - data.y, 0.0)
        lo = np.maximum(data.y - (lu - v), 0.0)
        return float(0.5 * np.mean(up ** 2 + lo ** 2))


def build_surrogate(data, theta, k1, k2):
    """Majorizing convex surrogate at ``theta``; equals the loss there."""
    a, alpha, b, beta = unpack_theta(theta, k1, k2, data.d)
    U = data.X @ a.T + alpha
    V = data.X @ b.T + beta
    return Surrogate(data, k1, k2,
                     np.argmax(U, axis=1), np.argmax(V, axis=1),
                     np.asarray(theta, dtype=float).copy())


def _surrogate_qp(surrogate, constraint_set):
    """Sparse epigraph QP (P, q, G, h) for the surrogate minimization."""
    data = surrogate.data
    N, d = data.N, data.d
    k1, k2 = surrogate.k1, surrogate.k2
    D = (k1 + k2) * (d + 1)
    G_design = data.design()                  # (N, d+1)
    nt, ns, npp, nr = D, D + N, D + 2 * N, D + 3 * N
    nvar = D + 4 * N

    def a_block(i):
        return slice(i * (d + 1), (i + 1) * (d + 1))

    def b_block(j):
        return slice(k1 * (d + 1) + j * (d + 1), k1 * (d + 1) + (j + 1) * (d + 1))

    rows, cols, vals, rhs = [], [], [], []
    r = 0
    for ell in range(N):
        g = G_design[ell]
        js = surrogate.j_star[ell]
        for i in range(k1):
            # (a_i piece) - Lv - t <= 0
            sl = a_block(i)
            cols.extend(range(sl.start, sl.stop)); rows.extend([r] * (d + 1)); vals.extend(g)
            sl = b_block(js)
            cols.extend(range(sl.start, sl.stop)); rows.extend([r] * (d + 1)); vals.extend(-g)
            cols.append(nt + ell); rows.append(r); vals.append(-1.0)
            rhs.append(0.0); r += 1
        ist = surrogate.i_star[ell]
        for j in range(k2):
            # (b_j piece) - Lu + s <= 0
            sl = b_block(j)
            cols.extend(range(sl.start, sl.stop)); rows.extend([r] * (d + 1)); vals.extend(g)
            sl = a_block(ist)
            cols.extend(range(sl.start, sl.stop)); rows.extend([r] * (d + 1)); vals.extend(-g)
            cols.append(ns + ell); rows.append(r); vals.append(1.0)
            rhs.append(0.0); r += 1
        # t - p <= y ;  -p <= 0 ;  -s - r <= -y ; -r <= 0
        rows.append(r); cols.append(nt + ell); vals.append(1.0)
        rows.append(r); cols.append(npp + ell); vals.append(-1.0)
        rhs.append(float(data.y[ell])); r += 1
        rows.append(r); cols.append(npp + ell); vals.append(-1.0)
        rhs.append(0.0); r += 1
        rows.append(r); cols.append(ns + ell); vals.append(-1.0)
        rows.append(r); cols.append(nr + ell); vals.append(-1.0)
        rhs.append(-float(data.y[ell])); r += 1
        rows.append(r); cols.append(nr + ell); vals.append(-1.0)
        rhs.append(0.0); r += 1
    if constraint_set is not None and constraint_set.num_rows:
        for arow, bval in zip(constraint_set.A, constraint_set.b):
            nz = np.nonzero(arow)[0]
            rows.extend([r] * len(nz)); cols.extend(nz); vals.extend(arow[nz])
            rhs.append(float(bval)); r += 1

    Gmat = cvxopt.spmatrix(vals, rows, cols, (r, nvar))
    h = cvxopt.matrix(rhs)
    # 0.5 z'Pz with P = (1/N) I on the p/r blocks; a whisper of Tikhonov on
    # the rest keeps the interior-point KKT system nonsingular.
    diag = np.full(nvar, 1e-10)
    diag[npp:] = 1.0 / N
    P = cvxopt.spdiag(cvxopt.matrix(diag))
    q = cvxopt.matrix(np.zeros(nvar))
    return P, q, Gmat, h, nvar, D


def minimize_surrogate(surrogate, constraint_set=None, start=None):
    """Global minimizer of the surrogate over the parameter polyhedron.

    Epigraph convex QP solved by an interior-point method; the returned
    parameters are safeguarded never to be worse than ``start`` on the
    surrogate.  Returns ``(theta, info)`` where ``info`` reports solver
    status and the KKT residual.
    """
    start = surrogate.anchor if start is None else np.asarray(start, dtype=float)
    P, q, G, h, nvar, D = _surrogate_qp(surrogate, constraint_set)
    opts = {"show_progress": False, "maxiters": QP_MAX_ITERS,
            "abstol": 1e-10, "reltol": 1e-10, "feastol": 1e-9}
    try:
        sol = cvxopt.solvers.qp(P, q, G, h, options=opts)
    except (ValueError, ArithmeticError) as exc:
        return start.copy(), {"status": f"solver-failure: {exc}", "kkt_residual": np.inf}
    z = np.asarray(sol["x"]).ravel()
    lam = np.asarray(sol["z"]).ravel()
    Pz = np.asarray(cvxopt.matrix(P * cvxopt.matrix(z))).ravel()
    Gt_lam = np.asarray(cvxopt.matrix(G.T * cvxopt.matrix(lam))).ravel()
    kkt = float(np.max(np.abs(Pz + np.asarray(q).ravel() + Gt_lam)))
    theta = z[:D]
    info = {"status": sol["status"], "kkt_residual": kkt,
            "iterations": sol.get("iterations")}
    if surrogate.value(theta) > surrogate.value(start):
        theta = start.copy()
        info["safeguarded"] = True
    return theta, info


# ---------------------------------------------------------------------------
# The MM loop


@dataclass
class MMTrace:
    iterates: list = field(default_factory=list)
    surrogate_values: list = field(default_factory=list)
    objective_values: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    termination_reason: str = ""
    stationarity: dict | None = None

    @property
    def final(self):
        return self.iterates[-1]

    @property
    def final_value(self):
        return self.objective_values[-1]


def run_mm(theta0, data, k1, k2, constraint_set=None, max_iter=500,
           tol_step=1e-8, check_stationarity=True):
    """Majorization-minimization from ``theta0`` until the step stalls.

    Each round minimizes the touching surrogate built at the current
    iterate; the trace records iterates, minimized surrogate values,
    objective values and step norms.  On termination the final point is
    submitted to the exact directional-derivative stationarity test.
    """
    theta = np.asarray(theta0, dtype=float).copy()
    if constraint_set is not None and not constraint_set.contains(theta, tol=1e-7):
        raise ValueError("start lies outside the parameter constraint set")
    trace = MMTrace()
    trace.iterates.append(theta.copy())
    trace.objective_values.append(theta_objective(theta, data, k1, k2))
    for _ in range(max_iter):
        surrogate = build_surrogate(data, theta, k1, k2)
        theta_next, info = minimize_surrogate(surrogate, constraint_set, theta)
        step = float(np.linalg.norm(theta_next - theta))
        theta = theta_next
        trace.iterates.append(theta.copy())
        trace.surrogate_values.append(surrogate.value(theta))
        trace.objective_values.append(theta_objective(theta, data, k1, k2))
        trace.step_norms.append(step)
        if step <= tol_step:
            trace.termination_reason = "step-tolerance"
            break
    else:
        trace.termination_reason = "max-iterations"
    if check_stationarity:
        trace.stationarity = regression_stationarity(theta, data, k1, k2,
                                                     constraint_set)
    return trace


def regression_stationarity(theta, data, k1, k2, constraint_set=None,
                            tol=1e-6, tol_act=1e-9, max_combos=512):
    """Exact d-stationarity test of the regression loss at ``theta``.

    The loss is piecewise quadratic in the parameters; its directional
    derivative is assembled per sample from the active pieces and
    minimized over the unit box intersected with the tangent cone.  The
    convex-side maxima become epigraph LPs; concave-side ties are
    enumerated (capped at ``max_combos`` selections, past which the
    verdict degrades to a flag).  A negative minimum is only believed
    after the direction demonstrably decreases the sampled objective,
    since a tie mistaken by ``tol_act`` can fake a small negative value.
    """
    theta = np.asarray(theta, dtype=float)
    a, alpha, b, beta = unpack_theta(theta, k1, k2, data.d)
    U = data.X @ a.T + alpha
    V = data.X @ b.T + beta
    resid = data.y - (np.max(U, axis=1) - np.max(V, axis=1))
    Gd = data.design()
    D = theta.size

    def act(row):
        vmax = np.max(row)
        return np.nonzero(row >= vmax - tol_act * (1.0 + abs(vmax)))[0]

    def block_cols(kind, idx):
        base = idx * (data.d + 1) if kind == "a" else (k1 + idx) * (data.d + 1)
        return np.arange(base, base + data.d + 1)

    # Per-sample contribution r_l * (v'(D) - u'(D)) / N: a term s*max(...)
    # is convex for s > 0 and a selection (concave) for s < 0.
    convex_terms, concave_terms = [], []
    for ell in range(data.N):
        s = resid[ell] / data.N
        if abs(s) < 1e-14:
            continue
        g = Gd[ell]
        for kind, weight, actset in (("b", s, act(V[ell])), ("a", -s, act(U[ell]))):
            forms = []
            for idx in actset:
                vec = np.zeros(D)
                vec[block_cols(kind, idx)] = g
                forms.append(vec)
            if weight > 0:
                convex_terms.append((weight, forms))
            else:
                concave_terms.append((weight, forms))

    tied = [t for t in concave_terms if len(t[1]) > 1]
    combos = int(np.prod([len(t[1]) for t in tied])) if tied else 1
    capped = combos > max_combos

    A_rows = []
    if constraint_set is not None and constraint_set.num_rows:
        for j in constraint_set.active_rows(theta, 1e-7):
            A_rows.append(constraint_set.A[j])
    E = constraint_set.E if constraint_set is not None else np.zeros((0, D))

    n_epi = len(convex_terms)
    nvar = D + n_epi
    base_lin = np.zeros(nvar)
    for w, forms in concave_terms:
        if len(forms) == 1:
            base_lin[:D] += w * forms[0]
    c_epi = np.array([w for w, _ in convex_terms])

    A_ub, b_ub = [], []
    for k, (w, forms) in enumerate(convex_terms):
        for f in forms:
            row = np.zeros(nvar)
            row[:D] = f
            row[D + k] = -1.0
            A_ub.append(row)
            b_ub.append(0.0)
    for arow in A_rows:
        row = np.zeros(nvar)
        row[:D] = arow
        A_ub.append(row)
        b_ub.append(0.0)
    A_eq = None
    if E.shape[0]:
        A_eq = np.hstack([E, np.zeros((E.shape[0], n_epi))])
    bounds = [(-1, 1)] * D + [(None, None)] * n_epi

    best = np.inf
    best_dir = None
    selections = [()] if not tied else itertools_product_capped(
        [range(len(t[1])) for t in tied], max_combos)
    for sel in selections:
        c = base_lin.copy()
        c[D:] = c_epi
        for (w, forms), pick in zip(tied, sel):
            c[:D] += w * forms[pick]
        res = linprog(c, A_ub=np.array(A_ub) if A_ub else None,
                      b_ub=np.array(b_ub) if b_ub else None,
                      A_eq=A_eq, b_eq=np.zeros(E.shape[0]) if A_eq is not None else None,
                      bounds=bounds, method="highs")
        if res.status == 0 and res.fun < best:
            best = res.fun
            best_dir = res.x[:D]
    verdict = "stationary" if best >= -tol else "not-stationary"
    witness_validated = None
    if verdict == "not-stationary" and best_dir is not None:
        f0 = theta_objective(theta, data, k1, k2)
        drops = [theta_objective(theta + delta * best_dir, data, k1, k2) - f0
                 for delta in (1e-9, 1e-7, 1e-5, 1e-3)]
        witness_validated = any(dv < -1e-14 * (1.0 + abs(f0)) for dv in drops)
        if not witness_validated:
            verdict = "stationary"
    if capped:
        verdict = "inconclusive"
    return {"verdict": verdict, "min_directional": float(best),
            "direction": best_dir, "selections_capped": capped,
            "witness_validated": witness_validated}


def itertools_product_capped(ranges, cap):
    import itertools
    out = []
    for combo in itertools.product(*ranges):
        out.append(combo)
        if len(out) >= cap:
            break
    return out


def cluster_values(finals, grid=1e-5):
    """Greedy chain clustering of final values.

    Values are sorted and a new cluster starts whenever the gap to the
    previous value exceeds ``grid``; each cluster reports its mean and
    count, sorted by representative.
    """
    finals = list(finals)
    if not finals:
        raise ValueError("empty input")
    if grid <= 0:
        raise ValueError("grid must be positive")
    vals = np.sort(np.asarray(finals, dtype=float))
    clusters = []
    start = 0
    for k in range(1, len(vals) + 1):
        if k == len(vals) or vals[k] - vals[k - 1] > grid:
            clusters.append((float(np.mean(vals[start:k])), k - start))
            start = k
    return clusters


def random_start(data, k1, k2, rng):
    """Uniform draw on [-R, R]^dim with R = 2 * data scale."""
    R = 2.0 * max(1.0, float(np.max(np.abs(data.X))), float(np.max(np.abs(data.y))))
    return rng.uniform(-R, R, size=(k1 + k2) * (data.d + 1))


def run_multistart(data, k1, k2, n_starts, seed=0, constraint_set=None,
                   max_iter=500, tol_step=1e-8, jobs=1):
    """Independent MM chains from seeded random starts, reported in order.

    Start ``i`` uses ``default_rng(seed + i)``, so a prefix of a longer
    multistart reproduces a shorter one exactly.
    """
    def one(i):
        rng = np.random.default_rng(seed + i)
        theta0 = random_start(data, k1, k2, rng)
        trace = run_mm(theta0, data, k1, k2, constraint_set,
                       max_iter=max_iter, tol_step=tol_step)
        return {"start": i,
                "iterations": len(trace.step_norms),
                "final_value": trace.final_value,
                "verdict": trace.stationarity["verdict"],
                "theta": trace.final,
                "trace": trace}

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, range(n_starts)))
    else:
        results = [one(i) for i in range(n_starts)]
    results.sort(key=lambda rec: rec["start"])
    return results


# ---------------------------------------------------------------------------
# Estimator front end


class PiecewiseAffineRegressor(BaseEstimator, RegressorMixin):
    """Difference-of-max-affine least-squares regressor trained by MM.

    Parameters
    ----------
    k1, k2 : int
        Number of affine pieces in the positive and negative max.
    n_starts : int
        Multistart count; the best final objective wins.
    seed : int
        Base seed; start i draws from ``default_rng(seed + i)``.
    max_iter, tol_step : MM loop controls.
    """

    def __init__(self, k1=2, k2=1, n_starts=10, seed=0, max_iter=200,
                 tol_step=1e-8):
        self.k1 = k1
        self.k2 = k2
        self.n_starts = n_starts
        self.seed = seed
        self.max_iter = max_iter
        self.tol_step = tol_step

    def fit(self, X, y):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        y = np.asarray(y, dtype=float).ravel()
        data = Dataset(X, y)
        results = run_multistart(data, self.k1, self.k2, self.n_starts,
                                 seed=self.seed, max_iter=self.max_iter,
                                 tol_step=self.tol_step)
        best = min(results, key=lambda rec: rec["final_value"])
        self.model_ = RegressionModel.from_theta(best["theta"], self.k1,
                                                 self.k2, data.d)
        self.objective_ = best["final_value"]
        self.stationarity_ = best["trace"].stationarity
        self.final_values_ = [rec["final_value"] for rec in results]
        self.n_iter_ = best["iterations"]
        return self

    def predict(self, X):
        if not hasattr(self, "model_"):
            raise AttributeError("fit the estimator before calling predict")
        return self.model_.predict(np.atleast_2d(np.asarray(X, dtype=float)))
